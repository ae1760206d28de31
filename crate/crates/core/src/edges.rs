//! Binary edge maps: a built-in Canny detector and ingestion of externally
//! computed soft maps.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::reflect_index;
use crate::pnm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    Canny,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    height: usize,
    width: usize,
    bits: Vec<u8>,
    source: EdgeSource,
}

impl EdgeMap {
    pub fn from_bits(height: usize, width: usize, bits: Vec<u8>, source: EdgeSource) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape(format!(
                "edge map of {height}x{width} needs {} values, got {}",
                height * width,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Precondition("edge map values must be 0 or 1".into()));
        }
        Ok(Self {
            height,
            width,
            bits,
            source,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool, source: EdgeSource) -> Self {
        Self {
            height,
            width,
            bits: vec![value as u8; height * width],
            source,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn source(&self) -> EdgeSource {
        self.source
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x] == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// The map as a 0/1 image, the form the losses consume.
    pub fn to_image(&self) -> Image {
        Image::from_vec(
            self.height,
            self.width,
            self.bits.iter().map(|&b| b as f64).collect(),
        )
        .expect("dims match by construction")
    }
}

pub fn edge_density(e: &EdgeMap) -> f64 {
    if e.bits.is_empty() {
        return 0.0;
    }
    e.count() as f64 / e.bits.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyConfig {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 0.1,
            high: 0.3,
        }
    }
}

impl CannyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("canny sigma {} must be > 0", self.sigma)));
        }
        if !(0.0 < self.low && self.low < self.high && self.high <= 1.0) {
            return Err(Error::Config(format!(
                "canny thresholds need 0 < low < high <= 1, got {} and {}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

const TAN_22_5: f64 = 0.414_213_562_373_095_1;

/// Canny edges. Sobel differences are taken first and then smoothed, which
/// equals smoothing first away from the border and keeps the result exactly
/// invariant to intensity offsets and to inversion.
pub fn canny(img: &Image, cfg: &CannyConfig) -> Result<EdgeMap> {
    cfg.validate()?;
    let (h, w) = img.dims();
    if h < 5 || w < 5 {
        return Err(Error::Precondition(format!(
            "canny needs at least 5x5 pixels, got {h}x{w}"
        )));
    }
    let (gx, gy) = sobel(img);
    let kernel = gaussian_kernel(cfg.sigma);
    let gx = blur(&gx, h, w, &kernel);
    let gy = blur(&gy, h, w, &kernel);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();

    let thin = suppress_non_maxima(&gx, &gy, &mag, h, w);
    let peak = thin.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(EdgeMap::filled(h, w, false, EdgeSource::Canny));
    }
    let (lo, hi) = (cfg.low * peak, cfg.high * peak);
    let bits = hysteresis(&thin, h, w, lo, hi);
    EdgeMap::from_bits(h, w, bits, EdgeSource::Canny)
}

fn sobel(img: &Image) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = img.dims();
    let p = |y: isize, x: isize| img.get(reflect_index(y, h), reflect_index(x, w));
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (p(y - 1, x + 1) - p(y - 1, x - 1))
                + 2.0 * (p(y, x + 1) - p(y, x - 1))
                + (p(y + 1, x + 1) - p(y + 1, x - 1));
            gy[i] = (p(y + 1, x - 1) - p(y - 1, x - 1))
                + 2.0 * (p(y + 1, x) - p(y - 1, x))
                + (p(y + 1, x + 1) - p(y - 1, x + 1));
        }
    }
    (gx, gy)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable blur with reflect padding.
fn blur(src: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * src[y * w + reflect_index(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * tmp[reflect_index(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Keeps a pixel when its magnitude is at least that of both neighbours
/// along the quantised gradient direction. Out-of-image neighbours count as 0.
fn suppress_non_maxima(gx: &[f64], gy: &[f64], mag: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |y: isize, x: isize| {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let (ax, ay) = (gx[i].abs(), gy[i].abs());
            let (dy, dx): (isize, isize) = if ay <= TAN_22_5 * ax {
                (0, 1)
            } else if ax <= TAN_22_5 * ay {
                (1, 0)
            } else if (gx[i] > 0.0) == (gy[i] > 0.0) {
                (1, 1)
            } else {
                (1, -1)
            };
            let (yi, xi) = (y as isize, x as isize);
            if m >= at(yi + dy, xi + dx) && m >= at(yi - dy, xi - dx) {
                out[i] = m;
            }
        }
    }
    out
}

fn hysteresis(thin: &[f64], h: usize, w: usize, lo: f64, hi: f64) -> Vec<u8> {
    let mut bits = vec![0u8; h * w];
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= hi && m > 0.0 {
            bits[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (y, x) = ((i / w) as isize, (i % w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if bits[j] == 0 && thin[j] >= lo && thin[j] > 0.0 {
                    bits[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    bits
}

/// Reads an 8-bit PGM soft edge map and binarises it (`> 127` is an edge).
pub fn load_edge_map(path: &Path, expected_dims: (usize, usize)) -> Result<EdgeMap> {
    let img = pnm::read(path)?;
    if img.dims() != expected_dims {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            message: format!(
                "edge map is {}x{}, expected {}x{}",
                img.height(),
                img.width(),
                expected_dims.0,
                expected_dims.1
            ),
        });
    }
    let bits = img.to_u8().into_iter().map(|v| (v > 127) as u8).collect();
    EdgeMap::from_bits(img.height(), img.width(), bits, EdgeSource::External)
}

/// Writes a binary map as a P5 PGM with edges at 255.
pub fn save_edge_map(path: &Path, e: &EdgeMap) -> Result<()> {
    pnm::write_pgm(path, &e.to_image())
}
