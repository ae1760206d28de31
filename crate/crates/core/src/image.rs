use crate::error::{Error, Result};
use crate::nn::reflect_index;

/// Single-channel image with samples nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} image needs {} samples, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            pixels,
        }
    }

    /// Maps 8-bit samples to `v / 255`.
    pub fn from_u8(height: usize, width: usize, samples: &[u8]) -> Result<Self> {
        Self::from_vec(height, width, samples.iter().map(|&v| v as f64 / 255.0).collect())
    }

    /// Rounds to the nearest 8-bit level after clamping to `[0, 1]`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// Mirror-pads on the bottom and right to `height x width`.
    pub fn pad_reflect(&self, height: usize, width: usize) -> Result<Image> {
        self.pad_with(height, width, |i, n| reflect_index(i as isize, n))
    }

    /// Pads on the bottom and right by repeating the last row and column.
    pub fn pad_replicate(&self, height: usize, width: usize) -> Result<Image> {
        self.pad_with(height, width, |i, n| i.min(n - 1))
    }

    fn pad_with(&self, height: usize, width: usize, idx: impl Fn(usize, usize) -> usize) -> Result<Image> {
        if height < self.height || width < self.width || self.pixels.is_empty() {
            return Err(Error::Shape(format!(
                "cannot pad {}x{} to {height}x{width}",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(height, width, |y, x| {
            self.get(idx(y, self.height), idx(x, self.width))
        }))
    }

    /// Window of `height x width` starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Shape(format!(
                "crop {height}x{width}@({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(height, width, |y, x| self.get(top + y, left + x)))
    }
}
