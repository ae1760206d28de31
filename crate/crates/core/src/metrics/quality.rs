use crate::error::{Error, Result};
use crate::image::Image;

const PEAK: f64 = 255.0;
const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;

/// Standard MS-SSIM scale weights, coarsest last.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn scaled(img: &Image) -> Vec<f64> {
    img.pixels().iter().map(|v| v * PEAK).collect()
}

/// Mean squared error on the 8-bit scale.
pub fn mse_8bit(a: &Image, b: &Image) -> Result<f64> {
    a.same_dims(b, "psnr")?;
    if a.pixels().is_empty() {
        return Err(Error::Shape("metric of an empty image".into()));
    }
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| {
            let d = PEAK * x - PEAK * y;
            d * d
        })
        .sum();
    Ok(sum / a.pixels().len() as f64)
}

fn db(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// PSNR in dB on the 8-bit scale; `+inf` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(db(mse_8bit(a, b)?))
}

fn gaussian_window() -> [f64; WINDOW] {
    let r = (WINDOW / 2) as f64;
    let mut w = [0.0; WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Separable valid-region filtering with the SSIM window.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64; WINDOW]) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h + 1 - WINDOW, w + 1 - WINDOW);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let row = &src[y * w + x..y * w + x + WINDOW];
            tmp[y * ow + x] = row.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean SSIM and mean contrast-structure term over the valid region.
fn ssim_terms(a: &[f64], b: &[f64], h: usize, w: usize) -> (f64, f64) {
    let k = gaussian_window();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let (mu_a, _, _) = filter_valid(a, h, w, &k);
    let (mu_b, _, _) = filter_valid(b, h, w, &k);
    let (e_aa, _, _) = filter_valid(&aa, h, w, &k);
    let (e_bb, _, _) = filter_valid(&bb, h, w, &k);
    let (e_ab, _, _) = filter_valid(&ab, h, w, &k);
    let n = mu_a.len() as f64;
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let c = (2.0 * cov + C2) / (va + vb + C2);
        let l = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        ssim += l * c;
        cs += c;
    }
    (ssim / n, cs / n)
}

fn check_window(a: &Image, b: &Image, what: &str) -> Result<()> {
    a.same_dims(b, what)?;
    let (h, w) = a.dims();
    if h < WINDOW || w < WINDOW {
        return Err(Error::Precondition(format!(
            "{what} needs at least {WINDOW}x{WINDOW} pixels, got {h}x{w}"
        )));
    }
    Ok(())
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), valid region only.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_window(a, b, "ssim")?;
    let (h, w) = a.dims();
    Ok(ssim_terms(&scaled(a), &scaled(b), h, w).0)
}

fn downsample2(src: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let s = src[2 * y * w + 2 * x]
                + src[2 * y * w + 2 * x + 1]
                + src[(2 * y + 1) * w + 2 * x]
                + src[(2 * y + 1) * w + 2 * x + 1];
            out[y * ow + x] = s / 4.0;
        }
    }
    (out, oh, ow)
}

/// Number of scales MS-SSIM uses for an image of this size.
pub fn ms_ssim_scales(h: usize, w: usize) -> usize {
    let mut m = 0;
    let mut side = h.min(w);
    while m < MS_SSIM_WEIGHTS.len() && side >= WINDOW {
        m += 1;
        side /= 2;
    }
    m
}

/// Multi-scale SSIM. Uses up to five scales, fewer for small images with
/// the weights renormalised to sum to one. Negative terms are clamped to 0.
pub fn ms_ssim(a: &Image, b: &Image) -> Result<f64> {
    check_window(a, b, "ms-ssim")?;
    let (mut h, mut w) = a.dims();
    let m = ms_ssim_scales(h, w);
    let weights = &MS_SSIM_WEIGHTS[..m];
    let total: f64 = weights.iter().sum();
    let (mut xa, mut xb) = (scaled(a), scaled(b));
    let mut value = 1.0;
    for (j, &wt) in weights.iter().enumerate() {
        let (s, cs) = ssim_terms(&xa, &xb, h, w);
        let term = if j + 1 == m { s } else { cs };
        value *= term.max(0.0).powf(wt / total);
        if j + 1 < m {
            let (da, nh, nw) = downsample2(&xa, h, w);
            let (db_, _, _) = downsample2(&xb, h, w);
            xa = da;
            xb = db_;
            h = nh;
            w = nw;
        }
    }
    Ok(value)
}

/// Yim-Bovik blocking effect factor of `img` for block size `block`.
pub fn blocking_effect_factor(img: &Image, block: usize) -> Result<f64> {
    let (h, w) = img.dims();
    if block < 2 || h < block || w < block {
        return Err(Error::Precondition(format!(
            "psnrb needs at least one {block}x{block} block, got {h}x{w}"
        )));
    }
    let px = scaled(img);
    let (mut sb, mut nb, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
    let mut add = |d: f64, boundary: bool| {
        if boundary {
            sb += d * d;
            nb += 1;
        } else {
            sc += d * d;
            nc += 1;
        }
    };
    for y in 0..h {
        for x in 0..w - 1 {
            add(px[y * w + x] - px[y * w + x + 1], (x + 1) % block == 0);
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            add(px[y * w + x] - px[(y + 1) * w + x], (y + 1) % block == 0);
        }
    }
    let d_b = if nb > 0 { sb / nb as f64 } else { 0.0 };
    let d_c = if nc > 0 { sc / nc as f64 } else { 0.0 };
    let eta = (block as f64).log2() / (h.min(w) as f64).log2();
    Ok(if d_b > d_c { eta * (d_b - d_c) } else { 0.0 })
}

/// PSNR with the blocking effect factor of `test` added to the MSE.
pub fn psnrb(reference: &Image, test: &Image, block: usize) -> Result<f64> {
    let mse = mse_8bit(reference, test)?;
    let bef = blocking_effect_factor(test, block)?;
    Ok(db(mse + bef))
}
