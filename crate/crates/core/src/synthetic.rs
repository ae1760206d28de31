//! Seeded synthetic grayscale scenes for desk-scale experiments: a smooth
//! background, flat shapes with sharp borders, a striped texture patch and
//! mild noise, quantised to 8 bits.

use rand::RngExt;

use crate::image::Image;
use crate::nn::seed_rng;

pub fn scene(height: usize, width: usize, seed: u64) -> Image {
    let mut rng = seed_rng(seed);
    let (hf, wf) = (height as f64, width as f64);
    let g0 = rng.random_range(0.2..0.8);
    let gy = rng.random_range(-0.3..0.3);
    let gx = rng.random_range(-0.3..0.3);
    let mut px: Vec<f64> = (0..height * width)
        .map(|i| g0 + gy * ((i / width) as f64 / hf - 0.5) + gx * ((i % width) as f64 / wf - 0.5))
        .collect();

    for _ in 0..rng.random_range(2..5usize) {
        let v = rng.random_range(0.0..1.0);
        let (cy, cx) = (rng.random_range(0.0..hf), rng.random_range(0.0..wf));
        let r = rng.random_range(0.1..0.35) * hf.min(wf);
        let disk = rng.random_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                let inside = if disk {
                    dy * dy + dx * dx <= r * r
                } else {
                    dy.abs() <= r && dx.abs() <= 0.7 * r
                };
                if inside {
                    px[y * width + x] = v;
                }
            }
        }
    }

    let period = rng.random_range(3.0..8.0);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let amp = rng.random_range(0.05..0.15);
    let (ty, tx) = (rng.random_range(0..height / 2), rng.random_range(0..width / 2));
    for y in ty..ty + height / 2 {
        for x in tx..tx + width / 2 {
            let t = (y as f64 * angle.sin() + x as f64 * angle.cos()) * std::f64::consts::TAU / period;
            px[y * width + x] += amp * t.sin();
        }
    }

    for v in px.iter_mut() {
        *v += rng.random_range(-0.02..0.02);
        *v = ((*v).clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
    Image::from_vec(height, width, px).expect("dims match")
}

/// `n` scenes with consecutive seeds starting at `seed`.
pub fn scenes(n: usize, height: usize, width: usize, seed: u64) -> Vec<Image> {
    (0..n as u64).map(|k| scene(height, width, seed + k)).collect()
}
