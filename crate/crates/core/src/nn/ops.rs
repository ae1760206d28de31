//! Parameter-free layers: ReLU, x2 pixel shuffle and nearest-neighbour x2
//! upsampling, each with its adjoint.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes `grad_out` where `x > 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    x.ensure_same_dims(grad_out, "relu_backward")?;
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(x.dims(), data)
}

/// `(b, 4c, h, w) -> (b, c, 2h, 2w)`. Channels `4k..4k+4` fill the
/// top-left, top-right, bottom-left and bottom-right of each 2x2 cell of
/// output channel `k`.
pub fn pixel_shuffle_x2(x: &Tensor) -> Result<Tensor> {
    let [b, c4, h, w] = x.dims();
    if c4 % 4 != 0 || c4 == 0 {
        return Err(Error::Config(format!(
            "pixel shuffle needs a channel count divisible by 4, got {c4}"
        )));
    }
    let c = c4 / 4;
    let mut out = Tensor::zeros([b, c, 2 * h, 2 * w]);
    for n in 0..b {
        for k in 0..c {
            for sub in 0..4 {
                let (dy, dx) = (sub / 2, sub % 2);
                for y in 0..h {
                    for xx in 0..w {
                        out.set(n, k, 2 * y + dy, 2 * xx + dx, x.get(n, 4 * k + sub, y, xx));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle_x2`]; also its adjoint, since the shuffle is a
/// permutation.
pub fn pixel_unshuffle_x2(x: &Tensor) -> Result<Tensor> {
    let [b, c, h2, w2] = x.dims();
    if h2 % 2 != 0 || w2 % 2 != 0 {
        return Err(Error::Config(format!(
            "pixel unshuffle needs even spatial dims, got {h2}x{w2}"
        )));
    }
    let (h, w) = (h2 / 2, w2 / 2);
    let mut out = Tensor::zeros([b, 4 * c, h, w]);
    for n in 0..b {
        for k in 0..c {
            for sub in 0..4 {
                let (dy, dx) = (sub / 2, sub % 2);
                for y in 0..h {
                    for xx in 0..w {
                        out.set(n, 4 * k + sub, y, xx, x.get(n, k, 2 * y + dy, 2 * xx + dx));
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn upsample_nearest_x2(x: &Tensor) -> Tensor {
    let [b, c, h, w] = x.dims();
    let mut out = Tensor::zeros([b, c, 2 * h, 2 * w]);
    for n in 0..b {
        for k in 0..c {
            for y in 0..2 * h {
                for xx in 0..2 * w {
                    out.set(n, k, y, xx, x.get(n, k, y / 2, xx / 2));
                }
            }
        }
    }
    out
}

/// Adjoint of [`upsample_nearest_x2`]: sums each 2x2 cell.
pub fn upsample_nearest_x2_backward(grad_out: &Tensor) -> Result<Tensor> {
    let [b, c, h2, w2] = grad_out.dims();
    if h2 % 2 != 0 || w2 % 2 != 0 {
        return Err(Error::Shape(format!(
            "upsample gradient must have even dims, got {h2}x{w2}"
        )));
    }
    let mut out = Tensor::zeros([b, c, h2 / 2, w2 / 2]);
    for n in 0..b {
        for k in 0..c {
            for y in 0..h2 {
                for x in 0..w2 {
                    let v = out.get(n, k, y / 2, x / 2) + grad_out.get(n, k, y, x);
                    out.set(n, k, y / 2, x / 2, v);
                }
            }
        }
    }
    Ok(out)
}
