//! Mean-reduced MSE and the edge-aware loss, each with its gradient.

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    alpha: f64,
}

impl LossConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("loss alpha {alpha} outside [0, 1]")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { alpha: 0.75 }
    }
}

/// `mean((pred - target)^2)` and its gradient `2 (pred - target) / n`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    weighted_loss(pred, target, |_| 1.0)
}

/// `alpha * MSE + gamma * mean((E r)^2)` with `r = pred - target`.
///
/// For a binary `E` this is a per-pixel weight of 1 on edges and `alpha`
/// elsewhere, which is how it is evaluated.
pub fn edge_aware_loss(
    pred: &Tensor,
    target: &Tensor,
    edges: &Tensor,
    cfg: &LossConfig,
) -> Result<(f64, Tensor)> {
    pred.ensure_same_dims(edges, "edge map")?;
    if edges.data().iter().any(|&e| e != 0.0 && e != 1.0) {
        return Err(Error::Precondition("edge map must be binary".into()));
    }
    let e = edges.data();
    let alpha = cfg.alpha;
    weighted_loss(pred, target, |i| if e[i] == 1.0 { 1.0 } else { alpha })
}

fn weighted_loss(pred: &Tensor, target: &Tensor, weight: impl Fn(usize) -> f64) -> Result<(f64, Tensor)> {
    pred.ensure_same_dims(target, "loss target")?;
    let n = pred.len();
    if n == 0 {
        return Err(Error::Shape("loss over an empty tensor".into()));
    }
    let count = n as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (i, (p, t)) in pred.data().iter().zip(target.data()).enumerate() {
        let r = p - t;
        let w = weight(i);
        total += w * (r * r);
        grad.push(2.0 * (w * r) / count);
    }
    Ok((total / count, Tensor::from_vec(pred.dims(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seed_rng;
    use rand::RngExt;

    fn random(dims: [usize; 4], seed: u64) -> Tensor {
        let mut rng = seed_rng(seed);
        let n = dims.iter().product();
        Tensor::from_vec(dims, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    fn random_edges(dims: [usize; 4], seed: u64) -> Tensor {
        random(dims, seed).map(|v| if v > 0.6 { 1.0 } else { 0.0 })
    }

    #[test]
    fn identical_inputs() {
        let a = random([1, 1, 5, 5], 1);
        let (v, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_residual() {
        let t = Tensor::filled([2, 1, 3, 7], 0.2);
        let p = t.map(|v| v + 0.1);
        let (v, _) = mse_loss(&p, &t).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
    }

    #[test]
    fn mse_matches_scalar_loop() {
        let (p, t) = (random([2, 1, 6, 9], 2), random([2, 1, 6, 9], 3));
        let mut acc = 0.0;
        for i in 0..p.len() {
            acc += (p.data()[i] - t.data()[i]).powi(2);
        }
        let (v, _) = mse_loss(&p, &t).unwrap();
        assert!((v - acc / p.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn alpha_one_and_full_edges_reduce_to_mse() {
        let (p, t) = (random([1, 1, 6, 6], 4), random([1, 1, 6, 6], 5));
        let mse = mse_loss(&p, &t).unwrap();
        let e = random_edges([1, 1, 6, 6], 6);
        assert_eq!(edge_aware_loss(&p, &t, &e, &LossConfig::new(1.0).unwrap()).unwrap(), mse);
        let ones = Tensor::filled([1, 1, 6, 6], 1.0);
        for alpha in [0.0, 0.3, 0.75] {
            let cfg = LossConfig::new(alpha).unwrap();
            assert_eq!(edge_aware_loss(&p, &t, &ones, &cfg).unwrap(), mse);
        }
    }

    #[test]
    fn no_edges_scales_by_alpha() {
        let (p, t) = (random([1, 1, 6, 6], 7), random([1, 1, 6, 6], 8));
        let zeros = Tensor::zeros([1, 1, 6, 6]);
        let (v, _) = edge_aware_loss(&p, &t, &zeros, &LossConfig::new(0.75).unwrap()).unwrap();
        let (m, _) = mse_loss(&p, &t).unwrap();
        assert!((v - 0.75 * m).abs() < 1e-15);
    }

    #[test]
    fn matches_two_term_definition_and_bounds() {
        let (p, t) = (random([1, 1, 6, 6], 9), random([1, 1, 6, 6], 10));
        let e = random_edges([1, 1, 6, 6], 11);
        let cfg = LossConfig::new(0.75).unwrap();
        let (v, _) = edge_aware_loss(&p, &t, &e, &cfg).unwrap();
        let n = p.len() as f64;
        let (mut mse, mut emse) = (0.0, 0.0);
        for i in 0..p.len() {
            let r = p.data()[i] - t.data()[i];
            mse += r * r / n;
            emse += (e.data()[i] * r).powi(2) / n;
        }
        assert!((v - (cfg.alpha() * mse + cfg.gamma() * emse)).abs() < 1e-14);
        assert!(v >= cfg.alpha() * mse - 1e-15 && v <= mse + 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (p, t) = (random([1, 1, 6, 6], 12), random([1, 1, 6, 6], 13));
        let e = random_edges([1, 1, 6, 6], 14);
        let cfg = LossConfig::new(0.75).unwrap();
        let (_, g) = edge_aware_loss(&p, &t, &e, &cfg).unwrap();
        let (_, gm) = mse_loss(&p, &t).unwrap();
        let h = 1e-5;
        for i in 0..p.len() {
            let eval = |d: f64, edge: bool| {
                let mut q = p.clone();
                q.data_mut()[i] += d;
                if edge {
                    edge_aware_loss(&q, &t, &e, &cfg).unwrap().0
                } else {
                    mse_loss(&q, &t).unwrap().0
                }
            };
            for (edge, an) in [(true, g.data()[i]), (false, gm.data()[i])] {
                let fd = (eval(h, edge) - eval(-h, edge)) / (2.0 * h);
                assert!((fd - an).abs() / an.abs().max(1e-12) < 1e-6, "pixel {i}");
            }
        }
    }

    #[test]
    fn growing_edge_residual_increases_loss() {
        let t = Tensor::zeros([1, 1, 4, 4]);
        let mut e = Tensor::zeros([1, 1, 4, 4]);
        e.data_mut()[5] = 1.0;
        let cfg = LossConfig::default();
        let mut prev = -1.0;
        for r in [0.0, 0.1, 0.2, 0.5] {
            let mut p = Tensor::zeros([1, 1, 4, 4]);
            p.data_mut()[5] = r;
            let (v, _) = edge_aware_loss(&p, &t, &e, &cfg).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn errors() {
        let a = Tensor::zeros([1, 1, 4, 4]);
        let b = Tensor::zeros([1, 1, 4, 5]);
        assert!(mse_loss(&a, &b).is_err());
        let soft = Tensor::filled([1, 1, 4, 4], 0.5);
        assert!(edge_aware_loss(&a, &a, &soft, &LossConfig::default()).is_err());
        assert!(LossConfig::new(1.5).is_err());
    }
}
