use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metrics::RdCurve;

const MIN_POINTS: usize = 4;

/// Least-squares cubic `c0 + c1 x + c2 x^2 + c3 x^3`.
fn fit_cubic(xs: &[f64], ys: &[f64]) -> Result<[f64; 4]> {
    let n = xs.len();
    let a = DMatrix::from_fn(n, 4, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Curve(format!("cubic fit failed: {e}")))?;
    Ok([sol[0], sol[1], sol[2], sol[3]])
}

fn integral(c: &[f64; 4], lo: f64, hi: f64) -> f64 {
    let prim = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
    prim(hi) - prim(lo)
}

fn checked(curve: &RdCurve) -> Result<(Vec<f64>, Vec<f64>)> {
    if curve.points().len() < MIN_POINTS {
        return Err(Error::Curve(format!(
            "curve {:?} has {} points, BD metrics need {MIN_POINTS}",
            curve.label(),
            curve.points().len()
        )));
    }
    let mut lr = Vec::new();
    let mut q = Vec::new();
    for p in curve.points() {
        if !p.psnr.is_finite() {
            return Err(Error::Curve(format!(
                "curve {:?} has a non-finite PSNR at qf {}",
                curve.label(),
                p.qf
            )));
        }
        lr.push(p.bpp.log10());
        q.push(p.psnr);
    }
    Ok((lr, q))
}

fn overlap(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = min(a).max(min(b));
    let hi = max(a).min(max(b));
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Curve(format!("curves do not overlap ({lo} .. {hi})")));
    }
    Ok((lo, hi))
}

/// Overlapping `log10(bpp)` interval used by [`bd_psnr`].
pub fn rate_overlap(a: &RdCurve, b: &RdCurve) -> Result<(f64, f64)> {
    let (la, _) = checked(a)?;
    let (lb, _) = checked(b)?;
    overlap(&la, &lb)
}

/// Overlapping PSNR interval used by [`bd_rate`].
pub fn psnr_overlap(a: &RdCurve, b: &RdCurve) -> Result<(f64, f64)> {
    let (_, qa) = checked(a)?;
    let (_, qb) = checked(b)?;
    overlap(&qa, &qb)
}

/// Average PSNR gain of `test` over `reference` at equal rate, in dB.
pub fn bd_psnr(reference: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (la, qa) = checked(reference)?;
    let (lb, qb) = checked(test)?;
    let (lo, hi) = overlap(&la, &lb)?;
    let pa = fit_cubic(&la, &qa)?;
    let pb = fit_cubic(&lb, &qb)?;
    Ok((integral(&pb, lo, hi) - integral(&pa, lo, hi)) / (hi - lo))
}

/// Average rate change of `test` relative to `reference` at equal PSNR, in
/// percent. Negative means `test` needs fewer bits.
pub fn bd_rate(reference: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (la, qa) = checked(reference)?;
    let (lb, qb) = checked(test)?;
    let (lo, hi) = overlap(&qa, &qb)?;
    let pa = fit_cubic(&qa, &la)?;
    let pb = fit_cubic(&qb, &lb)?;
    let avg = (integral(&pb, lo, hi) - integral(&pa, lo, hi)) / (hi - lo);
    Ok((10f64.powf(avg) - 1.0) * 100.0)
}
