//! Quality and rate-distortion metrics.

mod bjontegaard;
mod quality;

use std::io::{Read, Write};

use crate::codec::{bits_per_pixel, Bitstream};
use crate::edges::{canny, CannyConfig, EdgeMap};
use crate::error::{Error, Result};
use crate::image::Image;

pub use bjontegaard::{bd_psnr, bd_rate, psnr_overlap, rate_overlap};
pub use quality::{
    blocking_effect_factor, ms_ssim, ms_ssim_scales, mse_8bit, psnr, psnrb, ssim, MS_SSIM_WEIGHTS,
};

/// Two-class (edge / non-edge) mean intersection over union. A class absent
/// from both maps scores 1.
pub fn miou(e1: &EdgeMap, e2: &EdgeMap) -> Result<f64> {
    if e1.dims() != e2.dims() {
        return Err(Error::Shape(format!(
            "miou: {:?} vs {:?}",
            e1.dims(),
            e2.dims()
        )));
    }
    let mut inter = [0usize; 2];
    let mut union = [0usize; 2];
    for (&a, &b) in e1.bits().iter().zip(e2.bits()) {
        for class in 0..2u8 {
            let (ia, ib) = (a == class, b == class);
            inter[class as usize] += (ia && ib) as usize;
            union[class as usize] += (ia || ib) as usize;
        }
    }
    let iou = |c: usize| {
        if union[c] == 0 {
            1.0
        } else {
            inter[c] as f64 / union[c] as f64
        }
    };
    Ok((iou(0) + iou(1)) / 2.0)
}

/// One rate-distortion sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RdPoint {
    pub qf: u32,
    pub bpp: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub msssim: f64,
    pub psnrb: f64,
    pub miou: f64,
}

impl RdPoint {
    /// Field-wise mean. Each field is summed in sorted order, so the result
    /// does not depend on the order of `points`.
    pub fn mean(points: &[RdPoint]) -> Result<RdPoint> {
        let first = points
            .first()
            .ok_or_else(|| Error::Curve("cannot average zero points".into()))?;
        if points.iter().any(|p| p.qf != first.qf) {
            return Err(Error::Curve("averaging points with different qf".into()));
        }
        let avg = |f: fn(&RdPoint) -> f64| {
            let mut v: Vec<f64> = points.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v.iter().sum::<f64>() / v.len() as f64
        };
        Ok(RdPoint {
            qf: first.qf,
            bpp: avg(|p| p.bpp),
            psnr: avg(|p| p.psnr),
            ssim: avg(|p| p.ssim),
            msssim: avg(|p| p.msssim),
            psnrb: avg(|p| p.psnrb),
            miou: avg(|p| p.miou),
        })
    }
}

/// Labelled samples with strictly increasing bpp.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    label: String,
    points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(label: impl Into<String>, points: Vec<RdPoint>) -> Result<Self> {
        let label = label.into();
        for p in &points {
            if !(p.bpp > 0.0 && p.bpp.is_finite()) {
                return Err(Error::Curve(format!("{label}: bpp {} must be positive", p.bpp)));
            }
        }
        if points.windows(2).any(|w| w[1].bpp <= w[0].bpp) {
            return Err(Error::Curve(format!("{label}: bpp must be strictly increasing")));
        }
        Ok(Self { label, points })
    }

    /// Sorts by bpp before validating.
    pub fn from_unsorted(label: impl Into<String>, mut points: Vec<RdPoint>) -> Result<Self> {
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        Self::new(label, points)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }
}

/// All metrics for one original / reconstruction pair. `original` must be
/// at the original (unpadded) size; edges of both images come from the same
/// detector settings.
pub fn evaluate_pair(
    original: &Image,
    reconstruction: &Image,
    bs: &Bitstream,
    qf: u32,
    canny_cfg: &CannyConfig,
) -> Result<RdPoint> {
    original.same_dims(reconstruction, "evaluate_pair")?;
    let e_ref = canny(original, canny_cfg)?;
    let e_rec = canny(reconstruction, canny_cfg)?;
    Ok(RdPoint {
        qf,
        bpp: bits_per_pixel(bs, original.dims())?,
        psnr: psnr(original, reconstruction)?,
        ssim: ssim(original, reconstruction)?,
        msssim: ms_ssim(original, reconstruction)?,
        psnrb: psnrb(original, reconstruction, 8)?,
        miou: miou(&e_ref, &e_rec)?,
    })
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct CsvRow {
    label: String,
    qf: u32,
    bpp: f64,
    psnr: f64,
    ssim: f64,
    msssim: f64,
    psnrb: f64,
    miou: f64,
}

/// How the MS-SSIM column is written.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MsSsimOutput {
    #[default]
    Raw,
    /// `-10 log10(MS-SSIM)`, in dB.
    Decibels,
}

pub fn msssim_to_db(v: f64) -> f64 {
    -10.0 * v.log10()
}

pub fn write_curves_csv<W: Write>(out: W, curves: &[RdCurve], msssim: MsSsimOutput) -> Result<()> {
    let rows: Vec<(&str, &RdPoint)> = curves
        .iter()
        .flat_map(|c| c.points().iter().map(move |p| (c.label(), p)))
        .collect();
    write_rows_csv(out, &rows, msssim)
}

/// Labelled points in the curve schema, e.g. per-image rows of one run.
pub fn write_rows_csv<W: Write>(out: W, rows: &[(&str, &RdPoint)], msssim: MsSsimOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (label, p) in rows {
        w.serialize(CsvRow {
            label: label.to_string(),
            qf: p.qf,
            bpp: p.bpp,
            psnr: p.psnr,
            ssim: p.ssim,
            msssim: match msssim {
                MsSsimOutput::Raw => p.msssim,
                MsSsimOutput::Decibels => msssim_to_db(p.msssim),
            },
            psnrb: p.psnrb,
            miou: p.miou,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Curves in order of first appearance of each label. Expects raw MS-SSIM.
pub fn read_curves_csv<R: Read>(input: R) -> Result<Vec<RdCurve>> {
    let mut r = csv::Reader::from_reader(input);
    let mut groups: Vec<(String, Vec<RdPoint>)> = Vec::new();
    for row in r.deserialize() {
        let row: CsvRow = row?;
        let p = RdPoint {
            qf: row.qf,
            bpp: row.bpp,
            psnr: row.psnr,
            ssim: row.ssim,
            msssim: row.msssim,
            psnrb: row.psnrb,
            miou: row.miou,
        };
        match groups.iter_mut().find(|(l, _)| *l == row.label) {
            Some((_, pts)) => pts.push(p),
            None => groups.push((row.label, vec![p])),
        }
    }
    groups
        .into_iter()
        .map(|(l, pts)| RdCurve::from_unsorted(l, pts))
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Overlap {
    pub log10_bpp: [f64; 2],
    pub psnr_db: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BdReport {
    pub pair: String,
    pub bd_psnr_db: f64,
    pub bd_rate_percent: f64,
    pub overlap: Overlap,
}

/// BD-PSNR and BD-rate of `test` against `reference`.
pub fn bd_report(reference: &RdCurve, test: &RdCurve) -> Result<BdReport> {
    let (rl, rh) = rate_overlap(reference, test)?;
    let (pl, ph) = psnr_overlap(reference, test)?;
    Ok(BdReport {
        pair: format!("{} vs {}", test.label(), reference.label()),
        bd_psnr_db: bd_psnr(reference, test)?,
        bd_rate_percent: bd_rate(reference, test)?,
        overlap: Overlap {
            log10_bpp: [rl, rh],
            psnr_db: [pl, ph],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edges::EdgeSource;

    fn map(bits: &[u8]) -> EdgeMap {
        EdgeMap::from_bits(8, 8, bits.to_vec(), EdgeSource::Canny).unwrap()
    }

    #[test]
    fn miou_cases() {
        let mut a = vec![0u8; 64];
        let mut b = vec![0u8; 64];
        for i in 0..8 {
            a[i] = 1;
            b[i] = 1;
            b[8 + i] = 1;
        }
        let expected = (8.0 / 16.0 + 48.0 / 56.0) / 2.0;
        assert!((miou(&map(&a), &map(&b)).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.6786).abs() < 1e-4);
        assert_eq!(miou(&map(&a), &map(&a)).unwrap(), 1.0);
        assert_eq!(miou(&map(&[1; 64]), &map(&[0; 64])).unwrap(), 0.0);
        assert_eq!(miou(&map(&[0; 64]), &map(&[0; 64])).unwrap(), 1.0);
        assert_eq!(miou(&map(&a), &map(&b)).unwrap(), miou(&map(&b), &map(&a)).unwrap());
    }

    #[test]
    fn evaluate_identical_pair() {
        let f = Image::from_fn(32, 32, |y, x| if (x / 8 + y / 8) % 2 == 0 { 0.2 } else { 0.8 });
        let bs = Bitstream::from_bytes(vec![0; 16]);
        let p = evaluate_pair(&f, &f, &bs, 50, &CannyConfig::default()).unwrap();
        assert_eq!(p.psnr, f64::INFINITY);
        assert_eq!(p.ssim, 1.0);
        assert_eq!(p.miou, 1.0);
        assert_eq!(p.bpp, 0.125);
    }

    #[test]
    fn evaluate_matches_components() {
        let f = Image::from_fn(24, 24, |y, x| ((x * 3 + y * 5) % 17) as f64 / 16.0);
        let g = f.map(|v| (v * 0.9 + 0.03).min(1.0));
        let bs = Bitstream::from_bytes(vec![1; 40]);
        let cfg = CannyConfig::default();
        let p = evaluate_pair(&f, &g, &bs, 30, &cfg).unwrap();
        assert_eq!(p.psnr, psnr(&f, &g).unwrap());
        assert_eq!(p.ssim, ssim(&f, &g).unwrap());
        assert_eq!(p.msssim, ms_ssim(&f, &g).unwrap());
        assert_eq!(p.psnrb, psnrb(&f, &g, 8).unwrap());
        let m = miou(&canny(&f, &cfg).unwrap(), &canny(&g, &cfg).unwrap()).unwrap();
        assert_eq!(p.miou, m);
    }

    #[test]
    fn mean_is_order_independent() {
        let pts: Vec<RdPoint> = (0..7)
            .map(|i| RdPoint {
                qf: 10,
                bpp: 0.1 + 0.013 * i as f64,
                psnr: 30.0 + 0.37 * i as f64,
                ssim: 0.9,
                msssim: 0.95,
                psnrb: 29.0,
                miou: 0.1 * i as f64,
            })
            .collect();
        let mut rev = pts.clone();
        rev.reverse();
        assert_eq!(RdPoint::mean(&pts).unwrap(), RdPoint::mean(&rev).unwrap());
        let m = RdPoint::mean(&pts).unwrap();
        assert!((m.psnr - (30.0 + 0.37 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let pts = |s: f64| {
            (1..=4)
                .map(|i| RdPoint {
                    qf: 10 * i,
                    bpp: 0.1 * i as f64 * s,
                    psnr: 25.0 + i as f64,
                    ssim: 0.8,
                    msssim: 0.9,
                    psnrb: 24.0 + i as f64,
                    miou: 0.5,
                })
                .collect::<Vec<_>>()
        };
        let curves = vec![
            RdCurve::new("edgepress-FR", pts(1.0)).unwrap(),
            RdCurve::new("jpeg", pts(1.5)).unwrap(),
        ];
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &curves, MsSsimOutput::Raw).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,qf,bpp,psnr,ssim,msssim,psnrb,miou\n"));
        assert_eq!(read_curves_csv(buf.as_slice()).unwrap(), curves);
        let mut dbuf = Vec::new();
        write_curves_csv(&mut dbuf, &curves[..1], MsSsimOutput::Decibels).unwrap();
        let back = read_curves_csv(dbuf.as_slice()).unwrap();
        assert!((back[0].points()[0].msssim - msssim_to_db(0.9)).abs() < 1e-12);
    }

    #[test]
    fn curves_need_increasing_rate() {
        let p = |bpp| RdPoint { bpp, ..RdPoint::default() };
        assert!(RdCurve::new("x", vec![p(0.2), p(0.1)]).is_err());
        assert!(RdCurve::new("x", vec![p(0.0)]).is_err());
        assert!(RdCurve::from_unsorted("x", vec![p(0.2), p(0.1)]).is_ok());
    }

    #[test]
    fn bd_report_self() {
        let pts = (1..=5)
            .map(|i| RdPoint {
                qf: i,
                bpp: 0.1 * i as f64,
                psnr: 25.0 + 2.0 * (i as f64).ln(),
                ..RdPoint::default()
            })
            .collect();
        let c = RdCurve::new("a", pts).unwrap();
        let r = bd_report(&c, &c).unwrap();
        assert!(r.bd_psnr_db.abs() < 1e-12 && r.bd_rate_percent.abs() < 1e-9);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["pair", "bd_psnr_db", "bd_rate_percent", "overlap"] {
            assert!(json.get(key).is_some());
        }
    }
}
