use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::codec::{Bitstream, Codec, JpegCodec};
use crate::edges::{CannyConfig, EdgeMap, EdgeSource};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{
    bd_report, evaluate_pair, read_curves_csv, write_curves_csv, write_rows_csv, BdReport, MsSsimOutput, RdCurve,
    RdPoint,
};
use crate::models::checkpoint::{sha256_hex, Checkpoint};
use crate::models::{Mode, ModelPair};
use crate::pipeline::{forward_codec_pass, reconstruct, round_trip};
use crate::pnm;
use crate::training::{TrainConfig, Trainer, TrainingData};

use super::{ingest, prepare, sidecar_path, training_crop, unprepare, DatasetManifest, RunConfig, Sidecar, Split};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Base name for one (mode, qf) leg, e.g. `model_fr_qf010`.
pub fn leg_stem(mode: Mode, qf: u32) -> String {
    format!("model_{}_qf{qf:03}", mode.to_string().to_ascii_lowercase())
}

/// Square training crops of every manifest image with their edge maps.
/// External edge maps are cropped alongside their image.
pub fn load_training_data(manifest: &DatasetManifest, crop_size: usize, canny_cfg: &CannyConfig) -> Result<TrainingData> {
    let mut images = Vec::with_capacity(manifest.entries.len());
    let mut edges = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let img = entry.load()?;
        let crop = training_crop(&img, crop_size)?;
        let e = match &entry.edge_path {
            Some(_) => {
                let full = entry.edges(&img, canny_cfg)?;
                let c = training_crop(&full.to_image(), crop_size)?;
                let bits = c.pixels().iter().map(|&v| u8::from(v > 0.5)).collect();
                EdgeMap::from_bits(crop_size, crop_size, bits, EdgeSource::External)?
            }
            None => crate::edges::canny(&crop, canny_cfg)?,
        };
        images.push(crop);
        edges.push(e);
    }
    TrainingData::new(images, edges)
}

/// Outcome of one training leg.
#[derive(Clone, Debug)]
pub struct TrainedLeg {
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub checkpoint: Checkpoint,
}

/// Trains one model pair, writing periodic and final checkpoints plus a
/// JSON-lines log into `out_dir`.
pub fn train_leg(data: &TrainingData, cfg: TrainConfig, checkpoint_every: usize, out_dir: &Path) -> Result<TrainedLeg> {
    create_dir(out_dir)?;
    let stem = leg_stem(cfg.mode, cfg.qf);
    let log_path = out_dir.join(format!("{stem}.log.jsonl"));
    let mut log = BufWriter::new(File::create(&log_path)?);
    let mut trainer = Trainer::new(data.clone(), cfg)?;
    trainer.train(|state, record| {
        serde_json::to_writer(&mut log, record)?;
        log.write_all(b"\n")?;
        if checkpoint_every > 0 && (record.epoch as usize).is_multiple_of(checkpoint_every) {
            let p = out_dir.join(format!("{stem}_epoch{:04}.ckpt", record.epoch));
            state.to_checkpoint(&cfg).save(&p)?;
        }
        Ok(())
    })?;
    log.flush()?;
    let checkpoint = trainer.state().to_checkpoint(&cfg);
    let checkpoint_path = out_dir.join(format!("{stem}.ckpt"));
    checkpoint.save(&checkpoint_path)?;
    Ok(TrainedLeg {
        checkpoint_path,
        log_path,
        checkpoint,
    })
}

/// `train --config <file>`.
pub fn cmd_train(config_path: &Path) -> Result<TrainedLeg> {
    let run = RunConfig::load(config_path)?;
    let dir = run
        .train_dir
        .as_deref()
        .ok_or_else(|| Error::Config("train_dir is not set".into()))?;
    let manifest = ingest(dir, Split::Train)?;
    let data = load_training_data(&manifest, run.crop_size, &run.canny)?;
    train_leg(&data, run.train, run.checkpoint_every, &run.out_dir)
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((Checkpoint::from_bytes(&bytes)?, sha256_hex(&bytes)))
}

/// `compress --ckpt <file> --in <img> --out <jpg>`. Writes the latent as a
/// baseline JPEG and the sidecar next to it.
pub fn cmd_compress(checkpoint: &Path, image: &Path, out_jpg: &Path) -> Result<Sidecar> {
    let (ckpt, hash) = load_checkpoint(checkpoint)?;
    let img = pnm::read(image)?;
    let (padded, crop) = prepare(&img)?;
    let codec = JpegCodec::new(ckpt.qf)?;
    let (_, _, bs) = forward_codec_pass(&padded, &ckpt.models.prn, &codec)?;
    let sidecar = Sidecar::new(ckpt.mode(), ckpt.qf, &crop, hash);
    std::fs::write(out_jpg, bs.bytes())?;
    sidecar.save(&sidecar_path(out_jpg))?;
    Ok(sidecar)
}

fn refuse(what: impl Into<String>) -> Error {
    Error::Refused(what.into())
}

fn latent_dims(mode: Mode, padded: [usize; 2]) -> (usize, usize) {
    match mode {
        Mode::Fr => (padded[0], padded[1]),
        Mode::Cr => (padded[0] / 2, padded[1] / 2),
    }
}

/// `decompress --ckpt <file> --in <jpg> --out <pgm>`. Nothing is written
/// unless the sidecar matches the checkpoint.
pub fn cmd_decompress(checkpoint: &Path, in_jpg: &Path, out_pgm: &Path) -> Result<Image> {
    let (ckpt, hash) = load_checkpoint(checkpoint)?;
    let sidecar = Sidecar::load(&sidecar_path(in_jpg))?;
    if sidecar.checkpoint_sha256 != hash {
        return Err(refuse(format!(
            "sidecar was written with checkpoint {}, given {}",
            sidecar.checkpoint_sha256, hash
        )));
    }
    if sidecar.mode != ckpt.mode() {
        return Err(refuse(format!("sidecar mode {} but checkpoint mode {}", sidecar.mode, ckpt.mode())));
    }
    if sidecar.qf != ckpt.qf {
        return Err(refuse(format!("sidecar qf {} but checkpoint qf {}", sidecar.qf, ckpt.qf)));
    }
    let crop = sidecar.crop();
    let (_, expected) = prepare(&Image::new(crop.height.max(1), crop.width.max(1)))?;
    if expected != crop || crop.height == 0 || crop.width == 0 {
        return Err(refuse(format!(
            "sidecar dims {:?} do not pad to {:?}",
            sidecar.original_dims, sidecar.padded_dims
        )));
    }
    let bs = Bitstream::from_bytes(std::fs::read(in_jpg)?);
    let codec = JpegCodec::new(ckpt.qf)?;
    let latent = codec.decode(&bs)?;
    let want = latent_dims(ckpt.mode(), sidecar.padded_dims);
    if latent.dims() != want {
        return Err(refuse(format!(
            "JPEG is {}x{} but the sidecar implies a {}x{} latent",
            latent.height(),
            latent.width(),
            want.0,
            want.1
        )));
    }
    let rec = unprepare(&reconstruct(&bs, &ckpt.models, &codec)?, &crop)?;
    pnm::write_pgm(out_pgm, &rec)?;
    Ok(rec)
}

/// Per-image metrics of one evaluation run and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<(String, RdPoint)>,
    pub mean: RdPoint,
}

impl Evaluation {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows: Vec<(&str, &RdPoint)> = self.rows.iter().map(|(l, p)| (l.as_str(), p)).collect();
        rows.push(("mean", &self.mean));
        write_rows_csv(File::create(path)?, &rows, MsSsimOutput::Raw)
    }
}

fn evaluate_with(
    manifest: &DatasetManifest,
    qf: u32,
    canny_cfg: &CannyConfig,
    mut run: impl FnMut(&Image) -> Result<(Image, Bitstream)>,
) -> Result<Evaluation> {
    let mut rows = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let img = entry.load()?;
        let (rec, bs) = run(&img)?;
        rows.push((entry.stem(), evaluate_pair(&img, &rec, &bs, qf, canny_cfg)?));
    }
    let points: Vec<RdPoint> = rows.iter().map(|(_, p)| *p).collect();
    Ok(Evaluation {
        mean: RdPoint::mean(&points)?,
        rows,
    })
}

/// The full sandwich on every image, at original size.
pub fn evaluate_models(
    models: &ModelPair,
    qf: u32,
    manifest: &DatasetManifest,
    canny_cfg: &CannyConfig,
) -> Result<Evaluation> {
    let codec = JpegCodec::new(qf)?;
    evaluate_with(manifest, qf, canny_cfg, |img| {
        let (padded, crop) = prepare(img)?;
        let (rec, bs) = round_trip(&padded, models, &codec)?;
        Ok((unprepare(&rec, &crop)?, bs))
    })
}

/// Plain baseline JPEG on every image.
pub fn evaluate_jpeg(qf: u32, manifest: &DatasetManifest, canny_cfg: &CannyConfig) -> Result<Evaluation> {
    let codec = JpegCodec::new(qf)?;
    evaluate_with(manifest, qf, canny_cfg, |img| {
        let bs = codec.encode(img)?;
        Ok((codec.decode(&bs)?, bs))
    })
}

/// `evaluate --ckpt <file> --data <dir> --out <csv>`: one row per image
/// plus a `mean` row.
pub fn cmd_evaluate(checkpoint: &Path, dataset: &Path, out_csv: &Path, canny_cfg: &CannyConfig) -> Result<Evaluation> {
    let (ckpt, _) = load_checkpoint(checkpoint)?;
    let manifest = ingest(dataset, Split::Test)?;
    let eval = evaluate_models(&ckpt.models, ckpt.qf, &manifest, canny_cfg)?;
    eval.write_csv(out_csv)?;
    Ok(eval)
}

fn single_curve(path: &Path) -> Result<RdCurve> {
    let file = File::open(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut curves = read_curves_csv(file)?;
    if curves.len() != 1 {
        return Err(Error::Curve(format!(
            "{} holds {} curves, expected exactly one",
            path.display(),
            curves.len()
        )));
    }
    Ok(curves.remove(0))
}

/// `bd --ref <csv> --test <csv> --out <json>`.
pub fn cmd_bd(reference_csv: &Path, test_csv: &Path, out_json: &Path) -> Result<BdReport> {
    let report = bd_report(&single_curve(reference_csv)?, &single_curve(test_csv)?)?;
    std::fs::write(out_json, serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

/// A BD comparison from a sweep; short curves cannot be compared.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(untagged)]
pub enum BdOutcome {
    Report(BdReport),
    Failed { pair: String, error: String },
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub curves: Vec<RdCurve>,
    pub curve_paths: Vec<PathBuf>,
    pub bd: Vec<BdOutcome>,
}

fn write_curve(path: &Path, curve: &RdCurve) -> Result<()> {
    write_curves_csv(File::create(path)?, std::slice::from_ref(curve), MsSsimOutput::Raw)
}

/// `sweep --config <file>`: trains or reloads one model pair per (mode, qf),
/// evaluates each on the test set and writes a curve per mode, the plain
/// JPEG baseline and BD numbers of every mode against it.
pub fn cmd_sweep(config_path: &Path) -> Result<SweepSummary> {
    let run = RunConfig::load(config_path)?;
    let train_dir = run
        .train_dir
        .as_deref()
        .ok_or_else(|| Error::Config("train_dir is not set".into()))?;
    let test_manifest = ingest(run.test_dir.as_deref().unwrap_or(train_dir), Split::Test)?;
    create_dir(&run.out_dir)?;
    let mut data = None;
    let mut curves = Vec::new();
    let mut curve_paths = Vec::new();
    for &mode in &run.sweep_modes {
        let mut points = Vec::new();
        for &qf in &run.sweep_qfs {
            let cfg = TrainConfig { mode, qf, ..run.train };
            let path = run.out_dir.join(format!("{}.ckpt", leg_stem(mode, qf)));
            let models = if path.is_file() {
                let ckpt = Checkpoint::load(&path)?;
                if ckpt.mode() != mode || ckpt.qf != qf {
                    return Err(refuse(format!(
                        "{} holds a {} qf {} model",
                        path.display(),
                        ckpt.mode(),
                        ckpt.qf
                    )));
                }
                ckpt.models
            } else {
                if data.is_none() {
                    let manifest = ingest(train_dir, Split::Train)?;
                    data = Some(load_training_data(&manifest, run.crop_size, &run.canny)?);
                }
                let data = data.as_ref().expect("loaded above");
                train_leg(data, cfg, run.checkpoint_every, &run.out_dir)?.checkpoint.models
            };
            points.push(evaluate_models(&models, qf, &test_manifest, &run.canny)?.mean);
        }
        let label = format!("edgepress-{}", mode.to_string().to_ascii_lowercase());
        curves.push(RdCurve::from_unsorted(label, points)?);
    }
    let jpeg_points = run
        .sweep_qfs
        .iter()
        .map(|&qf| Ok(evaluate_jpeg(qf, &test_manifest, &run.canny)?.mean))
        .collect::<Result<Vec<_>>>()?;
    let jpeg = RdCurve::from_unsorted("jpeg", jpeg_points)?;
    let bd = curves
        .iter()
        .map(|c| match bd_report(&jpeg, c) {
            Ok(r) => BdOutcome::Report(r),
            Err(e) => BdOutcome::Failed {
                pair: format!("{} vs {}", c.label(), jpeg.label()),
                error: e.to_string(),
            },
        })
        .collect::<Vec<_>>();
    curves.push(jpeg);
    for c in &curves {
        let p = run.out_dir.join(format!("curve_{}.csv", c.label()));
        write_curve(&p, c)?;
        curve_paths.push(p);
    }
    std::fs::write(run.out_dir.join("bd.json"), serde_json::to_vec_pretty(&bd)?)?;
    Ok(SweepSummary {
        curves,
        curve_paths,
        bd,
    })
}
