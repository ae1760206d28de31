//! Dataset ingestion, padding, run configuration and the command-line
//! workflows.

mod commands;
mod config;
mod dataset;
mod prepare;
mod sidecar;

pub use commands::{
    cmd_bd, cmd_compress, cmd_decompress, cmd_evaluate, cmd_sweep, cmd_train, evaluate_jpeg, evaluate_models, leg_stem,
    load_training_data, train_leg, BdOutcome, Evaluation, SweepSummary, TrainedLeg,
};
pub use config::{RunConfig, DEFAULT_SWEEP_QFS, SEED_ENV};
pub use dataset::{ingest, DatasetManifest, ManifestEntry, Split};
pub use prepare::{prepare, training_crop, unprepare, CropRecord, ALIGN};
pub use sidecar::{sidecar_path, Sidecar};
