use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::edges::CannyConfig;
use crate::error::{Error, Result};
use crate::models::Mode;
use crate::training::TrainConfig;

pub const SEED_ENV: &str = "EDGEPRESS_SEED";
pub const DEFAULT_SWEEP_QFS: [u32; 12] = [2, 5, 6, 10, 20, 30, 40, 50, 60, 80, 90, 100];

/// Everything one `train` or `sweep` invocation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Write a checkpoint every n epochs; 0 keeps only the final one.
    pub checkpoint_every: usize,
    pub sweep_qfs: Vec<u32>,
    pub sweep_modes: Vec<Mode>,
    /// Side of the square training crops.
    pub crop_size: usize,
    pub canny: CannyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            train_dir: None,
            test_dir: None,
            out_dir: PathBuf::from("out"),
            checkpoint_every: 10,
            sweep_qfs: DEFAULT_SWEEP_QFS.to_vec(),
            sweep_modes: vec![Mode::Cr, Mode::Fr],
            crop_size: 128,
            canny: CannyConfig::default(),
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} = {value:?}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| bad(key, value, e)))
        .collect()
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// taken against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value, base)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || base.join(value);
        let t = &mut self.train;
        match key {
            "mode" => t.mode = value.parse()?,
            "qf" => t.qf = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "iterations" | "iterations_per_module" => t.iterations_per_module = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "lr" => t.lr = num(key, value)?,
            "alpha" => t.alpha = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "warmup_epochs" => t.warmup_epochs = num(key, value)?,
            "pon_features" => t.pon.features = num(key, value)?,
            "pon_blocks" => t.pon.blocks = num(key, value)?,
            "pon_res_scale" => t.pon.res_scale = num(key, value)?,
            "train_dir" => self.train_dir = Some(path()),
            "test_dir" => self.test_dir = Some(path()),
            "out_dir" => self.out_dir = path(),
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "sweep_qfs" => self.sweep_qfs = list(key, value)?,
            "sweep_modes" => self.sweep_modes = list(key, value)?,
            "crop_size" => self.crop_size = num(key, value)?,
            "canny_sigma" => self.canny.sigma = num(key, value)?,
            "canny_low" => self.canny.low = num(key, value)?,
            "canny_high" => self.canny.high = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.canny.validate()?;
        if self.sweep_qfs.is_empty() {
            return Err(Error::Config("sweep_qfs is empty".into()));
        }
        for &q in &self.sweep_qfs {
            if !(1..=100).contains(&q) {
                return Err(Error::Config(format!("sweep qf {q} outside [1, 100]")));
            }
        }
        if self.sweep_qfs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep_qfs must be strictly increasing".into()));
        }
        if self.sweep_modes.is_empty() {
            return Err(Error::Config("sweep_modes is empty".into()));
        }
        if self.crop_size == 0 || !self.crop_size.is_multiple_of(super::ALIGN) {
            return Err(Error::Config(format!(
                "crop_size {} must be a positive multiple of {}",
                self.crop_size,
                super::ALIGN
            )));
        }
        Ok(())
    }

    /// Reads a config file and applies the seed override from the
    /// environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text, base)?;
        cfg.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(cfg)
    }

    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.train.seed = num(SEED_ENV, v.trim())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::parse("", Path::new("/x")).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.sweep_qfs, [2, 5, 6, 10, 20, 30, 40, 50, 60, 80, 90, 100]);
    }

    #[test]
    fn full_file() {
        let text = "
            # comment
            mode = CR
            qf = 20
            epochs = 3   # trailing
            iterations = 2
            batch_size = 4
            lr = 0.0005
            alpha = 1
            seed = 9
            warmup_epochs = 0
            pon_features = 8
            pon_blocks = 1
            train_dir = data/train
            out_dir = /abs/out
            sweep_qfs = 10, 50
            sweep_modes = fr
            crop_size = 32
            canny_sigma = 1.0
        ";
        let c = RunConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.train.mode, Mode::Cr);
        assert_eq!(c.train.qf, 20);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.iterations_per_module, 2);
        assert_eq!(c.train.lr, 5e-4);
        assert_eq!(c.train.alpha, 1.0);
        assert_eq!(c.train.pon.features, 8);
        assert_eq!(c.train_dir.as_deref(), Some(Path::new("/cfg/data/train")));
        assert_eq!(c.out_dir, Path::new("/abs/out"));
        assert_eq!(c.sweep_qfs, [10, 50]);
        assert_eq!(c.sweep_modes, [Mode::Fr]);
        assert_eq!(c.crop_size, 32);
        assert_eq!(c.canny.sigma, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let base = Path::new(".");
        for text in [
            "colour = red",
            "qf = 0",
            "qf = abc",
            "alpha = 1.5",
            "just words",
            "qf = 5\nqf = 6",
            "sweep_qfs = 10, 5",
            "sweep_qfs = 0, 5",
            "sweep_qfs = 5, 5",
            "sweep_qfs = 50, 101",
            "crop_size = 20",
            "batch_size = 0",
            "mode = XR",
        ] {
            assert!(matches!(RunConfig::parse(text, base), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn seed_override() {
        let mut c = RunConfig::parse("seed = 3", Path::new(".")).unwrap();
        c.apply_seed_override(None).unwrap();
        assert_eq!(c.train.seed, 3);
        c.apply_seed_override(Some("42")).unwrap();
        assert_eq!(c.train.seed, 42);
        assert!(c.apply_seed_override(Some("x")).is_err());
    }
}
