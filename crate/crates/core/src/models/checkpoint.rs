//! Versioned little-endian binary checkpoints.
//!
//! Layout: magic `EDGP`, `u32` version, `u8` mode, `u32` qf, PoN config
//! (`u32` features, `u32` blocks, `f64` residual scale), then PrN and PoN
//! layer lists. Each list is a `u32` count followed by layers of
//! `u32` out/in/kh/kw/stride, weights and bias as `f64`. An optional
//! training-state section follows, introduced by a `u8` flag.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{ModelPair, Mode, Network, PonConfig, PonParams, PrnParams};
use crate::nn::{AdamConfig, AdamState, ConvLayer, Tensor};

const MAGIC: &[u8; 4] = b"EDGP";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochLoss {
    pub epoch: u32,
    pub loss_o: f64,
    pub loss_r: f64,
}

/// Optimiser state carried alongside the weights so training can resume.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub seed: u64,
    pub epoch: u32,
    pub prn_adam: Vec<AdamState>,
    pub pon_adam: Vec<AdamState>,
    pub log: Vec<EpochLoss>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub qf: u32,
    pub models: ModelPair,
    pub optim: Option<OptimState>,
}

impl Checkpoint {
    pub fn mode(&self) -> Mode {
        self.models.mode()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u8(self.mode().tag());
        w.u32(self.qf);
        let cfg = self.models.pon.config();
        w.u32(cfg.features as u32);
        w.u32(cfg.blocks as u32);
        w.f64(cfg.res_scale);
        w.layers(&self.models.prn);
        w.layers(&self.models.pon);
        match &self.optim {
            None => w.u8(0),
            Some(o) => {
                w.u8(1);
                w.u64(o.seed);
                w.u32(o.epoch);
                w.adam(&o.prn_adam);
                w.adam(&o.pon_adam);
                w.u32(o.log.len() as u32);
                for e in &o.log {
                    w.u32(e.epoch);
                    w.f64(e.loss_o);
                    w.f64(e.loss_r);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not an edgepress checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let tag = r.u8()?;
        let mode = Mode::from_tag(tag)
            .ok_or_else(|| Error::Checkpoint(format!("unknown mode tag {tag}")))?;
        let qf = r.u32()?;
        let config = PonConfig {
            features: r.u32()? as usize,
            blocks: r.u32()? as usize,
            res_scale: r.f64()?,
        };
        let prn = PrnParams::from_layers(mode, r.layers()?)?;
        let pon = PonParams::from_layers(mode, config, r.layers()?)?;
        let optim = match r.u8()? {
            0 => None,
            1 => {
                let seed = r.u64()?;
                let epoch = r.u32()?;
                let prn_adam = r.adam()?;
                let pon_adam = r.adam()?;
                let n = r.u32()? as usize;
                let mut log = Vec::with_capacity(n.min(1 << 16));
                for _ in 0..n {
                    log.push(EpochLoss {
                        epoch: r.u32()?,
                        loss_o: r.f64()?,
                        loss_r: r.f64()?,
                    });
                }
                Some(OptimState {
                    seed,
                    epoch,
                    prn_adam,
                    pon_adam,
                    log,
                })
            }
            f => return Err(Error::Checkpoint(format!("bad training-state flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            qf,
            models: ModelPair::new(prn, pon)?,
            optim,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Lowercase hex SHA-256 of a checkpoint file's bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    fn layers(&mut self, net: &dyn Network) {
        let layers = net.layers();
        self.u32(layers.len() as u32);
        for l in layers {
            for d in l.weights().dims() {
                self.u32(d as u32);
            }
            self.u32(l.stride() as u32);
            self.f64s(l.weights().data());
            self.f64s(l.bias());
        }
    }

    fn adam(&mut self, states: &[AdamState]) {
        self.u32(states.len() as u32);
        for s in states {
            let c = s.config;
            self.f64s(&[c.lr, c.beta1, c.beta2, c.eps]);
            self.u64(s.step_count);
            self.u64(s.first_moment.len() as u64);
            self.f64s(&s.first_moment);
            self.f64s(&s.second_moment);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::Checkpoint("array length overflows".into())
        })?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn layers(&mut self) -> Result<Vec<ConvLayer>> {
        let n = self.u32()? as usize;
        let mut out = Vec::with_capacity(n.min(256));
        for _ in 0..n {
            let dims = [
                self.u32()? as usize,
                self.u32()? as usize,
                self.u32()? as usize,
                self.u32()? as usize,
            ];
            let stride = self.u32()? as usize;
            let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let count = count.ok_or_else(|| Error::Checkpoint("layer too large".into()))?;
            let weights = Tensor::from_vec(dims, self.f64s(count)?)?;
            let bias = self.f64s(dims[0])?;
            out.push(ConvLayer::from_parts(weights, bias, stride)?);
        }
        Ok(out)
    }

    fn adam(&mut self) -> Result<Vec<AdamState>> {
        let n = self.u32()? as usize;
        let mut out = Vec::with_capacity(n.min(256));
        for _ in 0..n {
            let c = self.f64s(4)?;
            let config = AdamConfig {
                lr: c[0],
                beta1: c[1],
                beta2: c[2],
                eps: c[3],
            };
            let step_count = self.u64()?;
            let len = self.u64()? as usize;
            out.push(AdamState {
                config,
                step_count,
                first_moment: self.f64s(len)?,
                second_moment: self.f64s(len)?,
            });
        }
        Ok(out)
    }
}
