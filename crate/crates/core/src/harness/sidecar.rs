use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::models::Mode;

use super::CropRecord;

/// Metadata written next to every compressed `.jpg`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Sidecar {
    pub mode: Mode,
    pub qf: u32,
    pub original_dims: [usize; 2],
    pub padded_dims: [usize; 2],
    pub checkpoint_sha256: String,
}

impl Sidecar {
    pub fn new(mode: Mode, qf: u32, crop: &CropRecord, checkpoint_sha256: String) -> Self {
        Self {
            mode,
            qf,
            original_dims: [crop.height, crop.width],
            padded_dims: [crop.padded_height, crop.padded_width],
            checkpoint_sha256,
        }
    }

    pub fn crop(&self) -> CropRecord {
        CropRecord {
            height: self.original_dims[0],
            width: self.original_dims[1],
            padded_height: self.padded_dims[0],
            padded_width: self.padded_dims[1],
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            message: format!("sidecar: {e}"),
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// `photo.jpg` -> `photo.jpg.json`.
pub fn sidecar_path(jpg: &Path) -> PathBuf {
    let mut s = jpg.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}
