use std::fmt;
use std::path::{Path, PathBuf};

use crate::edges::{canny, load_edge_map, CannyConfig, EdgeMap};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::pnm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub dims: (usize, usize),
    /// `edges/<stem>.pgm` next to the image, when present.
    pub edge_path: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    pub fn load(&self) -> Result<Image> {
        pnm::read(&self.path)
    }

    /// External edge map if one was found, otherwise Canny on `img`.
    pub fn edges(&self, img: &Image, cfg: &CannyConfig) -> Result<EdgeMap> {
        match &self.edge_path {
            Some(p) => load_edge_map(p, img.dims()),
            None => canny(img, cfg),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: Split,
    pub entries: Vec<ManifestEntry>,
    /// Files that looked like images but failed to parse, with the reason.
    pub rejected: Vec<(PathBuf, String)>,
}

fn is_netpbm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
        .unwrap_or(false)
}

/// Lists the PGM/PPM images of `dir` in lexicographic order.
pub fn ingest(dir: &Path, split: Split) -> Result<DatasetManifest> {
    let read_dir = std::fs::read_dir(dir).map_err(|e| Error::Ingest {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut paths = Vec::new();
    for entry in read_dir {
        let path = entry?.path();
        if path.is_file() && is_netpbm(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    let mut entries = Vec::new();
    let mut rejected = Vec::new();
    for path in paths {
        match pnm::read(&path) {
            Ok(img) => {
                let stem = path.file_stem().unwrap_or_default().to_owned();
                let edge = dir.join("edges").join(stem).with_extension("pgm");
                entries.push(ManifestEntry {
                    dims: img.dims(),
                    edge_path: edge.is_file().then_some(edge),
                    path,
                });
            }
            Err(e) => rejected.push((path, e.to_string())),
        }
    }
    if entries.is_empty() {
        let detail = if rejected.is_empty() {
            "no PGM/PPM images found".to_string()
        } else {
            let names: Vec<String> = rejected.iter().map(|(p, m)| format!("{}: {m}", p.display())).collect();
            format!("no readable images; rejected {}", names.join("; "))
        };
        return Err(Error::Ingest {
            path: dir.to_path_buf(),
            message: detail,
        });
    }
    Ok(DatasetManifest {
        root: dir.to_path_buf(),
        split,
        entries,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_listing_and_edge_maps() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["c.pgm", "a.pgm", "b.pgm"] {
            pnm::write_pgm(&dir.path().join(name), &Image::filled(4, 6, 0.5)).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        std::fs::create_dir(dir.path().join("edges")).unwrap();
        pnm::write_pgm(&dir.path().join("edges/b.pgm"), &Image::filled(4, 6, 1.0)).unwrap();
        let m = ingest(dir.path(), Split::Train).unwrap();
        let stems: Vec<String> = m.entries.iter().map(|e| e.stem()).collect();
        assert_eq!(stems, ["a", "b", "c"]);
        assert!(m.entries[1].edge_path.is_some());
        assert!(m.entries[0].edge_path.is_none());
        assert_eq!(m.entries[0].dims, (4, 6));
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest(dir.path(), Split::Test), Err(Error::Ingest { .. })));
    }

    #[test]
    fn unreadable_files_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.pgm"), "P5\n").unwrap();
        pnm::write_pgm(&dir.path().join("good.pgm"), &Image::filled(2, 2, 0.0)).unwrap();
        let m = ingest(dir.path(), Split::Test).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.rejected.len(), 1);
        std::fs::remove_file(dir.path().join("good.pgm")).unwrap();
        let err = ingest(dir.path(), Split::Test).unwrap_err().to_string();
        assert!(err.contains("bad.pgm"), "{err}");
    }

    #[test]
    fn ppm_is_converted_to_luma() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend([255, 0, 0]);
        std::fs::write(dir.path().join("red.ppm"), bytes).unwrap();
        let m = ingest(dir.path(), Split::Test).unwrap();
        let img = m.entries[0].load().unwrap();
        assert_eq!(img.to_u8(), vec![76]);
    }
}
