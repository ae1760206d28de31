//! Netpbm grey (PGM) and colour (PPM) I/O. Colour input is reduced to
//! BT.601 luminance on load.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Gray,
    Rgb,
}

struct Header {
    kind: Kind,
    binary: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> std::result::Result<u32, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected a number at byte {start}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|e| format!("bad number at byte {start}: {e}"))
    }
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, String> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err("missing netpbm magic".into());
    }
    let (kind, binary) = match bytes[1] {
        b'2' => (Kind::Gray, false),
        b'3' => (Kind::Rgb, false),
        b'5' => (Kind::Gray, true),
        b'6' => (Kind::Rgb, true),
        m => return Err(format!("unsupported netpbm variant P{}", m as char)),
    };
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.number()? as usize;
    let height = c.number()? as usize;
    let maxval = c.number()?;
    if width == 0 || height == 0 {
        return Err("zero-sized image".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    // Exactly one whitespace byte separates the header from raster data.
    if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
        return Err("truncated header".into());
    }
    Ok(Header {
        kind,
        binary,
        width,
        height,
        maxval,
        data_start: c.pos + 1,
    })
}

/// Decodes PGM/PPM bytes into a luminance image in `[0, 1]`.
pub fn decode(bytes: &[u8]) -> std::result::Result<Image, String> {
    let h = parse_header(bytes)?;
    let channels = if h.kind == Kind::Rgb { 3 } else { 1 };
    let count = h.width * h.height * channels;
    let samples: Vec<u32> = if h.binary {
        let wide = h.maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let raster = bytes
            .get(h.data_start..h.data_start + need)
            .ok_or_else(|| format!("raster truncated: need {need} bytes"))?;
        if wide {
            raster
                .chunks_exact(2)
                .map(|p| u16::from_be_bytes([p[0], p[1]]) as u32)
                .collect()
        } else {
            raster.iter().map(|&b| b as u32).collect()
        }
    } else {
        let mut c = Cursor {
            bytes,
            pos: h.data_start,
        };
        (0..count).map(|_| c.number()).collect::<std::result::Result<_, _>>()?
    };
    if let Some(bad) = samples.iter().find(|&&s| s > h.maxval) {
        return Err(format!("sample {bad} exceeds maxval {}", h.maxval));
    }
    let scale = h.maxval as f64;
    let pixels = match h.kind {
        Kind::Gray => samples.iter().map(|&s| s as f64 / scale).collect(),
        Kind::Rgb => samples
            .chunks_exact(3)
            .map(|p| (LUMA_R * p[0] as f64 + LUMA_G * p[1] as f64 + LUMA_B * p[2] as f64) / scale)
            .collect(),
    };
    Image::from_vec(h.height, h.width, pixels).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    decode(&bytes).map_err(|message| Error::Ingest {
        path: path.to_path_buf(),
        message,
    })
}

/// Reads only the dimensions `(height, width)`.
pub fn read_dims(path: &Path) -> Result<(usize, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_header(&bytes)
        .map(|h| (h.height, h.width))
        .map_err(|message| Error::Ingest {
            path: path.to_path_buf(),
            message,
        })
}

/// Binary 8-bit PGM (P5).
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    out
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}
