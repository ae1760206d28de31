//! Grayscale baseline JPEG (sequential DCT, Huffman) used as the in-loop
//! codec, plus the [`Codec`] seam that lets another codec take its place.

pub mod dct;
mod decoder;
mod encoder;
pub mod huffman;
pub mod tables;

use crate::error::{Error, Result};
use crate::image::Image;

pub use dct::{fdct8x8, idct8x8, Block};
pub use decoder::decode;
pub use encoder::encode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CodecConfig {
    qf: u8,
}

impl CodecConfig {
    pub fn new(qf: u32) -> Result<Self> {
        if !(1..=100).contains(&qf) {
            return Err(Error::Config(format!("quality factor {qf} outside 1..=100")));
        }
        Ok(Self { qf: qf as u8 })
    }

    pub fn qf(&self) -> u32 {
        self.qf as u32
    }

    pub fn quant_table(&self) -> QuantTable {
        QuantTable::for_quality(*self)
    }
}

/// 64 quantizer steps stored in zigzag order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantTable {
    zigzag: [u16; 64],
}

impl QuantTable {
    /// IJG quality scaling of the Annex K luminance table.
    pub fn for_quality(cfg: CodecConfig) -> Self {
        let qf = cfg.qf() as i64;
        let scale = if qf < 50 { 5000 / qf } else { 200 - 2 * qf };
        let mut zigzag = [0u16; 64];
        for (z, &natural) in tables::ZIGZAG.iter().enumerate() {
            let base = tables::LUMA_QUANT_BASE[natural] as i64;
            zigzag[z] = ((base * scale + 50) / 100).clamp(1, 255) as u16;
        }
        Self { zigzag }
    }

    pub fn from_zigzag(zigzag: [u16; 64]) -> Result<Self> {
        if zigzag.contains(&0) {
            return Err(Error::Config("quantizer step of zero".into()));
        }
        Ok(Self { zigzag })
    }

    pub fn zigzag(&self) -> &[u16; 64] {
        &self.zigzag
    }

    /// Steps in row-major order.
    pub fn natural(&self) -> [u16; 64] {
        let mut out = [0u16; 64];
        for (z, &n) in tables::ZIGZAG.iter().enumerate() {
            out[n] = self.zigzag[z];
        }
        out
    }
}

pub fn quant_table_for(qf: u32) -> Result<QuantTable> {
    Ok(CodecConfig::new(qf)?.quant_table())
}

/// A complete JFIF byte stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream(Vec<u8>);

impl Bitstream {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len_bytes(&self) -> usize {
        self.0.len()
    }

    pub fn len_bits(&self) -> usize {
        8 * self.0.len()
    }
}

/// Rate in bits per pixel of the *original* image, whatever resolution the
/// stream itself carries.
pub fn bits_per_pixel(bs: &Bitstream, original_dims: (usize, usize)) -> Result<f64> {
    let (h, w) = original_dims;
    if h == 0 || w == 0 {
        return Err(Error::Precondition(format!("zero-area original dims {h}x{w}")));
    }
    Ok(bs.len_bits() as f64 / (h * w) as f64)
}

/// An image codec usable inside the training loop.
pub trait Codec: Send + Sync {
    fn encode(&self, img: &Image) -> Result<Bitstream>;
    fn decode(&self, bs: &Bitstream) -> Result<Image>;
    fn describe(&self) -> String;
}

#[derive(Clone, Copy, Debug)]
pub struct JpegCodec {
    pub config: CodecConfig,
}

impl JpegCodec {
    pub fn new(qf: u32) -> Result<Self> {
        Ok(Self {
            config: CodecConfig::new(qf)?,
        })
    }
}

impl Codec for JpegCodec {
    fn encode(&self, img: &Image) -> Result<Bitstream> {
        encode(img, &self.config)
    }

    fn decode(&self, bs: &Bitstream) -> Result<Image> {
        decode(bs)
    }

    fn describe(&self) -> String {
        format!("baseline JPEG, qf {}", self.config.qf())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_50_is_the_base_table() {
        assert_eq!(quant_table_for(50).unwrap().natural(), tables::LUMA_QUANT_BASE);
    }

    #[test]
    fn quality_100_is_all_ones() {
        assert!(quant_table_for(100).unwrap().zigzag().iter().all(|&q| q == 1));
    }

    #[test]
    fn quality_10_scales_by_five() {
        let t = quant_table_for(10).unwrap().natural();
        assert_eq!(t[0], (16 * 500 + 50) / 100);
        assert_eq!(t[0], 80);
        assert_eq!(t[63], 255);
    }

    #[test]
    fn steps_non_increasing_in_quality() {
        let mut prev = quant_table_for(1).unwrap();
        for qf in 2..=100 {
            let t = quant_table_for(qf).unwrap();
            for i in 0..64 {
                assert!(t.zigzag()[i] <= prev.zigzag()[i]);
                assert!((1..=255).contains(&t.zigzag()[i]));
            }
            prev = t;
        }
    }

    #[test]
    fn out_of_range_quality() {
        assert!(matches!(CodecConfig::new(0), Err(Error::Config(_))));
        assert!(matches!(CodecConfig::new(101), Err(Error::Config(_))));
    }

    #[test]
    fn bpp_arithmetic() {
        let bs = Bitstream::from_bytes(vec![0; 1000]);
        let bpp = bits_per_pixel(&bs, (512, 512)).unwrap();
        assert!((bpp - 8000.0 / 262144.0).abs() < 1e-15);
        let doubled = Bitstream::from_bytes(vec![0; 2000]);
        assert_eq!(bits_per_pixel(&doubled, (512, 512)).unwrap(), 2.0 * bpp);
        assert!(bits_per_pixel(&bs, (0, 4)).is_err());
    }
}
