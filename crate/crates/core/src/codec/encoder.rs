use crate::codec::dct::fdct8x8;
use crate::codec::huffman::{category, magnitude_bits, EncodeTable, HuffmanSpec};
use crate::codec::tables::{LUMA_AC_BITS, LUMA_AC_VALUES, LUMA_DC_BITS, LUMA_DC_VALUES, ZIGZAG};
use crate::codec::{Bitstream, CodecConfig, QuantTable};
use crate::error::{Error, Result};
use crate::image::Image;

// Largest magnitudes codable by the baseline Huffman categories.
const MAX_AC: i32 = 1023;
const MAX_DC_DIFF: i32 = 2047;

/// Encodes `img` as a single-component baseline JFIF stream. Dimensions are
/// padded to multiples of 8 by edge replication; the frame header keeps the
/// true size so decoders crop the padding away.
pub fn encode(img: &Image, cfg: &CodecConfig) -> Result<Bitstream> {
    let (h, w) = img.dims();
    if h == 0 || w == 0 {
        return Err(Error::Precondition("cannot encode an empty image".into()));
    }
    if h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::Precondition(format!("{h}x{w} exceeds JPEG limits")));
    }
    let table = cfg.quant_table();
    let dc_spec = HuffmanSpec::new(&LUMA_DC_BITS, &LUMA_DC_VALUES);
    let ac_spec = HuffmanSpec::new(&LUMA_AC_BITS, &LUMA_AC_VALUES);

    let mut out = Vec::with_capacity(1024);
    out.extend_from_slice(&[0xFF, 0xD8]);
    write_app0(&mut out);
    write_dqt(&mut out, &table);
    write_sof0(&mut out, h as u16, w as u16);
    write_dht(&mut out, 0x00, &dc_spec);
    write_dht(&mut out, 0x10, &ac_spec);
    write_sos(&mut out);

    let dc = EncodeTable::new(&dc_spec);
    let ac = EncodeTable::new(&ac_spec);
    let mut bits = BitWriter::new(&mut out);
    let mut prev_dc = 0;
    for block in quantized_blocks(img, &table) {
        let diff = (block[0] - prev_dc).clamp(-MAX_DC_DIFF, MAX_DC_DIFF);
        prev_dc += diff;
        let s = category(diff);
        let (code, len) = dc.get(s);
        bits.put(code, len);
        bits.put(magnitude_bits(diff, s), s);

        let mut run = 0u8;
        for &natural in &ZIGZAG[1..] {
            let v = block[natural];
            if v == 0 {
                run += 1;
                continue;
            }
            while run > 15 {
                let (code, len) = ac.get(0xF0);
                bits.put(code, len);
                run -= 16;
            }
            let s = category(v);
            let (code, len) = ac.get((run << 4) | s);
            bits.put(code, len);
            bits.put(magnitude_bits(v, s), s);
            run = 0;
        }
        if run > 0 {
            let (code, len) = ac.get(0x00);
            bits.put(code, len);
        }
    }
    bits.flush();
    out.extend_from_slice(&[0xFF, 0xD9]);
    Ok(Bitstream::from_bytes(out))
}

/// Quantized coefficients of each 8x8 block in raster order, natural
/// coefficient order. DC and AC values are limited to the ranges the
/// baseline Huffman categories can represent.
fn quantized_blocks(img: &Image, table: &QuantTable) -> Vec<[i32; 64]> {
    let (h, w) = img.dims();
    let (bh, bw) = (h.div_ceil(8), w.div_ceil(8));
    let samples = img.to_u8();
    let steps = table.natural();
    let mut blocks = Vec::with_capacity(bh * bw);
    for by in 0..bh {
        for bx in 0..bw {
            let mut px = [0.0; 64];
            for y in 0..8 {
                let sy = (by * 8 + y).min(h - 1);
                for x in 0..8 {
                    let sx = (bx * 8 + x).min(w - 1);
                    px[y * 8 + x] = samples[sy * w + sx] as f64 - 128.0;
                }
            }
            let coeffs = fdct8x8(&px);
            let mut q = [0i32; 64];
            for i in 0..64 {
                // f64::round is half-away-from-zero.
                let v = (coeffs[i] / steps[i] as f64).round() as i32;
                q[i] = if i == 0 { v } else { v.clamp(-MAX_AC, MAX_AC) };
            }
            blocks.push(q);
        }
    }
    blocks
}

fn write_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

fn write_app0(out: &mut Vec<u8>) {
    // JFIF 1.01, aspect-ratio units, 1:1 density, no thumbnail.
    write_segment(
        out,
        0xE0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );
}

fn write_dqt(out: &mut Vec<u8>, table: &QuantTable) {
    let mut payload = vec![0x00]; // 8-bit precision, table 0
    payload.extend(table.zigzag().iter().map(|&q| q as u8));
    write_segment(out, 0xDB, &payload);
}

fn write_sof0(out: &mut Vec<u8>, h: u16, w: u16) {
    let mut payload = vec![8];
    payload.extend_from_slice(&h.to_be_bytes());
    payload.extend_from_slice(&w.to_be_bytes());
    payload.extend_from_slice(&[1, 1, 0x11, 0]);
    write_segment(out, 0xC0, &payload);
}

fn write_dht(out: &mut Vec<u8>, class_id: u8, spec: &HuffmanSpec) {
    let mut payload = vec![class_id];
    payload.extend_from_slice(&spec.bits);
    payload.extend_from_slice(&spec.values);
    write_segment(out, 0xC4, &payload);
}

fn write_sos(out: &mut Vec<u8>) {
    write_segment(out, 0xDA, &[1, 1, 0x00, 0, 63, 0]);
}

/// MSB-first bit packer with 0xFF byte stuffing.
struct BitWriter<'a> {
    out: &'a mut Vec<u8>,
    acc: u32,
    n: u8,
}

impl<'a> BitWriter<'a> {
    fn new(out: &'a mut Vec<u8>) -> Self {
        Self { out, acc: 0, n: 0 }
    }

    fn put(&mut self, bits: u16, len: u8) {
        debug_assert!(len <= 16);
        if len == 0 {
            return;
        }
        self.acc = (self.acc << len) | (bits as u32 & ((1 << len) - 1));
        self.n += len;
        while self.n >= 8 {
            let byte = (self.acc >> (self.n - 8)) as u8;
            self.emit(byte);
            self.n -= 8;
        }
        self.acc &= (1 << self.n) - 1;
    }

    fn emit(&mut self, byte: u8) {
        self.out.push(byte);
        if byte == 0xFF {
            self.out.push(0x00);
        }
    }

    /// Pads the final partial byte with 1-bits.
    fn flush(&mut self) {
        if self.n > 0 {
            let pad = 8 - self.n;
            self.put((1 << pad) - 1, pad);
        }
    }
}
