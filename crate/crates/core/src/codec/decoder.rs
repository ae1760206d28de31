//! Decoder for single-component baseline (and 8-bit extended sequential)
//! Huffman JPEG streams. Anything else is rejected with the byte offset of
//! the offending marker.

use crate::codec::dct::idct8x8;
use crate::codec::huffman::{extend, DecodeTable, HuffmanSpec};
use crate::codec::tables::ZIGZAG;
use crate::codec::Bitstream;
use crate::error::{parse_err, Error, Result};
use crate::image::Image;

struct Frame {
    height: usize,
    width: usize,
    component_id: u8,
    quant_id: usize,
}

#[derive(Default)]
struct State {
    quant: [Option<[u16; 64]>; 4],
    dc: [Option<DecodeTable>; 4],
    ac: [Option<DecodeTable>; 4],
    frame: Option<Frame>,
    image: Option<Image>,
}

pub fn decode(bs: &Bitstream) -> Result<Image> {
    let data = bs.bytes();
    if data.len() < 2 || data[0] != 0xFF || data[1] != 0xD8 {
        return parse_err(0, "missing SOI marker");
    }
    let mut st = State::default();
    let mut pos = 2;
    loop {
        let (marker, marker_pos) = next_marker(data, pos)?;
        pos = marker_pos + 2;
        match marker {
            0xD9 => {
                return st
                    .image
                    .ok_or_else(|| Error::Parse {
                        offset: marker_pos,
                        message: "EOI before any scan".into(),
                    });
            }
            0xC0 | 0xC1 => {
                let seg = segment(data, pos)?;
                st.frame = Some(parse_sof(seg, pos)?);
                pos += seg.len() + 2;
            }
            0xC2 | 0xC6 | 0xCA | 0xCE => {
                return unsupported(marker_pos, format!("progressive frame (SOF{})", marker - 0xC0))
            }
            0xC3 | 0xC7 | 0xCB | 0xCF => {
                return unsupported(marker_pos, format!("lossless frame (SOF{})", marker - 0xC0))
            }
            0xC5 => return unsupported(marker_pos, "hierarchical frame (SOF5)"),
            0xC9 | 0xCD => {
                return unsupported(marker_pos, format!("arithmetic coding (SOF{})", marker - 0xC0))
            }
            0xC8 | 0xCC => return unsupported(marker_pos, "arithmetic coding / JPG extension"),
            0xC4 => {
                let seg = segment(data, pos)?;
                parse_dht(seg, pos, &mut st)?;
                pos += seg.len() + 2;
            }
            0xDB => {
                let seg = segment(data, pos)?;
                parse_dqt(seg, pos, &mut st)?;
                pos += seg.len() + 2;
            }
            0xDD => {
                let seg = segment(data, pos)?;
                if seg.len() != 2 {
                    return parse_err(pos, "DRI segment must hold 2 bytes");
                }
                if u16::from_be_bytes([seg[0], seg[1]]) != 0 {
                    return unsupported(marker_pos, "restart intervals");
                }
                pos += seg.len() + 2;
            }
            0xDA => {
                let seg = segment(data, pos)?;
                let scan = parse_sos(seg, pos, &st)?;
                pos += seg.len() + 2;
                let (img, end) = decode_scan(data, pos, &st, scan)?;
                st.image = Some(img);
                pos = end;
            }
            0xE0..=0xEF | 0xFE => {
                let seg = segment(data, pos)?;
                pos += seg.len() + 2;
            }
            0xD0..=0xD7 => return parse_err(marker_pos, "restart marker outside a scan"),
            0xD8 => return parse_err(marker_pos, "nested SOI"),
            0xDC => return unsupported(marker_pos, "DNL marker"),
            0xDE | 0xDF => return unsupported(marker_pos, "hierarchical mode"),
            m => return parse_err(marker_pos, format!("unexpected marker 0xFF{m:02X}")),
        }
    }
}

fn unsupported<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Unsupported {
        offset,
        message: message.into(),
    })
}

/// Finds the next marker at or after `pos`, skipping 0xFF fill bytes.
fn next_marker(data: &[u8], pos: usize) -> Result<(u8, usize)> {
    if pos >= data.len() {
        return parse_err(pos, "stream ended before EOI");
    }
    if data[pos] != 0xFF {
        return parse_err(pos, format!("expected marker, found 0x{:02X}", data[pos]));
    }
    let mut p = pos;
    while p + 1 < data.len() && data[p + 1] == 0xFF {
        p += 1;
    }
    if p + 1 >= data.len() {
        return parse_err(p, "stream ended inside a marker");
    }
    Ok((data[p + 1], p))
}

/// Payload of the length-prefixed segment whose length field starts at `pos`.
fn segment(data: &[u8], pos: usize) -> Result<&[u8]> {
    if pos + 2 > data.len() {
        return parse_err(pos, "truncated segment length");
    }
    let len = u16::from_be_bytes([data[pos], data[pos + 1]]) as usize;
    if len < 2 {
        return parse_err(pos, format!("segment length {len} too small"));
    }
    if pos + len > data.len() {
        return parse_err(pos, format!("segment of {len} bytes runs past end of stream"));
    }
    Ok(&data[pos + 2..pos + len])
}

fn parse_sof(seg: &[u8], pos: usize) -> Result<Frame> {
    if seg.len() < 6 {
        return parse_err(pos, "truncated frame header");
    }
    if seg[0] != 8 {
        return unsupported(pos, format!("{}-bit sample precision", seg[0]));
    }
    let height = u16::from_be_bytes([seg[1], seg[2]]) as usize;
    let width = u16::from_be_bytes([seg[3], seg[4]]) as usize;
    let nf = seg[5] as usize;
    if height == 0 {
        return unsupported(pos, "height defined by DNL");
    }
    if width == 0 {
        return parse_err(pos, "zero frame width");
    }
    if nf != 1 {
        return unsupported(pos, format!("{nf} colour components (grayscale only)"));
    }
    if seg.len() != 6 + 3 * nf {
        return parse_err(pos, "frame header length mismatch");
    }
    let quant_id = seg[8] as usize;
    if quant_id > 3 {
        return parse_err(pos, format!("quantization table id {quant_id}"));
    }
    Ok(Frame {
        height,
        width,
        component_id: seg[6],
        quant_id,
    })
}

fn parse_dqt(mut seg: &[u8], pos: usize, st: &mut State) -> Result<()> {
    while !seg.is_empty() {
        let precision = seg[0] >> 4;
        let id = (seg[0] & 0x0F) as usize;
        if id > 3 {
            return parse_err(pos, format!("quantization table id {id}"));
        }
        let width = match precision {
            0 => 1,
            1 => 2,
            p => return parse_err(pos, format!("quantization precision {p}")),
        };
        if seg.len() < 1 + 64 * width {
            return parse_err(pos, "truncated quantization table");
        }
        let mut table = [0u16; 64];
        for (z, entry) in table.iter_mut().enumerate() {
            *entry = if width == 1 {
                seg[1 + z] as u16
            } else {
                u16::from_be_bytes([seg[1 + 2 * z], seg[2 + 2 * z]])
            };
        }
        st.quant[id] = Some(table);
        seg = &seg[1 + 64 * width..];
    }
    Ok(())
}

fn parse_dht(mut seg: &[u8], pos: usize, st: &mut State) -> Result<()> {
    while !seg.is_empty() {
        if seg.len() < 17 {
            return parse_err(pos, "truncated Huffman table");
        }
        let class = seg[0] >> 4;
        let id = (seg[0] & 0x0F) as usize;
        if class > 1 || id > 3 {
            return parse_err(pos, format!("Huffman table class {class} id {id}"));
        }
        let mut bits = [0u8; 16];
        bits.copy_from_slice(&seg[1..17]);
        let count: usize = bits.iter().map(|&b| b as usize).sum();
        if seg.len() < 17 + count {
            return parse_err(pos, "truncated Huffman values");
        }
        let spec = HuffmanSpec::new(&bits, &seg[17..17 + count]);
        let table = DecodeTable::new(&spec).map_err(|m| Error::Parse {
            offset: pos,
            message: m,
        })?;
        if class == 0 {
            st.dc[id] = Some(table);
        } else {
            st.ac[id] = Some(table);
        }
        seg = &seg[17 + count..];
    }
    Ok(())
}

struct Scan {
    dc_id: usize,
    ac_id: usize,
}

fn parse_sos(seg: &[u8], pos: usize, st: &State) -> Result<Scan> {
    let Some(frame) = st.frame.as_ref() else {
        return parse_err(pos, "scan before frame header");
    };
    if seg.is_empty() || seg[0] != 1 || seg.len() != 6 {
        return unsupported(pos, "scan must cover exactly one component");
    }
    if seg[1] != frame.component_id {
        return parse_err(pos, format!("scan references unknown component {}", seg[1]));
    }
    let (ss, se, ahal) = (seg[3], seg[4], seg[5]);
    if ss != 0 || se != 63 || ahal != 0 {
        return unsupported(pos, "spectral selection / successive approximation");
    }
    Ok(Scan {
        dc_id: (seg[2] >> 4) as usize,
        ac_id: (seg[2] & 0x0F) as usize,
    })
}

fn huffman_table<'a>(
    tables: &'a [Option<DecodeTable>; 4],
    id: usize,
    what: &str,
    offset: usize,
) -> Result<&'a DecodeTable> {
    tables.get(id).and_then(Option::as_ref).ok_or_else(|| Error::Parse {
        offset,
        message: format!("{what} Huffman table {id} not defined"),
    })
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    n: u8,
}

impl BitReader<'_> {
    fn bit(&mut self) -> Result<u32> {
        if self.n == 0 {
            let Some(&byte) = self.data.get(self.pos) else {
                return parse_err(self.pos, "truncated entropy-coded data");
            };
            if byte == 0xFF {
                match self.data.get(self.pos + 1) {
                    Some(0x00) => self.pos += 2,
                    Some(_) => return parse_err(self.pos, "marker inside entropy-coded data"),
                    None => return parse_err(self.pos, "truncated entropy-coded data"),
                }
            } else {
                self.pos += 1;
            }
            self.acc = byte as u32;
            self.n = 8;
        }
        self.n -= 1;
        Ok((self.acc >> self.n) & 1)
    }

    fn bits(&mut self, count: u8) -> Result<u32> {
        let mut v = 0;
        for _ in 0..count {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }
}

fn decode_scan(data: &[u8], start: usize, st: &State, scan: Scan) -> Result<(Image, usize)> {
    let frame = st.frame.as_ref().expect("checked in parse_sos");
    let quant = st.quant[frame.quant_id].ok_or_else(|| Error::Parse {
        offset: start,
        message: format!("quantization table {} not defined", frame.quant_id),
    })?;
    let dc = huffman_table(&st.dc, scan.dc_id, "DC", start)?;
    let ac = huffman_table(&st.ac, scan.ac_id, "AC", start)?;

    let (h, w) = (frame.height, frame.width);
    let (bh, bw) = (h.div_ceil(8), w.div_ceil(8));
    let mut samples = vec![0u8; h * w];
    let mut r = BitReader {
        data,
        pos: start,
        acc: 0,
        n: 0,
    };
    let mut pred = 0i32;
    for by in 0..bh {
        for bx in 0..bw {
            let at = r.pos;
            let mut coeffs = [0i32; 64];
            let s = dc
                .decode(|| r.bit())?
                .ok_or_else(|| Error::Parse {
                    offset: at,
                    message: "invalid DC Huffman code".into(),
                })?;
            if s > 11 {
                return parse_err(at, format!("DC category {s}"));
            }
            let diff = extend(r.bits(s)?, s);
            pred += diff;
            coeffs[0] = pred;
            let mut k = 1;
            while k < 64 {
                let sym = ac
                    .decode(|| r.bit())?
                    .ok_or_else(|| Error::Parse {
                        offset: r.pos,
                        message: "invalid AC Huffman code".into(),
                    })?;
                let (run, size) = ((sym >> 4) as usize, sym & 0x0F);
                if size == 0 {
                    if run == 15 {
                        k += 16;
                        continue;
                    }
                    break;
                }
                k += run;
                if k > 63 {
                    return parse_err(r.pos, "AC run past end of block");
                }
                coeffs[ZIGZAG[k]] = extend(r.bits(size)?, size);
                k += 1;
            }
            if k > 64 {
                return parse_err(r.pos, "zero run past end of block");
            }
            let mut block = [0.0; 64];
            for (z, &natural) in ZIGZAG.iter().enumerate() {
                block[natural] = (coeffs[natural] * quant[z] as i32) as f64;
            }
            let px = idct8x8(&block);
            for y in 0..8 {
                let iy = by * 8 + y;
                if iy >= h {
                    break;
                }
                for x in 0..8 {
                    let ix = bx * 8 + x;
                    if ix >= w {
                        break;
                    }
                    samples[iy * w + ix] = (px[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    Ok((Image::from_u8(h, w, &samples)?, r.pos))
}
