//! Canonical Huffman tables as specified by `BITS`/`HUFFVAL` lists
//! (T.81 Annex C for code generation, F.2.2.3 for decoding).

#[derive(Clone, Debug)]
pub struct HuffmanSpec {
    pub bits: [u8; 16],
    pub values: Vec<u8>,
}

impl HuffmanSpec {
    pub fn new(bits: &[u8; 16], values: &[u8]) -> Self {
        Self {
            bits: *bits,
            values: values.to_vec(),
        }
    }

    /// `(code, length)` pairs in `values` order.
    fn codes(&self) -> Vec<(u16, u8)> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut code: u32 = 0;
        for (i, &count) in self.bits.iter().enumerate() {
            let len = i as u8 + 1;
            for _ in 0..count {
                out.push((code as u16, len));
                code += 1;
            }
            code <<= 1;
        }
        out
    }
}

/// Symbol -> `(code, length)` lookup; length 0 marks an absent symbol.
#[derive(Clone, Debug)]
pub struct EncodeTable {
    entries: [(u16, u8); 256],
}

impl EncodeTable {
    pub fn new(spec: &HuffmanSpec) -> Self {
        let mut entries = [(0u16, 0u8); 256];
        for (&sym, code) in spec.values.iter().zip(spec.codes()) {
            entries[sym as usize] = code;
        }
        Self { entries }
    }

    #[inline]
    pub fn get(&self, symbol: u8) -> (u16, u8) {
        let e = self.entries[symbol as usize];
        debug_assert!(e.1 > 0, "symbol {symbol:#x} has no code");
        e
    }
}

#[derive(Clone, Debug)]
pub struct DecodeTable {
    /// Largest code of each length, or -1 when no code has that length.
    max_code: [i32; 17],
    /// Offset into `values` of the first code of each length, minus that code.
    val_offset: [i32; 17],
    values: Vec<u8>,
}

impl DecodeTable {
    pub fn new(spec: &HuffmanSpec) -> Result<Self, String> {
        let total: usize = spec.bits.iter().map(|&b| b as usize).sum();
        if total != spec.values.len() || total > 256 {
            return Err(format!(
                "Huffman table declares {total} codes but lists {} values",
                spec.values.len()
            ));
        }
        let mut max_code = [-1i32; 17];
        let mut val_offset = [0i32; 17];
        let mut code: i32 = 0;
        let mut k: i32 = 0;
        for len in 1..=16 {
            let n = spec.bits[len - 1] as i32;
            if n > 0 {
                val_offset[len] = k - code;
                code += n;
                k += n;
                max_code[len] = code - 1;
                if code > (1 << len) {
                    return Err("over-subscribed Huffman code lengths".into());
                }
            }
            code <<= 1;
        }
        Ok(Self {
            max_code,
            val_offset,
            values: spec.values.clone(),
        })
    }

    /// Decodes one symbol, pulling bits from `next_bit` MSB first.
    pub fn decode<E>(&self, mut next_bit: impl FnMut() -> Result<u32, E>) -> Result<Option<u8>, E> {
        let mut code: i32 = 0;
        for len in 1..=16 {
            code = (code << 1) | next_bit()? as i32;
            if code <= self.max_code[len] {
                let idx = (code + self.val_offset[len]) as usize;
                return Ok(self.values.get(idx).copied());
            }
        }
        Ok(None)
    }
}

/// Number of bits needed for the magnitude of `v` (JPEG "SSSS" category).
#[inline]
pub fn category(v: i32) -> u8 {
    (32 - v.unsigned_abs().leading_zeros()) as u8
}

/// Low `size` bits that encode `v` in its category.
#[inline]
pub fn magnitude_bits(v: i32, size: u8) -> u16 {
    if v >= 0 {
        v as u16
    } else {
        (v + (1 << size) - 1) as u16
    }
}

/// Inverse of [`magnitude_bits`] (T.81 EXTEND).
#[inline]
pub fn extend(bits: u32, size: u8) -> i32 {
    if size == 0 {
        return 0;
    }
    let v = bits as i32;
    if v < (1 << (size - 1)) {
        v - (1 << size) + 1
    } else {
        v
    }
}
