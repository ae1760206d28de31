//! Orthonormal 8x8 DCT-II in the JPEG normalisation:
//! `F(u,v) = 1/4 C(u) C(v) sum f(x,y) cos((2x+1)uπ/16) cos((2y+1)vπ/16)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

pub type Block = [f64; 64];

/// `BASIS[u][x] = C(u)/2 * cos((2x+1)uπ/16)`; orthonormal rows.
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let c = if u == 0 { FRAC_1_SQRT_2 } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * c * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

/// Forward transform of a level-shifted block, both row-major.
pub fn fdct8x8(block: &Block) -> Block {
    let b = basis();
    let mut tmp = [0.0; 64];
    // rows: tmp[y][u] = sum_x b[u][x] f[y][x]
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += b[u][x] * block[y * 8 + x];
            }
            tmp[y * 8 + u] = acc;
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += b[v][y] * tmp[y * 8 + u];
            }
            out[v * 8 + u] = acc;
        }
    }
    out
}

pub fn idct8x8(coeffs: &Block) -> Block {
    let b = basis();
    let mut tmp = [0.0; 64];
    // tmp[y][u] = sum_v b[v][y] F[v][u]
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += b[v][y] * coeffs[v * 8 + u];
            }
            tmp[y * 8 + u] = acc;
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += b[u][x] * tmp[y * 8 + u];
            }
            out[y * 8 + x] = acc;
        }
    }
    out
}
