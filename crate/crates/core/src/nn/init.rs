use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::conv::ConvLayer;

pub type EngineRng = ChaCha8Rng;

pub fn seed_rng(seed: u64) -> EngineRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// He-uniform weights in `±sqrt(6 / fan_in)` with `fan_in = in_ch * 9`;
/// bias reset to zero.
pub fn he_init(layer: &mut ConvLayer, rng: &mut EngineRng) {
    let fan_in = (layer.in_channels() * 9) as f64;
    let bound = (6.0 / fan_in).sqrt();
    for w in layer.weights_mut() {
        *w = rng.random_range(-bound..=bound);
    }
    layer.bias_mut().fill(0.0);
}
