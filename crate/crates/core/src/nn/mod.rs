//! Minimal deterministic CNN engine: dense tensors, 3x3 convolutions,
//! ReLU, pixel shuffle and Adam.

pub mod adam;
pub mod conv;
pub mod init;
pub mod ops;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayer, LayerGrads};
pub use init::{he_init, seed_rng, EngineRng};
pub use ops::{
    pixel_shuffle_x2, pixel_unshuffle_x2, relu_backward, relu_forward, upsample_nearest_x2,
    upsample_nearest_x2_backward,
};
pub use tensor::{reflect_index, Tensor};
