//! Edge-aware codec sandwich around baseline JPEG: a learned pre-network,
//! the codec itself, a learned post-network, progressive training and the
//! rate-distortion evaluation stack.

pub mod codec;
pub mod edges;
pub mod error;
pub mod harness;
pub mod image;
pub mod metrics;
pub mod losses;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod pnm;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use image::Image;
