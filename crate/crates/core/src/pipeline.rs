//! Inference through the full sandwich: PrN, codec, PoN.

use crate::codec::{Bitstream, Codec};
use crate::error::Result;
use crate::image::Image;
use crate::models::{pon_forward, prn_forward, ModelPair, PrnParams};

/// Codec input `Y`, the decoded latent and the bitstream for one image.
pub fn forward_codec_pass(
    f: &Image,
    prn: &PrnParams,
    codec: &dyn Codec,
) -> Result<(Image, Image, Bitstream)> {
    let y = prn_forward(f, prn)?;
    let bs = codec.encode(&y)?;
    let fc = codec.decode(&bs)?;
    Ok((y, fc, bs))
}

/// Reconstruction and bitstream of a prepared (padded) image.
pub fn round_trip(f: &Image, models: &ModelPair, codec: &dyn Codec) -> Result<(Image, Bitstream)> {
    let (_, fc, bs) = forward_codec_pass(f, &models.prn, codec)?;
    Ok((pon_forward(&fc, &models.pon)?, bs))
}

/// Reconstruction from a stored bitstream.
pub fn reconstruct(bs: &Bitstream, models: &ModelPair, codec: &dyn Codec) -> Result<Image> {
    pon_forward(&codec.decode(bs)?, &models.pon)
}
