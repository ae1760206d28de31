use crate::error::{Error, Result};
use crate::image::Image;

/// Pipeline sizes are multiples of this: one CR halving, then 8x8 blocks.
pub const ALIGN: usize = 16;

/// Original size of a padded image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CropRecord {
    pub height: usize,
    pub width: usize,
    pub padded_height: usize,
    pub padded_width: usize,
}

impl CropRecord {
    pub fn is_identity(&self) -> bool {
        self.height == self.padded_height && self.width == self.padded_width
    }
}

fn align(n: usize) -> usize {
    n.max(1).div_ceil(ALIGN) * ALIGN
}

/// Reflect-pads the bottom and right edges up to multiples of 16.
pub fn prepare(img: &Image) -> Result<(Image, CropRecord)> {
    let (h, w) = img.dims();
    if h == 0 || w == 0 {
        return Err(Error::Precondition("cannot prepare an empty image".into()));
    }
    let (ph, pw) = (align(h), align(w));
    let padded = if (ph, pw) == (h, w) {
        img.clone()
    } else {
        img.pad_reflect(ph, pw)?
    };
    Ok((
        padded,
        CropRecord {
            height: h,
            width: w,
            padded_height: ph,
            padded_width: pw,
        },
    ))
}

pub fn unprepare(img: &Image, crop: &CropRecord) -> Result<Image> {
    if img.dims() != (crop.padded_height, crop.padded_width) {
        return Err(Error::Shape(format!(
            "expected a {}x{} reconstruction, got {}x{}",
            crop.padded_height,
            crop.padded_width,
            img.height(),
            img.width()
        )));
    }
    if crop.is_identity() {
        return Ok(img.clone());
    }
    img.crop(0, 0, crop.height, crop.width)
}

/// A `size x size` training crop: reflect-padded if too small, otherwise
/// the centred window.
pub fn training_crop(img: &Image, size: usize) -> Result<Image> {
    if size == 0 || !size.is_multiple_of(ALIGN) {
        return Err(Error::Config(format!(
            "training crop size {size} must be a positive multiple of {ALIGN}"
        )));
    }
    let (h, w) = img.dims();
    let padded = img.pad_reflect(h.max(size), w.max(size))?;
    let (ph, pw) = padded.dims();
    padded.crop((ph - size) / 2, (pw - size) / 2, size, size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |y, x| ((y * 13 + x * 7) % 256) as f64 / 255.0)
    }

    #[test]
    fn aligned_input_is_unchanged() {
        let img = ramp(64, 64);
        let (p, crop) = prepare(&img).unwrap();
        assert_eq!(p, img);
        assert!(crop.is_identity());
    }

    #[test]
    fn odd_sizes_round_trip() {
        let img = ramp(65, 70);
        let (p, crop) = prepare(&img).unwrap();
        assert_eq!(p.dims(), (80, 80));
        assert_eq!(unprepare(&p, &crop).unwrap(), img);
    }

    #[test]
    fn single_pixel() {
        let img = Image::filled(1, 1, 0.25);
        let (p, crop) = prepare(&img).unwrap();
        assert_eq!(p.dims(), (16, 16));
        assert!(p.pixels().iter().all(|&v| v == 0.25));
        assert_eq!(unprepare(&p, &crop).unwrap(), img);
    }

    #[test]
    fn wrong_size_rejected() {
        let (_, crop) = prepare(&ramp(20, 20)).unwrap();
        assert!(unprepare(&ramp(16, 16), &crop).is_err());
    }

    #[test]
    fn crops() {
        assert_eq!(training_crop(&ramp(100, 90), 64).unwrap().dims(), (64, 64));
        assert_eq!(training_crop(&ramp(20, 90), 64).unwrap().dims(), (64, 64));
        assert!(training_crop(&ramp(20, 20), 30).is_err());
    }
}
