use crate::error::{Error, Result};
use crate::image::Image;

/// Dense `(batch, channels, height, width)` array of `f64` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn filled(dims: [usize; 4], value: f64) -> Self {
        Self {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "tensor {dims:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Stacks single-channel images into a `(n, 1, h, w)` batch.
    pub fn from_images<'a, I>(images: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Image>,
    {
        let mut data = Vec::new();
        let mut hw = None;
        let mut n = 0;
        for img in images {
            let dims = (img.height(), img.width());
            match hw {
                None => hw = Some(dims),
                Some(prev) if prev != dims => {
                    return Err(Error::Shape(format!(
                        "cannot stack {}x{} with {}x{}",
                        dims.0, dims.1, prev.0, prev.1
                    )))
                }
                _ => {}
            }
            data.extend_from_slice(img.pixels());
            n += 1;
        }
        let (h, w) = hw.ok_or_else(|| Error::Shape("cannot stack zero images".into()))?;
        Self::from_vec([n, 1, h, w], data)
    }

    /// Splits a single-channel batch back into images.
    pub fn to_images(&self) -> Result<Vec<Image>> {
        let [n, c, h, w] = self.dims;
        if c != 1 {
            return Err(Error::Shape(format!("expected 1 channel, got {c}")));
        }
        (0..n)
            .map(|b| Image::from_vec(h, w, self.data[b * h * w..(b + 1) * h * w].to_vec()))
            .collect()
    }

    #[inline]
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.dims[2]
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.dims[3]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.dims[1] + c) * self.dims[2] + y) * self.dims[3] + x
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.offset(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f64) {
        let o = self.offset(b, c, y, x);
        self.data[o] = v;
    }

    /// Contiguous `(c, h, w)` slab of one batch item.
    pub fn item(&self, b: usize) -> &[f64] {
        let n = self.dims[1] * self.dims[2] * self.dims[3];
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.dims[1] * self.dims[2] * self.dims[3];
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp01(&self) -> Tensor {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn ensure_same_dims(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.ensure_same_dims(other, "add")?;
        Ok(Tensor {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.ensure_same_dims(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        self.ensure_same_dims(other, "add_scaled")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// Selects batch items by index, in the given order.
    pub fn gather(&self, indices: &[usize]) -> Tensor {
        let n = self.dims[1] * self.dims[2] * self.dims[3];
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.item(i));
        }
        Tensor {
            dims: [indices.len(), self.dims[1], self.dims[2], self.dims[3]],
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Mirror index without edge repetition (`-1 -> 1`, `n -> n-2`), folded for
/// offsets larger than the extent. A length-1 axis maps everything to 0.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}
