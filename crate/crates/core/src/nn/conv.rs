//! 3x3 convolution with reflect "same" padding and optional stride 2.
//!
//! Both passes lower to a single GEMM per batch item through an explicit
//! im2col buffer. The gather table maps each `(tap, output pixel)` pair to a
//! source pixel, so the reflect padding and its adjoint share one code path.

use crate::error::{Error, Result};
use crate::nn::tensor::{reflect_index, Tensor};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `(out_ch, in_ch, 3, 3)`
    weights: Tensor,
    bias: Vec<f64>,
    stride: usize,
}

/// Parameter gradients of one layer, laid out like the layer itself.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &ConvLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|&g| g == 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Tensor,
    pub params: LayerGrads,
}

impl ConvLayer {
    /// Zero-weight, zero-bias layer.
    pub fn new(in_ch: usize, out_ch: usize, stride: usize) -> Result<Self> {
        Self::from_parts(
            Tensor::zeros([out_ch, in_ch, KERNEL, KERNEL]),
            vec![0.0; out_ch],
            stride,
        )
    }

    pub fn from_parts(weights: Tensor, bias: Vec<f64>, stride: usize) -> Result<Self> {
        let [out_ch, in_ch, kh, kw] = weights.dims();
        if kh != KERNEL || kw != KERNEL {
            return Err(Error::Config(format!("kernel must be 3x3, got {kh}x{kw}")));
        }
        if !(1..=2).contains(&stride) {
            return Err(Error::Config(format!("stride must be 1 or 2, got {stride}")));
        }
        if out_ch == 0 || in_ch == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if bias.len() != out_ch {
            return Err(Error::Config(format!(
                "bias has {} entries for {out_ch} filters",
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            stride,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dims()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dims()[0]
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        self.weights.data_mut()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn output_dims(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let [b, c, h, w] = input;
        if c != self.in_channels() {
            return Err(Error::Config(format!(
                "layer expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        if h == 0 || w == 0 {
            return Err(Error::Config("spatial dims must be at least 1".into()));
        }
        Ok([b, self.out_channels(), h.div_ceil(self.stride), w.div_ceil(self.stride)])
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out_dims = self.output_dims(input.dims())?;
        let geo = Geometry::new(input.dims(), out_dims, self.stride);
        let mut out = Tensor::zeros(out_dims);
        let mut col = vec![0.0; self.in_channels() * TAPS * geo.pixels];
        for b in 0..input.batch() {
            geo.im2col(input.item(b), self.in_channels(), &mut col);
            let dst = out.item_mut(b);
            for (o, row) in dst.chunks_exact_mut(geo.pixels).enumerate() {
                row.fill(self.bias[o]);
            }
            gemm(
                self.out_channels(),
                self.in_channels() * TAPS,
                geo.pixels,
                self.weights.data(),
                Layout::RowMajor,
                &col,
                Layout::RowMajor,
                dst,
                1.0,
            );
        }
        Ok(out)
    }

    /// Gradients with respect to input, weights and bias.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
        let (input_grad, params) = self.backward_impl(input, grad_out, true)?;
        Ok(ConvGrads {
            input: input_grad,
            params: params.expect("parameter gradients requested"),
        })
    }

    /// Input gradient only; used when the layer's weights are frozen.
    pub fn backward_input(&self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        Ok(self.backward_impl(input, grad_out, false)?.0)
    }

    fn backward_impl(
        &self,
        input: &Tensor,
        grad_out: &Tensor,
        with_params: bool,
    ) -> Result<(Tensor, Option<LayerGrads>)> {
        let out_dims = self.output_dims(input.dims())?;
        if grad_out.dims() != out_dims {
            return Err(Error::Config(format!(
                "grad_out dims {:?} differ from forward output {:?}",
                grad_out.dims(),
                out_dims
            )));
        }
        let geo = Geometry::new(input.dims(), out_dims, self.stride);
        let k = self.in_channels() * TAPS;
        let mut col = vec![0.0; k * geo.pixels];
        let mut grad_col = vec![0.0; k * geo.pixels];
        let mut grad_in = Tensor::zeros(input.dims());
        let mut params = with_params.then(|| LayerGrads::zeros_like(self));

        for b in 0..input.batch() {
            let g = grad_out.item(b);
            if let Some(p) = params.as_mut() {
                geo.im2col(input.item(b), self.in_channels(), &mut col);
                // dW[o, j] += sum_p g[o, p] * col[j, p]
                gemm(
                    self.out_channels(),
                    geo.pixels,
                    k,
                    g,
                    Layout::RowMajor,
                    &col,
                    Layout::Transposed,
                    &mut p.weights,
                    1.0,
                );
                for (o, row) in g.chunks_exact(geo.pixels).enumerate() {
                    p.bias[o] += row.iter().sum::<f64>();
                }
            }
            // dcol[j, p] = sum_o W[o, j] * g[o, p]
            gemm(
                k,
                self.out_channels(),
                geo.pixels,
                self.weights.data(),
                Layout::Transposed,
                g,
                Layout::RowMajor,
                &mut grad_col,
                0.0,
            );
            geo.col2im(&grad_col, self.in_channels(), grad_in.item_mut(b));
        }
        Ok((grad_in, params))
    }
}

pub fn conv2d_forward(input: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    layer.forward(input)
}

pub fn conv2d_backward(
    input: &Tensor,
    layer: &ConvLayer,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let g = layer.backward(input, grad_out)?;
    let weights = Tensor::from_vec(layer.weights().dims(), g.params.weights)?;
    Ok((g.input, weights, g.params.bias))
}

struct Geometry {
    in_pixels: usize,
    pixels: usize,
    /// `src[tap * pixels + p]` is the input pixel feeding output pixel `p`.
    src: Vec<u32>,
}

impl Geometry {
    fn new(input: [usize; 4], output: [usize; 4], stride: usize) -> Self {
        let (h, w) = (input[2], input[3]);
        let (oh, ow) = (output[2], output[3]);
        let pixels = oh * ow;
        let mut src = Vec::with_capacity(TAPS * pixels);
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                for oy in 0..oh {
                    let sy = reflect_index((oy * stride + ky) as isize - 1, h);
                    for ox in 0..ow {
                        let sx = reflect_index((ox * stride + kx) as isize - 1, w);
                        src.push((sy * w + sx) as u32);
                    }
                }
            }
        }
        Self {
            in_pixels: h * w,
            pixels,
            src,
        }
    }

    fn im2col(&self, input: &[f64], channels: usize, col: &mut [f64]) {
        for c in 0..channels {
            let plane = &input[c * self.in_pixels..(c + 1) * self.in_pixels];
            let rows = &mut col[c * TAPS * self.pixels..(c + 1) * TAPS * self.pixels];
            for (dst, &s) in rows.iter_mut().zip(&self.src) {
                *dst = plane[s as usize];
            }
        }
    }

    fn col2im(&self, col: &[f64], channels: usize, grad_in: &mut [f64]) {
        for c in 0..channels {
            let plane = &mut grad_in[c * self.in_pixels..(c + 1) * self.in_pixels];
            let rows = &col[c * TAPS * self.pixels..(c + 1) * TAPS * self.pixels];
            for (&g, &s) in rows.iter().zip(&self.src) {
                plane[s as usize] += g;
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Layout {
    RowMajor,
    Transposed,
}

/// `c = beta * c + a · b` for an `m x k` times `k x n` product, with `c`
/// row-major `m x n`. `Transposed` means the buffer stores the transpose.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_layout: Layout,
    b: &[f64],
    b_layout: Layout,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = match a_layout {
        Layout::RowMajor => (k as isize, 1),
        Layout::Transposed => (1, m as isize),
    };
    let (rsb, csb) = match b_layout {
        Layout::RowMajor => (n as isize, 1),
        Layout::Transposed => (1, k as isize),
    };
    // SAFETY: the strides describe exactly the m*k, k*n and m*n buffers
    // asserted above, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
