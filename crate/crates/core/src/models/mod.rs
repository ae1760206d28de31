//! The pre-network (PrN) and the EDSR-style post-network (PoN).

pub mod checkpoint;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{
    he_init, relu_backward, relu_forward, upsample_nearest_x2, upsample_nearest_x2_backward,
    pixel_shuffle_x2, pixel_unshuffle_x2, ConvLayer, EngineRng, LayerGrads, Tensor,
};

pub use checkpoint::{Checkpoint, EpochLoss, OptimState};

/// Compact resolution (half-size latent) or full resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    #[serde(rename = "CR")]
    Cr,
    #[serde(rename = "FR")]
    Fr,
}

impl Mode {
    pub fn latent_dims(self, (h, w): (usize, usize)) -> (usize, usize) {
        match self {
            Mode::Cr => (h.div_ceil(2), w.div_ceil(2)),
            Mode::Fr => (h, w),
        }
    }

    fn tag(self) -> u8 {
        match self {
            Mode::Cr => 0,
            Mode::Fr => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Mode::Cr),
            1 => Some(Mode::Fr),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cr => "CR",
            Mode::Fr => "FR",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CR" => Ok(Mode::Cr),
            "FR" => Ok(Mode::Fr),
            other => Err(Error::Config(format!("unknown mode {other:?}, expected CR or FR"))),
        }
    }
}

/// Anything made of conv layers that Adam can update layer by layer.
pub trait Network {
    fn layers(&self) -> Vec<&ConvLayer>;
    fn layers_mut(&mut self) -> Vec<&mut ConvLayer>;

    fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    fn init_he(&mut self, rng: &mut EngineRng) {
        for layer in self.layers_mut() {
            he_init(layer, rng);
        }
    }
}

pub fn count_params(networks: &[&dyn Network]) -> usize {
    networks.iter().map(|n| n.param_count()).sum()
}

/// Pre-network: three 3x3 convs, 1 -> 64 -> 32 -> 1, ReLU after the first
/// two. In CR mode the last conv has stride 2.
#[derive(Clone, Debug, PartialEq)]
pub struct PrnParams {
    mode: Mode,
    l1: ConvLayer,
    l2: ConvLayer,
    l3: ConvLayer,
}

pub struct PrnCache {
    input: Tensor,
    z1: Tensor,
    a1: Tensor,
    z2: Tensor,
    a2: Tensor,
}

impl PrnParams {
    pub const L1_FILTERS: usize = 64;
    pub const L2_FILTERS: usize = 32;

    /// All weights and biases zero.
    pub fn zeros(mode: Mode) -> Self {
        let stride = match mode {
            Mode::Cr => 2,
            Mode::Fr => 1,
        };
        let layer = |i, o, s| ConvLayer::new(i, o, s).expect("valid fixed shape");
        Self {
            mode,
            l1: layer(1, Self::L1_FILTERS, 1),
            l2: layer(Self::L1_FILTERS, Self::L2_FILTERS, 1),
            l3: layer(Self::L2_FILTERS, 1, stride),
        }
    }

    pub fn he(mode: Mode, rng: &mut EngineRng) -> Self {
        let mut p = Self::zeros(mode);
        p.init_he(rng);
        p
    }

    pub fn from_layers(mode: Mode, layers: Vec<ConvLayer>) -> Result<Self> {
        let template = Self::zeros(mode);
        check_layers(&template, &layers)?;
        let mut it = layers.into_iter();
        let (l1, l2, l3) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        Ok(Self { mode, l1, l2, l3 })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.channels() != 1 {
            return Err(Error::Shape(format!("PrN expects 1 channel, got {}", x.channels())));
        }
        if self.mode == Mode::Cr && (!x.height().is_multiple_of(2) || !x.width().is_multiple_of(2)) {
            return Err(Error::Precondition(format!(
                "CR mode needs even dims, got {}x{}; pad the image first",
                x.height(),
                x.width()
            )));
        }
        Ok(())
    }

    /// Unclamped network output.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<(Tensor, PrnCache)> {
        self.check_input(x)?;
        let z1 = self.l1.forward(x)?;
        let a1 = relu_forward(&z1);
        let z2 = self.l2.forward(&a1)?;
        let a2 = relu_forward(&z2);
        let y = self.l3.forward(&a2)?;
        Ok((
            y,
            PrnCache {
                input: x.clone(),
                z1,
                a1,
                z2,
                a2,
            },
        ))
    }

    /// Input gradient and per-layer parameter gradients.
    pub fn backward(&self, cache: &PrnCache, grad_out: &Tensor) -> Result<(Tensor, Vec<LayerGrads>)> {
        let g3 = self.l3.backward(&cache.a2, grad_out)?;
        let g = relu_backward(&cache.z2, &g3.input)?;
        let g2 = self.l2.backward(&cache.a1, &g)?;
        let g = relu_backward(&cache.z1, &g2.input)?;
        let g1 = self.l1.backward(&cache.input, &g)?;
        Ok((g1.input, vec![g1.params, g2.params, g3.params]))
    }
}

impl Network for PrnParams {
    fn layers(&self) -> Vec<&ConvLayer> {
        vec![&self.l1, &self.l2, &self.l3]
    }

    fn layers_mut(&mut self) -> Vec<&mut ConvLayer> {
        vec![&mut self.l1, &mut self.l2, &mut self.l3]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PonConfig {
    pub features: usize,
    pub blocks: usize,
    pub res_scale: f64,
}

impl Default for PonConfig {
    fn default() -> Self {
        Self {
            features: 32,
            blocks: 4,
            res_scale: 0.1,
        }
    }
}

/// Post-network: head conv, residual blocks, tail conv with a skip from the
/// head, an optional x2 pixel-shuffle upsampler (CR), and a final conv to
/// one channel whose output is added to the (upsampled) input.
#[derive(Clone, Debug, PartialEq)]
pub struct PonParams {
    mode: Mode,
    config: PonConfig,
    head: ConvLayer,
    blocks: Vec<[ConvLayer; 2]>,
    tail: ConvLayer,
    upsampler: Option<ConvLayer>,
    last: ConvLayer,
}

pub struct PonCache {
    input: Tensor,
    /// Per block: input, first conv output, its ReLU.
    blocks: Vec<(Tensor, Tensor, Tensor)>,
    trunk_out: Tensor,
    tail_out: Tensor,
    last_in: Tensor,
}

impl PonParams {
    pub fn zeros(mode: Mode, config: PonConfig) -> Result<Self> {
        if config.features == 0 {
            return Err(Error::Config("PoN needs at least one feature channel".into()));
        }
        if !config.res_scale.is_finite() {
            return Err(Error::Config("PoN residual scale must be finite".into()));
        }
        let f = config.features;
        let conv = |i, o| ConvLayer::new(i, o, 1).expect("valid fixed shape");
        Ok(Self {
            mode,
            config,
            head: conv(1, f),
            blocks: (0..config.blocks).map(|_| [conv(f, f), conv(f, f)]).collect(),
            tail: conv(f, f),
            upsampler: (mode == Mode::Cr).then(|| conv(f, 4 * f)),
            last: conv(f, 1),
        })
    }

    pub fn he(mode: Mode, config: PonConfig, rng: &mut EngineRng) -> Result<Self> {
        let mut p = Self::zeros(mode, config)?;
        p.init_he(rng);
        Ok(p)
    }

    pub fn from_layers(mode: Mode, config: PonConfig, layers: Vec<ConvLayer>) -> Result<Self> {
        let mut p = Self::zeros(mode, config)?;
        check_layers(&p, &layers)?;
        for (dst, src) in p.layers_mut().into_iter().zip(layers) {
            *dst = src;
        }
        Ok(p)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> PonConfig {
        self.config
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<(Tensor, PonCache)> {
        if x.channels() != 1 {
            return Err(Error::Shape(format!("PoN expects 1 channel, got {}", x.channels())));
        }
        let head_out = self.head.forward(x)?;
        let mut t = head_out.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for [c1, c2] in &self.blocks {
            let u = c1.forward(&t)?;
            let v = relu_forward(&u);
            let w = c2.forward(&v)?;
            let mut next = t.clone();
            next.add_scaled(&w, self.config.res_scale)?;
            blocks.push((std::mem::replace(&mut t, next), u, v));
        }
        let trunk_out = t;
        let mut tail_out = self.tail.forward(&trunk_out)?;
        tail_out.add_assign(&head_out)?;
        let last_in = match &self.upsampler {
            Some(up) => pixel_shuffle_x2(&up.forward(&tail_out)?)?,
            None => tail_out.clone(),
        };
        let mut out = self.last.forward(&last_in)?;
        match self.mode {
            Mode::Fr => out.add_assign(x)?,
            Mode::Cr => out.add_assign(&upsample_nearest_x2(x))?,
        }
        Ok((
            out,
            PonCache {
                input: x.clone(),
                blocks,
                trunk_out,
                tail_out,
                last_in,
            },
        ))
    }

    /// Input gradient and per-layer parameter gradients.
    pub fn backward(&self, cache: &PonCache, grad_out: &Tensor) -> Result<(Tensor, Vec<LayerGrads>)> {
        let (g, grads) = self.backward_impl(cache, grad_out, true)?;
        Ok((g, grads.expect("requested")))
    }

    /// Input gradient only, for training the PrN through a frozen PoN.
    pub fn backward_input(&self, cache: &PonCache, grad_out: &Tensor) -> Result<Tensor> {
        Ok(self.backward_impl(cache, grad_out, false)?.0)
    }

    fn backward_impl(
        &self,
        cache: &PonCache,
        grad_out: &Tensor,
        with_params: bool,
    ) -> Result<(Tensor, Option<Vec<LayerGrads>>)> {
        let mut grads: Vec<LayerGrads> = Vec::new();
        let mut back = |layer: &ConvLayer, input: &Tensor, g: &Tensor| -> Result<Tensor> {
            if with_params {
                let cg = layer.backward(input, g)?;
                grads.push(cg.params);
                Ok(cg.input)
            } else {
                layer.backward_input(input, g)
            }
        };

        let g_last_in = back(&self.last, &cache.last_in, grad_out)?;
        let g_tail_out = match &self.upsampler {
            Some(up) => {
                let g_u = pixel_unshuffle_x2(&g_last_in)?;
                back(up, &cache.tail_out, &g_u)?
            }
            None => g_last_in,
        };
        // tail_out = tail(trunk_out) + head_out
        let mut g_head = g_tail_out.clone();
        let mut g_t = back(&self.tail, &cache.trunk_out, &g_tail_out)?;
        for ([c1, c2], (t_in, u, v)) in self.blocks.iter().zip(&cache.blocks).rev() {
            // next = t + r * c2(relu(c1(t)))
            let g_w = g_t.scale(self.config.res_scale);
            let g_v = back(c2, v, &g_w)?;
            let g_u = relu_backward(u, &g_v)?;
            let g_in = back(c1, t_in, &g_u)?;
            g_t.add_assign(&g_in)?;
        }
        g_head.add_assign(&g_t)?;
        let mut g_x = back(&self.head, &cache.input, &g_head)?;
        match self.mode {
            Mode::Fr => g_x.add_assign(grad_out)?,
            Mode::Cr => g_x.add_assign(&upsample_nearest_x2_backward(grad_out)?)?,
        }

        // Collected output-first; reversing yields `layers()` order.
        let grads = with_params.then(|| {
            grads.reverse();
            grads
        });
        Ok((g_x, grads))
    }
}

impl Network for PonParams {
    fn layers(&self) -> Vec<&ConvLayer> {
        let mut v = vec![&self.head];
        for [a, b] in &self.blocks {
            v.push(a);
            v.push(b);
        }
        v.push(&self.tail);
        if let Some(up) = &self.upsampler {
            v.push(up);
        }
        v.push(&self.last);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut ConvLayer> {
        let mut v = vec![&mut self.head];
        for [a, b] in &mut self.blocks {
            v.push(a);
            v.push(b);
        }
        v.push(&mut self.tail);
        if let Some(up) = &mut self.upsampler {
            v.push(up);
        }
        v.push(&mut self.last);
        v
    }
}

fn check_layers(template: &dyn Network, layers: &[ConvLayer]) -> Result<()> {
    let expected = template.layers();
    if expected.len() != layers.len() {
        return Err(Error::Config(format!(
            "expected {} layers, got {}",
            expected.len(),
            layers.len()
        )));
    }
    for (i, (e, l)) in expected.iter().zip(layers).enumerate() {
        if e.weights().dims() != l.weights().dims() || e.stride() != l.stride() {
            return Err(Error::Config(format!(
                "layer {i}: expected {:?} stride {}, got {:?} stride {}",
                e.weights().dims(),
                e.stride(),
                l.weights().dims(),
                l.stride()
            )));
        }
    }
    Ok(())
}

/// A PrN/PoN pair sharing one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPair {
    pub prn: PrnParams,
    pub pon: PonParams,
}

impl ModelPair {
    pub fn new(prn: PrnParams, pon: PonParams) -> Result<Self> {
        if prn.mode() != pon.mode() {
            return Err(Error::Config(format!(
                "PrN is {} but PoN is {}",
                prn.mode(),
                pon.mode()
            )));
        }
        Ok(Self { prn, pon })
    }

    pub fn he(mode: Mode, config: PonConfig, rng: &mut EngineRng) -> Result<Self> {
        let prn = PrnParams::he(mode, rng);
        let pon = PonParams::he(mode, config, rng)?;
        Ok(Self { prn, pon })
    }

    pub fn mode(&self) -> Mode {
        self.prn.mode()
    }

    pub fn param_count(&self) -> usize {
        count_params(&[&self.prn, &self.pon])
    }

    /// Codec-free composition `PoN(PrN(x))`, unclamped.
    pub fn autoencode(&self, x: &Tensor) -> Result<Tensor> {
        self.pon.forward(&self.prn.forward(x)?)
    }
}

/// Codec input `Y` for one image, clamped to `[0, 1]`.
pub fn prn_forward(f: &Image, prn: &PrnParams) -> Result<Image> {
    let y = prn.forward(&Tensor::from_images([f])?)?;
    Ok(y.clamp01().to_images()?.remove(0))
}

/// Reconstruction from one decoded latent, clamped to `[0, 1]`.
pub fn pon_forward(fc: &Image, pon: &PonParams) -> Result<Image> {
    let out = pon.forward(&Tensor::from_images([fc])?)?;
    Ok(out.clamp01().to_images()?.remove(0))
}
