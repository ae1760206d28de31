//! Progressive training: autoencoder warm-up, then per epoch a codec
//! forward pass, a PoN update on decoded latents and a PrN update through
//! the codec-free PrN -> PoN composition with the PoN frozen.

use rand::seq::SliceRandom;

use crate::codec::{Codec, JpegCodec};
use crate::edges::{canny, CannyConfig, EdgeMap};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::losses::{edge_aware_loss, mse_loss, LossConfig};
use crate::models::{
    Checkpoint, EpochLoss, ModelPair, Mode, Network, OptimState, PonConfig, PonParams,
};
use crate::nn::{seed_rng, AdamConfig, AdamState, EngineRng, LayerGrads, Tensor};
use crate::pipeline::forward_codec_pass;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub qf: u32,
    pub epochs: usize,
    pub iterations_per_module: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub alpha: f64,
    pub seed: u64,
    pub warmup_epochs: usize,
    pub pon: PonConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fr,
            qf: 10,
            epochs: 50,
            iterations_per_module: 5,
            batch_size: 10,
            lr: 1e-3,
            alpha: 0.75,
            seed: 0,
            warmup_epochs: 5,
            pon: PonConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        LossConfig::new(self.alpha)?;
        crate::codec::CodecConfig::new(self.qf)?;
        Ok(())
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig::new(self.alpha).expect("validated")
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Training images with their fixed edge maps; all share one size.
#[derive(Clone, Debug)]
pub struct TrainingData {
    images: Vec<Image>,
    edges: Vec<EdgeMap>,
}

impl TrainingData {
    pub fn new(images: Vec<Image>, edges: Vec<EdgeMap>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Precondition("training set is empty".into()));
        }
        if images.len() != edges.len() {
            return Err(Error::Shape(format!(
                "{} images but {} edge maps",
                images.len(),
                edges.len()
            )));
        }
        let dims = images[0].dims();
        for (i, (img, e)) in images.iter().zip(&edges).enumerate() {
            if img.dims() != dims {
                return Err(Error::Shape(format!(
                    "image {i} is {:?}, training size is {dims:?}",
                    img.dims()
                )));
            }
            if e.dims() != dims {
                return Err(Error::Shape(format!("edge map {i} is {:?}", e.dims())));
            }
        }
        Ok(Self { images, edges })
    }

    /// Edge maps from the original images with the given detector settings.
    pub fn with_canny(images: Vec<Image>, cfg: &CannyConfig) -> Result<Self> {
        let edges = images.iter().map(|i| canny(i, cfg)).collect::<Result<_>>()?;
        Self::new(images, edges)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn edges(&self) -> &[EdgeMap] {
        &self.edges
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }
}

/// Mini-batch drawn from the training set.
pub struct TrainingBatch {
    pub images: Tensor,
    pub edges: Tensor,
    pub indices: Vec<usize>,
}

/// Walks through seeded permutations of the data, reshuffling whenever one
/// is exhausted. A batch never spans two permutations.
#[derive(Clone, Debug)]
struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    rng: EngineRng,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            rng: seed_rng(seed ^ 0x5348_5546),
        }
    }

    fn next(&mut self, batch_size: usize) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.sort_unstable();
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + batch_size).min(self.order.len());
        let idx = self.order[self.pos..end].to_vec();
        self.pos = end;
        idx
    }
}

/// Weights, optimiser moments and the per-epoch loss log.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub models: ModelPair,
    pub prn_adam: Vec<AdamState>,
    pub pon_adam: Vec<AdamState>,
    pub epoch: u32,
    pub log: Vec<EpochLoss>,
}

impl TrainState {
    pub fn init(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seed_rng(cfg.seed);
        let models = ModelPair::he(cfg.mode, cfg.pon, &mut rng)?;
        Ok(Self::from_models(models, cfg))
    }

    pub fn from_models(models: ModelPair, cfg: &TrainConfig) -> Self {
        let prn_adam = adam_states(&models.prn, cfg.adam());
        let pon_adam = adam_states(&models.pon, cfg.adam());
        Self {
            models,
            prn_adam,
            pon_adam,
            epoch: 0,
            log: Vec::new(),
        }
    }

    pub fn to_checkpoint(&self, cfg: &TrainConfig) -> Checkpoint {
        Checkpoint {
            qf: cfg.qf,
            models: self.models.clone(),
            optim: Some(OptimState {
                seed: cfg.seed,
                epoch: self.epoch,
                prn_adam: self.prn_adam.clone(),
                pon_adam: self.pon_adam.clone(),
                log: self.log.clone(),
            }),
        }
    }
}

/// One Adam state per weight tensor and per bias vector.
fn adam_states(net: &dyn Network, cfg: AdamConfig) -> Vec<AdamState> {
    net.layers()
        .iter()
        .flat_map(|l| {
            [
                AdamState::new(l.weights().len(), cfg),
                AdamState::new(l.bias().len(), cfg),
            ]
        })
        .collect()
}

fn apply_adam(net: &mut dyn Network, states: &mut [AdamState], grads: &[LayerGrads]) -> Result<()> {
    let mut layers = net.layers_mut();
    if grads.len() != layers.len() || states.len() != 2 * layers.len() {
        return Err(Error::Shape(format!(
            "{} layers, {} gradients, {} optimiser states",
            layers.len(),
            grads.len(),
            states.len()
        )));
    }
    for ((layer, g), st) in layers.iter_mut().zip(grads).zip(states.chunks_exact_mut(2)) {
        st[0].step(layer.weights_mut(), &g.weights)?;
        st[1].step(layer.bias_mut(), &g.bias)?;
    }
    Ok(())
}

/// PoN loss against the originals and its parameter gradients.
pub fn pon_loss_and_grads(pon: &PonParams, decoded: &Tensor, originals: &Tensor) -> Result<(f64, Vec<LayerGrads>)> {
    let (out, cache) = pon.forward_cached(decoded)?;
    let (loss, g) = mse_loss(&out, originals)?;
    let (_, grads) = pon.backward(&cache, &g)?;
    Ok((loss, grads))
}

/// Edge-aware loss of `PoN(PrN(f))` and the PrN parameter gradients, with
/// the PoN held fixed. No codec is involved.
pub fn prn_loss_and_grads(
    models: &ModelPair,
    originals: &Tensor,
    edges: &Tensor,
    loss: &LossConfig,
) -> Result<(f64, Vec<LayerGrads>)> {
    let (y, prn_cache) = models.prn.forward_cached(originals)?;
    let (out, pon_cache) = models.pon.forward_cached(&y)?;
    let (value, g) = edge_aware_loss(&out, originals, edges, loss)?;
    let gy = models.pon.backward_input(&pon_cache, &g)?;
    let (_, grads) = models.prn.backward(&prn_cache, &gy)?;
    Ok((value, grads))
}

/// Joint MSE of the codec-free autoencoder and gradients for both nets.
pub fn autoencoder_loss_and_grads(
    models: &ModelPair,
    originals: &Tensor,
) -> Result<(f64, Vec<LayerGrads>, Vec<LayerGrads>)> {
    let (y, prn_cache) = models.prn.forward_cached(originals)?;
    let (out, pon_cache) = models.pon.forward_cached(&y)?;
    let (value, g) = mse_loss(&out, originals)?;
    let (gy, pon_grads) = models.pon.backward(&pon_cache, &g)?;
    let (_, prn_grads) = models.prn.backward(&prn_cache, &gy)?;
    Ok((value, prn_grads, pon_grads))
}

/// Per-epoch JSON-lines record.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogRecord {
    pub epoch: u32,
    pub loss_o: f64,
    pub loss_r: f64,
    pub qf: u32,
    pub mode: Mode,
    pub seed: u64,
}

pub struct Trainer {
    cfg: TrainConfig,
    codec: Box<dyn Codec>,
    data: TrainingData,
    state: TrainState,
    sampler: BatchSampler,
    decoded: Vec<Image>,
}

impl Trainer {
    /// Trainer with the baseline JPEG codec at `cfg.qf`.
    pub fn new(data: TrainingData, cfg: TrainConfig) -> Result<Self> {
        let codec = Box::new(JpegCodec::new(cfg.qf)?);
        Self::with_codec(data, cfg, codec)
    }

    pub fn with_codec(data: TrainingData, cfg: TrainConfig, codec: Box<dyn Codec>) -> Result<Self> {
        let state = TrainState::init(&cfg)?;
        Self::from_state(data, cfg, codec, state)
    }

    pub fn from_state(
        data: TrainingData,
        cfg: TrainConfig,
        codec: Box<dyn Codec>,
        state: TrainState,
    ) -> Result<Self> {
        cfg.validate()?;
        if state.models.mode() != cfg.mode {
            return Err(Error::Config(format!(
                "state is {} but config asks for {}",
                state.models.mode(),
                cfg.mode
            )));
        }
        let (h, w) = data.dims();
        if cfg.mode == Mode::Cr && (h % 2 != 0 || w % 2 != 0) {
            return Err(Error::Precondition(format!(
                "CR training needs even dims, got {h}x{w}"
            )));
        }
        Ok(Self {
            sampler: BatchSampler::new(data.len(), cfg.seed),
            cfg,
            codec,
            data,
            state,
            decoded: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    /// Copy of this trainer driving a different codec; everything else,
    /// including the sampler position, is shared state at the time of the call.
    pub fn fork_with_codec(&self, codec: Box<dyn Codec>) -> Self {
        Self {
            cfg: self.cfg,
            codec,
            data: self.data.clone(),
            state: self.state.clone(),
            sampler: self.sampler.clone(),
            decoded: self.decoded.clone(),
        }
    }

    fn batch(&mut self) -> Result<TrainingBatch> {
        let indices = self.sampler.next(self.cfg.batch_size);
        let images = Tensor::from_images(indices.iter().map(|&i| &self.data.images[i]))?;
        let edge_images: Vec<Image> = indices.iter().map(|&i| self.data.edges[i].to_image()).collect();
        let edges = Tensor::from_images(&edge_images)?;
        Ok(TrainingBatch {
            images,
            edges,
            indices,
        })
    }

    /// Step 1: joint MSE training of PoN(PrN(f)) without the codec.
    pub fn pretrain_autoencoder(&mut self) -> Result<Vec<f64>> {
        let mut losses = Vec::with_capacity(self.cfg.warmup_epochs);
        for _ in 0..self.cfg.warmup_epochs {
            let mut total = 0.0;
            for _ in 0..self.cfg.iterations_per_module {
                let batch = self.batch()?;
                let (loss, prn_g, pon_g) = autoencoder_loss_and_grads(&self.state.models, &batch.images)?;
                apply_adam(&mut self.state.models.prn, &mut self.state.prn_adam, &prn_g)?;
                apply_adam(&mut self.state.models.pon, &mut self.state.pon_adam, &pon_g)?;
                total += loss;
            }
            losses.push(mean(total, self.cfg.iterations_per_module));
        }
        Ok(losses)
    }

    /// Steps 2-3: run every training image through PrN and the codec.
    pub fn forward_codec_pass(&mut self) -> Result<()> {
        self.decoded = self
            .data
            .images
            .iter()
            .map(|f| forward_codec_pass(f, &self.state.models.prn, self.codec.as_ref()).map(|r| r.1))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Step 4: update the PoN on decoded latents; returns the mean loss.
    pub fn train_pon_epoch(&mut self) -> Result<f64> {
        if self.decoded.len() != self.data.len() {
            return Err(Error::Precondition(
                "forward_codec_pass must run before train_pon_epoch".into(),
            ));
        }
        let mut total = 0.0;
        for _ in 0..self.cfg.iterations_per_module {
            let batch = self.batch()?;
            let decoded = Tensor::from_images(batch.indices.iter().map(|&i| &self.decoded[i]))?;
            let (loss, grads) = pon_loss_and_grads(&self.state.models.pon, &decoded, &batch.images)?;
            apply_adam(&mut self.state.models.pon, &mut self.state.pon_adam, &grads)?;
            total += loss;
        }
        Ok(mean(total, self.cfg.iterations_per_module))
    }

    /// Step 5: update the PrN through the frozen PoN with the edge-aware
    /// loss; returns the mean loss. The codec is not used.
    pub fn train_prn_epoch(&mut self) -> Result<f64> {
        let loss_cfg = self.cfg.loss();
        let mut total = 0.0;
        for _ in 0..self.cfg.iterations_per_module {
            let batch = self.batch()?;
            let (loss, grads) =
                prn_loss_and_grads(&self.state.models, &batch.images, &batch.edges, &loss_cfg)?;
            apply_adam(&mut self.state.models.prn, &mut self.state.prn_adam, &grads)?;
            total += loss;
        }
        Ok(mean(total, self.cfg.iterations_per_module))
    }

    /// One full epoch of steps 2-5, appended to the loss log.
    pub fn run_epoch(&mut self) -> Result<EpochLoss> {
        self.forward_codec_pass()?;
        let loss_o = self.train_pon_epoch()?;
        let loss_r = self.train_prn_epoch()?;
        self.state.epoch += 1;
        let entry = EpochLoss {
            epoch: self.state.epoch,
            loss_o,
            loss_r,
        };
        self.state.log.push(entry);
        Ok(entry)
    }

    /// Warm-up then `cfg.epochs` epochs. `on_epoch` sees the state after
    /// each epoch, e.g. to write a checkpoint and a log line.
    pub fn train(
        &mut self,
        mut on_epoch: impl FnMut(&TrainState, &LogRecord) -> Result<()>,
    ) -> Result<()> {
        self.pretrain_autoencoder()?;
        for _ in 0..self.cfg.epochs {
            let e = self.run_epoch()?;
            let record = LogRecord {
                epoch: e.epoch,
                loss_o: e.loss_o,
                loss_r: e.loss_r,
                qf: self.cfg.qf,
                mode: self.cfg.mode,
                seed: self.cfg.seed,
            };
            on_epoch(&self.state, &record)?;
        }
        Ok(())
    }
}

fn mean(total: f64, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        total / n as f64
    }
}

/// Initial state after the autoencoder warm-up alone.
pub fn pretrain_autoencoder(data: &TrainingData, cfg: &TrainConfig) -> Result<TrainState> {
    let mut t = Trainer::new(data.clone(), *cfg)?;
    t.pretrain_autoencoder()?;
    Ok(t.into_state())
}

/// Full progressive training with the baseline JPEG codec.
pub fn train(data: &TrainingData, cfg: &TrainConfig) -> Result<TrainState> {
    let mut t = Trainer::new(data.clone(), *cfg)?;
    t.train(|_, _| Ok(()))?;
    Ok(t.into_state())
}
