//! Adam, the training and evaluation loops, and binary checkpoints.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RsnetError};
use crate::metrics::{ConfusionMatrix, MetricsReport};
use crate::model::{
    build_rsnet, median_freq_weights, predict_labels, rsnet_backward, rsnet_forward, softmax_cross_entropy,
    RsnetConfig, RsnetParams,
};
use crate::nn::{ParamTensors, Real};
use crate::pcio::LabeledCloud;
use crate::pipeline::{make_features, merge_votes, sample_covering, sample_fixed, split_cubes, BlockConfig, Cube, CubeSample, MergeAccumulator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments, flattened in the parameters' visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub config: AdamConfig,
}

impl<T: Real> OptimState<T> {
    pub fn new<P: ParamTensors<T>>(params: &P, config: AdamConfig) -> Self {
        let n = params.num_scalars();
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], step: 0, config }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Real, P: ParamTensors<T>>(params: &mut P, grads: &P, state: &mut OptimState<T>) {
    let g = grads.flatten();
    assert_eq!(g.len(), state.m.len(), "optimizer state does not match parameters");
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let (b1, b2) = (T::of_f64(c.beta1), T::of_f64(c.beta2));
    let one = T::one();
    let corr1 = T::of_f64(1.0 - c.beta1.powi(t));
    let corr2 = T::of_f64(1.0 - c.beta2.powi(t));
    let lr = T::of_f64(c.lr);
    let eps = T::of_f64(c.eps);
    let (m, v) = (&mut state.m, &mut state.v);
    let mut k = 0;
    params.visit_mut("", &mut |_, mut p| {
        for w in p.iter_mut() {
            m[k] = b1 * m[k] + (one - b1) * g[k];
            v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
            let m_hat = m[k] / corr1;
            let v_hat = v[k] / corr2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
            k += 1;
        }
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassWeighting {
    Uniform,
    MedianFrequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub block: BlockConfig,
    pub model: RsnetConfig,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            block: BlockConfig::default(),
            model: RsnetConfig::default(),
            adam: AdamConfig::default(),
            batch_size: 8,
            epochs: 30,
            class_weighting: ClassWeighting::Uniform,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.block.validate()?;
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(RsnetError::Config("batch_size must be at least 1".into()));
        }
        if self.block.feature_mode.width() != self.model.d_in {
            return Err(RsnetError::Config(format!(
                "feature mode {} yields {} inputs but the model expects {}",
                self.block.feature_mode,
                self.block.feature_mode.width(),
                self.model.d_in
            )));
        }
        Ok(())
    }
}

/// A labeled scene with its training cubes precomputed.
#[derive(Debug, Clone)]
pub struct TrainScene {
    pub cloud: LabeledCloud,
    pub cubes: Vec<Cube>,
}

impl TrainScene {
    pub fn new(cloud: LabeledCloud, block: &BlockConfig) -> Result<Self> {
        if cloud.labels.is_none() {
            return Err(RsnetError::Validation("training scenes need labels".into()));
        }
        let cubes = split_cubes(&cloud, block.block_size, block.train_stride);
        Ok(Self { cloud, cubes })
    }
}

pub fn class_weights(scenes: &[TrainScene], num_classes: usize, weighting: ClassWeighting) -> Result<Vec<f64>> {
    match weighting {
        ClassWeighting::Uniform => Ok(vec![1.0; num_classes]),
        ClassWeighting::MedianFrequency => {
            let mut counts = vec![0u64; num_classes];
            for s in scenes {
                for (c, n) in s.cloud.label_counts().into_iter().enumerate() {
                    if c < num_classes {
                        counts[c] += n;
                    }
                }
            }
            median_freq_weights(&counts)
        }
    }
}

fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix-style mixing so nearby seeds give unrelated streams
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The cube samples of one epoch in training order.
pub fn epoch_samples(scenes: &[TrainScene], cfg: &TrainConfig, epoch: u64) -> Result<Vec<(usize, CubeSample)>> {
    let sample_epoch = if cfg.block.resample_each_epoch { epoch } else { 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1, sample_epoch));
    let mut samples = Vec::new();
    for (si, scene) in scenes.iter().enumerate() {
        for cube in &scene.cubes {
            samples.push((si, sample_fixed(cube, cfg.block.points_per_cube, &mut rng)?));
        }
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2, epoch));
    samples.shuffle(&mut order_rng);
    Ok(samples)
}

/// Loss and parameter gradient of one cube sample.
pub fn sample_loss_and_grad<T: Real>(
    scene: &LabeledCloud,
    sample: &CubeSample,
    cfg: &TrainConfig,
    params: &RsnetParams<T>,
    weights: &[f64],
) -> Result<(f64, RsnetParams<T>)> {
    let (features, coords) = make_features::<T>(sample, scene, cfg.block.feature_mode)?;
    let labels_all = scene.labels.as_ref().ok_or_else(|| RsnetError::Validation("scene has no labels".into()))?;
    let labels: Vec<usize> = sample.source_indices.iter().map(|&i| labels_all[i]).collect();
    let (logits, cache) = rsnet_forward(features.view(), coords.view(), params, &cfg.model)?;
    let (loss, grad_logits) = softmax_cross_entropy(logits.view(), &labels, weights)?;
    let grads = rsnet_backward(params, &cache, grad_logits.view())?;
    Ok((loss.as_f64(), grads.params))
}

/// One pass over every training cube. Batches average their cube gradients in a
/// fixed order before each Adam step. Returns the mean cube loss.
pub fn train_epoch<T: Real>(
    scenes: &[TrainScene],
    cfg: &TrainConfig,
    weights: &[f64],
    params: &mut RsnetParams<T>,
    state: &mut OptimState<T>,
    epoch: u64,
) -> Result<f64> {
    if scenes.is_empty() {
        return Err(RsnetError::Validation("no training scenes".into()));
    }
    let samples = epoch_samples(scenes, cfg, epoch)?;
    let mut total = 0.0;
    for batch in samples.chunks(cfg.batch_size) {
        let mut acc = params.zeros_like();
        for (si, sample) in batch {
            let (loss, g) = sample_loss_and_grad(&scenes[*si].cloud, sample, cfg, params, weights)?;
            total += loss;
            acc.add_assign(&g);
        }
        acc.scale(T::of_f64(1.0 / batch.len() as f64));
        adam_step(params, &acc, state);
    }
    Ok(total / samples.len() as f64)
}

/// Mean loss over the samples `train_epoch` would visit at `epoch`, without updating.
pub fn epoch_loss<T: Real>(
    scenes: &[TrainScene],
    cfg: &TrainConfig,
    weights: &[f64],
    params: &RsnetParams<T>,
    epoch: u64,
) -> Result<f64> {
    let samples = epoch_samples(scenes, cfg, epoch)?;
    let mut total = 0.0;
    for (si, sample) in &samples {
        let scene = &scenes[*si].cloud;
        let (features, coords) = make_features::<T>(sample, scene, cfg.block.feature_mode)?;
        let labels_all = scene.labels.as_ref().expect("training scenes are labeled");
        let labels: Vec<usize> = sample.source_indices.iter().map(|&i| labels_all[i]).collect();
        let (logits, _) = rsnet_forward(features.view(), coords.view(), params, &cfg.model)?;
        total += softmax_cross_entropy(logits.view(), &labels, weights)?.0.as_f64();
    }
    Ok(total / samples.len() as f64)
}

/// Something that labels the points of one cube sample.
pub trait CubePredictor {
    fn num_classes(&self) -> usize;
    fn predict(&self, scene: &LabeledCloud, sample: &CubeSample, block: &BlockConfig) -> Result<Vec<usize>>;
}

/// The network as a predictor.
pub struct NetPredictor<'a, T> {
    pub params: &'a RsnetParams<T>,
    pub model: &'a RsnetConfig,
}

impl<T: Real> CubePredictor for NetPredictor<'_, T> {
    fn num_classes(&self) -> usize {
        self.model.num_classes
    }

    fn predict(&self, scene: &LabeledCloud, sample: &CubeSample, block: &BlockConfig) -> Result<Vec<usize>> {
        let (features, coords) = make_features::<T>(sample, scene, block.feature_mode)?;
        let (logits, _) = rsnet_forward(features.view(), coords.view(), self.params, self.model)?;
        Ok(predict_labels(logits.view()))
    }
}

/// Per-point labels for a whole scene: test-stride cubes, covering samples,
/// majority vote.
pub fn predict_scene(
    predictor: &dyn CubePredictor,
    scene: &LabeledCloud,
    block: &BlockConfig,
    seed: u64,
) -> Result<(Vec<usize>, MergeAccumulator)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3, 0));
    let mut acc = MergeAccumulator::new(scene.len(), predictor.num_classes());
    for cube in split_cubes(scene, block.block_size, block.test_stride) {
        for sample in sample_covering(&cube, block.points_per_cube, &mut rng)? {
            let pred = predictor.predict(scene, &sample, block)?;
            acc.add_sample(&sample, &pred);
        }
    }
    Ok((merge_votes(&acc)?, acc))
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    pub predictions: Vec<Vec<usize>>,
}

pub fn evaluate_with(
    predictor: &dyn CubePredictor,
    scenes: &[LabeledCloud],
    block: &BlockConfig,
    class_names: &[String],
    seed: u64,
) -> Result<Evaluation> {
    let mut cm = ConfusionMatrix::new(predictor.num_classes());
    let mut predictions = Vec::with_capacity(scenes.len());
    for (i, scene) in scenes.iter().enumerate() {
        let truth = scene.labels.as_ref().ok_or_else(|| RsnetError::Validation("evaluation scenes need labels".into()))?;
        let (pred, _) = predict_scene(predictor, scene, block, derive_seed(seed, 4, i as u64))?;
        cm.update(truth, &pred)?;
        predictions.push(pred);
    }
    let report = MetricsReport::from_confusion(&cm, class_names)?;
    Ok(Evaluation { confusion: cm, report, predictions })
}

pub fn evaluate<T: Real>(
    scenes: &[LabeledCloud],
    cfg: &TrainConfig,
    params: &RsnetParams<T>,
    class_names: &[String],
) -> Result<Evaluation> {
    let predictor = NetPredictor { params, model: &cfg.model };
    evaluate_with(&predictor, scenes, &cfg.block, class_names, cfg.seed)
}

/// Model, optimizer and data for one training run.
pub struct Trainer {
    pub config: TrainConfig,
    pub scenes: Vec<TrainScene>,
    pub weights: Vec<f64>,
    pub params: RsnetParams<f32>,
    pub optim: OptimState<f32>,
    pub epoch: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig, clouds: Vec<LabeledCloud>) -> Result<Self> {
        config.validate()?;
        let params = build_rsnet::<f32>(&config.model, config.seed)?;
        let optim = OptimState::new(&params, config.adam);
        Self::assemble(config, clouds, params, optim, 0)
    }

    fn assemble(
        config: TrainConfig,
        clouds: Vec<LabeledCloud>,
        params: RsnetParams<f32>,
        optim: OptimState<f32>,
        epoch: u64,
    ) -> Result<Self> {
        let scenes = clouds.into_iter().map(|c| TrainScene::new(c, &config.block)).collect::<Result<Vec<_>>>()?;
        if let Some(bad) = scenes.iter().find(|s| s.cloud.num_classes > config.model.num_classes) {
            return Err(RsnetError::Config(format!(
                "scene has {} classes but the model predicts {}",
                bad.cloud.num_classes, config.model.num_classes
            )));
        }
        let weights = class_weights(&scenes, config.model.num_classes, config.class_weighting)?;
        Ok(Self { config, scenes, weights, params, optim, epoch })
    }

    pub fn run_epoch(&mut self) -> Result<f64> {
        let loss = train_epoch(&self.scenes, &self.config, &self.weights, &mut self.params, &mut self.optim, self.epoch)?;
        self.epoch += 1;
        Ok(loss)
    }

    pub fn evaluate(&self, scenes: &[LabeledCloud], class_names: &[String]) -> Result<Evaluation> {
        evaluate(scenes, &self.config, &self.params, class_names)
    }

    pub fn checkpoint(&self, config_text: &str) -> Result<Checkpoint> {
        let mut tensors = named_tensors("param", &self.params);
        let names = self.params.tensor_names();
        let shapes = tensor_shapes(&self.params);
        for (prefix, flat) in [("adam_m", &self.optim.m), ("adam_v", &self.optim.v)] {
            let mut offset = 0;
            for (name, shape) in names.iter().zip(&shapes) {
                let len: usize = shape.iter().product();
                tensors.push(Tensor {
                    name: format!("{prefix}.{name}"),
                    shape: shape.clone(),
                    data: flat[offset..offset + len].to_vec(),
                });
                offset += len;
            }
        }
        tensors.push(Tensor::counter("state.step", self.optim.step)?);
        tensors.push(Tensor::counter("state.epoch", self.epoch)?);
        Ok(Checkpoint { config_text: config_text.to_string(), tensors })
    }

    /// Rebuilds a trainer from a checkpoint; `config` must be the configuration
    /// the checkpoint was written with.
    pub fn from_checkpoint(config: TrainConfig, ckpt: &Checkpoint, clouds: Vec<LabeledCloud>) -> Result<Self> {
        config.validate()?;
        let params = params_from_checkpoint(ckpt, &config.model)?;
        let by_name = ckpt.by_name();
        let mut optim = OptimState::new(&params, config.adam);
        let (mut m_shell, mut v_shell) = (params.clone(), params.clone());
        load_params(&mut m_shell, &by_name, "adam_m")?;
        load_params(&mut v_shell, &by_name, "adam_v")?;
        optim.m = m_shell.flatten();
        optim.v = v_shell.flatten();
        optim.step = counter(&by_name, "state.step")?;
        let epoch = counter(&by_name, "state.epoch")?;
        Self::assemble(config, clouds, params, optim, epoch)
    }
}

/// The network weights stored in a checkpoint, shaped by `model`.
pub fn params_from_checkpoint(ckpt: &Checkpoint, model: &RsnetConfig) -> Result<RsnetParams<f32>> {
    let mut params = build_rsnet::<f32>(model, 0)?;
    load_params(&mut params, &ckpt.by_name(), "param")?;
    Ok(params)
}

fn tensor_shapes<P: ParamTensors<f32>>(p: &P) -> Vec<Vec<usize>> {
    let mut shapes = Vec::new();
    p.visit("", &mut |_, v| shapes.push(v.shape().to_vec()));
    shapes
}

fn named_tensors<P: ParamTensors<f32>>(prefix: &str, p: &P) -> Vec<Tensor> {
    let mut out = Vec::new();
    p.visit(prefix, &mut |name, v| {
        out.push(Tensor { name, shape: v.shape().to_vec(), data: v.iter().copied().collect() })
    });
    out
}

/// Copies `<prefix>.<name>` tensors from a checkpoint into `params`.
pub fn load_params<P: ParamTensors<f32>>(params: &mut P, by_name: &HashMap<&str, &Tensor>, prefix: &str) -> Result<()> {
    let mut err = None;
    params.visit_mut(prefix, &mut |name, mut v| {
        if err.is_some() {
            return;
        }
        match by_name.get(name.as_str()) {
            Some(t) if t.shape == v.shape() => {
                for (dst, src) in v.iter_mut().zip(&t.data) {
                    *dst = *src;
                }
            }
            Some(t) => err = Some(RsnetError::Validation(format!("tensor {name} has shape {:?}, expected {:?}", t.shape, v.shape()))),
            None => err = Some(RsnetError::Validation(format!("checkpoint lacks tensor {name}"))),
        }
    });
    err.map_or(Ok(()), Err)
}

fn counter(by_name: &HashMap<&str, &Tensor>, name: &str) -> Result<u64> {
    let t = by_name.get(name).ok_or_else(|| RsnetError::Validation(format!("checkpoint lacks {name}")))?;
    match t.data.as_slice() {
        [v] if *v >= 0.0 && v.fract() == 0.0 => Ok(*v as u64),
        _ => Err(RsnetError::Validation(format!("malformed counter {name}"))),
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RSNCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    /// A scalar counter stored exactly as a rank-1 `f32` tensor.
    fn counter(name: &str, value: u64) -> Result<Self> {
        if value > (1 << 24) {
            return Err(RsnetError::Validation(format!("{name} = {value} exceeds the exact f32 range")));
        }
        Ok(Self { name: name.into(), shape: vec![1], data: vec![value as f32] })
    }

    pub fn view2(&self) -> Option<ArrayView2<'_, f32>> {
        match self.shape.as_slice() {
            [r, c] => ArrayView2::from_shape((*r, *c), &self.data).ok(),
            _ => None,
        }
    }
}

/// Run configuration text plus named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_text: String,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn by_name(&self) -> HashMap<&str, &Tensor> {
        self.tensors.iter().map(|t| (t.name.as_str(), t)).collect()
    }

    /// Little-endian layout: magic, u64 config length, config bytes, u64 tensor
    /// count, then per tensor u64 name length, name bytes, u64 rank, u64 dims,
    /// f32 data.
    pub fn write_to(&self, out: &mut impl Write) -> io::Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&(self.config_text.len() as u64).to_le_bytes())?;
        out.write_all(self.config_text.as_bytes())?;
        out.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for t in &self.tensors {
            out.write_all(&(t.name.len() as u64).to_le_bytes())?;
            out.write_all(t.name.as_bytes())?;
            out.write_all(&(t.shape.len() as u64).to_le_bytes())?;
            for &d in &t.shape {
                out.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in &t.data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic = r.take(8)?;
        if magic != CHECKPOINT_MAGIC {
            if magic.starts_with(b"RSNCKPT") {
                return Err(RsnetError::Version(String::from_utf8_lossy(magic).into_owned()));
            }
            return Err(RsnetError::Parse { line: 0, msg: "not an RSNCKPT checkpoint".into() });
        }
        let len = r.u64()? as usize;
        let config_text = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| RsnetError::Parse { line: 0, msg: "config text is not UTF-8".into() })?;
        let count = r.u64()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u64()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| RsnetError::Parse { line: 0, msg: "tensor name is not UTF-8".into() })?;
            let rank = r.u64()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| r.truncated())?;
            let raw = r.take(numel.checked_mul(4).ok_or_else(|| r.truncated())?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            tensors.push(Tensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(RsnetError::Parse { line: 0, msg: "trailing bytes after last tensor".into() });
        }
        Ok(Self { config_text, tensors })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn truncated(&self) -> RsnetError {
        RsnetError::Parse { line: 0, msg: format!("checkpoint truncated at byte {}", self.pos) }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| self.truncated())?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    ckpt.write_to(&mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Linear;
    use ndarray::array;

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = Linear { weight: array![[0.5f64, -1.0]], bias: array![0.25, 0.0] };
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = OptimState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut st);
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_first_step_scalar() {
        let mut p = Linear { weight: array![[0.0f64]], bias: array![0.0] };
        let g = Linear { weight: array![[1.0f64]], bias: array![0.0] };
        let mut st = OptimState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut st);
        // m̂ = v̂ = 1 after bias correction, so the step is lr / (1 + eps)
        let expect = -1e-3 / (1.0 + 1e-8);
        assert!((p.weight[[0, 0]] - expect).abs() < 1e-15, "{}", p.weight[[0, 0]]);
    }

    #[test]
    fn adam_runs_are_deterministic() {
        let run = || {
            let mut p = Linear { weight: array![[0.3f32, 0.1], [-0.2, 0.4]], bias: array![0.0, 0.1] };
            let mut st = OptimState::new(&p, AdamConfig::default());
            for i in 0..10 {
                let g = Linear { weight: p.weight.mapv(|w| w * (i as f32 + 1.0)), bias: p.bias.mapv(|b| b - 1.0) };
                adam_step(&mut p, &g, &mut st);
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_bytes_roundtrip() {
        let ckpt = Checkpoint {
            config_text: "seed = 3\n".into(),
            tensors: vec![
                Tensor { name: "a".into(), shape: vec![2, 2], data: vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5] },
                Tensor { name: "b".into(), shape: vec![1], data: vec![7.0] },
            ],
        };
        let bytes = ckpt.to_bytes();
        assert_eq!(&bytes[..8], b"RSNCKPT1");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.tensors[0].data[1].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn checkpoint_errors() {
        let bytes = Checkpoint { config_text: String::new(), tensors: vec![] }.to_bytes();
        let mut wrong = bytes.clone();
        wrong[..8].copy_from_slice(b"NOTACKPT");
        assert!(matches!(Checkpoint::from_bytes(&wrong), Err(RsnetError::Parse { .. })));
        let mut v2 = bytes.clone();
        v2[7] = b'2';
        assert!(matches!(Checkpoint::from_bytes(&v2), Err(RsnetError::Version(_))));
        let full = Checkpoint {
            config_text: "x".into(),
            tensors: vec![Tensor { name: "t".into(), shape: vec![3], data: vec![1.0, 2.0, 3.0] }],
        }
        .to_bytes();
        for cut in [3, 12, full.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&full[..cut]), Err(RsnetError::Parse { .. })), "cut {cut}");
        }
    }
}
