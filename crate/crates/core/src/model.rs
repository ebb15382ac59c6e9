//! The full network: input block, three slicing branches, output block, losses.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Result, RsnetError};
use crate::nn::{join_name, relu, relu_backward, FeatureMap, Linear, ParamTensors, Real};
use crate::rnn::{stack_backward, stack_forward, RnnStack, RnnStackConfig, StackCache};
use crate::slicing::{
    assign_slices, slice_pool_backward, slice_pool_forward, slice_unpool_backward, slice_unpool_forward, pool_tie_margin,
    PoolRecord, SliceAssignment, SliceAxis,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RsnetConfig {
    pub num_classes: usize,
    pub d_in: usize,
    pub input_channels: Vec<usize>,
    /// Hidden widths of the output block; a final `num_classes` layer is appended.
    pub output_channels: Vec<usize>,
    pub rnn: RnnStackConfig,
    /// Slice thickness along x, y, z in meters.
    pub resolutions: [f64; 3],
    /// When false each branch is pool → unpool with no recurrent layers.
    pub use_rnn: bool,
}

impl Default for RsnetConfig {
    fn default() -> Self {
        Self {
            num_classes: 13,
            d_in: 9,
            input_channels: vec![64, 64, 64],
            output_channels: vec![512, 256],
            rnn: RnnStackConfig::default(),
            resolutions: [0.02; 3],
            use_rnn: true,
        }
    }
}

impl RsnetConfig {
    /// Every channel count halved (rounded up); handy for desk-scale runs.
    pub fn halved(&self) -> Self {
        let half = |v: &[usize]| v.iter().map(|c| c.div_ceil(2)).collect::<Vec<_>>();
        Self {
            input_channels: half(&self.input_channels),
            output_channels: half(&self.output_channels),
            rnn: RnnStackConfig { hidden_sizes: half(&self.rnn.hidden_sizes), variant: self.rnn.variant },
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(RsnetError::Config(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        if self.d_in == 0 {
            return Err(RsnetError::Config("input width must be positive".into()));
        }
        if self.resolutions.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(RsnetError::Config(format!("slicing resolutions must be positive: {:?}", self.resolutions)));
        }
        if self.input_channels.is_empty() {
            return Err(RsnetError::Config("input block needs at least one layer".into()));
        }
        if self.use_rnn && self.rnn.hidden_sizes.is_empty() {
            return Err(RsnetError::Config("rnn stack needs at least one layer".into()));
        }
        let all = self.input_channels.iter().chain(&self.output_channels).chain(&self.rnn.hidden_sizes);
        if all.into_iter().any(|&c| c == 0) {
            return Err(RsnetError::Config("channel counts must be positive".into()));
        }
        Ok(())
    }

    /// Width of one branch's output.
    pub fn branch_width(&self) -> usize {
        if self.use_rnn {
            *self.rnn.hidden_sizes.last().expect("validated")
        } else {
            *self.input_channels.last().expect("validated")
        }
    }

    /// Width of the concatenated branch features fed to the output block.
    pub fn merged_width(&self) -> usize {
        3 * self.branch_width()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsnetParams<T> {
    pub input_block: Vec<Linear<T>>,
    /// One stack per axis in x, y, z order; empty when the config disables RNNs.
    pub branches: Vec<RnnStack<T>>,
    pub output_block: Vec<Linear<T>>,
}

impl<T: Real> RsnetParams<T> {
    pub fn zeros_like(&self) -> Self {
        Self {
            input_block: self.input_block.iter().map(Linear::zeros_like).collect(),
            branches: self.branches.iter().map(RnnStack::zeros_like).collect(),
            output_block: self.output_block.iter().map(Linear::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.input_block.iter_mut().zip(&other.input_block) {
            a.add_assign(b);
        }
        for (a, b) in self.branches.iter_mut().zip(&other.branches) {
            a.add_assign(b);
        }
        for (a, b) in self.output_block.iter_mut().zip(&other.output_block) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.visit_mut("", &mut |_, mut v| v.mapv_inplace(|x| x * factor));
    }

    /// Element-type conversion, e.g. `f32` training weights to `f64` for checking.
    pub fn cast<U: Real>(&self) -> RsnetParams<U> {
        let lin = |l: &Linear<T>| Linear { weight: l.weight.mapv(|v| U::of_f64(v.as_f64())), bias: l.bias.mapv(|v| U::of_f64(v.as_f64())) };
        RsnetParams {
            input_block: self.input_block.iter().map(lin).collect(),
            branches: self
                .branches
                .iter()
                .map(|st| RnnStack {
                    layers: st
                        .layers
                        .iter()
                        .map(|l| {
                            let cell = |c: &crate::rnn::CellParams<T>| crate::rnn::CellParams {
                                variant: c.variant,
                                w_x: c.w_x.mapv(|v| U::of_f64(v.as_f64())),
                                w_h: c.w_h.mapv(|v| U::of_f64(v.as_f64())),
                                b: c.b.mapv(|v| U::of_f64(v.as_f64())),
                            };
                            crate::rnn::BiRnnLayer { forward: cell(&l.forward), backward: cell(&l.backward) }
                        })
                        .collect(),
                })
                .collect(),
            output_block: self.output_block.iter().map(lin).collect(),
        }
    }
}

impl<T: Real> ParamTensors<T> for RsnetParams<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewD<'_, T>)) {
        for (i, l) in self.input_block.iter().enumerate() {
            l.visit(&join_name(prefix, &format!("input{i}")), f);
        }
        for (axis, st) in SliceAxis::ALL.iter().zip(&self.branches) {
            st.visit(&join_name(prefix, &format!("rnn_{axis}")), f);
        }
        for (i, l) in self.output_block.iter().enumerate() {
            l.visit(&join_name(prefix, &format!("output{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, T>)) {
        for (i, l) in self.input_block.iter_mut().enumerate() {
            l.visit_mut(&join_name(prefix, &format!("input{i}")), f);
        }
        for (axis, st) in SliceAxis::ALL.iter().zip(self.branches.iter_mut()) {
            st.visit_mut(&join_name(prefix, &format!("rnn_{axis}")), f);
        }
        for (i, l) in self.output_block.iter_mut().enumerate() {
            l.visit_mut(&join_name(prefix, &format!("output{i}")), f);
        }
    }
}

/// Initializes every parameter from one seed.
pub fn build_rsnet<T: Real>(cfg: &RsnetConfig, seed: u64) -> Result<RsnetParams<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut width = cfg.d_in;
    let mut input_block = Vec::new();
    for &c in &cfg.input_channels {
        input_block.push(Linear::init(width, c, &mut rng));
        width = c;
    }
    let mut branches = Vec::new();
    if cfg.use_rnn {
        for _ in SliceAxis::ALL {
            branches.push(RnnStack::init(&cfg.rnn, width, &mut rng)?);
        }
    }
    let mut width = cfg.merged_width();
    let mut output_block = Vec::new();
    for &c in cfg.output_channels.iter().chain(std::iter::once(&cfg.num_classes)) {
        output_block.push(Linear::init(width, c, &mut rng));
        width = c;
    }
    Ok(RsnetParams { input_block, branches, output_block })
}

/// Slice assignments for the three axes of one cube.
pub fn assign_all_axes(coords: ArrayView2<f64>, resolutions: [f64; 3]) -> Result<[SliceAssignment; 3]> {
    Ok([
        assign_slices(coords, SliceAxis::X, resolutions[0])?,
        assign_slices(coords, SliceAxis::Y, resolutions[1])?,
        assign_slices(coords, SliceAxis::Z, resolutions[2])?,
    ])
}

#[derive(Debug, Clone)]
struct BranchCache<T> {
    record: PoolRecord,
    stack: Option<StackCache<T>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    input_acts: Vec<Array2<T>>,
    input_pre: Vec<Array2<T>>,
    assignments: [SliceAssignment; 3],
    branches: Vec<BranchCache<T>>,
    output_acts: Vec<Array2<T>>,
    output_pre: Vec<Array2<T>>,
}

impl<T> ForwardCache<T> {
    pub fn assignments(&self) -> &[SliceAssignment; 3] {
        &self.assignments
    }
}

impl<T: Real> ForwardCache<T> {
    /// Distance of this pass from the nearest non-differentiable point: the
    /// smallest |pre-activation| feeding a ReLU, or the smallest gap between the
    /// two largest positive values competing in a slice max.
    pub fn kink_margin(&self) -> f64 {
        let n_out = self.output_pre.len();
        let relu_pre = self.input_pre.iter().chain(&self.output_pre[..n_out.saturating_sub(1)]);
        let mut margin = relu_pre.flat_map(|a| a.iter()).map(|v| v.as_f64().abs()).fold(f64::INFINITY, f64::min);
        if let Some(last) = self.input_pre.last() {
            for a in &self.assignments {
                margin = margin.min(pool_tie_margin(last.view(), a, true));
            }
        }
        margin
    }
}

fn run_block<T: Real>(
    layers: &[Linear<T>],
    x: Array2<T>,
    relu_last: bool,
    acts: &mut Vec<Array2<T>>,
    pre: &mut Vec<Array2<T>>,
) -> Result<Array2<T>> {
    let mut x = x;
    for (i, layer) in layers.iter().enumerate() {
        let a = layer.forward(x.view())?;
        let y = if relu_last || i + 1 < layers.len() { relu(a.view()) } else { a.clone() };
        acts.push(x);
        pre.push(a);
        x = y;
    }
    Ok(x)
}

fn run_block_backward<T: Real>(
    layers: &[Linear<T>],
    acts: &[Array2<T>],
    pre: &[Array2<T>],
    grad: Array2<T>,
    relu_last: bool,
    grads: &mut [Linear<T>],
) -> Result<Array2<T>> {
    let mut g = grad;
    for i in (0..layers.len()).rev() {
        if relu_last || i + 1 < layers.len() {
            g = relu_backward(pre[i].view(), g.view());
        }
        let lg = layers[i].backward(acts[i].view(), g.view())?;
        grads[i].weight += &lg.weight;
        grads[i].bias += &lg.bias;
        g = lg.input;
    }
    Ok(g)
}

/// Logits for every point of one cube, plus what the backward pass needs.
pub fn rsnet_forward<T: Real>(
    features: ArrayView2<T>,
    coords: ArrayView2<f64>,
    params: &RsnetParams<T>,
    cfg: &RsnetConfig,
) -> Result<(FeatureMap<T>, ForwardCache<T>)> {
    let assignments = assign_all_axes(coords, cfg.resolutions)?;
    rsnet_forward_with(features, assignments, params, cfg)
}

/// As [`rsnet_forward`] with slice assignments computed by the caller.
pub fn rsnet_forward_with<T: Real>(
    features: ArrayView2<T>,
    assignments: [SliceAssignment; 3],
    params: &RsnetParams<T>,
    cfg: &RsnetConfig,
) -> Result<(FeatureMap<T>, ForwardCache<T>)> {
    let n = features.nrows();
    if n == 0 {
        return Err(RsnetError::Validation("cannot run the network on zero points".into()));
    }
    if features.ncols() != cfg.d_in {
        return Err(shape_err(format!("features have {} columns, config expects {}", features.ncols(), cfg.d_in)));
    }
    if assignments.iter().any(|a| a.num_points() != n) {
        return Err(shape_err("slice assignments and features disagree on point count"));
    }
    let (mut input_acts, mut input_pre) = (Vec::new(), Vec::new());
    let f_in = run_block(&params.input_block, features.to_owned(), true, &mut input_acts, &mut input_pre)?;

    let mut unpooled = Vec::with_capacity(3);
    let mut branches = Vec::with_capacity(3);
    for (b, assignment) in assignments.iter().enumerate() {
        let (pooled, record) = slice_pool_forward(f_in.view(), assignment)?;
        let (seq, stack) = match params.branches.get(b) {
            Some(st) if cfg.use_rnn => {
                let (out, cache) = stack_forward(pooled.view(), st)?;
                (out, Some(cache))
            }
            _ => (pooled, None),
        };
        unpooled.push(slice_unpool_forward(seq.view(), assignment)?);
        branches.push(BranchCache { record, stack });
    }
    let views: Vec<_> = unpooled.iter().map(|u| u.view()).collect();
    let merged = concatenate(Axis(1), &views).map_err(|e| shape_err(e.to_string()))?;

    let (mut output_acts, mut output_pre) = (Vec::new(), Vec::new());
    let logits = run_block(&params.output_block, merged, false, &mut output_acts, &mut output_pre)?;
    let cache = ForwardCache { input_acts, input_pre, assignments, branches, output_acts, output_pre };
    Ok((logits, cache))
}

#[derive(Debug, Clone)]
pub struct RsnetGrads<T> {
    pub params: RsnetParams<T>,
    pub features: Array2<T>,
}

pub fn rsnet_backward<T: Real>(
    params: &RsnetParams<T>,
    cache: &ForwardCache<T>,
    grad_logits: ArrayView2<T>,
) -> Result<RsnetGrads<T>> {
    let mut grads = params.zeros_like();
    let g_merged = run_block_backward(
        &params.output_block,
        &cache.output_acts,
        &cache.output_pre,
        grad_logits.to_owned(),
        false,
        &mut grads.output_block,
    )?;
    let width = g_merged.ncols() / 3;
    let n = g_merged.nrows();
    let c_in = params.input_block.last().map_or(0, Linear::out_channels);
    let mut g_in = Array2::<T>::zeros((n, c_in));
    for (b, branch) in cache.branches.iter().enumerate() {
        let g_u = g_merged.slice(s![.., b * width..(b + 1) * width]);
        let g_seq = slice_unpool_backward(g_u, &cache.assignments[b])?;
        let g_pooled = match (&branch.stack, params.branches.get(b)) {
            (Some(sc), Some(st)) => stack_backward(st, sc, g_seq.view(), &mut grads.branches[b]),
            _ => g_seq,
        };
        g_in += &slice_pool_backward(g_pooled.view(), &branch.record)?;
    }
    let features = run_block_backward(
        &params.input_block,
        &cache.input_acts,
        &cache.input_pre,
        g_in,
        true,
        &mut grads.input_block,
    )?;
    Ok(RsnetGrads { params: grads, features })
}

/// Per-point argmax of the logits; ties go to the smaller class index.
pub fn predict_labels<T: Real>(logits: ArrayView2<T>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Weighted softmax cross-entropy, normalized by the summed weights of the
/// labels present, so equal weights reduce to the plain mean.
pub fn softmax_cross_entropy<T: Real>(
    logits: ArrayView2<T>,
    labels: &[usize],
    weights: &[f64],
) -> Result<(T, Array2<T>)> {
    let (n, k) = logits.dim();
    if labels.len() != n {
        return Err(shape_err(format!("{} labels for {} logit rows", labels.len(), n)));
    }
    if weights.len() != k {
        return Err(shape_err(format!("{} class weights for {} classes", weights.len(), k)));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(RsnetError::Validation(format!("label {bad} out of range for {k} classes")));
    }
    let total_weight: f64 = labels.iter().map(|&y| weights[y]).sum();
    if !(total_weight > 0.0) {
        return Err(RsnetError::Validation("class weights of the batch labels sum to zero".into()));
    }
    let norm = T::of_f64(total_weight);
    let mut loss = T::zero();
    let mut grad = Array2::zeros((n, k));
    for (i, row) in logits.rows().into_iter().enumerate() {
        let y = labels[i];
        let w = T::of_f64(weights[y]);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Array1<T> = row.mapv(|v| (v - max).exp());
        let sum: T = exps.sum();
        loss += w * (sum.ln() - (row[y] - max));
        let mut g = grad.row_mut(i);
        for c in 0..k {
            let p = exps[c] / sum;
            let target = if c == y { T::one() } else { T::zero() };
            g[c] = w * (p - target) / norm;
        }
    }
    Ok((loss / norm, grad))
}

/// `w_c = median(positive frequencies) / freq_c`; classes never seen get weight 0.
pub fn median_freq_weights(counts: &[u64]) -> Result<Vec<f64>> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(RsnetError::Validation("median frequency weights need at least one labeled point".into()));
    }
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mut positive: Vec<f64> = freqs.iter().copied().filter(|&f| f > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    let m = positive.len();
    let median = if m % 2 == 1 { positive[m / 2] } else { 0.5 * (positive[m / 2 - 1] + positive[m / 2]) };
    Ok(freqs.iter().map(|&f| if f > 0.0 { median / f } else { 0.0 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn toy_config(k: usize) -> RsnetConfig {
        RsnetConfig {
            num_classes: k,
            d_in: 3,
            input_channels: vec![4, 4],
            output_channels: vec![5],
            rnn: RnnStackConfig { hidden_sizes: vec![3, 3], variant: crate::rnn::CellVariant::Gru },
            resolutions: [0.1, 0.1, 0.1],
            use_rnn: true,
        }
    }

    fn random_cloud(seed: u64, n: usize) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = Array2::from_shape_simple_fn((n, 3), || rng.random_range(0.0..1.0));
        let feats = coords.mapv(|v| v - 0.5);
        (feats, coords)
    }

    #[test]
    fn default_shapes() {
        let cfg = RsnetConfig::default();
        let p = build_rsnet::<f32>(&cfg, 0).unwrap();
        let shapes: Vec<_> = p.input_block.iter().map(|l| l.weight.dim()).collect();
        assert_eq!(shapes, vec![(9, 64), (64, 64), (64, 64)]);
        assert_eq!(cfg.merged_width(), 768);
        assert_eq!(p.output_block[0].weight.dim(), (768, 512));
        assert_eq!(p.output_block[1].weight.dim(), (512, 256));
        assert_eq!(p.output_block[2].weight.dim(), (256, 13));
        assert_eq!(p.branches.len(), 3);
        for st in &p.branches {
            assert_eq!(st.layers[0].forward.input_size(), 64);
            assert_eq!(st.output_size(), 256);
        }
    }

    #[test]
    fn build_is_deterministic_and_names_unique() {
        let cfg = toy_config(3);
        let a = build_rsnet::<f64>(&cfg, 9).unwrap();
        let b = build_rsnet::<f64>(&cfg, 9).unwrap();
        assert_eq!(a, b);
        let names = a.tensor_names();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(names.len(), dedup.len());
        assert!(names.contains(&"rnn_z.layer1.bwd.w_h".to_string()));
    }

    #[test]
    fn single_point_forward() {
        let cfg = toy_config(4);
        let p = build_rsnet::<f64>(&cfg, 1).unwrap();
        let (logits, cache) = rsnet_forward(array![[0.1, 0.2, 0.3]].view(), array![[1.0, 2.0, 3.0]].view(), &p, &cfg).unwrap();
        assert_eq!(logits.dim(), (1, 4));
        assert!(cache.assignments().iter().all(|a| a.num_slices == 1));
    }

    #[test]
    fn wrong_feature_width_is_shape_error() {
        let cfg = toy_config(2);
        let p = build_rsnet::<f64>(&cfg, 1).unwrap();
        let err = rsnet_forward(array![[0.1, 0.2]].view(), array![[1.0, 2.0, 3.0]].view(), &p, &cfg);
        assert!(matches!(err, Err(RsnetError::Shape(_))));
    }

    #[test]
    fn zero_grad_logits_give_zero_grads() {
        let cfg = toy_config(3);
        let p = build_rsnet::<f64>(&cfg, 2).unwrap();
        let (f, c) = random_cloud(4, 20);
        let (logits, cache) = rsnet_forward(f.view(), c.view(), &p, &cfg).unwrap();
        let g = rsnet_backward(&p, &cache, Array2::zeros(logits.dim()).view()).unwrap();
        assert!(g.params.flatten().iter().all(|&v| v == 0.0));
        assert!(g.features.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroed_branch_columns_silence_branch_gradients() {
        let cfg = toy_config(3);
        let mut p = build_rsnet::<f64>(&cfg, 3).unwrap();
        let w = cfg.branch_width();
        // keep only the z branch
        p.output_block[0].weight.slice_mut(s![..2 * w, ..]).fill(0.0);
        let (f, c) = random_cloud(5, 30);
        let (logits, cache) = rsnet_forward(f.view(), c.view(), &p, &cfg).unwrap();
        let g = rsnet_backward(&p, &cache, Array2::ones(logits.dim()).view()).unwrap();
        assert!(g.params.branches[0].flatten().iter().all(|&v| v == 0.0));
        assert!(g.params.branches[1].flatten().iter().all(|&v| v == 0.0));
        assert!(g.params.branches[2].flatten().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn ablated_model_has_no_stacks() {
        let cfg = RsnetConfig { use_rnn: false, ..toy_config(3) };
        let p = build_rsnet::<f64>(&cfg, 3).unwrap();
        assert!(p.branches.is_empty());
        assert_eq!(p.output_block[0].in_channels(), 12);
        let (f, c) = random_cloud(6, 10);
        let (logits, cache) = rsnet_forward(f.view(), c.view(), &p, &cfg).unwrap();
        assert_eq!(logits.dim(), (10, 3));
        rsnet_backward(&p, &cache, logits.view()).unwrap();
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let (loss, _) = softmax_cross_entropy(Array2::<f64>::zeros((3, 4)).view(), &[0, 1, 3], &[1.0; 4]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        let (loss, _) = softmax_cross_entropy(array![[50.0, 0.0], [0.0, 50.0]].view(), &[0, 1], &[1.0; 2]).unwrap();
        assert!(loss < 1e-20);
        let logits = array![[0.3f64, -1.0, 2.0], [1.0, 1.5, -0.5]];
        let (a, ga) = softmax_cross_entropy(logits.view(), &[2, 0], &[1.0; 3]).unwrap();
        let (b, gb) = softmax_cross_entropy(logits.view(), &[2, 0], &[3.7; 3]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((&ga - &gb).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let err = softmax_cross_entropy(Array2::<f64>::zeros((1, 2)).view(), &[2], &[1.0; 2]);
        assert!(matches!(err, Err(RsnetError::Validation(_))));
    }

    #[test]
    fn median_frequency_examples() {
        assert_eq!(median_freq_weights(&[2, 1, 1]).unwrap(), vec![0.5, 1.0, 1.0]);
        assert_eq!(median_freq_weights(&[7, 7, 7, 7]).unwrap(), vec![1.0; 4]);
        assert_eq!(median_freq_weights(&[0, 4, 4]).unwrap(), vec![0.0, 1.0, 1.0]);
        assert!(matches!(median_freq_weights(&[0, 0]), Err(RsnetError::Validation(_))));
    }

    #[test]
    fn median_frequency_on_s3dis_portions() {
        // Class portions of the S3DIS training split, in hundredths of a percent.
        let portions = [2530u64, 2330, 1730, 242, 160, 110, 460, 340, 530, 50, 330, 70, 1120];
        let w = median_freq_weights(&portions).unwrap();
        let ratio = w[9] / w[0];
        assert!((ratio - 50.6).abs() < 1e-9, "{ratio}");
    }
}
