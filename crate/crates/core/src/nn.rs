//! Per-point layers, activations, initialization and a finite-difference checker.
//!
//! A 1×1 convolution over a point set is one affine map shared by every point, so
//! every layer here works on an `n × c` matrix whose rows are points (or slices).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{
    Array1, Array2, ArrayView1, ArrayView2, ArrayViewD, ArrayViewMutD, Axis, LinalgScalar, ScalarOperand,
};
use num_traits::{Float, FromPrimitive};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Result};

/// Scalar type the network runs in: `f64` for gradient checks, `f32` for training.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to every Real")
    }
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Row `i` holds the features of point (or slice) `i`.
pub type FeatureMap<T> = Array2<T>;

/// A shared per-point affine map, `out[i] = x[i]·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `c_in × c_out`
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads<T> {
    pub input: Array2<T>,
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(c_in: usize, c_out: usize) -> Self {
        Self { weight: Array2::zeros((c_in, c_out)), bias: Array1::zeros(c_out) }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        Self { weight: glorot_uniform((c_in, c_out), c_in, c_out, rng), bias: Array1::zeros(c_out) }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_channels(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<FeatureMap<T>> {
        linear_pointwise_forward(x, self.weight.view(), self.bias.view())
    }

    pub fn backward(&self, x: ArrayView2<T>, grad_out: ArrayView2<T>) -> Result<LinearGrads<T>> {
        linear_pointwise_backward(x, self.weight.view(), grad_out)
    }
}

pub fn linear_pointwise_forward<T: Real>(
    x: ArrayView2<T>,
    weight: ArrayView2<T>,
    bias: ArrayView1<T>,
) -> Result<FeatureMap<T>> {
    if x.ncols() != weight.nrows() {
        return Err(shape_err(format!(
            "linear input has {} channels, weight expects {}",
            x.ncols(),
            weight.nrows()
        )));
    }
    if bias.len() != weight.ncols() {
        return Err(shape_err(format!(
            "bias length {} != output channels {}",
            bias.len(),
            weight.ncols()
        )));
    }
    Ok(x.dot(&weight) + &bias)
}

pub fn linear_pointwise_backward<T: Real>(
    x: ArrayView2<T>,
    weight: ArrayView2<T>,
    grad_out: ArrayView2<T>,
) -> Result<LinearGrads<T>> {
    if x.ncols() != weight.nrows() || grad_out.ncols() != weight.ncols() || grad_out.nrows() != x.nrows() {
        return Err(shape_err(format!(
            "linear backward: input {:?}, weight {:?}, grad {:?}",
            x.dim(),
            weight.dim(),
            grad_out.dim()
        )));
    }
    Ok(LinearGrads {
        input: grad_out.dot(&weight.t()),
        weight: x.t().dot(&grad_out),
        bias: grad_out.sum_axis(Axis(0)),
    })
}

pub fn relu<T: Real>(x: ArrayView2<T>) -> FeatureMap<T> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient passes only where the forward input was strictly positive.
pub fn relu_backward<T: Real>(x: ArrayView2<T>, grad_out: ArrayView2<T>) -> FeatureMap<T> {
    let mut g = grad_out.to_owned();
    g.zip_mut_with(&x, |g, &v| {
        if v <= T::zero() {
            *g = T::zero();
        }
    });
    g
}

/// Uniform on `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Real>(
    shape: (usize, usize),
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl Rng,
) -> Array2<T> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || T::of_f64(rng.random_range(-a..=a)))
}

/// Seeded convenience wrapper around [`glorot_uniform`].
pub fn init_params<T: Real>(shape: (usize, usize), fan_in: usize, fan_out: usize, seed: u64) -> Array2<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    glorot_uniform(shape, fan_in, fan_out, &mut rng)
}

/// Visits every parameter tensor under a dotted name, in a fixed order.
///
/// Optimizers, checkpoints and gradient buffers all rely on two structures of
/// the same shape visiting their tensors in the same order.
pub trait ParamTensors<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewD<'_, T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, T>));

    fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit("", &mut |name, _| names.push(name));
        names
    }

    fn num_scalars(&self) -> usize {
        let mut total = 0;
        self.visit("", &mut |_, v| total += v.len());
        total
    }

    /// Flattened copy of every tensor, in visiting order.
    fn flatten(&self) -> Vec<T>
    where
        T: Clone,
    {
        let mut out = Vec::new();
        self.visit("", &mut |_, v| out.extend(v.iter().cloned()));
        out
    }

    /// Overwrites every tensor from a flat slice produced by [`ParamTensors::flatten`].
    fn unflatten(&mut self, flat: &[T])
    where
        T: Clone,
    {
        let mut offset = 0;
        self.visit_mut("", &mut |_, mut v| {
            for (dst, src) in v.iter_mut().zip(&flat[offset..]) {
                *dst = src.clone();
            }
            offset += v.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }
}

pub(crate) fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<T: Real> ParamTensors<T> for Linear<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewD<'_, T>)) {
        f(join_name(prefix, "weight"), self.weight.view().into_dyn());
        f(join_name(prefix, "bias"), self.bias.view().into_dyn());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, T>)) {
        f(join_name(prefix, "weight"), self.weight.view_mut().into_dyn());
        f(join_name(prefix, "bias"), self.bias.view_mut().into_dyn());
    }
}

impl<T: Real> LinearGrads<T> {
    /// Parameter part of the gradient, shaped like the layer.
    pub fn into_layer(self) -> Linear<T> {
        Linear { weight: self.weight, bias: self.bias }
    }
}

impl<T: Real> Linear<T> {
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_channels(), self.out_channels())
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.weight += &other.weight;
        self.bias += &other.bias;
    }
}

/// One named, flattened block of values checked by [`grad_check`].
#[derive(Debug, Clone)]
pub struct Block {
    pub name: String,
    pub values: Vec<f64>,
}

impl Block {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tolerance: f64,
    /// Blocks larger than this are checked on a random subset of this many coordinates.
    pub max_coords_per_block: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-5, tolerance: 1e-4, max_coords_per_block: 400, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients against central differences.
///
/// `f` maps the current values of every block to `(loss, gradient per block)`.
pub fn grad_check<F>(blocks: &[Block], f: F, cfg: &GradCheckConfig) -> GradCheckReport
where
    F: Fn(&[Vec<f64>]) -> (f64, Vec<Vec<f64>>),
{
    let mut values: Vec<Vec<f64>> = blocks.iter().map(|b| b.values.clone()).collect();
    let (_, analytic) = f(&values);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::with_capacity(blocks.len());

    for (bi, block) in blocks.iter().enumerate() {
        let len = block.values.len();
        let coords: Vec<usize> = if len > cfg.max_coords_per_block {
            let mut picked = index::sample(&mut rng, len, cfg.max_coords_per_block).into_vec();
            picked.sort_unstable();
            picked
        } else {
            (0..len).collect()
        };
        let mut max_err = 0.0f64;
        for &j in &coords {
            let orig = values[bi][j];
            values[bi][j] = orig + cfg.eps;
            let (plus, _) = f(&values);
            values[bi][j] = orig - cfg.eps;
            let (minus, _) = f(&values);
            values[bi][j] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.eps);
            max_err = max_err.max(relative_error(analytic[bi][j], numeric));
        }
        reports.push(BlockReport { name: block.name.clone(), checked: coords.len(), max_rel_error: max_err });
    }

    let pass = reports.iter().all(|r| r.max_rel_error <= cfg.tolerance);
    GradCheckReport { blocks: reports, tolerance: cfg.tolerance, pass }
}
