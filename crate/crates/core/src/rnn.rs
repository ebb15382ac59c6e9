//! Recurrent cells, bidirectional layers and layer stacks over slice sequences.
//!
//! Row-vector convention throughout: a cell computes gate pre-activations as
//! `x·W_x + h·W_h + b`, with the gates laid out side by side in the columns.
//! Gate order is `[z, r, candidate]` for GRU and `[i, f, o, g]` for LSTM.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use crate::error::{shape_err, Result, RsnetError};
use crate::nn::{glorot_uniform, join_name, ParamTensors, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellVariant {
    Vanilla,
    Gru,
    Lstm,
}

impl CellVariant {
    pub const ALL: [CellVariant; 3] = [CellVariant::Vanilla, CellVariant::Gru, CellVariant::Lstm];

    pub fn num_gates(self) -> usize {
        match self {
            CellVariant::Vanilla => 1,
            CellVariant::Gru => 3,
            CellVariant::Lstm => 4,
        }
    }
}

impl fmt::Display for CellVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellVariant::Vanilla => "vanilla",
            CellVariant::Gru => "gru",
            CellVariant::Lstm => "lstm",
        })
    }
}

impl FromStr for CellVariant {
    type Err = RsnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" | "rnn" => Ok(CellVariant::Vanilla),
            "gru" => Ok(CellVariant::Gru),
            "lstm" => Ok(CellVariant::Lstm),
            other => Err(RsnetError::Config(format!("unknown rnn unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellParams<T> {
    pub variant: CellVariant,
    /// `input_size × (gates · hidden)`
    pub w_x: Array2<T>,
    /// `hidden × (gates · hidden)`
    pub w_h: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> CellParams<T> {
    pub fn zeros(variant: CellVariant, input_size: usize, hidden_size: usize) -> Self {
        let g = variant.num_gates() * hidden_size;
        Self {
            variant,
            w_x: Array2::zeros((input_size, g)),
            w_h: Array2::zeros((hidden_size, g)),
            b: Array1::zeros(g),
        }
    }

    /// Glorot-uniform per gate block; zero biases except the LSTM forget gate at 1.
    pub fn init(variant: CellVariant, input_size: usize, hidden_size: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(variant, input_size, hidden_size);
        let h = hidden_size;
        for gate in 0..variant.num_gates() {
            let cols = s![.., gate * h..(gate + 1) * h];
            p.w_x.slice_mut(cols).assign(&glorot_uniform::<T>((input_size, h), input_size, h, rng));
            p.w_h.slice_mut(cols).assign(&glorot_uniform::<T>((h, h), h, h, rng));
        }
        if variant == CellVariant::Lstm {
            p.b.slice_mut(s![h..2 * h]).fill(T::one());
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_x.nrows()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.variant, self.input_size(), self.hidden_size())
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.w_x += &other.w_x;
        self.w_h += &other.w_h;
        self.b += &other.b;
    }

    fn check(&self) -> Result<()> {
        let g = self.variant.num_gates() * self.hidden_size();
        if self.w_x.ncols() != g || self.w_h.ncols() != g || self.b.len() != g {
            return Err(shape_err(format!(
                "{} cell with hidden {} has w_x {:?}, w_h {:?}, b {}",
                self.variant,
                self.hidden_size(),
                self.w_x.dim(),
                self.w_h.dim(),
                self.b.len()
            )));
        }
        Ok(())
    }
}

impl<T: Real> ParamTensors<T> for CellParams<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewD<'_, T>)) {
        f(join_name(prefix, "w_x"), self.w_x.view().into_dyn());
        f(join_name(prefix, "w_h"), self.w_h.view().into_dyn());
        f(join_name(prefix, "b"), self.b.view().into_dyn());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, T>)) {
        f(join_name(prefix, "w_x"), self.w_x.view_mut().into_dyn());
        f(join_name(prefix, "w_h"), self.w_h.view_mut().into_dyn());
        f(join_name(prefix, "b"), self.b.view_mut().into_dyn());
    }
}

/// Hidden state, plus the cell state for LSTM (empty otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct CellState<T> {
    pub h: Array1<T>,
    pub c: Array1<T>,
}

impl<T: Real> CellState<T> {
    pub fn zeros(variant: CellVariant, hidden_size: usize) -> Self {
        let c_len = if variant == CellVariant::Lstm { hidden_size } else { 0 };
        Self { h: Array1::zeros(hidden_size), c: Array1::zeros(c_len) }
    }
}

/// Intermediates of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    h_prev: Array1<T>,
    c_prev: Array1<T>,
    /// Post-nonlinearity gate values, same layout as the pre-activations.
    gates: Array1<T>,
    /// `tanh(c')` for LSTM, `h'` for vanilla, empty for GRU.
    aux: Array1<T>,
}

fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// `x·W` as a sum of scaled rows of `W`, which keeps the inner loop contiguous.
fn vec_mat<T: Real>(x: ArrayView1<T>, w: ArrayView2<T>) -> Array1<T> {
    let mut out = vec![T::zero(); w.ncols()];
    for (&xi, row) in x.iter().zip(w.rows()) {
        if xi == T::zero() {
            continue;
        }
        match row.as_slice() {
            Some(r) => out.iter_mut().zip(r).for_each(|(o, &v)| *o += xi * v),
            None => out.iter_mut().zip(row.iter()).for_each(|(o, &v)| *o += xi * v),
        }
    }
    Array1::from(out)
}

/// Dot product with eight independent partial sums so the loop vectorizes.
fn dot_lanes<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (&x, &y)| s + x * y);
    for (xa, xb) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// `W·d`, one contiguous row dot product per output.
fn mat_vec<T: Real>(w: ArrayView2<T>, d: ArrayView1<T>) -> Array1<T> {
    let d = d.as_standard_layout();
    let d = d.as_slice().expect("standard layout");
    w.rows()
        .into_iter()
        .map(|row| match row.as_slice() {
            Some(r) => dot_lanes(r, d),
            None => row.iter().zip(d).fold(T::zero(), |acc, (&a, &b)| acc + a * b),
        })
        .collect()
}

/// One step given the input projection `x·W_x + b`.
fn step_forward<T: Real>(p: &CellParams<T>, xproj: ArrayView1<T>, state: &CellState<T>) -> (CellState<T>, StepCache<T>) {
    let h = p.hidden_size();
    let one = T::one();
    match p.variant {
        CellVariant::Vanilla => {
            let a = &xproj + &vec_mat(state.h.view(), p.w_h.view());
            let h_new = a.mapv(T::tanh);
            let cache = StepCache {
                h_prev: state.h.clone(),
                c_prev: Array1::zeros(0),
                gates: h_new.clone(),
                aux: h_new.clone(),
            };
            (CellState { h: h_new, c: Array1::zeros(0) }, cache)
        }
        CellVariant::Gru => {
            let zr_pre = &xproj.slice(s![..2 * h]) + &vec_mat(state.h.view(), p.w_h.slice(s![.., ..2 * h]));
            let zr = zr_pre.mapv(sigmoid);
            let z = zr.slice(s![..h]);
            let r = zr.slice(s![h..]);
            let gated = &r * &state.h;
            let cand_pre = &xproj.slice(s![2 * h..]) + &vec_mat(gated.view(), p.w_h.slice(s![.., 2 * h..]));
            let cand = cand_pre.mapv(T::tanh);
            let h_new = Array1::from_shape_fn(h, |k| (one - z[k]) * state.h[k] + z[k] * cand[k]);
            let mut gates = Array1::zeros(3 * h);
            gates.slice_mut(s![..2 * h]).assign(&zr);
            gates.slice_mut(s![2 * h..]).assign(&cand);
            let cache = StepCache { h_prev: state.h.clone(), c_prev: Array1::zeros(0), gates, aux: Array1::zeros(0) };
            (CellState { h: h_new, c: Array1::zeros(0) }, cache)
        }
        CellVariant::Lstm => {
            let mut gates = &xproj + &vec_mat(state.h.view(), p.w_h.view());
            gates.slice_mut(s![..3 * h]).mapv_inplace(sigmoid);
            gates.slice_mut(s![3 * h..]).mapv_inplace(T::tanh);
            let (i, f, o, g) = (
                gates.slice(s![..h]),
                gates.slice(s![h..2 * h]),
                gates.slice(s![2 * h..3 * h]),
                gates.slice(s![3 * h..]),
            );
            let c_new = &f * &state.c + &i * &g;
            let tc = c_new.mapv(T::tanh);
            let h_new = &o * &tc;
            let cache = StepCache { h_prev: state.h.clone(), c_prev: state.c.clone(), gates, aux: tc };
            (CellState { h: h_new, c: c_new }, cache)
        }
    }
}

/// Accumulates `a^T b` into `acc`.
fn add_outer<T: Real>(acc: &mut ndarray::ArrayViewMut2<T>, a: ArrayView1<T>, b: ArrayView1<T>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai == T::zero() {
            continue;
        }
        let mut row = acc.row_mut(i);
        row.scaled_add(ai, &b);
    }
}

/// Backward through one step. Returns the gradient with respect to the gate
/// pre-activations (which is also the gradient of the input projection), the
/// previous hidden state and the previous cell state; accumulates `dL/dW_h`.
fn step_backward<T: Real>(
    p: &CellParams<T>,
    cache: &StepCache<T>,
    grad_h: ArrayView1<T>,
    grad_c: ArrayView1<T>,
    mut grad_w_h: Option<&mut Array2<T>>,
) -> (Array1<T>, Array1<T>, Array1<T>) {
    let h = p.hidden_size();
    let one = T::one();
    match p.variant {
        CellVariant::Vanilla => {
            let d_pre = Array1::from_shape_fn(h, |k| grad_h[k] * (one - cache.aux[k] * cache.aux[k]));
            if let Some(gw) = grad_w_h {
                add_outer(&mut gw.view_mut(), cache.h_prev.view(), d_pre.view());
            }
            let grad_h_prev = mat_vec(p.w_h.view(), d_pre.view());
            (d_pre, grad_h_prev, Array1::zeros(0))
        }
        CellVariant::Gru => {
            let z = cache.gates.slice(s![..h]);
            let r = cache.gates.slice(s![h..2 * h]);
            let cand = cache.gates.slice(s![2 * h..]);
            let hp = &cache.h_prev;
            let mut d_pre = Array1::zeros(3 * h);
            let mut grad_h_prev = Array1::from_shape_fn(h, |k| grad_h[k] * (one - z[k]));
            for k in 0..h {
                d_pre[2 * h + k] = grad_h[k] * z[k] * (one - cand[k] * cand[k]);
                d_pre[k] = grad_h[k] * (cand[k] - hp[k]) * z[k] * (one - z[k]);
            }
            let d_cand = d_pre.slice(s![2 * h..]);
            let gated = &r * hp;
            if let Some(gw) = grad_w_h.as_deref_mut() {
                add_outer(&mut gw.slice_mut(s![.., 2 * h..]), gated.view(), d_cand);
            }
            let d_gated = mat_vec(p.w_h.slice(s![.., 2 * h..]), d_cand);
            for k in 0..h {
                d_pre[h + k] = d_gated[k] * hp[k] * r[k] * (one - r[k]);
                grad_h_prev[k] += d_gated[k] * r[k];
            }
            let d_zr = d_pre.slice(s![..2 * h]);
            if let Some(gw) = grad_w_h {
                add_outer(&mut gw.slice_mut(s![.., ..2 * h]), hp.view(), d_zr);
            }
            grad_h_prev += &mat_vec(p.w_h.slice(s![.., ..2 * h]), d_zr);
            (d_pre, grad_h_prev, Array1::zeros(0))
        }
        CellVariant::Lstm => {
            let g_ = &cache.gates;
            let tc = &cache.aux;
            let mut d_pre = Array1::zeros(4 * h);
            let mut grad_c_prev = Array1::zeros(h);
            for k in 0..h {
                let (i, f, o, g) = (g_[k], g_[h + k], g_[2 * h + k], g_[3 * h + k]);
                let dc = grad_c[k] + grad_h[k] * o * (one - tc[k] * tc[k]);
                d_pre[k] = dc * g * i * (one - i);
                d_pre[h + k] = dc * cache.c_prev[k] * f * (one - f);
                d_pre[2 * h + k] = grad_h[k] * tc[k] * o * (one - o);
                d_pre[3 * h + k] = dc * i * (one - g * g);
                grad_c_prev[k] = dc * f;
            }
            if let Some(gw) = grad_w_h {
                add_outer(&mut gw.view_mut(), cache.h_prev.view(), d_pre.view());
            }
            let grad_h_prev = mat_vec(p.w_h.view(), d_pre.view());
            (d_pre, grad_h_prev, grad_c_prev)
        }
    }
}

/// One cell update from an explicit input vector.
pub fn cell_forward<T: Real>(
    p: &CellParams<T>,
    x: ArrayView1<T>,
    state: &CellState<T>,
) -> Result<(CellState<T>, StepCache<T>)> {
    p.check()?;
    if x.len() != p.input_size() || state.h.len() != p.hidden_size() {
        return Err(shape_err(format!(
            "cell expects input {} / hidden {}, got {} / {}",
            p.input_size(),
            p.hidden_size(),
            x.len(),
            state.h.len()
        )));
    }
    if p.variant == CellVariant::Lstm && state.c.len() != p.hidden_size() {
        return Err(shape_err("lstm cell state has the wrong length"));
    }
    let xproj = x.dot(&p.w_x) + &p.b;
    Ok(step_forward(p, xproj.view(), state))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStepGrads<T> {
    pub input: Array1<T>,
    pub h_prev: Array1<T>,
    pub c_prev: Array1<T>,
    pub params: CellParams<T>,
}

/// Exact gradients of one [`cell_forward`] call. `grad_c` is ignored (and may
/// be empty) for non-LSTM cells.
pub fn cell_backward<T: Real>(
    p: &CellParams<T>,
    x: ArrayView1<T>,
    cache: &StepCache<T>,
    grad_h: ArrayView1<T>,
    grad_c: ArrayView1<T>,
) -> CellStepGrads<T> {
    let mut params = p.zeros_like();
    let grad_c = if p.variant == CellVariant::Lstm && grad_c.is_empty() {
        Array1::zeros(p.hidden_size())
    } else {
        grad_c.to_owned()
    };
    let (d_pre, h_prev, c_prev) = step_backward(p, cache, grad_h, grad_c.view(), Some(&mut params.w_h));
    add_outer(&mut params.w_x.view_mut(), x, d_pre.view());
    params.b.assign(&d_pre);
    let input = d_pre.dot(&p.w_x.t());
    CellStepGrads { input, h_prev, c_prev, params }
}

/// Forward intermediates of a full scan in one direction.
#[derive(Debug, Clone)]
pub struct ScanCache<T> {
    steps: Vec<StepCache<T>>,
    reverse: bool,
}

/// Runs a cell over every row of `seq` from a zero state, last-to-first when
/// `reverse` is set. Row `t` of the output is the hidden state after row `t`.
pub fn scan_forward<T: Real>(p: &CellParams<T>, seq: ArrayView2<T>, reverse: bool) -> Result<(Array2<T>, ScanCache<T>)> {
    p.check()?;
    if seq.ncols() != p.input_size() {
        return Err(shape_err(format!("scan input has {} channels, cell expects {}", seq.ncols(), p.input_size())));
    }
    let n = seq.nrows();
    let xproj = seq.dot(&p.w_x) + &p.b;
    let mut out = Array2::zeros((n, p.hidden_size()));
    let mut state = CellState::zeros(p.variant, p.hidden_size());
    let mut steps = Vec::with_capacity(n);
    let order: Box<dyn Iterator<Item = usize>> = if reverse { Box::new((0..n).rev()) } else { Box::new(0..n) };
    for t in order {
        let (next, cache) = step_forward(p, xproj.row(t), &state);
        out.row_mut(t).assign(&next.h);
        steps.push(cache);
        state = next;
    }
    Ok((out, ScanCache { steps, reverse }))
}

/// GRU reset gates of every step, row `t` for sequence position `t`.
fn cache_gates_r<T: Real>(cache: &ScanCache<T>, n: usize, hdim: usize) -> Array2<T> {
    let mut r = Array2::zeros((n, hdim));
    for (k, step) in cache.steps.iter().enumerate() {
        let t = if cache.reverse { n - 1 - k } else { k };
        r.row_mut(t).assign(&step.gates.slice(s![hdim..2 * hdim]));
    }
    r
}

/// Backpropagation through time for [`scan_forward`]; accumulates into `grads`.
pub fn scan_backward<T: Real>(
    p: &CellParams<T>,
    seq: ArrayView2<T>,
    cache: &ScanCache<T>,
    grad_out: ArrayView2<T>,
    grads: &mut CellParams<T>,
) -> Array2<T> {
    let n = seq.nrows();
    let hdim = p.hidden_size();
    let c_len = if p.variant == CellVariant::Lstm { hdim } else { 0 };
    let mut d_pre_all = Array2::zeros((n, p.w_x.ncols()));
    let mut h_prev_all = Array2::zeros((n, hdim));
    let mut carry_h = Array1::<T>::zeros(hdim);
    let mut carry_c = Array1::<T>::zeros(c_len);
    // Steps were recorded in processing order; walk them backwards.
    for (k, step) in cache.steps.iter().enumerate().rev() {
        let t = if cache.reverse { n - 1 - k } else { k };
        let gh = &grad_out.row(t) + &carry_h;
        let (d_pre, gh_prev, gc_prev) = step_backward(p, step, gh.view(), carry_c.view(), None);
        d_pre_all.row_mut(t).assign(&d_pre);
        h_prev_all.row_mut(t).assign(&step.h_prev);
        carry_h = gh_prev;
        carry_c = gc_prev;
    }
    // dL/dW_h as one product over all steps instead of per-step outer products
    if p.variant == CellVariant::Gru {
        let r = cache_gates_r(cache, n, hdim);
        let gated = &r * &h_prev_all;
        let mut gw = grads.w_h.slice_mut(s![.., ..2 * hdim]);
        gw += &h_prev_all.t().dot(&d_pre_all.slice(s![.., ..2 * hdim]));
        let mut gw = grads.w_h.slice_mut(s![.., 2 * hdim..]);
        gw += &gated.t().dot(&d_pre_all.slice(s![.., 2 * hdim..]));
    } else {
        grads.w_h += &h_prev_all.t().dot(&d_pre_all);
    }
    grads.w_x += &seq.t().dot(&d_pre_all);
    grads.b += &d_pre_all.sum_axis(Axis(0));
    d_pre_all.dot(&p.w_x.t())
}

/// Two independently parameterized cells scanning in opposite directions.
#[derive(Debug, Clone, PartialEq)]
pub struct BiRnnLayer<T> {
    pub forward: CellParams<T>,
    pub backward: CellParams<T>,
}

impl<T: Real> BiRnnLayer<T> {
    pub fn init(variant: CellVariant, input_size: usize, hidden_size: usize, rng: &mut impl Rng) -> Self {
        let forward = CellParams::init(variant, input_size, hidden_size, rng);
        let backward = CellParams::init(variant, input_size, hidden_size, rng);
        Self { forward, backward }
    }

    pub fn zeros_like(&self) -> Self {
        Self { forward: self.forward.zeros_like(), backward: self.backward.zeros_like() }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.forward.add_assign(&other.forward);
        self.backward.add_assign(&other.backward);
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size()
    }
}

impl<T: Real> ParamTensors<T> for BiRnnLayer<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewD<'_, T>)) {
        self.forward.visit(&join_name(prefix, "fwd"), f);
        self.backward.visit(&join_name(prefix, "bwd"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, T>)) {
        self.forward.visit_mut(&join_name(prefix, "fwd"), f);
        self.backward.visit_mut(&join_name(prefix, "bwd"), f);
    }
}

#[derive(Debug, Clone)]
pub struct BiRnnCache<T> {
    input: Array2<T>,
    forward: ScanCache<T>,
    backward: ScanCache<T>,
}

/// `out[t] = h_fwd[t] + h_bwd[t]`.
pub fn birnn_forward<T: Real>(seq: ArrayView2<T>, layer: &BiRnnLayer<T>) -> Result<(Array2<T>, BiRnnCache<T>)> {
    if layer.forward.hidden_size() != layer.backward.hidden_size()
        || layer.forward.input_size() != layer.backward.input_size()
    {
        return Err(shape_err("bidirectional cells disagree on sizes"));
    }
    if seq.nrows() == 0 {
        return Err(RsnetError::Validation("empty slice sequence".into()));
    }
    let (hf, cf) = scan_forward(&layer.forward, seq, false)?;
    let (hb, cb) = scan_forward(&layer.backward, seq, true)?;
    Ok((hf + hb, BiRnnCache { input: seq.to_owned(), forward: cf, backward: cb }))
}

pub fn birnn_backward<T: Real>(
    layer: &BiRnnLayer<T>,
    cache: &BiRnnCache<T>,
    grad_out: ArrayView2<T>,
    grads: &mut BiRnnLayer<T>,
) -> Array2<T> {
    let gf = scan_backward(&layer.forward, cache.input.view(), &cache.forward, grad_out, &mut grads.forward);
    let gb = scan_backward(&layer.backward, cache.input.view(), &cache.backward, grad_out, &mut grads.backward);
    gf + gb
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnStackConfig {
    pub hidden_sizes: Vec<usize>,
    pub variant: CellVariant,
}

impl Default for RnnStackConfig {
    fn default() -> Self {
        Self { hidden_sizes: vec![256, 128, 64, 64, 128, 256], variant: CellVariant::Gru }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnStack<T> {
    pub layers: Vec<BiRnnLayer<T>>,
}

impl<T: Real> RnnStack<T> {
    pub fn init(cfg: &RnnStackConfig, input_size: usize, rng: &mut impl Rng) -> Result<Self> {
        if cfg.hidden_sizes.is_empty() {
            return Err(RsnetError::Config("rnn stack needs at least one layer".into()));
        }
        let mut width = input_size;
        let mut layers = Vec::with_capacity(cfg.hidden_sizes.len());
        for &h in &cfg.hidden_sizes {
            layers.push(BiRnnLayer::init(cfg.variant, width, h, rng));
            width = h;
        }
        Ok(Self { layers })
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden_size())
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(BiRnnLayer::zeros_like).collect() }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }
}

impl<T: Real> ParamTensors<T> for RnnStack<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewD<'_, T>)) {
        for (i, layer) in self.layers.iter().enumerate() {
            layer.visit(&join_name(prefix, &format!("layer{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, T>)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_mut(&join_name(prefix, &format!("layer{i}")), f);
        }
    }
}

#[derive(Debug, Clone)]
pub struct StackCache<T> {
    layers: Vec<BiRnnCache<T>>,
}

pub fn stack_forward<T: Real>(seq: ArrayView2<T>, stack: &RnnStack<T>) -> Result<(Array2<T>, StackCache<T>)> {
    let mut caches = Vec::with_capacity(stack.layers.len());
    let mut x = seq.to_owned();
    for layer in &stack.layers {
        let (y, cache) = birnn_forward(x.view(), layer)?;
        caches.push(cache);
        x = y;
    }
    Ok((x, StackCache { layers: caches }))
}

/// Returns the gradient with respect to the stack input; accumulates parameter
/// gradients into `grads`.
pub fn stack_backward<T: Real>(
    stack: &RnnStack<T>,
    cache: &StackCache<T>,
    grad_out: ArrayView2<T>,
    grads: &mut RnnStack<T>,
) -> Array2<T> {
    let mut g = grad_out.to_owned();
    for ((layer, c), gl) in stack.layers.iter().zip(&cache.layers).zip(grads.layers.iter_mut()).rev() {
        g = birnn_backward(layer, c, g.view(), gl);
    }
    g
}
