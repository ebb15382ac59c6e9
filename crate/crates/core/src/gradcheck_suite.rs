//! Finite-difference checks of every differentiable operation.
//!
//! Each case draws random inputs and parameters in `f64`, reduces the output to
//! a scalar through a fixed random projection, and compares the analytic
//! gradient of every input and parameter block against central differences.
//! Draws that land within `margin` of a ReLU kink or a pooling tie are
//! discarded and redrawn from the same seeded stream.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{build_rsnet, rsnet_backward, rsnet_forward, softmax_cross_entropy, RsnetConfig};
use crate::nn::{grad_check, linear_pointwise_backward, linear_pointwise_forward, relu, relu_backward, Block, GradCheckConfig, ParamTensors};
use crate::rnn::{
    birnn_backward, birnn_forward, cell_backward, cell_forward, stack_backward, stack_forward, BiRnnLayer, CellParams,
    CellState, CellVariant, RnnStack, RnnStackConfig,
};
use crate::slicing::{
    assign_slices, pool_tie_margin, slice_pool_backward, slice_pool_forward, slice_unpool_backward, slice_unpool_forward,
    SliceAxis,
};

type LossFn = Box<dyn Fn(&[Vec<f64>]) -> (f64, Vec<Vec<f64>>)>;

/// A drawn problem: named blocks and the loss over them.
struct Problem {
    blocks: Vec<Block>,
    loss: LossFn,
}

type CaseFn = fn(&mut ChaCha8Rng, f64) -> Option<Problem>;

pub const CASES: &[&str] = &[
    "linear",
    "relu",
    "slice_pool",
    "slice_unpool",
    "cell_vanilla",
    "cell_gru",
    "cell_lstm",
    "birnn",
    "stack_toy",
    "stack_six_layer",
    "rsnet_toy",
    "weighted_cross_entropy",
];

fn case_fn(name: &str) -> Option<CaseFn> {
    Some(match name {
        "linear" => linear_case,
        "relu" => relu_case,
        "slice_pool" => pool_case,
        "slice_unpool" => unpool_case,
        "cell_vanilla" => |rng, _| cell_case(rng, CellVariant::Vanilla),
        "cell_gru" => |rng, _| cell_case(rng, CellVariant::Gru),
        "cell_lstm" => |rng, _| cell_case(rng, CellVariant::Lstm),
        "birnn" => birnn_case,
        "stack_toy" => |rng, _| stack_case(rng, &[4, 3]),
        "stack_six_layer" => |rng, _| stack_case(rng, &[4, 3, 2, 2, 3, 4]),
        "rsnet_toy" => rsnet_case,
        "weighted_cross_entropy" => ce_case,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub seeds: u64,
    pub check: GradCheckConfig,
    /// Minimum distance from kinks and ties for a draw to be kept.
    pub margin: f64,
    pub max_redraws: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seeds: 20, check: GradCheckConfig::default(), margin: 1e-3, max_redraws: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub seeds: u64,
    pub max_rel_error: f64,
    pub redraws: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub cases: Vec<CaseResult>,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.cases.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cases {
            out.push_str(&format!(
                "{:<24} {} seeds={} max_rel_err={:.3e} redraws={}\n",
                c.name,
                if c.pass { "ok  " } else { "FAIL" },
                c.seeds,
                c.max_rel_error,
                c.redraws
            ));
        }
        out
    }
}

/// Runs one named case over `cfg.seeds` seeds. Returns `None` for an unknown name.
pub fn run_case(name: &str, cfg: &SuiteConfig) -> Option<CaseResult> {
    let build = case_fn(name)?;
    let mut worst = 0.0f64;
    let mut redraws = 0;
    let mut pass = true;
    for seed in 0..cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drawn = None;
        for _ in 0..=cfg.max_redraws {
            if let Some(p) = build(&mut rng, cfg.margin) {
                drawn = Some(p);
                break;
            }
            redraws += 1;
        }
        let Some(problem) = drawn else {
            pass = false;
            worst = f64::INFINITY;
            continue;
        };
        let mut check = cfg.check;
        check.seed = seed;
        if name == "linear" {
            // bilinear loss: central differences are exact up to rounding
            check.tolerance = check.tolerance.min(1e-6);
        }
        let report = grad_check(&problem.blocks, &problem.loss, &check);
        worst = worst.max(report.max_rel_error());
        pass &= report.pass;
    }
    Some(CaseResult { name: name.to_string(), seeds: cfg.seeds, max_rel_error: worst, redraws, pass })
}

pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let cases = CASES.iter().map(|n| run_case(n, cfg).expect("listed case exists")).collect();
    SuiteReport { cases, tolerance: cfg.check.tolerance }
}

fn rand_mat(rng: &mut ChaCha8Rng, shape: (usize, usize), scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.random_range(-scale..scale))
}

fn to_mat(v: &[f64], shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_vec(shape, v.to_vec()).expect("block length matches shape")
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum()
}

fn tensor_blocks<P: ParamTensors<f64>>(p: &P, prefix: &str) -> Vec<Block> {
    let mut out = Vec::new();
    p.visit(prefix, &mut |name, v| out.push(Block::new(name, v.iter().copied().collect())));
    out
}

fn load_tensors<P: ParamTensors<f64>>(p: &mut P, values: &[Vec<f64>]) {
    let mut k = 0;
    p.visit_mut("", &mut |_, mut v| {
        for (dst, src) in v.iter_mut().zip(&values[k]) {
            *dst = *src;
        }
        k += 1;
    });
    assert_eq!(k, values.len(), "one block per tensor");
}

fn grad_vecs<P: ParamTensors<f64>>(g: &P) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    g.visit("", &mut |_, v| out.push(v.iter().copied().collect()));
    out
}

fn linear_case(rng: &mut ChaCha8Rng, _margin: f64) -> Option<Problem> {
    let (n, ci, co) = (rng.random_range(1..8), rng.random_range(1..6), rng.random_range(1..6));
    let f = rand_mat(rng, (n, ci), 1.0);
    let w = rand_mat(rng, (ci, co), 1.0);
    let b: Vec<f64> = (0..co).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r = rand_mat(rng, (n, co), 1.0);
    let blocks = vec![Block::new("features", flat(&f)), Block::new("weight", flat(&w)), Block::new("bias", b)];
    let loss: LossFn = Box::new(move |v| {
        let (f, w, b) = (to_mat(&v[0], (n, ci)), to_mat(&v[1], (ci, co)), Array1::from(v[2].clone()));
        let out = linear_pointwise_forward(f.view(), w.view(), b.view()).unwrap();
        let g = linear_pointwise_backward(f.view(), w.view(), r.view()).unwrap();
        (dot(&out, &r), vec![flat(&g.input), flat(&g.weight), g.bias.to_vec()])
    });
    Some(Problem { blocks, loss })
}

fn relu_case(rng: &mut ChaCha8Rng, margin: f64) -> Option<Problem> {
    let shape = (rng.random_range(1..8), rng.random_range(1..6));
    let x = rand_mat(rng, shape, 1.0);
    if x.iter().any(|v| v.abs() < margin) {
        return None;
    }
    let r = rand_mat(rng, shape, 1.0);
    let loss: LossFn = Box::new(move |v| {
        let x = to_mat(&v[0], shape);
        (dot(&relu(x.view()), &r), vec![flat(&relu_backward(x.view(), r.view()))])
    });
    Some(Problem { blocks: vec![Block::new("input", flat(&x))], loss })
}

fn random_coords(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, 3), || rng.random_range(0.0..1.0))
}

fn random_axis(rng: &mut ChaCha8Rng) -> SliceAxis {
    SliceAxis::ALL[rng.random_range(0..3)]
}

fn pool_case(rng: &mut ChaCha8Rng, margin: f64) -> Option<Problem> {
    let (n, c) = (rng.random_range(2..48), rng.random_range(1..5));
    let coords = random_coords(rng, n);
    let a = assign_slices(coords.view(), random_axis(rng), rng.random_range(0.05..0.4)).unwrap();
    let f = rand_mat(rng, (n, c), 1.0);
    if pool_tie_margin(f.view(), &a, false) < margin {
        return None;
    }
    let r = rand_mat(rng, (a.num_slices, c), 1.0);
    let loss: LossFn = Box::new(move |v| {
        let f = to_mat(&v[0], (n, c));
        let (seq, rec) = slice_pool_forward(f.view(), &a).unwrap();
        (dot(&seq, &r), vec![flat(&slice_pool_backward(r.view(), &rec).unwrap())])
    });
    Some(Problem { blocks: vec![Block::new("features", flat(&f))], loss })
}

fn unpool_case(rng: &mut ChaCha8Rng, _margin: f64) -> Option<Problem> {
    let (n, c) = (rng.random_range(1..48), rng.random_range(1..5));
    let coords = random_coords(rng, n);
    let a = assign_slices(coords.view(), random_axis(rng), rng.random_range(0.05..0.4)).unwrap();
    let seq = rand_mat(rng, (a.num_slices, c), 1.0);
    let r = rand_mat(rng, (n, c), 1.0);
    let shape = seq.dim();
    let loss: LossFn = Box::new(move |v| {
        let seq = to_mat(&v[0], shape);
        let out = slice_unpool_forward(seq.view(), &a).unwrap();
        (dot(&out, &r), vec![flat(&slice_unpool_backward(r.view(), &a).unwrap())])
    });
    Some(Problem { blocks: vec![Block::new("sequence", flat(&seq))], loss })
}

fn random_cell(rng: &mut ChaCha8Rng, variant: CellVariant, input: usize, hidden: usize) -> CellParams<f64> {
    let g = variant.num_gates() * hidden;
    CellParams {
        variant,
        w_x: rand_mat(rng, (input, g), 0.8),
        w_h: rand_mat(rng, (hidden, g), 0.8),
        b: Array1::from_shape_simple_fn(g, || rng.random_range(-0.5..0.5)),
    }
}

/// Five explicit cell steps from a random initial state.
fn cell_case(rng: &mut ChaCha8Rng, variant: CellVariant) -> Option<Problem> {
    const STEPS: usize = 5;
    let (input, hidden) = (3, 4);
    let lstm = variant == CellVariant::Lstm;
    let c_len = if lstm { hidden } else { 0 };
    let params = random_cell(rng, variant, input, hidden);
    let xs = rand_mat(rng, (STEPS, input), 1.0);
    let h0: Vec<f64> = (0..hidden).map(|_| rng.random_range(-0.8..0.8)).collect();
    let c0: Vec<f64> = (0..c_len).map(|_| rng.random_range(-0.8..0.8)).collect();
    let r = rand_mat(rng, (STEPS, hidden), 1.0);
    let r_c: Array1<f64> = Array1::from_shape_simple_fn(c_len, || rng.random_range(-1.0..1.0));

    let mut blocks = vec![Block::new("inputs", flat(&xs)), Block::new("h0", h0)];
    if lstm {
        blocks.push(Block::new("c0", c0));
    }
    blocks.extend(tensor_blocks(&params, "cell"));
    let loss: LossFn = Box::new(move |v| {
        let xs = to_mat(&v[0], (STEPS, input));
        let mut state = CellState { h: Array1::from(v[1].clone()), c: Array1::zeros(0) };
        let off = if lstm {
            state.c = Array1::from(v[2].clone());
            3
        } else {
            2
        };
        let mut p = params.clone();
        load_tensors(&mut p, &v[off..]);
        let mut caches = Vec::with_capacity(STEPS);
        let mut total = 0.0;
        for t in 0..STEPS {
            let (next, cache) = cell_forward(&p, xs.row(t), &state).unwrap();
            total += next.h.dot(&r.row(t));
            caches.push(cache);
            state = next;
        }
        if lstm {
            total += state.c.dot(&r_c);
        }
        let mut grads = p.zeros_like();
        let mut gx = Array2::zeros((STEPS, input));
        let mut gh = Array1::zeros(hidden);
        let mut gc = r_c.clone();
        for t in (0..STEPS).rev() {
            let g = cell_backward(&p, xs.row(t), &caches[t], (&gh + &r.row(t)).view(), gc.view());
            gx.row_mut(t).assign(&g.input);
            grads.add_assign(&g.params);
            gh = g.h_prev;
            gc = g.c_prev;
        }
        let mut out = vec![flat(&gx), gh.to_vec()];
        if lstm {
            out.push(gc.to_vec());
        }
        out.extend(grad_vecs(&grads));
        (total, out)
    });
    Some(Problem { blocks, loss })
}

fn birnn_case(rng: &mut ChaCha8Rng, _margin: f64) -> Option<Problem> {
    let variant = CellVariant::ALL[rng.random_range(0..3)];
    let (n, input, hidden) = (rng.random_range(1..8), 3, 4);
    let layer = BiRnnLayer { forward: random_cell(rng, variant, input, hidden), backward: random_cell(rng, variant, input, hidden) };
    let seq = rand_mat(rng, (n, input), 1.0);
    let r = rand_mat(rng, (n, hidden), 1.0);
    let mut blocks = vec![Block::new("sequence", flat(&seq))];
    blocks.extend(tensor_blocks(&layer, "layer"));
    let loss: LossFn = Box::new(move |v| {
        let seq = to_mat(&v[0], (n, input));
        let mut l = layer.clone();
        load_tensors(&mut l, &v[1..]);
        let (out, cache) = birnn_forward(seq.view(), &l).unwrap();
        let mut grads = l.zeros_like();
        let gx = birnn_backward(&l, &cache, r.view(), &mut grads);
        let mut g = vec![flat(&gx)];
        g.extend(grad_vecs(&grads));
        (dot(&out, &r), g)
    });
    Some(Problem { blocks, loss })
}

fn stack_case(rng: &mut ChaCha8Rng, widths: &[usize]) -> Option<Problem> {
    const N: usize = 6;
    let variant = CellVariant::ALL[rng.random_range(0..3)];
    let input = 3;
    let cfg = RnnStackConfig { hidden_sizes: widths.to_vec(), variant };
    let mut stack = RnnStack::<f64>::init(&cfg, input, rng).unwrap();
    // larger than Glorot so gradients through six layers stay well above rounding
    stack.visit_mut("", &mut |_, mut v| v.mapv_inplace(|w| 2.0 * w));
    let seq = rand_mat(rng, (N, input), 1.0);
    let r = rand_mat(rng, (N, stack.output_size()), 1.0);
    let mut blocks = vec![Block::new("sequence", flat(&seq))];
    blocks.extend(tensor_blocks(&stack, "stack"));
    let loss: LossFn = Box::new(move |v| {
        let seq = to_mat(&v[0], (N, input));
        let mut s = stack.clone();
        load_tensors(&mut s, &v[1..]);
        let (out, cache) = stack_forward(seq.view(), &s).unwrap();
        let mut grads = s.zeros_like();
        let gx = stack_backward(&s, &cache, r.view(), &mut grads);
        let mut g = vec![flat(&gx)];
        g.extend(grad_vecs(&grads));
        (dot(&out, &r), g)
    });
    Some(Problem { blocks, loss })
}

fn toy_rsnet_config(variant: CellVariant) -> RsnetConfig {
    RsnetConfig {
        num_classes: 4,
        d_in: 5,
        input_channels: vec![4, 4],
        output_channels: vec![5],
        rnn: RnnStackConfig { hidden_sizes: vec![3, 3], variant },
        resolutions: [0.25, 0.3, 0.2],
        use_rnn: true,
    }
}

fn rsnet_case(rng: &mut ChaCha8Rng, margin: f64) -> Option<Problem> {
    const N: usize = 32;
    let cfg = toy_rsnet_config(CellVariant::ALL[rng.random_range(0..3)]);
    let mut params = build_rsnet::<f64>(&cfg, rng.random()).unwrap();
    // random biases keep ReLUs from sitting exactly at zero on zero-bias init
    params.visit_mut("", &mut |name, mut v| {
        if name.ends_with(".bias") || name.ends_with(".b") {
            v.mapv_inplace(|_| rng.random_range(-0.3..0.3));
        }
    });
    let coords = random_coords(rng, N);
    let feats = rand_mat(rng, (N, cfg.d_in), 1.0);
    let (_, probe) = rsnet_forward(feats.view(), coords.view(), &params, &cfg).unwrap();
    if probe.kink_margin() < margin {
        return None;
    }
    let r = rand_mat(rng, (N, cfg.num_classes), 1.0);
    let mut blocks = vec![Block::new("features", flat(&feats))];
    blocks.extend(tensor_blocks(&params, "rsnet"));
    let loss: LossFn = Box::new(move |v| {
        let f = to_mat(&v[0], (N, cfg.d_in));
        let mut p = params.clone();
        load_tensors(&mut p, &v[1..]);
        let (logits, cache) = rsnet_forward(f.view(), coords.view(), &p, &cfg).unwrap();
        let grads = rsnet_backward(&p, &cache, r.view()).unwrap();
        let mut g = vec![flat(&grads.features)];
        g.extend(grad_vecs(&grads.params));
        (dot(&logits, &r), g)
    });
    Some(Problem { blocks, loss })
}

fn ce_case(rng: &mut ChaCha8Rng, _margin: f64) -> Option<Problem> {
    let (n, k) = (rng.random_range(1..10), rng.random_range(2..7));
    let logits = rand_mat(rng, (n, k), 3.0);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..5.0)).collect();
    let loss: LossFn = Box::new(move |v| {
        let z = to_mat(&v[0], (n, k));
        let (l, g) = softmax_cross_entropy(z.view(), &labels, &weights).unwrap();
        (l, vec![flat(&g)])
    });
    Some(Problem { blocks: vec![Block::new("logits", flat(&logits))], loss })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_is_known() {
        for name in CASES {
            assert!(case_fn(name).is_some(), "{name}");
        }
        assert!(run_case("no_such_op", &SuiteConfig::default()).is_none());
    }

    #[test]
    fn quick_suite_passes() {
        let cfg = SuiteConfig { seeds: 2, ..SuiteConfig::default() };
        let report = run_suite(&cfg);
        assert!(report.pass(), "{}", report.to_text());
    }
}
