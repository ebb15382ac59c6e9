//! Operation counts and timings of the slice operators across cloud sizes and
//! slicing resolutions.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::slicing::{
    assign_slices_counted, slice_pool_backward_counted, slice_pool_forward_counted, slice_unpool_backward_counted,
    slice_unpool_forward_counted, OpCount, SliceAxis,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub rs: Vec<f64>,
    pub channels: usize,
    /// Edge length of the cube the points are drawn in, meters.
    pub extent: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { ns: vec![1024, 2048, 4096], rs: vec![0.01, 0.02, 0.05, 0.08], channels: 64, extent: 1.0, repeats: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub r: f64,
    /// Slices along x, y, z.
    pub num_slices: [usize; 3],
    /// Pool and unpool, forward and backward, over all three axes.
    pub ops: OpCount,
    /// Same, for slice assignment alone.
    pub assign_ops: OpCount,
    /// Best wall clock of the repeats, seconds.
    pub seconds: f64,
}

/// Pool → unpool forward and backward along every axis on one random cloud.
pub fn measure(coords: &Array2<f64>, features: &Array2<f32>, r: f64) -> Result<(OpCount, OpCount, [usize; 3])> {
    let mut ops = OpCount::default();
    let mut assign_ops = OpCount::default();
    let mut num_slices = [0; 3];
    for axis in SliceAxis::ALL {
        let a = assign_slices_counted(coords.view(), axis, r, &mut assign_ops)?;
        num_slices[axis.index()] = a.num_slices;
        let (seq, rec) = slice_pool_forward_counted(features.view(), &a, &mut ops)?;
        let out = slice_unpool_forward_counted(seq.view(), &a, &mut ops)?;
        let g_seq = slice_unpool_backward_counted(out.view(), &a, &mut ops)?;
        slice_pool_backward_counted(g_seq.view(), &rec, &mut ops)?;
    }
    Ok((ops, assign_ops, num_slices))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ n as u64);
        let coords = Array2::from_shape_simple_fn((n, 3), || rng.random_range(0.0..cfg.extent));
        let features = Array2::from_shape_simple_fn((n, cfg.channels), || rng.random_range(-1.0f32..1.0));
        for &r in &cfg.rs {
            let mut best = f64::INFINITY;
            let mut result = None;
            for _ in 0..cfg.repeats.max(1) {
                let start = Instant::now();
                let m = measure(&coords, &features, r)?;
                best = best.min(start.elapsed().as_secs_f64());
                result = Some(m);
            }
            let (ops, assign_ops, num_slices) = result.expect("at least one repeat");
            rows.push(BenchRow { n, r, num_slices, ops, assign_ops, seconds: best });
        }
    }
    Ok(rows)
}

pub fn rows_to_text(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:>8} {:>7} {:>14} {:>14} {:>14} {:>14} {:>11}\n",
        "n", "r", "slices", "point_touches", "slice_touches", "assign_points", "ms"
    );
    for row in rows {
        let slices = format!("{}/{}/{}", row.num_slices[0], row.num_slices[1], row.num_slices[2]);
        writeln!(
            out,
            "{:>8} {:>7} {:>14} {:>14} {:>14} {:>14} {:>11.3}",
            row.n,
            row.r,
            slices,
            row.ops.point_touches,
            row.ops.slice_touches,
            row.assign_ops.point_touches,
            row.seconds * 1e3
        )
        .unwrap();
    }
    out
}
