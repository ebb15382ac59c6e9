//! Slice assignment, slice pooling and slice unpooling.
//!
//! Points are bucketed into slabs of thickness `r` along one axis. Pooling takes
//! the channelwise max over each slab and yields an ordered sequence (slice 0 is
//! the lowest coordinate); unpooling copies each slice row back to its members.
//! Every pass is a single sweep over the points, so the cost is linear in `n` and
//! does not depend on `r`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{shape_err, Result, RsnetError};
use crate::nn::{FeatureMap, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SliceAxis {
    X,
    Y,
    Z,
}

impl SliceAxis {
    pub const ALL: [SliceAxis; 3] = [SliceAxis::X, SliceAxis::Y, SliceAxis::Z];

    pub fn index(self) -> usize {
        match self {
            SliceAxis::X => 0,
            SliceAxis::Y => 1,
            SliceAxis::Z => 2,
        }
    }
}

impl fmt::Display for SliceAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SliceAxis::X => "x",
            SliceAxis::Y => "y",
            SliceAxis::Z => "z",
        })
    }
}

impl FromStr for SliceAxis {
    type Err = RsnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(SliceAxis::X),
            "y" | "Y" => Ok(SliceAxis::Y),
            "z" | "Z" => Ok(SliceAxis::Z),
            other => Err(RsnetError::Config(format!("unknown axis {other:?}"))),
        }
    }
}

/// Per-point slice indices along one axis and the slice membership lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceAssignment {
    pub axis: SliceAxis,
    pub resolution: f64,
    pub coord_min: f64,
    pub num_slices: usize,
    pub slice_of_point: Vec<usize>,
    /// `members[s]` lists the points of slice `s` in ascending order.
    pub members: Vec<Vec<usize>>,
}

impl SliceAssignment {
    pub fn num_points(&self) -> usize {
        self.slice_of_point.len()
    }
}

/// Which member supplied each pooled value; needed to route gradients back.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRecord {
    /// `N × c`; meaningless for rows flagged in `empty_slice_mask`.
    pub argmax: Array2<usize>,
    pub empty_slice_mask: Vec<bool>,
    pub num_points: usize,
}

/// Instrumented access counts.
///
/// `point_touches` counts per-(point, channel) reads and writes made while
/// sweeping the points; `slice_touches` counts per-(slice, channel) work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub point_touches: u64,
    pub slice_touches: u64,
}

impl std::ops::AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        self.point_touches += rhs.point_touches;
        self.slice_touches += rhs.slice_touches;
    }
}

// Quotients within this distance of an integer are snapped to it, so a span that
// is an exact multiple of `r` in decimal does not gain a slice from rounding.
const SNAP: f64 = 1e-9;

fn snapped(q: f64) -> f64 {
    let nearest = q.round();
    if (q - nearest).abs() <= SNAP * nearest.abs().max(1.0) {
        nearest
    } else {
        q
    }
}

/// Number of slices for a coordinate span, never less than one.
pub fn slice_count(span: f64, resolution: f64) -> usize {
    (snapped(span / resolution).ceil() as usize).max(1)
}

pub fn assign_slices(coords: ArrayView2<f64>, axis: SliceAxis, resolution: f64) -> Result<SliceAssignment> {
    let mut count = OpCount::default();
    assign_slices_counted(coords, axis, resolution, &mut count)
}

pub fn assign_slices_counted(
    coords: ArrayView2<f64>,
    axis: SliceAxis,
    resolution: f64,
    count: &mut OpCount,
) -> Result<SliceAssignment> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(RsnetError::Config(format!("slicing resolution must be positive, got {resolution}")));
    }
    if coords.ncols() < 3 {
        return Err(shape_err(format!("coords need 3 columns, got {}", coords.ncols())));
    }
    let n = coords.nrows();
    if n == 0 {
        return Err(RsnetError::Validation("cannot slice an empty point set".into()));
    }
    let col = coords.column(axis.index());
    let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let num_slices = slice_count(hi - lo, resolution);

    let slice_of_point: Vec<usize> = col
        .iter()
        .map(|&v| {
            let k = snapped((v - lo) / resolution).floor();
            (k.max(0.0) as usize).min(num_slices - 1)
        })
        .collect();
    count.point_touches += 2 * n as u64;

    let mut members = vec![Vec::new(); num_slices];
    for (j, &k) in slice_of_point.iter().enumerate() {
        members[k].push(j);
    }
    count.point_touches += n as u64;
    count.slice_touches += num_slices as u64;

    Ok(SliceAssignment { axis, resolution, coord_min: lo, num_slices, slice_of_point, members })
}

pub fn slice_pool_forward<T: Real>(
    features: ArrayView2<T>,
    assignment: &SliceAssignment,
) -> Result<(FeatureMap<T>, PoolRecord)> {
    let mut count = OpCount::default();
    slice_pool_forward_counted(features, assignment, &mut count)
}

/// Channelwise max over each slice. Empty slices pool to zero; ties go to the
/// smallest point index.
pub fn slice_pool_forward_counted<T: Real>(
    features: ArrayView2<T>,
    assignment: &SliceAssignment,
    count: &mut OpCount,
) -> Result<(FeatureMap<T>, PoolRecord)> {
    let n = assignment.num_points();
    if features.nrows() != n {
        return Err(shape_err(format!("pool got {} feature rows for {} points", features.nrows(), n)));
    }
    let c = features.ncols();
    let big_n = assignment.num_slices;
    let mut out = Array2::zeros((big_n, c));
    let mut argmax = Array2::from_elem((big_n, c), usize::MAX);
    let mut empty = vec![false; big_n];
    count.slice_touches += (2 * big_n * c) as u64;

    for (s, members) in assignment.members.iter().enumerate() {
        let Some((&first, rest)) = members.split_first() else {
            empty[s] = true;
            continue;
        };
        let mut best = out.row_mut(s);
        let mut arg = argmax.row_mut(s);
        best.assign(&features.row(first));
        arg.fill(first);
        for &j in rest {
            let row = features.row(j);
            for ch in 0..c {
                if row[ch] > best[ch] {
                    best[ch] = row[ch];
                    arg[ch] = j;
                }
            }
        }
        count.point_touches += (members.len() * c) as u64;
    }

    Ok((out, PoolRecord { argmax, empty_slice_mask: empty, num_points: n }))
}

/// Smallest gap between the largest and second-largest member value over every
/// slice and channel; slices with fewer than two members are skipped, as are
/// slice-channels whose maximum is not positive when `positive_max_only` is set.
///
/// Central differences through a max are only meaningful when this exceeds the
/// finite-difference step.
pub fn pool_tie_margin<T: Real>(features: ArrayView2<T>, assignment: &SliceAssignment, positive_max_only: bool) -> f64 {
    let mut margin = f64::INFINITY;
    for members in &assignment.members {
        if members.len() < 2 {
            continue;
        }
        for ch in 0..features.ncols() {
            let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &j in members {
                let v = features[[j, ch]].as_f64();
                if v > top {
                    second = top;
                    top = v;
                } else if v > second {
                    second = v;
                }
            }
            if positive_max_only && top <= 0.0 {
                continue;
            }
            margin = margin.min(top - second);
        }
    }
    margin
}

pub fn slice_pool_backward<T: Real>(grad_seq: ArrayView2<T>, record: &PoolRecord) -> Result<FeatureMap<T>> {
    let mut count = OpCount::default();
    slice_pool_backward_counted(grad_seq, record, &mut count)
}

/// Scatters each pooled gradient to the member that won the max.
pub fn slice_pool_backward_counted<T: Real>(
    grad_seq: ArrayView2<T>,
    record: &PoolRecord,
    count: &mut OpCount,
) -> Result<FeatureMap<T>> {
    if grad_seq.dim() != record.argmax.dim() {
        return Err(shape_err(format!(
            "pool backward got gradient {:?}, record {:?}",
            grad_seq.dim(),
            record.argmax.dim()
        )));
    }
    let c = grad_seq.ncols();
    let mut grad = Array2::zeros((record.num_points, c));
    count.point_touches += (record.num_points * c) as u64;
    for (s, is_empty) in record.empty_slice_mask.iter().enumerate() {
        if *is_empty {
            continue;
        }
        for ch in 0..c {
            grad[[record.argmax[[s, ch]], ch]] += grad_seq[[s, ch]];
        }
        count.slice_touches += c as u64;
    }
    Ok(grad)
}

pub fn slice_unpool_forward<T: Real>(seq: ArrayView2<T>, assignment: &SliceAssignment) -> Result<FeatureMap<T>> {
    let mut count = OpCount::default();
    slice_unpool_forward_counted(seq, assignment, &mut count)
}

/// Copies slice row `k_j` to every point `j`.
pub fn slice_unpool_forward_counted<T: Real>(
    seq: ArrayView2<T>,
    assignment: &SliceAssignment,
    count: &mut OpCount,
) -> Result<FeatureMap<T>> {
    if seq.nrows() != assignment.num_slices {
        return Err(shape_err(format!(
            "unpool got {} slice rows for {} slices",
            seq.nrows(),
            assignment.num_slices
        )));
    }
    let c = seq.ncols();
    let mut out = Array2::zeros((assignment.num_points(), c));
    for (j, &k) in assignment.slice_of_point.iter().enumerate() {
        out.row_mut(j).assign(&seq.row(k));
    }
    count.point_touches += (assignment.num_points() * c) as u64;
    Ok(out)
}

pub fn slice_unpool_backward<T: Real>(grad: ArrayView2<T>, assignment: &SliceAssignment) -> Result<FeatureMap<T>> {
    let mut count = OpCount::default();
    slice_unpool_backward_counted(grad, assignment, &mut count)
}

/// Sums member gradients into their slice row.
pub fn slice_unpool_backward_counted<T: Real>(
    grad: ArrayView2<T>,
    assignment: &SliceAssignment,
    count: &mut OpCount,
) -> Result<FeatureMap<T>> {
    if grad.nrows() != assignment.num_points() {
        return Err(shape_err(format!(
            "unpool backward got {} rows for {} points",
            grad.nrows(),
            assignment.num_points()
        )));
    }
    let c = grad.ncols();
    let mut out = Array2::zeros((assignment.num_slices, c));
    count.slice_touches += (assignment.num_slices * c) as u64;
    for (j, &k) in assignment.slice_of_point.iter().enumerate() {
        let mut row = out.row_mut(k);
        row += &grad.row(j);
    }
    count.point_touches += (assignment.num_points() * c) as u64;
    Ok(out)
}
