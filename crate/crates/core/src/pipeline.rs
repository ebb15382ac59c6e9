//! Scene → cube decomposition, fixed-count sampling, input features and vote merging.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RsnetError};
use crate::nn::{FeatureMap, Real};
use crate::pcio::LabeledCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// Cube-local xyz.
    Xyz3,
    /// Cube-local xyz, RGB, and xyz normalized by the scene bounding box.
    Full9,
}

impl FeatureMode {
    pub fn width(self) -> usize {
        match self {
            FeatureMode::Xyz3 => 3,
            FeatureMode::Full9 => 9,
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Xyz3 => "xyz3",
            FeatureMode::Full9 => "full9",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = RsnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xyz3" => Ok(FeatureMode::Xyz3),
            "full9" => Ok(FeatureMode::Full9),
            other => Err(RsnetError::Config(format!("unknown feature mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    pub block_size: f64,
    pub train_stride: f64,
    pub test_stride: f64,
    pub points_per_cube: usize,
    pub feature_mode: FeatureMode,
    /// Draw fresh cube samples every training epoch instead of fixing them once.
    pub resample_each_epoch: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            block_size: 1.0,
            train_stride: 1.0,
            test_stride: 1.0,
            points_per_cube: 4096,
            feature_mode: FeatureMode::Full9,
            resample_each_epoch: true,
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("block_size", self.block_size), ("train_stride", self.train_stride), ("test_stride", self.test_stride)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(RsnetError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.train_stride > self.block_size || self.test_stride > self.block_size {
            return Err(RsnetError::Config("strides larger than the block size leave points uncovered".into()));
        }
        if self.points_per_cube == 0 {
            return Err(RsnetError::Config("points_per_cube must be at least 1".into()));
        }
        Ok(())
    }
}

/// Point indices of one sliding-window cube (any z).
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub origin: [f64; 2],
    pub indices: Vec<usize>,
}

/// Number of window origins along one axis so the last window reaches past `span`.
fn window_count(span: f64, block: f64, stride: f64) -> usize {
    let mut count = if span < block { 1 } else { ((span - block) / stride).floor() as usize + 2 };
    while (count - 1) as f64 * stride + block <= span {
        count += 1;
    }
    count
}

/// Splits the scene on the xy plane with windows `[x0, x0+bs) × [y0, y0+bs)`
/// placed at `min + i·stride`. Empty windows are dropped. Every point is covered
/// as long as `stride <= block_size`.
pub fn split_cubes(cloud: &LabeledCloud, block_size: f64, stride: f64) -> Vec<Cube> {
    let b = cloud.bounds();
    let nx = window_count(b[0].1 - b[0].0, block_size, stride);
    let ny = window_count(b[1].1 - b[1].0, block_size, stride);
    let mut cubes: Vec<Cube> = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            cubes.push(Cube { origin: [b[0].0 + i as f64 * stride, b[1].0 + j as f64 * stride], indices: Vec::new() });
        }
    }
    let windows = |v: f64, lo: f64, n: usize| {
        let clamp = |k: f64| (k as isize).clamp(0, n as isize - 1) as usize;
        let first = clamp(((v - lo - block_size) / stride).floor());
        let last = clamp(((v - lo) / stride).floor() + 1.0);
        (first..=last).filter(move |&k| {
            let o = lo + k as f64 * stride;
            v >= o && v < o + block_size
        })
    };
    for p in 0..cloud.len() {
        let [x, y, _] = cloud.xyz(p);
        for i in windows(x, b[0].0, nx) {
            for j in windows(y, b[1].0, ny) {
                cubes[i * ny + j].indices.push(p);
            }
        }
    }
    cubes.retain(|c| !c.indices.is_empty());
    cubes
}

/// A fixed-size sample of one cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeSample {
    pub source_indices: Vec<usize>,
    pub origin: [f64; 2],
}

/// Uniform without replacement when the cube is large enough; otherwise every
/// point once plus uniform draws with replacement to fill up.
pub fn sample_fixed(cube: &Cube, points_per_cube: usize, rng: &mut impl Rng) -> Result<CubeSample> {
    let m = cube.indices.len();
    if m == 0 {
        return Err(RsnetError::EmptyCube);
    }
    let mut picked: Vec<usize> = if m >= points_per_cube {
        index::sample(rng, m, points_per_cube).into_iter().map(|k| cube.indices[k]).collect()
    } else {
        let mut all = cube.indices.clone();
        all.extend((0..points_per_cube - m).map(|_| cube.indices[rng.random_range(0..m)]));
        all.shuffle(rng);
        all
    };
    picked.shrink_to_fit();
    Ok(CubeSample { source_indices: picked, origin: cube.origin })
}

/// Seeded variant of [`sample_fixed`].
pub fn sample_fixed_seeded(cube: &Cube, points_per_cube: usize, seed: u64) -> Result<CubeSample> {
    sample_fixed(cube, points_per_cube, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Samples that together contain every point of the cube at least once: a
/// random permutation cut into chunks, the last one topped up by resampling.
pub fn sample_covering(cube: &Cube, points_per_cube: usize, rng: &mut impl Rng) -> Result<Vec<CubeSample>> {
    if cube.indices.is_empty() {
        return Err(RsnetError::EmptyCube);
    }
    let mut order = cube.indices.clone();
    order.shuffle(rng);
    let mut out = Vec::new();
    for chunk in order.chunks(points_per_cube) {
        let sub = Cube { origin: cube.origin, indices: chunk.to_vec() };
        let sample = if chunk.len() == points_per_cube {
            CubeSample { source_indices: chunk.to_vec(), origin: cube.origin }
        } else {
            sample_fixed(&sub, points_per_cube, rng)?
        };
        out.push(sample);
    }
    Ok(out)
}

/// Network inputs for one sample: features and raw coordinates (used for slicing).
pub fn make_features<T: Real>(
    sample: &CubeSample,
    cloud: &LabeledCloud,
    mode: FeatureMode,
) -> Result<(FeatureMap<T>, Array2<f64>)> {
    if mode == FeatureMode::Full9 && cloud.d_raw() < 6 {
        return Err(RsnetError::Config("full9 features need RGB columns in the cloud".into()));
    }
    let n = sample.source_indices.len();
    let mut coords = Array2::zeros((n, 3));
    for (r, &i) in sample.source_indices.iter().enumerate() {
        for a in 0..3 {
            coords[[r, a]] = cloud.points[[i, a]];
        }
    }
    let z_min = coords.column(2).iter().copied().fold(f64::INFINITY, f64::min);
    let local = [sample.origin[0], sample.origin[1], z_min];
    let bounds = cloud.bounds();
    let mut feats = Array2::zeros((n, mode.width()));
    for (r, &i) in sample.source_indices.iter().enumerate() {
        for a in 0..3 {
            feats[[r, a]] = T::of_f64(coords[[r, a]] - local[a]);
        }
        if mode == FeatureMode::Full9 {
            for c in 0..3 {
                feats[[r, 3 + c]] = T::of_f64(cloud.points[[i, 3 + c]]);
            }
            for a in 0..3 {
                let (lo, hi) = bounds[a];
                let span = hi - lo;
                let v = if span > 0.0 { (coords[[r, a]] - lo) / span } else { 0.0 };
                feats[[r, 6 + a]] = T::of_f64(v);
            }
        }
    }
    Ok((feats, coords))
}

/// Per-point vote counters for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeAccumulator {
    num_classes: usize,
    votes: Vec<u32>,
}

impl MergeAccumulator {
    pub fn new(num_points: usize, num_classes: usize) -> Self {
        Self { num_classes, votes: vec![0; num_points * num_classes] }
    }

    pub fn num_points(&self) -> usize {
        self.votes.len() / self.num_classes.max(1)
    }

    pub fn add_vote(&mut self, point: usize, class: usize) {
        assert!(class < self.num_classes, "class {class} out of range");
        self.votes[point * self.num_classes + class] += 1;
    }

    /// Adds one vote per sampled point. Duplicated points vote once per copy.
    pub fn add_sample(&mut self, sample: &CubeSample, predictions: &[usize]) {
        for (&p, &c) in sample.source_indices.iter().zip(predictions) {
            self.add_vote(p, c);
        }
    }

    pub fn votes(&self, point: usize) -> &[u32] {
        &self.votes[point * self.num_classes..(point + 1) * self.num_classes]
    }

    pub fn total_votes(&self, point: usize) -> u32 {
        self.votes(point).iter().sum()
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.votes.len(), other.votes.len());
        for (a, b) in self.votes.iter_mut().zip(&other.votes) {
            *a += b;
        }
    }
}

/// Majority vote per point; ties go to the smallest class index.
pub fn merge_votes(acc: &MergeAccumulator) -> Result<Vec<usize>> {
    (0..acc.num_points())
        .map(|p| {
            let v = acc.votes(p);
            let mut best = 0;
            for (k, &count) in v.iter().enumerate() {
                if count > v[best] {
                    best = k;
                }
            }
            if v[best] == 0 {
                Err(RsnetError::Coverage(p))
            } else {
                Ok(best)
            }
        })
        .collect()
}
