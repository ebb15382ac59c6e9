//! Labeled point clouds, the RSNPC text format and a synthetic indoor-scene generator.
//!
//! RSNPC version 1:
//!
//! ```text
//! RSNPC 1 <n> <d_raw> <has_labels:0|1>
//! <d_raw reals> [<label>]      # n rows
//! ```
//!
//! Lines starting with `#` are comments. The writer emits one structured comment,
//! `# num_classes <K>`, which the reader uses to recover the class count; without
//! it the count is inferred as `max label + 1`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, RsnetError};

pub const MAGIC: &str = "RSNPC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    /// `n × d_raw`: x, y, z in meters, then RGB in `[0, 1]` when `d_raw == 6`.
    pub points: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub num_classes: usize,
}

impl LabeledCloud {
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>, num_classes: usize) -> Result<Self> {
        let cloud = Self { points, labels, num_classes };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn d_raw(&self) -> usize {
        self.points.ncols()
    }

    pub fn xyz(&self, i: usize) -> [f64; 3] {
        [self.points[[i, 0]], self.points[[i, 1]], self.points[[i, 2]]]
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.nrows() == 0 {
            return Err(RsnetError::Validation("cloud has no points".into()));
        }
        if !matches!(self.points.ncols(), 3 | 6) {
            return Err(RsnetError::Validation(format!("d_raw must be 3 or 6, got {}", self.points.ncols())));
        }
        if let Some(idx) = self.points.iter().position(|v| !v.is_finite()) {
            return Err(RsnetError::Validation(format!("non-finite value in row {}", idx / self.points.ncols())));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.points.nrows() {
                return Err(RsnetError::Validation(format!(
                    "{} labels for {} points",
                    labels.len(),
                    self.points.nrows()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= self.num_classes) {
                return Err(RsnetError::Validation(format!(
                    "label {bad} out of range for {} classes",
                    self.num_classes
                )));
            }
        }
        Ok(())
    }

    /// Per-axis `(min, max)` of the coordinates.
    pub fn bounds(&self) -> [(f64, f64); 3] {
        let mut b = [(f64::INFINITY, f64::NEG_INFINITY); 3];
        for row in self.points.rows() {
            for (a, bound) in b.iter_mut().enumerate() {
                bound.0 = bound.0.min(row[a]);
                bound.1 = bound.1.max(row[a]);
            }
        }
        b
    }

    pub fn label_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_classes];
        for &l in self.labels.iter().flatten() {
            counts[l] += 1;
        }
        counts
    }
}

/// Formats a real with 9 significant digits, without trailing zeros.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn write_row(out: &mut impl Write, row: ArrayView1<f64>, label: Option<usize>) -> std::io::Result<()> {
    let mut line = row.iter().map(|&v| format_real(v)).collect::<Vec<_>>().join(" ");
    if let Some(l) = label {
        line.push(' ');
        line.push_str(&l.to_string());
    }
    writeln!(out, "{line}")
}

pub fn write_cloud(cloud: &LabeledCloud, path: impl AsRef<Path>) -> Result<()> {
    cloud.validate()?;
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    let has_labels = cloud.labels.is_some() as u8;
    writeln!(out, "{MAGIC} {VERSION} {} {} {has_labels}", cloud.len(), cloud.d_raw())?;
    writeln!(out, "# num_classes {}", cloud.num_classes)?;
    for (i, row) in cloud.points.rows().into_iter().enumerate() {
        write_row(&mut out, row, cloud.labels.as_ref().map(|l| l[i]))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    let text = fs::read_to_string(path)?;
    parse_cloud(&text)
}

fn parse_err(line: usize, msg: impl Into<String>) -> RsnetError {
    RsnetError::Parse { line, msg: msg.into() }
}

pub fn parse_cloud(text: &str) -> Result<LabeledCloud> {
    let mut header: Option<(usize, usize, bool)> = None;
    let mut declared_classes: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    let mut last_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            if parts.next() == Some("num_classes") {
                let k = parts
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(lineno, "malformed num_classes comment"))?;
                declared_classes = Some(k);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let Some((n, d, has_labels)) = header else {
            header = Some(parse_header(line, lineno)?);
            continue;
        };
        if rows == n {
            return Err(parse_err(lineno, format!("more than the declared {n} rows")));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let expected = d + has_labels as usize;
        if tokens.len() != expected {
            return Err(parse_err(lineno, format!("expected {expected} fields, found {}", tokens.len())));
        }
        for tok in &tokens[..d] {
            let v: f64 = tok.parse().map_err(|_| parse_err(lineno, format!("bad real {tok:?}")))?;
            if !v.is_finite() {
                return Err(RsnetError::Validation(format!("non-finite value on line {lineno}")));
            }
            values.push(v);
        }
        if has_labels {
            let tok = tokens[d];
            let l: usize = tok.parse().map_err(|_| parse_err(lineno, format!("bad label {tok:?}")))?;
            labels.push(l);
        }
        rows += 1;
    }

    let (n, d, has_labels) = header.ok_or_else(|| parse_err(last_line.max(1), "missing RSNPC header"))?;
    if rows != n {
        return Err(parse_err(last_line, format!("header declares {n} rows, found {rows}")));
    }
    let points = Array2::from_shape_vec((n, d), values).expect("row lengths checked");
    let inferred = labels.iter().max().map_or(0, |m| m + 1);
    let num_classes = declared_classes.unwrap_or(inferred);
    LabeledCloud::new(points, has_labels.then_some(labels), num_classes)
}

fn parse_header(line: &str, lineno: usize) -> Result<(usize, usize, bool)> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != MAGIC {
        return Err(parse_err(lineno, format!("expected `{MAGIC} 1 <n> <d_raw> <0|1>`, got {line:?}")));
    }
    if tokens[1] != VERSION.to_string() {
        return Err(parse_err(lineno, format!("unsupported RSNPC version {}", tokens[1])));
    }
    let n: usize = tokens[2].parse().map_err(|_| parse_err(lineno, "bad point count"))?;
    let d: usize = tokens[3].parse().map_err(|_| parse_err(lineno, "bad d_raw"))?;
    let has_labels = match tokens[4] {
        "0" => false,
        "1" => true,
        other => return Err(parse_err(lineno, format!("label flag must be 0 or 1, got {other:?}"))),
    };
    if n == 0 {
        return Err(parse_err(lineno, "point count must be at least 1"));
    }
    if !matches!(d, 3 | 6) {
        return Err(parse_err(lineno, format!("d_raw must be 3 or 6, got {d}")));
    }
    Ok((n, d, has_labels))
}

/// Standard deviation of the per-coordinate jitter, in meters.
pub const JITTER_SIGMA: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Room shell plus tables, chairs and bookcases.
    Standard,
    /// Thin slabs whose class depends only on whether a cap sits above them in
    /// the same 1 m cell; see [`generate_scene`].
    Context,
}

impl SceneKind {
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            SceneKind::Standard => &["ceiling", "floor", "wall", "table", "chair", "bookcase"],
            SceneKind::Context => &["floor", "covered_slab", "open_slab", "cap"],
        }
    }

    pub fn class_index(self, name: &str) -> Option<usize> {
        self.class_names().iter().position(|&c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Room spans along x, y, z in meters.
    pub extents: [f64; 3],
    pub num_points: usize,
    pub floor: bool,
    pub ceiling: bool,
    pub walls: bool,
    pub tables: usize,
    pub chairs: usize,
    pub bookcases: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn standard(seed: u64) -> Self {
        Self {
            kind: SceneKind::Standard,
            extents: [4.0, 4.0, 3.0],
            num_points: 20_000,
            floor: true,
            ceiling: true,
            walls: true,
            tables: 2,
            chairs: 4,
            bookcases: 2,
            seed,
        }
    }

    pub fn context(seed: u64) -> Self {
        Self {
            kind: SceneKind::Context,
            extents: [3.0, 3.0, 2.0],
            num_points: 12_000,
            floor: true,
            ceiling: false,
            walls: false,
            tables: 0,
            chairs: 0,
            bookcases: 0,
            seed,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.kind.class_names().len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.extents.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(RsnetError::Config(format!("room extents must be positive: {:?}", self.extents)));
        }
        if self.num_points == 0 {
            return Err(RsnetError::Config("scene needs at least one point".into()));
        }
        Ok(())
    }
}

/// An axis-aligned rectangle `origin + s·u + t·v`, `s, t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub origin: [f64; 3],
    pub u: [f64; 3],
    pub v: [f64; 3],
}

impl Face {
    fn area(&self) -> f64 {
        let n = [
            self.u[1] * self.v[2] - self.u[2] * self.v[1],
            self.u[2] * self.v[0] - self.u[0] * self.v[2],
            self.u[0] * self.v[1] - self.u[1] * self.v[0],
        ];
        (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    fn point(&self, s: f64, t: f64) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + s * self.u[a] + t * self.v[a])
    }
}

/// All faces of the box `[lo, hi]`; the bottom face is skipped when `open_bottom`.
fn box_faces(lo: [f64; 3], hi: [f64; 3], open_bottom: bool) -> Vec<Face> {
    let d = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let ex = [d[0], 0.0, 0.0];
    let ey = [0.0, d[1], 0.0];
    let ez = [0.0, 0.0, d[2]];
    let mut faces = vec![
        Face { origin: [lo[0], lo[1], hi[2]], u: ex, v: ey },
        Face { origin: lo, u: ex, v: ez },
        Face { origin: [lo[0], hi[1], lo[2]], u: ex, v: ez },
        Face { origin: lo, u: ey, v: ez },
        Face { origin: [hi[0], lo[1], lo[2]], u: ey, v: ez },
    ];
    if !open_bottom {
        faces.push(Face { origin: lo, u: ex, v: ey });
    }
    faces
}

/// One generating object: everything sampled from its faces gets its class.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub class: usize,
    pub faces: Vec<Face>,
    pub color: [f64; 3],
    /// Relative sampling density per square meter.
    pub density: f64,
}

fn jitter_color(base: [f64; 3], spread: f64, rng: &mut impl Rng) -> [f64; 3] {
    base.map(|c| (c + rng.random_range(-spread..=spread)).clamp(0.0, 1.0))
}

/// Rejection-samples an xy footprint that does not overlap the ones already placed.
fn place_footprint(
    size: [f64; 2],
    room: [f64; 3],
    margin: f64,
    taken: &mut Vec<[f64; 4]>,
    rng: &mut impl Rng,
) -> [f64; 2] {
    let span = |a: usize| (room[a] - size[a] - 2.0 * margin).max(0.0);
    let pick = |rng: &mut dyn rand::RngCore| {
        [margin + rng.random_range(0.0..=span(0)), margin + rng.random_range(0.0..=span(1))]
    };
    let mut best = pick(rng);
    for _ in 0..64 {
        let fp = [best[0], best[1], best[0] + size[0], best[1] + size[1]];
        let clear = taken.iter().all(|t| fp[2] <= t[0] || t[2] <= fp[0] || fp[3] <= t[1] || t[3] <= fp[1]);
        if clear {
            break;
        }
        best = pick(rng);
    }
    taken.push([best[0], best[1], best[0] + size[0], best[1] + size[1]]);
    best
}

fn standard_primitives(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Primitive> {
    let [rx, ry, rz] = spec.extents;
    let k = |name| SceneKind::Standard.class_index(name).expect("standard vocabulary");
    let mut prims = Vec::new();
    if spec.ceiling {
        prims.push(Primitive {
            class: k("ceiling"),
            faces: vec![Face { origin: [0.0, 0.0, rz], u: [rx, 0.0, 0.0], v: [0.0, ry, 0.0] }],
            color: jitter_color([0.85, 0.85, 0.8], 0.05, rng),
            density: 1.0,
        });
    }
    if spec.floor {
        prims.push(Primitive {
            class: k("floor"),
            faces: vec![Face { origin: [0.0, 0.0, 0.0], u: [rx, 0.0, 0.0], v: [0.0, ry, 0.0] }],
            color: jitter_color([0.45, 0.4, 0.35], 0.05, rng),
            density: 1.0,
        });
    }
    if spec.walls {
        let color = jitter_color([0.75, 0.75, 0.7], 0.05, rng);
        for face in [
            Face { origin: [0.0, 0.0, 0.0], u: [rx, 0.0, 0.0], v: [0.0, 0.0, rz] },
            Face { origin: [0.0, ry, 0.0], u: [rx, 0.0, 0.0], v: [0.0, 0.0, rz] },
            Face { origin: [0.0, 0.0, 0.0], u: [0.0, ry, 0.0], v: [0.0, 0.0, rz] },
            Face { origin: [rx, 0.0, 0.0], u: [0.0, ry, 0.0], v: [0.0, 0.0, rz] },
        ] {
            prims.push(Primitive { class: k("wall"), faces: vec![face], color, density: 1.0 });
        }
    }

    let mut taken = Vec::new();
    let object_density = 2.0;
    for _ in 0..spec.tables {
        let size = [rng.random_range(1.0..1.4), rng.random_range(0.6..0.9)];
        let height = rng.random_range(0.7..0.8);
        let [x, y] = place_footprint(size, spec.extents, 0.2, &mut taken, rng);
        let mut faces = box_faces([x, y, height - 0.04], [x + size[0], y + size[1], height], false);
        for (lx, ly) in [(x, y), (x + size[0] - 0.05, y), (x, y + size[1] - 0.05), (x + size[0] - 0.05, y + size[1] - 0.05)] {
            faces.extend(box_faces([lx, ly, 0.0], [lx + 0.05, ly + 0.05, height - 0.04], true));
        }
        prims.push(Primitive { class: k("table"), faces, color: jitter_color([0.6, 0.4, 0.2], 0.08, rng), density: object_density });
    }
    for _ in 0..spec.chairs {
        let side = rng.random_range(0.4..0.5);
        let seat = rng.random_range(0.42..0.48);
        let [x, y] = place_footprint([side, side], spec.extents, 0.2, &mut taken, rng);
        let mut faces = box_faces([x, y, seat - 0.04], [x + side, y + side, seat], false);
        faces.extend(box_faces([x, y, seat], [x + side, y + 0.05, seat + rng.random_range(0.4..0.5)], true));
        for (lx, ly) in [(x, y), (x + side - 0.04, y), (x, y + side - 0.04), (x + side - 0.04, y + side - 0.04)] {
            faces.extend(box_faces([lx, ly, 0.0], [lx + 0.04, ly + 0.04, seat - 0.04], true));
        }
        prims.push(Primitive { class: k("chair"), faces, color: jitter_color([0.25, 0.5, 0.3], 0.1, rng), density: object_density });
    }
    for _ in 0..spec.bookcases {
        let size = [rng.random_range(0.8..1.0), rng.random_range(0.3..0.4)];
        let height = rng.random_range(1.6..2.0);
        let [x, y] = place_footprint(size, spec.extents, 0.05, &mut taken, rng);
        let faces = box_faces([x, y, 0.0], [x + size[0], y + size[1], height], true);
        prims.push(Primitive { class: k("bookcase"), faces, color: jitter_color([0.35, 0.25, 0.5], 0.1, rng), density: object_density });
    }
    prims
}

/// Context scenes: the room is tiled by 1 m cells, each holding one thin slab in
/// a random quadrant. Half of the slabs get a cap: a second slab in the
/// diagonally opposite quadrant, 0.35–0.7 m higher. Capped slabs are
/// `covered_slab`, the rest `open_slab`; both draw position, height and color
/// from the same distributions. Because the cap shares neither x nor y extent
/// with its slab, no single x, y or z slice contains both.
fn context_primitives(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Primitive> {
    let [rx, ry, _] = spec.extents;
    let k = |name| SceneKind::Context.class_index(name).expect("context vocabulary");
    let mut prims = Vec::new();
    if spec.floor {
        prims.push(Primitive {
            class: k("floor"),
            faces: vec![Face { origin: [0.0, 0.0, 0.0], u: [rx, 0.0, 0.0], v: [0.0, ry, 0.0] }],
            color: [0.5, 0.5, 0.5],
            density: 0.5,
        });
    }
    let side = 0.3;
    let quadrant_origin = |cell: [f64; 2], q: [usize; 2], rng: &mut ChaCha8Rng| {
        let base = |a: usize| cell[a] + 0.08 + q[a] as f64 * 0.5;
        [base(0) + rng.random_range(0.0..0.04), base(1) + rng.random_range(0.0..0.04)]
    };
    let slab = |o: [f64; 2], z: f64| Face { origin: [o[0], o[1], z], u: [side, 0.0, 0.0], v: [0.0, side, 0.0] };
    let cells_x = rx.floor().max(1.0) as usize;
    let cells_y = ry.floor().max(1.0) as usize;
    for cx in 0..cells_x {
        for cy in 0..cells_y {
            let cell = [cx as f64, cy as f64];
            let q = [rng.random_range(0..2usize), rng.random_range(0..2usize)];
            let height = rng.random_range(0.25..0.9);
            let covered = rng.random_bool(0.5);
            let color = jitter_color([0.3, 0.55, 0.75], 0.08, rng);
            let o = quadrant_origin(cell, q, rng);
            let class = if covered { k("covered_slab") } else { k("open_slab") };
            prims.push(Primitive { class, faces: vec![slab(o, height)], color, density: 4.0 });
            if covered {
                let oq = quadrant_origin(cell, [1 - q[0], 1 - q[1]], rng);
                let cap_z = height + rng.random_range(0.35..0.7);
                let cap_color = jitter_color([0.8, 0.3, 0.3], 0.08, rng);
                prims.push(Primitive { class: k("cap"), faces: vec![slab(oq, cap_z)], color: cap_color, density: 4.0 });
            }
        }
    }
    prims
}

/// Gaussian sample truncated to ±3σ.
fn truncated_jitter(rng: &mut impl Rng) -> f64 {
    loop {
        let e: f64 = rng.sample(StandardNormal);
        if e.abs() <= 3.0 {
            return e * JITTER_SIGMA;
        }
    }
}

/// Generated cloud together with the primitive that produced each point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub cloud: LabeledCloud,
    pub primitives: Vec<Primitive>,
    pub provenance: Vec<usize>,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<LabeledCloud> {
    Ok(generate_scene_with_provenance(spec)?.cloud)
}

/// Samples `num_points` points from the scene's primitives, proportionally to
/// face area times primitive density, with ±3σ-truncated Gaussian jitter
/// (σ = 5 mm) on every coordinate and per-point color noise.
pub fn generate_scene_with_provenance(spec: &SceneSpec) -> Result<GeneratedScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let primitives = match spec.kind {
        SceneKind::Standard => standard_primitives(spec, &mut rng),
        SceneKind::Context => context_primitives(spec, &mut rng),
    };
    if primitives.is_empty() {
        return Err(RsnetError::EmptyScene);
    }
    let mut face_owner = Vec::new();
    let mut faces = Vec::new();
    let mut weights = Vec::new();
    for (pi, p) in primitives.iter().enumerate() {
        for f in &p.faces {
            face_owner.push(pi);
            faces.push(*f);
            weights.push(f.area() * p.density);
        }
    }
    let picker = WeightedIndex::new(&weights).map_err(|_| RsnetError::EmptyScene)?;

    let n = spec.num_points;
    let mut points = Array2::zeros((n, 6));
    let mut labels = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for i in 0..n {
        let fi = picker.sample(&mut rng);
        let owner = face_owner[fi];
        let p = faces[fi].point(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        for a in 0..3 {
            points[[i, a]] = p[a] + truncated_jitter(&mut rng);
        }
        for c in 0..3 {
            let noisy = primitives[owner].color[c] + rng.random_range(-0.03..=0.03);
            points[[i, 3 + c]] = noisy.clamp(0.0, 1.0);
        }
        labels.push(primitives[owner].class);
        provenance.push(owner);
    }
    let cloud = LabeledCloud::new(points, Some(labels), spec.num_classes())?;
    Ok(GeneratedScene { cloud, primitives, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn header_is_self_describing() {
        let c = parse_cloud("RSNPC 1 2 3 1\n0 0 0 1\n1 2 3 0\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.d_raw(), 3);
        assert_eq!(c.labels, Some(vec![1, 0]));
        assert_eq!(c.num_classes, 2);
    }

    #[test]
    fn missing_rows_are_parse_error() {
        let err = parse_cloud("RSNPC 1 5 3 0\n0 0 0\n1 1 1\n2 2 2\n3 3 3\n").unwrap_err();
        assert!(matches!(err, RsnetError::Parse { .. }), "{err}");
    }

    #[test]
    fn malformed_header_reports_line() {
        let err = parse_cloud("# leading comment\nRSNPC one 2 3 1\n").unwrap_err();
        assert!(matches!(err, RsnetError::Parse { line: 2, .. }), "{err}");
        let err = parse_cloud("PLY 1 2 3 1\n").unwrap_err();
        assert!(matches!(err, RsnetError::Parse { line: 1, .. }));
    }

    #[test]
    fn out_of_range_label_is_validation_error() {
        let err = parse_cloud("RSNPC 1 1 3 1\n# num_classes 2\n0 0 0 5\n").unwrap_err();
        assert!(matches!(err, RsnetError::Validation(_)), "{err}");
    }

    #[test]
    fn non_finite_is_validation_error() {
        let err = parse_cloud("RSNPC 1 1 3 0\n0 NaN 0\n").unwrap_err();
        assert!(matches!(err, RsnetError::Validation(_)), "{err}");
        let err = parse_cloud("RSNPC 1 1 3 0\ninf 0 0\n").unwrap_err();
        assert!(matches!(err, RsnetError::Validation(_)), "{err}");
    }

    #[test]
    fn origin_point_serializes_plainly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.pts");
        let cloud = LabeledCloud::new(array![[0.0, 0.0, 0.0]], Some(vec![0]), 1).unwrap();
        write_cloud(&cloud, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, vec!["RSNPC 1 1 3 1", "0 0 0 0"]);
        assert_eq!(read_cloud(&path).unwrap(), cloud);
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_real(1.234567891234), "1.23456789");
        assert_eq!(format_real(-0.5), "-0.5");
        assert_eq!(format_real(-0.0), "0");
        assert_eq!(format_real(1e-12), "0.000000000001");
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let cloud = LabeledCloud::new(array![[0.0, 0.0, 0.0]], None, 0).unwrap();
        let err = write_cloud(&cloud, "/nonexistent-dir/x/y.pts").unwrap_err();
        assert!(matches!(err, RsnetError::Io(_)));
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = SceneSpec { num_points: 3000, ..SceneSpec::standard(7) };
        assert_eq!(generate_scene(&spec).unwrap(), generate_scene(&spec).unwrap());
        let other = SceneSpec { seed: 8, ..spec };
        assert_ne!(generate_scene(&spec).unwrap(), generate_scene(&other).unwrap());
    }

    #[test]
    fn floor_only_scene() {
        let spec = SceneSpec {
            ceiling: false,
            walls: false,
            tables: 0,
            chairs: 0,
            bookcases: 0,
            num_points: 5000,
            ..SceneSpec::standard(1)
        };
        let cloud = generate_scene(&spec).unwrap();
        let floor = SceneKind::Standard.class_index("floor").unwrap();
        assert!(cloud.labels.as_ref().unwrap().iter().all(|&l| l == floor));
        let guard = 1.0;
        assert!(cloud.points.column(2).iter().all(|z| z.abs() <= 3.0 * JITTER_SIGMA * guard));
    }

    #[test]
    fn empty_spec_is_rejected() {
        let spec = SceneSpec {
            floor: false,
            ceiling: false,
            walls: false,
            tables: 0,
            chairs: 0,
            bookcases: 0,
            ..SceneSpec::standard(1)
        };
        assert!(matches!(generate_scene(&spec), Err(RsnetError::EmptyScene)));
    }

    #[test]
    fn every_class_is_populated() {
        let spec = SceneSpec { num_points: 10_000, ..SceneSpec::standard(3) };
        let counts = generate_scene(&spec).unwrap().label_counts();
        assert_eq!(counts.len(), 6);
        assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
    }

    #[test]
    fn labels_follow_provenance() {
        for spec in [SceneSpec::standard(11), SceneSpec::context(11)] {
            let g = generate_scene_with_provenance(&spec).unwrap();
            let labels = g.cloud.labels.as_ref().unwrap();
            for (l, &p) in labels.iter().zip(&g.provenance) {
                assert_eq!(*l, g.primitives[p].class);
            }
        }
    }

    #[test]
    fn context_caps_never_share_a_slice_with_their_slab() {
        let g = generate_scene_with_provenance(&SceneSpec::context(5)).unwrap();
        let covered = SceneKind::Context.class_index("covered_slab").unwrap();
        let cap = SceneKind::Context.class_index("cap").unwrap();
        let slabs: Vec<_> = g.primitives.iter().filter(|p| p.class == covered).collect();
        let caps: Vec<_> = g.primitives.iter().filter(|p| p.class == cap).collect();
        assert_eq!(slabs.len(), caps.len());
        for (s, c) in slabs.iter().zip(&caps) {
            let (sf, cf) = (s.faces[0], c.faces[0]);
            for a in 0..2 {
                let gap = (sf.origin[a] - cf.origin[a]).abs() - 0.3;
                assert!(gap > 0.1, "axis {a} gap {gap}");
            }
            assert!(cf.origin[2] - sf.origin[2] >= 0.35);
        }
    }
}
