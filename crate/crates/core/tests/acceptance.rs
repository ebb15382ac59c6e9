//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 2 9`.

mod common;

use std::process::Command;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsnet::bench::{run_bench, BenchConfig};
use rsnet::cli::{run_sweep, sweep_cells, GridArg};
use rsnet::gradcheck_suite::{run_suite, SuiteConfig, CASES};
use rsnet::metrics::ConfusionMatrix;
use rsnet::model::{build_rsnet, rsnet_forward, RsnetConfig};
use rsnet::pcio::{generate_scene, LabeledCloud, SceneKind, SceneSpec};
use rsnet::pipeline::FeatureMode;
use rsnet::slicing::{
    assign_slices, slice_pool_backward, slice_pool_forward, slice_unpool_backward, slice_unpool_forward, SliceAxis,
};
use rsnet::train::{evaluate, load_checkpoint, save_checkpoint, TrainConfig, Trainer};

// Tolerances and thresholds.
const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET_S: f64 = 300.0;
const PERM_TOL: f64 = 1e-9;
const DESK_TRAIN_OA: f64 = 0.97;
const DESK_TEST_MIOU: f64 = 0.85;
const DESK_BUDGET_S: f64 = 30.0 * 60.0;
const CTX_FULL_MIN: f64 = 0.90;
const CTX_ABLATED_MAX: f64 = 0.60;
const CTX_GAP_MIN: f64 = 0.25;
const METRIC_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn criterion_1() -> Outcome {
    let mut cfg = SuiteConfig::default();
    cfg.check.max_coords_per_block = usize::MAX;
    let start = Instant::now();
    let report = run_suite(&cfg);
    let secs = start.elapsed().as_secs_f64();
    let worst = report.cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let ok = report.pass()
        && report.cases.len() == CASES.len()
        && report.cases.iter().all(|c| c.seeds == 20 && c.max_rel_error <= GRAD_TOL)
        && cfg.check.eps == 1e-5
        && secs <= GRAD_BUDGET_S;
    if !ok {
        print!("{}", report.to_text());
    }
    check(ok, format!("{} cases x 20 seeds, worst rel err {worst:.2e}, {secs:.1}s", report.cases.len()))
}

/// Slice index recomputed from scratch for one coordinate.
fn oracle_slice(v: f64, lo: f64, r: f64, n_slices: usize) -> usize {
    let q = (v - lo) / r;
    let q = if (q - q.round()).abs() <= 1e-9 * q.round().abs().max(1.0) { q.round() } else { q };
    (q.floor().max(0.0) as usize).min(n_slices - 1)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = Vec::new();
    for cloud in 0..100 {
        let n = rng.random_range(1..=2048);
        let c = rng.random_range(1..=16);
        let r = [0.01, 0.02, 0.05, 0.08, 0.13][rng.random_range(0..5)];
        // clustered points leave empty slices; coarse feature values force ties
        let centers: Vec<[f64; 3]> = (0..rng.random_range(1..5)).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let coords = Array2::from_shape_fn((n, 3), |(i, a)| centers[i % centers.len()][a] + rng.random_range(-0.05..0.05));
        let levels = if cloud % 2 == 0 { 4 } else { 1 << 20 };
        let feats = Array2::from_shape_simple_fn((n, c), || rng.random_range(0..levels) as f64 / levels as f64 - 0.5);
        for axis in SliceAxis::ALL {
            let a = assign_slices(coords.view(), axis, r).unwrap();
            let col = coords.column(axis.index());
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let q = (hi - lo) / r;
            let q = if (q - q.round()).abs() <= 1e-9 * q.round().abs().max(1.0) { q.round() } else { q };
            let big_n = (q.ceil() as usize).max(1);
            let slice: Vec<usize> = col.iter().map(|&v| oracle_slice(v, lo, r, big_n)).collect();
            if a.num_slices != big_n || a.slice_of_point != slice {
                mismatches.push(format!("cloud {cloud} {axis}: assignment"));
                continue;
            }

            let mut pooled = Array2::<f64>::zeros((big_n, c));
            let mut arg = vec![vec![None::<usize>; c]; big_n];
            for s in 0..big_n {
                for ch in 0..c {
                    for j in 0..n {
                        if slice[j] == s && arg[s][ch].is_none_or(|b| feats[[j, ch]] > feats[[b, ch]]) {
                            arg[s][ch] = Some(j);
                        }
                    }
                    pooled[[s, ch]] = arg[s][ch].map_or(0.0, |j| feats[[j, ch]]);
                }
            }
            let (got_pool, record) = slice_pool_forward(feats.view(), &a).unwrap();

            let unpooled = Array2::from_shape_fn((n, c), |(j, ch)| pooled[[slice[j], ch]]);
            let got_unpool = slice_unpool_forward(pooled.view(), &a).unwrap();

            let g_seq = Array2::from_shape_simple_fn((big_n, c), || rng.random_range(-1.0..1.0));
            let mut pool_back = Array2::<f64>::zeros((n, c));
            for s in 0..big_n {
                for ch in 0..c {
                    if let Some(j) = arg[s][ch] {
                        pool_back[[j, ch]] += g_seq[[s, ch]];
                    }
                }
            }
            let got_pool_back = slice_pool_backward(g_seq.view(), &record).unwrap();

            let g_pts = Array2::from_shape_simple_fn((n, c), || rng.random_range(-1.0..1.0));
            let mut unpool_back = Array2::<f64>::zeros((big_n, c));
            for s in 0..big_n {
                for j in 0..n {
                    if slice[j] == s {
                        for ch in 0..c {
                            unpool_back[[s, ch]] += g_pts[[j, ch]];
                        }
                    }
                }
            }
            let got_unpool_back = slice_unpool_backward(g_pts.view(), &a).unwrap();

            for (what, same) in [
                ("pool", got_pool == pooled),
                ("unpool", got_unpool == unpooled),
                ("pool backward", got_pool_back == pool_back),
                ("unpool backward", got_unpool_back == unpool_back),
            ] {
                if !same {
                    mismatches.push(format!("cloud {cloud} {axis}: {what}"));
                }
            }
        }
    }
    check(mismatches.is_empty(), if mismatches.is_empty() { "100 clouds x 3 axes, exact".into() } else { mismatches.join("; ") })
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = Vec::new();
    for (span, want) in [(1.0, 50usize), (3.0, 150)] {
        for offset in [0.0, 0.37, -12.5, 101.03] {
            let mut coords = Array2::from_shape_simple_fn((500, 3), || offset + rng.random_range(0.0..span));
            coords.row_mut(0).fill(offset);
            coords.row_mut(1).fill(offset + span);
            let a = assign_slices(coords.view(), SliceAxis::Z, 0.02).unwrap();
            seen.push((span, offset, a.num_slices, want));
        }
    }
    let bad: Vec<_> = seen.iter().filter(|(_, _, got, want)| got != want).collect();
    check(bad.is_empty(), if bad.is_empty() { "1 m -> 50, 3 m -> 150 at r = 2 cm".into() } else { format!("{bad:?}") })
}

fn criterion_4() -> Outcome {
    let cfg = BenchConfig { channels: 16, repeats: 1, ..BenchConfig::default() };
    let rows = run_bench(&cfg).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let per_n: Vec<u64> = cfg
        .ns
        .iter()
        .map(|&n| {
            let counts: Vec<u64> = rows.iter().filter(|r| r.n == n).map(|r| r.ops.point_touches).collect();
            if counts.iter().any(|&c| c != counts[0]) {
                problems.push(format!("n={n}: counts vary with r {counts:?}"));
            }
            counts[0]
        })
        .collect();
    for w in per_n.windows(2) {
        if w[1] != 2 * w[0] {
            problems.push(format!("{} -> {} is not 2x", w[0], w[1]));
        }
    }
    check(problems.is_empty(), if problems.is_empty() { format!("point touches {per_n:?} for n = {:?}", cfg.ns) } else { problems.join("; ") })
}

fn criterion_5() -> Outcome {
    let cfg = RsnetConfig::default();
    let params = build_rsnet::<f64>(&cfg, 5).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 512;
    let coords = Array2::from_shape_simple_fn((n, 3), || rng.random_range(0.0..1.0));
    let feats = Array2::from_shape_simple_fn((n, cfg.d_in), || rng.random_range(-1.0..1.0));
    let (base, _) = rsnet_forward(feats.view(), coords.view(), &params, &cfg).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (out, _) = rsnet_forward(feats.select(Axis(0), &perm).view(), coords.select(Axis(0), &perm).view(), &params, &cfg)
            .map_err(|e| e.to_string())?;
        let want = base.select(Axis(0), &perm);
        worst = worst.max((&out - &want).mapv(f64::abs).fold(0.0, |m: f64, &v| m.max(v)));
    }
    check(worst <= PERM_TOL, format!("20 permutations, max |diff| {worst:.2e}"))
}

/// Halved default architecture, 1024 points per cube, full 9-d features.
fn desk_config(seed: u64, num_classes: usize) -> TrainConfig {
    let mut cfg = TrainConfig { seed, ..TrainConfig::default() };
    cfg.model = RsnetConfig { num_classes, ..cfg.model.halved() };
    cfg.block.points_per_cube = 1024;
    cfg.block.feature_mode = FeatureMode::Full9;
    cfg
}

fn scenes(spec: fn(u64) -> SceneSpec, seeds: impl Iterator<Item = u64>) -> Vec<LabeledCloud> {
    seeds.map(|s| generate_scene(&spec(s)).unwrap()).collect()
}

fn class_names(kind: SceneKind) -> Vec<String> {
    kind.class_names().iter().map(|s| s.to_string()).collect()
}

fn criterion_6() -> Outcome {
    let names = class_names(SceneKind::Standard);
    let (mut oas, mut mious, mut lines) = (Vec::new(), Vec::new(), Vec::new());
    let mut slowest = 0.0f64;
    for seed in 0..3u64 {
        let train = scenes(SceneSpec::standard, (0..8).map(|i| seed * 100 + i));
        let test = scenes(SceneSpec::standard, (0..2).map(|i| seed * 100 + 50 + i));
        let start = Instant::now();
        let cfg = desk_config(seed, names.len());
        let mut trainer = Trainer::new(cfg.clone(), train.clone()).map_err(|e| e.to_string())?;
        for _ in 0..cfg.epochs {
            trainer.run_epoch().map_err(|e| e.to_string())?;
        }
        let oa = trainer.evaluate(&train, &names).map_err(|e| e.to_string())?.report.overall_acc;
        let miou = trainer.evaluate(&test, &names).map_err(|e| e.to_string())?.report.miou;
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        lines.push(format!("seed {seed}: train oa {oa:.4}, test miou {miou:.4}, {:.0}s", secs));
        oas.push(oa);
        mious.push(miou);
    }
    let (oa, miou) = (median(oas), median(mious));
    check(
        oa >= DESK_TRAIN_OA && miou >= DESK_TEST_MIOU && slowest <= DESK_BUDGET_S,
        format!("median train oa {oa:.4}, median test miou {miou:.4} ({})", lines.join("; ")),
    )
}

fn slab_accuracy(seed: u64, use_rnn: bool) -> Result<f64, String> {
    let names = class_names(SceneKind::Context);
    let train = scenes(SceneSpec::context, (0..8).map(|i| seed * 100 + i));
    let test = scenes(SceneSpec::context, (0..6).map(|i| seed * 100 + 50 + i));
    let mut cfg = desk_config(seed, names.len());
    cfg.model.use_rnn = use_rnn;
    let mut trainer = Trainer::new(cfg.clone(), train).map_err(|e| e.to_string())?;
    for _ in 0..cfg.epochs {
        trainer.run_epoch().map_err(|e| e.to_string())?;
    }
    let ev = evaluate(&test, &cfg, &trainer.params, &names).map_err(|e| e.to_string())?;
    let slabs = [SceneKind::Context.class_index("covered_slab").unwrap(), SceneKind::Context.class_index("open_slab").unwrap()];
    ev.confusion.accuracy_over(&slabs).map_err(|e| e.to_string())
}

fn criterion_7() -> Outcome {
    let (mut full, mut ablated, mut gaps, mut lines) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for seed in 0..3u64 {
        let f = slab_accuracy(seed, true)?;
        let a = slab_accuracy(seed, false)?;
        lines.push(format!("seed {seed}: full {f:.4}, ablated {a:.4}"));
        full.push(f);
        ablated.push(a);
        gaps.push(f - a);
    }
    let (f, a, g) = (median(full), median(ablated), median(gaps));
    check(
        f >= CTX_FULL_MIN && a <= CTX_ABLATED_MAX && g >= CTX_GAP_MIN,
        format!("median slab acc full {f:.4}, ablated {a:.4}, gap {g:.4} ({})", lines.join("; ")),
    )
}

fn criterion_8() -> Outcome {
    let mut base = common::tiny_config(6, 8);
    base.epochs = 1;
    base.block.points_per_cube = 96;
    let rows = run_sweep(&base, GridArg::All, 2, 1, 3000).map_err(|e| e.to_string())?;
    let cells = sweep_cells(GridArg::All, &base);
    let finite = rows.iter().all(|r| [r.miou, r.macc, r.overall_acc].iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    let keys_match = rows.iter().zip(&cells).all(|(r, c)| r.key == c.0 && r.value == c.1);
    let count = |k: &str| rows.iter().filter(|r| r.key == k).count();
    let shape = [count("resolution"), count("block_size"), count("test_stride"), count("cell")];
    check(
        rows.len() == 13 && finite && keys_match && shape == [4, 3, 3, 3],
        format!("{} rows (r/bs/stride/unit = {shape:?})", rows.len()),
    )
}

fn oracle_metrics(m: &[Vec<u64>]) -> (f64, f64, f64) {
    let k = m.len();
    let (mut iou_sum, mut iou_n, mut acc_sum, mut acc_n, mut hits, mut total) = (0.0, 0, 0.0, 0, 0u64, 0u64);
    for c in 0..k {
        let mut truth = 0u64;
        let mut predicted = 0u64;
        for o in 0..k {
            truth += m[c][o];
            predicted += m[o][c];
            total += m[c][o];
        }
        hits += m[c][c];
        if truth + predicted > 0 {
            iou_sum += m[c][c] as f64 / (truth + predicted - m[c][c]) as f64;
            iou_n += 1;
        }
        if truth > 0 {
            acc_sum += m[c][c] as f64 / truth as f64;
            acc_n += 1;
        }
    }
    (iou_sum / iou_n as f64, acc_sum / acc_n as f64, hits as f64 / total as f64)
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(2..=14);
        let sparse = rng.random_bool(0.3);
        let mut counts: Vec<Vec<u64>> =
            (0..k).map(|_| (0..k).map(|_| if sparse && rng.random_bool(0.6) { 0 } else { rng.random_range(0..1000) }).collect()).collect();
        counts[0][0] += 1;
        let want = oracle_metrics(&counts);
        let cm = ConfusionMatrix::from_counts(counts);
        let got = (cm.miou().unwrap(), cm.macc().unwrap(), cm.overall_acc().unwrap());
        for (a, b) in [(got.0, want.0), (got.1, want.1), (got.2, want.2)] {
            worst = worst.max((a - b).abs());
        }
    }
    let two = ConfusionMatrix::from_counts(vec![vec![1, 1], vec![1, 1]]).miou().unwrap();
    check(
        worst <= METRIC_TOL && (two - 1.0 / 3.0).abs() <= METRIC_TOL,
        format!("1000 matrices, max |diff| {worst:.2e}; [[1,1],[1,1]] -> {two:.12}"),
    )
}

fn criterion_10() -> Outcome {
    let cfg = common::tiny_config(6, 10);
    let clouds: Vec<LabeledCloud> = (0..2).map(|s| common::small_room(70 + s, 1500)).collect();
    let names = common::names(6);
    let run = |epochs: usize| -> Result<Trainer, String> {
        let mut t = Trainer::new(cfg.clone(), clouds.clone()).map_err(|e| e.to_string())?;
        for _ in 0..epochs {
            t.run_epoch().map_err(|e| e.to_string())?;
        }
        Ok(t)
    };
    let (a, b) = (run(3)?, run(3)?);
    let bytes = |t: &Trainer| t.checkpoint("tiny").map(|c| c.to_bytes()).map_err(|e| e.to_string());
    let same_ckpt = bytes(&a)? == bytes(&b)?;
    let (ea, eb) = (a.evaluate(&clouds, &names).map_err(|e| e.to_string())?, b.evaluate(&clouds, &names).map_err(|e| e.to_string())?);
    let same_metrics = ea.report.to_text() == eb.report.to_text() && ea.confusion == eb.confusion;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("mid.ckpt");
    let first = run(1)?;
    save_checkpoint(&first.checkpoint("tiny").map_err(|e| e.to_string())?, &path).map_err(|e| e.to_string())?;
    let mut resumed = Trainer::from_checkpoint(cfg.clone(), &load_checkpoint(&path).map_err(|e| e.to_string())?, clouds.clone())
        .map_err(|e| e.to_string())?;
    for _ in 0..2 {
        resumed.run_epoch().map_err(|e| e.to_string())?;
    }
    let same_resume = bytes(&resumed)? == bytes(&a)?;

    // the binary: two identical train invocations write identical files
    let scene = dir.path().join("s.pts");
    rsnet::pcio::write_cloud(&common::small_room(71, 1200), &scene).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.ckpt"));
        let status = Command::new(env!("CARGO_BIN_EXE_rsnet"))
            .args(["train", "--data", scene.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"])
            .args(["--set", "points_per_cube=64", "--set", "input_channels=8", "--set", "hidden_sizes=6,6"])
            .args(["--set", "output_channels=8", "--set", "resolution=0.1", "--set", "epochs=2"])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let same_cli = files[0] == files[1];
    check(
        same_ckpt && same_metrics && same_resume && same_cli,
        format!("checkpoint {same_ckpt}, metrics {same_metrics}, resume {same_resume}, cli {same_cli}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient integrity", criterion_1),
        ("slice-op oracle equivalence", criterion_2),
        ("slice counts", criterion_3),
        ("operation counts", criterion_4),
        ("permutation equivariance", criterion_5),
        ("desk-scale learning", criterion_6),
        ("local dependency", criterion_7),
        ("ablation sweep", criterion_8),
        ("metrics oracle", criterion_9),
        ("reproducibility", criterion_10),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
