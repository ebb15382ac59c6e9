//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 for configuration, data or I/O errors (and a
//! failing `gradcheck`), 2 for unusable flags.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{rows_to_text, run_bench, BenchConfig};
use crate::error::{Result, RsnetError};
use crate::gradcheck_suite::{run_case, run_suite, SuiteConfig, SuiteReport, CASES};
use crate::rnn::CellVariant;
use crate::pcio::{generate_scene, read_cloud, write_cloud, LabeledCloud, SceneKind, SceneSpec};
use crate::train::{
    evaluate, load_checkpoint, params_from_checkpoint, predict_scene, save_checkpoint, NetPredictor, TrainConfig, Trainer,
};

#[derive(Debug, Parser)]
#[command(name = "rsnet", version, about = "Point-cloud segmentation with slice pooling and bidirectional RNNs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Flat `key = value` run configuration
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override one config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Standard,
    Context,
}

impl From<KindArg> for SceneKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Standard => SceneKind::Standard,
            KindArg::Context => SceneKind::Context,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    R,
    Bs,
    Stride,
    Unit,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic labeled scenes
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Standard)]
        kind: KindArg,
        #[arg(long)]
        points: Option<usize>,
        /// Number of scenes; more than one writes `<stem>_<i>.<ext>` with seeds seed+i
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Train from scratch or resume from a checkpoint
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Labeled training scenes
        #[arg(long = "data", required = true, num_args = 1.., value_delimiter = ',')]
        data: Vec<PathBuf>,
        /// Checkpoint written after every epoch
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint on labeled scenes
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "data", required = true, num_args = 1.., value_delimiter = ',')]
        data: Vec<PathBuf>,
        /// Comma-separated class names for the report
        #[arg(long, value_delimiter = ',')]
        class_names: Vec<String>,
    },
    /// Label a scene and write it with the predicted labels
    Predict {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every differentiable operation
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Run only this case
        #[arg(long)]
        case: Option<String>,
    },
    /// Slice-operator operation counts and timings
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1024usize, 2048, 4096])]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01f64, 0.02, 0.05, 0.08])]
        rs: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        channels: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and evaluate once per cell of an ablation grid on synthetic scenes
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value_t = GridArg::All)]
        grid: GridArg,
        #[arg(long, default_value_t = 4)]
        train_scenes: usize,
        #[arg(long, default_value_t = 2)]
        test_scenes: usize,
        /// Points per synthetic scene
        #[arg(long, default_value_t = 20_000)]
        points: usize,
    },
}

/// Parses `args` (program name first), runs the command, and returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn io_err(e: std::io::Error) -> RsnetError {
    RsnetError::Io(e)
}

/// Defaults, then `--config`, then `--seed`, then each `--set` in order.
pub fn build_config(args: &ConfigArgs, base: Option<&str>) -> Result<TrainConfig> {
    let mut cfg = match (base, &args.config) {
        (Some(text), _) => TrainConfig::from_text(text)?,
        (None, Some(path)) => TrainConfig::load(path)?,
        (None, None) => TrainConfig::default(),
    };
    if base.is_some() {
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)?;
            for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
                cfg.apply_override(line)?;
            }
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn mentions_num_classes(args: &ConfigArgs) -> Result<bool> {
    let in_file = match &args.config {
        Some(p) => std::fs::read_to_string(p)?
            .lines()
            .any(|l| l.split('=').next().is_some_and(|k| k.trim() == "num_classes")),
        None => false,
    };
    Ok(in_file || args.overrides.iter().any(|o| o.split('=').next().is_some_and(|k| k.trim() == "num_classes")))
}

/// Class names for a report: explicit names, else the synthetic scene
/// vocabulary with a matching class count, else `class<i>`.
pub fn default_class_names(num_classes: usize, explicit: &[String]) -> Vec<String> {
    if explicit.len() == num_classes {
        return explicit.to_vec();
    }
    for kind in [SceneKind::Standard, SceneKind::Context] {
        if kind.class_names().len() == num_classes {
            return kind.class_names().iter().map(|s| s.to_string()).collect();
        }
    }
    (0..num_classes).map(|c| format!("class{c}")).collect()
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<LabeledCloud>> {
    paths.iter().map(read_cloud).collect()
}

fn numbered_path(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{i}"),
    };
    path.with_file_name(name)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Synth { seed, out: path, kind, points, count } => {
            for i in 0..count {
                let mut spec = match kind {
                    KindArg::Standard => SceneSpec::standard(seed + i as u64),
                    KindArg::Context => SceneSpec::context(seed + i as u64),
                };
                if let Some(n) = points {
                    spec.num_points = n;
                }
                let target = if count == 1 { path.clone() } else { numbered_path(&path, i) };
                write_cloud(&generate_scene(&spec)?, &target)?;
                writeln!(out, "wrote {}", target.display()).map_err(io_err)?;
            }
            Ok(0)
        }
        Command::Train { cfg: args, data, out: ckpt_path, resume } => {
            let clouds = read_all(&data)?;
            let mut trainer = match &resume {
                Some(p) => {
                    let ckpt = load_checkpoint(p)?;
                    let cfg = build_config(&args, Some(&ckpt.config_text))?;
                    Trainer::from_checkpoint(cfg, &ckpt, clouds)?
                }
                None => {
                    let mut cfg = build_config(&args, None)?;
                    if !mentions_num_classes(&args)? {
                        cfg.model.num_classes = clouds.iter().map(|c| c.num_classes).max().unwrap_or(2).max(2);
                    }
                    Trainer::new(cfg, clouds)?
                }
            };
            let text = trainer.config.to_text();
            let mut saved = false;
            while trainer.epoch < trainer.config.epochs as u64 {
                let loss = trainer.run_epoch()?;
                writeln!(out, "epoch {} loss {:.6}", trainer.epoch, loss).map_err(io_err)?;
                save_checkpoint(&trainer.checkpoint(&text)?, &ckpt_path)?;
                saved = true;
            }
            if !saved {
                save_checkpoint(&trainer.checkpoint(&text)?, &ckpt_path)?;
            }
            Ok(0)
        }
        Command::Eval { cfg: args, checkpoint, data, class_names } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let cfg = build_config(&args, Some(&ckpt.config_text))?;
            let params = params_from_checkpoint(&ckpt, &cfg.model)?;
            let clouds = read_all(&data)?;
            let names = default_class_names(cfg.model.num_classes, &class_names);
            let eval = evaluate(&clouds, &cfg, &params, &names)?;
            write!(out, "{}", eval.report.to_text()).map_err(io_err)?;
            write!(out, "{}", eval.report.class_table()).map_err(io_err)?;
            Ok(0)
        }
        Command::Predict { cfg: args, checkpoint, data, out: path } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let cfg = build_config(&args, Some(&ckpt.config_text))?;
            let params = params_from_checkpoint(&ckpt, &cfg.model)?;
            let cloud = read_cloud(&data)?;
            let predictor = NetPredictor { params: &params, model: &cfg.model };
            let (labels, _) = predict_scene(&predictor, &cloud, &cfg.block, cfg.seed)?;
            let labeled = LabeledCloud::new(cloud.points, Some(labels), cfg.model.num_classes)?;
            write_cloud(&labeled, &path)?;
            writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Gradcheck { seeds, case } => {
            let cfg = SuiteConfig { seeds, ..SuiteConfig::default() };
            let report = match case {
                Some(name) => {
                    let c = run_case(&name, &cfg).ok_or_else(|| {
                        RsnetError::Config(format!("unknown case {name:?}; known: {}", CASES.join(", ")))
                    })?;
                    SuiteReport { cases: vec![c], tolerance: cfg.check.tolerance }
                }
                None => run_suite(&cfg),
            };
            write!(out, "{}", report.to_text()).map_err(io_err)?;
            writeln!(out, "{}", if report.pass() { "gradcheck passed" } else { "gradcheck FAILED" }).map_err(io_err)?;
            Ok(if report.pass() { 0 } else { 1 })
        }
        Command::Bench { ns, rs, channels, repeats, seed } => {
            let cfg = BenchConfig { ns, rs, channels, repeats, seed, ..BenchConfig::default() };
            write!(out, "{}", rows_to_text(&run_bench(&cfg)?)).map_err(io_err)?;
            Ok(0)
        }
        Command::Sweep { cfg: args, grid, train_scenes, test_scenes, points } => {
            let base = build_config(&args, None)?;
            let rows = run_sweep(&base, grid, train_scenes, test_scenes, points)?;
            writeln!(out, "{:<14} {:>8} {:>8} {:>8} {:>8}", "key", "value", "miou", "macc", "oa").map_err(io_err)?;
            for r in rows {
                writeln!(out, "{:<14} {:>8} {:>8.4} {:>8.4} {:>8.4}", r.key, r.value, r.miou, r.macc, r.overall_acc)
                    .map_err(io_err)?;
            }
            Ok(0)
        }
    }
}

/// One cell of an ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub key: String,
    pub value: String,
    pub miou: f64,
    pub macc: f64,
    pub overall_acc: f64,
}

/// `(key, value, overrides)` for every cell of `grid`. Strides are fractions of
/// the base block size.
pub fn sweep_cells(grid: GridArg, base: &TrainConfig) -> Vec<(String, String, Vec<String>)> {
    let mut cells = Vec::new();
    let bs = base.block.block_size;
    if matches!(grid, GridArg::R | GridArg::All) {
        for r in [0.01, 0.02, 0.05, 0.08] {
            cells.push(("resolution".into(), r.to_string(), vec![format!("resolution={r}")]));
        }
    }
    if matches!(grid, GridArg::Bs | GridArg::All) {
        for b in [1.0, 2.0, 3.0] {
            cells.push((
                "block_size".into(),
                b.to_string(),
                vec![format!("block_size={b}"), format!("train_stride={b}"), format!("test_stride={b}")],
            ));
        }
    }
    if matches!(grid, GridArg::Stride | GridArg::All) {
        for f in [0.2, 0.5, 1.0] {
            cells.push(("test_stride".into(), format!("{f}bs"), vec![format!("test_stride={}", f * bs)]));
        }
    }
    if matches!(grid, GridArg::Unit | GridArg::All) {
        for u in CellVariant::ALL {
            cells.push(("cell".into(), u.to_string(), vec![format!("cell={u}")]));
        }
    }
    cells
}

/// Trains and evaluates once per grid cell on seeded synthetic scenes. Cells
/// that differ only in the test stride share one trained model.
pub fn run_sweep(base: &TrainConfig, grid: GridArg, train_scenes: usize, test_scenes: usize, points: usize) -> Result<Vec<SweepRow>> {
    if train_scenes == 0 || test_scenes == 0 {
        return Err(RsnetError::Config("sweep needs at least one training and one test scene".into()));
    }
    let scene = |seed: u64| {
        let mut spec = SceneSpec::standard(seed);
        spec.num_points = points;
        generate_scene(&spec)
    };
    let train: Vec<_> = (0..train_scenes as u64).map(|i| scene(base.seed.wrapping_mul(1000) + i)).collect::<Result<_>>()?;
    let test: Vec<_> =
        (0..test_scenes as u64).map(|i| scene(base.seed.wrapping_mul(1000) + 500 + i)).collect::<Result<_>>()?;
    let mut base = base.clone();
    base.model.num_classes = SceneKind::Standard.class_names().len();
    let names = default_class_names(base.model.num_classes, &[]);

    let mut trained: Vec<(String, Trainer)> = Vec::new();
    let mut rows = Vec::new();
    for (key, value, overrides) in sweep_cells(grid, &base) {
        let mut cfg = base.clone();
        for o in &overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        let mut train_key = cfg.clone();
        train_key.block.test_stride = train_key.block.block_size;
        let train_key = train_key.to_text();
        let idx = match trained.iter().position(|(k, _)| *k == train_key) {
            Some(i) => i,
            None => {
                let mut t = Trainer::new(cfg.clone(), train.clone())?;
                for _ in 0..cfg.epochs {
                    t.run_epoch()?;
                }
                trained.push((train_key, t));
                trained.len() - 1
            }
        };
        let eval = evaluate(&test, &cfg, &trained[idx].1.params, &names)?;
        rows.push(SweepRow { key, value, miou: eval.report.miou, macc: eval.report.macc, overall_acc: eval.report.overall_acc });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(run_str(&["rsnet", "train", "--bogus"]).0, 2);
        assert_eq!(run_str(&["rsnet"]).0, 2);
        assert_eq!(run_str(&["rsnet", "--help"]).0, 0);
    }

    #[test]
    fn config_errors_exit_one() {
        let (code, _, err) = run_str(&["rsnet", "sweep", "--set", "no_such_key=1"]);
        assert_eq!(code, 1);
        assert!(err.contains("no_such_key"));
    }

    #[test]
    fn grid_sizes() {
        let base = TrainConfig::default();
        assert_eq!(sweep_cells(GridArg::R, &base).len(), 4);
        assert_eq!(sweep_cells(GridArg::Bs, &base).len(), 3);
        assert_eq!(sweep_cells(GridArg::Stride, &base).len(), 3);
        assert_eq!(sweep_cells(GridArg::Unit, &base).len(), 3);
        assert_eq!(sweep_cells(GridArg::All, &base).len(), 13);
    }

    #[test]
    fn numbered_paths() {
        assert_eq!(numbered_path(Path::new("/tmp/a.pts"), 3), PathBuf::from("/tmp/a_3.pts"));
    }
}
