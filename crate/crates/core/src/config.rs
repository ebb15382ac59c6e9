//! Flat `key = value` run configuration.
//!
//! Every field of [`TrainConfig`] has one key. Lines starting with `#` are
//! comments. Unknown keys are rejected, and [`TrainConfig::to_text`] writes a
//! file that parses back to the same configuration.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, RsnetError};
use crate::pipeline::FeatureMode;
use crate::rnn::CellVariant;
use crate::train::{ClassWeighting, TrainConfig};

pub const KEYS: &[&str] = &[
    "seed",
    "num_classes",
    "feature_mode",
    "block_size",
    "train_stride",
    "test_stride",
    "points_per_cube",
    "resample_each_epoch",
    "resolution",
    "resolution_x",
    "resolution_y",
    "resolution_z",
    "cell",
    "hidden_sizes",
    "input_channels",
    "output_channels",
    "use_rnn",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "batch_size",
    "epochs",
    "class_weighting",
];

impl FromStr for ClassWeighting {
    type Err = RsnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "none" => Ok(Self::Uniform),
            "median" | "median_frequency" => Ok(Self::MedianFrequency),
            _ => Err(RsnetError::Config(format!("unknown class weighting {s:?}"))),
        }
    }
}

impl std::fmt::Display for ClassWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::MedianFrequency => "median",
        })
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| RsnetError::Config(format!("invalid value {raw:?} for {key}")))
}

fn list(key: &str, raw: &str) -> Result<Vec<usize>> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|v| value(key, v.trim())).collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    /// Sets one key; the model input width follows `feature_mode`.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let raw = raw.trim();
        match key {
            "seed" => self.seed = value(key, raw)?,
            "num_classes" => self.model.num_classes = value(key, raw)?,
            "feature_mode" => {
                let mode: FeatureMode = raw.parse().map_err(|_| RsnetError::Config(format!("invalid value {raw:?} for {key}")))?;
                self.block.feature_mode = mode;
                self.model.d_in = mode.width();
            }
            "block_size" => self.block.block_size = value(key, raw)?,
            "train_stride" => self.block.train_stride = value(key, raw)?,
            "test_stride" => self.block.test_stride = value(key, raw)?,
            "points_per_cube" => self.block.points_per_cube = value(key, raw)?,
            "resample_each_epoch" => self.block.resample_each_epoch = value(key, raw)?,
            "resolution" => self.model.resolutions = [value(key, raw)?; 3],
            "resolution_x" => self.model.resolutions[0] = value(key, raw)?,
            "resolution_y" => self.model.resolutions[1] = value(key, raw)?,
            "resolution_z" => self.model.resolutions[2] = value(key, raw)?,
            "cell" => {
                self.model.rnn.variant =
                    raw.parse::<CellVariant>().map_err(|_| RsnetError::Config(format!("invalid value {raw:?} for {key}")))?
            }
            "hidden_sizes" => self.model.rnn.hidden_sizes = list(key, raw)?,
            "input_channels" => self.model.input_channels = list(key, raw)?,
            "output_channels" => self.model.output_channels = list(key, raw)?,
            "use_rnn" => self.model.use_rnn = value(key, raw)?,
            "lr" => self.adam.lr = value(key, raw)?,
            "beta1" => self.adam.beta1 = value(key, raw)?,
            "beta2" => self.adam.beta2 = value(key, raw)?,
            "eps" => self.adam.eps = value(key, raw)?,
            "batch_size" => self.batch_size = value(key, raw)?,
            "epochs" => self.epochs = value(key, raw)?,
            "class_weighting" => self.class_weighting = raw.parse()?,
            _ => return Err(RsnetError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override such as `--set lr=0.01`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| RsnetError::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    /// Parses config text on top of the defaults and validates the result.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| RsnetError::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v).map_err(|e| match e {
                RsnetError::Config(m) => RsnetError::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let b = &self.block;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("seed", self.seed.to_string());
        kv("num_classes", m.num_classes.to_string());
        kv("feature_mode", b.feature_mode.to_string());
        kv("block_size", b.block_size.to_string());
        kv("train_stride", b.train_stride.to_string());
        kv("test_stride", b.test_stride.to_string());
        kv("points_per_cube", b.points_per_cube.to_string());
        kv("resample_each_epoch", b.resample_each_epoch.to_string());
        kv("resolution_x", m.resolutions[0].to_string());
        kv("resolution_y", m.resolutions[1].to_string());
        kv("resolution_z", m.resolutions[2].to_string());
        kv("cell", m.rnn.variant.to_string());
        kv("hidden_sizes", join(&m.rnn.hidden_sizes));
        kv("input_channels", join(&m.input_channels));
        kv("output_channels", join(&m.output_channels));
        kv("use_rnn", m.use_rnn.to_string());
        kv("lr", self.adam.lr.to_string());
        kv("beta1", self.adam.beta1.to_string());
        kv("beta2", self.adam.beta2.to_string());
        kv("eps", self.adam.eps.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("class_weighting", self.class_weighting.to_string());
        s
    }
}
