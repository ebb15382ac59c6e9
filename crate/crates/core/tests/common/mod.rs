#![allow(dead_code)]

use rsnet::model::RsnetConfig;
use rsnet::pcio::{generate_scene, LabeledCloud, SceneSpec};
use rsnet::pipeline::{BlockConfig, FeatureMode};
use rsnet::rnn::{CellVariant, RnnStackConfig};
use rsnet::train::{AdamConfig, ClassWeighting, TrainConfig};

/// A few-second training setup: narrow layers, small cubes.
pub fn tiny_config(num_classes: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        block: BlockConfig {
            block_size: 1.0,
            train_stride: 1.0,
            test_stride: 1.0,
            points_per_cube: 128,
            feature_mode: FeatureMode::Full9,
            resample_each_epoch: true,
        },
        model: RsnetConfig {
            num_classes,
            d_in: 9,
            input_channels: vec![8, 8],
            output_channels: vec![16],
            rnn: RnnStackConfig { hidden_sizes: vec![8, 8], variant: CellVariant::Gru },
            resolutions: [0.1, 0.1, 0.1],
            use_rnn: true,
        },
        adam: AdamConfig { lr: 5e-3, ..AdamConfig::default() },
        batch_size: 4,
        epochs: 3,
        class_weighting: ClassWeighting::MedianFrequency,
        seed,
    }
}

/// A 2 m × 2 m room with one object of each kind.
pub fn small_room(seed: u64, num_points: usize) -> LabeledCloud {
    let spec = SceneSpec {
        extents: [2.0, 2.0, 2.0],
        num_points,
        tables: 1,
        chairs: 1,
        bookcases: 1,
        ..SceneSpec::standard(seed)
    };
    generate_scene(&spec).unwrap()
}

pub fn small_context(seed: u64, num_points: usize) -> LabeledCloud {
    generate_scene(&SceneSpec { num_points, ..SceneSpec::context(seed) }).unwrap()
}

pub fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("class{c}")).collect()
}
