//! Point-cloud semantic segmentation with slice pooling and bidirectional RNNs.
//!
//! Points in a cube are sliced along x, y and z; each slice is max-pooled into one
//! feature vector, the ordered slice sequence runs through a stack of bidirectional
//! RNNs, and the updated slice features are copied back to their member points.
//! Everything, backward passes included, is implemented by hand on top of `ndarray`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod gradcheck_suite;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pcio;
pub mod pipeline;
pub mod rnn;
pub mod slicing;
pub mod train;

pub use error::{Result, RsnetError};
pub use nn::{FeatureMap, Real};
