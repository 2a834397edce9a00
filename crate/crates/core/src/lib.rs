//! Toolkit for subjective studies of space-time subsampled and compressed
//! video: stimulus generation, playlist design, vote collection, opinion-score
//! processing, rate-distortion hull analysis and quality-model benchmarking.

pub mod content;
pub mod design;
pub mod error;
pub mod eval;
pub mod hull;
pub mod ladder;
pub mod manifest;
pub mod metrics;
pub mod scores;
pub mod session;
pub mod stats;
pub mod synth;
pub mod video;

pub use error::{Error, Result};
