//! Benchmark configurations shipped in `configs/`.

use crate::config::ExperimentConfig;
use crate::error::Result;

pub const K2: &str = include_str!("../configs/k2.cfg");
pub const CONVEX: &str = include_str!("../configs/convex.cfg");
pub const MLP_BLOBS: &str = include_str!("../configs/mlp_blobs.cfg");
pub const MNIST: &str = include_str!("../configs/mnist.cfg");
pub const MNIST_RED: &str = include_str!("../configs/mnist_red.cfg");

pub fn k2() -> Result<ExperimentConfig> {
    ExperimentConfig::parse(K2)
}

pub fn convex() -> Result<ExperimentConfig> {
    ExperimentConfig::parse(CONVEX)
}

pub fn mlp_blobs() -> Result<ExperimentConfig> {
    ExperimentConfig::parse(MLP_BLOBS)
}
