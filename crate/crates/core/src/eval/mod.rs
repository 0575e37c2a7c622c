//! Evaluation metrics and the synthetic scaling benchmark.

mod benchmark;
mod metrics;

pub use benchmark::*;
pub use metrics::*;
