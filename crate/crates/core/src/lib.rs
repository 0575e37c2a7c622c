//! Spectral estimation of Rasch item parameters.
//!
//! Binary responses are turned into an item-item Markov chain whose walk moves
//! from item `i` to item `j` whenever a user answered `i` positively and `j`
//! negatively. The stationary distribution of that chain is proportional to
//! `exp(beta)`, which recovers the item difficulties up to a common shift.
//!
//! ```
//! use rasch_spectral::{spectral_estimate, EstimatorConfig, ResponseMatrix};
//!
//! let x = ResponseMatrix::from_rows(&[
//!     [Some(true), Some(false)],
//!     [Some(true), Some(false)],
//!     [Some(false), Some(true)],
//! ])
//! .unwrap();
//! let est = spectral_estimate(&x, &EstimatorConfig { nu: 0.0, ..Default::default() }).unwrap();
//! assert!((est.beta[1] - est.beta[0] - 2f64.ln()).abs() < 1e-9);
//! ```

pub mod baselines;
pub mod chain;
pub mod cli;
pub mod data;
mod error;
pub mod estimator;
pub mod eval;
mod graph;
pub mod stationary;

pub use chain::{
    build_chain_accelerated, build_chain_original, build_idealized_chain, check_ergodicity, pairwise_diff_counts,
    spectral_gap, ChainKind, ConnectivityReport, MarkovChain, PairwiseStats,
};
pub use data::{
    assignment_stats, generate_synthetic, load_responses, sample_rasch_response, save_responses, AssignmentDiagnostics,
    Cell, GroundTruth, ResponseFormat, ResponseMatrix,
};
pub use error::{Error, Result};
pub use estimator::{normalize_beta, recover_beta, spectral_estimate, EstimatorConfig, ItemEstimate, SpectralMethod};
pub use stationary::{stationary_distribution, StationaryResult};
