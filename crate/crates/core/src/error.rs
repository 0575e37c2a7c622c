use thiserror::Error;

/// Errors produced by ingestion, chain construction, estimation and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("normalizer too small: row {item} has outgoing mass {mass} > d = {d}")]
    InvalidNormalizer { item: usize, mass: f64, d: f64 },

    #[error("matrix is not row-stochastic at row {row} (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("chain is not ergodic: {} strongly connected components {components:?}", components.len())]
    NotErgodic { components: Vec<Vec<usize>> },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("item {item} has zero stationary mass; its parameter would be infinite")]
    DegenerateItem { item: usize },

    #[error("pair ({i}, {j}) has no usable comparisons")]
    IncompleteMatrix { i: usize, j: usize },

    #[error("chain is not reversible w.r.t. the given distribution at pair ({i}, {j}): imbalance {imbalance:e}")]
    NotReversible { i: usize, j: usize, imbalance: f64 },

    #[error("metric is undefined: {0}")]
    UndefinedMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) | Error::InvalidInput(_) => 1,
            Error::InvalidNormalizer { .. }
            | Error::NotStochastic { .. }
            | Error::NotErgodic { .. }
            | Error::NoConvergence { .. }
            | Error::DegenerateItem { .. }
            | Error::IncompleteMatrix { .. }
            | Error::NotReversible { .. } => 2,
            Error::UndefinedMetric(_) => 3,
        }
    }
}
