//! End-to-end spectral estimation: responses -> pairwise counts -> chain ->
//! stationary distribution -> centered item parameters.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::chain::{
    build_chain_accelerated, build_chain_original, check_ergodicity, pairwise_diff_counts, ConnectivityReport,
};
use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::stationary::{stationary_distribution, StationaryResult, DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralMethod {
    Original,
    #[default]
    Accelerated,
}

impl fmt::Display for SpectralMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectralMethod::Original => "original",
            SpectralMethod::Accelerated => "accelerated",
        })
    }
}

impl FromStr for SpectralMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(SpectralMethod::Original),
            "accelerated" => Ok(SpectralMethod::Accelerated),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?} (expected original or accelerated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Added to every co-assigned pair's differential count.
    pub nu: f64,
    pub method: SpectralMethod,
    pub tol: f64,
    pub max_iters: usize,
    /// Common normalizer for the original chain; ignored by the accelerated one.
    pub d_override: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { nu: 1.0, method: SpectralMethod::Accelerated, tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS, d_override: None }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::InvalidInput(format!("nu = {} must be >= 0", self.nu)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol = {} must be > 0", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemEstimate {
    /// Mean-zero item parameters; larger means harder.
    pub beta: Vec<f64>,
    pub pi: Vec<f64>,
    pub d: Vec<f64>,
    pub method: SpectralMethod,
    pub stationary: StationaryResult,
    pub connectivity: ConnectivityReport,
}

impl ItemEstimate {
    /// Writes `item_id,beta,pi,d` rows.
    pub fn write_csv<W: Write>(&self, item_ids: &[String], mut w: W) -> Result<()> {
        writeln!(w, "item_id,beta,pi,d")?;
        for (i, id) in item_ids.iter().enumerate() {
            writeln!(w, "{id},{},{},{}", self.beta[i], self.pi[i], self.d[i])?;
        }
        Ok(())
    }
}

pub fn spectral_estimate(x: &ResponseMatrix, cfg: &EstimatorConfig) -> Result<ItemEstimate> {
    cfg.validate()?;
    let stats = pairwise_diff_counts(x, cfg.nu)?;
    let connectivity = check_ergodicity(&stats);
    if !connectivity.is_ergodic {
        return Err(Error::NotErgodic { components: connectivity.components });
    }
    let chain = match cfg.method {
        SpectralMethod::Original => build_chain_original(&stats, cfg.d_override)?,
        SpectralMethod::Accelerated => build_chain_accelerated(&stats),
    };
    let stationary = stationary_distribution(&chain, cfg.tol, cfg.max_iters)?;
    let beta = normalize_beta(&recover_beta(&stationary.pi, &chain.d)?);
    Ok(ItemEstimate { beta, pi: stationary.pi.clone(), d: chain.d, method: cfg.method, stationary, connectivity })
}

/// `log(pi_i / d_i)`, not yet centered.
pub fn recover_beta(pi: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    if pi.len() != d.len() {
        return Err(Error::InvalidInput("pi and d differ in length".into()));
    }
    pi.iter()
        .zip(d)
        .enumerate()
        .map(|(item, (&p, &di))| {
            if !(di > 0.0) {
                return Err(Error::InvalidInput(format!("normalizer d[{item}] = {di} must be positive")));
            }
            if !(p > 0.0) {
                return Err(Error::DegenerateItem { item });
            }
            Ok((p / di).ln())
        })
        .collect()
}

/// Subtracts the mean.
pub fn normalize_beta(raw: &[f64]) -> Vec<f64> {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|b| b - mean).collect()
}
