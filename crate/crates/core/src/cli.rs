//! Command line front end.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 estimation infeasible,
//! 3 undefined metric.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{generate_synthetic, load_responses, save_responses, GroundTruth, ResponseFormat, ResponseMatrix};
use crate::error::{Error, Result};
use crate::estimator::{spectral_estimate, EstimatorConfig, SpectralMethod};
use crate::eval::{evaluate, parse_grid, parse_methods, run_scaling_benchmark, BenchmarkConfig, EvalOptions};
use crate::stationary::{DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(name = "rasch-spectral", version, about = "Spectral item-parameter estimation for the Rasch model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate item parameters from a response file.
    Estimate(EstimateArgs),
    /// Draw a synthetic response matrix and its ground truth.
    Simulate(SimulateArgs),
    /// Run the synthetic error-scaling benchmark.
    Benchmark(BenchmarkArgs),
    /// Fit on a training file and score a test file.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct EstimatorFlags {
    /// Regularization added to every co-assigned pair.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value = "accelerated")]
    pub method: SpectralMethod,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Common normalizer for the original chain.
    #[arg(long = "d-override")]
    pub d_override: Option<f64>,
}

impl EstimatorFlags {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            nu: self.nu,
            method: self.method,
            tol: self.tol,
            max_iters: self.max_iters,
            d_override: self.d_override,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: ResponseFormat,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    /// Output CSV (item_id,beta,pi,d); standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "n")]
    pub n: usize,
    #[arg(long = "m")]
    pub m: usize,
    #[arg(long = "p", default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `grid` (uniform on [-1, 1]), `grid:LO:HI`, or `values:b1,b2,...`.
    #[arg(long = "beta-spec", default_value = "grid")]
    pub beta_spec: String,
    #[arg(long, default_value = "csv")]
    pub format: ResponseFormat,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON; defaults to the response path with extension `truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// e.g. "n=200,800,3200;m=10;p=1.0"
    #[arg(long)]
    pub grid: String,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated: spectral, spectral-original, rowsum, eigenvector, pmle.
    #[arg(long, default_value = "spectral")]
    pub methods: String,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Report path; `.csv`, `.slopes.csv` and `.json` siblings are written.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Training responses.
    #[arg(long)]
    pub input: PathBuf,
    /// Test responses with the same item columns.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: ResponseFormat,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    /// Comma-separated K values for top-K accuracy.
    #[arg(long)]
    pub topk: Option<String>,
    /// Items with fewer test responses are left out of the top-K reference.
    #[arg(long = "min-count", default_value_t = 1)]
    pub min_count: usize,
    /// Items with a higher mean test response are left out of the top-K reference.
    #[arg(long = "max-mean", default_value_t = 1.0)]
    pub max_mean: f64,
    /// Report path; `.csv` and `.json` siblings are written.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments, runs the subcommand, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

fn read_matrix(path: &Path, format: ResponseFormat) -> Result<ResponseMatrix> {
    load_responses(BufReader::new(File::open(path)?), format)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let x = read_matrix(&a.input, a.format)?;
    let est = spectral_estimate(&x, &a.estimator.config())?;
    eprintln!(
        "method={} users={} items={} ergodic={} components={} iterations={} residual={:e} lazified={}",
        est.method,
        x.n_users(),
        x.n_items(),
        est.connectivity.is_ergodic,
        est.connectivity.components.len(),
        est.stationary.iterations,
        est.stationary.residual,
        est.stationary.lazified
    );
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            est.write_csv(x.item_ids(), &mut w)?;
            w.flush()?;
        }
        None => est.write_csv(x.item_ids(), io::stdout().lock())?,
    }
    Ok(())
}

/// Item parameters from a `--beta-spec` string.
pub fn parse_beta_spec(spec: &str, m: usize) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("invalid beta spec {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if spec == "grid" {
        return Ok(GroundTruth::uniform_grid(m, -1.0, 1.0));
    }
    if let Some(range) = spec.strip_prefix("grid:") {
        let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
        return Ok(GroundTruth::uniform_grid(m, num(lo)?, num(hi)?));
    }
    if let Some(list) = spec.strip_prefix("values:") {
        let values = list.split(',').map(num).collect::<Result<Vec<_>>>()?;
        if values.len() != m {
            return Err(Error::InvalidInput(format!("beta spec lists {} values for m = {m}", values.len())));
        }
        return Ok(values);
    }
    Err(bad())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    if !(a.p > 0.0 && a.p <= 1.0) {
        return Err(Error::InvalidInput(format!("p = {} must lie in (0, 1]", a.p)));
    }
    let beta = parse_beta_spec(&a.beta_spec, a.m)?;
    let truth = GroundTruth::new(GroundTruth::uniform_theta(a.n, 1.0, a.seed), beta, a.p)?;
    let x = generate_synthetic(&truth, a.seed)?;
    let mut w = create(&a.out)?;
    save_responses(&x, a.format, &mut w)?;
    w.flush()?;
    let truth_path = a.truth.clone().unwrap_or_else(|| sibling(&a.out, "truth.json"));
    let mut w = create(&truth_path)?;
    serde_json::to_writer_pretty(&mut w, &truth).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mut cfg = BenchmarkConfig::new(parse_grid(&a.grid)?, a.trials, a.seed, parse_methods(&a.methods)?);
    cfg.estimator.nu = a.nu;
    cfg.estimator.tol = a.tol;
    cfg.estimator.max_iters = a.max_iters;
    let report = run_scaling_benchmark(&cfg)?;

    let mut w = create(&sibling(&a.out, "csv"))?;
    report.write_cells_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&sibling(&a.out, "slopes.csv"))?;
    report.write_slopes_csv(&mut w)?;
    w.flush()?;
    std::fs::write(sibling(&a.out, "json"), report.to_json())?;

    for c in &report.cells {
        eprintln!(
            "{} n={} m={} p={} median_l2={:?} excluded={}",
            c.method, c.n, c.m, c.p, c.median_l2, c.excluded
        );
    }
    for s in &report.slopes {
        eprintln!("slope {} {:?} m={} fixed={}: {:.4}", s.method, s.axis, s.m, s.fixed, s.slope);
    }
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let train = read_matrix(&a.input, a.format)?;
    let test = read_matrix(&a.test, a.format)?;
    let topk = match &a.topk {
        Some(s) => s
            .split(',')
            .map(|k| k.trim().parse::<usize>().map_err(|_| Error::InvalidInput(format!("invalid K {k:?}"))))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let opts = EvalOptions { topk, min_count: a.min_count, max_mean: a.max_mean };
    let report = evaluate(&train, &test, &a.estimator.config(), &opts)?;
    if report.skipped_users > 0 {
        eprintln!("warning: skipped {} test users with fewer than two responses", report.skipped_users);
    }
    let mut w = create(&sibling(&a.out, "csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    std::fs::write(sibling(&a.out, "json"), serde_json::to_string_pretty(&report).map_err(io::Error::from)?)?;
    eprintln!("auc={} avg_loglik={}", report.auc, report.avg_loglik);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_specs() {
        assert_eq!(parse_beta_spec("grid", 3).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_beta_spec("grid:0:2", 3).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_beta_spec("values:-0.5,0.5", 2).unwrap(), vec![-0.5, 0.5]);
        assert!(parse_beta_spec("values:1", 2).is_err());
        assert!(parse_beta_spec("normal", 2).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["rasch-spectral"]), 1);
        assert_eq!(run(["rasch-spectral", "estimate"]), 1);
        assert_eq!(run(["rasch-spectral", "estimate", "--input", "x.csv", "--method", "fast"]), 1);
        assert_eq!(run(["rasch-spectral", "--help"]), 0);
    }
}
