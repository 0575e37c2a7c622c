use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::baselines::{conditional_ratio_matrix, eigenvector_estimate, pmle_mm_estimate, rowsum_estimate};
use crate::chain::pairwise_diff_counts;
use crate::data::{generate_synthetic, softmax, GroundTruth, ResponseMatrix};
use crate::error::{Error, Result};
use crate::estimator::{spectral_estimate, EstimatorConfig, SpectralMethod};

use super::metrics::{l2_error, linf_rel_error};

/// Estimators the benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BenchMethod {
    Spectral,
    SpectralOriginal,
    RowSum,
    Eigenvector,
    Pmle,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 5] =
        [BenchMethod::Spectral, BenchMethod::SpectralOriginal, BenchMethod::RowSum, BenchMethod::Eigenvector, BenchMethod::Pmle];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Spectral => "spectral",
            BenchMethod::SpectralOriginal => "spectral-original",
            BenchMethod::RowSum => "rowsum",
            BenchMethod::Eigenvector => "eigenvector",
            BenchMethod::Pmle => "pmle",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<_> = Self::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidInput(format!("unknown method {s:?}; valid methods: {}", valid.join(", ")))
        })
    }
}

impl Serialize for BenchMethod {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(s: &str) -> Result<Vec<BenchMethod>> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub n: usize,
    pub m: usize,
    pub p: f64,
}

/// Parses `"n=200,800;m=10;p=1.0"` into the Cartesian product of the listed
/// values, ordered by m, then p, then n.
pub fn parse_grid(spec: &str) -> Result<Vec<GridCell>> {
    let bad = |msg: String| Error::InvalidInput(format!("grid {spec:?}: {msg}"));
    let mut dims: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, values) = part.split_once('=').ok_or_else(|| bad(format!("expected key=values, got {part:?}")))?;
        let key = key.trim();
        if !matches!(key, "n" | "m" | "p") {
            return Err(bad(format!("unknown dimension {key:?}")));
        }
        if dims.insert(key, values.split(',').map(str::trim).collect()).is_some() {
            return Err(bad(format!("dimension {key} given twice")));
        }
    }
    let get = |k: &str| dims.get(k).ok_or_else(|| bad(format!("missing dimension {k}")));
    let parse_usize = |v: &&str| v.parse::<usize>().map_err(|_| bad(format!("invalid count {v:?}")));
    let ns = get("n")?.iter().map(parse_usize).collect::<Result<Vec<_>>>()?;
    let ms = get("m")?.iter().map(parse_usize).collect::<Result<Vec<_>>>()?;
    let ps = get("p")?
        .iter()
        .map(|v| v.parse::<f64>().map_err(|_| bad(format!("invalid probability {v:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for &m in &ms {
        for &p in &ps {
            for &n in &ns {
                let cell = GridCell { n, m, p };
                if n < 1 || m < 2 || !(p > 0.0 && p <= 1.0) {
                    return Err(bad(format!("infeasible cell {cell:?}")));
                }
                cells.push(cell);
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub grid: Vec<GridCell>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<BenchMethod>,
    /// Estimation settings shared by every method (`method` is overridden).
    pub estimator: EstimatorConfig,
}

impl BenchmarkConfig {
    pub fn new(grid: Vec<GridCell>, trials: usize, seed: u64, methods: Vec<BenchMethod>) -> Self {
        Self { grid, trials, seed, methods, estimator: EstimatorConfig::default() }
    }
}

/// Aggregated errors of one method on one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub method: BenchMethod,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub trials: usize,
    /// Trials where estimation failed (e.g. disconnected comparisons).
    pub excluded: usize,
    pub median_l2: Option<f64>,
    pub median_linf_rel: Option<f64>,
    /// Mean power-iteration count (spectral methods only).
    pub mean_iterations: Option<f64>,
    /// Per-trial l2 errors by trial index; `None` for excluded trials.
    pub l2_errors: Vec<Option<f64>>,
    pub linf_rel_errors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeAxis {
    /// Error vs number of users at fixed (m, p).
    N,
    /// Error vs sampling probability at fixed (m, n).
    P,
}

/// Least-squares slope of log2(median l2 error) against log2 of the axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slope {
    pub method: BenchMethod,
    pub axis: SlopeAxis,
    pub m: usize,
    /// The other fixed coordinate: p for the n-axis, n for the p-axis.
    pub fixed: f64,
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub seed: u64,
    pub trials: usize,
    pub cells: Vec<CellResult>,
    pub slopes: Vec<Slope>,
}

impl ScalingReport {
    pub fn cell(&self, method: BenchMethod, n: usize, m: usize, p: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.method == method && c.n == n && c.m == m && c.p == p)
    }

    pub fn slope(&self, method: BenchMethod, axis: SlopeAxis) -> Option<&Slope> {
        self.slopes.iter().find(|s| s.method == method && s.axis == axis)
    }

    /// Columns: method,n,m,p,trials,excluded,median_l2,median_linf_rel,mean_iterations.
    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,n,m,p,trials,excluded,median_l2,median_linf_rel,mean_iterations")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                c.method,
                c.n,
                c.m,
                c.p,
                c.trials,
                c.excluded,
                opt(c.median_l2),
                opt(c.median_linf_rel),
                opt(c.mean_iterations)
            )?;
        }
        Ok(())
    }

    /// Columns: method,axis,m,fixed,slope,points.
    pub fn write_slopes_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,axis,m,fixed,slope,points")?;
        for s in &self.slopes {
            let axis = match s.axis {
                SlopeAxis::N => "n",
                SlopeAxis::P => "p",
            };
            writeln!(w, "{},{axis},{},{},{},{}", s.method, s.m, s.fixed, s.slope, s.points)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Item parameters used by every benchmark trial: a centered uniform grid on [-1, 1].
pub fn benchmark_beta(m: usize) -> Vec<f64> {
    GroundTruth::uniform_grid(m, -1.0, 1.0)
}

/// Ground truth for one trial: fixed grid beta, theta iid uniform on [-1, 1].
pub fn trial_truth(cell: GridCell, trial_seed: u64) -> Result<GroundTruth> {
    GroundTruth::new(GroundTruth::uniform_theta(cell.n, 1.0, trial_seed), benchmark_beta(cell.m), cell.p)
}

/// Seed of trial `t`: a word drawn from `seed`, XOR `t`. Drawing first keeps
/// nearby seeds from sharing trials (raw `seed ^ t` maps seeds 0 and 1 onto
/// the same set of trial seeds).
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    ChaCha8Rng::seed_from_u64(seed).next_u64() ^ trial as u64
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    l2: f64,
    linf: f64,
    iterations: Option<usize>,
}

fn estimate_with(method: BenchMethod, x: &ResponseMatrix, cfg: &EstimatorConfig) -> Result<(Vec<f64>, Option<usize>)> {
    let tol = cfg.tol;
    let iters = cfg.max_iters;
    match method {
        BenchMethod::Spectral | BenchMethod::SpectralOriginal => {
            let method = if method == BenchMethod::Spectral { SpectralMethod::Accelerated } else { SpectralMethod::Original };
            let est = spectral_estimate(x, &EstimatorConfig { method, ..cfg.clone() })?;
            Ok((est.beta, Some(est.stationary.iterations)))
        }
        BenchMethod::RowSum => {
            let cm = conditional_ratio_matrix(&pairwise_diff_counts(x, cfg.nu)?)?;
            Ok((rowsum_estimate(&cm)?, None))
        }
        BenchMethod::Eigenvector => {
            let cm = conditional_ratio_matrix(&pairwise_diff_counts(x, cfg.nu)?)?;
            Ok((eigenvector_estimate(&cm, tol, iters)?, None))
        }
        BenchMethod::Pmle => {
            let fit = pmle_mm_estimate(&pairwise_diff_counts(x, cfg.nu)?, 1e-8, 10_000)?;
            Ok((fit.beta, Some(fit.iterations)))
        }
    }
}

/// One synthetic trial on `cell`, every method on the same data.
fn run_trial(cfg: &BenchmarkConfig, cell: GridCell, trial: usize) -> Result<Vec<Option<TrialOutcome>>> {
    let seed = trial_seed(cfg.seed, trial);
    let truth = trial_truth(cell, seed)?;
    let x = generate_synthetic(&truth, seed)?;
    let pi_star = truth.pi_star();
    Ok(cfg
        .methods
        .iter()
        .map(|&method| {
            estimate_with(method, &x, &cfg.estimator).ok().map(|(beta, iterations)| TrialOutcome {
                l2: l2_error(&beta, &truth.beta),
                linf: linf_rel_error(&softmax(&beta), &pi_star),
                iterations,
            })
        })
        .collect())
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs `trials` synthetic experiments per grid cell and method, reports
/// median errors and log-log slopes. Deterministic given the config; trials
/// may run in parallel because each owns its random streams.
pub fn run_scaling_benchmark(cfg: &BenchmarkConfig) -> Result<ScalingReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    if cfg.methods.is_empty() || cfg.grid.is_empty() {
        return Err(Error::InvalidInput("benchmark needs at least one method and one grid cell".into()));
    }
    cfg.estimator.validate()?;

    let mut cells = Vec::new();
    for &cell in &cfg.grid {
        let outcomes: Vec<Vec<Option<TrialOutcome>>> =
            (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, cell, t)).collect::<Result<_>>()?;
        for (k, &method) in cfg.methods.iter().enumerate() {
            let per_trial: Vec<Option<TrialOutcome>> = outcomes.iter().map(|o| o[k]).collect();
            let ok: Vec<TrialOutcome> = per_trial.iter().flatten().copied().collect();
            let l2: Vec<f64> = ok.iter().map(|o| o.l2).collect();
            let linf: Vec<f64> = ok.iter().map(|o| o.linf).collect();
            let iters: Vec<usize> = ok.iter().filter_map(|o| o.iterations).collect();
            cells.push(CellResult {
                method,
                n: cell.n,
                m: cell.m,
                p: cell.p,
                trials: cfg.trials,
                excluded: cfg.trials - ok.len(),
                median_l2: median(&l2),
                median_linf_rel: median(&linf),
                mean_iterations: (!iters.is_empty()).then(|| iters.iter().sum::<usize>() as f64 / iters.len() as f64),
                l2_errors: per_trial.iter().map(|o| o.map(|o| o.l2)).collect(),
                linf_rel_errors: per_trial.iter().map(|o| o.map(|o| o.linf)).collect(),
            });
        }
    }
    let slopes = fit_slopes(&cells, &cfg.methods);
    Ok(ScalingReport { seed: cfg.seed, trials: cfg.trials, cells, slopes })
}

fn fit_slopes(cells: &[CellResult], methods: &[BenchMethod]) -> Vec<Slope> {
    let mut slopes = Vec::new();
    for &method in methods {
        for axis in [SlopeAxis::N, SlopeAxis::P] {
            // group key: (m, bits of the fixed coordinate)
            let mut groups: BTreeMap<(usize, u64), Vec<(f64, f64)>> = BTreeMap::new();
            for c in cells.iter().filter(|c| c.method == method) {
                let Some(err) = c.median_l2.filter(|e| *e > 0.0) else { continue };
                let (fixed, x) = match axis {
                    SlopeAxis::N => (c.p, c.n as f64),
                    SlopeAxis::P => (c.n as f64, c.p),
                };
                groups.entry((c.m, fixed.to_bits())).or_default().push((x.log2(), err.log2()));
            }
            for ((m, fixed), pts) in groups {
                let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                xs.dedup();
                if xs.len() < 2 {
                    continue;
                }
                let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
                slopes.push(Slope { method, axis, m, fixed: f64::from_bits(fixed), slope: ols_slope(&x, &y), points: pts.len() });
            }
        }
    }
    slopes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("n=200,800,3200;m=10;p=1.0").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[2], GridCell { n: 3200, m: 10, p: 1.0 });
        let g = parse_grid(" n=100 ; m=5,6 ; p=0.5,1 ").unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[1], GridCell { n: 100, m: 5, p: 1.0 });
        for bad in ["n=200;m=10", "n=200;m=1;p=1", "n=200;m=10;p=0", "n=x;m=10;p=1", "n=1;n=2;m=3;p=1", "q=1", "n200;m=2;p=1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn method_names() {
        assert_eq!(parse_methods("spectral,pmle").unwrap(), vec![BenchMethod::Spectral, BenchMethod::Pmle]);
        let err = parse_methods("spectral,magic").unwrap_err().to_string();
        assert!(err.contains("valid methods") && err.contains("eigenvector"));
    }

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 3.0].to_vec();
        let y: Vec<f64> = x.iter().map(|v| -0.5 * v + 3.0).collect();
        assert!((ols_slope(&x, &y) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn single_trial_report() {
        let cfg = BenchmarkConfig::new(parse_grid("n=300;m=5;p=1").unwrap(), 1, 9, vec![BenchMethod::Spectral]);
        let r = run_scaling_benchmark(&cfg).unwrap();
        assert_eq!(r.cells.len(), 1);
        let c = &r.cells[0];
        assert_eq!(c.median_l2, c.l2_errors[0]);
        assert!(r.slopes.is_empty());
    }
}
