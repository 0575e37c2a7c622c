//! Pairwise differential counts and the item-item Markov chains built on them.
//!
//! `Y[i][j]` counts users who answered item `i` positively and item `j`
//! negatively while being assigned both. A walk moves from `i` to `j` in
//! proportion to `Y[i][j]`, so stationary mass accumulates on harder items
//! and `pi_i` is proportional to `exp(beta_i)` under the Rasch model.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::data::{assignment_stats, sigmoid, GroundTruth, ResponseMatrix};
use crate::error::{Error, Result};
use crate::graph;

/// Tolerance for the reversibility precondition of [`spectral_gap`].
pub const REVERSIBILITY_TOL: f64 = 1e-8;

/// Regularized differential counts `Y` and co-assignment counts `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseStats {
    pub y: Array2<f64>,
    pub b: Array2<u64>,
    pub nu: f64,
}

impl PairwiseStats {
    pub fn n_items(&self) -> usize {
        self.y.nrows()
    }

    /// Builds stats directly from a differential-count matrix; `B` is taken
    /// as `Y + Y^T` (every comparison observed), `nu` as 0.
    pub fn from_counts(y: Array2<f64>) -> Result<Self> {
        let m = y.nrows();
        if y.ncols() != m || m < 2 {
            return Err(Error::InvalidInput("count matrix must be square with m >= 2".into()));
        }
        if y.iter().any(|v| !v.is_finite() || *v < 0.0) || (0..m).any(|i| y[[i, i]] != 0.0) {
            return Err(Error::InvalidInput("counts must be finite, nonnegative, zero on the diagonal".into()));
        }
        let b = Array2::from_shape_fn((m, m), |(i, j)| (y[[i, j]] + y[[j, i]]).ceil() as u64);
        Ok(Self { y, b, nu: 0.0 })
    }

    /// Total outgoing mass `sum_{k != i} Y[i][k]` per item.
    pub fn out_mass(&self) -> Vec<f64> {
        self.y.rows().into_iter().enumerate().map(|(i, r)| r.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v).sum()).collect()
    }

    /// Debug dump: `nu,<v>` then one `Y,...` line per row, then `B,...` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "nu,{}", self.nu)?;
        for row in self.y.rows() {
            writeln!(w, "Y,{}", join(row.iter()))?;
        }
        for row in self.b.rows() {
            writeln!(w, "B,{}", join(row.iter()))?;
        }
        Ok(())
    }
}

/// Counts pairwise differential measurements and adds `nu` to every pair
/// that was co-assigned at least once.
pub fn pairwise_diff_counts(x: &ResponseMatrix, nu: f64) -> Result<PairwiseStats> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::InvalidInput(format!("regularization nu = {nu} must be >= 0")));
    }
    let m = x.n_items();
    let mut counts = vec![0u64; m * m];
    let mut ones = Vec::with_capacity(m);
    let mut zeros = Vec::with_capacity(m);
    for row in x.rows() {
        ones.clear();
        zeros.clear();
        for (i, cell) in row.iter().enumerate() {
            match cell.response() {
                Some(true) => ones.push(i),
                Some(false) => zeros.push(i),
                None => {}
            }
        }
        for &i in &ones {
            let r = &mut counts[i * m..(i + 1) * m];
            for &j in &zeros {
                r[j] += 1;
            }
        }
    }
    let b = assignment_stats(x, None).b;
    let y = Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            0.0
        } else if b[[i, j]] > 0 {
            counts[i * m + j] as f64 + nu
        } else {
            0.0
        }
    });
    Ok(PairwiseStats { y, b, nu })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    /// Common normalizer for every row.
    Original,
    /// Per-row normalizers equal to the outgoing mass.
    Accelerated,
    /// Expected counts under known model parameters.
    Idealized,
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainKind::Original => "original",
            ChainKind::Accelerated => "accelerated",
            ChainKind::Idealized => "idealized",
        })
    }
}

/// Row-stochastic transition matrix with the normalizers used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub p: Array2<f64>,
    pub d: Vec<f64>,
    pub kind: ChainKind,
}

impl MarkovChain {
    /// Wraps a transition matrix after checking it is row-stochastic.
    pub fn from_matrix(p: Array2<f64>, d: Vec<f64>, kind: ChainKind) -> Result<Self> {
        if p.nrows() != p.ncols() || d.len() != p.nrows() {
            return Err(Error::InvalidInput("transition matrix must be square and match d".into()));
        }
        let chain = Self { p, d, kind };
        chain.validate_stochastic(1e-9)?;
        Ok(chain)
    }

    pub fn n_states(&self) -> usize {
        self.p.nrows()
    }

    /// Errors unless all entries are nonnegative and rows sum to 1 within `tol`.
    pub fn validate_stochastic(&self, tol: f64) -> Result<()> {
        for (row, r) in self.p.rows().into_iter().enumerate() {
            let sum: f64 = r.sum();
            if r.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > tol {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        Ok(())
    }

    /// Debug dump: `kind,<kind>`, `d,<d_1>,...`, then the matrix row-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,{}", self.kind)?;
        writeln!(w, "d,{}", join(self.d.iter()))?;
        for row in self.p.rows() {
            writeln!(w, "{}", join(row.iter()))?;
        }
        Ok(())
    }
}

fn join<T: fmt::Display>(it: impl Iterator<Item = T>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Off-diagonal `P_ij = w_ij / d_i`, diagonal filled so rows sum to one.
fn normalize_rows(w: &Array2<f64>, d: &[f64], kind: ChainKind) -> MarkovChain {
    let m = w.nrows();
    let mut p = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        let mut off = 0.0;
        for j in 0..m {
            if i != j {
                let v = w[[i, j]] / d[i];
                p[[i, j]] = v;
                off += v;
            }
        }
        // d_i equal to the outgoing mass can leave -1 ulp here
        p[[i, i]] = (1.0 - off).max(0.0);
    }
    MarkovChain { p, d: d.to_vec(), kind }
}

fn check_normalizer(mass: &[f64], d: f64) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidNormalizer { item: 0, mass: mass.first().copied().unwrap_or(0.0), d });
    }
    for (item, &s) in mass.iter().enumerate() {
        if s > d * (1.0 + 1e-12) {
            return Err(Error::InvalidNormalizer { item, mass: s, d });
        }
    }
    Ok(())
}

/// Chain with one common normalizer `d`. The default is the largest
/// outgoing mass (the smallest `d` keeping every diagonal nonnegative), or 1
/// when there are no differential counts at all.
pub fn build_chain_original(stats: &PairwiseStats, d_override: Option<f64>) -> Result<MarkovChain> {
    let mass = stats.out_mass();
    let d = match d_override {
        Some(d) => {
            check_normalizer(&mass, d)?;
            d
        }
        None => {
            let max = mass.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                max
            } else {
                1.0
            }
        }
    };
    Ok(normalize_rows(&stats.y, &vec![d; mass.len()], ChainKind::Original))
}

/// Chain with per-item normalizers `d_i = max(sum_k Y_ik, 1)`: every item
/// with at least unit outgoing mass loses its self-loop.
pub fn build_chain_accelerated(stats: &PairwiseStats) -> MarkovChain {
    let d: Vec<f64> = stats.out_mass().into_iter().map(|s| s.max(1.0)).collect();
    normalize_rows(&stats.y, &d, ChainKind::Accelerated)
}

/// Expected differential counts `sum_l A_li A_lj s_li (1 - s_lj)` with
/// `s_li = sigmoid(theta_l - beta_i)`, using the assignment pattern of `x`.
pub fn expected_counts(truth: &GroundTruth, x: &ResponseMatrix) -> Result<Array2<f64>> {
    let m = x.n_items();
    if truth.n_items() != m || truth.n_users() != x.n_users() {
        return Err(Error::InvalidInput(format!(
            "ground truth is {}x{}, responses are {}x{}",
            truth.n_users(),
            truth.n_items(),
            x.n_users(),
            m
        )));
    }
    let mut w = Array2::<f64>::zeros((m, m));
    let mut probs: Vec<(usize, f64)> = Vec::with_capacity(m);
    for (row, &theta) in x.rows().zip(&truth.theta) {
        probs.clear();
        probs.extend(
            row.iter()
                .enumerate()
                .filter(|(_, c)| c.is_assigned())
                .map(|(i, _)| (i, sigmoid(theta - truth.beta[i]))),
        );
        for &(i, si) in &probs {
            for &(j, sj) in &probs {
                if i != j {
                    w[[i, j]] += si * (1.0 - sj);
                }
            }
        }
    }
    Ok(w)
}

/// The idealized chain built from expected counts. With `d = None` the
/// smallest valid common normalizer is used. Intended as a test oracle.
pub fn build_idealized_chain(truth: &GroundTruth, x: &ResponseMatrix, d: Option<f64>) -> Result<MarkovChain> {
    let w = expected_counts(truth, x)?;
    let m = w.nrows();
    let mass: Vec<f64> = (0..m).map(|i| (0..m).filter(|&k| k != i).map(|k| w[[i, k]]).sum()).collect();
    let d = match d {
        Some(d) => {
            check_normalizer(&mass, d)?;
            d
        }
        None => mass.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE),
    };
    Ok(normalize_rows(&w, &vec![d; m], ChainKind::Idealized))
}

/// Strong connectivity of the comparison graph `i -> j iff Y_ij > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityReport {
    /// One strongly connected component covering all items. The stationary
    /// solver removes any periodicity by lazifying, so this is the condition
    /// for a unique positive stationary distribution.
    pub is_ergodic: bool,
    pub components: Vec<Vec<usize>>,
    /// Items that no other item sends mass to.
    pub isolated_items: Vec<usize>,
    /// Period of the comparison graph (self-loops excluded) when it is
    /// strongly connected. A value of 2 marks the bipartite case in which a
    /// chain without self-loops would oscillate.
    pub period: Option<usize>,
}

pub fn check_ergodicity(stats: &PairwiseStats) -> ConnectivityReport {
    let m = stats.n_items();
    let y = &stats.y;
    let edge = |i: usize, j: usize| i != j && y[[i, j]] > 0.0;
    let components = graph::strongly_connected_components(m, edge);
    let isolated_items = (0..m).filter(|&j| (0..m).all(|i| !edge(i, j))).collect();
    let is_ergodic = components.len() == 1;
    ConnectivityReport {
        is_ergodic,
        period: is_ergodic.then(|| graph::period(m, edge)),
        components,
        isolated_items,
    }
}

/// `1 - ||L^{1/2} (P - 1 pi^T) L^{-1/2}||_2` with `L = diag(pi)`. For a
/// chain reversible w.r.t. `pi` the matrix is symmetric and the norm is the
/// largest non-unit eigenvalue modulus of `P`.
pub fn spectral_gap(chain: &MarkovChain, pi: &[f64]) -> Result<f64> {
    let m = chain.n_states();
    if pi.len() != m {
        return Err(Error::InvalidInput(format!("pi has length {}, chain has {m} states", pi.len())));
    }
    if pi.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("pi must be strictly positive".into()));
    }
    let p = &chain.p;
    for i in 0..m {
        for j in (i + 1)..m {
            let imbalance = (pi[i] * p[[i, j]] - pi[j] * p[[j, i]]).abs();
            if imbalance > REVERSIBILITY_TOL {
                return Err(Error::NotReversible { i, j, imbalance });
            }
        }
    }
    let sqrt_pi: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let s = DMatrix::from_fn(m, m, |i, j| sqrt_pi[i] * (p[[i, j]] - pi[j]) / sqrt_pi[j]);
    let sym = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let norm = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(1.0 - norm)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn fixture() -> ResponseMatrix {
        ResponseMatrix::from_rows(&[[Some(true), Some(false)], [Some(false), Some(true)], [Some(true), None]]).unwrap()
    }

    #[test]
    fn counts_and_regularization() {
        let s = pairwise_diff_counts(&fixture(), 0.0).unwrap();
        assert_eq!(s.y, array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(s.b[[0, 1]], 2);
        let s = pairwise_diff_counts(&fixture(), 1.0).unwrap();
        assert_eq!(s.y, array![[0.0, 2.0], [2.0, 0.0]]);

        let all_ones = ResponseMatrix::from_rows(&vec![vec![Some(true); 3]; 4]).unwrap();
        let s = pairwise_diff_counts(&all_ones, 0.0).unwrap();
        assert!(s.y.iter().all(|&v| v == 0.0));
        assert!(pairwise_diff_counts(&all_ones, -1.0).is_err());
    }

    #[test]
    fn original_chain() {
        let s = PairwiseStats::from_counts(array![[0.0, 2.0], [1.0, 0.0]]).unwrap();
        let c = build_chain_original(&s, None).unwrap();
        assert_eq!(c.p, array![[0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(c.d, vec![2.0, 2.0]);
        assert!(matches!(build_chain_original(&s, Some(1.0)), Err(Error::InvalidNormalizer { item: 0, .. })));
        let c = build_chain_original(&s, Some(4.0)).unwrap();
        assert_eq!(c.p, array![[0.5, 0.5], [0.25, 0.75]]);

        let zero = PairwiseStats::from_counts(Array2::zeros((3, 3))).unwrap();
        assert_eq!(build_chain_original(&zero, None).unwrap().p, Array2::<f64>::eye(3));
    }

    #[test]
    fn accelerated_chain() {
        let s = PairwiseStats::from_counts(array![[0.0, 2.0], [1.0, 0.0]]).unwrap();
        let c = build_chain_accelerated(&s);
        assert_eq!(c.d, vec![2.0, 1.0]);
        assert_eq!(c.p, array![[0.0, 1.0], [1.0, 0.0]]);

        let s = PairwiseStats::from_counts(array![[0.0, 3.0], [3.0, 0.0]]).unwrap();
        let c = build_chain_accelerated(&s);
        assert_eq!(c.d, vec![3.0, 3.0]);
        assert_eq!(c.p, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn accelerated_regularized_has_no_self_loops() {
        // item 0 is never answered positively, so it never "wins" raw
        let x = ResponseMatrix::from_rows(&[
            [Some(false), Some(true), Some(false)],
            [Some(false), Some(true), Some(true)],
            [Some(false), Some(false), Some(true)],
        ])
        .unwrap();
        let raw = pairwise_diff_counts(&x, 0.0).unwrap();
        assert_eq!(raw.out_mass()[0], 0.0);
        let c = build_chain_accelerated(&pairwise_diff_counts(&x, 1.0).unwrap());
        for i in 0..3 {
            assert_eq!(c.p[[i, i]], 0.0);
        }
    }

    #[test]
    fn idealized_two_items() {
        let truth = GroundTruth::new(vec![0.0], vec![0.0, 0.0], 1.0).unwrap();
        let x = ResponseMatrix::from_rows(&[[Some(true), Some(true)]]).unwrap();
        let c = build_idealized_chain(&truth, &x, Some(1.0)).unwrap();
        assert!((c.p[[0, 1]] - 0.25).abs() < 1e-15);
        assert!((c.p[[1, 0]] - 0.25).abs() < 1e-15);
        assert!(build_idealized_chain(&truth, &x, Some(0.1)).is_err());
    }

    #[test]
    fn ergodicity_reports() {
        let s = PairwiseStats::from_counts(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let r = check_ergodicity(&s);
        assert!(r.is_ergodic);
        assert_eq!(r.period, Some(2));

        let block = array![[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0]];
        let r = check_ergodicity(&PairwiseStats::from_counts(block).unwrap());
        assert!(!r.is_ergodic);
        assert_eq!(r.components, vec![vec![0, 1], vec![2, 3]]);

        // item 2 sends mass but never receives any
        let y = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        let r = check_ergodicity(&PairwiseStats::from_counts(y).unwrap());
        assert!(!r.is_ergodic);
        assert_eq!(r.isolated_items, vec![2]);
    }

    #[test]
    fn gap_examples() {
        let half = MarkovChain::from_matrix(array![[0.5, 0.5], [0.5, 0.5]], vec![1.0; 2], ChainKind::Original).unwrap();
        assert!((spectral_gap(&half, &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-12);
        let id = MarkovChain::from_matrix(Array2::eye(3), vec![1.0; 3], ChainKind::Original).unwrap();
        assert!(spectral_gap(&id, &[1.0 / 3.0; 3]).unwrap().abs() < 1e-12);
        let c = MarkovChain::from_matrix(array![[0.0, 1.0], [0.5, 0.5]], vec![2.0; 2], ChainKind::Original).unwrap();
        assert!(matches!(spectral_gap(&c, &[0.5, 0.5]), Err(Error::NotReversible { .. })));
    }

    #[test]
    fn csv_dumps() {
        let s = PairwiseStats::from_counts(array![[0.0, 2.0], [1.0, 0.0]]).unwrap();
        let mut out = Vec::new();
        build_chain_accelerated(&s).write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "kind,accelerated\nd,2,1\n0,1\n1,0\n");
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "nu,0\nY,0,2\nY,1,0\nB,0,3\nB,3,0\n");
    }
}
