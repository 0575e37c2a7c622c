//! Classical pairwise estimators used for comparison, and per-user ability
//! fitting for held-out scoring.
//!
//! Conditioned on a user answering exactly one of items `i` and `j`
//! correctly, the Rasch model gives
//! `P(X_i = 1, X_j = 0 | X_i + X_j = 1) = e^{-beta_i} / (e^{-beta_i} + e^{-beta_j})`:
//! user ability cancels, leaving a Bradley-Terry model with strengths
//! `s_i = e^{-beta_i}` in which item `i` beats item `j` `Y_ij` times.

use ndarray::Array2;

use crate::chain::{check_ergodicity, PairwiseStats};
use crate::data::{sigmoid, Cell};
use crate::error::{Error, Result};
use crate::estimator::normalize_beta;

/// Empirical conditional win rates and the reciprocal matrix derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMatrix {
    /// `f[[i, j]]` = fraction of one-sided comparisons won by `i` (0.5 on the diagonal).
    pub f: Array2<f64>,
    /// `N_ij = Y_ij + Y_ji`.
    pub counts: Array2<f64>,
    /// `D_ij = f_ji / f_ij`, ones on the diagonal.
    pub d: Array2<f64>,
}

impl ConditionalMatrix {
    pub fn n_items(&self) -> usize {
        self.f.nrows()
    }

    /// The population limit for known parameters: `f_ij = e^{beta_j} / (e^{beta_i} + e^{beta_j})`,
    /// so `ln D_ij = beta_i - beta_j`.
    pub fn exact(beta: &[f64]) -> Self {
        let m = beta.len();
        let f = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 0.5 } else { sigmoid(beta[j] - beta[i]) });
        let d = Array2::from_shape_fn((m, m), |(i, j)| (beta[i] - beta[j]).exp());
        Self { f, counts: Array2::zeros((m, m)), d }
    }

    fn check_complete(&self) -> Result<()> {
        let m = self.n_items();
        for i in 0..m {
            for j in 0..m {
                let v = self.d[[i, j]];
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::IncompleteMatrix { i, j });
                }
            }
        }
        Ok(())
    }
}

pub fn conditional_ratio_matrix(stats: &PairwiseStats) -> Result<ConditionalMatrix> {
    let m = stats.n_items();
    let y = &stats.y;
    let mut f = Array2::from_elem((m, m), 0.5);
    let mut counts = Array2::zeros((m, m));
    let mut d = Array2::ones((m, m));
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let n = y[[i, j]] + y[[j, i]];
            if !(n > 0.0) {
                return Err(Error::IncompleteMatrix { i, j });
            }
            counts[[i, j]] = n;
            f[[i, j]] = y[[i, j]] / n;
            d[[i, j]] = y[[j, i]] / y[[i, j]];
        }
    }
    Ok(ConditionalMatrix { f, counts, d })
}

/// Row means of `ln D`, centered.
pub fn rowsum_estimate(cm: &ConditionalMatrix) -> Result<Vec<f64>> {
    cm.check_complete()?;
    let m = cm.n_items() as f64;
    let raw: Vec<f64> = cm.d.rows().into_iter().map(|r| r.iter().map(|v| v.ln()).sum::<f64>() / m).collect();
    Ok(normalize_beta(&raw))
}

/// Perron vector `v` of `D` (`D v = lambda v`) by power iteration; returns
/// centered `log v`.
pub fn eigenvector_estimate(cm: &ConditionalMatrix, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    cm.check_complete()?;
    let m = cm.n_items();
    let d = cm.d.as_slice().expect("standard layout");
    let mut v = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for _ in 0..max_iters {
        for (i, out) in next.iter_mut().enumerate() {
            *out = d[i * m..(i + 1) * m].iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        if delta < tol {
            return Ok(normalize_beta(&v.iter().map(|x| x.ln()).collect::<Vec<_>>()));
        }
    }
    let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
    Err(Error::NoConvergence { iterations: max_iters, residual, last: v })
}

/// Result of the pairwise maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PmleFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// Pairwise log-likelihood before the first sweep and after every sweep.
    pub loglik_trace: Vec<f64>,
}

/// `sum_{i != j} Y_ij log sigmoid(beta_j - beta_i)`: the log-probability of
/// every observed one-sided outcome.
pub fn pairwise_loglik(y: &Array2<f64>, beta: &[f64]) -> f64 {
    let m = beta.len();
    let mut ll = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j && y[[i, j]] > 0.0 {
                ll += y[[i, j]] * log_sigmoid(beta[j] - beta[i]);
            }
        }
    }
    ll
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Pairwise conditional MLE via the minorization-maximization update
/// `s_i <- W_i / sum_j N_ij / (s_i + s_j)`, iterated until the l-infinity
/// change of beta is below `tol`.
pub fn pmle_mm_estimate(stats: &PairwiseStats, tol: f64, max_iters: usize) -> Result<PmleFit> {
    let m = stats.n_items();
    let y = &stats.y;
    let wins = stats.out_mass();
    if let Some(item) = wins.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::DegenerateItem { item });
    }
    let report = check_ergodicity(stats);
    if !report.is_ergodic {
        return Err(Error::NotErgodic { components: report.components });
    }
    let n = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 0.0 } else { y[[i, j]] + y[[j, i]] });

    let mut s = vec![1.0; m];
    let mut beta = vec![0.0; m];
    let mut trace = vec![pairwise_loglik(y, &beta)];
    for iter in 1..=max_iters {
        let mut next: Vec<f64> = (0..m)
            .map(|i| {
                let denom: f64 = (0..m).filter(|&j| j != i && n[[i, j]] > 0.0).map(|j| n[[i, j]] / (s[i] + s[j])).sum();
                wins[i] / denom
            })
            .collect();
        let gmean = (next.iter().map(|v| v.ln()).sum::<f64>() / m as f64).exp();
        next.iter_mut().for_each(|v| *v /= gmean);
        let next_beta = normalize_beta(&next.iter().map(|v| -v.ln()).collect::<Vec<_>>());
        let change = next_beta.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        s = next;
        beta = next_beta;
        trace.push(pairwise_loglik(y, &beta));
        if change < tol {
            return Ok(PmleFit { beta, iterations: iter, loglik_trace: trace });
        }
    }
    Err(Error::NoConvergence { iterations: max_iters, residual: f64::NAN, last: beta })
}

/// Bound on fitted abilities; beyond it response probabilities are within
/// 5e-5 of 0 or 1.
pub const THETA_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaFit {
    pub theta: f64,
    /// The estimate sits on the clamp (e.g. all responses identical).
    pub at_boundary: bool,
}

/// Ability MLE for one user over `(response, beta_i)` pairs by damped Newton
/// steps on the concave Rasch log-likelihood, clamped to `[-10, 10]`.
pub fn theta_mle_pairs(responses: &[(bool, f64)]) -> Result<ThetaFit> {
    if responses.is_empty() {
        return Err(Error::InvalidInput("user has no assigned responses".into()));
    }
    if responses.iter().all(|r| r.0) {
        return Ok(ThetaFit { theta: THETA_CLAMP, at_boundary: true });
    }
    if responses.iter().all(|r| !r.0) {
        return Ok(ThetaFit { theta: -THETA_CLAMP, at_boundary: true });
    }
    let mut theta = 0.0f64;
    for _ in 0..200 {
        let (mut grad, mut hess) = (0.0, 0.0);
        for &(x, b) in responses {
            let p = sigmoid(theta - b);
            grad += if x { 1.0 } else { 0.0 } - p;
            hess += p * (1.0 - p);
        }
        let step = (grad / hess.max(1e-300)).clamp(-1.0, 1.0);
        theta = (theta + step).clamp(-THETA_CLAMP, THETA_CLAMP);
        if step.abs() < 1e-12 {
            break;
        }
    }
    Ok(ThetaFit { theta, at_boundary: theta.abs() >= THETA_CLAMP })
}

/// Ability MLE for one response row against item parameters `beta`.
pub fn theta_mle(row: &[Cell], beta: &[f64]) -> Result<ThetaFit> {
    if row.len() != beta.len() {
        return Err(Error::InvalidInput("row and beta differ in length".into()));
    }
    let pairs: Vec<(bool, f64)> = row.iter().zip(beta).filter_map(|(c, &b)| c.response().map(|x| (x, b))).collect();
    theta_mle_pairs(&pairs)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    const HALF_LN2: f64 = 0.34657359027997264;

    fn stats(y: Array2<f64>) -> PairwiseStats {
        PairwiseStats::from_counts(y).unwrap()
    }

    #[test]
    fn conditional_matrix_arithmetic() {
        let cm = conditional_ratio_matrix(&stats(array![[0.0, 2.0], [1.0, 0.0]])).unwrap();
        assert!((cm.f[[0, 1]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((cm.d[[0, 1]] - 0.5).abs() < 1e-15);
        assert!((cm.d[[0, 1]] * cm.d[[1, 0]] - 1.0).abs() < 1e-15);
        let cm = conditional_ratio_matrix(&stats(array![[0.0, 3.0], [3.0, 0.0]])).unwrap();
        assert_eq!(cm.d[[0, 1]], 1.0);
        let missing = stats(array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        assert!(matches!(conditional_ratio_matrix(&missing), Err(Error::IncompleteMatrix { i: 0, j: 2 })));
    }

    #[test]
    fn exact_limit() {
        let beta = [0.3, -0.1];
        let cm = ConditionalMatrix::exact(&beta);
        let expect = beta[1].exp() / (beta[0].exp() + beta[1].exp());
        assert!((cm.f[[0, 1]] - expect).abs() < 1e-15);
    }

    #[test]
    fn rowsum_cases() {
        let b = rowsum_estimate(&ConditionalMatrix::exact(&[0.0, 1.0])).unwrap();
        assert!((b[0] + 0.5).abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15);
        let ones = ConditionalMatrix { d: Array2::ones((3, 3)), ..ConditionalMatrix::exact(&[0.0; 3]) };
        assert_eq!(rowsum_estimate(&ones).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn eigenvector_cases() {
        let cm = ConditionalMatrix::exact(&[0.0, 2f64.ln()]);
        assert!((cm.d[[0, 1]] - 0.5).abs() < 1e-15 && (cm.d[[1, 0]] - 2.0).abs() < 1e-15);
        let b = eigenvector_estimate(&cm, 1e-12, 1000).unwrap();
        assert!((b[0] + HALF_LN2).abs() < 1e-12 && (b[1] - HALF_LN2).abs() < 1e-12);

        let ones = ConditionalMatrix { d: Array2::ones((4, 4)), ..ConditionalMatrix::exact(&[0.0; 4]) };
        assert!(eigenvector_estimate(&ones, 1e-12, 1000).unwrap().iter().all(|v| v.abs() < 1e-15));

        let mut scaled = ConditionalMatrix::exact(&[0.2, -0.5, 0.3]);
        let base = eigenvector_estimate(&scaled, 1e-13, 1000).unwrap();
        scaled.d.mapv_inplace(|v| v * 7.5);
        let again = eigenvector_estimate(&scaled, 1e-13, 1000).unwrap();
        for (a, b) in base.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pmle_two_items() {
        let fit = pmle_mm_estimate(&stats(array![[0.0, 2.0], [1.0, 0.0]]), 1e-12, 10_000).unwrap();
        assert!((fit.beta[0] + HALF_LN2).abs() < 1e-8);
        let fit = pmle_mm_estimate(&stats(array![[0.0, 5.0], [5.0, 0.0]]), 1e-12, 10_000).unwrap();
        assert!(fit.beta.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn pmle_zero_win_item() {
        let s = stats(array![[0.0, 0.0], [3.0, 0.0]]);
        assert!(matches!(pmle_mm_estimate(&s, 1e-8, 100), Err(Error::DegenerateItem { item: 0 })));
    }

    #[test]
    fn theta_cases() {
        use Cell::*;
        let fit = theta_mle(&[One, Zero], &[0.0, 0.0]).unwrap();
        assert!(fit.theta.abs() < 1e-12 && !fit.at_boundary);
        assert_eq!(theta_mle(&[One, One], &[0.0, 1.0]).unwrap(), ThetaFit { theta: 10.0, at_boundary: true });
        assert_eq!(theta_mle(&[One, Missing], &[0.0, 1.0]).unwrap().theta, 10.0);
        assert_eq!(theta_mle(&[Zero, Zero], &[0.0, 1.0]).unwrap().theta, -10.0);
        assert!(theta_mle(&[Missing, Missing], &[0.0, 1.0]).is_err());

        // first-order condition sum(x - p) = 0 at an interior fit
        let beta = [-1.0, 0.0, 0.5, 2.0];
        let row = [One, One, Zero, Zero];
        let t = theta_mle(&row, &beta).unwrap().theta;
        let score: f64 = row.iter().zip(&beta).map(|(c, b)| (*c == One) as u8 as f64 - sigmoid(t - b)).sum();
        assert!(score.abs() < 1e-10);
    }
}
