//! Power iteration for the stationary distribution of a row-stochastic matrix.

use crate::chain::MarkovChain;
use crate::error::{Error, Result};
use crate::graph;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub pi: Vec<f64>,
    pub iterations: usize,
    /// `||pi^T P - pi^T||_1` at exit, against the original (non-lazy) chain.
    pub residual: f64,
    pub converged: bool,
    /// Iteration ran on `(P + I) / 2` because `P` is periodic.
    pub lazified: bool,
}

/// Stationary distribution by power iteration from the uniform vector.
///
/// Stops when successive iterates differ by less than `tol` in l1. The chain
/// must be irreducible; a periodic chain is iterated in its lazy form, which
/// has the same stationary distribution.
pub fn stationary_distribution(chain: &MarkovChain, tol: f64, max_iters: usize) -> Result<StationaryResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    chain.validate_stochastic(1e-9)?;
    let m = chain.n_states();
    let p = chain.p.as_slice().expect("standard layout");

    let comps = graph::strongly_connected_components(m, |i, j| p[i * m + j] > 0.0);
    if comps.len() != 1 {
        return Err(Error::NotErgodic { components: comps });
    }
    let lazified = graph::period(m, |i, j| p[i * m + j] > 0.0) > 1;

    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for iter in 1..=max_iters {
        step(p, m, &pi, &mut next);
        if lazified {
            for (n, &x) in next.iter_mut().zip(&pi) {
                *n = 0.5 * (*n + x);
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if delta < tol {
            let residual = residual(p, m, &pi);
            return Ok(StationaryResult { pi, iterations: iter, residual, converged: true, lazified });
        }
    }
    let residual = residual(p, m, &pi);
    Err(Error::NoConvergence { iterations: max_iters, residual, last: pi })
}

/// `out = pi^T P`.
#[inline]
fn step(p: &[f64], m: usize, pi: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &pij) in out.iter_mut().zip(&p[i * m..(i + 1) * m]) {
            *o += w * pij;
        }
    }
}

fn residual(p: &[f64], m: usize, pi: &[f64]) -> f64 {
    let mut out = vec![0.0; m];
    step(p, m, pi, &mut out);
    out.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};

    use super::*;
    use crate::chain::ChainKind;

    fn chain(p: Array2<f64>) -> MarkovChain {
        let m = p.nrows();
        MarkovChain::from_matrix(p, vec![1.0; m], ChainKind::Original).unwrap()
    }

    #[test]
    fn doubly_stochastic_one_step() {
        let r = stationary_distribution(&chain(array![[0.5, 0.5], [0.5, 0.5]]), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(r.pi, vec![0.5, 0.5]);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn two_state_solution() {
        let r = stationary_distribution(&chain(array![[0.0, 1.0], [0.5, 0.5]]), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!((r.pi[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!((r.pi[1] - 2.0 / 3.0).abs() < 1e-10);
        assert!(r.residual <= 10.0 * DEFAULT_TOL);
        assert!(!r.lazified);
    }

    #[test]
    fn identity_is_rejected() {
        let err = stationary_distribution(&chain(Array2::eye(3)), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap_err();
        assert!(matches!(err, Error::NotErgodic { ref components } if components.len() == 3));
    }

    #[test]
    fn periodic_chain_is_lazified() {
        let r = stationary_distribution(&chain(array![[0.0, 1.0], [1.0, 0.0]]), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!(r.lazified);
        assert_eq!(r.pi, vec![0.5, 0.5]);

        let cyc = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let r = stationary_distribution(&chain(cyc), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!(r.lazified);
        assert!(r.pi.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn non_convergence_carries_iterate() {
        let p = array![[0.999, 0.001], [0.002, 0.998]];
        match stationary_distribution(&chain(p), 1e-14, 3) {
            Err(Error::NoConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(last.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_matrix() {
        let c = MarkovChain { p: array![[0.5, 0.6], [0.5, 0.5]], d: vec![1.0; 2], kind: ChainKind::Original };
        assert!(matches!(stationary_distribution(&c, 1e-10, 10), Err(Error::NotStochastic { row: 0, .. })));
    }
}
