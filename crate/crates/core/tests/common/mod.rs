//! Independent oracles and random instance generators shared by the
//! integration suites. Nothing here calls into the estimation pipeline.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rasch_spectral::{Cell, GroundTruth, ResponseMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stationary distribution by direct solve of `(P^T - I) pi = 0` with the
/// last equation replaced by `sum(pi) = 1`.
pub fn stationary_direct(p: &Array2<f64>) -> Vec<f64> {
    let m = p.nrows();
    let mut a = DMatrix::from_fn(m, m, |i, j| p[[j, i]] - if i == j { 1.0 } else { 0.0 });
    let mut rhs = DVector::zeros(m);
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    rhs[m - 1] = 1.0;
    let sol = a.lu().solve(&rhs).expect("nonsingular system for an irreducible chain");
    sol.iter().copied().collect()
}

/// `Y_ij = #{l : X_li = 1, X_lj = 0}` by a plain triple loop, plus `nu`
/// wherever the pair was co-assigned.
pub fn brute_force_y(x: &ResponseMatrix, nu: f64) -> Array2<f64> {
    let (n, m) = (x.n_users(), x.n_items());
    let mut y = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut count = 0.0;
            let mut co = false;
            for l in 0..n {
                let (a, b) = (x.get(l, i), x.get(l, j));
                if a != Cell::Missing && b != Cell::Missing {
                    co = true;
                    if a == Cell::One && b == Cell::Zero {
                        count += 1.0;
                    }
                }
            }
            y[[i, j]] = if co { count + nu } else { 0.0 };
        }
    }
    y
}

pub fn brute_force_b(x: &ResponseMatrix) -> Array2<u64> {
    let (n, m) = (x.n_users(), x.n_items());
    Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            0
        } else {
            (0..n).filter(|&l| x.get(l, i) != Cell::Missing && x.get(l, j) != Cell::Missing).count() as u64
        }
    })
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, m: usize, p_missing: f64) -> ResponseMatrix {
    let cells = (0..n * m)
        .map(|_| {
            if rng.random::<f64>() < p_missing {
                Cell::Missing
            } else if rng.random::<bool>() {
                Cell::One
            } else {
                Cell::Zero
            }
        })
        .collect();
    ResponseMatrix::new(n, m, cells).unwrap()
}

/// Random row-stochastic matrix with roughly `density` of off-diagonal
/// entries positive, retried until strongly connected and aperiodic
/// (a positive diagonal entry is always kept).
pub fn random_ergodic_chain(rng: &mut impl Rng, m: usize, density: f64) -> Array2<f64> {
    loop {
        let mut p = Array2::from_shape_fn((m, m), |(i, j)| {
            if i == j || rng.random::<f64>() < density {
                rng.random::<f64>() + 0.01
            } else {
                0.0
            }
        });
        for mut row in p.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        if strongly_connected(&p) {
            return p;
        }
    }
}

/// Reachability closure from every node (Floyd-Warshall on booleans).
pub fn strongly_connected(p: &Array2<f64>) -> bool {
    let m = p.nrows();
    let mut r = Array2::from_shape_fn((m, m), |(i, j)| i == j || p[[i, j]] > 0.0);
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                if r[[i, k]] && r[[k, j]] {
                    r[[i, j]] = true;
                }
            }
        }
    }
    r.iter().all(|&v| v)
}

pub fn uniform_vec(rng: &mut impl Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_truth(rng: &mut impl Rng, n: usize, m: usize, p: f64) -> GroundTruth {
    GroundTruth::new(uniform_vec(rng, n, -1.0, 1.0), uniform_vec(rng, m, -1.0, 1.0), p).unwrap()
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = v.iter().map(|x| x.exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[k] += h;
            lo[k] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}
