//! Shared generators for the integration suites.
#![allow(dead_code)]

use netadapt::linalg::{self, Matrix};
use netadapt::network::{self, SensorNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Rejection-samples a matrix with entries in `[lo, hi)` satisfying `keep`.
pub fn sample_until(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, keep: impl Fn(&linalg::Spectrum) -> bool) -> Matrix {
    loop {
        let a = uniform_matrix(rng, n, n, lo, hi);
        if keep(&linalg::eigenvalues(&a).unwrap()) {
            return a;
        }
    }
}

pub fn hurwitz(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    sample_until(rng, n, -2.0, 2.0, |s| s.max_real_part < -1e-3)
}

pub fn schur(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    sample_until(rng, n, -1.0, 1.0, |s| s.spectral_radius < 1.0 - 1e-3)
}

/// Random source-reachable network: a random spanning arborescence rooted
/// at the source plus extra edges with probability `extra`, with weights
/// in `[0.1, 1)`, not normalized.
pub fn reachable_network(rng: &mut ChaCha8Rng, m: usize, extra: f64) -> SensorNetwork {
    let mut order: Vec<usize> = (1..=m).collect();
    for i in (1..m).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut edges = Vec::new();
    let mut source = vec![(order[0], rng.gen_range(0.1..1.0))];
    for k in 1..m {
        let parent = order[rng.gen_range(0..k)];
        edges.push((order[k], parent, rng.gen_range(0.1..1.0)));
    }
    for i in 1..=m {
        for j in 1..=m {
            if i != j && !edges.iter().any(|&(a, b, _)| a == i && b == j) && rng.gen_bool(extra) {
                edges.push((i, j, rng.gen_range(0.1..1.0)));
            }
        }
        if i != order[0] && rng.gen_bool(extra) {
            source.push((i, rng.gen_range(0.1..1.0)));
        }
    }
    network::build_network(&edges, &source, m).unwrap()
}

/// Eigenvalue multisets agree within `tol` under greedy nearest matching.
pub fn multiset_match(expected: &[num_complex::Complex64], got: &[num_complex::Complex64], tol: f64) -> bool {
    if expected.len() != got.len() {
        return false;
    }
    let mut used = vec![false; got.len()];
    expected.iter().all(|e| {
        let best = got
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .min_by(|a, b| (a.1 - e).norm().total_cmp(&(b.1 - e).norm()));
        match best {
            Some((k, g)) if (g - e).norm() <= tol => {
                used[k] = true;
                true
            }
            _ => false,
        }
    })
}

pub fn rel_residual(residual: &Matrix, scale: &Matrix) -> f64 {
    residual.max_abs() / scale.max_abs().max(f64::MIN_POSITIVE)
}
