//! Independent oracles shared by the integration tests. None of these call
//! into the solver paths they check.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random matrix with orthonormal columns (rows >= cols).
pub fn orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    gaussian(rng, rows, cols).qr().q()
}

/// Exact-rank `rows x cols` matrix.
pub fn planted_rank(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> DMatrix<f64> {
    gaussian(rng, rows, rank) * gaussian(rng, rank, cols)
}

/// Minimize `½‖A − AZ‖² + (λ/2)‖Z‖²` over symmetric `Z` by projected
/// gradient descent with step `1 / (‖A‖²_F + λ)`.
pub fn gradient_descent_representation(a: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = a.ncols();
    let gram = a.transpose() * a;
    let step = 1.0 / (a.norm_squared() + lambda);
    let mut z = DMatrix::<f64>::zeros(n, n);
    for _ in 0..500_000 {
        let grad = &gram * &z + &z * lambda - &gram;
        if grad.amax() < 1e-14 {
            break;
        }
        z -= grad * step;
        z = (&z + z.transpose()) * 0.5;
    }
    z
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum misclassification fraction over all relabelings of `predicted`
/// (labels 1-based, both vectors using at most `k` labels).
pub fn brute_force_error(predicted: &[usize], truth: &[usize], k: usize) -> f64 {
    let n = predicted.len();
    let best = permutations(k)
        .into_iter()
        .map(|perm| {
            predicted
                .iter()
                .zip(truth)
                .filter(|(&p, &t)| perm[p - 1] + 1 != t)
                .count()
        })
        .min()
        .unwrap();
    best as f64 / n as f64
}
