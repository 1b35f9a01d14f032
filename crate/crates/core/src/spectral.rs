//! Normalized spectral clustering and the k-means it relies on.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affinity::AffinityMatrix;
use crate::dataset::LabelVector;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub k: usize,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
}

impl SpectralConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        SpectralConfig {
            k,
            seed,
            kmeans_restarts: 20,
            kmeans_max_iters: 300,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if self.k > n {
            return Err(Error::invalid(format!(
                "k = {} exceeds the number of samples ({n})",
                self.k
            )));
        }
        if self.kmeans_restarts == 0 || self.kmeans_max_iters == 0 {
            return Err(Error::invalid("k-means restarts and iterations must be positive"));
        }
        Ok(())
    }
}

/// `L = I − D^{-1/2} W D^{-1/2}`; zero-degree vertices get a zero
/// normalized row.
pub fn normalized_laplacian(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let inv_sqrt: Vec<f64> = w
        .row_iter()
        .map(|row| {
            let d = row.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = DMatrix::from_fn(n, n, |i, j| -inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]);
    for i in 0..n {
        l[(i, i)] += 1.0;
    }
    linalg::symmetrize(&mut l);
    l
}

/// Row-normalized `n x k` embedding from the `k` eigenvectors of the
/// normalized Laplacian with smallest eigenvalues.
///
/// Each eigenvector's largest-magnitude entry is made positive.
pub fn spectral_embedding(w: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    if !w.is_square() {
        return Err(Error::shape("affinity matrix must be square"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::Numerical("affinity matrix is identically zero".into()));
    }
    let (_, vectors) = linalg::symmetric_eigen_desc(&normalized_laplacian(w))?;
    let mut emb = DMatrix::zeros(n, k);
    for c in 0..k {
        let mut v = vectors.column(n - 1 - c).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        emb.set_column(c, &v);
    }
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(emb)
}

/// Spectral clustering of an affinity matrix into `cfg.k` groups.
pub fn ncuts(affinity: &AffinityMatrix, cfg: &SpectralConfig) -> Result<LabelVector> {
    ncuts_matrix(&affinity.w, cfg)
}

pub fn ncuts_matrix(w: &DMatrix<f64>, cfg: &SpectralConfig) -> Result<LabelVector> {
    cfg.validate(w.nrows())?;
    let emb = spectral_embedding(w, cfg.k)?;
    kmeans(&emb, cfg)
}

/// Outcome of one k-means restart.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// 0-based cluster per point.
    pub assignment: Vec<usize>,
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let (n, dim) = points.shape();
    let mut centroids = DMatrix::zeros(k, dim);
    let first = rng.random_range(0..n);
    centroids.set_row(0, &points.row(first));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &points.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

/// One k-means++ seeded Lloyd run.
pub fn kmeans_single(
    points: &DMatrix<f64>,
    k: usize,
    max_iters: usize,
    rng: &mut ChaCha8Rng,
) -> KMeansFit {
    let (n, dim) = points.shape();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points, i, &centroids);
            dists[i] = d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }

        let mut sums = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignment[i];
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += points.row(i);
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let mean = sums.row(c) / counts[c] as f64;
                centroids.set_row(c, &mean);
                continue;
            }
            // Empty cluster: move its centroid onto the worst-fit point.
            let far = (0..n)
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                taken[i] = true;
                dists[i] = 0.0;
                centroids.set_row(c, &points.row(i));
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points, i, &centroids, assignment[i]))
        .sum();
    KMeansFit {
        assignment,
        centroids,
        inertia,
        iterations,
    }
}

/// Best-of-restarts k-means on the rows of `points`; labels are 1-based.
///
/// Restart `i` draws from stream `i` of a ChaCha generator seeded with
/// `cfg.seed`; ties in inertia go to the lowest restart.
pub fn kmeans(points: &DMatrix<f64>, cfg: &SpectralConfig) -> Result<LabelVector> {
    Ok(kmeans_fit(points, cfg)?.0)
}

pub fn kmeans_fit(points: &DMatrix<f64>, cfg: &SpectralConfig) -> Result<(LabelVector, KMeansFit)> {
    cfg.validate(points.nrows())?;
    let mut best: Option<KMeansFit> = None;
    for restart in 0..cfg.kmeans_restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        let fit = kmeans_single(points, cfg.k, cfg.kmeans_max_iters, &mut rng);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    let best = best.expect("at least one restart");
    let labels = LabelVector::new(best.assignment.iter().map(|c| c + 1).collect())?;
    Ok((labels, best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_diagonal(sizes: &[usize]) -> DMatrix<f64> {
        let n: usize = sizes.iter().sum();
        let mut w = DMatrix::zeros(n, n);
        let mut start = 0;
        for &s in sizes {
            for i in start..start + s {
                for j in start..start + s {
                    w[(i, j)] = if i == j { 1.0 } else { 0.5 + 0.1 * ((i + j) % 3) as f64 };
                }
            }
            start += s;
        }
        w
    }

    #[test]
    fn two_blocks_split_exactly() {
        let w = block_diagonal(&[4, 6]);
        let labels = ncuts_matrix(&w, &SpectralConfig::new(2, 0)).unwrap();
        let l = labels.as_slice();
        assert!(l[..4].iter().all(|&x| x == l[0]));
        assert!(l[4..].iter().all(|&x| x == l[4]));
        assert_ne!(l[0], l[4]);
    }

    #[test]
    fn complete_graph_single_cluster() {
        let w = DMatrix::from_element(6, 6, 1.0);
        let labels = ncuts_matrix(&w, &SpectralConfig::new(1, 3)).unwrap();
        assert_eq!(labels.as_slice(), &[1; 6]);
    }

    #[test]
    fn errors() {
        let w = DMatrix::from_element(3, 3, 1.0);
        assert!(ncuts_matrix(&w, &SpectralConfig::new(4, 0)).is_err());
        assert!(ncuts_matrix(&w, &SpectralConfig::new(0, 0)).is_err());
        assert!(ncuts_matrix(&DMatrix::zeros(3, 3), &SpectralConfig::new(2, 0)).is_err());
    }

    #[test]
    fn laplacian_spectrum_counts_components() {
        let w = block_diagonal(&[3, 4, 5]);
        let (vals, _) = linalg::symmetric_eigen_desc(&normalized_laplacian(&w)).unwrap();
        assert!(vals.iter().all(|&v| (-1e-8..=2.0 + 1e-8).contains(&v)));
        let zeros = vals.iter().filter(|v| v.abs() < 1e-8).count();
        assert_eq!(zeros, 3);
    }

    #[test]
    fn separated_clouds() {
        let mut pts = DMatrix::zeros(20, 2);
        for i in 0..20 {
            let offset = if i < 10 { 0.0 } else { 100.0 };
            pts[(i, 0)] = offset + (i % 10) as f64 * 0.1;
            pts[(i, 1)] = offset - (i % 3) as f64 * 0.1;
        }
        let l = kmeans(&pts, &SpectralConfig::new(2, 5)).unwrap();
        let l = l.as_slice();
        assert!(l[..10].iter().all(|&x| x == l[0]));
        assert!(l[10..].iter().all(|&x| x == l[10]));
        assert_ne!(l[0], l[10]);
    }

    #[test]
    fn identical_points_one_cluster() {
        let pts = DMatrix::from_element(7, 3, 0.25);
        let l = kmeans(&pts, &SpectralConfig::new(2, 1)).unwrap();
        assert!(l.as_slice().iter().all(|&x| x == l.as_slice()[0]));
    }

    #[test]
    fn deterministic_per_seed() {
        let pts = DMatrix::from_fn(30, 2, |i, j| ((i * 31 + j * 17) % 13) as f64);
        let cfg = SpectralConfig::new(3, 11);
        assert_eq!(kmeans(&pts, &cfg).unwrap(), kmeans(&pts, &cfg).unwrap());
    }

    #[test]
    fn empty_cluster_reseeded() {
        // Two distinct locations, three clusters: one centroid must start on
        // a duplicate, and reseeding keeps the fit finite.
        let mut pts = DMatrix::zeros(6, 1);
        for i in 3..6 {
            pts[(i, 0)] = 1.0;
        }
        let (_, fit) = kmeans_fit(&pts, &SpectralConfig::new(3, 2)).unwrap();
        assert!(fit.inertia.abs() < 1e-12);
    }
}
