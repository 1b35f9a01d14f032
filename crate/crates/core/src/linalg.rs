//! Small dense linear-algebra helpers shared by the pipeline stages.

use faer::{Mat, MatRef};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Economy SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl SortedSvd {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            let k = rows.min(cols);
            return Ok(SortedSvd {
                u: DMatrix::zeros(rows, k),
                singular_values: DVector::zeros(k),
                v_t: DMatrix::zeros(k, cols),
            });
        }
        let svd = to_faer(m)
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
        let s = svd.S().column_vector();
        Ok(SortedSvd {
            u: from_faer(svd.U()),
            singular_values: DVector::from_fn(s.nrows(), |i, _| s[i]),
            v_t: from_faer(svd.V()).transpose(),
        })
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.iter().copied().fold(0.0, f64::max)
    }
}

/// Singular values only, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(m)
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))
}

/// Threshold below which a singular value counts as zero:
/// `max(rows, cols) * eps * largest`.
pub fn rank_tolerance(largest: f64, rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * largest
}

/// Number of values above the standard rank tolerance.
pub fn rank_from_values(values: &[f64], rows: usize, cols: usize) -> usize {
    let largest = values.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(largest, rows, cols);
    values.iter().filter(|&&s| s > tol).count()
}

pub fn numerical_rank(m: &DMatrix<f64>) -> Result<usize> {
    Ok(rank_from_values(&singular_values(m)?, m.nrows(), m.ncols()))
}

/// Symmetric eigendecomposition sorted by descending eigenvalue. Only the
/// lower triangle is read.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let eig = to_faer(m)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))?;
    // faer returns ascending eigenvalues
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..n).map(|i| s[n - 1 - i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| u[(r, n - 1 - c)]);
    Ok((values, vectors))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `max |M - Mᵀ|` for a square matrix.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Overwrite `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Orthonormal basis of the column space via thin Householder QR.
pub fn orthonormal_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 0.0]));
        assert_eq!(numerical_rank(&m).unwrap(), 2);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 4)).unwrap(), 0);
    }

    #[test]
    fn sorted_svd_is_descending() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let svd = SortedSvd::new(&m).unwrap();
        assert_eq!(svd.singular_values.as_slice(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn svd_of_rank_deficient_reconstructs() {
        // Low-rank wide matrices are where a broken bidiagonal SVD shows up.
        let b = DMatrix::from_fn(40, 5, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let c = DMatrix::from_fn(5, 60, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let a = b * c;
        let svd = SortedSvd::new(&a).unwrap();
        let mut us = svd.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= svd.singular_values[j];
        }
        assert!((us * &svd.v_t - &a).norm() <= 1e-12 * a.norm());
        let values = singular_values(&a).unwrap();
        for (x, y) in values.iter().zip(svd.singular_values.iter()) {
            assert!((x - y).abs() <= 1e-12 * values[0]);
        }
    }

    #[test]
    fn eigen_desc_order() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 2.0, -1.0]));
        let (vals, vecs) = symmetric_eigen_desc(&m).unwrap();
        assert_eq!(vals, vec![2.0, 0.5, -1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }
}
