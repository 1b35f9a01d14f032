//! Closed-form symmetric low-rank representation.
//!
//! For a surrogate `A` (m x n) and `lambda > 0` the representation is
//!
//! ```text
//! Z = (AᵀA + λI)⁻¹ AᵀA = V diag(σᵢ² / (σᵢ² + λ)) Vᵀ
//! ```
//!
//! where `A = U Σ Vᵀ` is the economy SVD. It minimizes
//! `½‖A − AZ‖²_F + (λ/2)‖Z‖²_F`, is symmetric positive semidefinite with
//! eigenvalues in `[0, 1)`, and its rank never exceeds `rank(A)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, SortedSvd};
use crate::recovery::Recovery;

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Representation {
    pub z: DMatrix<f64>,
    pub lambda: f64,
    /// Numerical rank of the surrogate the representation was built from.
    pub source_rank: usize,
    /// Eigenvalues known from construction, nonincreasing, length n.
    pub cached_spectrum: Option<Vec<f64>>,
}

impl Representation {
    pub fn from_matrix(z: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if !z.is_square() {
            return Err(Error::shape(format!(
                "representation must be square, got {}x{}",
                z.nrows(),
                z.ncols()
            )));
        }
        let source_rank = linalg::numerical_rank(&z)?;
        Ok(Representation {
            z,
            lambda,
            source_rank,
            cached_spectrum: None,
        })
    }

    pub fn size(&self) -> usize {
        self.z.nrows()
    }

    pub fn rank(&self) -> Result<usize> {
        let values: Vec<f64> = match &self.cached_spectrum {
            Some(s) => s.clone(),
            None => linalg::singular_values(&self.z)?,
        };
        Ok(linalg::rank_from_values(&values, self.size(), self.size()))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda must be positive, got {lambda}")))
    }
}

pub fn solve(recovery: &Recovery, lambda: f64) -> Result<Representation> {
    solve_matrix(recovery.a.matrix(), lambda)
}

/// Closed-form representation through the SVD of `a`.
pub fn solve_matrix(a: &DMatrix<f64>, lambda: f64) -> Result<Representation> {
    check_lambda(lambda)?;
    let n = a.ncols();
    if a.is_empty() {
        return Err(Error::shape("surrogate matrix is empty"));
    }
    let svd = SortedSvd::new(a)?;
    let sv = svd.singular_values.as_slice();
    let tol = linalg::rank_tolerance(svd.largest(), a.nrows(), n);
    let rank = sv.iter().filter(|&&s| s > tol).count();

    let weights: Vec<f64> = sv[..rank].iter().map(|s| s * s / (s * s + lambda)).collect();
    let v = svd.v_t.rows(0, rank).transpose();
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= weights[j];
    }
    let mut z = scaled * v.transpose();
    linalg::symmetrize(&mut z);

    let mut spectrum = weights;
    spectrum.resize(n, 0.0);
    Ok(Representation {
        z,
        lambda,
        source_rank: rank,
        cached_spectrum: Some(spectrum),
    })
}

fn gram_system(a: &DMatrix<f64>, lambda: f64) -> Result<(DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    check_lambda(lambda)?;
    let gram = a.transpose() * a;
    let shifted = &gram + DMatrix::identity(a.ncols(), a.ncols()) * lambda;
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::Numerical("AᵀA + λI is not positive definite".into()))?;
    Ok((gram, chol))
}

/// Same representation by a Cholesky solve of `(AᵀA + λI) Z = AᵀA`.
///
/// Squares the condition number; kept as an independent cross-check.
pub fn solve_direct(a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let (gram, chol) = gram_system(a, lambda)?;
    Ok(chol.solve(&gram))
}

/// `I − λ(AᵀA + λI)⁻¹`, the complementary closed form.
pub fn solve_complement(a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let (_, chol) = gram_system(a, lambda)?;
    let n = a.ncols();
    Ok(DMatrix::identity(n, n) - chol.inverse() * lambda)
}

/// `½‖A − AZ‖²_F + (λ/2)·trace(ZᵀZ)`.
pub fn objective(a: &DMatrix<f64>, z: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let n = a.ncols();
    if z.shape() != (n, n) {
        return Err(Error::shape(format!(
            "Z must be {n}x{n} for A with {n} columns, got {}x{}",
            z.nrows(),
            z.ncols()
        )));
    }
    let fit = (a - a * z).norm_squared();
    Ok(0.5 * fit + 0.5 * lambda * z.norm_squared())
}

/// `‖(AᵀA + λI)Z − AᵀA‖_F`, zero at the exact minimizer.
pub fn stationarity_residual(a: &DMatrix<f64>, z: &DMatrix<f64>, lambda: f64) -> f64 {
    let gram = a.transpose() * a;
    (&gram * z + z * lambda - &gram).norm()
}

/// Eigenvalues of a symmetric representation, nonincreasing.
pub fn eigen_spectrum(rep: &Representation) -> Result<Vec<f64>> {
    let z = &rep.z;
    let scale = linalg::max_abs(z);
    let asym = linalg::asymmetry(z);
    if asym > SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "representation is not symmetric (max |Z - Zᵀ| = {asym:.3e})"
        )));
    }
    Ok(linalg::symmetric_eigen_desc(z)?.0)
}
