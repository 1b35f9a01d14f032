//! Low-rank surrogates of the data matrix.
//!
//! Every route produces a [`Recovery`] whose `a` matrix replaces the raw
//! data when building the representation.

use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::SortedSvd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMethod {
    Pca,
    Rpca,
    RandomProjection,
    Identity,
}

impl RecoveryMethod {
    pub fn name(self) -> &'static str {
        match self {
            RecoveryMethod::Pca => "pca",
            RecoveryMethod::Rpca => "rpca",
            RecoveryMethod::RandomProjection => "random-projection",
            RecoveryMethod::Identity => "identity",
        }
    }
}

/// Convergence record of an RPCA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcaReport {
    pub iterations: usize,
    /// `||X - A - E||_F / ||X||_F` at return.
    pub residual: f64,
    pub converged: bool,
    /// Singular values kept by the last thresholding step.
    pub retained_rank: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub method: RecoveryMethod,
    /// The low-rank surrogate; `r x n` for random projection, `m x n` otherwise.
    pub a: DataMatrix,
    /// `m x r` projection for pca and random projection.
    pub projection: Option<DMatrix<f64>>,
    /// Sparse error for rpca.
    pub error: Option<DMatrix<f64>>,
    pub target_rank: Option<usize>,
    pub rpca: Option<RpcaReport>,
}

impl Recovery {
    pub fn samples(&self) -> usize {
        self.a.cols()
    }

    /// Append a constant row of ones to `a`, the homogeneous-coordinate
    /// surrogate for affine subspaces.
    pub fn with_ones_row(mut self) -> Result<Self> {
        let m = self.a.matrix();
        self.a = DataMatrix::new(m.clone().insert_row(m.nrows(), 1.0))?;
        Ok(self)
    }
}

/// Copy of `x`, mean-centered across samples when `center` is set.
fn centered(x: &DMatrix<f64>, center: bool) -> DMatrix<f64> {
    if !center {
        return x.clone();
    }
    let mean = x.column_mean();
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= &mean;
    }
    out
}

/// Project onto the top-`r` left singular vectors: `A = P Pᵀ X`.
pub fn pca_recover(x: &DataMatrix, r: usize) -> Result<Recovery> {
    pca_recover_with(x, r, false)
}

/// As [`pca_recover`], optionally subtracting the sample mean first.
pub fn pca_recover_with(x: &DataMatrix, r: usize, center: bool) -> Result<Recovery> {
    let limit = x.rows().min(x.cols());
    if r == 0 || r > limit {
        return Err(Error::invalid(format!(
            "pca rank {r} must be in 1..={limit} for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    let data = centered(x.matrix(), center);
    let svd = SortedSvd::new(&data)?;
    let p = svd.u.columns(0, r).into_owned();
    let a = &p * (p.transpose() * &data);
    Ok(Recovery {
        method: RecoveryMethod::Pca,
        a: DataMatrix::new(a)?,
        projection: Some(p),
        error: None,
        target_rank: Some(r),
        rpca: None,
    })
}

/// Inexact augmented-Lagrangian settings for principal component pursuit.
///
/// `None` fields resolve from the data: `lambda = 1/sqrt(max(m, n))`,
/// `mu_initial = 1.25 / sigma_1(X)`, `mu_max = 1e7 * mu_initial`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcaConfig {
    pub lambda: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub mu_initial: Option<f64>,
    pub mu_growth: f64,
    pub mu_max: Option<f64>,
}

impl Default for RpcaConfig {
    fn default() -> Self {
        RpcaConfig {
            lambda: None,
            tolerance: 1e-7,
            max_iterations: 500,
            mu_initial: None,
            mu_growth: 1.5,
            mu_max: None,
        }
    }
}

impl RpcaConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        RpcaConfig {
            lambda: Some(lambda),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: Option<f64>| v.is_none_or(|v| v > 0.0 && v.is_finite());
        if !positive(self.lambda) || !positive(self.mu_initial) || !positive(self.mu_max) {
            return Err(Error::invalid("rpca lambda and mu bounds must be positive"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::invalid(format!(
                "rpca tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("rpca max_iterations must be at least 1"));
        }
        if !(self.mu_growth > 1.0) {
            return Err(Error::invalid("rpca mu_growth must exceed 1"));
        }
        Ok(())
    }
}

fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Singular value thresholding. Returns the shrunk matrix and the number of
/// singular values that survived.
fn singular_value_threshold(m: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, usize)> {
    let svd = SortedSvd::new(m)?;
    let kept = svd.singular_values.iter().take_while(|&&s| s > tau).count();
    if kept == 0 {
        return Ok((DMatrix::zeros(m.nrows(), m.ncols()), 0));
    }
    let mut u = svd.u.columns(0, kept).into_owned();
    for (j, mut col) in u.column_iter_mut().enumerate() {
        col *= svd.singular_values[j] - tau;
    }
    Ok((u * svd.v_t.rows(0, kept), kept))
}

/// Split `X` into low-rank `A` plus sparse `E` by inexact ALM.
///
/// Hitting `max_iterations` is not an error; check `rpca.converged`.
pub fn rpca_recover(x: &DataMatrix, cfg: &RpcaConfig) -> Result<Recovery> {
    cfg.validate()?;
    let data = x.matrix();
    let (m, n) = data.shape();
    let lambda = cfg.lambda.unwrap_or(1.0 / (m.max(n) as f64).sqrt());
    let x_norm = data.norm();

    if x_norm == 0.0 {
        return Ok(Recovery {
            method: RecoveryMethod::Rpca,
            a: x.clone(),
            projection: None,
            error: Some(DMatrix::zeros(m, n)),
            target_rank: None,
            rpca: Some(RpcaReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
                retained_rank: 0,
                lambda,
            }),
        });
    }

    let spectral_norm = SortedSvd::new(data)?.largest();
    let inf_norm = data.amax() / lambda;
    let mut dual = data / spectral_norm.max(inf_norm);
    let mut mu = cfg.mu_initial.unwrap_or(1.25 / spectral_norm);
    let mu_max = cfg.mu_max.unwrap_or(1e7 * mu);

    let mut a = DMatrix::zeros(m, n);
    let mut e = DMatrix::zeros(m, n);
    let mut residual = f64::INFINITY;
    let mut retained = 0;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let inv_mu = 1.0 / mu;

        let shift = data - &a + &dual * inv_mu;
        e = shift.map(|v| soft_threshold(v, lambda * inv_mu));

        let target = data - &e + &dual * inv_mu;
        let (next_a, kept) = singular_value_threshold(&target, inv_mu)?;
        a = next_a;
        retained = kept;

        let gap = data - &a - &e;
        residual = gap.norm() / x_norm;
        dual += gap * mu;
        mu = (mu * cfg.mu_growth).min(mu_max);

        if residual <= cfg.tolerance {
            break;
        }
    }
    let converged = residual <= cfg.tolerance;
    debug!("rpca: {iterations} iterations, residual {residual:.3e}, rank {retained}");

    Ok(Recovery {
        method: RecoveryMethod::Rpca,
        a: DataMatrix::new(a)?,
        projection: None,
        error: Some(e),
        target_rank: None,
        rpca: Some(RpcaReport {
            iterations,
            residual,
            converged,
            retained_rank: retained,
            lambda,
        }),
    })
}

/// Gaussian random features `A = Pᵀ X` with `P` of i.i.d. `N(0, 1/r)` entries.
pub fn random_project(x: &DataMatrix, r: usize, seed: u64) -> Result<Recovery> {
    random_project_with(x, r, seed, false)
}

/// As [`random_project`]; `force_identity` replaces `P` by the identity
/// (requires `r == m`) for debugging.
pub fn random_project_with(
    x: &DataMatrix,
    r: usize,
    seed: u64,
    force_identity: bool,
) -> Result<Recovery> {
    let m = x.rows();
    if r == 0 || r > m {
        return Err(Error::invalid(format!(
            "projection rank {r} must be in 1..={m}"
        )));
    }
    let p = if force_identity {
        if r != m {
            return Err(Error::invalid("identity projection requires r == m"));
        }
        DMatrix::identity(m, m)
    } else {
        let dist = Normal::new(0.0, (1.0 / r as f64).sqrt()).expect("valid std dev");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, r, |_, _| rng.sample(dist))
    };
    let a = p.transpose() * x.matrix();
    Ok(Recovery {
        method: RecoveryMethod::RandomProjection,
        a: DataMatrix::new(a)?,
        projection: Some(p),
        error: None,
        target_rank: Some(r),
        rpca: None,
    })
}

/// Use the data as-is.
pub fn identity_recover(x: &DataMatrix) -> Recovery {
    Recovery {
        method: RecoveryMethod::Identity,
        a: x.clone(),
        projection: None,
        error: None,
        target_rank: None,
        rpca: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use nalgebra::DVector;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
    }

    fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn pca_keeps_low_rank_data() {
        let x = DataMatrix::new(random(8, 3, 1) * random(3, 12, 2)).unwrap();
        let rec = pca_recover(&x, 3).unwrap();
        assert!(rel_diff(rec.a.matrix(), x.matrix()) < 1e-12);
        assert_eq!(rec.method, RecoveryMethod::Pca);
    }

    #[test]
    fn pca_on_diagonal() {
        let x = DataMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0])))
            .unwrap();
        let rec = pca_recover(&x, 2).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 0.0]));
        assert!((rec.a.matrix() - want).amax() < 1e-12);
    }

    #[test]
    fn pca_tail_energy_matches_svd() {
        let raw = random(20, 50, 7);
        let x = DataMatrix::new(raw.clone()).unwrap();
        let rec = pca_recover(&x, 5).unwrap();
        let p = rec.projection.as_ref().unwrap();
        assert!((p.transpose() * p - DMatrix::identity(5, 5)).amax() < 1e-10);
        let sv = linalg::singular_values(&raw).unwrap();
        let tail: f64 = sv[5..].iter().map(|s| s * s).sum();
        let err = (&raw - rec.a.matrix()).norm_squared();
        assert!((err - tail).abs() <= 1e-8 * tail);
        assert!(rec.a.rank().unwrap() <= 5);
    }

    #[test]
    fn pca_rank_bounds() {
        let x = DataMatrix::new(random(4, 6, 1)).unwrap();
        assert!(pca_recover(&x, 5).is_err());
        assert!(pca_recover(&x, 0).is_err());
    }

    #[test]
    fn centered_pca_removes_mean() {
        let x = DataMatrix::new(random(5, 9, 2).add_scalar(10.0)).unwrap();
        let rec = pca_recover_with(&x, 2, true).unwrap();
        let mean = rec.a.matrix().column_mean();
        assert!(mean.amax() < 1e-10);
    }

    #[test]
    fn rpca_clean_rank_two() {
        let raw = random(30, 2, 3) * random(2, 40, 4);
        let x = DataMatrix::new(raw.clone()).unwrap();
        let rec = rpca_recover(&x, &RpcaConfig::default()).unwrap();
        let report = rec.rpca.as_ref().unwrap();
        assert!(report.converged);
        assert!(rel_diff(rec.a.matrix(), &raw) <= 1e-6);
        assert!(rec.error.as_ref().unwrap().norm() <= 1e-6 * raw.norm());
    }

    #[test]
    fn rpca_zero_matrix() {
        let x = DataMatrix::new(DMatrix::zeros(5, 6)).unwrap();
        let rec = rpca_recover(&x, &RpcaConfig::default()).unwrap();
        assert_eq!(rec.a.matrix(), &DMatrix::zeros(5, 6));
        assert_eq!(rec.error.unwrap(), DMatrix::zeros(5, 6));
    }

    #[test]
    fn rpca_nonconvergence_is_flagged() {
        let x = DataMatrix::new(random(10, 10, 5)).unwrap();
        let cfg = RpcaConfig {
            max_iterations: 2,
            ..Default::default()
        };
        let rec = rpca_recover(&x, &cfg).unwrap();
        let report = rec.rpca.unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
    }

    #[test]
    fn rpca_config_validation() {
        let x = DataMatrix::new(random(3, 3, 1)).unwrap();
        for bad in [
            RpcaConfig { tolerance: 1.0, ..Default::default() },
            RpcaConfig { max_iterations: 0, ..Default::default() },
            RpcaConfig { mu_growth: 1.0, ..Default::default() },
            RpcaConfig::with_lambda(-1.0),
        ] {
            assert!(rpca_recover(&x, &bad).is_err());
        }
    }

    #[test]
    fn random_projection_deterministic() {
        let x = DataMatrix::new(random(12, 9, 1)).unwrap();
        let a = random_project(&x, 5, 42).unwrap();
        let b = random_project(&x, 5, 42).unwrap();
        assert_eq!(a.a, b.a);
        assert_eq!(a.a.rows(), 5);
        assert!(random_project(&x, 13, 0).is_err());
    }

    #[test]
    fn random_projection_preserves_rank() {
        let x = DataMatrix::new(random(40, 3, 1) * random(3, 25, 2)).unwrap();
        let rec = random_project(&x, 10, 8).unwrap();
        assert_eq!(rec.a.rank().unwrap(), 3);
    }

    #[test]
    fn forced_identity_projection() {
        let x = DataMatrix::new(random(6, 4, 3)).unwrap();
        let rec = random_project_with(&x, 6, 0, true).unwrap();
        assert_eq!(rec.a, x);
        assert!(random_project_with(&x, 5, 0, true).is_err());
    }

    #[test]
    fn identity_recovery_contract() {
        let x = DataMatrix::new(random(6, 4, 3)).unwrap();
        let rec = identity_recover(&x);
        assert_eq!(rec.a, x);
        assert_eq!(rec.a.rank().unwrap(), x.rank().unwrap());
        assert!(rec.target_rank.is_none());
    }

    #[test]
    fn ones_row_appended() {
        let x = DataMatrix::new(random(3, 4, 3)).unwrap();
        let rec = identity_recover(&x).with_ones_row().unwrap();
        assert_eq!(rec.a.rows(), 4);
        assert!(rec.a.matrix().row(3).iter().all(|&v| v == 1.0));
        assert_eq!(rec.a.matrix().rows(0, 3), x.matrix().rows(0, 3));
    }
}
