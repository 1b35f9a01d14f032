//! End-to-end clustering: recovery, representation, affinity, spectral.
//!
//! Also hosts the repeated-trial, parameter-sweep and scaling drivers used by
//! the command-line tool.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{self, AffinityKind, AffinityMatrix, Side, SkinnyFactor};
use crate::dataset::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::eval::{self, ClusteringResult, StageTimings, Summary};
use crate::recovery::{self, Recovery, RecoveryMethod, RpcaConfig};
use crate::slrr::{self, Representation};
use crate::spectral::{self, SpectralConfig};

/// Target rank, either absolute or a multiple of the cluster count
/// (`"10n"` means ten dimensions per cluster).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankSpec {
    Fixed(usize),
    PerCluster(usize),
}

impl RankSpec {
    pub fn resolve(self, k: usize) -> Result<usize> {
        let r = match self {
            RankSpec::Fixed(r) => r,
            RankSpec::PerCluster(c) => c * k,
        };
        if r == 0 {
            return Err(Error::invalid(format!("rank {self} resolves to 0")));
        }
        Ok(r)
    }
}

impl fmt::Display for RankSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankSpec::Fixed(r) => write!(f, "{r}"),
            RankSpec::PerCluster(c) => write!(f, "{c}n"),
        }
    }
}

impl FromStr for RankSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("bad rank {s:?}; expected an integer or e.g. \"10n\""));
        if let Some(mult) = s.strip_suffix(['n', 'k']) {
            let c: usize = if mult.is_empty() { Ok(1) } else { mult.parse() }.map_err(|_| bad())?;
            return if c == 0 { Err(bad()) } else { Ok(RankSpec::PerCluster(c)) };
        }
        match s.parse::<usize>() {
            Ok(r) if r > 0 => Ok(RankSpec::Fixed(r)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub recovery: RecoveryMethod,
    /// Required for pca and random projection, ignored otherwise.
    pub rank: Option<RankSpec>,
    pub pca_center: bool,
    pub rpca: RpcaConfig,
    pub lambda: f64,
    pub alpha: u32,
    pub k: usize,
    pub seed: u64,
    /// Append a row of ones to the surrogate (affine-subspace surrogate).
    pub affine_ones: bool,
    pub affinity: AffinityKind,
    pub side: Side,
    pub rel_tol: f64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
}

impl PipelineConfig {
    /// Motion-segmentation defaults on raw trajectories: identity
    /// recovery, `lambda = 5e-3`, `alpha = 2`.
    pub fn motion(k: usize) -> Self {
        PipelineConfig {
            recovery: RecoveryMethod::Identity,
            rank: None,
            pca_center: false,
            rpca: RpcaConfig::default(),
            lambda: 5e-3,
            alpha: 2,
            k,
            seed: 0,
            affine_ones: false,
            affinity: AffinityKind::Cosine,
            side: Side::RowsOfM,
            rel_tol: affinity::DEFAULT_REL_TOL,
            kmeans_restarts: 20,
            kmeans_max_iters: 300,
        }
    }

    /// Motion defaults after PCA to `4n` dimensions.
    pub fn motion_pca(k: usize) -> Self {
        PipelineConfig {
            recovery: RecoveryMethod::Pca,
            rank: Some(RankSpec::PerCluster(4)),
            ..Self::motion(k)
        }
    }

    /// Face defaults with PCA recovery: `alpha = 2`, `lambda = 40`, `r = 10n`.
    pub fn face_pca(k: usize) -> Self {
        PipelineConfig {
            recovery: RecoveryMethod::Pca,
            rank: Some(RankSpec::PerCluster(10)),
            lambda: 40.0,
            alpha: 2,
            ..Self::motion(k)
        }
    }

    /// Face defaults with random projection: `alpha = 3`, `lambda = 1`, `r = 10n`.
    pub fn face_rp(k: usize) -> Self {
        PipelineConfig {
            recovery: RecoveryMethod::RandomProjection,
            rank: Some(RankSpec::PerCluster(10)),
            lambda: 1.0,
            alpha: 3,
            ..Self::motion(k)
        }
    }

    /// Face defaults with RPCA: `alpha = 2`, `lambda = 3`, RPCA lambda 0.025.
    pub fn face_rpca(k: usize) -> Self {
        PipelineConfig {
            recovery: RecoveryMethod::Rpca,
            rpca: RpcaConfig::with_lambda(0.025),
            lambda: 3.0,
            alpha: 2,
            ..Self::motion(k)
        }
    }

    pub fn preset(name: &str, k: usize) -> Option<Self> {
        Some(match name {
            "motion" => Self::motion(k),
            "motion-pca" => Self::motion_pca(k),
            "face-pca" => Self::face_pca(k),
            "face-rp" => Self::face_rp(k),
            "face-rpca" => Self::face_rpca(k),
            _ => return None,
        })
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig {
            k: self.k,
            seed: self.seed,
            kmeans_restarts: self.kmeans_restarts,
            kmeans_max_iters: self.kmeans_max_iters,
        }
    }

    pub fn resolved_rank(&self) -> Result<Option<usize>> {
        self.rank.map(|r| r.resolve(self.k)).transpose()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.alpha == 0 {
            return Err(Error::invalid("alpha must be a positive integer"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if matches!(self.recovery, RecoveryMethod::Pca | RecoveryMethod::RandomProjection)
            && self.rank.is_none()
        {
            return Err(Error::invalid(format!(
                "{} recovery needs a target rank",
                self.recovery.name()
            )));
        }
        self.resolved_rank()?;
        self.rpca.validate()
    }
}

/// Every intermediate of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub recovery: Recovery,
    pub representation: Representation,
    pub factor: SkinnyFactor,
    pub affinity: AffinityMatrix,
    pub result: ClusteringResult,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::in_stage(name, e))
}

pub fn recover(x: &DataMatrix, cfg: &PipelineConfig) -> Result<Recovery> {
    let rank = cfg.resolved_rank()?;
    let rec = match cfg.recovery {
        RecoveryMethod::Identity => recovery::identity_recover(x),
        RecoveryMethod::Pca => {
            recovery::pca_recover_with(x, rank.expect("validated"), cfg.pca_center)?
        }
        RecoveryMethod::RandomProjection => {
            recovery::random_project(x, rank.expect("validated"), cfg.seed)?
        }
        RecoveryMethod::Rpca => recovery::rpca_recover(x, &cfg.rpca)?,
    };
    if cfg.affine_ones {
        rec.with_ones_row()
    } else {
        Ok(rec)
    }
}

fn build_affinity(
    rep: &Representation,
    factor: &SkinnyFactor,
    cfg: &PipelineConfig,
) -> Result<AffinityMatrix> {
    match (cfg.affinity, cfg.side) {
        (AffinityKind::AbsSum, _) => Ok(affinity::abs_sum_affinity(rep)),
        (AffinityKind::Cosine, Side::ColsOfN) => {
            let n = affinity::column_factor(rep, cfg.rel_tol)?;
            affinity::build_affinity_from_columns(&n, cfg.alpha)
        }
        (kind, _) => affinity::build_affinity_with(factor, cfg.alpha, kind),
    }
}

/// Representation, factor, affinity and labels for an existing surrogate.
pub fn cluster_recovery(
    rec: Recovery,
    cfg: &PipelineConfig,
    truth: Option<&LabelVector>,
    mut timings: StageTimings,
) -> Result<PipelineOutput> {
    let representation = stage("solve", timings.time("solve", || slrr::solve(&rec, cfg.lambda)))?;
    let factor = stage(
        "skinny_svd",
        timings.time("skinny_svd", || affinity::skinny_svd(&representation, cfg.rel_tol)),
    )?;
    let affinity = stage(
        "affinity",
        timings.time("affinity", || build_affinity(&representation, &factor, cfg)),
    )?;
    let predicted = stage(
        "spectral",
        timings.time("spectral", || spectral::ncuts(&affinity, &cfg.spectral())),
    )?;
    let alignment = match truth {
        Some(t) => Some(stage("evaluate", eval::align_labels(&predicted, t))?),
        None => None,
    };
    Ok(PipelineOutput {
        recovery: rec,
        representation,
        factor,
        affinity,
        result: ClusteringResult {
            predicted,
            error: alignment.as_ref().map(|a| a.error),
            alignment: alignment.map(|a| a.mapping),
            stage_timings: timings,
        },
    })
}

/// Run every stage on `x`, attaching the stage name to any failure.
pub fn run_pipeline(
    x: &DataMatrix,
    cfg: &PipelineConfig,
    truth: Option<&LabelVector>,
) -> Result<PipelineOutput> {
    stage("config", cfg.validate())?;
    if let Some(t) = truth {
        if t.len() != x.cols() {
            return Err(Error::in_stage(
                "config",
                Error::shape(format!("{} labels for {} samples", t.len(), x.cols())),
            ));
        }
    }
    let mut timings = StageTimings::default();
    let rec = stage("recovery", timings.time("recovery", || recover(x, cfg)))?;
    cluster_recovery(rec, cfg, truth, timings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub error: Option<f64>,
    pub failure: Option<String>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub trials: Vec<TrialRecord>,
    /// Statistics over the trials that produced an error value.
    pub summary: Option<Summary>,
    pub failures: usize,
}

/// Run one trial per seed (in parallel) and aggregate the errors.
pub fn run_trials<F>(seeds: &[u64], trial: F) -> TrialsReport
where
    F: Fn(u64) -> Result<ClusteringResult> + Sync,
{
    let trials: Vec<TrialRecord> = seeds
        .par_iter()
        .map(|&seed| match trial(seed) {
            Ok(res) => TrialRecord {
                seed,
                error: res.error,
                failure: None,
                timings: res.stage_timings,
            },
            Err(e) => TrialRecord {
                seed,
                error: None,
                failure: Some(e.to_string()),
                timings: StageTimings::default(),
            },
        })
        .collect();
    let errors: Vec<f64> = trials.iter().filter_map(|t| t.error).collect();
    TrialsReport {
        summary: Summary::of(&errors),
        failures: trials.iter().filter(|t| t.failure.is_some()).count(),
        trials,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub alpha: u32,
    pub rank: Option<RankSpec>,
    pub error: Option<f64>,
    pub seconds: f64,
    pub failure: Option<String>,
}

/// Full-factorial grid over `lambda x alpha x rank`. Failed cells are
/// recorded and the rest of the grid still runs.
pub fn sweep(
    x: &DataMatrix,
    base: &PipelineConfig,
    lambdas: &[f64],
    alphas: &[u32],
    ranks: &[Option<RankSpec>],
    truth: Option<&LabelVector>,
) -> Result<Vec<SweepCell>> {
    if lambdas.is_empty() || alphas.is_empty() || ranks.is_empty() {
        return Err(Error::invalid("sweep grids must be nonempty"));
    }
    let mut grid = Vec::with_capacity(lambdas.len() * alphas.len() * ranks.len());
    for &rank in ranks {
        for &alpha in alphas {
            for &lambda in lambdas {
                grid.push((lambda, alpha, rank));
            }
        }
    }
    Ok(grid
        .into_par_iter()
        .map(|(lambda, alpha, rank)| {
            let cfg = PipelineConfig {
                lambda,
                alpha,
                rank,
                ..base.clone()
            };
            let start = Instant::now();
            let outcome = run_pipeline(x, &cfg, truth);
            let seconds = start.elapsed().as_secs_f64();
            let (error, failure) = match outcome {
                Ok(out) => (out.result.error, None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepCell {
                lambda,
                alpha,
                rank,
                error,
                seconds,
                failure,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub m: usize,
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of `ln(seconds)` on `ln(n)`; absent for a single size.
    pub slope: Option<f64>,
}

/// Seconds spent in solve, skinny SVD, affinity and spectral clustering.
pub fn time_core(x: &DataMatrix, cfg: &PipelineConfig) -> Result<f64> {
    let rec = recovery::identity_recover(x);
    let start = Instant::now();
    cluster_recovery(rec, cfg, None, StageTimings::default())?;
    Ok(start.elapsed().as_secs_f64())
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Time the core stages on Gaussian `m x n` data for each `n` in `sizes`,
/// keeping the fastest of `repeats` runs per size.
pub fn scaling_report(
    sizes: &[usize],
    m: usize,
    cfg: &PipelineConfig,
    repeats: usize,
) -> Result<BenchReport> {
    if sizes.is_empty() {
        return Err(Error::invalid("no sizes given"));
    }
    if sizes.contains(&0) || m == 0 {
        return Err(Error::invalid("sizes and m must be positive"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sizes must be strictly ascending"));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ n as u64);
        let x = DataMatrix::new(DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal)))?;
        let run_cfg = PipelineConfig {
            k: cfg.k.min(n),
            ..cfg.clone()
        };
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            best = best.min(time_core(&x, &run_cfg)?);
        }
        points.push(BenchPoint { n, seconds: best });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.seconds)).collect();
    Ok(BenchReport {
        m,
        slope: log_log_slope(&pairs),
        points,
    })
}
