//! Affinity graphs from the angular structure of the representation.
//!
//! The representation is factored as `Z = M Mᵀ` with `M = U Σ^{1/2}` from
//! its skinny SVD. Each sample is embedded as a row of `M` and two samples
//! are linked by their powered cosine, `W_ij = cos(m_i, m_j)^{2α}`.

use std::fmt::Write as _;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SortedSvd};
use crate::slrr::{Representation, SYMMETRY_TOLERANCE};

pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Which factor the embedding vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Rows of `M = U Σ^{1/2}`.
    #[default]
    RowsOfM,
    /// Columns of `N = Σ^{1/2} Vᵀ`.
    ColsOfN,
}

/// How pairwise weights are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffinityKind {
    /// Powered cosine of embedding vectors.
    #[default]
    Cosine,
    /// Powered inner product without norm normalization, rescaled to a unit
    /// maximum. Debug comparison only.
    RawInner,
    /// `|Z| + |Zᵀ|` rescaled to a unit maximum. Debug comparison only.
    AbsSum,
}

#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    pub w: DMatrix<f64>,
    pub alpha: u32,
    pub side: Side,
    pub kind: AffinityKind,
}

impl AffinityMatrix {
    pub fn size(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct SkinnyFactor {
    /// `n x r`, one embedding per sample.
    pub m: DMatrix<f64>,
    /// Retained singular values, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Smallest eigenvalue seen before truncation.
    pub min_eigenvalue: f64,
    /// Set when an eigenvalue fell below `-10·eps·σ₁`.
    pub psd_violation: bool,
}

impl SkinnyFactor {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// True for the factor of a zero representation.
    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }
}

fn check_symmetric(z: &DMatrix<f64>) -> Result<()> {
    if !z.is_square() {
        return Err(Error::shape("representation must be square"));
    }
    let scale = linalg::max_abs(z).max(f64::MIN_POSITIVE);
    let asym = linalg::asymmetry(z);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Numerical(format!(
            "representation is not symmetric (max |Z - Zᵀ| = {asym:.3e})"
        )));
    }
    Ok(())
}

/// Skinny factor of a symmetric PSD representation.
///
/// Triplets with `σ <= rel_tol·σ₁` are dropped; slightly negative
/// eigenvalues are clamped to zero.
pub fn skinny_svd(rep: &Representation, rel_tol: f64) -> Result<SkinnyFactor> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol must be positive"));
    }
    check_symmetric(&rep.z)?;
    let n = rep.size();
    let (values, vectors) = linalg::symmetric_eigen_desc(&rep.z)?;
    let top = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min_eigenvalue = values.last().copied().unwrap_or(0.0);
    let psd_violation = min_eigenvalue < -10.0 * f64::EPSILON * top;
    if psd_violation {
        warn!("representation has eigenvalue {min_eigenvalue:.3e} below the PSD guard");
    }
    if top == 0.0 {
        warn!("representation is zero; skinny factor is empty");
        return Ok(SkinnyFactor {
            m: DMatrix::zeros(n, 0),
            singular_values: Vec::new(),
            min_eigenvalue,
            psd_violation,
        });
    }
    let cutoff = rel_tol * top;
    let kept: Vec<usize> = (0..n).filter(|&i| values[i].max(0.0) > cutoff).collect();
    let mut m = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let scale = values[i].sqrt();
        m.set_column(c, &(vectors.column(i) * scale));
    }
    Ok(SkinnyFactor {
        m,
        singular_values: kept.iter().map(|&i| values[i]).collect(),
        min_eigenvalue,
        psd_violation,
    })
}

/// `N = Σ^{1/2} Vᵀ` from a general SVD of the representation (`r x n`).
pub fn column_factor(rep: &Representation, rel_tol: f64) -> Result<DMatrix<f64>> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol must be positive"));
    }
    check_symmetric(&rep.z)?;
    let svd = SortedSvd::new(&rep.z)?;
    let cutoff = rel_tol * svd.largest();
    let kept = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff && s > 0.0)
        .count();
    let mut n = svd.v_t.rows(0, kept).into_owned();
    for (i, mut row) in n.row_iter_mut().enumerate() {
        row *= svd.singular_values[i].sqrt();
    }
    Ok(n)
}

fn check_alpha(alpha: u32) -> Result<()> {
    if alpha == 0 {
        Err(Error::invalid("alpha must be a positive integer"))
    } else {
        Ok(())
    }
}

/// Powered-cosine affinity of the rows of `embedding`.
///
/// Zero rows get zero affinity everywhere, including the diagonal.
pub fn cosine_affinity(embedding: &DMatrix<f64>, alpha: u32) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    let n = embedding.nrows();
    let mut unit = embedding.clone();
    let mut nonzero = vec![false; n];
    for (i, mut row) in unit.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
            nonzero[i] = true;
        }
    }
    let gram = &unit * unit.transpose();
    let power = 2 * alpha as i32;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        if !nonzero[i] {
            continue;
        }
        w[(i, i)] = 1.0;
        for j in (i + 1)..n {
            if !nonzero[j] {
                continue;
            }
            let v = gram[(i, j)].clamp(-1.0, 1.0).powi(power);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

fn rescale_to_unit_max(mut w: DMatrix<f64>) -> DMatrix<f64> {
    let top = linalg::max_abs(&w);
    if top > 0.0 {
        w /= top;
    }
    w
}

/// Affinity from the rows of the skinny factor.
pub fn build_affinity(factor: &SkinnyFactor, alpha: u32) -> Result<AffinityMatrix> {
    build_affinity_with(factor, alpha, AffinityKind::Cosine)
}

pub fn build_affinity_with(
    factor: &SkinnyFactor,
    alpha: u32,
    kind: AffinityKind,
) -> Result<AffinityMatrix> {
    check_alpha(alpha)?;
    let w = match kind {
        AffinityKind::Cosine => cosine_affinity(&factor.m, alpha)?,
        AffinityKind::RawInner => {
            let power = 2 * alpha as i32;
            let mut w = &factor.m * factor.m.transpose();
            linalg::symmetrize(&mut w);
            rescale_to_unit_max(w.map(|v| v.powi(power)))
        }
        AffinityKind::AbsSum => {
            return Err(Error::invalid(
                "abs-sum affinity is built from the representation; use abs_sum_affinity",
            ))
        }
    };
    Ok(AffinityMatrix {
        w,
        alpha,
        side: Side::RowsOfM,
        kind,
    })
}

/// Affinity from the columns of `N = Σ^{1/2} Vᵀ`.
pub fn build_affinity_from_columns(n_factor: &DMatrix<f64>, alpha: u32) -> Result<AffinityMatrix> {
    Ok(AffinityMatrix {
        w: cosine_affinity(&n_factor.transpose(), alpha)?,
        alpha,
        side: Side::ColsOfN,
        kind: AffinityKind::Cosine,
    })
}

/// `|Z| + |Zᵀ|` scaled to a unit maximum.
pub fn abs_sum_affinity(rep: &Representation) -> AffinityMatrix {
    let z = &rep.z;
    let w = z.abs() + z.transpose().abs();
    AffinityMatrix {
        w: rescale_to_unit_max(w),
        alpha: 1,
        side: Side::RowsOfM,
        kind: AffinityKind::AbsSum,
    }
}

/// Grayscale SVG heat map, white for affinity 1. Matrices larger than
/// `max_cells` are block-averaged down.
pub fn heatmap_svg(w: &DMatrix<f64>, max_cells: usize) -> String {
    let n = w.nrows();
    let cells = n.min(max_cells.max(1));
    let cell_px = (600 / cells.max(1)).max(1);
    let side = cells * cell_px;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" viewBox="0 0 {side} {side}" shape-rendering="crispEdges">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{side}" height="{side}" fill="black"/>"#).unwrap();
    let bounds = |b: usize| (b * n / cells, ((b + 1) * n / cells).max(b * n / cells + 1));
    for bi in 0..cells {
        let (r0, r1) = bounds(bi);
        for bj in 0..cells {
            let (c0, c1) = bounds(bj);
            let block = w.view((r0, c0), (r1 - r0, c1 - c0));
            let mean = block.sum() / block.len() as f64;
            let level = (mean.clamp(0.0, 1.0) * 255.0).round() as u8;
            if level == 0 {
                continue;
            }
            writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{cell_px}" height="{cell_px}" fill="rgb({level},{level},{level})"/>"#,
                bj * cell_px,
                bi * cell_px
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    svg
}
