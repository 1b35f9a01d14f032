//! Data matrices, label vectors, text I/O, and synthetic data.
//!
//! Matrices always hold samples as columns. On disk a matrix is delimited
//! text (commas or whitespace), one matrix row per line; lines starting with
//! `#` are ignored. The [`Layout`] flag says whether each on-disk line is a
//! feature row (samples as columns) or a sample (samples as rows).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Dense real matrix whose columns are samples. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::invalid(format!(
                "data matrix must be nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % m.nrows(), pos / m.nrows());
            return Err(Error::Numerical(format!(
                "non-finite entry at ({r}, {c})"
            )));
        }
        Ok(DataMatrix(m))
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn rank(&self) -> Result<usize> {
        linalg::numerical_rank(&self.0)
    }

    /// Affine rescale so the entries span exactly `[0, 1]`.
    ///
    /// A constant matrix maps to all zeros.
    pub fn scaled_to_unit_interval(&self) -> DataMatrix {
        let lo = self.0.min();
        let hi = self.0.max();
        let span = hi - lo;
        if span == 0.0 {
            return DataMatrix(DMatrix::zeros(self.rows(), self.cols()));
        }
        DataMatrix(self.0.map(|v| ((v - lo) / span).clamp(0.0, 1.0)))
    }
}

/// Ground-truth or predicted cluster labels, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("label vector is empty"));
        }
        if let Some(i) = labels.iter().position(|&l| l == 0) {
            return Err(Error::invalid(format!(
                "labels are 1-based; found 0 at position {i}"
            )));
        }
        Ok(LabelVector(labels))
    }

    /// Labels for a ground truth: additionally requires every index in
    /// `1..=max` to occur.
    pub fn ground_truth(labels: Vec<usize>) -> Result<Self> {
        let v = Self::new(labels)?;
        let k = v.num_clusters();
        let mut seen = vec![false; k];
        for &l in &v.0 {
            seen[l - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "cluster {} has no members",
                missing + 1
            )));
        }
        Ok(v)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest label present.
    pub fn num_clusters(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Each line is a feature row; samples run across columns.
    #[default]
    SamplesAsColumns,
    /// Each line is one sample.
    SamplesAsRows,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn split_tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

/// Parse delimited numeric text into a matrix whose rows are the text lines.
pub fn parse_matrix_text(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut width: Option<usize> = None;
    let mut entries = Vec::new();
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = entries.len();
        for tok in split_tokens(line) {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("non-numeric token {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("non-finite value {tok:?}")));
            }
            entries.push(v);
        }
        let got = entries.len() - before;
        match width {
            None => width = Some(got),
            Some(w) if w != got => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("ragged row: expected {w} values, found {got}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = width.ok_or_else(|| parse_err(path, 0, "no data rows"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &entries))
}

pub fn load_matrix(path: impl AsRef<Path>, layout: Layout) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let m = parse_matrix_text(&text, path)?;
    let m = match layout {
        Layout::SamplesAsColumns => m,
        Layout::SamplesAsRows => m.transpose(),
    };
    DataMatrix::new(m)
}

/// Render a matrix as comma-delimited text with 17 significant digits.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 25);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", m[(r, c)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_raw_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|e| io_err(path, e))
}

pub fn save_matrix(path: impl AsRef<Path>, x: &DataMatrix, layout: Layout) -> Result<()> {
    match layout {
        Layout::SamplesAsColumns => save_raw_matrix(path, x.matrix()),
        Layout::SamplesAsRows => save_raw_matrix(path, &x.matrix().transpose()),
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let l: usize = line
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("bad label {line:?}")))?;
        if l == 0 {
            return Err(parse_err(path, idx + 1, "labels are 1-based"));
        }
        labels.push(l);
    }
    LabelVector::new(labels)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &LabelVector) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for l in labels.as_slice() {
        writeln!(out, "{l}").unwrap();
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Parameters for a synthetic union-of-subspaces sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_subspaces: usize,
    pub subspace_dim: usize,
    pub ambient_dim: usize,
    pub points_per_subspace: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Require `num_subspaces * subspace_dim <= ambient_dim`.
    #[serde(default)]
    pub independent: bool,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_subspaces == 0 || self.subspace_dim == 0 || self.points_per_subspace == 0 {
            return Err(Error::invalid(
                "num_subspaces, subspace_dim and points_per_subspace must be positive",
            ));
        }
        if self.subspace_dim >= self.ambient_dim {
            return Err(Error::invalid(format!(
                "subspace_dim ({}) must be below ambient_dim ({})",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if self.independent && self.num_subspaces * self.subspace_dim > self.ambient_dim {
            return Err(Error::invalid(format!(
                "{} independent {}-dim subspaces do not fit in dimension {}",
                self.num_subspaces, self.subspace_dim, self.ambient_dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be finite and nonnegative"));
        }
        Ok(())
    }
}

fn standard_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled column by column so the stream order does not depend on storage.
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Draw `points_per_subspace` samples from each of `num_subspaces` random
/// subspaces. Columns are grouped by subspace; labels give the generator.
pub fn generate_union_of_subspaces(spec: &SynthSpec) -> Result<(DataMatrix, LabelVector)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.num_subspaces * spec.points_per_subspace;
    let mut x = DMatrix::zeros(spec.ambient_dim, n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..spec.num_subspaces {
        let basis = linalg::orthonormal_columns(standard_normal(
            &mut rng,
            spec.ambient_dim,
            spec.subspace_dim,
        ));
        let coeffs = standard_normal(&mut rng, spec.subspace_dim, spec.points_per_subspace);
        let block = basis * coeffs;
        let start = s * spec.points_per_subspace;
        x.columns_mut(start, spec.points_per_subspace).copy_from(&block);
        labels.extend(std::iter::repeat_n(s + 1, spec.points_per_subspace));
    }
    if spec.noise_sigma > 0.0 {
        let noise = standard_normal(&mut rng, spec.ambient_dim, n);
        x += noise * spec.noise_sigma;
    }
    Ok((DataMatrix::new(x)?, LabelVector::new(labels)?))
}

/// Number of positions replaced for a corruption `ratio`, rounding half up.
pub fn corruption_count(ratio: f64, total: usize) -> usize {
    ((ratio * total as f64) + 0.5).floor() as usize
}

/// Replace `round(ratio * m * n)` distinct, uniformly chosen entries with
/// independent uniform draws from `[0, 1]`.
pub fn corrupt_entries(x: &DataMatrix, ratio: f64, seed: u64) -> Result<DataMatrix> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid(format!(
            "corruption ratio must lie in [0, 1], got {ratio}"
        )));
    }
    let m = x.matrix();
    if m.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        warn!("corrupting a matrix with entries outside [0, 1]; the protocol assumes unit-scaled data");
    }
    let total = m.len();
    let count = corruption_count(ratio, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = index::sample(&mut rng, total, count);
    let mut out = m.clone();
    let data = out.as_mut_slice();
    for pos in positions.iter() {
        data[pos] = rng.random::<f64>();
    }
    DataMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_samples_as_columns() {
        let f = write_tmp("1,2,3\n4,5,6\n");
        let x = load_matrix(f.path(), Layout::SamplesAsColumns).unwrap();
        assert_eq!((x.rows(), x.cols()), (2, 3));
        assert_eq!(x.row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn load_samples_as_rows_transposes() {
        let f = write_tmp("1,2,3\n4,5,6");
        let x = load_matrix(f.path(), Layout::SamplesAsRows).unwrap();
        assert_eq!((x.rows(), x.cols()), (3, 2));
        assert_eq!(x.matrix()[(2, 1)], 6.0);
    }

    #[test]
    fn ragged_row_reports_line() {
        let f = write_tmp("1,2\n3");
        match load_matrix(f.path(), Layout::SamplesAsColumns) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("ragged"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_token_reports_line() {
        let f = write_tmp("# header\n1 2\n3 x\n");
        match load_matrix(f.path(), Layout::SamplesAsColumns) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn whitespace_and_header_accepted() {
        let f = write_tmp("# m=2 n=2\n 1.5\t2\n3   4\n");
        let x = load_matrix(f.path(), Layout::SamplesAsColumns).unwrap();
        assert_eq!(x.row_major(), vec![1.5, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_matrix("/nonexistent/x.csv", Layout::SamplesAsColumns).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn labels_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        let l = LabelVector::new(vec![1, 2, 2, 3]).unwrap();
        save_labels(&p, &l).unwrap();
        assert_eq!(load_labels(&p).unwrap(), l);
        assert!(LabelVector::new(vec![0, 1]).is_err());
        assert!(LabelVector::ground_truth(vec![1, 3]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DataMatrix::from_row_major(1, 2, &[1.0, f64::NAN]).is_err());
        assert!(DataMatrix::from_row_major(2, 2, &[1.0]).is_err());
    }

    fn spec(k: usize, d: usize, dim: usize, pts: usize) -> SynthSpec {
        SynthSpec {
            num_subspaces: k,
            subspace_dim: d,
            ambient_dim: dim,
            points_per_subspace: pts,
            noise_sigma: 0.0,
            seed: 3,
            independent: true,
        }
    }

    #[test]
    fn one_dimensional_clusters_are_parallel() {
        let (x, labels) = generate_union_of_subspaces(&spec(2, 1, 3, 10)).unwrap();
        assert_eq!(labels.as_slice()[..10], [1; 10]);
        for c in 0..2 {
            let block = x.matrix().columns(c * 10, 10).into_owned();
            assert_eq!(linalg::numerical_rank(&block).unwrap(), 1);
        }
    }

    #[test]
    fn total_rank_is_sum_of_dims() {
        let (x, _) = generate_union_of_subspaces(&spec(5, 4, 50, 40)).unwrap();
        assert_eq!(x.rank().unwrap(), 20);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = SynthSpec {
            noise_sigma: 0.1,
            ..spec(3, 2, 10, 7)
        };
        let a = generate_union_of_subspaces(&s).unwrap();
        let b = generate_union_of_subspaces(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_violations_rejected() {
        assert!(generate_union_of_subspaces(&spec(2, 3, 3, 5)).is_err());
        assert!(generate_union_of_subspaces(&spec(3, 2, 5, 5)).is_err());
        let dependent = SynthSpec {
            independent: false,
            ..spec(3, 2, 5, 5)
        };
        assert!(generate_union_of_subspaces(&dependent).is_ok());
    }

    #[test]
    fn zero_corruption_is_identity() {
        let x = DataMatrix::from_row_major(2, 2, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(corrupt_entries(&x, 0.0, 1).unwrap(), x);
    }

    #[test]
    fn full_corruption_replaces_everything() {
        let x = DataMatrix::new(DMatrix::from_element(4, 4, 5.0)).unwrap();
        let y = corrupt_entries(&x, 1.0, 9).unwrap();
        assert!(y.matrix().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(y.matrix().iter().all(|&v| v != 5.0));
    }

    #[test]
    fn corruption_count_on_face_sized_matrix() {
        let x = DataMatrix::new(DMatrix::from_element(48, 42, 2.0)).unwrap();
        let y = corrupt_entries(&x, 0.2, 4).unwrap();
        let changed = x
            .matrix()
            .iter()
            .zip(y.matrix().iter())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 403);
        assert_eq!(corruption_count(0.2, 2016), 403);
        assert_eq!(corruption_count(0.5, 3), 2);
    }

    #[test]
    fn corruption_ratio_validated() {
        let x = DataMatrix::from_row_major(1, 1, &[0.5]).unwrap();
        assert!(corrupt_entries(&x, 1.5, 0).is_err());
        assert!(corrupt_entries(&x, -0.1, 0).is_err());
    }

    #[test]
    fn unit_interval_scaling() {
        let x = DataMatrix::from_row_major(1, 3, &[-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(x.scaled_to_unit_interval().row_major(), vec![0.0, 0.5, 1.0]);
    }
}
