//! Clustering error under optimal label alignment, and run bookkeeping.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelVector;
use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(k³)). Returns `row_to_col`.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is a virtual start node.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_v = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < min_v[col] {
                    min_v[col] = reduced;
                    way[col] = col0;
                }
                if min_v[col] < delta {
                    delta = min_v[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_v[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for col in 1..=n {
        row_to_col[owner[col] - 1] = col - 1;
    }
    row_to_col
}

/// `counts[p][t]` = samples with predicted label `p+1` and true label `t+1`,
/// padded to a square of side `max(k_pred, k_truth)`.
pub fn confusion_matrix(predicted: &LabelVector, truth: &LabelVector) -> Result<Vec<Vec<usize>>> {
    if predicted.is_empty() || truth.is_empty() {
        return Err(Error::invalid("label vectors must be nonempty"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::shape(format!(
            "predicted has {} labels, truth has {}",
            predicted.len(),
            truth.len()
        )));
    }
    let k = predicted.num_clusters().max(truth.num_clusters());
    let mut counts = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.as_slice().iter().zip(truth.as_slice()) {
        counts[p - 1][t - 1] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Fraction of samples misassigned after alignment.
    pub error: f64,
    pub misclassified: usize,
    /// `mapping[p-1]` is the true label matched to predicted label `p`.
    pub mapping: Vec<usize>,
}

/// Match predicted clusters to true clusters one-to-one so that the number
/// of agreeing samples is maximal.
pub fn align_labels(predicted: &LabelVector, truth: &LabelVector) -> Result<Alignment> {
    let counts = confusion_matrix(predicted, truth)?;
    let cost: Vec<Vec<i64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| -(c as i64)).collect())
        .collect();
    let assignment = min_cost_assignment(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .map(|(p, &t)| counts[p][t])
        .sum();
    let total = predicted.len();
    Ok(Alignment {
        error: (total - matched) as f64 / total as f64,
        misclassified: total - matched,
        mapping: assignment.iter().map(|t| t + 1).collect(),
    })
}

/// Misclassification rate after optimal alignment, in `[0, 1]`.
pub fn clustering_error(predicted: &LabelVector, truth: &LabelVector) -> Result<f64> {
    Ok(align_labels(predicted, truth)?.error)
}

/// Wall-clock seconds per pipeline stage, keyed by stage name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings(pub BTreeMap<String, f64>);

impl StageTimings {
    /// Run `f`, recording its duration under `stage` at millisecond
    /// resolution.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        self.0.insert(stage.to_string(), (secs * 1e3).round() / 1e3);
        out
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        self.0.get(stage).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub predicted: LabelVector,
    /// Present when ground truth was supplied.
    pub error: Option<f64>,
    pub alignment: Option<Vec<usize>>,
    pub stage_timings: StageTimings,
}

/// Mean, median, sample standard deviation and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let std = if n > 1 {
            (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            count: n,
            mean,
            median,
            std,
            max: sorted[n - 1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[usize]) -> LabelVector {
        LabelVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_and_permuted() {
        let t = lv(&[1, 1, 2, 2, 3]);
        assert_eq!(clustering_error(&t, &t).unwrap(), 0.0);
        assert_eq!(clustering_error(&lv(&[3, 3, 1, 1, 2]), &t).unwrap(), 0.0);
    }

    #[test]
    fn one_of_four_wrong() {
        let e = clustering_error(&lv(&[1, 2, 2, 2]), &lv(&[1, 1, 2, 2])).unwrap();
        assert_eq!(e, 0.25);
    }

    #[test]
    fn constant_predictor_on_balanced_truth() {
        let truth = lv(&[1, 1, 2, 2, 3, 3, 4, 4]);
        let e = clustering_error(&lv(&[1; 8]), &truth).unwrap();
        assert_eq!(e, 1.0 - 1.0 / 4.0);
    }

    #[test]
    fn more_predicted_clusters_than_truth() {
        let a = align_labels(&lv(&[1, 2, 3, 3]), &lv(&[1, 1, 2, 2])).unwrap();
        assert_eq!(a.misclassified, 1);
        assert_eq!(a.mapping.len(), 3);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(clustering_error(&lv(&[1, 2]), &lv(&[1])).is_err());
    }

    #[test]
    fn assignment_small_case() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = min_cost_assignment(&cost);
        let total: i64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of(&[0.0, 0.5]).unwrap();
        assert_eq!((s.mean, s.median, s.max), (0.25, 0.25, 0.5));
        let one = Summary::of(&[0.3]).unwrap();
        assert_eq!((one.mean, one.median, one.std, one.max), (0.3, 0.3, 0.0, 0.3));
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn timings_recorded() {
        let mut t = StageTimings::default();
        let v = t.time("stage", || 7);
        assert_eq!(v, 7);
        assert!(t.get("stage").unwrap() >= 0.0);
    }
}
