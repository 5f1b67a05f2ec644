//! Clustering evaluation: misclassification rate under the best label
//! matching, and the oracle PCA classifier.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::geometry::{fit_pca_indices, Subspace};
use crate::spectral::Labeling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub misclassification_rate: f64,
    /// `matching[e]` is the true label matched to estimated cluster `e`, if any.
    pub matching: Vec<Option<usize>>,
    /// Points of each estimated cluster not carrying its matched true label.
    pub per_cluster_errors: Vec<usize>,
    pub n: usize,
    pub mismatches: usize,
}

impl EvalReport {
    pub fn rate(&self) -> f64 {
        self.misclassification_rate
    }
}

/// Misclassification rate of `est` against `truth` after matching estimated
/// clusters to true clusters so as to maximize agreement.
///
/// When the label counts differ the assignment is rectangular and points of
/// unmatched clusters all count as errors.
pub fn misclassification_rate(est: &Labeling, truth: &Labeling) -> Result<EvalReport> {
    misclassification_from_labels(est.labels(), est.k(), truth.labels(), truth.k())
}

pub fn misclassification_from_labels(
    est: &[usize],
    k_est: usize,
    truth: &[usize],
    k_true: usize,
) -> Result<EvalReport> {
    if est.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: est.len(),
        });
    }
    let n = est.len();
    let k_est = k_est.max(est.iter().max().map_or(0, |m| m + 1));
    let k_true = k_true.max(truth.iter().max().map_or(0, |m| m + 1));
    let mut confusion = vec![vec![0usize; k_true]; k_est];
    for (&e, &t) in est.iter().zip(truth) {
        confusion[e][t] += 1;
    }
    let matching = max_agreement_assignment(&confusion, k_true);
    let mut agreement = 0;
    let mut per_cluster_errors = Vec::with_capacity(k_est);
    for (e, m) in matching.iter().enumerate() {
        let size: usize = confusion[e].iter().sum();
        let hit = m.map_or(0, |t| confusion[e][t]);
        agreement += hit;
        per_cluster_errors.push(size - hit);
    }
    let mismatches = n - agreement;
    let rate = if n == 0 { 0.0 } else { mismatches as f64 / n as f64 };
    Ok(EvalReport {
        misclassification_rate: rate,
        matching,
        per_cluster_errors,
        n,
        mismatches,
    })
}

/// Maximum-weight assignment of rows to columns (Hungarian method on the
/// zero-padded square matrix).
fn max_agreement_assignment(weights: &[Vec<usize>], cols: usize) -> Vec<Option<usize>> {
    let rows = weights.len();
    let size = rows.max(cols);
    if size == 0 {
        return Vec::new();
    }
    let top = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| -> i64 {
        let w = if i < rows && j < cols { weights[i][j] as i64 } else { 0 };
        top - w
    };
    let assignment = hungarian_min(size, cost);
    (0..rows)
        .map(|i| Some(assignment[i]).filter(|&j| j < cols))
        .collect()
}

/// Minimum-cost perfect matching on an `n x n` cost function; returns the
/// column assigned to each row. Potentials-based O(n^3) formulation.
fn hungarian_min(n: usize, cost: impl Fn(usize, usize) -> i64) -> Vec<usize> {
    const INF: i64 = i64::MAX / 4;
    // 1-based internally; index 0 is the virtual start column
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < min_v[j] {
                        min_v[j] = cur;
                        way[j] = j0;
                    }
                    if min_v[j] < delta {
                        delta = min_v[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Labels each point with the true cluster whose PCA subspace is closest.
pub fn oracle_pca_labels(data: &DataMatrix, d: usize) -> Result<Labeling> {
    let truth = data
        .truth()
        .ok_or_else(|| Error::InvalidArgument("oracle classifier needs truth labels".into()))?;
    let truth = Labeling::from_labels(truth.to_vec());
    let subspaces = truth
        .clusters()
        .iter()
        .enumerate()
        .map(|(k, members)| {
            if members.is_empty() {
                return Err(Error::DegenerateCluster(format!("true cluster {k} is empty")));
            }
            fit_pca_indices(data.points(), members, d)
        })
        .collect::<Result<Vec<Subspace>>>()?;
    let labels = (0..data.len())
        .map(|i| {
            let x = data.point(i);
            let mut best = (0, subspaces[0].residual_unchecked(x));
            for (k, s) in subspaces.iter().enumerate().skip(1) {
                let r = s.residual_unchecked(x);
                if r < best.1 {
                    best = (k, r);
                }
            }
            best.0
        })
        .collect();
    Labeling::new(labels, subspaces.len())
}
