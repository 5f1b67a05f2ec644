use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::eval::misclassification_from_labels;
use crate::geometry::fit_pca_indices;
use crate::spectral::Labeling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub queries_used: usize,
    pub labels: Vec<usize>,
    /// Misclassification rate, when truth labels are known.
    pub error: Option<f64>,
    pub cost: f64,
    pub n_certain_sets: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_labels(&self) -> Option<&[usize]> {
        self.last().map(|r| r.labels.as_slice())
    }

    /// Fewest queries after which the error is at most `target`.
    pub fn queries_to_reach(&self, target: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.error.is_some_and(|e| e <= target))
            .map(|r| r.queries_used)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("queries,error,cost\n");
        for r in &self.records {
            let err = r.error.map(|e| format!("{e:?}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:?}\n", r.queries_used, err, r.cost));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Sum of squared residuals of every point to the PCA subspace of its own
/// cluster. Empty clusters contribute nothing.
pub fn ksubspaces_cost(data: &DataMatrix, labeling: &Labeling, d: usize) -> Result<f64> {
    if labeling.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: labeling.len(),
        });
    }
    let d = d.min(data.ambient_dim());
    let mut total = 0.0;
    for members in labeling.clusters() {
        if members.is_empty() {
            continue;
        }
        let s = fit_pca_indices(data.points(), &members, d)?;
        for &i in &members {
            let r = s.residual_unchecked(data.point(i));
            total += r * r;
        }
    }
    Ok(total)
}

/// Keeps `new` only if it strictly lowers the K-subspaces cost.
pub fn smoothing_accept(
    prev: Labeling,
    prev_cost: f64,
    new: Labeling,
    data: &DataMatrix,
    d: usize,
) -> Result<(Labeling, f64)> {
    let new_cost = ksubspaces_cost(data, &new, d)?;
    if new_cost < prev_cost {
        Ok((new, new_cost))
    } else {
        Ok((prev, prev_cost))
    }
}

pub(crate) fn record(
    data: &DataMatrix,
    labeling: &Labeling,
    cost: f64,
    queries_used: usize,
    n_certain_sets: usize,
) -> Result<TraceRecord> {
    let error = match data.truth() {
        Some(t) => {
            let k_true = t.iter().max().map_or(0, |m| m + 1);
            Some(misclassification_from_labels(labeling.labels(), labeling.k(), t, k_true)?.rate())
        }
        None => None,
    };
    Ok(TraceRecord {
        queries_used,
        labels: labeling.labels().to_vec(),
        error,
        cost,
        n_certain_sets,
    })
}
