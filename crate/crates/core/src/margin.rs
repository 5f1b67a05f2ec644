//! Subspace margin: `1 - r1 / r2`, where `r1 <= r2` are a point's two
//! smallest residuals over a set of subspaces.
//!
//! A margin of 0 means the point is equidistant from its two closest
//! subspaces; 1 means it lies on its closest subspace. Degenerate cases:
//! `r1 = r2 = 0` gives 0 and `r1 = 0 < r2` gives 1.

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::geometry::Subspace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMargin {
    pub margin: f64,
    /// Index of the closest subspace (lowest index on ties).
    pub nearest: usize,
    /// Index of the second-closest subspace.
    pub second: usize,
}

/// Margin from a full residual vector.
pub fn margin_from_residuals(residuals: &[f64]) -> Result<PointMargin> {
    if residuals.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "margin needs at least 2 subspaces, got {}",
            residuals.len()
        )));
    }
    let mut nearest = 0;
    for (k, &r) in residuals.iter().enumerate().skip(1) {
        if r < residuals[nearest] {
            nearest = k;
        }
    }
    let mut second = usize::MAX;
    for (k, &r) in residuals.iter().enumerate() {
        if k != nearest && (second == usize::MAX || r < residuals[second]) {
            second = k;
        }
    }
    let (r1, r2) = (residuals[nearest], residuals[second]);
    let margin = if r2 == 0.0 {
        0.0
    } else {
        (1.0 - r1 / r2).clamp(0.0, 1.0)
    };
    Ok(PointMargin {
        margin,
        nearest,
        second,
    })
}

pub fn margin_of(x: &[f64], subspaces: &[Subspace]) -> Result<PointMargin> {
    let residuals = subspaces
        .iter()
        .map(|s| s.residual(x))
        .collect::<Result<Vec<f64>>>()?;
    margin_from_residuals(&residuals)
}

/// Margin, nearest and second-nearest subspace of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTable {
    pub margins: Vec<f64>,
    pub nearest: Vec<usize>,
    pub second: Vec<usize>,
}

impl MarginTable {
    pub fn compute(data: &DataMatrix, subspaces: &[Subspace]) -> Result<Self> {
        if subspaces.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "margin needs at least 2 subspaces, got {}",
                subspaces.len()
            )));
        }
        if let Some(s) = subspaces.iter().find(|s| s.ambient_dim() != data.ambient_dim()) {
            return Err(Error::DimensionMismatch {
                expected: data.ambient_dim(),
                got: s.ambient_dim(),
            });
        }
        let n = data.len();
        let mut table = MarginTable {
            margins: Vec::with_capacity(n),
            nearest: Vec::with_capacity(n),
            second: Vec::with_capacity(n),
        };
        let mut residuals = vec![0.0; subspaces.len()];
        for i in 0..n {
            let x = data.point(i);
            for (r, s) in residuals.iter_mut().zip(subspaces) {
                *r = s.residual_unchecked(x);
            }
            let m = margin_from_residuals(&residuals)?;
            table.margins.push(m.margin);
            table.nearest.push(m.nearest);
            table.second.push(m.second);
        }
        Ok(table)
    }

    /// Table from precomputed margins; nearest/second are left as 0/1.
    pub fn from_margins(margins: Vec<f64>) -> Self {
        let n = margins.len();
        MarginTable {
            margins,
            nearest: vec![0; n],
            second: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.margins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.margins.is_empty()
    }

    /// Smallest-margin index not rejected by `excluded` (lowest index on ties).
    pub fn argmin_excluding(&self, excluded: impl Fn(usize) -> bool) -> Result<usize> {
        let mut best: Option<usize> = None;
        for (i, &m) in self.margins.iter().enumerate() {
            if excluded(i) {
                continue;
            }
            if best.is_none_or(|b| m < self.margins[b]) {
                best = Some(i);
            }
        }
        best.ok_or(Error::NoCandidates)
    }

    /// Largest-margin member of `indices` (lowest index on ties).
    pub fn argmax_among(&self, indices: &[usize]) -> Result<usize> {
        let mut best: Option<usize> = None;
        for &i in indices {
            let better = match best {
                None => true,
                Some(b) => {
                    self.margins[i] > self.margins[b] || (self.margins[i] == self.margins[b] && i < b)
                }
            };
            if better {
                best = Some(i);
            }
        }
        best.ok_or(Error::NoCandidates)
    }
}

/// Non-excluded point of smallest margin.
pub fn min_margin_point(
    data: &DataMatrix,
    subspaces: &[Subspace],
    excluded: &std::collections::BTreeSet<usize>,
) -> Result<usize> {
    MarginTable::compute(data, subspaces)?.argmin_excluding(|i| excluded.contains(&i))
}

/// Member of `indices` with the largest margin.
pub fn max_margin_point(indices: &[usize], table: &MarginTable) -> Result<usize> {
    table.argmax_among(indices)
}
