use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint groups of points: must-linked within a group, cannot-linked
/// across groups.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertainSets {
    sets: Vec<Vec<usize>>,
}

impl CertainSets {
    /// Validates disjointness and nonemptiness.
    pub fn from_sets(sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &sets {
            if s.is_empty() {
                return Err(Error::InvalidArgument("certain sets must be nonempty".into()));
            }
            for &p in s {
                if !seen.insert(p) {
                    return Err(Error::OverlappingSets { index: p });
                }
            }
        }
        Ok(CertainSets { sets })
    }

    #[cfg(test)]
    pub(crate) fn from_sets_unchecked(sets: Vec<Vec<usize>>) -> Self {
        CertainSets { sets }
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Number of sets `n_c`.
    pub fn count(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn owner(&self, point: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&point))
    }

    pub fn contains(&self, point: usize) -> bool {
        self.owner(point).is_some()
    }

    /// Membership mask over `n` points.
    pub fn members_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &p in self.sets.iter().flatten() {
            if p < n {
                mask[p] = true;
            }
        }
        mask
    }

    pub fn total_members(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub(crate) fn push_singleton(&mut self, point: usize) -> usize {
        self.sets.push(vec![point]);
        self.sets.len() - 1
    }

    pub(crate) fn add_to(&mut self, set: usize, point: usize) {
        self.sets[set].push(point);
    }

    /// Pairs that contradict `truth`: same set but different labels, or
    /// different sets but the same label.
    pub fn violations(&self, truth: &[usize]) -> usize {
        let mut bad = 0;
        for (a, sa) in self.sets.iter().enumerate() {
            for (x, &p) in sa.iter().enumerate() {
                for &q in &sa[x + 1..] {
                    bad += usize::from(truth[p] != truth[q]);
                }
                for sb in &self.sets[a + 1..] {
                    for &q in sb {
                        bad += usize::from(truth[p] == truth[q]);
                    }
                }
            }
        }
        bad
    }
}
