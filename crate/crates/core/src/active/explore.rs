use std::collections::BTreeSet;

use rand::Rng;

use crate::affinity::Affinity;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::spectral::{spectral_clustering, Labeling};

use super::assign::{assign_with_model, ClusterModel};
use super::certain::CertainSets;
use super::oracle::{Oracle, QueryLog};

/// Clusters `affinity` and grows one certain set per cluster, spending at
/// most `max_queries` (plus the overshoot of a final episode).
#[allow(clippy::too_many_arguments)]
pub fn uos_explore(
    data: &DataMatrix,
    k: usize,
    d: usize,
    affinity: &Affinity,
    max_queries: usize,
    oracle: &mut dyn Oracle,
    seed: u64,
) -> Result<(CertainSets, QueryLog)> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("explore needs K >= 2, got {k}")));
    }
    let labeling = spectral_clustering(affinity, k, seed)?;
    let mut log = QueryLog::new();
    let sets = explore_from_labels(data, &labeling, k, d, max_queries, oracle, &mut log, seed)?;
    Ok((sets, log))
}

/// Explore phase on a fixed estimated labeling.
#[allow(clippy::too_many_arguments)]
pub fn explore_from_labels(
    data: &DataMatrix,
    labeling: &Labeling,
    k: usize,
    d: usize,
    max_queries: usize,
    oracle: &mut dyn Oracle,
    log: &mut QueryLog,
    seed: u64,
) -> Result<CertainSets> {
    let n = data.len();
    if labeling.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labeling.len(),
        });
    }
    let mut sets = CertainSets::default();
    if n == 0 {
        return Ok(sets);
    }
    let model = ClusterModel::fit(data, labeling, d)?;
    let table = model.table();
    let all: Vec<usize> = (0..n).collect();
    sets.push_singleton(table.argmax_among(&all)?);
    let mut rng = seeded(seed);
    while sets.count() < k && log.count() < max_queries {
        let covered: BTreeSet<usize> = sets.sets().iter().flatten().map(|&p| labeling.label(p)).collect();
        let mask = sets.members_mask(n);
        let fresh: Vec<usize> = (0..n)
            .filter(|&i| !mask[i] && !covered.contains(&labeling.label(i)))
            .collect();
        let x_t = if fresh.is_empty() {
            let free: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
            if free.is_empty() {
                break;
            }
            free[rng.random_range(0..free.len())]
        } else {
            table.argmax_among(&fresh)?
        };
        assign_with_model(x_t, &mut sets, labeling, &model, data, oracle, log, None)?;
    }
    Ok(sets)
}
