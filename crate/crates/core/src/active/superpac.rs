use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::affinity::Affinity;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::spectral::{spectral_clustering_with, Labeling, SpectralConfig};

use super::assign::{assign_with_model, ClusterModel};
use super::certain::CertainSets;
use super::explore::explore_from_labels;
use super::oracle::{Oracle, QueryLog};
use super::trace::{ksubspaces_cost, record, RunTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Exploring,
    Querying,
    Done,
}

/// Progress callbacks for drivers that surface a run incrementally.
pub trait RunObserver {
    fn phase(&mut self, _phase: Phase) {}
    fn record(&mut self, _record: &TraceRecord) {}
}

pub struct NoopObserver;

impl RunObserver for NoopObserver {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpacOptions {
    /// Reject re-clusterings that do not lower the K-subspaces cost.
    pub smoothing: bool,
    /// Explore budget; `None` means `min(2K, max_queries)`.
    pub explore_budget: Option<usize>,
    /// Stop after the explore phase (one imputed re-clustering).
    pub explore_only: bool,
    pub spectral: SpectralConfig,
}

impl Default for SuperpacOptions {
    fn default() -> Self {
        SuperpacOptions {
            smoothing: false,
            explore_budget: None,
            explore_only: false,
            spectral: SpectralConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActiveRun {
    pub trace: RunTrace,
    pub log: QueryLog,
    pub sets: CertainSets,
    pub labeling: Labeling,
}

#[allow(clippy::too_many_arguments)]
pub fn superpac(
    data: &DataMatrix,
    k: usize,
    d: usize,
    affinity: &Affinity,
    max_queries: usize,
    oracle: &mut dyn Oracle,
    seed: u64,
    options: &SuperpacOptions,
) -> Result<ActiveRun> {
    superpac_observed(data, k, d, affinity, max_queries, oracle, seed, options, &mut NoopObserver)
}

#[allow(clippy::too_many_arguments)]
pub fn superpac_observed(
    data: &DataMatrix,
    k: usize,
    d: usize,
    affinity: &Affinity,
    max_queries: usize,
    oracle: &mut dyn Oracle,
    seed: u64,
    options: &SuperpacOptions,
    observer: &mut dyn RunObserver,
) -> Result<ActiveRun> {
    check_inputs(data, k, affinity)?;
    let cluster = |a: &Affinity| spectral_clustering_with(a, k, seed, &options.spectral);
    let mut labeling = cluster(affinity)?;
    let mut cost = ksubspaces_cost(data, &labeling, d)?;
    let mut trace = RunTrace::default();
    let push = |trace: &mut RunTrace, r: TraceRecord, obs: &mut dyn RunObserver| {
        obs.record(&r);
        trace.records.push(r);
    };
    push(&mut trace, record(data, &labeling, cost, 0, 0)?, observer);

    let mut log = QueryLog::new();
    let mut sets = CertainSets::default();
    if max_queries > 0 {
        observer.phase(Phase::Exploring);
        let budget = if options.explore_only {
            max_queries
        } else {
            options.explore_budget.unwrap_or(2 * k).min(max_queries)
        };
        sets = explore_from_labels(data, &labeling, k, d, budget, oracle, &mut log, seed)?;
        if options.explore_only {
            let imputed = affinity.impute(&sets)?;
            labeling = cluster(&imputed)?;
            cost = ksubspaces_cost(data, &labeling, d)?;
        }
        push(&mut trace, record(data, &labeling, cost, log.count(), sets.count())?, observer);
    }

    if !options.explore_only && log.count() < max_queries {
        observer.phase(Phase::Querying);
        let mut working = affinity.clone();
        while log.count() < max_queries {
            let model = ClusterModel::fit(data, &labeling, d)?;
            let mask = sets.members_mask(data.len());
            let x_t = match model.table().argmin_excluding(|i| mask[i]) {
                Ok(x) => x,
                Err(Error::NoCandidates) => break,
                Err(e) => return Err(e),
            };
            assign_with_model(x_t, &mut sets, &labeling, &model, data, oracle, &mut log, None)?;
            working.impute_in_place(&sets)?;
            let candidate = cluster(&working)?;
            if options.smoothing {
                (labeling, cost) = super::trace::smoothing_accept(labeling, cost, candidate, data, d)?;
            } else {
                cost = ksubspaces_cost(data, &candidate, d)?;
                labeling = candidate;
            }
            push(&mut trace, record(data, &labeling, cost, log.count(), sets.count())?, observer);
        }
    }
    observer.phase(Phase::Done);
    Ok(ActiveRun {
        trace,
        log,
        sets,
        labeling,
    })
}

/// Queries uniformly random unqueried pairs, imputing each answer and
/// re-clustering once per query.
#[allow(clippy::too_many_arguments)]
pub fn random_baseline(
    data: &DataMatrix,
    k: usize,
    d: usize,
    affinity: &Affinity,
    max_queries: usize,
    oracle: &mut dyn Oracle,
    seed: u64,
    spectral: &SpectralConfig,
) -> Result<ActiveRun> {
    random_baseline_observed(data, k, d, affinity, max_queries, oracle, seed, spectral, &mut NoopObserver)
}

#[allow(clippy::too_many_arguments)]
pub fn random_baseline_observed(
    data: &DataMatrix,
    k: usize,
    d: usize,
    affinity: &Affinity,
    max_queries: usize,
    oracle: &mut dyn Oracle,
    seed: u64,
    spectral: &SpectralConfig,
    observer: &mut dyn RunObserver,
) -> Result<ActiveRun> {
    check_inputs(data, k, affinity)?;
    let n = data.len();
    let pairs = n * n.saturating_sub(1) / 2;
    if max_queries > pairs {
        return Err(Error::InvalidArgument(format!(
            "budget {max_queries} exceeds the {pairs} available pairs"
        )));
    }
    let mut labeling = spectral_clustering_with(affinity, k, seed, spectral)?;
    let mut trace = RunTrace::default();
    let first = record(data, &labeling, ksubspaces_cost(data, &labeling, d)?, 0, 0)?;
    observer.record(&first);
    trace.records.push(first);
    if max_queries > 0 {
        observer.phase(Phase::Querying);
    }
    let mut rng = seeded(seed);
    let mut working = affinity.clone();
    let mut log = QueryLog::new();
    for p in sample(&mut rng, pairs, max_queries) {
        let (i, j) = pair_from_index(n, p);
        let (answer, _) = log.ask(oracle, i, j)?;
        working.impute_pair(i, j, answer.is_must_link());
        labeling = spectral_clustering_with(&working, k, seed, spectral)?;
        let cost = ksubspaces_cost(data, &labeling, d)?;
        let r = record(data, &labeling, cost, log.count(), 0)?;
        observer.record(&r);
        trace.records.push(r);
    }
    observer.phase(Phase::Done);
    Ok(ActiveRun {
        trace,
        log,
        sets: CertainSets::default(),
        labeling,
    })
}

/// Maps `0..n(n-1)/2` onto pairs `i < j` in row-major order.
pub(crate) fn pair_from_index(n: usize, mut p: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if p < row {
            return (i, i + 1 + p);
        }
        p -= row;
        i += 1;
    }
}

fn check_inputs(data: &DataMatrix, k: usize, affinity: &Affinity) -> Result<()> {
    if affinity.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: affinity.len(),
        });
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("K must be at least 2, got {k}")));
    }
    Ok(())
}
