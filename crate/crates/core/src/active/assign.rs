use crate::data::DataMatrix;
use crate::error::Result;
use crate::geometry::{fit_pca_indices, Subspace};
use crate::margin::{margin_from_residuals, MarginTable};
use crate::spectral::Labeling;

use super::certain::CertainSets;
use super::oracle::{Oracle, QueryLog};

/// PCA subspace of every nonempty estimated cluster, plus the margin table
/// those subspaces induce.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    subspaces: Vec<Option<Subspace>>,
    table: MarginTable,
}

impl ClusterModel {
    pub fn fit(data: &DataMatrix, labeling: &Labeling, d: usize) -> Result<Self> {
        let subspaces = labeling
            .clusters()
            .iter()
            .map(|members| {
                if members.is_empty() {
                    Ok(None)
                } else {
                    fit_pca_indices(data.points(), members, d.min(data.ambient_dim())).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let present: Vec<(usize, &Subspace)> = subspaces
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.as_ref().map(|s| (k, s)))
            .collect();
        let n = data.len();
        let table = if present.len() < 2 {
            // a single occupied cluster gives no second residual: every
            // margin is 0 and the selection rules fall back to index order
            let only = present.first().map_or(0, |p| p.0);
            MarginTable {
                margins: vec![0.0; n],
                nearest: vec![only; n],
                second: vec![only; n],
            }
        } else {
            let mut table = MarginTable {
                margins: Vec::with_capacity(n),
                nearest: Vec::with_capacity(n),
                second: Vec::with_capacity(n),
            };
            let mut residuals = vec![0.0; present.len()];
            for i in 0..n {
                let x = data.point(i);
                for (r, (_, s)) in residuals.iter_mut().zip(&present) {
                    *r = s.residual_unchecked(x);
                }
                let m = margin_from_residuals(&residuals)?;
                table.margins.push(m.margin);
                table.nearest.push(present[m.nearest].0);
                table.second.push(present[m.second].0);
            }
            table
        };
        Ok(ClusterModel { subspaces, table })
    }

    /// Subspace of estimated cluster `label`, `None` when it is empty.
    pub fn subspace(&self, label: usize) -> Option<&Subspace> {
        self.subspaces.get(label).and_then(Option::as_ref)
    }

    /// Margins over the occupied clusters; `nearest`/`second` hold labels.
    pub fn table(&self) -> &MarginTable {
        &self.table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignStatus {
    Joined(usize),
    NewSet(usize),
    /// Stopped at the hard query limit before an answer placed the point.
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignOutcome {
    pub status: AssignStatus,
    /// Queries charged during this episode.
    pub charged: usize,
}

/// Places `x_t` into a certain set by querying it against set
/// representatives, most likely must-link first.
///
/// When `hard_limit` is set and the log reaches it before the point is
/// placed, assignment stops with [`AssignStatus::BudgetExhausted`] and the
/// sets are left unchanged.
#[allow(clippy::too_many_arguments)]
pub fn assign_to_certain_set(
    x_t: usize,
    sets: &mut CertainSets,
    labeling: &Labeling,
    data: &DataMatrix,
    d: usize,
    oracle: &mut dyn Oracle,
    log: &mut QueryLog,
    hard_limit: Option<usize>,
) -> Result<AssignOutcome> {
    let model = ClusterModel::fit(data, labeling, d)?;
    assign_with_model(x_t, sets, labeling, &model, data, oracle, log, hard_limit)
}

/// Set indices in query order: ascending residual of `x_t` to the subspace
/// of each representative's estimated cluster, ties by set index.
pub(crate) fn query_order(
    x_t: usize,
    sets: &CertainSets,
    labeling: &Labeling,
    model: &ClusterModel,
    data: &DataMatrix,
) -> Result<Vec<(usize, usize)>> {
    let x = data.point(x_t);
    let mut order = Vec::with_capacity(sets.count());
    for (k, members) in sets.sets().iter().enumerate() {
        let rep = model.table().argmax_among(members)?;
        let r = model
            .subspace(labeling.label(rep))
            .map_or(f64::INFINITY, |s| s.residual_unchecked(x));
        order.push((r, k, rep));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(order.into_iter().map(|(_, k, rep)| (k, rep)).collect())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assign_with_model(
    x_t: usize,
    sets: &mut CertainSets,
    labeling: &Labeling,
    model: &ClusterModel,
    data: &DataMatrix,
    oracle: &mut dyn Oracle,
    log: &mut QueryLog,
    hard_limit: Option<usize>,
) -> Result<AssignOutcome> {
    debug_assert!(!sets.contains(x_t));
    let mut charged = 0;
    for (k, rep) in query_order(x_t, sets, labeling, model, data)? {
        if log.lookup(x_t, rep).is_none() && hard_limit.is_some_and(|h| log.count() >= h) {
            return Ok(AssignOutcome {
                status: AssignStatus::BudgetExhausted,
                charged,
            });
        }
        let (answer, was_charged) = log.ask(oracle, x_t, rep)?;
        charged += usize::from(was_charged);
        if answer.is_must_link() {
            sets.add_to(k, x_t);
            return Ok(AssignOutcome {
                status: AssignStatus::Joined(k),
                charged,
            });
        }
    }
    let k = sets.push_singleton(x_t);
    Ok(AssignOutcome {
        status: AssignStatus::NewSet(k),
        charged,
    })
}
