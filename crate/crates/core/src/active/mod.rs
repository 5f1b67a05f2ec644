//! Active querying: certain sets, the oracle abstraction, the UoS explore
//! phase, the SUPERPAC loop with optional cost smoothing, and the
//! random-pair baseline.

mod assign;
mod certain;
mod explore;
mod oracle;
mod superpac;
mod trace;

pub use assign::{assign_to_certain_set, AssignOutcome, AssignStatus, ClusterModel};
pub use certain::CertainSets;
pub use explore::{explore_from_labels, uos_explore};
pub use oracle::{Oracle, OracleAnswer, QueryLog, QueryRecord, ReplayOracle, TruthOracle};
pub use superpac::{
    random_baseline, random_baseline_observed, superpac, superpac_observed, ActiveRun, NoopObserver, Phase, RunObserver,
    SuperpacOptions,
};
pub use trace::{ksubspaces_cost, smoothing_accept, RunTrace, TraceRecord};
