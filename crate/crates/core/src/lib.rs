//! Active pairwise-constrained clustering for data near a union of
//! subspaces.
//!
//! Points with the smallest subspace margin are queried against
//! representatives of certain sets; the answers are imputed into the
//! affinity matrix before re-clustering. The [`theory`] module holds the
//! Monte Carlo harness for the margin concentration results.

pub mod active;
pub mod affinity;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod margin;
pub mod rng;
pub mod spectral;
pub mod theory;

pub use active::{superpac, uos_explore, CertainSets, Oracle, OracleAnswer, QueryLog, RunTrace};
pub use affinity::Affinity;
pub use config::{ResolvedRun, RunConfig, Strategy};
pub use data::DataMatrix;
pub use error::{Error, Result};
pub use eval::misclassification_rate;
pub use geometry::Subspace;
pub use spectral::{spectral_clustering, Labeling};
