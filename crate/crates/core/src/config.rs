//! Run configuration shared by the command line and the session server,
//! and the driver that turns a configuration into an active run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::active::{
    random_baseline_observed, superpac_observed, ActiveRun, Oracle, ReplayOracle, RunObserver,
    SuperpacOptions, TruthOracle,
};
use crate::affinity::{build_tsc, default_tsc_q, Affinity};
use crate::data::{generate_uos, preset, DataMatrix, DatasetManifest, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{misclassification_from_labels, EvalReport};
use crate::spectral::SpectralConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Superpac,
    SuperpacS,
    Random,
    ExploreOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Superpac,
        Strategy::SuperpacS,
        Strategy::Random,
        Strategy::ExploreOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Superpac => "superpac",
            Strategy::SuperpacS => "superpac-s",
            Strategy::Random => "random",
            Strategy::ExploreOnly => "explore-only",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy '{s}'; expected one of superpac, superpac-s, random, explore-only"
                ))
            })
    }
}

/// `"tsc"` or a path to a CSV / binary affinity file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum AffinitySource {
    #[default]
    Tsc,
    File(PathBuf),
}

impl From<String> for AffinitySource {
    fn from(s: String) -> Self {
        if s == "tsc" {
            AffinitySource::Tsc
        } else {
            AffinitySource::File(PathBuf::from(s))
        }
    }
}

impl From<AffinitySource> for String {
    fn from(a: AffinitySource) -> String {
        match a {
            AffinitySource::Tsc => "tsc".into(),
            AffinitySource::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSource {
    /// Answers from the dataset's truth labels.
    #[default]
    Simulated,
    /// Answers from a recorded query log.
    Replay(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    /// Named preset supplying K and d (and the dataset, for synthetic presets).
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub affinity: AffinitySource,
    /// Neighbors kept per point by the built-in affinity.
    #[serde(default)]
    pub tsc_q: Option<usize>,
    #[serde(default)]
    pub max_queries: usize,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub oracle: OracleSource,
}

impl RunConfig {
    /// Reads a JSON config; relative paths inside are resolved against the
    /// file's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        if let Some(DatasetSource::Manifest(p)) = &mut self.dataset {
            *p = base.join(&*p);
        }
        if let AffinitySource::File(p) = &mut self.affinity {
            *p = base.join(&*p);
        }
        if let OracleSource::Replay(p) = &mut self.oracle {
            *p = base.join(&*p);
        }
        if let Some(out) = &mut self.out {
            *out = base.join(&*out);
        }
    }

    /// Loads the data and affinity and fills in K and d.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let preset = self.preset.as_deref().map(preset).transpose()?;
        let dataset = match (&self.dataset, &preset) {
            (Some(d), _) => d.clone(),
            (None, Some(p)) => match p.synthetic_spec(self.seed) {
                Some(spec) => DatasetSource::Synthetic(spec),
                None => {
                    return Err(Error::Config(format!(
                        "preset '{}' has no bundled data; give a dataset manifest",
                        p.name
                    )))
                }
            },
            (None, None) => return Err(Error::Config("no dataset or preset given".into())),
        };
        let (data, spec) = match &dataset {
            DatasetSource::Manifest(p) => (DatasetManifest::read(p)?.load()?, None),
            DatasetSource::Synthetic(spec) => {
                spec.validate().map_err(|e| Error::Config(e.to_string()))?;
                (generate_uos(spec)?, Some(spec))
            }
        };
        let k = self
            .k
            .or(spec.map(|s| s.k))
            .or(preset.as_ref().map(|p| p.k()))
            .or_else(|| data.truth().map(|t| t.iter().max().map_or(0, |m| m + 1)))
            .ok_or_else(|| Error::Config("number of clusters K not given".into()))?;
        let d = self
            .d
            .or(spec.map(|s| s.d))
            .or(preset.as_ref().map(|p| p.d()))
            .ok_or_else(|| Error::Config("subspace dimension d not given".into()))?;
        if k < 2 || k > data.len() {
            return Err(Error::Config(format!("K = {k} must lie in [2, N = {}]", data.len())));
        }
        if d == 0 {
            return Err(Error::Config("d must be positive".into()));
        }
        let raw = match &self.affinity {
            AffinitySource::Tsc => {
                let q = self.tsc_q.unwrap_or_else(|| default_tsc_q(data.len(), k));
                build_tsc(&data, q)?
            }
            AffinitySource::File(p) => Affinity::load(p)?,
        };
        if raw.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                got: raw.len(),
            });
        }
        if self.strategy == Strategy::Random {
            let pairs = data.len() * (data.len() - 1) / 2;
            if self.max_queries > pairs {
                return Err(Error::Config(format!(
                    "budget {} exceeds the {pairs} available pairs",
                    self.max_queries
                )));
            }
        }
        Ok(ResolvedRun {
            config: self.clone(),
            data,
            k,
            d,
            affinity: raw.normalize_max2()?,
        })
    }
}

/// A configuration with its data loaded and parameters filled in.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub data: DataMatrix,
    pub k: usize,
    pub d: usize,
    /// Affinity scaled to a maximum of 2.
    pub affinity: Affinity,
}

impl ResolvedRun {
    /// The oracle named by the configuration.
    pub fn oracle(&self) -> Result<Box<dyn Oracle + Send>> {
        match &self.config.oracle {
            OracleSource::Simulated => {
                let truth = self
                    .data
                    .truth()
                    .ok_or_else(|| Error::Config("simulated oracle requires truth labels".into()))?;
                Ok(Box::new(TruthOracle::new(truth.to_vec())))
            }
            OracleSource::Replay(p) => Ok(Box::new(ReplayOracle::from_jsonl(p)?)),
        }
    }

    pub fn run(&self, oracle: &mut dyn Oracle, observer: &mut dyn RunObserver) -> Result<ActiveRun> {
        let c = &self.config;
        let spectral = SpectralConfig::default();
        match c.strategy {
            Strategy::Random => random_baseline_observed(
                &self.data,
                self.k,
                self.d,
                &self.affinity,
                c.max_queries,
                oracle,
                c.seed,
                &spectral,
                observer,
            ),
            s => {
                let options = SuperpacOptions {
                    smoothing: s == Strategy::SuperpacS,
                    explore_only: s == Strategy::ExploreOnly,
                    ..SuperpacOptions::default()
                };
                superpac_observed(
                    &self.data,
                    self.k,
                    self.d,
                    &self.affinity,
                    c.max_queries,
                    oracle,
                    c.seed,
                    &options,
                    observer,
                )
            }
        }
    }

    pub fn report(&self, run: &ActiveRun) -> Result<RunReport> {
        let eval = match self.data.truth() {
            Some(t) => {
                let k_true = t.iter().max().map_or(0, |m| m + 1);
                Some(misclassification_from_labels(run.labeling.labels(), run.labeling.k(), t, k_true)?)
            }
            None => None,
        };
        Ok(RunReport {
            dataset: self.data.name().to_string(),
            strategy: self.config.strategy,
            seed: self.config.seed,
            n: self.data.len(),
            k: self.k,
            d: self.d,
            max_queries: self.config.max_queries,
            queries_used: run.log.count(),
            n_certain_sets: run.sets.count(),
            final_error: eval.as_ref().map(EvalReport::rate),
            final_cost: run.trace.last().map_or(0.0, |r| r.cost),
            eval,
        })
    }

    /// Writes `trace.csv`, `final_labels.csv`, `report.json` and
    /// `query_log.jsonl` into `dir`.
    pub fn write_outputs(&self, run: &ActiveRun, dir: impl AsRef<Path>) -> Result<RunReport> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        run.trace.write_csv(dir.join("trace.csv"))?;
        crate::data::save_labels(dir.join("final_labels.csv"), run.labeling.labels())?;
        run.log.write_jsonl(dir.join("query_log.jsonl"))?;
        let report = self.report(run)?;
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub max_queries: usize,
    pub queries_used: usize,
    pub n_certain_sets: usize,
    pub final_error: Option<f64>,
    pub final_cost: f64,
    pub eval: Option<EvalReport>,
}
