use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine;
use serde::{Deserialize, Serialize};

use superpac::active::{Phase, QueryRecord, RunTrace, TraceRecord};
use superpac::{ResolvedRun, RunConfig};

use crate::driver::{self, DriverEvent, DriverHandle};

/// One line of a session's append-only event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Created { id: String, config: RunConfig },
    Answered { query_id: u64, i: usize, j: usize, must_link: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pending {
    pub query_id: u64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reject {
    Stale,
    Done,
}

impl Reject {
    pub fn reason(&self) -> &'static str {
        match self {
            Reject::Stale => "stale",
            Reject::Done => "done",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("{0}")]
    Config(String),
    #[error("event log {path}: {reason}")]
    Log { path: PathBuf, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Session {
    id: String,
    config: RunConfig,
    run: Arc<ResolvedRun>,
    phase: Phase,
    pending: Option<Pending>,
    next_query_id: u64,
    trace: RunTrace,
    log: Vec<QueryRecord>,
    final_labels: Option<Vec<usize>>,
    n_certain_sets: usize,
    failure: Option<String>,
    driver: DriverHandle,
    log_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateView {
    pub id: String,
    pub phase: Phase,
    pub queries_used: usize,
    pub max_queries: usize,
    pub n_certain_sets: usize,
    pub current_labels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending: Option<Pending>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NextView {
    Query {
        query_id: u64,
        i: usize,
        j: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        image_i: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        image_j: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        image_meta: Option<superpac::data::ImageMeta>,
    },
    Done {
        done: bool,
        final_labels: Vec<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        failure: Option<String>,
    },
}

impl Session {
    /// Resolves the configuration, persists the creation event and runs the
    /// session up to its first query.
    pub async fn create(id: String, config: RunConfig, dir: &Path) -> Result<Session, SessionError> {
        let mut session = Self::start(id, config, dir).await?;
        session.append(&LogEvent::Created {
            id: session.id.clone(),
            config: session.config.clone(),
        })?;
        session.advance().await;
        Ok(session)
    }

    async fn start(id: String, config: RunConfig, dir: &Path) -> Result<Session, SessionError> {
        let cfg = config.clone();
        let run = tokio::task::spawn_blocking(move || cfg.resolve())
            .await
            .map_err(|e| SessionError::Config(e.to_string()))?
            .map_err(|e| SessionError::Config(e.to_string()))?;
        let run = Arc::new(run);
        let driver = driver::spawn(run.clone(), format!("session-{id}"))?;
        Ok(Session {
            log_path: dir.join(format!("{id}.jsonl")),
            id,
            config,
            run,
            phase: Phase::Exploring,
            pending: None,
            next_query_id: 0,
            trace: RunTrace::default(),
            log: Vec::new(),
            final_labels: None,
            n_certain_sets: 0,
            failure: None,
            driver,
        })
    }

    /// Rebuilds a session from its event log by replaying every recorded
    /// answer against a fresh run.
    pub async fn resume(path: &Path) -> Result<Session, SessionError> {
        let bad = |reason: String| SessionError::Log {
            path: path.to_path_buf(),
            reason,
        };
        let file = File::open(path)?;
        let mut events = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: LogEvent = serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
            events.push(e);
        }
        let mut events = events.into_iter();
        let Some(LogEvent::Created { id, config }) = events.next() else {
            return Err(bad("first event is not a creation".into()));
        };
        let dir = path.parent().unwrap_or_else(|| Path::new(""));
        let mut session = Self::start(id, config, dir).await?;
        session.advance().await;
        for e in events {
            let LogEvent::Answered { query_id, i, j, must_link } = e else {
                return Err(bad("duplicate creation event".into()));
            };
            match session.pending {
                Some(p) if p.query_id == query_id && (p.i, p.j) == (i, j) => {}
                other => {
                    return Err(bad(format!(
                        "recorded answer to query {query_id} ({i}, {j}) does not match replayed query {other:?}"
                    )))
                }
            }
            session.deliver(must_link).await;
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    fn append(&self, event: &LogEvent) -> Result<(), SessionError> {
        let mut f = OpenOptions::new().create(true).append(true).open(&self.log_path)?;
        let mut line = serde_json::to_string(event).map_err(|e| SessionError::Config(e.to_string()))?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Consumes driver events until the next query or the end of the run.
    async fn advance(&mut self) {
        while let Some(event) = self.driver.events.recv().await {
            match event {
                DriverEvent::Phase(p) => {
                    // phases only move forward
                    if rank(p) > rank(self.phase) {
                        self.phase = p;
                    }
                }
                DriverEvent::Record(r) => {
                    self.n_certain_sets = r.n_certain_sets;
                    self.trace.records.push(r);
                }
                DriverEvent::Query { i, j } => {
                    self.pending = Some(Pending {
                        query_id: self.next_query_id,
                        i,
                        j,
                    });
                    self.next_query_id += 1;
                    return;
                }
                DriverEvent::Finished(result) => {
                    self.phase = Phase::Done;
                    match result {
                        Ok(done) => {
                            debug_assert_eq!(done.log, self.log);
                            self.n_certain_sets = done.n_certain_sets;
                            self.final_labels = Some(done.labels);
                        }
                        Err(e) => self.failure = Some(e),
                    }
                    return;
                }
            }
        }
        self.phase = Phase::Done;
        self.failure.get_or_insert_with(|| "session worker stopped".into());
    }

    async fn deliver(&mut self, must_link: bool) {
        let p = self.pending.take().expect("deliver without a pending query");
        self.log.push(QueryRecord {
            i: p.i,
            j: p.j,
            must_link,
        });
        if self.driver.answers.send(must_link).is_err() {
            self.phase = Phase::Done;
            self.failure = Some("session worker stopped".into());
            return;
        }
        self.advance().await;
    }

    /// Accepts the answer to the pending query, persists it and runs the
    /// loop to the next suspension.
    pub async fn submit(&mut self, query_id: u64, must_link: bool) -> Result<Result<(), Reject>, SessionError> {
        let Some(p) = self.pending else {
            return Ok(Err(if self.phase == Phase::Done { Reject::Done } else { Reject::Stale }));
        };
        if p.query_id != query_id {
            return Ok(Err(Reject::Stale));
        }
        self.append(&LogEvent::Answered {
            query_id,
            i: p.i,
            j: p.j,
            must_link,
        })?;
        self.deliver(must_link).await;
        Ok(Ok(()))
    }

    pub fn next(&self) -> NextView {
        match self.pending {
            Some(p) => {
                let data = &self.run.data;
                let meta = data.image_meta();
                NextView::Query {
                    query_id: p.query_id,
                    i: p.i,
                    j: p.j,
                    image_i: meta.map(|_| encode_image(data.point(p.i))),
                    image_j: meta.map(|_| encode_image(data.point(p.j))),
                    image_meta: meta,
                }
            }
            None => NextView::Done {
                done: true,
                final_labels: self.current_labels(),
                failure: self.failure.clone(),
            },
        }
    }

    fn current_labels(&self) -> Vec<usize> {
        self.final_labels
            .clone()
            .or_else(|| self.trace.last().map(|r| r.labels.clone()))
            .unwrap_or_default()
    }

    pub fn state(&self) -> StateView {
        StateView {
            id: self.id.clone(),
            phase: self.phase,
            queries_used: self.log.len(),
            max_queries: self.config.max_queries,
            n_certain_sets: self.n_certain_sets,
            current_labels: self.current_labels(),
            error: self.trace.last().and_then(|r: &TraceRecord| r.error),
            pending: self.pending,
            failure: self.failure.clone(),
        }
    }

    pub fn trace_csv(&self) -> String {
        self.trace.to_csv()
    }

    pub fn query_log(&self) -> &[QueryRecord] {
        &self.log
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }
}

fn rank(p: Phase) -> u8 {
    match p {
        Phase::Exploring => 0,
        Phase::Querying => 1,
        Phase::Done => 2,
    }
}

/// Min-max scales one sample to bytes and base64-encodes it, row-major as
/// stored.
fn encode_image(x: &[f64]) -> String {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let bytes: Vec<u8> = x
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}
