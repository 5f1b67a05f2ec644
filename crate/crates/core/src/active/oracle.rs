use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Human answer to "are points `i` and `j` in the same cluster?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleAnswer {
    MustLink,
    CannotLink,
}

impl OracleAnswer {
    pub fn from_bool(must_link: bool) -> Self {
        if must_link {
            OracleAnswer::MustLink
        } else {
            OracleAnswer::CannotLink
        }
    }

    pub fn is_must_link(self) -> bool {
        self == OracleAnswer::MustLink
    }
}

/// Source of pairwise answers. Every call is one charged query; callers go
/// through [`QueryLog::ask`] so repeated pairs are answered from memory.
pub trait Oracle {
    fn answer(&mut self, i: usize, j: usize) -> Result<OracleAnswer>;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn answer(&mut self, i: usize, j: usize) -> Result<OracleAnswer> {
        (**self).answer(i, j)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn answer(&mut self, i: usize, j: usize) -> Result<OracleAnswer> {
        (**self).answer(i, j)
    }
}

/// Answers from ground-truth labels.
#[derive(Debug, Clone)]
pub struct TruthOracle {
    truth: Vec<usize>,
}

impl TruthOracle {
    pub fn new(truth: Vec<usize>) -> Self {
        TruthOracle { truth }
    }
}

impl Oracle for TruthOracle {
    fn answer(&mut self, i: usize, j: usize) -> Result<OracleAnswer> {
        let n = self.truth.len();
        if i >= n || j >= n {
            return Err(Error::Oracle(format!("pair ({i}, {j}) out of range for {n} points")));
        }
        Ok(OracleAnswer::from_bool(self.truth[i] == self.truth[j]))
    }
}

/// Answers recorded in an earlier query log. Asking an unrecorded pair is
/// an error.
#[derive(Debug, Clone, Default)]
pub struct ReplayOracle {
    answers: HashMap<(usize, usize), bool>,
}

impl ReplayOracle {
    pub fn from_records(records: &[QueryRecord]) -> Self {
        ReplayOracle {
            answers: records.iter().map(|r| (key(r.i, r.j), r.must_link)).collect(),
        }
    }

    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_records(&QueryLog::read_jsonl(path)?.records))
    }
}

impl Oracle for ReplayOracle {
    fn answer(&mut self, i: usize, j: usize) -> Result<OracleAnswer> {
        self.answers
            .get(&key(i, j))
            .map(|&b| OracleAnswer::from_bool(b))
            .ok_or_else(|| Error::Oracle(format!("no recorded answer for pair ({i}, {j})")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub i: usize,
    pub j: usize,
    pub must_link: bool,
}

fn key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// Charged queries in the order they were asked, memoized by unordered pair.
#[derive(Debug, Clone, Default)]
pub struct QueryLog {
    records: Vec<QueryRecord>,
    index: HashMap<(usize, usize), bool>,
}

impl QueryLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of charged queries.
    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn lookup(&self, i: usize, j: usize) -> Option<OracleAnswer> {
        self.index.get(&key(i, j)).map(|&b| OracleAnswer::from_bool(b))
    }

    /// Returns the answer for `(i, j)`, asking the oracle only when the pair
    /// is new. The flag reports whether a query was charged.
    pub fn ask(&mut self, oracle: &mut dyn Oracle, i: usize, j: usize) -> Result<(OracleAnswer, bool)> {
        if i == j {
            return Err(Error::InvalidArgument(format!("cannot query point {i} against itself")));
        }
        if let Some(a) = self.lookup(i, j) {
            return Ok((a, false));
        }
        let a = oracle.answer(i, j)?;
        self.push(QueryRecord {
            i,
            j,
            must_link: a.is_must_link(),
        })?;
        Ok((a, true))
    }

    fn push(&mut self, r: QueryRecord) -> Result<()> {
        if self.index.insert(key(r.i, r.j), r.must_link).is_some() {
            return Err(Error::InvalidArgument(format!("pair ({}, {}) logged twice", r.i, r.j)));
        }
        self.records.push(r);
        Ok(())
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut log = QueryLog::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: QueryRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                reason: e.to_string(),
            })?;
            log.push(r).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(log)
    }
}
