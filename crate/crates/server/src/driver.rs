//! The worker thread that runs one active-clustering session. The thread
//! blocks inside the oracle until the HTTP side delivers an answer.

use std::sync::mpsc as std_mpsc;
use std::sync::Arc;

use tokio::sync::mpsc;

use superpac::active::{OracleAnswer, Phase, QueryRecord, RunObserver, TraceRecord};
use superpac::{Error, Oracle, ResolvedRun};

#[derive(Debug)]
pub(crate) enum DriverEvent {
    Phase(Phase),
    Record(TraceRecord),
    Query { i: usize, j: usize },
    Finished(Result<Finished, String>),
}

#[derive(Debug)]
pub(crate) struct Finished {
    pub labels: Vec<usize>,
    pub log: Vec<QueryRecord>,
    pub n_certain_sets: usize,
}

struct ChannelOracle {
    events: mpsc::UnboundedSender<DriverEvent>,
    answers: std_mpsc::Receiver<bool>,
}

impl Oracle for ChannelOracle {
    fn answer(&mut self, i: usize, j: usize) -> superpac::Result<OracleAnswer> {
        self.events
            .send(DriverEvent::Query { i, j })
            .map_err(|_| Error::Oracle("session closed".into()))?;
        let must_link = self
            .answers
            .recv()
            .map_err(|_| Error::Oracle("session closed".into()))?;
        Ok(OracleAnswer::from_bool(must_link))
    }
}

struct ChannelObserver(mpsc::UnboundedSender<DriverEvent>);

impl RunObserver for ChannelObserver {
    fn phase(&mut self, phase: Phase) {
        let _ = self.0.send(DriverEvent::Phase(phase));
    }

    fn record(&mut self, record: &TraceRecord) {
        let _ = self.0.send(DriverEvent::Record(record.clone()));
    }
}

pub(crate) struct DriverHandle {
    pub answers: std_mpsc::Sender<bool>,
    pub events: mpsc::UnboundedReceiver<DriverEvent>,
}

pub(crate) fn spawn(run: Arc<ResolvedRun>, name: String) -> std::io::Result<DriverHandle> {
    let (event_tx, event_rx) = mpsc::unbounded_channel();
    let (answer_tx, answer_rx) = std_mpsc::channel();
    std::thread::Builder::new().name(name).spawn(move || {
        let mut oracle = ChannelOracle {
            events: event_tx.clone(),
            answers: answer_rx,
        };
        let mut observer = ChannelObserver(event_tx.clone());
        let result = run
            .run(&mut oracle, &mut observer)
            .map(|r| Finished {
                labels: r.labeling.labels().to_vec(),
                log: r.log.records().to_vec(),
                n_certain_sets: r.sets.count(),
            })
            .map_err(|e| e.to_string());
        let _ = event_tx.send(DriverEvent::Finished(result));
    })?;
    Ok(DriverHandle {
        answers: answer_tx,
        events: event_rx,
    })
}
