//! Newline-delimited JSON event trace.
//!
//! The first line of a trace file is `{"meta": {...}}` describing the run;
//! every following line is one [`TraceRecord`]: a time stamp `t` plus the
//! fields of one [`TraceEvent`] variant, tagged by `ev`.

use crate::protocol::ProtocolKind;
use crate::wire::{DiscoveryKey, MessageKind, NodeId};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Every event, including receptions, idle drain and discards.
    #[default]
    Full,
    /// Only what the metrics and safety checks need.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub node_count: usize,
    pub source_count: usize,
    pub destination: NodeId,
    pub pause_time: f64,
    pub sim_duration: f64,
    pub energy_threshold: f64,
    pub max_range: f64,
    pub trace_level: TraceLevel,
    pub initial_energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case")]
pub enum TraceEvent {
    Tx {
        node: NodeId,
        msg: MessageKind,
        bytes: u32,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        dst: Option<NodeId>,
        /// Residual energy just before the transmission was debited.
        energy: f64,
        cost: f64,
        tx: u64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        key: Option<DiscoveryKey>,
    },
    Rx {
        node: NodeId,
        from: NodeId,
        msg: MessageKind,
        bytes: u32,
        cost: f64,
        rssi: f64,
        tx: u64,
    },
    Drop {
        node: NodeId,
        msg: MessageKind,
        reason: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        tx: Option<u64>,
        /// Energy spent on a send the battery could not finish.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        cost: Option<f64>,
    },
    Idle {
        node: NodeId,
        cost: f64,
    },
    Death {
        node: NodeId,
    },
    Mobility,
    DiscoveryStart {
        node: NodeId,
        key: DiscoveryKey,
    },
    DiscoveryEnd {
        node: NodeId,
        key: DiscoveryKey,
        ok: bool,
    },
    /// Forward chain from a source to its destination when a reply lands.
    Route {
        node: NodeId,
        key: DiscoveryKey,
        path: Vec<NodeId>,
        complete: bool,
        max_hop_m: f64,
    },
    ContentionSet {
        node: NodeId,
        key: DiscoveryKey,
        metric: f64,
        gd: f64,
        vrl: f64,
        fire_at: f64,
        /// Transmission that triggered the candidacy.
        tx: u64,
        from: NodeId,
    },
    ContentionCancel {
        node: NodeId,
        key: DiscoveryKey,
    },
    ContentionFire {
        node: NodeId,
        key: DiscoveryKey,
    },
    Discard {
        node: NodeId,
        msg: MessageKind,
        reason: String,
    },
    RouteInvalidated {
        node: NodeId,
        dest: NodeId,
        via: NodeId,
    },
    ZoomOut {
        node: NodeId,
        cause: String,
    },
    Delivered {
        node: NodeId,
        source: NodeId,
        seq: u32,
        latency: f64,
    },
    Anomaly {
        node: NodeId,
        reason: String,
    },
    End {
        residual: Vec<f64>,
    },
}

impl TraceEvent {
    /// Whether a summary-level trace keeps this event.
    pub fn in_summary(&self) -> bool {
        !matches!(
            self,
            TraceEvent::Rx { .. }
                | TraceEvent::Idle { .. }
                | TraceEvent::Mobility
                | TraceEvent::Discard { .. }
                | TraceEvent::Drop { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaLine {
    meta: RunMeta,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o: {0}")]
    Io(#[from] io::Error),
    #[error("trace line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("trace is empty or lacks its meta header")]
    MissingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: RunMeta,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn write_to<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut w = BufWriter::new(w);
        serde_json::to_writer(&mut w, &MetaLine { meta: self.meta.clone() })
            .map_err(|e| TraceError::Parse { line: 1, source: e })?;
        w.write_all(b"\n")?;
        for (i, r) in self.records.iter().enumerate() {
            serde_json::to_writer(&mut w, r).map_err(|e| TraceError::Parse { line: i + 2, source: e })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_ndjson(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("serializing to memory cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.write_to(File::create(path)?)
    }

    pub fn read_from<R: io::Read>(r: R) -> Result<Trace, TraceError> {
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().ok_or(TraceError::MissingMeta)??;
        let meta: MetaLine = serde_json::from_str(&first).map_err(|e| TraceError::Parse { line: 1, source: e })?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| TraceError::Parse { line: i + 2, source: e })?;
            records.push(rec);
        }
        Ok(Trace { meta: meta.meta, records })
    }

    pub fn load(path: &Path) -> Result<Trace, TraceError> {
        Self::read_from(File::open(path)?)
    }
}
