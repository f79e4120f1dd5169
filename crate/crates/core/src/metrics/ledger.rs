use crate::engine::{Trace, TraceEvent};
use crate::protocol::ProtocolKind;
use crate::wire::{DiscoveryKey, MessageKind, NodeId};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscoveryRecord {
    pub source: NodeId,
    pub key: DiscoveryKey,
    pub start: f64,
    pub end: Option<f64>,
    pub success: bool,
    /// Request and reply transmissions carrying this discovery's key.
    pub messages: u64,
}

impl DiscoveryRecord {
    pub fn duration(&self) -> Option<f64> {
        self.end.map(|e| e - self.start)
    }
}

/// Per-run accumulators. Every field is recomputable from the trace alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricLedger {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub sim_duration: f64,
    pub control_counts: BTreeMap<MessageKind, u64>,
    pub control_bytes: u64,
    pub data_tx: u64,
    pub first_death: Option<f64>,
    pub deaths: u64,
    pub discoveries: Vec<DiscoveryRecord>,
    pub delivered: u64,
    /// Transmissions sent while the sender sat below the energy threshold.
    pub gate_violations: u64,
}

impl MetricLedger {
    pub fn from_trace(trace: &Trace) -> Self {
        let meta = &trace.meta;
        let mut ledger = MetricLedger {
            protocol: meta.protocol,
            seed: meta.seed,
            sim_duration: meta.sim_duration,
            control_counts: MessageKind::CONTROL.iter().map(|&k| (k, 0)).collect(),
            control_bytes: 0,
            data_tx: 0,
            first_death: None,
            deaths: 0,
            discoveries: Vec::new(),
            delivered: 0,
            gate_violations: 0,
        };
        let mut open: BTreeMap<DiscoveryKey, usize> = BTreeMap::new();
        let mut per_key: BTreeMap<DiscoveryKey, u64> = BTreeMap::new();
        for r in &trace.records {
            match &r.event {
                TraceEvent::Tx { msg, bytes, energy, key, .. } => {
                    if *energy < meta.energy_threshold {
                        ledger.gate_violations += 1;
                    }
                    if msg.is_control() {
                        *ledger.control_counts.entry(*msg).or_default() += 1;
                        ledger.control_bytes += u64::from(*bytes);
                    } else {
                        ledger.data_tx += 1;
                    }
                    if let (true, Some(k)) = (msg.is_discovery(), key) {
                        *per_key.entry(*k).or_default() += 1;
                    }
                }
                TraceEvent::Death { .. } => {
                    ledger.deaths += 1;
                    ledger.first_death.get_or_insert(r.t);
                }
                TraceEvent::DiscoveryStart { node, key } => {
                    open.insert(*key, ledger.discoveries.len());
                    ledger.discoveries.push(DiscoveryRecord {
                        source: *node,
                        key: *key,
                        start: r.t,
                        end: None,
                        success: false,
                        messages: 0,
                    });
                }
                TraceEvent::DiscoveryEnd { key, ok, .. } => {
                    if let Some(i) = open.remove(key) {
                        ledger.discoveries[i].end = Some(r.t);
                        ledger.discoveries[i].success = *ok;
                    }
                }
                TraceEvent::Delivered { .. } => ledger.delivered += 1,
                _ => {}
            }
        }
        for d in &mut ledger.discoveries {
            d.messages = per_key.get(&d.key).copied().unwrap_or(0);
        }
        ledger
    }

    pub fn count(&self, kind: MessageKind) -> u64 {
        self.control_counts.get(&kind).copied().unwrap_or(0)
    }

    /// All control transmissions, periodic HELLOs included.
    pub fn control_overhead(&self) -> u64 {
        self.control_counts.values().sum()
    }

    /// Control transmissions other than periodic HELLOs: discovery,
    /// zoom-out beacons and error reports.
    pub fn routing_overhead(&self) -> u64 {
        self.control_overhead() - self.count(MessageKind::Hello)
    }

    pub fn zoom_out_count(&self) -> u64 {
        self.count(MessageKind::ZoomOut)
    }

    /// Time of the first battery death, or the run length when nobody died.
    pub fn network_lifetime(&self) -> f64 {
        self.first_death.unwrap_or(self.sim_duration)
    }

    /// Discovery messages per second of discovery time, over successful
    /// discoveries only. `None` when no discovery succeeded.
    pub fn search_success_rate(&self) -> Option<f64> {
        let (msgs, secs) = self
            .discoveries
            .iter()
            .filter(|d| d.success)
            .fold((0u64, 0.0), |(m, s), d| (m + d.messages, s + d.duration().unwrap_or(0.0)));
        let ok = self.discoveries.iter().any(|d| d.success);
        (ok && secs > 0.0).then(|| msgs as f64 / secs)
    }

    pub fn successful_discoveries(&self) -> usize {
        self.discoveries.iter().filter(|d| d.success).count()
    }

    pub fn failed_discoveries(&self) -> usize {
        self.discoveries.iter().filter(|d| d.end.is_some() && !d.success).count()
    }

    /// Mean time from starting a discovery to receiving its reply.
    pub fn discovery_latency(&self) -> Option<f64> {
        let ok: Vec<f64> = self.discoveries.iter().filter(|d| d.success).filter_map(|d| d.duration()).collect();
        (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
    }

    /// Mean request/reply transmissions per successful discovery.
    pub fn discovery_messages(&self) -> Option<f64> {
        let ok: Vec<u64> = self.discoveries.iter().filter(|d| d.success).map(|d| d.messages).collect();
        (!ok.is_empty()).then(|| ok.iter().sum::<u64>() as f64 / ok.len() as f64)
    }
}
