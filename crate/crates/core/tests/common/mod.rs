#![allow(dead_code)]

use rlpr_sim::config::ScenarioConfig;
use rlpr_sim::engine::{Trace, TraceEvent, TraceLevel};
use rlpr_sim::protocol::ProtocolKind;
use rlpr_sim::scenario::{Layout, ScriptedLayout, ScriptedNode};
use rlpr_sim::sweep::run_once;
use rlpr_sim::wire::{MessageKind, NodeId};

/// Config for a short scripted run: one packet from each source at
/// `start` plus a few milliseconds, full trace.
pub fn scripted_config(protocol: ProtocolKind, start: f64, duration: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.protocol = protocol;
    c.traffic_start = start;
    c.cbr_rate = 100.0;
    c.packets_per_source = 1;
    c.sim_duration = duration;
    c.trace_level = TraceLevel::Full;
    c
}

pub fn layout(nodes: Vec<ScriptedNode>, dest: u32, sources: &[u32]) -> Layout {
    Layout::Scripted(ScriptedLayout {
        nodes,
        destination: NodeId(dest),
        sources: sources.iter().map(|&s| NodeId(s)).collect(),
        failures: vec![],
    })
}

pub fn run(cfg: &ScenarioConfig, layout: &Layout, seed: u64) -> Trace {
    run_once(cfg, layout, seed).expect("scenario runs")
}

pub fn tx_by(trace: &Trace, kind: MessageKind) -> Vec<(f64, NodeId)> {
    trace
        .records
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::Tx { node, msg, .. } if *msg == kind => Some((r.t, *node)),
            _ => None,
        })
        .collect()
}

/// Transmissions of `kind` belonging to the first discovery in the trace.
pub fn first_discovery_tx(trace: &Trace, kind: MessageKind) -> Vec<(f64, NodeId)> {
    let Some(first) = trace.records.iter().find_map(|r| match &r.event {
        TraceEvent::DiscoveryStart { key, .. } => Some(*key),
        _ => None,
    }) else {
        return vec![];
    };
    trace
        .records
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::Tx { node, msg, key: Some(k), .. } if *msg == kind && *k == first => Some((r.t, *node)),
            _ => None,
        })
        .collect()
}

pub fn discovery_succeeded(trace: &Trace) -> bool {
    trace.records.iter().any(|r| matches!(r.event, TraceEvent::DiscoveryEnd { ok: true, .. }))
}

/// Transmissions sent while the sender was below `threshold`.
pub fn gate_violations(trace: &Trace, threshold: f64) -> usize {
    trace.records.iter().filter(|r| matches!(r.event, TraceEvent::Tx { energy, .. } if energy < threshold)).count()
}

/// Number of receptions lost to overlap anywhere in the run.
pub fn collisions(trace: &Trace) -> usize {
    trace
        .records
        .iter()
        .filter(|r| matches!(&r.event, TraceEvent::Drop { reason, .. } if reason == "collision" || reason == "half_duplex"))
        .count()
}

/// Twelve-node layout in the spirit of the forwarding-zone illustration:
/// a source with rear neighbours behind it, a low-energy node in front
/// and a relay chain toward the destination.
pub struct ZoneTopology {
    pub layout: Layout,
    pub source: NodeId,
    pub destination: NodeId,
    pub rear: Vec<NodeId>,
    pub low_energy: NodeId,
}

pub fn zone_topology() -> ZoneTopology {
    let f = ScriptedNode::fixed;
    let nodes = vec![
        f(900.0, 500.0, 1e4), // 0 destination
        f(300.0, 500.0, 60.0), // 1 source
        f(500.0, 450.0, 55.0), // 2 front
        f(480.0, 600.0, 70.0), // 3 front
        f(520.0, 520.0, 8.0), // 4 front, below the energy threshold
        f(150.0, 500.0, 90.0), // 5 rear
        f(200.0, 380.0, 40.0), // 6 rear
        f(180.0, 640.0, 65.0), // 7 rear
        f(80.0, 520.0, 30.0), // 8 rear
        f(720.0, 480.0, 45.0), // 9 relay
        f(700.0, 620.0, 50.0), // 10 relay
        f(260.0, 300.0, 75.0), // 11 rear
    ];
    ZoneTopology {
        layout: layout(nodes, 0, &[1]),
        source: NodeId(1),
        destination: NodeId(0),
        rear: [5, 6, 7, 8, 11].map(NodeId).to_vec(),
        low_energy: NodeId(4),
    }
}
