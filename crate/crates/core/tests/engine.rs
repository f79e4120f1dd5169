mod common;

use common::{layout, run};
use rlpr_sim::config::ScenarioConfig;
use rlpr_sim::engine::{Simulation, Trace, TraceEvent, TraceLevel};
use rlpr_sim::metrics::MetricLedger;
use rlpr_sim::phys::Position;
use rlpr_sim::protocol::ProtocolKind;
use rlpr_sim::scenario::{Layout, ScriptedNode};
use rlpr_sim::wire::{DataPacket, HelloMessage, Message, MessageKind, NodeId};
use std::collections::BTreeMap;

const SLOT: f64 = 20e-6;

/// No traffic and no periodic beacons, so only injected frames hit the air.
fn quiet_config(duration: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.protocol = ProtocolKind::Aodv;
    c.cbr_rate = 0.0;
    c.hello_interval = 1.0e6;
    c.sim_duration = duration;
    c.trace_level = TraceLevel::Full;
    c
}

fn hello(from: u32) -> Message {
    Message::Hello(HelloMessage {
        sender_id: NodeId(from),
        position: Position::new(0.0, 0.0),
        speed: 0.0,
        residual_energy: 50.0,
        distance_to_dest: 0.0,
        timestamp: 0.0,
    })
}

/// A data frame large enough that its airtime dwarfs the backoff window.
fn big_data(from: u32, to: u32) -> Message {
    Message::Data(DataPacket { source: NodeId(from), dest: NodeId(to), seq: 0, created: 0.0, payload_len: 1500 })
}

fn simulate(cfg: &ScenarioConfig, lay: &Layout, seed: u64, inject: &[(f64, u32, Message)]) -> Trace {
    let mut sim = Simulation::new(cfg, lay, seed).unwrap();
    for (t, n, m) in inject {
        sim.inject(*t, NodeId(*n), None, m.clone()).unwrap();
    }
    sim.run().unwrap()
}

fn rx_of(trace: &Trace, node: u32) -> Vec<(f64, NodeId, u64)> {
    trace
        .records
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::Rx { node: n, from, tx, .. } if n.0 == node => Some((r.t, *from, *tx)),
            _ => None,
        })
        .collect()
}

fn drops_at(trace: &Trace, node: u32, why: &str) -> usize {
    trace
        .records
        .iter()
        .filter(|r| matches!(&r.event, TraceEvent::Drop { node: n, reason, .. } if n.0 == node && reason == why))
        .count()
}

fn tx_times(trace: &Trace, node: u32) -> Vec<f64> {
    trace
        .records
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::Tx { node: n, .. } if n.0 == node => Some(r.t),
            _ => None,
        })
        .collect()
}

#[test]
fn hidden_terminals_collide_at_the_middle_receiver() {
    // A and B are 400 m apart and cannot sense each other; R hears both.
    let lay = layout(
        vec![
            ScriptedNode::fixed(300.0, 500.0, 1000.0),
            ScriptedNode::fixed(100.0, 500.0, 1000.0),
            ScriptedNode::fixed(500.0, 500.0, 1000.0),
        ],
        0,
        &[],
    );
    let t = simulate(&quiet_config(2.0), &lay, 3, &[(1.0, 1, big_data(1, 0)), (1.0, 2, big_data(2, 0))]);
    assert_eq!(tx_times(&t, 1).len(), 1);
    assert_eq!(tx_times(&t, 2).len(), 1);
    assert!(rx_of(&t, 0).is_empty(), "overlapping frames must not be delivered");
    assert_eq!(drops_at(&t, 0, "collision"), 2);
}

#[test]
fn range_limit_is_sharp() {
    let lay = layout(
        vec![
            ScriptedNode::fixed(900.0, 900.0, 1000.0),
            ScriptedNode::fixed(100.0, 100.0, 1000.0),
            ScriptedNode::fixed(300.0, 100.0, 1000.0),
            ScriptedNode::fixed(100.0, 400.0, 1000.0),
        ],
        0,
        &[],
    );
    let t = simulate(&quiet_config(2.0), &lay, 1, &[(1.0, 1, hello(1))]);
    assert_eq!(rx_of(&t, 2).len(), 1, "200 m is within range");
    assert!(rx_of(&t, 3).is_empty(), "300 m is out of range");
    assert!(rx_of(&t, 0).is_empty());
}

#[test]
fn dead_receiver_hears_nothing_and_spends_nothing() {
    let mut lay = layout(
        vec![
            ScriptedNode::fixed(900.0, 900.0, 1000.0),
            ScriptedNode::fixed(100.0, 100.0, 1000.0),
            ScriptedNode::fixed(200.0, 100.0, 60.0),
        ],
        0,
        &[],
    );
    if let Layout::Scripted(s) = &mut lay {
        s.failures.push((NodeId(2), 0.5));
    }
    let mut cfg = quiet_config(3.0);
    cfg.idle_drain = 0.0;
    let t = simulate(&cfg, &lay, 1, &[(1.0, 1, hello(1)), (2.0, 1, hello(1))]);
    assert_eq!(tx_times(&t, 1).len(), 2);
    assert!(rx_of(&t, 2).is_empty());
    let rx_cost: f64 = t
        .records
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::Rx { node, cost, .. } if node.0 == 2 => Some(*cost),
            _ => None,
        })
        .sum();
    assert_eq!(rx_cost, 0.0);
}

#[test]
fn lone_sender_backoff_is_whole_slots_below_the_window() {
    let lay = layout(vec![ScriptedNode::fixed(900.0, 900.0, 1000.0), ScriptedNode::fixed(100.0, 100.0, 1.0e6)], 0, &[]);
    let cfg = quiet_config(40.0);
    let starts: Vec<f64> = (0..1000).map(|k| 1.0 + 0.025 * k as f64).collect();
    let inject: Vec<_> = starts.iter().map(|&s| (s, 1, hello(1))).collect();
    let t = simulate(&cfg, &lay, 11, &inject);
    let sent = tx_times(&t, 1);
    assert_eq!(sent.len(), starts.len());
    let mut seen = [0usize; 15];
    for (s, x) in starts.iter().zip(&sent) {
        let slots = (x - s) / SLOT;
        let k = slots.round();
        assert!((slots - k).abs() < 1e-6, "backoff {slots} is not a whole slot count");
        assert!((0.0..15.0).contains(&k), "backoff of {k} slots");
        seen[k as usize] += 1;
    }
    assert!(seen.iter().all(|&c| c > 30), "{seen:?}");
}

#[test]
fn neighbours_pick_the_same_slot_about_once_in_cw_tries() {
    let lay = layout(
        vec![
            ScriptedNode::fixed(900.0, 900.0, 1000.0),
            ScriptedNode::fixed(100.0, 100.0, 1.0e6),
            ScriptedNode::fixed(150.0, 100.0, 1.0e6),
        ],
        0,
        &[],
    );
    let trials = 10_000;
    let starts: Vec<f64> = (0..trials).map(|k| 1.0 + 0.01 * k as f64).collect();
    let mut inject = Vec::new();
    for &s in &starts {
        inject.push((s, 1, hello(1)));
        inject.push((s, 2, hello(2)));
    }
    let t = simulate(&quiet_config(1.0 + 0.01 * trials as f64 + 1.0), &lay, 5, &inject);
    let a = tx_times(&t, 1);
    let b = tx_times(&t, 2);
    assert_eq!(a.len(), trials);
    assert_eq!(b.len(), trials);
    let same = a.iter().zip(&b).filter(|(x, y)| (*x - *y).abs() < 1e-9).count();
    let rate = same as f64 / trials as f64;
    // Same draw from U{0..14}: 1/15.
    assert!((rate - 1.0 / 15.0).abs() < 0.012, "same-slot rate {rate}");
    // Simultaneous starts leave both radios deaf to each other.
    assert_eq!(drops_at(&t, 1, "half_duplex") + drops_at(&t, 2, "half_duplex"), 2 * same);
}

#[test]
fn quiet_run_only_beacons() {
    let mut cfg = ScenarioConfig::default();
    cfg.node_count = 10;
    cfg.source_count = 1;
    cfg.cbr_rate = 0.0;
    cfg.sim_duration = 10.0;
    cfg.initial_energy_min = 50.0;
    for p in ProtocolKind::ALL {
        cfg.protocol = p;
        let t = run(&cfg, &Layout::Random, 2);
        for r in &t.records {
            match &r.event {
                TraceEvent::Tx { msg, .. } => assert_eq!(*msg, MessageKind::Hello),
                TraceEvent::DiscoveryStart { .. } | TraceEvent::Delivered { .. } => panic!("{:?} without traffic", r.event),
                _ => {}
            }
        }
        let ledger = MetricLedger::from_trace(&t);
        assert_eq!(ledger.count(MessageKind::Hello), 100, "{p}");
    }
}

#[test]
fn energy_ledger_replays_to_end_residuals() {
    let mut cfg = ScenarioConfig::default();
    cfg.node_count = 20;
    cfg.source_count = 3;
    cfg.cbr_rate = 2.0;
    cfg.sim_duration = 60.0;
    cfg.initial_energy_min = 10.0;
    cfg.initial_energy_max = 12.0;
    for p in ProtocolKind::ALL {
        cfg.protocol = p;
        let t = run(&cfg, &Layout::Random, 9);
        let mut spent: BTreeMap<u32, f64> = BTreeMap::new();
        let mut residual = None;
        for r in &t.records {
            let (node, c) = match &r.event {
                TraceEvent::Tx { node, cost, .. } | TraceEvent::Rx { node, cost, .. } | TraceEvent::Idle { node, cost } => {
                    (node.0, *cost)
                }
                TraceEvent::Drop { node, cost: Some(c), .. } => (node.0, *c),
                TraceEvent::End { residual: res } => {
                    residual = Some(res.clone());
                    continue;
                }
                _ => continue,
            };
            *spent.entry(node).or_default() += c;
        }
        let residual = residual.expect("trace ends with residuals");
        for (i, e0) in t.meta.initial_energy.iter().enumerate() {
            let replay = e0 - spent.get(&(i as u32)).copied().unwrap_or(0.0);
            assert!((replay.max(0.0) - residual[i]).abs() < 1e-9, "{p} node {i}: {replay} vs {}", residual[i]);
            assert!(residual[i] >= 0.0);
        }
    }
}

#[test]
fn receptions_follow_their_transmissions() {
    let mut cfg = ScenarioConfig::default();
    cfg.node_count = 20;
    cfg.source_count = 3;
    cfg.cbr_rate = 1.0;
    cfg.sim_duration = 60.0;
    for p in ProtocolKind::ALL {
        cfg.protocol = p;
        let t = run(&cfg, &Layout::Random, 4);
        let mut sent: BTreeMap<u64, (f64, u32)> = BTreeMap::new();
        let mut last = 0.0;
        for r in &t.records {
            assert!(r.t >= last, "trace time went backwards");
            last = r.t;
            match &r.event {
                TraceEvent::Tx { tx, bytes, .. } => {
                    sent.insert(*tx, (r.t, *bytes));
                }
                TraceEvent::Rx { tx, .. } => {
                    let (t0, bytes) = sent[tx];
                    let airtime = f64::from(bytes) * 8.0 / cfg.data_rate;
                    assert!(r.t >= t0 + airtime - 1e-12, "{p}: rx at {} before tx end {}", r.t, t0 + airtime);
                }
                _ => {}
            }
        }
    }
}

#[test]
fn idle_drain_sets_lifetime_at_tick_granularity() {
    let mut cfg = quiet_config(500.0);
    cfg.hello_interval = 1.0;
    cfg.tx_cost_per_bit = 0.0;
    cfg.rx_cost_per_bit = 0.0;
    cfg.mobility_tick = 0.1;
    cfg.idle_drain = 0.001;
    let lay = layout(
        vec![
            ScriptedNode::fixed(500.0, 500.0, 1.0e4),
            ScriptedNode::fixed(400.0, 500.0, 1.0e4),
            ScriptedNode::fixed(300.0, 500.0, 0.41265),
        ],
        0,
        &[],
    );
    let t = run(&cfg, &lay, 1);
    let ledger = MetricLedger::from_trace(&t);
    let life = ledger.network_lifetime();
    assert!((life - 412.7).abs() < 1e-6, "lifetime {life}");
}

#[test]
fn scheduling_into_the_past_is_rejected() {
    let lay = layout(vec![ScriptedNode::fixed(900.0, 900.0, 1000.0), ScriptedNode::fixed(100.0, 100.0, 1000.0)], 0, &[]);
    let mut sim = Simulation::new(&quiet_config(2.0), &lay, 1).unwrap();
    assert!(sim.inject(-1.0, NodeId(1), None, hello(1)).is_err());
    assert!(sim.inject(1.0, NodeId(7), None, hello(7)).is_err());
}

#[test]
fn persisted_trace_reproduces_the_ledger_exactly() {
    let mut cfg = ScenarioConfig::default();
    cfg.node_count = 20;
    cfg.sim_duration = 120.0;
    cfg.cbr_rate = 1.0;
    for level in [TraceLevel::Full, TraceLevel::Summary] {
        cfg.trace_level = level;
        for p in ProtocolKind::ALL {
            cfg.protocol = p;
            let t = run(&cfg, &Layout::Random, 6);
            let back = Trace::read_from(t.to_ndjson().as_slice()).unwrap();
            assert_eq!(back, t, "{p} {level:?}");
            assert_eq!(MetricLedger::from_trace(&back), MetricLedger::from_trace(&t));
        }
    }
}
