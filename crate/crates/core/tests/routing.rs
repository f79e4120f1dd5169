mod common;

use common::{discovery_succeeded, first_discovery_tx, layout, run, scripted_config};
use rlpr_sim::engine::{Trace, TraceEvent};
use rlpr_sim::protocol::ProtocolKind;
use rlpr_sim::scenario::{Layout, ScriptedNode};
use rlpr_sim::wire::{MessageKind, NodeId};
use std::collections::BTreeMap;

fn delivered(trace: &Trace) -> Vec<f64> {
    trace
        .records
        .iter()
        .filter(|r| matches!(r.event, TraceEvent::Delivered { .. }))
        .map(|r| r.t)
        .collect()
}

fn first_route(trace: &Trace) -> Option<Vec<NodeId>> {
    trace.records.iter().find_map(|r| match &r.event {
        TraceEvent::Route { path, complete: true, .. } => Some(path.clone()),
        _ => None,
    })
}

fn successes(trace: &Trace) -> usize {
    trace.records.iter().filter(|r| matches!(r.event, TraceEvent::DiscoveryEnd { ok: true, .. })).count()
}

#[test]
fn every_protocol_delivers_along_a_static_chain() {
    let nodes = vec![
        ScriptedNode::fixed(900.0, 500.0, 1.0e4),
        ScriptedNode::fixed(100.0, 500.0, 80.0),
        ScriptedNode::fixed(300.0, 500.0, 80.0),
        ScriptedNode::fixed(500.0, 500.0, 80.0),
        ScriptedNode::fixed(700.0, 500.0, 80.0),
    ];
    let lay = layout(nodes, 0, &[1]);
    for p in ProtocolKind::ALL {
        let t = run(&scripted_config(p, 3.0, 6.0), &lay, 1);
        assert!(discovery_succeeded(&t), "{p}");
        assert_eq!(delivered(&t).len(), 1, "{p}");
        let ids: Vec<u32> = first_route(&t).expect("route recorded").iter().map(|n| n.0).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 0], "{p}");
    }
}

#[test]
fn aodv_flood_sends_one_request_per_node() {
    // Twelve nodes 90 m apart; each hears two neighbours on either side.
    let mut nodes: Vec<ScriptedNode> = (0..12).map(|i| ScriptedNode::fixed(5.0 + 90.0 * i as f64, 500.0, 80.0)).collect();
    nodes[0] = ScriptedNode::fixed(5.0, 500.0, 1.0e4);
    let lay = layout(nodes, 0, &[11]);
    let t = run(&scripted_config(ProtocolKind::Aodv, 3.0, 6.0), &lay, 2);
    let mut per_node: BTreeMap<u32, usize> = BTreeMap::new();
    for (_, n) in first_discovery_tx(&t, MessageKind::Rreq) {
        *per_node.entry(n.0).or_default() += 1;
    }
    assert_eq!(per_node.len(), 11, "{per_node:?}");
    assert!(per_node.values().all(|&c| c == 1));
    assert!(!per_node.contains_key(&0), "the destination answers instead of flooding");
    assert!(discovery_succeeded(&t));
}

#[test]
fn rlpr_request_stays_in_front_of_the_source() {
    // Nodes behind the source never carry the request.
    let nodes = vec![
        ScriptedNode::fixed(900.0, 500.0, 1.0e4),
        ScriptedNode::fixed(420.0, 500.0, 80.0),
        ScriptedNode::fixed(660.0, 500.0, 80.0),
        ScriptedNode::fixed(200.0, 500.0, 80.0),
        ScriptedNode::fixed(380.0, 300.0, 80.0),
        ScriptedNode::fixed(250.0, 400.0, 80.0),
    ];
    let lay = layout(nodes, 0, &[1]);
    let t = run(&scripted_config(ProtocolKind::Rlpr, 3.0, 6.0), &lay, 3);
    let senders: Vec<u32> = first_discovery_tx(&t, MessageKind::Rlrq).iter().map(|(_, n)| n.0).collect();
    assert_eq!(senders, vec![1, 2]);
    assert!(discovery_succeeded(&t));
}

#[test]
fn rlpr_repairs_a_route_after_its_relay_fails() {
    let nodes = vec![
        ScriptedNode::fixed(900.0, 500.0, 1.0e4),
        ScriptedNode::fixed(100.0, 500.0, 80.0),
        ScriptedNode::fixed(300.0, 440.0, 80.0),
        ScriptedNode::fixed(300.0, 560.0, 80.0),
        ScriptedNode::fixed(500.0, 440.0, 80.0),
        ScriptedNode::fixed(500.0, 560.0, 80.0),
        ScriptedNode::fixed(700.0, 440.0, 80.0),
        ScriptedNode::fixed(700.0, 560.0, 80.0),
    ];
    let mut cfg = scripted_config(ProtocolKind::Rlpr, 3.0, 20.0);
    cfg.cbr_rate = 2.0;
    cfg.packets_per_source = 0;
    let mut lay = layout(nodes, 0, &[1]);
    let before = run(&cfg, &lay, 5);
    let path = first_route(&before).expect("initial route");
    let victim = path[1];
    if let Layout::Scripted(s) = &mut lay {
        s.failures.push((victim, 10.0));
    }
    let t = run(&cfg, &lay, 5);
    assert!(successes(&t) >= 2, "a second discovery must succeed");
    assert!(t.records.iter().any(|r| r.t >= 10.0 && matches!(r.event, TraceEvent::RouteInvalidated { .. })));
    assert!(t.records.iter().any(|r| r.t >= 10.0 && matches!(r.event, TraceEvent::ZoomOut { .. })));
    let late = delivered(&t).into_iter().filter(|&x| x > 12.0).count();
    assert!(late > 10, "only {late} packets delivered after the repair");
    let repaired = t
        .records
        .iter()
        .filter(|r| r.t > 10.0)
        .find_map(|r| match &r.event {
            TraceEvent::Route { path, complete: true, .. } => Some(path.clone()),
            _ => None,
        })
        .expect("repaired route");
    assert!(!repaired.contains(&victim));
}

#[test]
fn unreachable_destination_fails_discovery_for_every_protocol() {
    let nodes = vec![
        ScriptedNode::fixed(950.0, 950.0, 1.0e4),
        ScriptedNode::fixed(100.0, 100.0, 80.0),
        ScriptedNode::fixed(300.0, 100.0, 80.0),
    ];
    let lay = layout(nodes, 0, &[1]);
    for p in ProtocolKind::ALL {
        let t = run(&scripted_config(p, 2.0, 15.0), &lay, 1);
        assert!(!discovery_succeeded(&t), "{p}");
        assert!(t.records.iter().any(|r| matches!(r.event, TraceEvent::DiscoveryEnd { ok: false, .. })), "{p}");
        assert!(delivered(&t).is_empty());
    }
}
