use crate::wire::{Message, NodeId};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("event scheduled in the past: now {now}, requested {at}")]
    Causality { now: f64, at: f64 },
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// The MAC tries to put the head of a node's queue on the air.
    TxStart(NodeId),
    TxEnd(u64),
    Deliver { tx: u64, node: NodeId },
    Timer { node: NodeId, token: u64 },
    /// A protocol send whose hand-off to the MAC was deferred.
    Enqueue { node: NodeId, dst: Option<NodeId>, msg: Message },
    MobilityTick,
    HelloTick(NodeId),
    TrafficArrival(NodeId),
    /// Scripted hard failure: the node's battery is emptied.
    NodeFailure(NodeId),
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    now: f64,
}

impl EventQueue {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, at: f64, kind: EventKind) -> Result<(), EngineError> {
        if !(at >= self.now) {
            return Err(EngineError::Causality { now: self.now, at });
        }
        self.next_seq += 1;
        self.heap.push(Event { time: at, seq: self.next_seq, kind });
        Ok(())
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }
}
