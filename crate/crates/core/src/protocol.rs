//! The contract between the event engine and a per-node routing agent.
//!
//! Agents are pure state machines: the engine hands them a [`NodeCtx`]
//! snapshot plus one stimulus and collects the resulting [`Action`]s.

use crate::phys::{Position, Velocity};
use crate::wire::{DataPacket, DiscoveryKey, Message, MessageKind, NodeId};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Rlpr,
    Aodv,
    RarpLite,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::Rlpr, ProtocolKind::RarpLite, ProtocolKind::Aodv];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Rlpr => "rlpr",
            ProtocolKind::Aodv => "aodv",
            ProtocolKind::RarpLite => "rarp_lite",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "rlpr" => Ok(ProtocolKind::Rlpr),
            "aodv" => Ok(ProtocolKind::Aodv),
            "rarp_lite" | "rarp" => Ok(ProtocolKind::RarpLite),
            other => Err(format!("unknown protocol `{other}` (expected rlpr, aodv or rarp_lite)")),
        }
    }
}

/// Routing-layer parameters shared by all three protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    /// T_E: joules a node must hold to take part in RLPR.
    pub energy_threshold: f64,
    /// T_s: minimum RSSI (dBm) for a front relative to contend.
    pub rssi_threshold: f64,
    pub max_range: f64,
    pub hello_interval: f64,
    /// Neighbor entries older than `staleness_factor * hello_interval` expire.
    pub staleness_factor: f64,
    pub zone_half_angle_deg: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Seconds of contention delay per unit of composite metric.
    pub contention_slot: f64,
    pub max_speed: f64,
    /// Upper bound of the uniform jitter AODV/RARP-lite add before rebroadcasting.
    pub broadcast_jitter: f64,
    pub queue_len: usize,
    pub discovery_timeout: f64,
    pub discovery_retries: u32,
    pub discovery_holdoff: f64,
    pub duplicate_cache: usize,
    /// RARP-lite: how long the destination collects request copies.
    pub rarp_window: f64,
    pub rarp_ect_weight: f64,
    pub rarp_ect_cap: f64,
    pub rarp_hop_penalty: f64,
    pub rarp_energy_weight: f64,
    pub rarp_energy_cap: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            energy_threshold: 10.0,
            rssi_threshold: -64.0,
            max_range: 250.0,
            hello_interval: 1.0,
            staleness_factor: 2.5,
            zone_half_angle_deg: 90.0,
            alpha: 0.5,
            beta: 0.5,
            contention_slot: 0.010,
            max_speed: 25.0 / 3.6,
            broadcast_jitter: 0.010,
            queue_len: 10,
            discovery_timeout: 1.0,
            discovery_retries: 2,
            discovery_holdoff: 1.0,
            duplicate_cache: 256,
            rarp_window: 0.05,
            rarp_ect_weight: 1.0,
            rarp_ect_cap: 60.0,
            rarp_hop_penalty: 0.05,
            rarp_energy_weight: 1.0,
            rarp_energy_cap: 100.0,
        }
    }
}

impl ProtocolParams {
    pub fn staleness_horizon(&self) -> f64 {
        self.staleness_factor * self.hello_interval
    }
}

/// What an agent may observe about itself when handling a stimulus.
#[derive(Debug, Clone)]
pub struct NodeCtx<'a> {
    pub id: NodeId,
    pub now: f64,
    pub position: Position,
    pub velocity: Velocity,
    pub energy: f64,
    pub destination: NodeId,
    pub destination_position: Position,
    pub params: &'a ProtocolParams,
}

impl NodeCtx<'_> {
    pub fn is_destination(&self) -> bool {
        self.id == self.destination
    }

    pub fn eligible(&self) -> bool {
        self.energy >= self.params.energy_threshold
    }
}

/// Structured protocol events that go straight into the trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Note {
    DiscoveryStarted(DiscoveryKey),
    DiscoveryCompleted(DiscoveryKey),
    DiscoveryFailed(DiscoveryKey),
    ContentionScheduled { key: DiscoveryKey, metric: f64, gd: f64, vrl: f64, fire_at: f64 },
    ContentionCancelled(DiscoveryKey),
    ContentionFired(DiscoveryKey),
    Discarded { kind: MessageKind, reason: &'static str },
    RouteInvalidated { dest: NodeId, next_hop: NodeId },
    ZoomOut { cause: &'static str },
    DataDelivered { source: NodeId, seq: u32, created: f64 },
    DataDropped { reason: &'static str },
    Anomaly(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Hand a broadcast frame to the MAC after `delay` seconds.
    Broadcast { msg: Message, delay: f64 },
    Unicast { to: NodeId, msg: Message, delay: f64 },
    Timer { delay: f64, token: u64 },
    Note(Note),
}

#[derive(Debug, Default)]
pub struct Outbox {
    pub actions: Vec<Action>,
}

impl Outbox {
    pub fn broadcast(&mut self, msg: Message) {
        self.actions.push(Action::Broadcast { msg, delay: 0.0 });
    }

    pub fn broadcast_after(&mut self, msg: Message, delay: f64) {
        self.actions.push(Action::Broadcast { msg, delay });
    }

    pub fn unicast(&mut self, to: NodeId, msg: Message) {
        self.actions.push(Action::Unicast { to, msg, delay: 0.0 });
    }

    pub fn timer(&mut self, delay: f64, token: u64) {
        self.actions.push(Action::Timer { delay, token });
    }

    pub fn note(&mut self, note: Note) {
        self.actions.push(Action::Note(note));
    }

    pub fn drain(&mut self) -> std::vec::Drain<'_, Action> {
        self.actions.drain(..)
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Every message this outbox would put on the air.
    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.actions.iter().filter_map(|a| match a {
            Action::Broadcast { msg, .. } | Action::Unicast { msg, .. } => Some(msg),
            _ => None,
        })
    }

    pub fn notes(&self) -> impl Iterator<Item = &Note> {
        self.actions.iter().filter_map(|a| match a {
            Action::Note(n) => Some(n),
            _ => None,
        })
    }
}

pub trait RoutingProtocol: Send {
    fn kind(&self) -> ProtocolKind;

    /// Whether the MAC must refuse frames while the node is below T_E.
    fn energy_gated(&self) -> bool {
        false
    }

    fn on_hello_tick(&mut self, ctx: &NodeCtx<'_>, out: &mut Outbox);

    fn on_receive(&mut self, ctx: &NodeCtx<'_>, from: NodeId, msg: Message, rssi: f64, out: &mut Outbox);

    fn on_timer(&mut self, ctx: &NodeCtx<'_>, token: u64, out: &mut Outbox);

    /// The application at a source produced a packet for the destination.
    fn on_app_data(&mut self, ctx: &NodeCtx<'_>, packet: DataPacket, out: &mut Outbox);

    /// The channel reports that a unicast to `to` was not delivered.
    fn on_link_failure(&mut self, ctx: &NodeCtx<'_>, to: NodeId, msg: Message, out: &mut Outbox);

    /// Last chance to withdraw a queued frame just before it goes on the air.
    fn confirm_send(&mut self, _ctx: &NodeCtx<'_>, _msg: &Message) -> bool {
        true
    }

    fn next_hop(&self, dest: NodeId) -> Option<NodeId>;
}

/// Bounded FIFO membership cache for duplicate suppression.
#[derive(Debug, Clone)]
pub struct DuplicateCache<K> {
    order: VecDeque<K>,
    cap: usize,
}

impl<K: PartialEq + Clone> DuplicateCache<K> {
    pub fn new(cap: usize) -> Self {
        Self { order: VecDeque::new(), cap: cap.max(1) }
    }

    pub fn contains(&self, k: &K) -> bool {
        self.order.iter().any(|x| x == k)
    }

    /// Returns false when `k` was already present.
    pub fn insert(&mut self, k: K) -> bool {
        if self.contains(&k) {
            return false;
        }
        if self.order.len() == self.cap {
            self.order.pop_front();
        }
        self.order.push_back(k);
        true
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingDiscovery {
    pub key: DiscoveryKey,
    pub started: f64,
    pub attempt: u32,
    pub timer: u64,
}

/// Source-side bookkeeping common to every protocol: the bounded send
/// buffer, the discovery attempt in flight and its retry schedule.
#[derive(Debug, Clone)]
pub struct SourceAgent {
    pub buffer: VecDeque<DataPacket>,
    cap: usize,
    pub pending: Option<PendingDiscovery>,
    next_broadcast_id: u32,
    holdoff_until: f64,
}

/// What the owning protocol should do after the agent handled an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceStep {
    Idle,
    /// Start a fresh attempt with this key; the timeout timer is already armed.
    Discover(DiscoveryKey),
}

impl SourceAgent {
    pub fn new(cap: usize) -> Self {
        Self {
            buffer: VecDeque::new(),
            cap: cap.max(1),
            pending: None,
            next_broadcast_id: 0,
            holdoff_until: 0.0,
        }
    }

    pub fn last_broadcast_id(&self) -> u32 {
        self.next_broadcast_id
    }

    /// Drop-tail enqueue. Returns false when the packet was dropped.
    pub fn buffer_packet(&mut self, packet: DataPacket, out: &mut Outbox) -> bool {
        if self.buffer.len() >= self.cap {
            out.note(Note::DataDropped { reason: "buffer_full" });
            return false;
        }
        self.buffer.push_back(packet);
        true
    }

    pub fn requeue_front(&mut self, packet: DataPacket) {
        if self.buffer.len() >= self.cap {
            self.buffer.pop_back();
        }
        self.buffer.push_front(packet);
    }

    /// Starts a discovery unless one is already running or the source is
    /// holding off after exhausting its retries.
    pub fn maybe_discover(
        &mut self,
        ctx: &NodeCtx<'_>,
        dest: NodeId,
        token: u64,
        out: &mut Outbox,
    ) -> SourceStep {
        if self.pending.is_some() || ctx.now < self.holdoff_until {
            return SourceStep::Idle;
        }
        SourceStep::Discover(self.begin_attempt(ctx, dest, 0, token, out))
    }

    fn begin_attempt(
        &mut self,
        ctx: &NodeCtx<'_>,
        dest: NodeId,
        attempt: u32,
        token: u64,
        out: &mut Outbox,
    ) -> DiscoveryKey {
        self.next_broadcast_id = self.next_broadcast_id.wrapping_add(1);
        let key = DiscoveryKey { source: ctx.id, dest, broadcast_id: self.next_broadcast_id };
        self.pending = Some(PendingDiscovery { key, started: ctx.now, attempt, timer: token });
        out.note(Note::DiscoveryStarted(key));
        let timeout = ctx.params.discovery_timeout * f64::from(1u32 << attempt.min(8));
        out.timer(timeout, token);
        key
    }

    /// A reply for `key` reached the source. A late reply to an earlier
    /// attempt for the same destination also completes the attempt in
    /// flight. Returns the buffered packets to send.
    pub fn complete(&mut self, key: DiscoveryKey, out: &mut Outbox) -> Option<Vec<DataPacket>> {
        match self.pending {
            Some(p)
                if p.key.source == key.source
                    && p.key.dest == key.dest
                    && key.broadcast_id <= p.key.broadcast_id =>
            {
                self.pending = None;
                out.note(Note::DiscoveryCompleted(p.key));
                Some(self.buffer.drain(..).collect())
            }
            _ => None,
        }
    }

    /// Packets waiting for a route, taken when a route appears outside the
    /// discovery cycle.
    pub fn take_buffer(&mut self) -> Vec<DataPacket> {
        self.buffer.drain(..).collect()
    }

    /// Handles a discovery timeout timer. Retries with a new broadcast id and
    /// doubled timeout, or gives up, flushes the buffer and holds off.
    pub fn on_timeout(&mut self, ctx: &NodeCtx<'_>, token: u64, next_token: u64, out: &mut Outbox) -> SourceStep {
        let Some(p) = self.pending else { return SourceStep::Idle };
        if p.timer != token {
            return SourceStep::Idle;
        }
        out.note(Note::DiscoveryFailed(p.key));
        self.pending = None;
        if p.attempt < ctx.params.discovery_retries {
            return SourceStep::Discover(self.begin_attempt(ctx, p.key.dest, p.attempt + 1, next_token, out));
        }
        for _ in self.buffer.drain(..) {
            out.note(Note::DataDropped { reason: "no_route" });
        }
        self.holdoff_until = ctx.now + ctx.params.discovery_holdoff;
        SourceStep::Idle
    }

    /// Abandons the attempt in flight without counting it as a failure, e.g.
    /// when the source ran out of energy.
    pub fn abandon(&mut self) {
        self.pending = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(params: &ProtocolParams, now: f64) -> NodeCtx<'_> {
        NodeCtx {
            id: NodeId(1),
            now,
            position: Position::new(0.0, 0.0),
            velocity: Velocity::still(),
            energy: 50.0,
            destination: NodeId(0),
            destination_position: Position::new(500.0, 500.0),
            params,
        }
    }

    fn packet(seq: u32) -> DataPacket {
        DataPacket { source: NodeId(1), dest: NodeId(0), seq, created: 0.0, payload_len: 512 }
    }

    #[test]
    fn buffer_is_drop_tail_at_capacity() {
        let mut agent = SourceAgent::new(10);
        let mut out = Outbox::default();
        for seq in 0..10 {
            assert!(agent.buffer_packet(packet(seq), &mut out));
        }
        assert!(!agent.buffer_packet(packet(10), &mut out));
        assert_eq!(agent.buffer.len(), 10);
        assert_eq!(agent.buffer.back().unwrap().seq, 9);
        assert!(out.notes().any(|n| *n == Note::DataDropped { reason: "buffer_full" }));
    }

    #[test]
    fn successive_discoveries_increase_broadcast_id() {
        let params = ProtocolParams::default();
        let mut agent = SourceAgent::new(10);
        let mut out = Outbox::default();
        let SourceStep::Discover(k1) = agent.maybe_discover(&ctx(&params, 1.0), NodeId(0), 7, &mut out) else {
            panic!("expected discovery")
        };
        assert_eq!(agent.maybe_discover(&ctx(&params, 1.1), NodeId(0), 8, &mut out), SourceStep::Idle);
        assert!(agent.complete(k1, &mut out).is_some());
        let SourceStep::Discover(k2) = agent.maybe_discover(&ctx(&params, 2.0), NodeId(0), 9, &mut out) else {
            panic!("expected discovery")
        };
        assert!(k2.broadcast_id > k1.broadcast_id);
    }

    #[test]
    fn retries_then_holdoff() {
        let params = ProtocolParams::default();
        let mut agent = SourceAgent::new(10);
        let mut out = Outbox::default();
        agent.buffer_packet(packet(0), &mut out);
        agent.maybe_discover(&ctx(&params, 0.0), NodeId(0), 1, &mut out);
        let s = agent.on_timeout(&ctx(&params, 1.0), 1, 2, &mut out);
        assert!(matches!(s, SourceStep::Discover(k) if k.broadcast_id == 2));
        let s = agent.on_timeout(&ctx(&params, 3.0), 2, 3, &mut out);
        assert!(matches!(s, SourceStep::Discover(k) if k.broadcast_id == 3));
        assert_eq!(agent.on_timeout(&ctx(&params, 7.0), 3, 4, &mut out), SourceStep::Idle);
        assert!(agent.buffer.is_empty());
        assert_eq!(agent.maybe_discover(&ctx(&params, 7.5), NodeId(0), 5, &mut out), SourceStep::Idle);
        assert!(matches!(agent.maybe_discover(&ctx(&params, 8.0), NodeId(0), 5, &mut out), SourceStep::Discover(_)));
        let failed = out.notes().filter(|n| matches!(n, Note::DiscoveryFailed(_))).count();
        assert_eq!(failed, 3);
    }

    #[test]
    fn stale_timeout_tokens_are_ignored() {
        let params = ProtocolParams::default();
        let mut agent = SourceAgent::new(10);
        let mut out = Outbox::default();
        agent.maybe_discover(&ctx(&params, 0.0), NodeId(0), 1, &mut out);
        assert_eq!(agent.on_timeout(&ctx(&params, 1.0), 99, 2, &mut out), SourceStep::Idle);
        assert!(agent.pending.is_some());
    }

    #[test]
    fn duplicate_cache_evicts_oldest() {
        let mut c = DuplicateCache::new(2);
        assert!(c.insert(1));
        assert!(!c.insert(1));
        assert!(c.insert(2));
        assert!(c.insert(3));
        assert!(!c.contains(&1));
        assert!(c.contains(&3));
    }
}
