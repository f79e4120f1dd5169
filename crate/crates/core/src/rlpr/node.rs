use super::metric::{
    composite_metric, contention_delay, forwarding_angle, geographic_distance_metric, in_forwarding_zone,
    relative_speed_metric, ZoneConfig,
};
use super::tables::{ContentionTimer, ForwardEntry, FrontRelativeTable, NeighborRecord, NeighborTable, RouteTables};
use crate::phys::distance;
use crate::protocol::{DuplicateCache, NodeCtx, Note, Outbox, ProtocolKind, RoutingProtocol, SourceAgent, SourceStep};
use crate::wire::{
    DataPacket, DiscoveryKey, HelloMessage, Message, MessageKind, NodeId, RerrMessage, RlrpMessage, RlrqMessage,
};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq)]
enum TimerKind {
    Contention(DiscoveryKey),
    Discovery,
    /// Half-interval neighbor staleness sweep.
    Maintenance,
}

/// One UAV's RLPR agent.
#[derive(Debug, Clone)]
pub struct RlprNode {
    pub neighbors: NeighborTable,
    pub front: FrontRelativeTable,
    pub routes: RouteTables,
    seen: DuplicateCache<DiscoveryKey>,
    contention: BTreeMap<DiscoveryKey, ContentionTimer>,
    /// Fired requests still waiting for the channel.
    in_flight: BTreeSet<DiscoveryKey>,
    /// Fired requests overtaken by a peer's rebroadcast before leaving the queue.
    withdrawn: BTreeSet<DiscoveryKey>,
    /// Per (source, destination): the hop an accepted reply was relayed to.
    upstream: BTreeMap<(NodeId, NodeId), NodeId>,
    timers: BTreeMap<u64, TimerKind>,
    next_token: u64,
    source: SourceAgent,
    pub anomalies: u64,
}

impl RlprNode {
    pub fn new(queue_len: usize, duplicate_cache: usize) -> Self {
        Self {
            neighbors: NeighborTable::default(),
            front: FrontRelativeTable::default(),
            routes: RouteTables::default(),
            seen: DuplicateCache::new(duplicate_cache),
            contention: BTreeMap::new(),
            in_flight: BTreeSet::new(),
            withdrawn: BTreeSet::new(),
            upstream: BTreeMap::new(),
            timers: BTreeMap::new(),
            next_token: 0,
            source: SourceAgent::new(queue_len),
            anomalies: 0,
        }
    }

    pub fn pending_contention(&self, key: &DiscoveryKey) -> Option<&ContentionTimer> {
        self.contention.get(key)
    }

    pub fn buffered(&self) -> usize {
        self.source.buffer.len()
    }

    pub fn last_broadcast_id(&self) -> u32 {
        self.source.last_broadcast_id()
    }

    fn alloc(&mut self, kind: TimerKind) -> u64 {
        self.next_token += 1;
        self.timers.insert(self.next_token, kind);
        self.next_token
    }

    fn zone(ctx: &NodeCtx<'_>) -> ZoneConfig {
        ZoneConfig { half_angle_deg: ctx.params.zone_half_angle_deg, energy_threshold: ctx.params.energy_threshold }
    }

    fn hello(ctx: &NodeCtx<'_>) -> HelloMessage {
        HelloMessage {
            sender_id: ctx.id,
            position: ctx.position,
            speed: ctx.velocity.speed,
            residual_energy: ctx.energy,
            distance_to_dest: distance(ctx.position, ctx.destination_position),
            timestamp: ctx.now,
        }
    }

    fn zoom_out(&self, ctx: &NodeCtx<'_>, cause: &'static str, out: &mut Outbox) {
        if !ctx.eligible() {
            return;
        }
        out.note(Note::ZoomOut { cause });
        out.broadcast(Message::ZoomOut(Self::hello(ctx)));
    }

    fn fresh_neighbor(&self, ctx: &NodeCtx<'_>, id: NodeId) -> bool {
        self.neighbors
            .get(id)
            .is_some_and(|r| ctx.now - r.last_heard <= ctx.params.staleness_horizon())
    }

    fn valid_route(&self, ctx: &NodeCtx<'_>, dest: NodeId) -> Option<NodeId> {
        self.routes.next_hop(dest).filter(|nh| *nh == dest || self.fresh_neighbor(ctx, *nh))
    }

    /// Who may accept a request this node sends: the destination alone when
    /// it is within range, otherwise the current front-relative snapshot.
    fn request_targets(&self, ctx: &NodeCtx<'_>, dest: NodeId) -> Vec<NodeId> {
        if distance(ctx.position, ctx.destination_position) <= ctx.params.max_range {
            vec![dest]
        } else {
            self.front.snapshot()
        }
    }

    fn send_request(&mut self, ctx: &NodeCtx<'_>, key: DiscoveryKey, out: &mut Outbox) {
        self.seen.insert(key);
        let msg = RlrqMessage {
            source_id: ctx.id,
            dest_id: key.dest,
            broadcast_id: key.broadcast_id,
            prev_hop_id: ctx.id,
            prev_hop_position: ctx.position,
            prev_hop_speed: ctx.velocity.speed,
            hop_count: 0,
            front_relatives: self.request_targets(ctx, key.dest),
        };
        out.broadcast(Message::Rlrq(msg));
    }

    fn step(&mut self, ctx: &NodeCtx<'_>, step: SourceStep, out: &mut Outbox) {
        if let SourceStep::Discover(key) = step {
            if ctx.eligible() {
                self.send_request(ctx, key, out);
            } else {
                self.source.abandon();
            }
        }
    }

    fn discover(&mut self, ctx: &NodeCtx<'_>, out: &mut Outbox) {
        let token = self.alloc(TimerKind::Discovery);
        let step = self.source.maybe_discover(ctx, ctx.destination, token, out);
        if step == SourceStep::Idle {
            self.timers.remove(&token);
        }
        self.step(ctx, step, out);
    }

    fn on_hello_receive(&mut self, ctx: &NodeCtx<'_>, h: &HelloMessage) {
        if h.sender_id == ctx.id {
            return;
        }
        self.neighbors.upsert(NeighborRecord {
            id: h.sender_id,
            position: h.position,
            speed: h.speed,
            energy: h.residual_energy,
            last_heard: ctx.now,
        });
        // The sender is a front relative of this node when it lies inside
        // this node's zone toward the destination.
        let member = match forwarding_angle(ctx.position, h.position, ctx.destination_position) {
            Ok(angle) => in_forwarding_zone(angle, h.residual_energy, &Self::zone(ctx)),
            Err(_) => false,
        };
        self.front.set(h.sender_id, member);
    }

    fn on_rlrq(&mut self, ctx: &NodeCtx<'_>, from: NodeId, m: RlrqMessage, rssi: f64, out: &mut Outbox) {
        let key = m.key();
        if self.seen.contains(&key) {
            if let Some(t) = self.contention.remove(&key) {
                self.timers.remove(&t.token);
                out.note(Note::ContentionCancelled(key));
            } else if self.in_flight.remove(&key) {
                self.withdrawn.insert(key);
            }
            out.note(Note::Discarded { kind: MessageKind::Rlrq, reason: "duplicate" });
            return;
        }
        let replier = ctx.id == m.dest_id || (ctx.eligible() && self.valid_route(ctx, m.dest_id).is_some());
        if replier {
            self.seen.insert(key);
            self.routes.reverse.insert(key, from);
            out.unicast(
                from,
                Message::Rlrp(RlrpMessage {
                    source_id: m.source_id,
                    dest_id: m.dest_id,
                    broadcast_id: m.broadcast_id,
                    next_hop_id: from,
                }),
            );
            return;
        }
        if !m.front_relatives.contains(&ctx.id) {
            out.note(Note::Discarded { kind: MessageKind::Rlrq, reason: "not_front_relative" });
            return;
        }
        if rssi < ctx.params.rssi_threshold {
            out.note(Note::Discarded { kind: MessageKind::Rlrq, reason: "weak_signal" });
            return;
        }
        if !ctx.eligible() {
            out.note(Note::Discarded { kind: MessageKind::Rlrq, reason: "energy_gate" });
            return;
        }
        let p = ctx.params;
        let dp = distance(m.prev_hop_position, ctx.destination_position);
        let dn = distance(ctx.position, ctx.destination_position);
        let (Ok(gd), Ok(vrl)) = (
            geographic_distance_metric(dp, dn, p.max_range),
            relative_speed_metric(m.prev_hop_speed, ctx.velocity.speed, p.max_speed),
        ) else {
            self.anomalies += 1;
            out.note(Note::Anomaly("metric_config"));
            return;
        };
        let metric = composite_metric(gd, vrl, p.alpha, p.beta);
        let delay = contention_delay(metric, ctx.id, p.contention_slot);
        self.seen.insert(key);
        self.routes.reverse.insert(key, from);
        let token = self.alloc(TimerKind::Contention(key));
        let fire_time = ctx.now + delay;
        self.contention.insert(key, ContentionTimer { fire_time, key, cached: m, token });
        out.timer(delay, token);
        out.note(Note::ContentionScheduled { key, metric, gd, vrl, fire_at: fire_time });
    }

    fn on_contention_fire(&mut self, ctx: &NodeCtx<'_>, key: DiscoveryKey, out: &mut Outbox) {
        let Some(t) = self.contention.remove(&key) else { return };
        if !ctx.eligible() {
            out.note(Note::Discarded { kind: MessageKind::Rlrq, reason: "energy_gate" });
            return;
        }
        let msg = RlrqMessage {
            prev_hop_id: ctx.id,
            prev_hop_position: ctx.position,
            prev_hop_speed: ctx.velocity.speed,
            hop_count: t.cached.hop_count.saturating_add(1),
            front_relatives: self.request_targets(ctx, key.dest),
            ..t.cached
        };
        self.in_flight.insert(key);
        out.note(Note::ContentionFired(key));
        out.broadcast(Message::Rlrq(msg));
    }

    fn on_rlrp(&mut self, ctx: &NodeCtx<'_>, from: NodeId, m: RlrpMessage, out: &mut Outbox) {
        let key = m.key();
        if ctx.id == m.source_id {
            self.routes.forward.insert(m.dest_id, ForwardEntry { next_hop: from, key });
            let packets = match self.source.complete(key, out) {
                Some(p) => p,
                None => self.source.take_buffer(),
            };
            for p in packets {
                out.unicast(from, Message::Data(p));
            }
            return;
        }
        let Some(&pred) = self.routes.reverse.get(&key) else {
            self.anomalies += 1;
            out.note(Note::Anomaly("reply_without_reverse_entry"));
            return;
        };
        if !ctx.eligible() {
            out.note(Note::Discarded { kind: MessageKind::Rlrp, reason: "energy_gate" });
            return;
        }
        self.routes.forward.insert(m.dest_id, ForwardEntry { next_hop: from, key });
        self.upstream.insert((m.source_id, m.dest_id), pred);
        out.unicast(pred, Message::Rlrp(RlrpMessage { next_hop_id: pred, ..m }));
    }

    /// Tells the source of a broken flow that its route is gone.
    fn report_break(&mut self, ctx: &NodeCtx<'_>, origin: NodeId, dest: NodeId, out: &mut Outbox) {
        if origin == ctx.id {
            if !self.source.buffer.is_empty() {
                self.discover(ctx, out);
            }
            return;
        }
        if let Some(&up) = self.upstream.get(&(origin, dest)) {
            if ctx.eligible() {
                out.unicast(up, Message::Rerr(RerrMessage { dest, origin, reporter: ctx.id }));
            }
        }
    }

    fn on_rerr(&mut self, ctx: &NodeCtx<'_>, from: NodeId, m: RerrMessage, out: &mut Outbox) {
        match self.routes.forward.get(&m.dest) {
            Some(e) if e.next_hop == from => {
                self.routes.forward.remove(&m.dest);
                out.note(Note::RouteInvalidated { dest: m.dest, next_hop: from });
            }
            _ => {}
        }
        self.report_break(ctx, m.origin, m.dest, out);
    }

    fn on_data(&mut self, ctx: &NodeCtx<'_>, p: DataPacket, out: &mut Outbox) {
        if ctx.id == p.dest {
            out.note(Note::DataDelivered { source: p.source, seq: p.seq, created: p.created });
            return;
        }
        if !ctx.eligible() {
            out.note(Note::DataDropped { reason: "energy_gate" });
            return;
        }
        match self.routes.next_hop(p.dest) {
            Some(nh) => out.unicast(nh, Message::Data(p)),
            None => {
                out.note(Note::DataDropped { reason: "no_route" });
                self.report_break(ctx, p.source, p.dest, out);
            }
        }
    }

    fn maintenance(&mut self, ctx: &NodeCtx<'_>, out: &mut Outbox) {
        let stale = self.neighbors.purge_stale(ctx.now, ctx.params.staleness_horizon());
        let mut broken = Vec::new();
        for id in stale {
            self.front.set(id, false);
            for (dest, e) in self.routes.invalidate_via(id) {
                out.note(Note::RouteInvalidated { dest, next_hop: e.next_hop });
                broken.push(dest);
            }
        }
        if broken.is_empty() {
            return;
        }
        self.zoom_out(ctx, "neighbor_expired", out);
        for dest in broken {
            let origins: Vec<NodeId> =
                self.upstream.keys().filter(|(_, d)| *d == dest).map(|(o, _)| *o).collect();
            for origin in origins {
                self.report_break(ctx, origin, dest, out);
            }
            if dest == ctx.destination && !self.source.buffer.is_empty() {
                self.discover(ctx, out);
            }
        }
    }
}

impl RoutingProtocol for RlprNode {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Rlpr
    }

    fn energy_gated(&self) -> bool {
        true
    }

    fn on_hello_tick(&mut self, ctx: &NodeCtx<'_>, out: &mut Outbox) {
        let token = self.alloc(TimerKind::Maintenance);
        out.timer(ctx.params.hello_interval / 2.0, token);
        if ctx.eligible() {
            out.broadcast(Message::Hello(Self::hello(ctx)));
        }
    }

    fn on_receive(&mut self, ctx: &NodeCtx<'_>, from: NodeId, msg: Message, rssi: f64, out: &mut Outbox) {
        match msg {
            Message::Hello(h) | Message::ZoomOut(h) => self.on_hello_receive(ctx, &h),
            Message::Rlrq(m) => self.on_rlrq(ctx, from, m, rssi, out),
            Message::Rlrp(m) => self.on_rlrp(ctx, from, m, out),
            Message::Rerr(m) => self.on_rerr(ctx, from, m, out),
            Message::Data(p) => self.on_data(ctx, p, out),
            other => out.note(Note::Discarded { kind: other.kind(), reason: "foreign_protocol" }),
        }
    }

    fn on_timer(&mut self, ctx: &NodeCtx<'_>, token: u64, out: &mut Outbox) {
        match self.timers.remove(&token) {
            Some(TimerKind::Contention(key)) => self.on_contention_fire(ctx, key, out),
            Some(TimerKind::Discovery) => {
                let next = self.alloc(TimerKind::Discovery);
                let step = self.source.on_timeout(ctx, token, next, out);
                if step == SourceStep::Idle {
                    self.timers.remove(&next);
                }
                self.step(ctx, step, out);
            }
            Some(TimerKind::Maintenance) => self.maintenance(ctx, out),
            None => {}
        }
    }

    fn on_app_data(&mut self, ctx: &NodeCtx<'_>, packet: DataPacket, out: &mut Outbox) {
        if !ctx.eligible() {
            out.note(Note::DataDropped { reason: "energy_gate" });
            return;
        }
        if let Some(nh) = self.valid_route(ctx, packet.dest) {
            out.unicast(nh, Message::Data(packet));
            return;
        }
        if self.source.buffer_packet(packet, out) {
            self.discover(ctx, out);
        }
    }

    fn on_link_failure(&mut self, ctx: &NodeCtx<'_>, to: NodeId, msg: Message, out: &mut Outbox) {
        let Message::Data(p) = msg else {
            out.note(Note::Discarded { kind: msg.kind(), reason: "link_failure" });
            return;
        };
        self.neighbors.remove(to);
        self.front.set(to, false);
        for (dest, e) in self.routes.invalidate_via(to) {
            out.note(Note::RouteInvalidated { dest, next_hop: e.next_hop });
        }
        self.zoom_out(ctx, "unicast_failure", out);
        if p.source == ctx.id {
            self.source.requeue_front(p);
            self.discover(ctx, out);
        } else {
            out.note(Note::DataDropped { reason: "link_failure" });
            self.report_break(ctx, p.source, p.dest, out);
        }
    }

    fn confirm_send(&mut self, _ctx: &NodeCtx<'_>, msg: &Message) -> bool {
        if let Message::Rlrq(m) = msg {
            let key = m.key();
            self.in_flight.remove(&key);
            if self.withdrawn.remove(&key) {
                return false;
            }
        }
        true
    }

    fn next_hop(&self, dest: NodeId) -> Option<NodeId> {
        self.routes.next_hop(dest)
    }
}
