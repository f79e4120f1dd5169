use super::rarp::{best_offer, expected_connection_time, RouteOffer, UtilityWeights};
use crate::protocol::{DuplicateCache, NodeCtx, Note, Outbox, ProtocolKind, RoutingProtocol, SourceAgent, SourceStep};
use crate::wire::{
    DataPacket, DiscoveryKey, HelloMessage, Message, MessageKind, NodeId, RarpExtension, RerrMessage, RreqMessage,
    RrepMessage,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Which reply policy the destination runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Reply to the first request copy and to any copy with strictly fewer hops.
    Aodv,
    /// Collect copies for a window, then reply once to the best connection-time utility.
    RarpLite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteEntry {
    pub next_hop: NodeId,
    pub hops: u16,
    pub seq: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TimerKind {
    Discovery,
    ReplyWindow(DiscoveryKey),
}

/// Flooding-based on-demand routing agent (AODV or RARP-lite).
#[derive(Debug, Clone)]
pub struct AodvNode {
    flavor: Flavor,
    rng: ChaCha8Rng,
    seq: u32,
    neighbors: BTreeMap<NodeId, f64>,
    seen: DuplicateCache<DiscoveryKey>,
    pub reverse: BTreeMap<NodeId, RouteEntry>,
    pub forward: BTreeMap<NodeId, RouteEntry>,
    /// Destination side: best hop count answered so far per discovery.
    answered: BTreeMap<DiscoveryKey, u16>,
    /// Destination side, RARP-lite: offers collected per discovery.
    offers: BTreeMap<DiscoveryKey, Vec<RouteOffer>>,
    /// Destination side, RARP-lite: the first copy of each request, answered at window close.
    requests: BTreeMap<DiscoveryKey, RreqMessage>,
    timers: BTreeMap<u64, TimerKind>,
    next_token: u64,
    source: SourceAgent,
    pub anomalies: u64,
}

impl AodvNode {
    pub fn new(flavor: Flavor, rng: ChaCha8Rng, queue_len: usize, duplicate_cache: usize) -> Self {
        Self {
            flavor,
            rng,
            seq: 0,
            neighbors: BTreeMap::new(),
            seen: DuplicateCache::new(duplicate_cache),
            reverse: BTreeMap::new(),
            forward: BTreeMap::new(),
            answered: BTreeMap::new(),
            offers: BTreeMap::new(),
            requests: BTreeMap::new(),
            timers: BTreeMap::new(),
            next_token: 0,
            source: SourceAgent::new(queue_len),
            anomalies: 0,
        }
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    fn alloc(&mut self, kind: TimerKind) -> u64 {
        self.next_token += 1;
        self.timers.insert(self.next_token, kind);
        self.next_token
    }

    fn weights(ctx: &NodeCtx<'_>) -> UtilityWeights {
        UtilityWeights {
            ect_weight: ctx.params.rarp_ect_weight,
            ect_cap: ctx.params.rarp_ect_cap,
            hop_penalty: ctx.params.rarp_hop_penalty,
            energy_weight: ctx.params.rarp_energy_weight,
            energy_cap: ctx.params.rarp_energy_cap,
        }
    }

    fn fresh(&self, ctx: &NodeCtx<'_>, id: NodeId) -> bool {
        self.neighbors.get(&id).is_some_and(|t| ctx.now - t <= ctx.params.staleness_horizon())
    }

    fn valid_route(&self, ctx: &NodeCtx<'_>, dest: NodeId) -> Option<RouteEntry> {
        self.forward.get(&dest).copied().filter(|e| e.next_hop == dest || self.fresh(ctx, e.next_hop))
    }

    fn extension(&self, ctx: &NodeCtx<'_>, min_ect: f64, min_energy: f64) -> Option<RarpExtension> {
        match self.flavor {
            Flavor::Aodv => None,
            Flavor::RarpLite => Some(RarpExtension {
                sender_position: ctx.position,
                sender_velocity: ctx.velocity.components(),
                min_ect,
                min_energy,
            }),
        }
    }

    fn send_request(&mut self, ctx: &NodeCtx<'_>, key: DiscoveryKey, out: &mut Outbox) {
        self.seen.insert(key);
        self.seq = self.seq.wrapping_add(1);
        let dest_seq = self.forward.get(&key.dest).map_or(0, |e| e.seq);
        let msg = RreqMessage {
            rreq_id: key.broadcast_id,
            orig: ctx.id,
            orig_seq: self.seq,
            dest: key.dest,
            dest_seq,
            hop_count: 0,
            rarp: self.extension(ctx, f64::INFINITY, f64::INFINITY),
        };
        out.broadcast(Message::Rreq(msg));
    }

    fn discover(&mut self, ctx: &NodeCtx<'_>, out: &mut Outbox) {
        let token = self.alloc(TimerKind::Discovery);
        let step = self.source.maybe_discover(ctx, ctx.destination, token, out);
        match step {
            SourceStep::Discover(key) => self.send_request(ctx, key, out),
            SourceStep::Idle => {
                self.timers.remove(&token);
            }
        }
    }

    fn reply(to: NodeId, m: &RreqMessage, hop_count: u16, dest_seq: u32, out: &mut Outbox) {
        out.unicast(
            to,
            Message::Rrep(RrepMessage { orig: m.orig, dest: m.dest, dest_seq, rreq_id: m.rreq_id, hop_count }),
        );
    }

    fn learn_reverse(&mut self, orig: NodeId, from: NodeId, hops: u16, seq: u32) {
        let better = match self.reverse.get(&orig) {
            None => true,
            Some(e) => seq > e.seq || (seq == e.seq && hops < e.hops),
        };
        if better {
            self.reverse.insert(orig, RouteEntry { next_hop: from, hops, seq });
        }
    }

    fn on_rreq(&mut self, ctx: &NodeCtx<'_>, from: NodeId, m: RreqMessage, out: &mut Outbox) {
        if m.orig == ctx.id {
            out.note(Note::Discarded { kind: MessageKind::Rreq, reason: "duplicate" });
            return;
        }
        let key = m.key();
        let hops = m.hop_count.saturating_add(1);
        let min_ect = m.rarp.map(|x| {
            let link = expected_connection_time(
                x.sender_position,
                x.sender_velocity,
                ctx.position,
                ctx.velocity.components(),
                ctx.params.max_range,
            );
            (x.min_ect.min(link), x.min_energy)
        });
        if ctx.id == m.dest {
            let first = self.seen.insert(key);
            match self.flavor {
                Flavor::Aodv => {
                    let better = self.answered.get(&key).is_none_or(|best| hops < *best);
                    if first || better {
                        self.answered.insert(key, hops);
                        self.reverse.insert(m.orig, RouteEntry { next_hop: from, hops, seq: m.orig_seq });
                        self.seq = self.seq.max(m.dest_seq).wrapping_add(1);
                        let seq = self.seq;
                        Self::reply(from, &m, 0, seq, out);
                    } else {
                        out.note(Note::Discarded { kind: MessageKind::Rreq, reason: "duplicate" });
                    }
                }
                Flavor::RarpLite => {
                    let offer = RouteOffer {
                        last_hop: from,
                        min_ect: min_ect.map_or(f64::INFINITY, |x| x.0),
                        min_energy: min_ect.map_or(f64::INFINITY, |x| x.1),
                        hops,
                        arrived: ctx.now,
                    };
                    let list = self.offers.entry(key).or_default();
                    list.push(offer);
                    if first {
                        let token = self.alloc(TimerKind::ReplyWindow(key));
                        out.timer(ctx.params.rarp_window, token);
                        self.learn_reverse(m.orig, from, hops, m.orig_seq);
                        self.requests.insert(key, m);
                    }
                }
            }
            return;
        }
        if !self.seen.insert(key) {
            out.note(Note::Discarded { kind: MessageKind::Rreq, reason: "duplicate" });
            return;
        }
        self.learn_reverse(m.orig, from, hops, m.orig_seq);
        if self.flavor == Flavor::Aodv {
            if let Some(e) = self.valid_route(ctx, m.dest) {
                if e.seq >= m.dest_seq {
                    Self::reply(from, &m, e.hops, e.seq, out);
                    return;
                }
            }
        }
        let jitter = if ctx.params.broadcast_jitter > 0.0 {
            self.rng.gen_range(0.0..ctx.params.broadcast_jitter)
        } else {
            0.0
        };
        let fwd = RreqMessage {
            hop_count: hops,
            rarp: min_ect.and_then(|(e, en)| self.extension(ctx, e, en.min(ctx.energy))),
            ..m
        };
        out.broadcast_after(Message::Rreq(fwd), jitter);
    }

    fn close_window(&mut self, ctx: &NodeCtx<'_>, key: DiscoveryKey, out: &mut Outbox) {
        let offers = self.offers.remove(&key).unwrap_or_default();
        let Some(m) = self.requests.remove(&key) else { return };
        match best_offer(&offers, &Self::weights(ctx)) {
            Some(best) => {
                self.reverse.insert(m.orig, RouteEntry { next_hop: best.last_hop, hops: best.hops, seq: m.orig_seq });
                self.seq = self.seq.max(m.dest_seq).wrapping_add(1);
                let seq = self.seq;
                Self::reply(best.last_hop, &m, 0, seq, out);
            }
            None => out.note(Note::Anomaly("reply_window_without_offers")),
        }
    }

    fn on_rrep(&mut self, ctx: &NodeCtx<'_>, from: NodeId, m: RrepMessage, out: &mut Outbox) {
        let hops = m.hop_count.saturating_add(1);
        let install = match self.forward.get(&m.dest) {
            None => true,
            Some(e) => m.dest_seq > e.seq || (m.dest_seq == e.seq && hops < e.hops) || !self.fresh(ctx, e.next_hop),
        };
        if install {
            self.forward.insert(m.dest, RouteEntry { next_hop: from, hops, seq: m.dest_seq });
        }
        if ctx.id == m.orig {
            let key = m.key();
            let packets = match self.source.complete(key, out) {
                Some(p) => p,
                None => self.source.take_buffer(),
            };
            if let Some(e) = self.forward.get(&m.dest).copied() {
                for p in packets {
                    out.unicast(e.next_hop, Message::Data(p));
                }
            }
            return;
        }
        match self.reverse.get(&m.orig) {
            Some(e) => out.unicast(e.next_hop, Message::Rrep(RrepMessage { hop_count: hops, ..m })),
            None => {
                self.anomalies += 1;
                out.note(Note::Anomaly("reply_without_reverse_route"));
            }
        }
    }

    fn report_break(&mut self, ctx: &NodeCtx<'_>, origin: NodeId, dest: NodeId, out: &mut Outbox) {
        if origin == ctx.id {
            if !self.source.buffer.is_empty() {
                self.discover(ctx, out);
            }
            return;
        }
        if let Some(e) = self.reverse.get(&origin) {
            out.unicast(e.next_hop, Message::Rerr(RerrMessage { dest, origin, reporter: ctx.id }));
        }
    }

    fn on_rerr(&mut self, ctx: &NodeCtx<'_>, from: NodeId, m: RerrMessage, out: &mut Outbox) {
        if self.forward.get(&m.dest).is_some_and(|e| e.next_hop == from) {
            self.forward.remove(&m.dest);
            out.note(Note::RouteInvalidated { dest: m.dest, next_hop: from });
        }
        self.report_break(ctx, m.origin, m.dest, out);
    }

    fn on_data(&mut self, ctx: &NodeCtx<'_>, p: DataPacket, out: &mut Outbox) {
        if ctx.id == p.dest {
            out.note(Note::DataDelivered { source: p.source, seq: p.seq, created: p.created });
            return;
        }
        match self.forward.get(&p.dest) {
            Some(e) => out.unicast(e.next_hop, Message::Data(p)),
            None => {
                out.note(Note::DataDropped { reason: "no_route" });
                self.report_break(ctx, p.source, p.dest, out);
            }
        }
    }
}

impl RoutingProtocol for AodvNode {
    fn kind(&self) -> ProtocolKind {
        match self.flavor {
            Flavor::Aodv => ProtocolKind::Aodv,
            Flavor::RarpLite => ProtocolKind::RarpLite,
        }
    }

    fn on_hello_tick(&mut self, ctx: &NodeCtx<'_>, out: &mut Outbox) {
        out.broadcast(Message::Hello(HelloMessage {
            sender_id: ctx.id,
            position: ctx.position,
            speed: ctx.velocity.speed,
            residual_energy: ctx.energy,
            distance_to_dest: crate::phys::distance(ctx.position, ctx.destination_position),
            timestamp: ctx.now,
        }));
    }

    fn on_receive(&mut self, ctx: &NodeCtx<'_>, from: NodeId, msg: Message, _rssi: f64, out: &mut Outbox) {
        match msg {
            Message::Hello(h) | Message::ZoomOut(h) => {
                self.neighbors.insert(h.sender_id, ctx.now);
            }
            Message::Rreq(m) => self.on_rreq(ctx, from, m, out),
            Message::Rrep(m) => self.on_rrep(ctx, from, m, out),
            Message::Rerr(m) => self.on_rerr(ctx, from, m, out),
            Message::Data(p) => self.on_data(ctx, p, out),
            other => out.note(Note::Discarded { kind: other.kind(), reason: "foreign_protocol" }),
        }
    }

    fn on_timer(&mut self, ctx: &NodeCtx<'_>, token: u64, out: &mut Outbox) {
        match self.timers.remove(&token) {
            Some(TimerKind::Discovery) => {
                let next = self.alloc(TimerKind::Discovery);
                match self.source.on_timeout(ctx, token, next, out) {
                    SourceStep::Discover(key) => self.send_request(ctx, key, out),
                    SourceStep::Idle => {
                        self.timers.remove(&next);
                    }
                }
            }
            Some(TimerKind::ReplyWindow(key)) => self.close_window(ctx, key, out),
            None => {}
        }
    }

    fn on_app_data(&mut self, ctx: &NodeCtx<'_>, packet: DataPacket, out: &mut Outbox) {
        if let Some(e) = self.valid_route(ctx, packet.dest) {
            out.unicast(e.next_hop, Message::Data(packet));
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
        self.neighbors.remove(&to);
        let broken: Vec<NodeId> = self.forward.iter().filter(|(_, e)| e.next_hop == to).map(|(d, _)| *d).collect();
        for dest in broken {
            self.forward.remove(&dest);
            out.note(Note::RouteInvalidated { dest, next_hop: to });
        }
        if p.source == ctx.id {
            self.source.requeue_front(p);
            self.discover(ctx, out);
        } else {
            out.note(Note::DataDropped { reason: "link_failure" });
            self.report_break(ctx, p.source, p.dest, out);
        }
    }

    fn next_hop(&self, dest: NodeId) -> Option<NodeId> {
        self.forward.get(&dest).map(|e| e.next_hop)
    }
}
