//! Discrete-event kernel: clock, event queue, shared broadcast channel with
//! collisions, a simplified CSMA MAC, node lifecycle and the event trace.

pub mod event;
pub mod rng;
pub mod trace;

pub use event::{EngineError, Event, EventKind, EventQueue};
pub use rng::{stream, Subsystem};
pub use trace::{RunMeta, Trace, TraceError, TraceEvent, TraceLevel, TraceRecord};

use crate::baselines::{AodvNode, Flavor};
use crate::config::ScenarioConfig;
use crate::phys::{
    advance_waypoint, distance, EnergyBudget, EnergyUse, MobilityParams, MobilityState, Position, RadioModel,
    SPEED_OF_LIGHT,
};
use crate::protocol::{Action, NodeCtx, Note, Outbox, ProtocolKind, ProtocolParams, RoutingProtocol};
use crate::rlpr::RlprNode;
use crate::scenario::Layout;
use crate::wire::{DataPacket, Message, MessageKind, NodeId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

#[derive(Debug, Clone)]
struct Frame {
    dst: Option<NodeId>,
    msg: Message,
    bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
struct Reception {
    node: NodeId,
    end: f64,
    rssi: f64,
    ok: bool,
    reason: &'static str,
}

#[derive(Debug)]
struct Transmission {
    sender: NodeId,
    frame: Frame,
    receptions: Vec<Reception>,
    pending: usize,
}

/// An arrival in progress at a receiver.
#[derive(Debug, Clone, Copy)]
struct Arrival {
    tx: u64,
    start: f64,
    end: f64,
}

struct SimNode {
    id: NodeId,
    mobility: MobilityState,
    mobility_rng: ChaCha8Rng,
    synced_at: f64,
    energy: EnergyBudget,
    alive: bool,
    agent: Box<dyn RoutingProtocol>,
    mac_rng: ChaCha8Rng,
    queue: VecDeque<Frame>,
    mac_armed: bool,
    tx_until: f64,
    arrivals: Vec<Arrival>,
    source: bool,
    packets_sent: u32,
    last_idle: f64,
}

/// Static channel and MAC parameters.
#[derive(Debug, Clone)]
struct Channel {
    radio: RadioModel,
    data_rate: f64,
    cw: u32,
    slot: f64,
    queue_len: usize,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    params: Arc<ProtocolParams>,
    channel: Channel,
    mobility: MobilityParams,
    queue: EventQueue,
    nodes: Vec<SimNode>,
    destination: NodeId,
    transmissions: BTreeMap<u64, Transmission>,
    next_tx: u64,
    level: TraceLevel,
    records: Vec<TraceRecord>,
    meta: RunMeta,
    traffic_rng: ChaCha8Rng,
    /// Transmission being handed to a receiver, for contention trace records.
    current_rx: Option<(u64, NodeId)>,
}

fn make_agent(kind: ProtocolKind, seed: u64, id: NodeId, p: &ProtocolParams) -> Box<dyn RoutingProtocol> {
    let rng = stream(seed, Subsystem::Protocol, id.0);
    match kind {
        ProtocolKind::Rlpr => Box::new(RlprNode::new(p.queue_len, p.duplicate_cache)),
        ProtocolKind::Aodv => Box::new(AodvNode::new(Flavor::Aodv, rng, p.queue_len, p.duplicate_cache)),
        ProtocolKind::RarpLite => Box::new(AodvNode::new(Flavor::RarpLite, rng, p.queue_len, p.duplicate_cache)),
    }
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, layout: &Layout, seed: u64) -> Result<Self, EngineError> {
        cfg.validate().map_err(|e| EngineError::Scenario(e.to_string()))?;
        let radio = cfg.radio().map_err(|e| EngineError::Scenario(e.to_string()))?;
        let params = cfg.protocol_params();
        let mobility = cfg.mobility();
        let (tx_c, rx_c, idle) = (cfg.tx_cost_per_bit, cfg.rx_cost_per_bit, cfg.idle_drain);

        let mut nodes = Vec::new();
        let mut failures = Vec::new();
        let destination;
        match layout {
            Layout::Random => {
                destination = NodeId(0);
                let mut placement = stream(seed, Subsystem::Placement, 0);
                let mut energy_rng = stream(seed, Subsystem::Energy, 0);
                for i in 0..cfg.node_count {
                    let id = NodeId(i as u32);
                    let mut mrng = stream(seed, Subsystem::Mobility, id.0);
                    let (state, energy) = if i == 0 {
                        (MobilityState::stationary(Position::new(cfg.dest_x, cfg.dest_y)), cfg.dest_energy)
                    } else {
                        let e = if cfg.initial_energy_max > cfg.initial_energy_min {
                            energy_rng.gen_range(cfg.initial_energy_min..cfg.initial_energy_max)
                        } else {
                            cfg.initial_energy_min
                        };
                        (MobilityState::random(&mut mrng, &mobility), e)
                    };
                    // Keep the placement stream in step with node count.
                    let _: f64 = placement.gen();
                    nodes.push((id, state, mrng, energy, i >= 1 && i <= cfg.source_count));
                }
            }
            Layout::Scripted(s) => {
                destination = s.destination;
                if s.destination.0 as usize >= s.nodes.len() {
                    return Err(EngineError::Scenario("scripted destination is not a node".into()));
                }
                for (i, n) in s.nodes.iter().enumerate() {
                    let id = NodeId(i as u32);
                    let state = match n.leg {
                        None => MobilityState::stationary(n.position),
                        Some((to, speed)) => MobilityState::heading_to(n.position, to, speed),
                    };
                    let mrng = stream(seed, Subsystem::Mobility, id.0);
                    nodes.push((id, state, mrng, n.energy, s.sources.contains(&id)));
                }
                failures = s.failures.clone();
            }
        }

        let sim_nodes: Vec<SimNode> = nodes
            .into_iter()
            .map(|(id, mobility_state, mobility_rng, energy, source)| SimNode {
                id,
                mobility: mobility_state,
                mobility_rng,
                synced_at: 0.0,
                energy: EnergyBudget::new(energy, tx_c, rx_c, idle),
                alive: true,
                agent: make_agent(cfg.protocol, seed, id, &params),
                mac_rng: stream(seed, Subsystem::Mac, id.0),
                queue: VecDeque::new(),
                mac_armed: false,
                tx_until: 0.0,
                arrivals: Vec::new(),
                source,
                packets_sent: 0,
                last_idle: 0.0,
            })
            .collect();

        let meta = RunMeta {
            protocol: cfg.protocol,
            seed,
            node_count: sim_nodes.len(),
            source_count: sim_nodes.iter().filter(|n| n.source).count(),
            destination,
            pause_time: cfg.pause_time,
            sim_duration: cfg.sim_duration,
            energy_threshold: cfg.energy_threshold,
            max_range: cfg.max_range,
            trace_level: cfg.trace_level,
            initial_energy: sim_nodes.iter().map(|n| n.energy.residual).collect(),
        };

        let mut sim = Simulation {
            cfg: cfg.clone(),
            params: Arc::new(params),
            channel: Channel {
                radio,
                data_rate: cfg.data_rate,
                cw: cfg.cw,
                slot: cfg.slot_time_us * 1e-6,
                queue_len: cfg.queue_len,
            },
            mobility,
            queue: EventQueue::default(),
            nodes: sim_nodes,
            destination,
            transmissions: BTreeMap::new(),
            next_tx: 0,
            level: cfg.trace_level,
            records: Vec::new(),
            meta,
            traffic_rng: stream(seed, Subsystem::Traffic, 0),
            current_rx: None,
        };
        sim.prime(seed, &failures)?;
        Ok(sim)
    }

    fn prime(&mut self, seed: u64, failures: &[(NodeId, f64)]) -> Result<(), EngineError> {
        self.queue.schedule(self.cfg.mobility_tick, EventKind::MobilityTick)?;
        for i in 0..self.nodes.len() {
            let id = NodeId(i as u32);
            let phase: f64 = stream(seed, Subsystem::HelloPhase, id.0).gen_range(0.0..self.cfg.hello_interval);
            self.queue.schedule(phase, EventKind::HelloTick(id))?;
            if self.nodes[i].source && self.cfg.cbr_rate > 0.0 {
                let offset: f64 = self.traffic_rng.gen_range(0.0..1.0 / self.cfg.cbr_rate);
                self.queue.schedule(self.cfg.traffic_start + offset, EventKind::TrafficArrival(id))?;
            }
        }
        for &(id, at) in failures {
            self.queue.schedule(at, EventKind::NodeFailure(id))?;
        }
        Ok(())
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    /// Hands `msg` to `node`'s MAC at time `at`, bypassing its routing
    /// agent. Meant for channel-level experiments.
    pub fn inject(&mut self, at: f64, node: NodeId, dst: Option<NodeId>, msg: Message) -> Result<(), EngineError> {
        if node.0 as usize >= self.nodes.len() {
            return Err(EngineError::Scenario(format!("no node {}", node.0)));
        }
        self.queue.schedule(at, EventKind::Enqueue { node, dst, msg })
    }

    /// Runs to the configured duration and returns the trace.
    pub fn run(mut self) -> Result<Trace, EngineError> {
        let t_end = self.cfg.sim_duration;
        while let Some(t) = self.queue.peek_time() {
            if t > t_end {
                break;
            }
            let ev = self.queue.pop().expect("peeked");
            self.handle(ev)?;
        }
        // Settle positions and idle drain up to the end of the run.
        self.force_now(t_end);
        self.idle_all(t_end);
        let residual = self.nodes.iter().map(|n| n.energy.residual).collect();
        self.push(t_end, TraceEvent::End { residual });
        Ok(Trace { meta: self.meta, records: self.records })
    }

    fn force_now(&mut self, t: f64) {
        for i in 0..self.nodes.len() {
            self.sync(i, t);
        }
    }

    fn push(&mut self, t: f64, event: TraceEvent) {
        if self.level == TraceLevel::Full || event.in_summary() {
            self.records.push(TraceRecord { t, event });
        }
    }

    fn sync(&mut self, i: usize, t: f64) {
        let n = &mut self.nodes[i];
        let dt = t - n.synced_at;
        if dt > 0.0 {
            if !n.mobility.fixed {
                advance_waypoint(&mut n.mobility, &mut n.mobility_rng, &self.mobility, dt);
            }
            n.synced_at = t;
        }
    }

    fn position(&mut self, i: usize) -> Position {
        let t = self.now();
        self.sync(i, t);
        self.nodes[i].mobility.position
    }

    fn backoff(&mut self, i: usize) -> f64 {
        let slots = self.nodes[i].mac_rng.gen_range(0..self.channel.cw);
        f64::from(slots) * self.channel.slot
    }

    fn kill(&mut self, i: usize) {
        let n = &mut self.nodes[i];
        if !n.alive {
            return;
        }
        n.alive = false;
        n.queue.clear();
        let id = n.id;
        let t = self.now();
        self.push(t, TraceEvent::Death { node: id });
    }

    fn debit(&mut self, i: usize, kind: EnergyUse, bits: u64, dt: f64) -> (f64, f64, bool) {
        let before = self.nodes[i].energy.residual;
        let d = self.nodes[i].energy.debit(kind, bits, dt);
        (before, d.amount, d.died)
    }

    fn idle_all(&mut self, t: f64) {
        for i in 0..self.nodes.len() {
            if !self.nodes[i].alive {
                continue;
            }
            let dt = t - self.nodes[i].last_idle;
            self.nodes[i].last_idle = t;
            if dt <= 0.0 {
                continue;
            }
            let (_, cost, died) = self.debit(i, EnergyUse::Idle, 0, dt);
            let id = self.nodes[i].id;
            self.push(t, TraceEvent::Idle { node: id, cost });
            if died {
                self.kill(i);
            }
        }
    }

    fn handle(&mut self, ev: Event) -> Result<(), EngineError> {
        match ev.kind {
            EventKind::TxStart(n) => self.tx_start(n.0 as usize),
            EventKind::TxEnd(tx) => self.tx_end(tx),
            EventKind::Deliver { tx, node } => self.deliver(tx, node.0 as usize),
            EventKind::Timer { node, token } => {
                let i = node.0 as usize;
                if self.nodes[i].alive {
                    self.dispatch(i, |a, ctx, out| a.on_timer(ctx, token, out))?;
                }
                Ok(())
            }
            EventKind::Enqueue { node, dst, msg } => {
                let i = node.0 as usize;
                if self.nodes[i].alive {
                    self.enqueue(i, dst, msg)?;
                }
                Ok(())
            }
            EventKind::MobilityTick => {
                let t = self.now();
                self.force_now(t);
                self.idle_all(t);
                self.push(t, TraceEvent::Mobility);
                self.queue.schedule(t + self.cfg.mobility_tick, EventKind::MobilityTick)
            }
            EventKind::HelloTick(n) => {
                let i = n.0 as usize;
                if self.nodes[i].alive {
                    self.dispatch(i, |a, ctx, out| a.on_hello_tick(ctx, out))?;
                    let t = self.now() + self.cfg.hello_interval;
                    self.queue.schedule(t, EventKind::HelloTick(n))?;
                }
                Ok(())
            }
            EventKind::TrafficArrival(n) => self.traffic(n.0 as usize),
            EventKind::NodeFailure(n) => {
                let i = n.0 as usize;
                if self.nodes[i].alive {
                    let before = self.nodes[i].energy.residual;
                    self.nodes[i].energy.debit(EnergyUse::Idle, 0, f64::INFINITY);
                    let t = self.now();
                    self.push(t, TraceEvent::Idle { node: n, cost: before });
                    self.kill(i);
                }
                Ok(())
            }
        }
    }

    fn traffic(&mut self, i: usize) -> Result<(), EngineError> {
        if !self.nodes[i].alive {
            return Ok(());
        }
        let n = &mut self.nodes[i];
        let seq = n.packets_sent;
        n.packets_sent += 1;
        let packet = DataPacket {
            source: n.id,
            dest: self.destination,
            seq,
            created: self.queue.now(),
            payload_len: self.cfg.packet_size,
        };
        let limit = self.cfg.packets_per_source;
        let id = n.id;
        let more = limit == 0 || n.packets_sent < limit;
        self.dispatch(i, |a, ctx, out| a.on_app_data(ctx, packet, out))?;
        if more {
            let t = self.now() + 1.0 / self.cfg.cbr_rate;
            self.queue.schedule(t, EventKind::TrafficArrival(id))?;
        }
        Ok(())
    }

    /// Hands one stimulus to node `i`'s agent and carries out its actions.
    fn dispatch<F>(&mut self, i: usize, f: F) -> Result<(), EngineError>
    where
        F: FnOnce(&mut dyn RoutingProtocol, &NodeCtx<'_>, &mut Outbox),
    {
        let position = self.position(i);
        let dest_position = self.position(self.destination.0 as usize);
        let params = Arc::clone(&self.params);
        let n = &mut self.nodes[i];
        let ctx = NodeCtx {
            id: n.id,
            now: self.queue.now(),
            position,
            velocity: n.mobility.velocity(),
            energy: n.energy.residual,
            destination: self.destination,
            destination_position: dest_position,
            params: &params,
        };
        let mut out = Outbox::default();
        f(n.agent.as_mut(), &ctx, &mut out);
        self.apply(i, out)
    }

    fn apply(&mut self, i: usize, mut out: Outbox) -> Result<(), EngineError> {
        let id = self.nodes[i].id;
        let now = self.now();
        for action in out.drain() {
            match action {
                Action::Broadcast { msg, delay } => self.send(i, None, msg, delay)?,
                Action::Unicast { to, msg, delay } => self.send(i, Some(to), msg, delay)?,
                Action::Timer { delay, token } => {
                    self.queue.schedule(now + delay, EventKind::Timer { node: id, token })?;
                }
                Action::Note(note) => self.note(i, note),
            }
        }
        Ok(())
    }

    fn send(&mut self, i: usize, dst: Option<NodeId>, msg: Message, delay: f64) -> Result<(), EngineError> {
        if delay > 0.0 {
            let node = self.nodes[i].id;
            let at = self.now() + delay;
            self.queue.schedule(at, EventKind::Enqueue { node, dst, msg })
        } else {
            self.enqueue(i, dst, msg)
        }
    }

    fn note(&mut self, i: usize, note: Note) {
        let node = self.nodes[i].id;
        let t = self.now();
        let ev = match note {
            Note::DiscoveryStarted(key) => TraceEvent::DiscoveryStart { node, key },
            Note::DiscoveryCompleted(key) => {
                self.push(t, TraceEvent::DiscoveryEnd { node, key, ok: true });
                self.route_record(i, key)
            }
            Note::DiscoveryFailed(key) => TraceEvent::DiscoveryEnd { node, key, ok: false },
            Note::ContentionScheduled { key, metric, gd, vrl, fire_at } => {
                let (tx, from) = self.current_rx.unwrap_or((0, node));
                TraceEvent::ContentionSet { node, key, metric, gd, vrl, fire_at, tx, from }
            }
            Note::ContentionCancelled(key) => TraceEvent::ContentionCancel { node, key },
            Note::ContentionFired(key) => TraceEvent::ContentionFire { node, key },
            Note::Discarded { kind, reason } => TraceEvent::Discard { node, msg: kind, reason: reason.into() },
            Note::RouteInvalidated { dest, next_hop } => TraceEvent::RouteInvalidated { node, dest, via: next_hop },
            Note::ZoomOut { cause } => TraceEvent::ZoomOut { node, cause: cause.into() },
            Note::DataDelivered { source, seq, created } => {
                TraceEvent::Delivered { node, source, seq, latency: t - created }
            }
            Note::DataDropped { reason } => TraceEvent::Drop { node, msg: MessageKind::Data, reason: reason.into(), tx: None, cost: None },
            Note::Anomaly(reason) => TraceEvent::Anomaly { node, reason: reason.into() },
        };
        self.push(t, ev);
    }

    /// Follows next hops from the source toward the destination.
    fn route_record(&mut self, i: usize, key: crate::wire::DiscoveryKey) -> TraceEvent {
        let mut path = vec![self.nodes[i].id];
        let mut max_hop: f64 = 0.0;
        let mut complete = false;
        let mut cur = i;
        for _ in 0..self.nodes.len() {
            let Some(nh) = self.nodes[cur].agent.next_hop(key.dest) else { break };
            let j = nh.0 as usize;
            if j >= self.nodes.len() || path.contains(&nh) {
                break;
            }
            let (a, b) = (self.position(cur), self.position(j));
            max_hop = max_hop.max(distance(a, b));
            path.push(nh);
            if nh == key.dest {
                complete = true;
                break;
            }
            cur = j;
        }
        TraceEvent::Route { node: self.nodes[i].id, key, path, complete, max_hop_m: max_hop }
    }

    fn enqueue(&mut self, i: usize, dst: Option<NodeId>, msg: Message) -> Result<(), EngineError> {
        let frame = Frame { dst, bytes: msg.encode(), msg };
        let control = frame.msg.kind().is_control();
        let cap = self.channel.queue_len;
        let n = &mut self.nodes[i];
        let first_data = n.queue.iter().position(|f| !f.msg.kind().is_control());
        let mut dropped = None;
        if n.queue.len() >= cap {
            match (control, first_data) {
                // Control frames jump the line and push out the newest data frame.
                (true, Some(_)) => {
                    let last_data = n.queue.iter().rposition(|f| !f.msg.kind().is_control()).expect("data present");
                    dropped = n.queue.remove(last_data).map(|f| f.msg.kind());
                }
                _ => {
                    let kind = frame.msg.kind();
                    let id = n.id;
                    let t = self.queue.now();
                    self.push(t, TraceEvent::Drop { node: id, msg: kind, reason: "queue_full".into(), tx: None, cost: None });
                    return Ok(());
                }
            }
        }
        let n = &mut self.nodes[i];
        if control {
            let pos = n.queue.iter().position(|f| !f.msg.kind().is_control()).unwrap_or(n.queue.len());
            n.queue.insert(pos, frame);
        } else {
            n.queue.push_back(frame);
        }
        let id = n.id;
        let armed = n.mac_armed;
        if let Some(kind) = dropped {
            let t = self.now();
            self.push(t, TraceEvent::Drop { node: id, msg: kind, reason: "queue_full".into(), tx: None, cost: None });
        }
        if !armed {
            self.nodes[i].mac_armed = true;
            let at = self.now() + self.backoff(i);
            self.queue.schedule(at, EventKind::TxStart(id))?;
        }
        Ok(())
    }

    /// Time until which node `i` senses the medium busy, if it is busy now.
    fn busy_until(&self, i: usize) -> Option<f64> {
        let now = self.now();
        let n = &self.nodes[i];
        let mut until = if n.tx_until > now { n.tx_until } else { f64::NEG_INFINITY };
        for a in &n.arrivals {
            if a.start <= now && a.end > now {
                until = until.max(a.end);
            }
        }
        (until > now).then_some(until)
    }

    fn tx_start(&mut self, i: usize) -> Result<(), EngineError> {
        let id = self.nodes[i].id;
        if !self.nodes[i].alive || self.nodes[i].queue.is_empty() {
            self.nodes[i].mac_armed = false;
            return Ok(());
        }
        if let Some(until) = self.busy_until(i) {
            let at = until + self.backoff(i);
            return self.queue.schedule(at, EventKind::TxStart(id));
        }
        let frame = self.nodes[i].queue.pop_front().expect("non-empty");
        let now = self.now();
        let kind = frame.msg.kind();
        let gated = self.nodes[i].agent.energy_gated();
        if gated && self.nodes[i].energy.residual < self.cfg.energy_threshold {
            self.push(now, TraceEvent::Drop { node: id, msg: kind, reason: "energy_gate".into(), tx: None, cost: None });
            return self.queue.schedule(now, EventKind::TxStart(id));
        }
        let keep = {
            let position = self.position(i);
            let dest_position = self.position(self.destination.0 as usize);
            let params = Arc::clone(&self.params);
            let n = &mut self.nodes[i];
            let ctx = NodeCtx {
                id,
                now,
                position,
                velocity: n.mobility.velocity(),
                energy: n.energy.residual,
                destination: self.destination,
                destination_position: dest_position,
                params: &params,
            };
            n.agent.confirm_send(&ctx, &frame.msg)
        };
        if !keep {
            self.push(now, TraceEvent::Drop { node: id, msg: kind, reason: "suppressed".into(), tx: None, cost: None });
            return self.queue.schedule(now, EventKind::TxStart(id));
        }
        let bits = frame.bytes.len() as u64 * 8;
        let cost = self.nodes[i].energy.cost(EnergyUse::Tx, bits, 0.0);
        if self.nodes[i].energy.residual < cost {
            let (_, spent, died) = self.debit(i, EnergyUse::Tx, bits, 0.0);
            self.push(now, TraceEvent::Drop { node: id, msg: kind, reason: "battery".into(), tx: None, cost: Some(spent) });
            if died {
                self.kill(i);
            }
            self.nodes[i].mac_armed = false;
            return Ok(());
        }
        let (before, cost, died) = self.debit(i, EnergyUse::Tx, bits, 0.0);
        self.next_tx += 1;
        let tx = self.next_tx;
        self.push(
            now,
            TraceEvent::Tx {
                node: id,
                msg: kind,
                bytes: frame.bytes.len() as u32,
                dst: frame.dst,
                energy: before,
                cost,
                tx,
                key: frame.msg.discovery_key(),
            },
        );
        let duration = bits as f64 / self.channel.data_rate;
        let end = now + duration;
        self.nodes[i].tx_until = end;
        // Anything this node was receiving is lost: the radio is half duplex.
        let own: Vec<u64> = self.nodes[i].arrivals.iter().filter(|a| a.end > now).map(|a| a.tx).collect();
        for other in own {
            self.spoil(other, id, "half_duplex");
        }
        let sender_pos = self.position(i);
        let mut receptions = Vec::new();
        for j in 0..self.nodes.len() {
            if j == i || !self.nodes[j].alive {
                continue;
            }
            let d = distance(sender_pos, self.position(j));
            if !self.channel.radio.receivable(d) {
                continue;
            }
            let delay = d / SPEED_OF_LIGHT;
            let (start, stop) = (now + delay, end + delay);
            let rid = self.nodes[j].id;
            let mut rec = Reception {
                node: rid,
                end: stop,
                rssi: self.channel.radio.rssi_or_max(d),
                ok: true,
                reason: "",
            };
            if self.nodes[j].tx_until > start {
                rec.ok = false;
                rec.reason = "half_duplex";
            }
            let overlapping: Vec<u64> =
                self.nodes[j].arrivals.iter().filter(|a| a.end > start).map(|a| a.tx).collect();
            if !overlapping.is_empty() {
                rec.ok = false;
                rec.reason = "collision";
                for other in overlapping {
                    self.spoil(other, rid, "collision");
                }
            }
            self.nodes[j].arrivals.push(Arrival { tx, start, end: stop });
            receptions.push(rec);
        }
        let pending = receptions.len();
        self.transmissions.insert(tx, Transmission { sender: id, frame, receptions, pending });
        self.queue.schedule(end, EventKind::TxEnd(tx))?;
        if died {
            self.kill(i);
        }
        Ok(())
    }

    fn spoil(&mut self, tx: u64, at: NodeId, reason: &'static str) {
        if let Some(t) = self.transmissions.get_mut(&tx) {
            if let Some(r) = t.receptions.iter_mut().find(|r| r.node == at) {
                if r.ok {
                    r.ok = false;
                    r.reason = reason;
                }
            }
        }
    }

    fn tx_end(&mut self, tx: u64) -> Result<(), EngineError> {
        let Some(t) = self.transmissions.get(&tx) else { return Ok(()) };
        let sender = t.sender;
        let deliveries: Vec<(NodeId, f64)> = t.receptions.iter().map(|r| (r.node, r.end)).collect();
        let missing_addressee = t.frame.dst.is_some_and(|d| !t.receptions.iter().any(|r| r.node == d));
        let frame = t.frame.clone();
        if deliveries.is_empty() {
            self.transmissions.remove(&tx);
        }
        for (node, at) in deliveries {
            self.queue.schedule(at, EventKind::Deliver { tx, node })?;
        }
        let i = sender.0 as usize;
        if missing_addressee {
            self.link_failure(i, frame)?;
        }
        if self.nodes[i].alive && !self.nodes[i].queue.is_empty() {
            let at = self.now() + self.backoff(i);
            self.queue.schedule(at, EventKind::TxStart(sender))?;
        } else {
            self.nodes[i].mac_armed = false;
        }
        Ok(())
    }

    fn link_failure(&mut self, sender: usize, frame: Frame) -> Result<(), EngineError> {
        if !self.nodes[sender].alive {
            return Ok(());
        }
        let to = frame.dst.expect("unicast");
        let msg = frame.msg;
        self.dispatch(sender, |a, ctx, out| a.on_link_failure(ctx, to, msg, out))
    }

    fn deliver(&mut self, tx: u64, j: usize) -> Result<(), EngineError> {
        let Some(t) = self.transmissions.get_mut(&tx) else { return Ok(()) };
        t.pending -= 1;
        let rec = t.receptions.iter().find(|r| r.node.0 as usize == j).cloned().expect("reception");
        let sender = t.sender;
        let frame = t.frame.clone();
        if t.pending == 0 {
            self.transmissions.remove(&tx);
        }
        self.nodes[j].arrivals.retain(|a| a.tx != tx);
        let rid = self.nodes[j].id;
        let addressed = frame.dst.is_none_or(|d| d == rid);
        let now = self.now();
        let kind = frame.msg.kind();
        if !addressed {
            return Ok(());
        }
        if !self.nodes[j].alive || !rec.ok {
            if self.nodes[j].alive {
                self.push(now, TraceEvent::Drop { node: rid, msg: kind, reason: rec.reason.into(), tx: Some(tx), cost: None });
            }
            if frame.dst.is_some() {
                self.link_failure(sender.0 as usize, frame)?;
            }
            return Ok(());
        }
        let bits = frame.bytes.len() as u64 * 8;
        let (_, cost, died) = self.debit(j, EnergyUse::Rx, bits, 0.0);
        self.push(
            now,
            TraceEvent::Rx { node: rid, from: sender, msg: kind, bytes: frame.bytes.len() as u32, cost, rssi: rec.rssi, tx },
        );
        if died {
            self.kill(j);
            return Ok(());
        }
        let msg = match Message::decode(&frame.bytes) {
            Ok(m) => m,
            Err(_) => {
                self.push(now, TraceEvent::Drop { node: rid, msg: kind, reason: "decode".into(), tx: Some(tx), cost: None });
                return Ok(());
            }
        };
        self.current_rx = Some((tx, sender));
        let r = self.dispatch(j, |a, ctx, out| a.on_receive(ctx, sender, msg, rec.rssi, out));
        self.current_rx = None;
        r
    }
}
