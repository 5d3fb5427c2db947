use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::message::{ControlMessage, EventKind, Message, Timer};
use super::queue::{EventQueue, ScheduleInPast, Scheduled};
use super::transcript::{
    EventRecord, Outcome, PacketFate, RecordKind, RunStats, RunTranscript, TraceLevel,
    VerdictRecord,
};
use crate::attackers::{
    benign_rreq_count, flooder_emit_rreqs, sinkhole_emit_dio, AttackerError, FlooderBehavior,
    SinkholeBehavior,
};
use crate::detector::{
    classify_dio, AptState, BlacklistBroadcast, BroadcastFilter, Evidence, HelloMessage,
    MaliciousReport, RankEvidence, ReportQueue, RootRegistry, VerdictKind, WarmupStats,
    DEFAULT_DV_RANK,
};
use crate::rpl::{
    assign_initial_ranks, initial_routing, route_upward, DataPacket, DioMessage, DropReason,
    Forwarding, Holder, ParentChange, Rank, RoutingState, RplError,
};
use crate::scenario::{
    generate_topology, AptThreshold, AttackerRole, ConfigError, Mobility, Position,
    ScenarioConfig, ScenarioError, Topology, TrafficSources,
};
use crate::time::SimTime;
use crate::NodeId;

/// Stream used for every engine-side draw, distinct from topology generation.
const ENGINE_STREAM: u64 = 1;
const MOBILITY_TICK: SimTime = SimTime::from_secs(1);
/// After its own rank moves, a node holds off rank classification this long
/// so neighbors can catch up with the repair.
pub const RANK_SETTLE: SimTime = SimTime::from_secs(1);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: TraceLevel,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EngineError {
    Config(ConfigError),
    Scenario(ScenarioError),
    Routing(RplError),
    Attacker(AttackerError),
    NotAdjacent { from: NodeId, to: NodeId },
    Schedule(ScheduleInPast),
    /// The queue ran dry before the configured duration.
    Stall { at: SimTime },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Config(e) => write!(f, "invalid configuration: {e}"),
            EngineError::Scenario(e) => write!(f, "{e}"),
            EngineError::Routing(e) => write!(f, "{e}"),
            EngineError::Attacker(e) => write!(f, "{e}"),
            EngineError::NotAdjacent { from, to } => {
                write!(f, "node {from} cannot reach non-neighbor {to}")
            }
            EngineError::Schedule(e) => write!(f, "{e}"),
            EngineError::Stall { at } => write!(f, "event queue empty at {at}"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<ConfigError> for EngineError {
    fn from(e: ConfigError) -> Self {
        EngineError::Config(e)
    }
}

impl From<ScenarioError> for EngineError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::InvalidConfig(c) => EngineError::Config(c),
            other => EngineError::Scenario(other),
        }
    }
}

impl From<RplError> for EngineError {
    fn from(e: RplError) -> Self {
        EngineError::Routing(e)
    }
}

impl From<AttackerError> for EngineError {
    fn from(e: AttackerError) -> Self {
        EngineError::Attacker(e)
    }
}

impl From<ScheduleInPast> for EngineError {
    fn from(e: ScheduleInPast) -> Self {
        EngineError::Schedule(e)
    }
}

/// Radio model: single-hop unicast and local broadcast with a fixed per-hop
/// latency.
#[derive(Debug)]
pub struct Network {
    topology: Topology,
    queue: EventQueue<EventKind>,
    hop_latency: SimTime,
}

impl Network {
    pub fn new(topology: Topology, hop_latency: SimTime) -> Self {
        Network {
            topology,
            queue: EventQueue::new(),
            hop_latency,
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn queue(&self) -> &EventQueue<EventKind> {
        &self.queue
    }

    pub fn queue_mut(&mut self) -> &mut EventQueue<EventKind> {
        &mut self.queue
    }

    /// Schedules delivery of `message` to neighbor `to`. Returns the arrival
    /// time.
    pub fn deliver(
        &mut self,
        message: Message,
        from: NodeId,
        to: NodeId,
    ) -> Result<SimTime, EngineError> {
        if !self.topology.are_adjacent(from, to) {
            return Err(EngineError::NotAdjacent { from, to });
        }
        let at = self.now() + self.hop_latency;
        self.queue
            .schedule(at, EventKind::MessageDelivery { from, to, message })?;
        Ok(at)
    }

    /// One copy per current neighbor, in ascending id order. Returns the
    /// number of copies.
    pub fn broadcast(&mut self, message: &Message, from: NodeId) -> Result<usize, EngineError> {
        let at = self.now() + self.hop_latency;
        let neighbors = self.topology.neighbors(from);
        for &to in neighbors {
            self.queue.schedule(
                at,
                EventKind::MessageDelivery {
                    from,
                    to,
                    message: message.clone(),
                },
            )?;
        }
        Ok(neighbors.len())
    }
}

#[derive(Clone, Copy, Debug)]
enum Role {
    Root,
    Benign,
    Sinkhole(SinkholeBehavior),
    Flooder(FlooderBehavior),
}

#[derive(Debug)]
struct Node {
    routing: RoutingState,
    /// Last rank heard from each neighbor.
    table: BTreeMap<NodeId, Rank>,
    role: Role,
    apt: AptState,
    warmup: WarmupStats,
    reports: ReportQueue,
    filter: BroadcastFilter,
    hellos_sent: u64,
    waypoint: Option<Position>,
    rank_changed_at: Option<SimTime>,
}

/// Validates `cfg`, generates its topology and runs it with summary tracing.
pub fn run(cfg: &ScenarioConfig) -> Result<RunTranscript, EngineError> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &ScenarioConfig, options: RunOptions) -> Result<RunTranscript, EngineError> {
    cfg.validate()?;
    let topology = generate_topology(cfg)?;
    run_on_topology(cfg, topology, options)
}

/// Runs `cfg` on a caller-supplied topology. Attacker roles come from the
/// topology; `malicious_fraction` is not consulted.
pub fn run_on_topology(
    cfg: &ScenarioConfig,
    topology: Topology,
    options: RunOptions,
) -> Result<RunTranscript, EngineError> {
    cfg.validate()?;
    Simulation::new(cfg, topology, options)?.run()
}

struct Simulation {
    net: Network,
    nodes: Vec<Node>,
    /// Mirror of every node's parent pointer for descendant checks.
    parent_of: Vec<Option<NodeId>>,
    registry: RootRegistry,
    rng: ChaCha8Rng,
    trace: TraceLevel,
    detection: bool,
    duration: SimTime,
    warmup_end: SimTime,
    dio_period: SimTime,
    hello_period: SimTime,
    traffic_period: SimTime,
    timeout: SimTime,
    max_hops: u32,
    apt_threshold: AptThreshold,
    benign_rreq_rate: f64,
    mobility: Mobility,
    area: (f64, f64),
    fates: Vec<Option<PacketFate>>,
    emitted: Vec<(NodeId, SimTime)>,
    verdicts: Vec<VerdictRecord>,
    events: Vec<EventRecord>,
    stats: RunStats,
    seq: u64,
    header: RunTranscript,
}

impl Simulation {
    fn new(
        cfg: &ScenarioConfig,
        topology: Topology,
        options: RunOptions,
    ) -> Result<Self, EngineError> {
        let ranks = assign_initial_ranks(&topology)?;
        let routing = initial_routing(&topology)?;
        let attack_start = cfg.attack_start();
        let attack_interval = SimTime::from_secs_f64(cfg.attack_interval_s);
        let root = topology.root();

        let mut nodes = Vec::with_capacity(topology.node_count());
        for (state, id) in routing.into_iter().zip(topology.node_ids()) {
            let table = topology
                .neighbors(id)
                .iter()
                .map(|&v| (v, ranks[v.index()]))
                .collect();
            let true_rank = ranks[id.index()];
            let role = match topology.role(id) {
                _ if id == root => Role::Root,
                None => Role::Benign,
                Some(AttackerRole::Sinkhole) => {
                    let advertised = Rank(cfg.sinkhole_advertised_rank.min(true_rank.0 - 1));
                    Role::Sinkhole(SinkholeBehavior::new(
                        advertised,
                        true_rank,
                        cfg.sinkhole_mode,
                        attack_start,
                        attack_interval,
                    )?)
                }
                Some(AttackerRole::Flooder) => Role::Flooder(FlooderBehavior::new(
                    cfg.flooder_rreq_rate,
                    cfg.benign_rreq_rate,
                    attack_start,
                )?),
            };
            nodes.push(Node {
                routing: state,
                table,
                role,
                apt: AptState::new(cfg.alpha_low, cfg.alpha_high)
                    .map_err(|_| ConfigError::new("alpha_low", "invalid smoothing factor"))?,
                warmup: WarmupStats::default(),
                reports: ReportQueue::default(),
                filter: BroadcastFilter::default(),
                hellos_sent: 0,
                waypoint: None,
                rank_changed_at: None,
            });
        }
        let parent_of = nodes.iter().map(|n| n.routing.parent()).collect();

        let header = RunTranscript {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            node_count: topology.node_count(),
            root,
            attackers: topology.attackers().clone(),
            detection_enabled: cfg.detection_enabled,
            packet_size_bytes: cfg.packet_size_bytes,
            start: SimTime::ZERO,
            stop: cfg.duration(),
            attack_start,
            hello_period: SimTime::from_secs_f64(cfg.hello_period_s),
            fates: Vec::new(),
            verdicts: Vec::new(),
            root_blacklist: BTreeMap::new(),
            events: Vec::new(),
            stats: RunStats::default(),
        };

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(ENGINE_STREAM);

        let mut sim = Simulation {
            net: Network::new(topology, SimTime::from_secs_f64(cfg.hop_latency_s)),
            nodes,
            parent_of,
            registry: RootRegistry::default(),
            rng,
            trace: options.trace,
            detection: cfg.detection_enabled,
            duration: cfg.duration(),
            warmup_end: cfg.warmup_end(),
            dio_period: SimTime::from_secs_f64(cfg.dio_period_s),
            hello_period: SimTime::from_secs_f64(cfg.hello_period_s),
            traffic_period: SimTime::from_secs_f64(cfg.traffic.period_s),
            timeout: SimTime::from_secs_f64(cfg.packet_timeout_s),
            max_hops: cfg.max_hops,
            apt_threshold: cfg.apt_threshold,
            benign_rreq_rate: cfg.benign_rreq_rate,
            mobility: cfg.mobility,
            area: (cfg.area.width, cfg.area.height),
            fates: Vec::new(),
            emitted: Vec::new(),
            verdicts: Vec::new(),
            events: Vec::new(),
            stats: RunStats::default(),
            seq: 0,
            header,
        };
        sim.schedule_initial(cfg.traffic.sources)?;
        Ok(sim)
    }

    fn schedule_initial(&mut self, sources: TrafficSources) -> Result<(), EngineError> {
        let benign: Vec<NodeId> = self.net.topology.benign_non_root().collect();
        let senders: Vec<NodeId> = match sources {
            TrafficSources::AllBenign => benign,
            TrafficSources::Count(k) => {
                if k > benign.len() {
                    return Err(ConfigError::new(
                        "traffic_sources",
                        "more sources than benign non-root nodes",
                    )
                    .into());
                }
                let mut picked: Vec<NodeId> =
                    rand::seq::index::sample(&mut self.rng, benign.len(), k)
                        .into_iter()
                        .map(|i| benign[i])
                        .collect();
                picked.sort_unstable();
                picked
            }
        };
        let mut is_sender = alloc::vec![false; self.nodes.len()];
        for s in &senders {
            is_sender[s.index()] = true;
        }
        for (i, sender) in is_sender.into_iter().enumerate() {
            let id = NodeId::from_index(i);
            let dio = self.offset(self.dio_period);
            let hello = self.offset(self.hello_period);
            self.at(dio, EventKind::TimerFire(Timer::Dio(id)))?;
            self.at(hello, EventKind::TimerFire(Timer::Hello(id)))?;
            if sender {
                let t = self.offset(self.traffic_period);
                self.at(t, EventKind::TrafficEmit(id))?;
            }
            if let Role::Sinkhole(b) = self.nodes[i].role {
                self.at(b.attack_start, EventKind::AttackAction(id))?;
            }
        }
        if matches!(self.mobility, Mobility::RandomWaypoint { .. }) {
            self.at(MOBILITY_TICK, EventKind::TimerFire(Timer::Mobility))?;
        }
        Ok(())
    }

    fn offset(&mut self, period: SimTime) -> SimTime {
        SimTime::from_micros(self.rng.random_range(0..period.as_micros().max(1)))
    }

    fn at(&mut self, time: SimTime, event: EventKind) -> Result<(), EngineError> {
        self.net.queue.schedule(time, event)?;
        Ok(())
    }

    fn now(&self) -> SimTime {
        self.net.now()
    }

    fn record(&mut self, kind: RecordKind) {
        if self.trace == TraceLevel::Full {
            self.events.push(EventRecord {
                time: self.now(),
                seq: self.seq,
                kind,
            });
        }
    }

    fn run(mut self) -> Result<RunTranscript, EngineError> {
        while let Some(t) = self.net.queue.peek_time() {
            if t >= self.duration {
                break;
            }
            let ev = self.net.queue.pop().expect("peeked");
            self.dispatch(ev)?;
        }
        if self.net.queue.is_empty() && !self.duration.is_zero() {
            return Err(EngineError::Stall { at: self.now() });
        }
        // Past the horizon only data already in flight is played out.
        while let Some(ev) = self.net.queue.pop() {
            if ev.event.is_data_delivery() {
                self.dispatch(ev)?;
            }
        }
        Ok(self.finish())
    }

    fn finish(mut self) -> RunTranscript {
        let end = self.now();
        let fates = core::mem::take(&mut self.fates)
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                f.unwrap_or_else(|| {
                    let (source, emitted_at) = self.emitted[i];
                    PacketFate {
                        id: i as u64,
                        source,
                        emitted_at,
                        outcome: Outcome::Dropped {
                            at: end,
                            node: source,
                            reason: DropReason::Timeout,
                        },
                    }
                })
            })
            .collect();
        let mut out = self.header;
        out.fates = fates;
        out.verdicts = self.verdicts;
        out.root_blacklist = self.registry.blacklisted_at().clone();
        out.events = self.events;
        out.stats = self.stats;
        out
    }

    fn dispatch(&mut self, ev: Scheduled<EventKind>) -> Result<(), EngineError> {
        self.seq = ev.seq;
        self.stats.events_processed += 1;
        match ev.event {
            EventKind::TimerFire(timer) => {
                self.record(RecordKind::Timer { timer });
                match timer {
                    Timer::Dio(v) => self.on_dio_timer(v),
                    Timer::Hello(v) => self.on_hello_timer(v),
                    Timer::Mobility => self.on_mobility_tick(),
                }
            }
            EventKind::TrafficEmit(v) => self.on_traffic(v),
            EventKind::AttackAction(v) => self.on_attack(v),
            EventKind::MessageDelivery { from, to, message } => match message {
                Message::Data(packet) => {
                    self.record(RecordKind::DataHop {
                        from,
                        to,
                        packet: packet.id,
                    });
                    self.process_data(to, packet)
                }
                // Control traffic from a node that has since moved out of
                // range is lost; data already on the air still lands.
                Message::Control(_) if !self.net.topology.are_adjacent(from, to) => Ok(()),
                Message::Control(msg) => {
                    self.record(match msg {
                        ControlMessage::Dio(ref dio) => RecordKind::Dio {
                            from,
                            to,
                            advertised_rank: dio.advertised_rank,
                        },
                        _ => RecordKind::Control {
                            from,
                            to,
                            kind: msg.kind(),
                        },
                    });
                    match msg {
                        ControlMessage::Dio(dio) => self.on_dio(to, from, dio),
                        ControlMessage::Hello(h) => self.on_hello(to, from, h),
                        ControlMessage::Report(r) => self.on_report(to, r),
                        ControlMessage::Broadcast(b) => self.on_broadcast(to, from, b),
                    }
                }
            },
        }
    }

    fn active_attacker(&self, v: NodeId) -> bool {
        let now = self.now();
        match self.nodes[v.index()].role {
            Role::Sinkhole(b) => b.is_active(now),
            Role::Flooder(f) => f.is_active(now),
            Role::Root | Role::Benign => false,
        }
    }

    fn runs_detection(&self, v: NodeId) -> bool {
        self.detection && matches!(self.nodes[v.index()].role, Role::Root | Role::Benign)
    }

    fn send_dio(&mut self, v: NodeId, rank: Rank) -> Result<(), EngineError> {
        let msg = Message::Control(ControlMessage::Dio(DioMessage {
            sender: v,
            advertised_rank: rank,
            emitted_at: self.now(),
        }));
        self.net.broadcast(&msg, v)?;
        self.stats.dio_sent += 1;
        Ok(())
    }

    fn on_dio_timer(&mut self, v: NodeId) -> Result<(), EngineError> {
        let next = self.now() + self.dio_period;
        self.at(next, EventKind::TimerFire(Timer::Dio(v)))?;
        if matches!(self.nodes[v.index()].role, Role::Sinkhole(b) if b.is_active(self.now())) {
            return Ok(());
        }
        let rank = self.nodes[v.index()].routing.rank();
        self.send_dio(v, rank)
    }

    fn on_attack(&mut self, v: NodeId) -> Result<(), EngineError> {
        let Role::Sinkhole(b) = self.nodes[v.index()].role else {
            return Ok(());
        };
        let now = self.now();
        if let Some(dio) = sinkhole_emit_dio(&b, v, now) {
            self.record(RecordKind::Attack {
                node: v,
                advertised_rank: dio.advertised_rank,
            });
            self.net
                .broadcast(&Message::Control(ControlMessage::Dio(dio)), v)?;
            self.stats.malicious_dio_sent += 1;
        }
        let next = b.next_emission(now + SimTime::from_micros(1));
        self.at(next, EventKind::AttackAction(v))
    }

    fn on_hello_timer(&mut self, v: NodeId) -> Result<(), EngineError> {
        let now = self.now();
        self.at(now + self.hello_period, EventKind::TimerFire(Timer::Hello(v)))?;
        let window_start = now.saturating_sub(self.hello_period);
        let node = &mut self.nodes[v.index()];
        let rreq_count = match node.role {
            Role::Flooder(f) if f.is_active(window_start) => {
                flooder_emit_rreqs(&f, window_start, self.hello_period)
            }
            _ => benign_rreq_count(self.benign_rreq_rate, self.hello_period, node.hellos_sent),
        };
        node.hellos_sent += 1;
        let msg = Message::Control(ControlMessage::Hello(HelloMessage {
            sender: v,
            rreq_count,
            sent_at: now,
        }));
        self.net.broadcast(&msg, v)?;
        Ok(())
    }

    fn on_traffic(&mut self, v: NodeId) -> Result<(), EngineError> {
        let now = self.now();
        self.at(now + self.traffic_period, EventKind::TrafficEmit(v))?;
        let id = self.fates.len() as u64;
        self.fates.push(None);
        self.emitted.push((v, now));
        self.record(RecordKind::Emit { node: v, packet: id });
        self.process_data(v, DataPacket::new(id, v, now))
    }

    fn settle(&mut self, packet: &DataPacket, node: NodeId, outcome: Outcome) {
        let slot = &mut self.fates[packet.id as usize];
        debug_assert!(slot.is_none(), "packet {} settled twice", packet.id);
        *slot = Some(PacketFate {
            id: packet.id,
            source: packet.source,
            emitted_at: packet.emitted_at,
            outcome,
        });
        let kind = match outcome {
            Outcome::Delivered { hops, .. } => RecordKind::Delivered {
                packet: packet.id,
                hops,
            },
            Outcome::Dropped { reason, .. } => RecordKind::Dropped {
                node,
                packet: packet.id,
                reason,
            },
        };
        self.record(kind);
    }

    fn process_data(&mut self, at: NodeId, mut packet: DataPacket) -> Result<(), EngineError> {
        let now = self.now();
        if now.saturating_sub(packet.emitted_at) > self.timeout {
            let outcome = Outcome::Dropped {
                at: now,
                node: at,
                reason: DropReason::Timeout,
            };
            self.settle(&packet, at, outcome);
            return Ok(());
        }
        let node = &self.nodes[at.index()];
        let holder = match node.role {
            Role::Root => Holder::Root,
            Role::Sinkhole(ref b) if b.is_active(now) => Holder::Sinkhole(b),
            _ => Holder::Relay,
        };
        match route_upward(&node.routing, &mut packet, holder, self.max_hops) {
            Forwarding::Delivered { hops } => {
                self.settle(&packet, at, Outcome::Delivered { at: now, hops });
            }
            Forwarding::Dropped(reason) => {
                let outcome = Outcome::Dropped {
                    at: now,
                    node: at,
                    reason,
                };
                self.settle(&packet, at, outcome);
            }
            Forwarding::Forward { to } => {
                self.net.deliver(Message::Data(packet), at, to)?;
            }
        }
        Ok(())
    }

    /// Re-evaluates `v`'s parent and propagates the consequences.
    fn refresh(&mut self, v: NodeId) -> Result<(), EngineError> {
        let parent_of = &self.parent_of;
        let node = &mut self.nodes[v.index()];
        let old_rank = node.routing.rank();
        let change = node
            .routing
            .refresh_parent(&node.table, |c| !is_descendant(parent_of, c, v));
        self.after_change(v, change, old_rank)
    }

    fn after_change(
        &mut self,
        v: NodeId,
        change: ParentChange,
        old_rank: Rank,
    ) -> Result<(), EngineError> {
        if change == ParentChange::Unchanged {
            return Ok(());
        }
        let now = self.now();
        let node = &mut self.nodes[v.index()];
        let (parent, rank) = (node.routing.parent(), node.routing.rank());
        if rank != old_rank {
            node.rank_changed_at = Some(now);
        }
        let node = &self.nodes[v.index()];
        let silent = matches!(node.role, Role::Sinkhole(b) if b.is_active(self.now()));
        let pending: Vec<MaliciousReport> = match change {
            ParentChange::Switched { .. } => node.reports.pending(v).collect(),
            _ => Vec::new(),
        };
        self.parent_of[v.index()] = parent;
        self.stats.parent_changes += 1;
        self.record(RecordKind::Parent {
            node: v,
            parent,
            rank,
        });
        if let ParentChange::Orphaned { .. } = change {
            self.stats.orphanings += 1;
        }
        if !silent {
            self.send_dio(v, rank)?;
        }
        for r in pending {
            self.forward_report(v, r)?;
        }
        Ok(())
    }

    fn on_dio(&mut self, v: NodeId, from: NodeId, dio: DioMessage) -> Result<(), EngineError> {
        let runs_detection = self.runs_detection(v);
        let now = self.now();
        let node = &mut self.nodes[v.index()];
        if matches!(node.role, Role::Root) {
            return Ok(());
        }
        if node.routing.is_blacklisted(from) {
            self.stats.dio_ignored += 1;
            return Ok(());
        }
        let advertised = dio.advertised_rank;
        let settling = node.rank_changed_at.is_some_and(|t| now < t + RANK_SETTLE);
        if runs_detection && !advertised.is_infinite() && !node.routing.is_orphan() {
            let evidence = RankEvidence::new(
                v,
                node.routing.rank(),
                Some(node.routing.dv_rank().unwrap_or(DEFAULT_DV_RANK)),
                from,
                advertised,
                now,
                node.routing.parent() == Some(from),
            );
            let kind = classify_dio(&evidence).expect("dv supplied");
            if kind.is_malicious() && settling {
                // Own rank still moving: neither trust nor accuse the sender.
                self.stats.dio_deferred += 1;
                return Ok(());
            }
            self.stats.dio_classified += 1;
            if kind.is_malicious() || self.trace == TraceLevel::Full {
                self.verdicts.push(VerdictRecord::from_rank(&evidence, kind));
            }
            if kind.is_malicious() {
                self.stats.dio_flagged += 1;
                return self.flag(v, from, kind);
            }
        }
        self.nodes[v.index()].table.insert(from, advertised);
        self.refresh(v)
    }

    fn threshold(&self, v: NodeId) -> Option<f64> {
        match self.apt_threshold {
            AptThreshold::Absolute(t) => Some(t),
            AptThreshold::Adaptive if self.now() >= self.warmup_end => {
                self.nodes[v.index()].warmup.adaptive_threshold()
            }
            AptThreshold::Adaptive => None,
        }
    }

    fn on_hello(&mut self, v: NodeId, from: NodeId, hello: HelloMessage) -> Result<(), EngineError> {
        if !self.runs_detection(v) {
            return Ok(());
        }
        let now = self.now();
        let warming = now < self.warmup_end;
        let node = &mut self.nodes[v.index()];
        if node.routing.is_blacklisted(from) {
            return Ok(());
        }
        node.apt.ingest_hello(&hello);
        if warming {
            node.warmup.push(hello.rreq_count as f64);
        }
        let Some(threshold) = self.threshold(v) else {
            return Ok(());
        };
        let verdict = self.nodes[v.index()]
            .apt
            .check_flooding(from, threshold)
            .expect("hello just ingested");
        self.stats.flood_checks += 1;
        let Evidence::Flood(evidence) = verdict.evidence else {
            unreachable!("flood check yields flood evidence")
        };
        if verdict.kind.is_malicious() || self.trace == TraceLevel::Full {
            self.verdicts
                .push(VerdictRecord::from_flood(now, v, &evidence, verdict.kind));
        }
        if verdict.kind.is_malicious() {
            self.stats.flood_flagged += 1;
            return self.flag(v, from, verdict.kind);
        }
        Ok(())
    }

    /// Local reaction to a malicious verdict by `v` against `suspect`.
    fn flag(&mut self, v: NodeId, suspect: NodeId, kind: VerdictKind) -> Result<(), EngineError> {
        let now = self.now();
        let node = &mut self.nodes[v.index()];
        node.routing.blacklist_insert(suspect);
        node.table.remove(&suspect);
        if matches!(node.role, Role::Root) {
            if self.registry.add_suspect(suspect, now) {
                self.root_flood()?;
            }
            return Ok(());
        }
        let report = node.reports.report_to_root(suspect, v, kind);
        if node.routing.parent() == Some(suspect) {
            // A new parent flushes every pending report, this one included.
            return self.refresh(v);
        }
        if let Some(r) = report {
            self.forward_report(v, r)?;
        }
        Ok(())
    }

    /// Sends `report` one hop upward from `v`, if `v` has a route.
    fn forward_report(&mut self, v: NodeId, report: MaliciousReport) -> Result<(), EngineError> {
        match self.nodes[v.index()].routing.parent() {
            Some(p) => {
                if report.reporter == v {
                    self.stats.reports_sent += 1;
                }
                self.net
                    .deliver(Message::Control(ControlMessage::Report(report)), v, p)?;
            }
            None if report.reporter != v => self.stats.reports_dropped += 1,
            None => {}
        }
        Ok(())
    }

    fn on_report(&mut self, v: NodeId, report: MaliciousReport) -> Result<(), EngineError> {
        match self.nodes[v.index()].role {
            Role::Root => {
                self.stats.reports_delivered += 1;
                if self.registry.receive_report(&report, self.now()) {
                    self.root_flood()?;
                }
                Ok(())
            }
            _ if self.active_attacker(v) => {
                self.stats.reports_dropped += 1;
                Ok(())
            }
            _ => self.forward_report(v, report),
        }
    }

    fn root_flood(&mut self) -> Result<(), EngineError> {
        if let Some(b) = self.registry.root_broadcast() {
            let root = self.net.topology.root();
            self.stats.broadcasts += 1;
            self.net
                .broadcast(&Message::Control(ControlMessage::Broadcast(b)), root)?;
        }
        Ok(())
    }

    fn on_broadcast(
        &mut self,
        v: NodeId,
        from: NodeId,
        b: BlacklistBroadcast,
    ) -> Result<(), EngineError> {
        if matches!(self.nodes[v.index()].role, Role::Root) || self.active_attacker(v) {
            return Ok(());
        }
        let parent_of = &self.parent_of;
        let node = &mut self.nodes[v.index()];
        if node.routing.is_blacklisted(from) || !node.filter.accept(b.seq) {
            return Ok(());
        }
        let old_rank = node.routing.rank();
        let update =
            node.routing
                .apply_blacklist_broadcast(&b.suspects, &node.table, |c| {
                    !is_descendant(parent_of, c, v)
                });
        for s in &b.suspects {
            node.table.remove(s);
        }
        node.reports.acknowledge(&b.suspects);
        self.after_change(v, update.parent_change, old_rank)?;
        self.net
            .broadcast(&Message::Control(ControlMessage::Broadcast(b)), v)?;
        Ok(())
    }

    fn on_mobility_tick(&mut self) -> Result<(), EngineError> {
        let Mobility::RandomWaypoint { speed_mps } = self.mobility else {
            return Ok(());
        };
        let step = speed_mps * MOBILITY_TICK.as_secs_f64();
        let root = self.net.topology.root();
        let mut positions = self.net.topology.positions().to_vec();
        for (i, pos) in positions.iter_mut().enumerate() {
            if NodeId::from_index(i) == root {
                continue;
            }
            let target = match self.nodes[i].waypoint {
                Some(w) if w != *pos => w,
                _ => {
                    let w = Position::new(
                        self.rng.random::<f64>() * self.area.0,
                        self.rng.random::<f64>() * self.area.1,
                    );
                    self.nodes[i].waypoint = Some(w);
                    w
                }
            };
            let dist = libm::sqrt(pos.distance_sq(&target));
            *pos = if dist <= step {
                target
            } else {
                let f = step / dist;
                Position::new(pos.x + (target.x - pos.x) * f, pos.y + (target.y - pos.y) * f)
            };
        }
        self.net.topology.relocate(positions)?;
        for i in 0..self.nodes.len() {
            let v = NodeId::from_index(i);
            let topo = &self.net.topology;
            let node = &mut self.nodes[i];
            let before = node.table.len();
            node.table.retain(|&u, _| topo.are_adjacent(u, v));
            let lost_parent = node
                .routing
                .parent()
                .is_some_and(|p| !topo.are_adjacent(p, v));
            if lost_parent || node.table.len() != before {
                self.refresh(v)?;
            }
        }
        self.at(self.now() + MOBILITY_TICK, EventKind::TimerFire(Timer::Mobility))
    }
}

/// Whether `v` lies on `candidate`'s chain of parents. Cycles count as
/// descendants so they are never joined.
fn is_descendant(parent_of: &[Option<NodeId>], candidate: NodeId, v: NodeId) -> bool {
    let mut x = candidate;
    for _ in 0..=parent_of.len() {
        if x == v {
            return true;
        }
        match parent_of[x.index()] {
            Some(p) => x = p,
            None => return false,
        }
    }
    true
}
