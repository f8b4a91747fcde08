//! Deterministic discrete-event engine: ground-truth topology with
//! per-direction receivability, wormhole tunnels, message delivery, the
//! honest router driver (with adversary overrides), and the instantaneous
//! data-plane trace.
//!
//! One engine runs one scenario; identical (scenario, seed) pairs produce
//! byte-identical event logs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adversary::{HopCountMode, HopTamper, ResolvedAttack, Spoofer};
use crate::flooding;
use crate::router::{
    self, check_and_record_duplicate, compute_routing_table, expire, generate_hello, generate_tc,
    process_hello, process_tc, refresh_advertised_set, select_mprs, RouterState, RoutingTable,
    TcDisposition,
};
use crate::scenario::{Handle, NodeKindSpec, ScenarioSpec, TunnelMode};
use crate::types::{
    ControlMessage, LinkStatus, ProtocolParams, RouterId, SimDuration, SimTime, StateDelta,
    TcMessage, ValiditySchedule,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("engine failure in `{scenario}`: {message}")]
    Runtime { scenario: String, message: String },
}

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

/// One line of the run's event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub t: SimTime,
    pub node: Handle,
    pub body: LogBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogBody {
    HelloSent { origin: RouterId, seq: u32 },
    TcSent { origin: RouterId, seq: u32, ansn: u32, advertised: Vec<RouterId> },
    TcForwarded {
        origin: RouterId,
        seq: u32,
        received_from: RouterId,
        jitter_us: u64,
        hop_count: u8,
        hop_limit: u8,
    },
    Delivered { sender: RouterId, origin: RouterId, seq: u32, hello: bool, tunneled: bool },
    TcProcessed { origin: RouterId, seq: u32, hop_count: u8 },
    TcApplied { origin: RouterId, seq: u32, ansn: u32, changed: bool, validity_s: f64 },
    TcOldAnsn { origin: RouterId, seq: u32, ansn: u32 },
    DupDropped { origin: RouterId, seq: u32, sender: RouterId },
    LinkChanged { neighbor: RouterId, status: LinkStatus, usable: bool },
    NeighborRemoved { neighbor: RouterId },
    MprRecalc { changed: bool },
    MprSet { set: Vec<RouterId> },
    MprUncoverable { target: RouterId },
    RouteRecalc { changed: bool },
    RouteAdded { dst: RouterId, next_hop: RouterId, distance: u32 },
    RouteLost { dst: RouterId },
    AdvertisedSet { ansn: u32, set: Vec<RouterId> },
    LqMiss { neighbor: RouterId, quality: f64 },
    LqExcluded { neighbor: RouterId, quality: f64 },
    AttackFlip { note: String },
    AttackEmit { note: String },
    ProbeResult { src: RouterId, dst: RouterId, outcome: String },
}

fn ids_csv(ids: &[RouterId]) -> String {
    if ids.is_empty() {
        return "-".into();
    }
    ids.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(",")
}

impl LogEvent {
    /// Stable line rendering: `t=<secs> node=<handle> kind=<...> detail=<...>`.
    pub fn render(&self) -> String {
        let (kind, detail) = match &self.body {
            LogBody::HelloSent { origin, seq } => {
                ("hello-sent", format!("origin={origin} seq={seq}"))
            }
            LogBody::TcSent { origin, seq, ansn, advertised } => (
                "tc-sent",
                format!("origin={origin} seq={seq} ansn={ansn} advertised={}", ids_csv(advertised)),
            ),
            LogBody::TcForwarded { origin, seq, received_from, jitter_us, hop_count, hop_limit } => (
                "tc-forwarded",
                format!(
                    "origin={origin} seq={seq} from={received_from} jitter={} hop_count={hop_count} hop_limit={hop_limit}",
                    SimTime(*jitter_us)
                ),
            ),
            LogBody::Delivered { sender, origin, seq, hello, tunneled } => (
                "deliver",
                format!(
                    "sender={sender} kind={} origin={origin} seq={seq} tunneled={tunneled}",
                    if *hello { "hello" } else { "tc" }
                ),
            ),
            LogBody::TcProcessed { origin, seq, hop_count } => (
                "tc-processed",
                format!("origin={origin} seq={seq} hop_count={hop_count}"),
            ),
            LogBody::TcApplied { origin, seq, ansn, changed, validity_s } => (
                "tc-applied",
                format!("origin={origin} seq={seq} ansn={ansn} changed={changed} validity={validity_s:.6}"),
            ),
            LogBody::TcOldAnsn { origin, seq, ansn } => {
                ("tc-old-ansn", format!("origin={origin} seq={seq} ansn={ansn}"))
            }
            LogBody::DupDropped { origin, seq, sender } => {
                ("dup-dropped", format!("origin={origin} seq={seq} sender={sender}"))
            }
            LogBody::LinkChanged { neighbor, status, usable } => (
                "link",
                format!("neighbor={neighbor} status={status} usable={usable}"),
            ),
            LogBody::NeighborRemoved { neighbor } => {
                ("neighbor-removed", format!("neighbor={neighbor}"))
            }
            LogBody::MprRecalc { changed } => ("mpr-recalc", format!("changed={changed}")),
            LogBody::MprSet { set } => ("mpr-set", format!("set={}", ids_csv(set))),
            LogBody::MprUncoverable { target } => ("mpr-uncoverable", format!("target={target}")),
            LogBody::RouteRecalc { changed } => ("route-recalc", format!("changed={changed}")),
            LogBody::RouteAdded { dst, next_hop, distance } => (
                "route-added",
                format!("dst={dst} next_hop={next_hop} distance={distance}"),
            ),
            LogBody::RouteLost { dst } => ("route-lost", format!("dst={dst}")),
            LogBody::AdvertisedSet { ansn, set } => {
                ("advertised-set", format!("ansn={ansn} set={}", ids_csv(set)))
            }
            LogBody::LqMiss { neighbor, quality } => {
                ("lq-miss", format!("neighbor={neighbor} quality={quality:.6}"))
            }
            LogBody::LqExcluded { neighbor, quality } => {
                ("lq-excluded", format!("neighbor={neighbor} quality={quality:.6}"))
            }
            LogBody::AttackFlip { note } => ("attack-flip", note.clone()),
            LogBody::AttackEmit { note } => ("attack-emit", note.clone()),
            LogBody::ProbeResult { src, dst, outcome } => {
                ("probe", format!("src={src} dst={dst} outcome={outcome}"))
            }
        };
        format!("t={} node={} kind={kind} detail={detail}", self.t, self.node)
    }
}

// ---------------------------------------------------------------------------
// Events and node roles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimerKind {
    HelloPeriodic { gen: u64 },
    TcPeriodic { gen: u64 },
    TriggeredHello,
    TriggeredTc,
    Flush,
    ExpirySweep,
    LinkQuality { gen: u64 },
    SpooferTick,
    AttackStep { step: usize },
}

#[derive(Debug, Clone)]
enum EventKind {
    Deliver {
        to: Handle,
        sender: RouterId,
        msg: ControlMessage,
        tunneled: bool,
    },
    Timer {
        node: Handle,
        timer: TimerKind,
        /// For LinkQuality: which neighbor the check concerns.
        neighbor: Option<RouterId>,
    },
    Probe { index: usize },
}

#[derive(Debug)]
struct QueuedEvent {
    at: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct LinkOut {
    to: Handle,
    receivable: bool,
    latency: SimDuration,
}

/// Data-plane handling at a node.
#[derive(Debug, Clone, PartialEq)]
pub enum DataPolicy {
    Forward,
    DropAll,
    DropFor(Vec<RouterId>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ForwardPolicy {
    Honest,
    Instant(HopTamper),
}

/// Honest-chassis behavior overrides (all defaults = plain honest node).
#[derive(Debug, Clone)]
struct Overrides {
    mpr_flag_all: bool,
    advertise_extra: Vec<RouterId>,
    forward: ForwardPolicy,
    data: DataPolicy,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            mpr_flag_all: false,
            advertise_extra: vec![],
            forward: ForwardPolicy::Honest,
            data: DataPolicy::Forward,
        }
    }
}

/// A planned attack emission (bursts, sweeps, jumps).
#[derive(Debug, Clone)]
enum PlannedEmission {
    BurstTc,
    SweepTc { seq: u32, ansn: u32, target: RouterId },
    JumpTc { target: RouterId, jump: u32 },
}

struct HonestNode {
    state: RouterState,
    overrides: Overrides,
    last_hello_sent: Option<SimTime>,
    last_tc_sent: Option<SimTime>,
    hello_gen: u64,
    tc_gen: u64,
    pending_hello: bool,
    pending_tc: bool,
    advertised_nonempty_last: bool,
    flush_scheduled: Option<SimTime>,
    expiry_scheduled: Option<SimTime>,
    lq_gen: BTreeMap<RouterId, u64>,
    tc_validity: Option<ValiditySchedule>,
    plan: Vec<(SimTime, PlannedEmission)>,
}

struct SpooferNode {
    spoofer: Spoofer,
    period: SimDuration,
}

enum Role {
    Honest(Box<HonestNode>),
    Spoofer(Box<SpooferNode>),
    Tap { peer: Handle, mode: TunnelMode },
}

struct SimNode {
    handle: Handle,
    claimed: Vec<RouterId>,
    is_honest: bool,
    kind_label: String,
    role: Role,
}

// ---------------------------------------------------------------------------
// Run output
// ---------------------------------------------------------------------------

/// Value-semantic snapshot of one node at run end.
#[derive(Debug, Clone)]
pub struct NodeSnapshot {
    pub handle: Handle,
    pub claimed: Vec<RouterId>,
    pub is_honest: bool,
    pub kind_label: String,
    pub state: Option<StateSnapshot>,
}

#[derive(Debug, Clone)]
pub struct StateSnapshot {
    pub self_id: RouterId,
    pub sym_neighbors: Vec<RouterId>,
    pub mprs: Vec<RouterId>,
    pub advertised_set: Vec<RouterId>,
    pub ansn: u32,
    pub routing_table: RoutingTable,
    pub counters: router::Counters,
    /// Symmetric 1-hop + 2-hop records + topology records, as normalized
    /// undirected edges.
    pub perceived_edges: BTreeSet<(RouterId, RouterId)>,
    /// Globally-diffused view: topology records + own advertised links.
    pub global_view_edges: BTreeSet<(RouterId, RouterId)>,
    pub topology_empty: bool,
}

/// Where a traced data packet ended up.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    Delivered { at: Handle, path: Vec<Handle> },
    Dropped { at: Handle, reason: String },
    Loop { cycle: Vec<Handle> },
    TtlExpired { path: Vec<Handle> },
}

impl TraceOutcome {
    pub fn label(&self) -> String {
        match self {
            TraceOutcome::Delivered { at, path } => format!(
                "delivered at={} path={}",
                at,
                path.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
            ),
            TraceOutcome::Dropped { at, reason } => format!("dropped at={at} reason={reason}"),
            TraceOutcome::Loop { cycle } => format!(
                "loop cycle={}",
                cycle.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
            ),
            TraceOutcome::TtlExpired { .. } => "ttl-expired".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub at: SimTime,
    pub src: RouterId,
    pub dst: RouterId,
    pub outcome: TraceOutcome,
}

/// Ground-truth facts analysis may consult (never visible to routers).
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Pairs of handles with bidirectionally receivable direct links.
    pub sym_pairs: BTreeSet<(Handle, Handle)>,
    /// Per-pair one-way-only direct connectivity (from, to receivable, reverse not).
    pub uni_pairs: BTreeSet<(Handle, Handle)>,
}

/// Everything a finished run exposes to analysis and reporting.
pub struct RunOutput {
    pub scenario_name: String,
    pub seed: u64,
    pub duration: SimTime,
    pub params: ProtocolParams,
    pub events: Vec<LogEvent>,
    pub snapshots: Vec<NodeSnapshot>,
    pub traces: Vec<TraceRecord>,
    pub ground: GroundTruth,
    resolver: TraceResolver,
}

impl RunOutput {
    pub fn render_log(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.render());
            out.push('\n');
        }
        out
    }

    pub fn snapshot_by_id(&self, id: &RouterId) -> Option<&NodeSnapshot> {
        self.snapshots
            .iter()
            .find(|s| s.is_honest && s.claimed.contains(id))
    }

    pub fn honest_snapshots(&self) -> impl Iterator<Item = &NodeSnapshot> {
        self.snapshots.iter().filter(|s| s.is_honest)
    }

    /// Resolve a next-hop id from `from`, exactly as the data plane does.
    pub fn resolve_next_hop(&self, from: Handle, next: &RouterId) -> Option<Handle> {
        self.resolver.resolve(from, next, &self.snapshots)
    }

    /// Routing table of the node at `handle`, when it runs the protocol.
    pub fn table_of(&self, handle: Handle) -> Option<&RoutingTable> {
        self.snapshots[handle as usize]
            .state
            .as_ref()
            .map(|s| &s.routing_table)
    }
}

/// Data needed to re-resolve next hops after the run (for loop analysis).
#[derive(Debug, Clone)]
struct TraceResolver {
    /// Per node: directly reachable handles (receivable direct links).
    direct: Vec<Vec<Handle>>,
    /// Per node: handles reachable through adjacent control+data tunnels.
    via_tunnel: Vec<Vec<(Handle, Handle)>>, // (tap, destination)
    /// Per node: handles reachable only through control-only tunnels.
    via_control_only: Vec<Vec<(Handle, Handle)>>,
}

impl TraceResolver {
    fn resolve(&self, from: Handle, next: &RouterId, snaps: &[NodeSnapshot]) -> Option<Handle> {
        let claims = |h: Handle| snaps[h as usize].claimed.contains(next);
        self.direct[from as usize]
            .iter()
            .copied()
            .filter(|h| claims(*h))
            .chain(
                self.via_tunnel[from as usize]
                    .iter()
                    .filter(|(_, d)| claims(*d))
                    .map(|(_, d)| *d),
            )
            .min()
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct Ctx {
    now: SimTime,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    next_seq: u64,
    links: Vec<Vec<LinkOut>>,
    params: ProtocolParams,
    rng: ChaCha8Rng,
    log: Vec<LogEvent>,
    duration: SimTime,
}

impl Ctx {
    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(QueuedEvent { at, seq, kind }));
    }

    fn emit(&mut self, node: Handle, body: LogBody) {
        self.log.push(LogEvent { t: self.now, node, body });
    }

    /// One link-local transmission: a DELIVER per receivable out-link.
    fn broadcast(&mut self, from: Handle, sender: RouterId, msg: ControlMessage, tunneled: bool) {
        let outs = self.links[from as usize].clone();
        for link in outs {
            if !link.receivable {
                continue;
            }
            self.schedule(
                self.now + link.latency,
                EventKind::Deliver {
                    to: link.to,
                    sender: sender.clone(),
                    msg: msg.clone(),
                    tunneled,
                },
            );
        }
    }
}

pub struct Engine {
    nodes: Vec<SimNode>,
    ctx: Ctx,
    spec: ScenarioSpec,
    traces: Vec<TraceRecord>,
    resolver: TraceResolver,
    ground: GroundTruth,
}

/// Execute a validated scenario to completion.
pub fn run(spec: &ScenarioSpec) -> Result<RunOutput, EngineError> {
    Engine::build(spec)?.run_to_end()
}

impl Engine {
    fn build(spec: &ScenarioSpec) -> Result<Engine, EngineError> {
        let fail = |message: String| EngineError::Runtime {
            scenario: spec.name.clone(),
            message,
        };
        let params = spec.params.clone();
        let n = spec
            .nodes
            .iter()
            .map(|nd| nd.handle)
            .max()
            .map(|m| m as usize + 1)
            .unwrap_or(0);
        if spec.nodes.len() != n {
            return Err(fail("node handles must be dense 0..n".into()));
        }

        let mut links: Vec<Vec<LinkOut>> = vec![vec![]; n];
        for l in &spec.links {
            let latency = l
                .latency
                .map(SimDuration::from_secs_f64)
                .unwrap_or_else(|| params.latency_t());
            links[l.from as usize].push(LinkOut {
                to: l.to,
                receivable: l.receivable,
                latency,
            });
            if l.bidirectional {
                links[l.to as usize].push(LinkOut {
                    to: l.from,
                    receivable: true,
                    latency,
                });
            }
        }
        for out in &mut links {
            out.sort_by_key(|l| l.to);
        }

        let mut nodes: Vec<SimNode> = Vec::with_capacity(n);
        for nd in &spec.nodes {
            let claimed = spec.claimed_ids(nd);
            let (role, is_honest, label): (Role, bool, String) = match &nd.kind {
                NodeKindSpec::Honest => (
                    Role::Honest(Box::new(Self::honest_node(
                        nd.ids[0].clone(),
                        nd.willingness,
                        Overrides::default(),
                        vec![],
                        nd.tc_validity_schedule.clone(),
                    ))),
                    true,
                    "honest".into(),
                ),
                NodeKindSpec::Adversary => {
                    let attack = nd.attack.as_ref().expect("validated");
                    let resolved = attack.validate().map_err(|e| {
                        fail(format!("attack param {}: {}", e.field, e.message))
                    })?;
                    let label = format!("adversary:{}", serde_json::to_value(attack.kind)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_else(|| "?".into()));
                    match resolved {
                        ResolvedAttack::None
                        | ResolvedAttack::TcBurst { .. }
                        | ResolvedAttack::HopField { .. }
                        | ResolvedAttack::Blackhole
                        | ResolvedAttack::SeqnumExhaust { .. }
                        | ResolvedAttack::AnsnJump { .. }
                        | ResolvedAttack::LinkSpoofLsa { .. }
                        | ResolvedAttack::LoopLsa { .. } => {
                            let (overrides, plan, self_id) = Self::honest_chassis_config(
                                &resolved,
                                nd.ids[0].clone(),
                                spec.duration,
                            );
                            (
                                Role::Honest(Box::new(Self::honest_node(
                                    self_id,
                                    nd.willingness,
                                    overrides,
                                    plan,
                                    nd.tc_validity_schedule.clone(),
                                ))),
                                false,
                                label,
                            )
                        }
                        other => {
                            let start = match &other {
                                ResolvedAttack::TimingForge { start, .. } => *start,
                                _ => attack.params.start.unwrap_or(0.0),
                            };
                            let period = match &other {
                                ResolvedAttack::TimingForge { period, .. } => period
                                    .map(SimDuration::from_secs_f64)
                                    .unwrap_or_else(|| params.hello_interval_t()),
                                _ => params.hello_interval_t(),
                            };
                            (
                                Role::Spoofer(Box::new(SpooferNode {
                                    spoofer: Spoofer::new(
                                        nd.ids[0].clone(),
                                        nd.willingness,
                                        other,
                                        SimTime::from_secs_f64(start),
                                    ),
                                    period,
                                })),
                                false,
                                label,
                            )
                        }
                    }
                }
                NodeKindSpec::WormholeTap { peer, mode } => (
                    Role::Tap { peer: *peer, mode: *mode },
                    false,
                    "tap".into(),
                ),
            };
            nodes.push(SimNode {
                handle: nd.handle,
                claimed,
                is_honest,
                kind_label: label,
                role,
            });
        }

        // Ground truth for analysis: symmetric and one-way direct pairs.
        let mut recv: BTreeSet<(Handle, Handle)> = BTreeSet::new();
        for (from, outs) in links.iter().enumerate() {
            for l in outs {
                if l.receivable {
                    recv.insert((from as Handle, l.to));
                }
            }
        }
        let mut sym_pairs = BTreeSet::new();
        let mut uni_pairs = BTreeSet::new();
        for &(a, b) in &recv {
            if recv.contains(&(b, a)) {
                sym_pairs.insert((a.min(b), a.max(b)));
            } else {
                uni_pairs.insert((a, b));
            }
        }

        // Data-plane resolver structures.
        let mut direct: Vec<Vec<Handle>> = vec![vec![]; n];
        let mut via_tunnel: Vec<Vec<(Handle, Handle)>> = vec![vec![]; n];
        let mut via_control_only: Vec<Vec<(Handle, Handle)>> = vec![vec![]; n];
        for from in 0..n {
            for l in &links[from] {
                if !l.receivable {
                    continue;
                }
                match &nodes[l.to as usize].role {
                    Role::Tap { peer, mode } => {
                        let peer_outs: Vec<Handle> = links[*peer as usize]
                            .iter()
                            .filter(|pl| pl.receivable)
                            .map(|pl| pl.to)
                            .collect();
                        for d in peer_outs {
                            match mode {
                                TunnelMode::ControlAndData => {
                                    via_tunnel[from].push((l.to, d))
                                }
                                TunnelMode::ControlOnly => {
                                    via_control_only[from].push((l.to, d))
                                }
                            }
                        }
                    }
                    _ => direct[from].push(l.to),
                }
            }
            direct[from].sort_unstable();
            via_tunnel[from].sort_unstable();
            via_control_only[from].sort_unstable();
        }

        let mut engine = Engine {
            nodes,
            ctx: Ctx {
                now: SimTime::ZERO,
                queue: BinaryHeap::new(),
                next_seq: 0,
                links,
                params,
                rng: ChaCha8Rng::seed_from_u64(spec.seed),
                log: Vec::new(),
                duration: SimTime::from_secs_f64(spec.duration),
            },
            spec: spec.clone(),
            traces: Vec::new(),
            resolver: TraceResolver {
                direct,
                via_tunnel,
                via_control_only,
            },
            ground: GroundTruth { sym_pairs, uni_pairs },
        };
        engine.schedule_initial();
        Ok(engine)
    }

    fn honest_node(
        self_id: RouterId,
        willingness: u8,
        overrides: Overrides,
        plan: Vec<(SimTime, PlannedEmission)>,
        tc_validity: Option<ValiditySchedule>,
    ) -> HonestNode {
        HonestNode {
            state: RouterState::new(self_id, willingness),
            overrides,
            last_hello_sent: None,
            last_tc_sent: None,
            hello_gen: 0,
            tc_gen: 0,
            pending_hello: false,
            pending_tc: false,
            advertised_nonempty_last: false,
            flush_scheduled: None,
            expiry_scheduled: None,
            lq_gen: BTreeMap::new(),
            tc_validity,
            plan,
        }
    }

    fn honest_chassis_config(
        attack: &ResolvedAttack,
        own_id: RouterId,
        duration: f64,
    ) -> (Overrides, Vec<(SimTime, PlannedEmission)>, RouterId) {
        let mut overrides = Overrides::default();
        let mut plan = vec![];
        let mut self_id = own_id;
        match attack {
            ResolvedAttack::TcBurst { size, window, period, start, mpr_flag_all } => {
                overrides.mpr_flag_all = *mpr_flag_all;
                let mut t = *start;
                while t < duration {
                    for i in 0..*size {
                        let at = t + (i as f64) * window / (*size as f64).max(1.0);
                        plan.push((SimTime::from_secs_f64(at), PlannedEmission::BurstTc));
                    }
                    t += period;
                }
            }
            ResolvedAttack::HopField { tamper } => {
                overrides.forward = ForwardPolicy::Instant(*tamper);
            }
            ResolvedAttack::Blackhole => {
                overrides.data = DataPolicy::DropAll;
            }
            ResolvedAttack::SeqnumExhaust { target, count, window, ansn, start, mpr_flag_all } => {
                overrides.mpr_flag_all = *mpr_flag_all;
                for i in 0..*count {
                    let at = start + (i as f64) * window / (*count as f64).max(1.0);
                    plan.push((
                        SimTime::from_secs_f64(at),
                        PlannedEmission::SweepTc { seq: i, ansn: *ansn, target: target.clone() },
                    ));
                }
            }
            ResolvedAttack::AnsnJump { target, jump, start, mpr_flag_all } => {
                overrides.mpr_flag_all = *mpr_flag_all;
                plan.push((
                    SimTime::from_secs_f64(*start),
                    PlannedEmission::JumpTc { target: target.clone(), jump: *jump },
                ));
            }
            ResolvedAttack::LinkSpoofLsa { spoof_links } => {
                overrides.advertise_extra = spoof_links.clone();
                overrides.data = DataPolicy::DropFor(spoof_links.clone());
            }
            ResolvedAttack::LoopLsa { target } => {
                self_id = target.clone();
            }
            ResolvedAttack::None => {}
            _ => unreachable!("spoofer attacks do not use the honest chassis"),
        }
        plan.sort_by_key(|(t, _)| *t);
        (overrides, plan, self_id)
    }

    fn schedule_initial(&mut self) {
        for i in 0..self.nodes.len() {
            let handle = self.nodes[i].handle;
            let offset = SimTime((handle as u64 + 1) * 1_000);
            match &self.nodes[i].role {
                Role::Honest(node) => {
                    self.ctx.schedule(
                        offset,
                        EventKind::Timer {
                            node: handle,
                            timer: TimerKind::HelloPeriodic { gen: 0 },
                            neighbor: None,
                        },
                    );
                    let tc_at = offset + self.ctx.params.tc_interval_t().div_f64(2.0);
                    self.ctx.schedule(
                        tc_at,
                        EventKind::Timer {
                            node: handle,
                            timer: TimerKind::TcPeriodic { gen: 0 },
                            neighbor: None,
                        },
                    );
                    for (step, (at, _)) in node.plan.iter().enumerate() {
                        self.ctx.schedule(
                            *at,
                            EventKind::Timer {
                                node: handle,
                                timer: TimerKind::AttackStep { step },
                                neighbor: None,
                            },
                        );
                    }
                }
                Role::Spoofer(sp) => {
                    let start = sp.spoofer_start().max(offset);
                    self.ctx.schedule(
                        start,
                        EventKind::Timer {
                            node: handle,
                            timer: TimerKind::SpooferTick,
                            neighbor: None,
                        },
                    );
                }
                Role::Tap { .. } => {}
            }
        }
        for (index, probe) in self.spec.probes.iter().enumerate() {
            self.ctx.schedule(
                SimTime::from_secs_f64(probe.at),
                EventKind::Probe { index },
            );
        }
    }

    fn run_to_end(mut self) -> Result<RunOutput, EngineError> {
        loop {
            match self.ctx.queue.peek() {
                Some(Reverse(ev)) if ev.at <= self.ctx.duration => {}
                _ => break,
            }
            let Reverse(ev) = self.ctx.queue.pop().expect("peeked");
            self.ctx.now = ev.at;
            self.dispatch(ev.kind);
        }
        // Final sweep so snapshots reflect expired state at run end.
        self.ctx.now = self.ctx.duration;
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i].role, Role::Honest(_)) {
                let handle = self.nodes[i].handle;
                self.expiry_sweep(handle);
            }
        }

        let snapshots: Vec<NodeSnapshot> = self
            .nodes
            .iter()
            .map(|n| NodeSnapshot {
                handle: n.handle,
                claimed: n.claimed.clone(),
                is_honest: n.is_honest,
                kind_label: n.kind_label.clone(),
                state: match &n.role {
                    Role::Honest(h) => Some(Self::snapshot_state(&h.state, self.ctx.now, &self.ctx.params)),
                    _ => None,
                },
            })
            .collect();

        Ok(RunOutput {
            scenario_name: self.spec.name.clone(),
            seed: self.spec.seed,
            duration: self.ctx.duration,
            params: self.ctx.params.clone(),
            events: self.ctx.log,
            snapshots,
            traces: self.traces,
            ground: self.ground,
            resolver: self.resolver,
        })
    }

    fn snapshot_state(state: &RouterState, now: SimTime, params: &ProtocolParams) -> StateSnapshot {
        let edge = |a: &RouterId, b: &RouterId| {
            if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            }
        };
        let sym: Vec<RouterId> = state
            .usable_neighbors(now, params.lq_threshold)
            .iter()
            .map(|r| r.neighbor.clone())
            .collect();
        let mut perceived = BTreeSet::new();
        for n in &sym {
            perceived.insert(edge(&state.self_id, n));
        }
        for rec in state.two_hop_set.values() {
            perceived.insert(edge(&rec.via_neighbor, &rec.target));
        }
        for rec in state.topology_set.values() {
            perceived.insert(edge(&rec.advertiser, &rec.destination));
        }
        let mut global = BTreeSet::new();
        for rec in state.topology_set.values() {
            global.insert(edge(&rec.advertiser, &rec.destination));
        }
        for s in &state.advertised_set {
            global.insert(edge(&state.self_id, s));
        }
        StateSnapshot {
            self_id: state.self_id.clone(),
            sym_neighbors: sym,
            mprs: state.current_mprs().into_iter().collect(),
            advertised_set: state.advertised_set.iter().cloned().collect(),
            ansn: state.ansn,
            routing_table: state.routing_table.clone(),
            counters: state.counters,
            perceived_edges: perceived,
            global_view_edges: global,
            topology_empty: state.topology_set.is_empty(),
        }
    }

    // -- event dispatch -----------------------------------------------------

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::Deliver { to, sender, msg, tunneled } => {
                self.on_deliver(to, sender, msg, tunneled)
            }
            EventKind::Timer { node, timer, neighbor } => self.on_timer(node, timer, neighbor),
            EventKind::Probe { index } => self.on_probe(index),
        }
    }

    fn on_deliver(&mut self, to: Handle, sender: RouterId, msg: ControlMessage, tunneled: bool) {
        let idx = to as usize;
        match &mut self.nodes[idx].role {
            Role::Tap { peer, mode: _ } => {
                // Taps replay control traffic verbatim at their alter ego.
                if !tunneled {
                    let peer = *peer;
                    let latency = self.ctx.params.latency_t();
                    let at = self.ctx.now + latency;
                    let outs = self.ctx.links[peer as usize].clone();
                    for link in outs {
                        if link.receivable {
                            self.ctx.schedule(
                                at + link.latency,
                                EventKind::Deliver {
                                    to: link.to,
                                    sender: sender.clone(),
                                    msg: msg.clone(),
                                    tunneled: true,
                                },
                            );
                        }
                    }
                }
            }
            Role::Spoofer(sp) => {
                let out = sp.spoofer.observe(&msg, self.ctx.now, &self.ctx.params);
                let handle = self.nodes[idx].handle;
                for note in out.flips {
                    self.ctx.emit(handle, LogBody::AttackFlip { note });
                }
                for hello in out.hellos {
                    let sender_id = hello.originator.clone();
                    self.ctx.emit(
                        handle,
                        LogBody::HelloSent { origin: sender_id.clone(), seq: hello.msg_seq_num },
                    );
                    self.ctx
                        .broadcast(handle, sender_id, ControlMessage::Hello(hello), false);
                }
            }
            Role::Honest(_) => {
                self.ctx.emit(
                    to,
                    LogBody::Delivered {
                        sender: sender.clone(),
                        origin: msg.originator().clone(),
                        seq: msg.seq(),
                        hello: matches!(msg, ControlMessage::Hello(_)),
                        tunneled,
                    },
                );
                match msg {
                    ControlMessage::Hello(h) => self.honest_hello_in(to, h),
                    ControlMessage::Tc(t) => self.honest_tc_in(to, sender, t),
                }
            }
        }
    }

    fn honest_hello_in(&mut self, handle: Handle, hello: crate::types::HelloMessage) {
        let params = self.ctx.params.clone();
        let now = self.ctx.now;
        let node = self.honest_mut(handle);
        let before = node
            .state
            .neighbor_set
            .get(&hello.originator)
            .map(|r| (r.status(now), r.usable(now, params.lq_threshold)));
        let delta = process_hello(&mut node.state, &hello, now, &params);
        let after = node
            .state
            .neighbor_set
            .get(&hello.originator)
            .map(|r| (r.status(now), r.usable(now, params.lq_threshold)));
        if before != after {
            if let Some((status, usable)) = after {
                self.ctx.emit(
                    handle,
                    LogBody::LinkChanged { neighbor: hello.originator.clone(), status, usable },
                );
            }
        }
        if node_has_record(self.honest_mut(handle), &hello.originator) {
            self.schedule_lq_check(handle, &hello.originator);
        }
        self.postprocess(handle, delta);
        self.reschedule_expiry(handle);
    }

    fn honest_tc_in(&mut self, handle: Handle, sender: RouterId, tc: TcMessage) {
        let params = self.ctx.params.clone();
        let now = self.ctx.now;
        let hold = params.dup_hold();
        let node = self.honest_mut(handle);

        if tc.originator == node.state.self_id {
            return;
        }
        if !check_and_record_duplicate(&mut node.state, &tc.originator, tc.msg_seq_num, now, hold) {
            self.ctx.emit(
                handle,
                LogBody::DupDropped {
                    origin: tc.originator.clone(),
                    seq: tc.msg_seq_num,
                    sender,
                },
            );
            return;
        }
        self.ctx.emit(
            handle,
            LogBody::TcProcessed {
                origin: tc.originator.clone(),
                seq: tc.msg_seq_num,
                hop_count: tc.hop_count,
            },
        );

        let receive_hop_count = tc.hop_count as u32 + 1;
        let node = self.honest_mut(handle);
        let (delta, disposition) = process_tc(&mut node.state, &tc, receive_hop_count, now);
        match disposition {
            TcDisposition::Applied { changed } => {
                let validity = tc.validity_time.for_distance(receive_hop_count).as_secs_f64();
                self.ctx.emit(
                    handle,
                    LogBody::TcApplied {
                        origin: tc.originator.clone(),
                        seq: tc.msg_seq_num,
                        ansn: tc.ansn,
                        changed,
                        validity_s: validity,
                    },
                );
            }
            TcDisposition::OldAnsn => {
                self.ctx.emit(
                    handle,
                    LogBody::TcOldAnsn {
                        origin: tc.originator.clone(),
                        seq: tc.msg_seq_num,
                        ansn: tc.ansn,
                    },
                );
            }
            TcDisposition::OwnOrigin => {}
        }

        // Forwarding: decided once, at first receipt.
        let (node, ctx) = self.node_and_ctx(handle);
        match node.overrides.forward {
            ForwardPolicy::Honest => {
                if flooding::forward_decision(&node.state, &tc, &sender, now, &params) {
                    let due = flooding::schedule_forward(
                        &mut node.state,
                        &tc,
                        &sender,
                        now,
                        params.max_jitter_t(),
                        &mut ctx.rng,
                    );
                    let need = match node.flush_scheduled {
                        None => true,
                        Some(t) => due < t,
                    };
                    if need {
                        node.flush_scheduled = Some(due);
                        ctx.schedule(
                            due,
                            EventKind::Timer {
                                node: handle,
                                timer: TimerKind::Flush,
                                neighbor: None,
                            },
                        );
                    }
                }
            }
            ForwardPolicy::Instant(tamper) => {
                let mut out = tc.clone();
                out.hop_count = out.hop_count.saturating_add(1);
                out.hop_limit = out.hop_limit.saturating_sub(1);
                match tamper {
                    HopTamper::HopLimit(v) => out.hop_limit = v,
                    HopTamper::HopCount(HopCountMode::Zero) => out.hop_count = 0,
                    HopTamper::HopCount(HopCountMode::Max) => out.hop_count = u8::MAX,
                }
                node.state.counters.tcs_forwarded += 1;
                let self_id = node.state.self_id.clone();
                ctx.emit(
                    handle,
                    LogBody::TcForwarded {
                        origin: out.originator.clone(),
                        seq: out.msg_seq_num,
                        received_from: sender.clone(),
                        jitter_us: 0,
                        hop_count: out.hop_count,
                        hop_limit: out.hop_limit,
                    },
                );
                ctx.broadcast(handle, self_id, ControlMessage::Tc(out), false);
            }
        }

        self.postprocess(handle, delta);
        self.reschedule_expiry(handle);
    }

    fn on_timer(&mut self, handle: Handle, timer: TimerKind, neighbor: Option<RouterId>) {
        match timer {
            TimerKind::HelloPeriodic { gen } => {
                if self.honest_mut(handle).hello_gen == gen {
                    self.emit_hello(handle);
                }
            }
            TimerKind::TriggeredHello => {
                if self.honest_mut(handle).pending_hello {
                    self.emit_hello(handle);
                }
            }
            TimerKind::TcPeriodic { gen } => {
                if self.honest_mut(handle).tc_gen == gen {
                    self.emit_tc(handle);
                }
            }
            TimerKind::TriggeredTc => {
                if self.honest_mut(handle).pending_tc {
                    self.emit_tc(handle);
                }
            }
            TimerKind::Flush => self.flush_forwards(handle),
            TimerKind::ExpirySweep => self.expiry_sweep(handle),
            TimerKind::LinkQuality { gen } => {
                if let Some(nb) = neighbor {
                    self.lq_check(handle, nb, gen)
                }
            }
            TimerKind::SpooferTick => self.spoofer_tick(handle),
            TimerKind::AttackStep { step } => self.attack_step(handle, step),
        }
    }

    fn honest_mut(&mut self, handle: Handle) -> &mut HonestNode {
        match &mut self.nodes[handle as usize].role {
            Role::Honest(h) => h,
            _ => unreachable!("timer for non-honest node"),
        }
    }

    /// Disjoint borrows of one honest node and the shared context.
    fn node_and_ctx(&mut self, handle: Handle) -> (&mut HonestNode, &mut Ctx) {
        let Engine { nodes, ctx, .. } = self;
        match &mut nodes[handle as usize].role {
            Role::Honest(h) => (h.as_mut(), ctx),
            _ => unreachable!("timer for non-honest node"),
        }
    }

    fn emit_hello(&mut self, handle: Handle) {
        let params = self.ctx.params.clone();
        let now = self.ctx.now;
        let node = self.honest_mut(handle);
        let mut hello = generate_hello(&mut node.state, now, &params);
        if node.overrides.mpr_flag_all {
            for e in &mut hello.entries {
                if e.status == LinkStatus::Symmetric {
                    e.mpr = true;
                }
            }
        }
        node.last_hello_sent = Some(now);
        node.pending_hello = false;
        node.hello_gen += 1;
        let gen = node.hello_gen;
        let self_id = node.state.self_id.clone();
        let seq = hello.msg_seq_num;
        self.ctx.emit(handle, LogBody::HelloSent { origin: self_id.clone(), seq });
        self.ctx
            .broadcast(handle, self_id, ControlMessage::Hello(hello), false);
        self.ctx.schedule(
            now + params.hello_interval_t(),
            EventKind::Timer {
                node: handle,
                timer: TimerKind::HelloPeriodic { gen },
                neighbor: None,
            },
        );
    }

    fn emit_tc(&mut self, handle: Handle) {
        let params = self.ctx.params.clone();
        let now = self.ctx.now;
        let node = self.honest_mut(handle);
        let extra = node.overrides.advertise_extra.clone();
        let nonempty_last = node.advertised_nonempty_last;
        let mut built = generate_tc(&mut node.state, now, &params, nonempty_last);
        if built.is_none() && !extra.is_empty() {
            let seq = node.state.take_seq();
            node.state.counters.tcs_sent += 1;
            built = Some(TcMessage {
                originator: node.state.self_id.clone(),
                msg_seq_num: seq,
                ansn: node.state.ansn,
                hop_count: 0,
                hop_limit: params.tc_hop_limit,
                interval_time: params.tc_interval,
                validity_time: params.tc_validity(),
                advertised_neighbors: vec![],
            });
        }
        if let Some(mut tc) = built {
            if !extra.is_empty() {
                let mut set: BTreeSet<RouterId> = tc.advertised_neighbors.drain(..).collect();
                set.extend(extra.iter().cloned());
                tc.advertised_neighbors = set.into_iter().collect();
            }
            if let Some(sched) = &node.tc_validity {
                tc.validity_time = sched.clone();
            }
            node.advertised_nonempty_last = !tc.advertised_neighbors.is_empty();
            node.last_tc_sent = Some(now);
            node.pending_tc = false;
            node.tc_gen += 1;
            let gen = node.tc_gen;
            let self_id = node.state.self_id.clone();
            self.ctx.emit(
                handle,
                LogBody::TcSent {
                    origin: self_id.clone(),
                    seq: tc.msg_seq_num,
                    ansn: tc.ansn,
                    advertised: tc.advertised_neighbors.clone(),
                },
            );
            self.ctx
                .broadcast(handle, self_id, ControlMessage::Tc(tc), false);
            self.ctx.schedule(
                now + params.tc_interval_t(),
                EventKind::Timer {
                    node: handle,
                    timer: TimerKind::TcPeriodic { gen },
                    neighbor: None,
                },
            );
        } else {
            let node = self.honest_mut(handle);
            node.advertised_nonempty_last = false;
            node.pending_tc = false;
            node.tc_gen += 1;
            let gen = node.tc_gen;
            self.ctx.schedule(
                now + params.tc_interval_t(),
                EventKind::Timer {
                    node: handle,
                    timer: TimerKind::TcPeriodic { gen },
                    neighbor: None,
                },
            );
        }
    }

    fn flush_forwards(&mut self, handle: Handle) {
        let now = self.ctx.now;
        let node = self.honest_mut(handle);
        node.flush_scheduled = None;
        let Some(earliest) = flooding::earliest_due(&node.state) else {
            return;
        };
        if earliest > now {
            // Stale timer; re-arm for the real due time.
            node.flush_scheduled = Some(earliest);
            self.ctx.schedule(
                earliest,
                EventKind::Timer { node: handle, timer: TimerKind::Flush, neighbor: None },
            );
            return;
        }
        let jobs = flooding::flush_piggyback(&mut node.state, now);
        let self_id = node.state.self_id.clone();
        for job in jobs {
            self.ctx.emit(
                handle,
                LogBody::TcForwarded {
                    origin: job.message.originator.clone(),
                    seq: job.message.msg_seq_num,
                    received_from: job.received_from.clone(),
                    jitter_us: now.saturating_sub(job.received_at).0,
                    hop_count: job.message.hop_count,
                    hop_limit: job.message.hop_limit,
                },
            );
            self.ctx.broadcast(
                handle,
                self_id.clone(),
                ControlMessage::Tc(job.message),
                false,
            );
        }
    }

    fn expiry_sweep(&mut self, handle: Handle) {
        let now = self.ctx.now;
        let node = self.honest_mut(handle);
        node.expiry_scheduled = None;
        let (delta, report) = expire(&mut node.state, now);
        for n in report.neighbors_removed {
            self.ctx.emit(handle, LogBody::NeighborRemoved { neighbor: n });
        }
        for n in report.sym_lapsed {
            self.ctx.emit(
                handle,
                LogBody::LinkChanged { neighbor: n, status: LinkStatus::Lost, usable: false },
            );
        }
        for (dst, _) in report.topology_removed {
            let _ = dst; // covered by route diffs
        }
        if !delta.is_empty() {
            self.postprocess(handle, delta);
        }
        self.reschedule_expiry(handle);
    }

    fn reschedule_expiry(&mut self, handle: Handle) {
        let node = self.honest_mut(handle);
        let Some(next) = router::next_expiry(&node.state) else {
            return;
        };
        let need = match node.expiry_scheduled {
            None => true,
            Some(t) => next < t,
        };
        if need {
            node.expiry_scheduled = Some(next);
            self.ctx.schedule(
                next,
                EventKind::Timer { node: handle, timer: TimerKind::ExpirySweep, neighbor: None },
            );
        }
    }

    fn schedule_lq_check(&mut self, handle: Handle, neighbor: &RouterId) {
        let params = self.ctx.params.clone();
        let node = self.honest_mut(handle);
        let Some(rec) = node.state.neighbor_set.get(neighbor) else {
            return;
        };
        let deadline = rec.last_heard
            + SimDuration::from_secs_f64(params.lq_grace * rec.expected_interval);
        let gen = node.lq_gen.entry(neighbor.clone()).or_insert(0);
        *gen += 1;
        let gen = *gen;
        self.ctx.schedule(
            deadline,
            EventKind::Timer {
                node: handle,
                timer: TimerKind::LinkQuality { gen },
                neighbor: Some(neighbor.clone()),
            },
        );
    }

    fn lq_check(&mut self, handle: Handle, neighbor: RouterId, gen: u64) {
        let params = self.ctx.params.clone();
        let now = self.ctx.now;
        let node = self.honest_mut(handle);
        if node.lq_gen.get(&neighbor).copied() != Some(gen) {
            return;
        }
        let Some(rec) = node.state.neighbor_set.get_mut(&neighbor) else {
            return;
        };
        let gap = now.saturating_sub(rec.last_heard).as_secs_f64();
        if gap <= params.lq_grace * rec.expected_interval {
            return;
        }
        let was_usable = rec.usable(now, params.lq_threshold);
        rec.link_quality = router::update_link_quality(
            rec.link_quality,
            rec.expected_interval,
            gap,
            params.lq_alpha,
            params.lq_grace,
        );
        let quality = rec.link_quality;
        let usable = rec.usable(now, params.lq_threshold);
        let expected = rec.expected_interval;
        let was_selector = rec.is_mpr_selector;
        self.ctx.emit(handle, LogBody::LqMiss { neighbor: neighbor.clone(), quality });
        if was_usable && !usable {
            self.ctx.emit(handle, LogBody::LqExcluded { neighbor: neighbor.clone(), quality });
            self.ctx.emit(
                handle,
                LogBody::LinkChanged {
                    neighbor: neighbor.clone(),
                    status: LinkStatus::Heard,
                    usable: false,
                },
            );
            let delta = StateDelta {
                neighborhood_changed: true,
                mpr_selector_changed: was_selector,
                topology_changed: false,
            };
            self.postprocess(handle, delta);
        }
        // Keep checking until the record dies or a HELLO arrives.
        let node = self.honest_mut(handle);
        if node.state.neighbor_set.contains_key(&neighbor) {
            let next = now + SimDuration::from_secs_f64(expected);
            self.ctx.schedule(
                next,
                EventKind::Timer {
                    node: handle,
                    timer: TimerKind::LinkQuality { gen },
                    neighbor: Some(neighbor),
                },
            );
        }
    }

    fn spoofer_tick(&mut self, handle: Handle) {
        let params = self.ctx.params.clone();
        let now = self.ctx.now;
        let (out, period) = match &mut self.nodes[handle as usize].role {
            Role::Spoofer(sp) => (sp.spoofer.periodic_hellos(now, &params), sp.period),
            _ => unreachable!(),
        };
        for note in out.flips {
            self.ctx.emit(handle, LogBody::AttackFlip { note });
        }
        for hello in out.hellos {
            let sender_id = hello.originator.clone();
            self.ctx.emit(
                handle,
                LogBody::HelloSent { origin: sender_id.clone(), seq: hello.msg_seq_num },
            );
            self.ctx
                .broadcast(handle, sender_id, ControlMessage::Hello(hello), false);
        }
        self.ctx.schedule(
            now + period,
            EventKind::Timer { node: handle, timer: TimerKind::SpooferTick, neighbor: None },
        );
    }

    fn attack_step(&mut self, handle: Handle, step: usize) {
        let params = self.ctx.params.clone();
        let now = self.ctx.now;
        let node = self.honest_mut(handle);
        let Some((_, emission)) = node.plan.get(step).cloned().map(|e| (e.0, e.1)) else {
            return;
        };
        let (tc, note) = match emission {
            PlannedEmission::BurstTc => {
                let seq = node.state.take_seq();
                let advertised: Vec<RouterId> = node
                    .state
                    .usable_neighbors(now, params.lq_threshold)
                    .iter()
                    .map(|r| r.neighbor.clone())
                    .collect();
                let tc = TcMessage {
                    originator: node.state.self_id.clone(),
                    msg_seq_num: seq,
                    ansn: node.state.ansn,
                    hop_count: 0,
                    hop_limit: params.tc_hop_limit,
                    interval_time: params.tc_interval,
                    validity_time: params.tc_validity(),
                    advertised_neighbors: advertised,
                };
                (tc, format!("burst-tc seq={seq}"))
            }
            PlannedEmission::SweepTc { seq, ansn, target } => {
                let tc = TcMessage {
                    originator: target.clone(),
                    msg_seq_num: seq,
                    ansn,
                    hop_count: 0,
                    hop_limit: params.tc_hop_limit,
                    interval_time: params.tc_interval,
                    validity_time: params.tc_validity(),
                    advertised_neighbors: vec![],
                };
                (tc, format!("sweep-tc target={target} seq={seq}"))
            }
            PlannedEmission::JumpTc { target, jump } => {
                let stored = node.state.stored_ansn(&target).unwrap_or(0);
                let advertised: Vec<RouterId> = node
                    .state
                    .topology_set
                    .values()
                    .filter(|r| r.advertiser == target)
                    .map(|r| r.destination.clone())
                    .collect();
                let tc = TcMessage {
                    originator: target.clone(),
                    msg_seq_num: 50_000,
                    ansn: stored.wrapping_add(jump),
                    hop_count: 0,
                    hop_limit: params.tc_hop_limit,
                    interval_time: params.tc_interval,
                    validity_time: params.tc_validity(),
                    advertised_neighbors: advertised,
                };
                (tc, format!("jump-tc target={target} ansn={}", stored.wrapping_add(jump)))
            }
        };
        let sender = node.state.self_id.clone();
        self.ctx.emit(handle, LogBody::AttackEmit { note });
        self.ctx.broadcast(handle, sender, ControlMessage::Tc(tc), false);
    }

    /// Recompute whatever a state change invalidated, log the diffs, and
    /// schedule any triggered messages (rate-limited).
    fn postprocess(&mut self, handle: Handle, delta: StateDelta) {
        if delta.is_empty() {
            return;
        }
        let params = self.ctx.params.clone();
        let now = self.ctx.now;

        if delta.neighborhood_changed {
            let node = self.honest_mut(handle);
            let outcome = select_mprs(&mut node.state, now, &params);
            self.ctx.emit(handle, LogBody::MprRecalc { changed: outcome.changed });
            for t in &outcome.uncoverable {
                self.ctx.emit(handle, LogBody::MprUncoverable { target: t.clone() });
            }
            if outcome.changed {
                self.ctx.emit(
                    handle,
                    LogBody::MprSet { set: outcome.mprs.iter().cloned().collect() },
                );
                let node = self.honest_mut(handle);
                if !node.pending_hello {
                    node.pending_hello = true;
                    let at = match node.last_hello_sent {
                        Some(t) => (t + params.min_hello_interval()).max(now),
                        None => now,
                    };
                    self.ctx.schedule(
                        at,
                        EventKind::Timer {
                            node: handle,
                            timer: TimerKind::TriggeredHello,
                            neighbor: None,
                        },
                    );
                }
            }
        }

        if delta.neighborhood_changed || delta.mpr_selector_changed {
            let node = self.honest_mut(handle);
            if refresh_advertised_set(&mut node.state, now, &params) {
                let ansn = node.state.ansn;
                let set: Vec<RouterId> = node.state.advertised_set.iter().cloned().collect();
                self.ctx.emit(handle, LogBody::AdvertisedSet { ansn, set });
                let node = self.honest_mut(handle);
                if !node.pending_tc {
                    node.pending_tc = true;
                    let at = match node.last_tc_sent {
                        Some(t) => (t + params.min_tc_interval()).max(now),
                        None => now,
                    };
                    self.ctx.schedule(
                        at,
                        EventKind::Timer {
                            node: handle,
                            timer: TimerKind::TriggeredTc,
                            neighbor: None,
                        },
                    );
                }
            }
        }

        if delta.neighborhood_changed || delta.topology_changed {
            let node = self.honest_mut(handle);
            let old = node.state.routing_table.clone();
            let new = compute_routing_table(&mut node.state, now, &params);
            let changed = old != new;
            self.ctx.emit(handle, LogBody::RouteRecalc { changed });
            if changed {
                for (dst, (nh, d)) in &new.0 {
                    if old.0.get(dst) != Some(&(nh.clone(), *d)) {
                        self.ctx.emit(
                            handle,
                            LogBody::RouteAdded {
                                dst: dst.clone(),
                                next_hop: nh.clone(),
                                distance: *d,
                            },
                        );
                    }
                }
                for dst in old.0.keys() {
                    if !new.0.contains_key(dst) {
                        self.ctx.emit(handle, LogBody::RouteLost { dst: dst.clone() });
                    }
                }
            }
        }
    }

    // -- data plane ----------------------------------------------------------

    fn on_probe(&mut self, index: usize) {
        let probe = self.spec.probes[index].clone();
        let outcome = self.trace_data(&probe.src, &probe.dst);
        let src_handle = self
            .spec
            .honest_node_for(&probe.src)
            .expect("validated probe src");
        self.ctx.emit(
            src_handle,
            LogBody::ProbeResult {
                src: probe.src.clone(),
                dst: probe.dst.clone(),
                outcome: outcome.label(),
            },
        );
        self.traces.push(TraceRecord {
            at: self.ctx.now,
            src: probe.src,
            dst: probe.dst,
            outcome,
        });
    }

    /// Follow routing tables hop by hop over the effective topology.
    fn trace_data(&self, src: &RouterId, dst: &RouterId) -> TraceOutcome {
        let mut cur = self.spec.honest_node_for(src).expect("validated probe src");
        let mut path = vec![cur];
        let mut visited: BTreeSet<Handle> = BTreeSet::new();
        visited.insert(cur);
        let mut ttl = self.ctx.params.probe_ttl;

        loop {
            let node = &self.nodes[cur as usize];
            if node.claimed.contains(dst) {
                return TraceOutcome::Delivered { at: cur, path };
            }
            let (table, policy) = match &node.role {
                Role::Honest(h) => (&h.state.routing_table, &h.overrides.data),
                _ => {
                    return TraceOutcome::Dropped { at: cur, reason: "no-route".into() };
                }
            };
            match policy {
                DataPolicy::DropAll => {
                    return TraceOutcome::Dropped { at: cur, reason: "blackhole".into() }
                }
                DataPolicy::DropFor(ids) if ids.contains(dst) => {
                    return TraceOutcome::Dropped { at: cur, reason: "data-dropped".into() }
                }
                _ => {}
            }
            let Some(next_id) = table.next_hop(dst).cloned() else {
                return TraceOutcome::Dropped { at: cur, reason: "no-route".into() };
            };
            let next = self
                .resolver
                .direct[cur as usize]
                .iter()
                .copied()
                .filter(|h| self.nodes[*h as usize].claimed.contains(&next_id))
                .chain(
                    self.resolver.via_tunnel[cur as usize]
                        .iter()
                        .filter(|(_, d)| self.nodes[*d as usize].claimed.contains(&next_id))
                        .map(|(_, d)| *d),
                )
                .min();
            let Some(next) = next else {
                // A control-only tunnel that would reach the hop drops data
                // at the tap; otherwise the hop simply has no effective link.
                if let Some(tap) = self.resolver.via_control_only[cur as usize]
                    .iter()
                    .find(|(_, d)| self.nodes[*d as usize].claimed.contains(&next_id))
                    .map(|(tap, _)| *tap)
                {
                    return TraceOutcome::Dropped { at: tap, reason: "tunnel-no-data".into() };
                }
                return TraceOutcome::Dropped { at: cur, reason: "no-link".into() };
            };
            ttl = ttl.saturating_sub(1);
            if ttl == 0 {
                return TraceOutcome::TtlExpired { path };
            }
            if !visited.insert(next) {
                let pos = path.iter().position(|h| *h == next).unwrap_or(0);
                return TraceOutcome::Loop { cycle: path[pos..].to_vec() };
            }
            path.push(next);
            cur = next;
        }
    }
}

impl SpooferNode {
    fn spoofer_start(&self) -> SimTime {
        self.spoofer.start_time()
    }
}

fn node_has_record(node: &HonestNode, id: &RouterId) -> bool {
    node.state.neighbor_set.contains_key(id)
}
