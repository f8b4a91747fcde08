//! Scenario files: topology, protocol parameters, adversary placements,
//! data-traffic probes and machine-checkable assertions, as diff-friendly
//! JSON. Loading applies defaults and validates everything up front so a
//! malformed scenario is rejected before t=0 with a diagnostic naming the
//! offending field.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackConfig;
use crate::types::{ProtocolParams, RouterId, ValiditySchedule};

pub type Handle = u32;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// What a simulated device is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKindSpec {
    Honest,
    Adversary,
    WormholeTap { peer: Handle, mode: TunnelMode },
}

/// What a wormhole tunnel relays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TunnelMode {
    ControlOnly,
    ControlAndData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub handle: Handle,
    /// Identities this device claims as its own (spoofed identities from an
    /// attack config are added on top at engine build time).
    #[serde(default)]
    pub ids: Vec<RouterId>,
    pub kind: NodeKindSpec,
    #[serde(default = "default_willingness")]
    pub willingness: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
    /// Distance-dependent validity announced in this node's own TCs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tc_validity_schedule: Option<ValiditySchedule>,
}

fn default_willingness() -> u8 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: Handle,
    pub to: Handle,
    /// Transmissions from `from` are receivable at `to`.
    #[serde(default = "default_true")]
    pub receivable: bool,
    /// Per-link latency in seconds; the params default applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<f64>,
    /// Shortcut: also create the reverse direction (receivable).
    #[serde(default = "default_true")]
    pub bidirectional: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// When to trace, in seconds.
    pub at: f64,
    pub src: RouterId,
    pub dst: RouterId,
}

/// Which routers an assertion ranges over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RouterSelector {
    AllHonest(AllHonestTag),
    List(Vec<RouterId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllHonestTag {
    AllHonest,
}

pub const ALL_HONEST: RouterSelector = RouterSelector::AllHonest(AllHonestTag::AllHonest);

/// Expected landing spot of a traced packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceExpect {
    /// Absorbed by this device (handle disambiguates identity claimants).
    DeliveredAtHandle(Handle),
    /// Absorbed by the unique honest router with this id.
    DeliveredAt(RouterId),
    DroppedAtHandle(Handle),
    /// Next-hop cycle containing exactly these routers.
    Loop(Vec<RouterId>),
}

/// One machine-checkable claim about a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssertionSpec {
    /// The router's final MPR set equals exactly this set.
    MprSet {
        id: String,
        router: RouterId,
        equals: Vec<RouterId>,
    },
    /// Flooding coverage for TCs originated by `origin`: either full (every
    /// honest node processed every countable TC) or excluding the listed
    /// routers (they processed none). TCs originated too close to the end of
    /// the run to settle are not counted (margin seconds, default 5).
    Coverage {
        id: String,
        origin: RouterId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        full: Option<bool>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        excludes: Vec<RouterId>,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    /// Total TCs processed at `router` that originated from any of `origins`
    /// is at most `max`.
    TcProcessedTotal {
        id: String,
        router: RouterId,
        origins: Vec<RouterId>,
        max: u64,
    },
    /// Content applications at `router` from `origin` within [from, to]:
    /// bounded below and/or above.
    AppliedInWindow {
        id: String,
        router: RouterId,
        origin: RouterId,
        from: f64,
        to: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<u64>,
    },
    /// At least `min` TCs from `origin` were discarded at `router` for
    /// carrying an ANSN older than stored.
    OldAnsnMin {
        id: String,
        router: RouterId,
        origin: RouterId,
        min: u64,
    },
    /// A duplicate copy of some TC from `origin`, transmitted by
    /// `from_sender`, was suppressed at `router`.
    DupDropExists {
        id: String,
        router: RouterId,
        origin: RouterId,
        from_sender: RouterId,
    },
    /// The recorded probe trace for (src, dst) matches one of the expected
    /// outcomes.
    Trace {
        id: String,
        src: RouterId,
        dst: RouterId,
        any_of: Vec<TraceExpect>,
    },
    /// find_loops toward `dst` returns exactly these cycles (each a set of
    /// router ids; empty list = loop-free).
    Loops {
        id: String,
        dst: RouterId,
        equals: Vec<Vec<RouterId>>,
    },
    /// Globally-diffused topology views agree across the selected routers.
    Consistency {
        id: String,
        routers: RouterSelector,
        expect: bool,
    },
    /// The router's full perceived edge set (symmetric 1-hop, 2-hop records,
    /// topology records) equals exactly these undirected edges.
    SnapshotEdges {
        id: String,
        router: RouterId,
        equals: Vec<(RouterId, RouterId)>,
    },
    /// Every selected router's perceived edge set contains these edges.
    MapContains {
        id: String,
        routers: RouterSelector,
        edges: Vec<(RouterId, RouterId)>,
    },
    /// Steady-state message-rate ratio against the paired baseline run.
    RateRatio {
        id: String,
        router: RouterId,
        counter: RateCounter,
        expected: f64,
        tolerance: f64,
    },
    /// Mean effective forwarding jitter at `router`, as a fraction of
    /// max_jitter, within [min, max].
    MeanJitterRatio {
        id: String,
        router: RouterId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    /// Victim recalculations keep up with attacker flips: `counter` events at
    /// `router` during the steady window >= attacker flip events (flips
    /// within the last second are not demanded).
    RecalcVsFlips {
        id: String,
        router: RouterId,
        counter: RecalcCounter,
        attacker: Handle,
    },
    /// route_recalcs at `router` >= content applications from `origin`.
    RecalcVsApplied {
        id: String,
        router: RouterId,
        origin: RouterId,
    },
    /// `router` lost its neighbor record (or symmetry) for `neighbor` within
    /// `within` seconds of some instant after `after`.
    LinkDownWithin {
        id: String,
        router: RouterId,
        neighbor: RouterId,
        after: f64,
        within: f64,
    },
    /// Link-quality exclusion of (router, neighbor) happened after at most
    /// `max_misses` miss events.
    LqExcludedWithinMisses {
        id: String,
        router: RouterId,
        neighbor: RouterId,
        max_misses: u64,
    },
    /// Route at `router` toward `dst` flapped (present -> absent) at least
    /// `min` times.
    RouteFlapsMin {
        id: String,
        router: RouterId,
        dst: RouterId,
        min: u64,
    },
    /// Every content application at `router` from `advertiser` after `after`
    /// used exactly this validity (seconds); at least one such application.
    TopoValidityExact {
        id: String,
        router: RouterId,
        advertiser: RouterId,
        after: f64,
        seconds: f64,
    },
    /// Final count of usable symmetric links at `router` equals this.
    SymCount {
        id: String,
        router: RouterId,
        equals: u64,
    },
    /// The router's final topology set is empty.
    TopologyEmpty { id: String, router: RouterId },
    /// The router's final table reaches `dst`, optionally at an exact
    /// distance.
    RouteExists {
        id: String,
        router: RouterId,
        dst: RouterId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distance: Option<u32>,
    },
    /// No honest TC ever advertised a link that exists only through the
    /// attacker (identity-spoof stealth contract).
    NoSpoofLeak { id: String, attacker: Handle },
    /// Final counter value at `router` is at least `min`.
    CounterMin {
        id: String,
        router: RouterId,
        counter: RecalcCounter,
        min: u64,
    },
}

fn default_margin() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCounter {
    HellosSent,
    TcsSent,
}

impl fmt::Display for RateCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateCounter::HellosSent => f.write_str("hellos_sent"),
            RateCounter::TcsSent => f.write_str("tcs_sent"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecalcCounter {
    MprRecalcs,
    RouteRecalcs,
    HellosSent,
    TcsSent,
    TcsForwarded,
}

impl fmt::Display for RecalcCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RecalcCounter::MprRecalcs => "mpr_recalcs",
            RecalcCounter::RouteRecalcs => "route_recalcs",
            RecalcCounter::HellosSent => "hellos_sent",
            RecalcCounter::TcsSent => "tcs_sent",
            RecalcCounter::TcsForwarded => "tcs_forwarded",
        };
        f.write_str(s)
    }
}

impl AssertionSpec {
    pub fn id(&self) -> &str {
        match self {
            AssertionSpec::MprSet { id, .. }
            | AssertionSpec::Coverage { id, .. }
            | AssertionSpec::TcProcessedTotal { id, .. }
            | AssertionSpec::AppliedInWindow { id, .. }
            | AssertionSpec::OldAnsnMin { id, .. }
            | AssertionSpec::DupDropExists { id, .. }
            | AssertionSpec::Trace { id, .. }
            | AssertionSpec::Loops { id, .. }
            | AssertionSpec::Consistency { id, .. }
            | AssertionSpec::SnapshotEdges { id, .. }
            | AssertionSpec::MapContains { id, .. }
            | AssertionSpec::RateRatio { id, .. }
            | AssertionSpec::MeanJitterRatio { id, .. }
            | AssertionSpec::RecalcVsFlips { id, .. }
            | AssertionSpec::RecalcVsApplied { id, .. }
            | AssertionSpec::LinkDownWithin { id, .. }
            | AssertionSpec::LqExcludedWithinMisses { id, .. }
            | AssertionSpec::RouteFlapsMin { id, .. }
            | AssertionSpec::TopoValidityExact { id, .. }
            | AssertionSpec::SymCount { id, .. }
            | AssertionSpec::TopologyEmpty { id, .. }
            | AssertionSpec::RouteExists { id, .. }
            | AssertionSpec::NoSpoofLeak { id, .. }
            | AssertionSpec::CounterMin { id, .. } => id,
        }
    }
}

/// A complete executable scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Run length in seconds.
    pub duration: f64,
    #[serde(default)]
    pub params: ProtocolParams,
    /// Sibling scenario providing the attack-off pairing for rate ratios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<AssertionSpec>,
}

impl ScenarioSpec {
    pub fn node(&self, handle: Handle) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.handle == handle)
    }

    /// All identities a node will claim in traffic, spoofed ones included.
    pub fn claimed_ids(&self, node: &NodeSpec) -> Vec<RouterId> {
        let mut ids = node.ids.clone();
        if let Some(attack) = &node.attack {
            for id in attack.claimed_ids() {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        ids
    }

    /// Honest routers by id.
    pub fn honest_ids(&self) -> Vec<RouterId> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKindSpec::Honest))
            .flat_map(|n| n.ids.clone())
            .collect()
    }

    /// The unique honest node claiming `id`, if any.
    pub fn honest_node_for(&self, id: &RouterId) -> Option<Handle> {
        self.nodes
            .iter()
            .find(|n| matches!(n.kind, NodeKindSpec::Honest) && n.ids.contains(id))
            .map(|n| n.handle)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(ScenarioError::invalid("name", "must be non-empty"));
        }
        if !(self.duration > 0.0) {
            return Err(ScenarioError::invalid("duration", "must be positive"));
        }
        let warmup = 3.0 * self.params.tc_interval;
        if self.duration <= warmup {
            return Err(ScenarioError::invalid(
                "duration",
                format!("must exceed the warm-up of {warmup} s (3 x tc_interval)"),
            ));
        }
        for (field, value) in [
            ("params.hello_interval", self.params.hello_interval),
            ("params.tc_interval", self.params.tc_interval),
            ("params.validity_multiplier", self.params.validity_multiplier),
            ("params.min_interval_divisor", self.params.min_interval_divisor),
            ("params.dup_hold_time", self.params.dup_hold_time),
            ("params.lq_grace", self.params.lq_grace),
            ("params.default_latency", self.params.default_latency),
        ] {
            if !(value > 0.0) {
                return Err(ScenarioError::invalid(field, "must be positive"));
            }
        }
        if !(self.params.max_jitter >= 0.0) {
            return Err(ScenarioError::invalid("params.max_jitter", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.params.lq_alpha) {
            return Err(ScenarioError::invalid("params.lq_alpha", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.params.lq_threshold) {
            return Err(ScenarioError::invalid("params.lq_threshold", "must be in [0, 1]"));
        }

        let mut handles = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let at = |f: &str| format!("nodes[{i}].{f}");
            if !handles.insert(node.handle) {
                return Err(ScenarioError::invalid(
                    at("handle"),
                    format!("duplicate handle {}", node.handle),
                ));
            }
            if node.willingness > 7 {
                return Err(ScenarioError::invalid(at("willingness"), "must be 0..=7"));
            }
            if let Some(sched) = &node.tc_validity_schedule {
                if !sched.is_well_formed() {
                    return Err(ScenarioError::invalid(
                        at("tc_validity_schedule"),
                        "entries must be non-empty, strictly increasing in up_to_hops, positive in seconds",
                    ));
                }
            }
            match &node.kind {
                NodeKindSpec::Honest => {
                    if node.ids.len() != 1 {
                        return Err(ScenarioError::invalid(
                            at("ids"),
                            "honest nodes claim exactly one id",
                        ));
                    }
                    if node.attack.is_some() {
                        return Err(ScenarioError::invalid(
                            at("attack"),
                            "honest nodes carry no attack config",
                        ));
                    }
                }
                NodeKindSpec::Adversary => {
                    if node.ids.len() != 1 {
                        return Err(ScenarioError::invalid(
                            at("ids"),
                            "adversary nodes declare exactly one own id (spoofed ids come from the attack)",
                        ));
                    }
                    let attack = node.attack.as_ref().ok_or_else(|| {
                        ScenarioError::invalid(at("attack"), "adversary nodes require an attack config")
                    })?;
                    attack
                        .validate()
                        .map_err(|e| ScenarioError::invalid(format!("{}.{}", at("attack"), e.field), e.message))?;
                }
                NodeKindSpec::WormholeTap { peer, mode: _ } => {
                    if !node.ids.is_empty() {
                        return Err(ScenarioError::invalid(
                            at("ids"),
                            "wormhole taps claim no identities",
                        ));
                    }
                    let Some(peer_node) = self.node(*peer) else {
                        return Err(ScenarioError::invalid(
                            at("kind.peer"),
                            format!("peer handle {peer} does not exist"),
                        ));
                    };
                    match &peer_node.kind {
                        NodeKindSpec::WormholeTap { peer: back, .. } if *back == node.handle => {}
                        _ => {
                            return Err(ScenarioError::invalid(
                                at("kind.peer"),
                                "wormhole taps must be reciprocal pairs",
                            ));
                        }
                    }
                }
            }
        }

        // An id may be claimed by at most one honest node.
        let mut honest_seen: BTreeSet<&RouterId> = BTreeSet::new();
        for node in &self.nodes {
            if matches!(node.kind, NodeKindSpec::Honest) {
                for id in &node.ids {
                    if !honest_seen.insert(id) {
                        return Err(ScenarioError::invalid(
                            "nodes",
                            format!("id `{id}` is claimed by more than one honest node"),
                        ));
                    }
                }
            }
        }

        for (i, link) in self.links.iter().enumerate() {
            let at = |f: &str| format!("links[{i}].{f}");
            if !handles.contains(&link.from) {
                return Err(ScenarioError::invalid(
                    at("from"),
                    format!("unknown handle {}", link.from),
                ));
            }
            if !handles.contains(&link.to) {
                return Err(ScenarioError::invalid(at("to"), format!("unknown handle {}", link.to)));
            }
            if link.from == link.to {
                return Err(ScenarioError::invalid(at("to"), "self links are not allowed"));
            }
            if let Some(l) = link.latency {
                if !(l > 0.0) {
                    return Err(ScenarioError::invalid(at("latency"), "must be positive"));
                }
            }
        }

        let known_ids: BTreeSet<RouterId> = self
            .nodes
            .iter()
            .flat_map(|n| self.claimed_ids(n))
            .collect();
        for (i, probe) in self.probes.iter().enumerate() {
            let at = |f: &str| format!("probes[{i}].{f}");
            if probe.at < 0.0 || probe.at > self.duration {
                return Err(ScenarioError::invalid(at("at"), "must lie within the run"));
            }
            if self.honest_node_for(&probe.src).is_none() {
                return Err(ScenarioError::invalid(
                    at("src"),
                    format!("`{}` is not an honest router id", probe.src),
                ));
            }
            if !known_ids.contains(&probe.dst) {
                return Err(ScenarioError::invalid(
                    at("dst"),
                    format!("`{}` is claimed by no node", probe.dst),
                ));
            }
        }

        let mut assertion_ids = BTreeSet::new();
        for (i, a) in self.assertions.iter().enumerate() {
            if !assertion_ids.insert(a.id().to_string()) {
                return Err(ScenarioError::invalid(
                    format!("assertions[{i}].id"),
                    format!("duplicate assertion id `{}`", a.id()),
                ));
            }
            if let AssertionSpec::RateRatio { .. } = a {
                if self.baseline.is_none() {
                    return Err(ScenarioError::invalid(
                        format!("assertions[{i}]"),
                        "rate_ratio requires a `baseline` scenario",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Load and validate a scenario file, applying defaults.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let spec: ScenarioSpec =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    spec.validate()?;
    Ok(spec)
}

/// Resolve the baseline path of a spec relative to the spec's own location.
pub fn baseline_path(spec_path: &Path, baseline: &str) -> PathBuf {
    spec_path
        .parent()
        .map(|d| d.join(baseline))
        .unwrap_or_else(|| PathBuf::from(baseline))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ScenarioSpec {
        ScenarioSpec {
            name: "minimal".into(),
            seed: 1,
            duration: 30.0,
            params: ProtocolParams::default(),
            baseline: None,
            nodes: vec![
                NodeSpec {
                    handle: 0,
                    ids: vec![RouterId::from("a")],
                    kind: NodeKindSpec::Honest,
                    willingness: 3,
                    attack: None,
                    tc_validity_schedule: None,
                },
                NodeSpec {
                    handle: 1,
                    ids: vec![RouterId::from("b")],
                    kind: NodeKindSpec::Honest,
                    willingness: 3,
                    attack: None,
                    tc_validity_schedule: None,
                },
            ],
            links: vec![LinkSpec {
                from: 0,
                to: 1,
                receivable: true,
                latency: None,
                bidirectional: true,
            }],
            probes: vec![],
            assertions: vec![],
        }
    }

    #[test]
    fn minimal_scenario_validates_with_defaults() {
        let json = r#"{
            "name": "two-node",
            "duration": 30.0,
            "nodes": [
                {"handle": 0, "ids": ["a"], "kind": "honest"},
                {"handle": 1, "ids": ["b"], "kind": "honest"}
            ],
            "links": [{"from": 0, "to": 1}]
        }"#;
        let spec: ScenarioSpec = serde_json::from_str(json).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.params, ProtocolParams::default());
        assert_eq!(spec.nodes[0].willingness, 3);
        assert!(spec.links[0].bidirectional && spec.links[0].receivable);
    }

    #[test]
    fn round_trip_is_identical() {
        let spec = minimal();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn duplicate_handles_are_named() {
        let mut spec = minimal();
        spec.nodes[1].handle = 0;
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("nodes[1].handle"), "{err}");
    }

    #[test]
    fn unknown_link_endpoint_is_named() {
        let mut spec = minimal();
        spec.links[0].to = 9;
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("links[0].to"), "{err}");
    }

    #[test]
    fn missing_attack_param_is_named() {
        let json = r#"{
            "name": "bad-a11",
            "duration": 30.0,
            "nodes": [
                {"handle": 0, "ids": ["a"], "kind": "honest"},
                {"handle": 1, "ids": ["xx"], "kind": "adversary",
                 "attack": {"kind": "ansn_jump", "params": {"target": "a"}}}
            ],
            "links": [{"from": 0, "to": 1}]
        }"#;
        let spec: ScenarioSpec = serde_json::from_str(json).unwrap();
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("jump"), "{err}");
    }

    #[test]
    fn taps_must_be_reciprocal() {
        let mut spec = minimal();
        spec.nodes.push(NodeSpec {
            handle: 2,
            ids: vec![],
            kind: NodeKindSpec::WormholeTap {
                peer: 0,
                mode: TunnelMode::ControlAndData,
            },
            willingness: 3,
            attack: None,
            tc_validity_schedule: None,
        });
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("kind.peer"), "{err}");
    }

    #[test]
    fn probe_ids_must_resolve() {
        let mut spec = minimal();
        spec.probes.push(ProbeSpec {
            at: 10.0,
            src: RouterId::from("zz"),
            dst: RouterId::from("b"),
        });
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("probes[0].src"), "{err}");
    }
}
