//! Core protocol domain types: identities, time, link status and the two
//! control-message kinds (HELLO and TC).
//!
//! Everything here is a plain value type. Messages are in-memory structures
//! only; there is deliberately no wire encoding.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A router identity as claimed in control traffic.
///
/// This is what appears in message originator fields and neighbor entries.
/// It is *not* the simulator's ground-truth device handle: several devices
/// may claim the same `RouterId` (identity spoofing), and one device may
/// claim several.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RouterId(pub String);

impl RouterId {
    pub fn new(id: impl Into<String>) -> Self {
        RouterId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RouterId {
    fn from(s: &str) -> Self {
        RouterId(s.to_string())
    }
}

/// Simulation time in integer microseconds since run start.
///
/// Integer time keeps event ordering exact and event logs byte-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs_f64(secs: f64) -> Self {
        SimTime((secs * 1e6).round() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: SimTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add<SimDuration> for SimTime {
    type Output = SimTime;
    fn add(self, d: SimDuration) -> SimTime {
        SimTime(self.0 + d.0)
    }
}

impl fmt::Display for SimTime {
    /// Fixed six-decimal seconds, e.g. `12.345678`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// A span of simulation time in integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct SimDuration(pub u64);

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub fn from_secs_f64(secs: f64) -> Self {
        SimDuration((secs * 1e6).round() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn mul_f64(self, k: f64) -> Self {
        SimDuration((self.0 as f64 * k).round() as u64)
    }

    pub fn div_f64(self, k: f64) -> Self {
        SimDuration((self.0 as f64 / k).round() as u64)
    }
}

/// Perceived status of a link to a neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    /// The neighbor has been heard, but bi-directionality is unconfirmed.
    Heard,
    /// Confirmed bi-directional: the neighbor's HELLO listed this router.
    Symmetric,
    /// Explicitly advertised as lost, or symmetry lapsed.
    Lost,
}

impl fmt::Display for LinkStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LinkStatus::Heard => "heard",
            LinkStatus::Symmetric => "sym",
            LinkStatus::Lost => "lost",
        };
        f.write_str(s)
    }
}

/// Distance-dependent validity: ordered `(up_to_hops, validity)` entries,
/// the final entry applying to all greater distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValiditySchedule(pub Vec<ValidityEntry>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityEntry {
    pub up_to_hops: u32,
    pub seconds: f64,
}

impl ValiditySchedule {
    /// Single-entry schedule: one validity for all distances.
    pub fn uniform(seconds: f64) -> Self {
        ValiditySchedule(vec![ValidityEntry {
            up_to_hops: u32::MAX,
            seconds,
        }])
    }

    /// Validity for a receiver `distance` hops from the originator.
    /// The first entry with `up_to_hops >= distance` applies; past the end,
    /// the last entry does.
    pub fn for_distance(&self, distance: u32) -> SimDuration {
        for e in &self.0 {
            if distance <= e.up_to_hops {
                return SimDuration::from_secs_f64(e.seconds);
            }
        }
        let last = self.0.last().expect("schedule is never empty");
        SimDuration::from_secs_f64(last.seconds)
    }

    /// `up_to_hops` strictly increasing, validities positive, non-empty.
    pub fn is_well_formed(&self) -> bool {
        if self.0.is_empty() {
            return false;
        }
        let mut prev: Option<u32> = None;
        for e in &self.0 {
            if e.seconds <= 0.0 {
                return false;
            }
            if let Some(p) = prev {
                if e.up_to_hops <= p {
                    return false;
                }
            }
            prev = Some(e.up_to_hops);
        }
        true
    }
}

/// One neighbor entry in a HELLO.
#[derive(Debug, Clone, PartialEq)]
pub struct HelloEntry {
    pub id: RouterId,
    pub status: LinkStatus,
    /// Set when the sender has selected this neighbor as MPR.
    pub mpr: bool,
}

/// Link-local neighborhood advertisement. Never forwarded.
#[derive(Debug, Clone, PartialEq)]
pub struct HelloMessage {
    pub originator: RouterId,
    pub msg_seq_num: u32,
    pub willingness: u8,
    /// Announced gap until the sender's next HELLO, in seconds.
    pub interval_time: f64,
    pub validity_time: ValiditySchedule,
    pub entries: Vec<HelloEntry>,
}

impl HelloMessage {
    pub fn entry_for(&self, id: &RouterId) -> Option<&HelloEntry> {
        self.entries.iter().find(|e| &e.id == id)
    }
}

/// Network-wide link state advertisement, diffused by MPR flooding.
#[derive(Debug, Clone, PartialEq)]
pub struct TcMessage {
    pub originator: RouterId,
    pub msg_seq_num: u32,
    /// Freshness counter for the originator's advertised link set.
    pub ansn: u32,
    /// Hops traversed so far; incremented by each forwarder.
    pub hop_count: u8,
    /// Remaining forwarding budget; decremented by each forwarder.
    pub hop_limit: u8,
    pub interval_time: f64,
    pub validity_time: ValiditySchedule,
    pub advertised_neighbors: Vec<RouterId>,
}

/// Either control message kind, as carried by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlMessage {
    Hello(HelloMessage),
    Tc(TcMessage),
}

impl ControlMessage {
    pub fn originator(&self) -> &RouterId {
        match self {
            ControlMessage::Hello(h) => &h.originator,
            ControlMessage::Tc(t) => &t.originator,
        }
    }

    pub fn seq(&self) -> u32 {
        match self {
            ControlMessage::Hello(h) => h.msg_seq_num,
            ControlMessage::Tc(t) => t.msg_seq_num,
        }
    }
}

/// Flags returned by state-mutating operations, driving recalculation and
/// triggered messages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StateDelta {
    /// 1-hop or 2-hop information changed (membership or status).
    pub neighborhood_changed: bool,
    /// The MPR-selector set changed.
    pub mpr_selector_changed: bool,
    /// Topology records changed.
    pub topology_changed: bool,
}

impl StateDelta {
    pub const NONE: StateDelta = StateDelta {
        neighborhood_changed: false,
        mpr_selector_changed: false,
        topology_changed: false,
    };

    pub fn is_empty(&self) -> bool {
        !(self.neighborhood_changed || self.mpr_selector_changed || self.topology_changed)
    }

    pub fn merge(&mut self, other: StateDelta) {
        self.neighborhood_changed |= other.neighborhood_changed;
        self.mpr_selector_changed |= other.mpr_selector_changed;
        self.topology_changed |= other.topology_changed;
    }
}

/// Protocol timing and estimator parameters shared by every honest router in
/// a run. Scenario files may override any field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Periodic HELLO gap, seconds.
    pub hello_interval: f64,
    /// Periodic TC gap, seconds.
    pub tc_interval: f64,
    /// Validity = multiplier x interval for both message kinds.
    pub validity_multiplier: f64,
    /// Min triggered-message gap = interval / divisor.
    pub min_interval_divisor: f64,
    /// Upper bound on forwarding jitter, seconds.
    pub max_jitter: f64,
    /// How long duplicate records are held, seconds.
    pub dup_hold_time: f64,
    /// EWMA weight for the link-quality estimator.
    pub lq_alpha: f64,
    /// A HELLO gap within grace x expected interval counts as on time.
    pub lq_grace: f64,
    /// Links with quality below this are excluded from symmetric use.
    pub lq_threshold: f64,
    /// Default per-link latency, seconds.
    pub default_latency: f64,
    /// Initial hop budget on originated TCs.
    pub tc_hop_limit: u8,
    /// Max hops a traced data packet may take.
    pub probe_ttl: u32,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            hello_interval: 2.0,
            tc_interval: 5.0,
            validity_multiplier: 3.0,
            min_interval_divisor: 4.0,
            max_jitter: 0.5,
            dup_hold_time: 30.0,
            lq_alpha: 0.3,
            lq_grace: 1.5,
            lq_threshold: 0.3,
            default_latency: 0.001,
            tc_hop_limit: 255,
            probe_ttl: 64,
        }
    }
}

impl ProtocolParams {
    pub fn hello_interval_t(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.hello_interval)
    }

    pub fn tc_interval_t(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.tc_interval)
    }

    pub fn hello_validity(&self) -> ValiditySchedule {
        ValiditySchedule::uniform(self.hello_interval * self.validity_multiplier)
    }

    pub fn tc_validity(&self) -> ValiditySchedule {
        ValiditySchedule::uniform(self.tc_interval * self.validity_multiplier)
    }

    pub fn min_hello_interval(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.hello_interval / self.min_interval_divisor)
    }

    pub fn min_tc_interval(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.tc_interval / self.min_interval_divisor)
    }

    pub fn max_jitter_t(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.max_jitter)
    }

    pub fn dup_hold(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.dup_hold_time)
    }

    pub fn latency_t(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.default_latency)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_time_formats_fixed_width() {
        assert_eq!(SimTime(0).to_string(), "0.000000");
        assert_eq!(SimTime(1_500_000).to_string(), "1.500000");
        assert_eq!(SimTime(12_345_678).to_string(), "12.345678");
    }

    #[test]
    fn validity_schedule_lookup_uses_first_matching_entry() {
        let sched = ValiditySchedule(vec![
            ValidityEntry { up_to_hops: 1, seconds: 2.0 },
            ValidityEntry { up_to_hops: 2, seconds: 4.0 },
            ValidityEntry { up_to_hops: 3, seconds: 6.0 },
        ]);
        assert_eq!(sched.for_distance(1), SimDuration::from_secs_f64(2.0));
        assert_eq!(sched.for_distance(2), SimDuration::from_secs_f64(4.0));
        assert_eq!(sched.for_distance(3), SimDuration::from_secs_f64(6.0));
        // Past the last entry the final validity applies.
        assert_eq!(sched.for_distance(9), SimDuration::from_secs_f64(6.0));
    }

    #[test]
    fn validity_schedule_well_formedness() {
        assert!(ValiditySchedule::uniform(6.0).is_well_formed());
        let bad_order = ValiditySchedule(vec![
            ValidityEntry { up_to_hops: 2, seconds: 2.0 },
            ValidityEntry { up_to_hops: 1, seconds: 4.0 },
        ]);
        assert!(!bad_order.is_well_formed());
        let bad_value = ValiditySchedule(vec![ValidityEntry { up_to_hops: 1, seconds: 0.0 }]);
        assert!(!bad_value.is_well_formed());
        assert!(!ValiditySchedule(vec![]).is_well_formed());
    }

    #[test]
    fn default_params_follow_interval_ratios() {
        let p = ProtocolParams::default();
        assert_eq!(p.min_hello_interval(), SimDuration::from_secs_f64(0.5));
        assert_eq!(p.min_tc_interval(), SimDuration::from_secs_f64(1.25));
        assert_eq!(p.hello_validity().for_distance(1), SimDuration::from_secs_f64(6.0));
        assert_eq!(p.tc_validity().for_distance(4), SimDuration::from_secs_f64(15.0));
    }
}
