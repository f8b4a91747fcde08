//! Pluggable attacker behaviors, one per attack class: configuration,
//! validation, and the HELLO-spoofer runtime.
//!
//! Attacks come in two chassis. *Spoofer* attacks participate only through
//! forged HELLOs (identity duplication, link spoofing, timing forgery,
//! indirect jamming) and are implemented here. *Honest-chassis* attacks run
//! the full honest state machine with targeted overrides (tampered
//! forwarding, burst/sweep/jump emissions, stolen identity, data-plane
//! drops); the engine applies those overrides so that a disabled attack is
//! bit-identical to an honest node.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::types::{
    HelloEntry, HelloMessage, LinkStatus, ProtocolParams, RouterId, SimTime, TcMessage,
    ValiditySchedule,
};

/// Attack classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Inert: behave exactly like an honest node.
    None,
    /// A1: claim a neighbor's identity, advertise no links.
    #[serde(rename = "spoof_1hop_dup")]
    Spoof1hopDup,
    /// A2: claim a neighbor's identity, advertise real links, never forward.
    #[serde(rename = "spoof_1hop_link")]
    Spoof1hopLink,
    /// A3: claim a 2-hop router's identity to equalize neighbor sets.
    #[serde(rename = "spoof_2hop_dup")]
    Spoof2hopDup,
    /// A4: claim an identity adjacent to two victims at once.
    #[serde(rename = "spoof_2hop_cover")]
    Spoof2hopCover,
    /// A5: advertise HELLO links to a configured or overheard id set.
    LinkSpoofHello,
    /// A6: TC bursts that collapse a victim's forwarding jitter.
    TcBurst,
    /// A7: instant forwarding with tampered hop fields.
    HopField,
    /// A8: honest control plane, drop all data.
    Blackhole,
    /// A10: sweep message sequence numbers under a spoofed identity.
    SeqnumExhaust,
    /// A11: one TC with a far-future ANSN under a spoofed identity.
    AnsnJump,
    /// A12: spoofed HELLO announcing a tiny interval time.
    IntervalForge,
    /// A13: spoofed HELLO announcing a tiny validity time.
    ValidityForge,
    /// A14: alternate a spoofed link (or own willingness) to force MPR churn.
    IndirectJamNd,
    /// A15: alternate MPR selection and LOST toward victims to force TC churn.
    IndirectJamLsa,
    /// A16: claim remote identities, neighborhood discovery only.
    IdSpoofNd,
    /// A17: claim an identity and select a neighbor as MPR so it advertises
    /// the spoofed link network-wide.
    IdSpoofLsa,
    /// A18: A5 minus ids within two hops, to evade the observer's checks.
    LinkSpoofNdStealth,
    /// A19: accept MPR selection and advertise spoofed links in own TCs.
    LinkSpoofLsa,
    /// A20: full protocol participation under a stolen identity.
    LoopLsa,
    /// A21: stolen identity, neighborhood discovery only, select the victim
    /// as MPR so it advertises the phantom link.
    LoopNd,
}

/// How hop fields are tampered by A7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopCountMode {
    Zero,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JamNdMode {
    Link,
    Willingness,
}

/// Raw attack parameters as they appear in scenario JSON. Which fields are
/// required depends on the attack kind; `AttackConfig::validate` checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<RouterId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<RouterId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learn_window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plus_phantom: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phantom_id: Option<RouterId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude: Option<Vec<RouterId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burst_size: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burst_window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burst_period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_limit: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_count: Option<HopCountMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_ansn: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forged_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forged_validity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<JamNdMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub victim: Option<RouterId>,
    /// A15: explicit victim list; absent = all neighbors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub victims: Option<Vec<RouterId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpr_neighbor: Option<RouterId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spoof_links: Option<Vec<RouterId>>,
    /// Flag every symmetric neighbor as MPR (so they forward our TCs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpr_flag_all: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    #[serde(default)]
    pub params: AttackParams,
}

/// A named-field validation failure inside an attack config.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub field: String,
    pub message: String,
}

impl ParamError {
    fn missing(field: &str) -> Self {
        ParamError {
            field: format!("params.{field}"),
            message: "required for this attack kind".into(),
        }
    }

    fn bad(field: &str, message: impl Into<String>) -> Self {
        ParamError {
            field: format!("params.{field}"),
            message: message.into(),
        }
    }
}

/// Where a link-spoofer's advertised id set comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SpoofSet {
    List(Vec<RouterId>),
    Overheard {
        learn_window: f64,
        plus_phantom: Option<RouterId>,
    },
}

/// What a spoofer's HELLOs advertise besides its identity claims.
#[derive(Debug, Clone, PartialEq)]
pub enum AdvertisePolicy {
    /// No neighbor entries at all.
    Nothing,
    /// Real heard neighbors with honest status.
    Heard,
    /// Heard neighbors plus a spoofed id set, minus exclusions.
    HeardPlus {
        set: SpoofSet,
        exclude: Vec<RouterId>,
        exclude_within_two_hops: bool,
    },
}

/// Typed, defaulted view of an attack config.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedAttack {
    None,
    /// A1-A5, A16-A18, A21, A17 share the HELLO-spoofer chassis.
    HelloSpoof {
        /// Identities to emit HELLOs under; empty = the node's own id.
        identities: Vec<RouterId>,
        advertise: AdvertisePolicy,
        /// Flag this neighbor as our MPR in every HELLO.
        mpr_flag: Option<RouterId>,
    },
    /// A12/A13.
    TimingForge {
        target: RouterId,
        forged_interval: Option<f64>,
        forged_validity: Option<f64>,
        period: Option<f64>,
        start: f64,
    },
    /// A14.
    JamNd {
        mode: JamNdMode,
        victim: RouterId,
        phantom: RouterId,
    },
    /// A15.
    JamLsa { victims: Option<Vec<RouterId>> },
    /// A6 (honest chassis).
    TcBurst {
        size: u32,
        window: f64,
        period: f64,
        start: f64,
        mpr_flag_all: bool,
    },
    /// A7 (honest chassis).
    HopField { tamper: HopTamper },
    /// A8 (honest chassis).
    Blackhole,
    /// A10 (honest chassis).
    SeqnumExhaust {
        target: RouterId,
        count: u32,
        window: f64,
        ansn: u32,
        start: f64,
        mpr_flag_all: bool,
    },
    /// A11 (honest chassis).
    AnsnJump {
        target: RouterId,
        jump: u32,
        start: f64,
        mpr_flag_all: bool,
    },
    /// A19 (honest chassis).
    LinkSpoofLsa { spoof_links: Vec<RouterId> },
    /// A20 (honest chassis under a stolen identity).
    LoopLsa { target: RouterId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopTamper {
    HopLimit(u8),
    HopCount(HopCountMode),
}

impl AttackConfig {
    /// Check per-kind required parameters and produce the typed form.
    pub fn validate(&self) -> Result<ResolvedAttack, ParamError> {
        let p = &self.params;
        let need_target = || p.target.clone().ok_or_else(|| ParamError::missing("target"));
        match self.kind {
            AttackKind::None => Ok(ResolvedAttack::None),
            AttackKind::Spoof1hopDup => Ok(ResolvedAttack::HelloSpoof {
                identities: vec![need_target()?],
                advertise: AdvertisePolicy::Nothing,
                mpr_flag: None,
            }),
            AttackKind::Spoof1hopLink | AttackKind::Spoof2hopDup | AttackKind::Spoof2hopCover => {
                Ok(ResolvedAttack::HelloSpoof {
                    identities: vec![need_target()?],
                    advertise: AdvertisePolicy::Heard,
                    mpr_flag: None,
                })
            }
            AttackKind::LinkSpoofHello | AttackKind::LinkSpoofNdStealth => {
                let set = match (&p.ids, p.learn_window) {
                    (Some(ids), None) => SpoofSet::List(ids.clone()),
                    (None, Some(w)) => SpoofSet::Overheard {
                        learn_window: w,
                        plus_phantom: if p.plus_phantom.unwrap_or(false) {
                            Some(
                                p.phantom_id
                                    .clone()
                                    .ok_or_else(|| ParamError::missing("phantom_id"))?,
                            )
                        } else {
                            None
                        },
                    },
                    (Some(_), Some(_)) => {
                        return Err(ParamError::bad(
                            "ids",
                            "give either `ids` or `learn_window`, not both",
                        ))
                    }
                    (None, None) => return Err(ParamError::missing("ids")),
                };
                Ok(ResolvedAttack::HelloSpoof {
                    identities: vec![],
                    advertise: AdvertisePolicy::HeardPlus {
                        set,
                        exclude: p.exclude.clone().unwrap_or_default(),
                        exclude_within_two_hops: self.kind == AttackKind::LinkSpoofNdStealth,
                    },
                    mpr_flag: None,
                })
            }
            AttackKind::TcBurst => Ok(ResolvedAttack::TcBurst {
                size: p.burst_size.ok_or_else(|| ParamError::missing("burst_size"))?,
                window: p.burst_window.ok_or_else(|| ParamError::missing("burst_window"))?,
                period: p.burst_period.unwrap_or(1.0),
                start: p.start.unwrap_or(0.0),
                mpr_flag_all: p.mpr_flag_all.unwrap_or(true),
            }),
            AttackKind::HopField => {
                let tamper = match (p.hop_limit, p.hop_count) {
                    (Some(hl), None) => HopTamper::HopLimit(hl),
                    (None, Some(mode)) => HopTamper::HopCount(mode),
                    (Some(_), Some(_)) => {
                        return Err(ParamError::bad(
                            "hop_limit",
                            "give either `hop_limit` or `hop_count`, not both",
                        ))
                    }
                    (None, None) => return Err(ParamError::missing("hop_limit")),
                };
                Ok(ResolvedAttack::HopField { tamper })
            }
            AttackKind::Blackhole => Ok(ResolvedAttack::Blackhole),
            AttackKind::SeqnumExhaust => Ok(ResolvedAttack::SeqnumExhaust {
                target: need_target()?,
                count: p.sweep_count.ok_or_else(|| ParamError::missing("sweep_count"))?,
                window: p.sweep_window.unwrap_or(1.0),
                ansn: p.sweep_ansn.unwrap_or(0),
                start: p.start.unwrap_or(0.0),
                mpr_flag_all: p.mpr_flag_all.unwrap_or(true),
            }),
            AttackKind::AnsnJump => Ok(ResolvedAttack::AnsnJump {
                target: need_target()?,
                jump: p.jump.ok_or_else(|| ParamError::missing("jump"))?,
                start: p.start.unwrap_or(0.0),
                mpr_flag_all: p.mpr_flag_all.unwrap_or(true),
            }),
            AttackKind::IntervalForge => Ok(ResolvedAttack::TimingForge {
                target: need_target()?,
                forged_interval: Some(
                    p.forged_interval
                        .ok_or_else(|| ParamError::missing("forged_interval"))?,
                ),
                forged_validity: None,
                period: p.period,
                start: p.start.unwrap_or(0.0),
            }),
            AttackKind::ValidityForge => Ok(ResolvedAttack::TimingForge {
                target: need_target()?,
                forged_interval: None,
                forged_validity: Some(
                    p.forged_validity
                        .ok_or_else(|| ParamError::missing("forged_validity"))?,
                ),
                period: p.period,
                start: p.start.unwrap_or(0.0),
            }),
            AttackKind::IndirectJamNd => {
                let mode = p.mode.unwrap_or(JamNdMode::Link);
                let victim = p.victim.clone().ok_or_else(|| ParamError::missing("victim"))?;
                let phantom = p.phantom_id.clone().unwrap_or_else(|| RouterId::from("zz-phantom"));
                if mode == JamNdMode::Link && phantom == victim {
                    return Err(ParamError::bad("phantom_id", "must differ from the victim"));
                }
                Ok(ResolvedAttack::JamNd { mode, victim, phantom })
            }
            AttackKind::IndirectJamLsa => Ok(ResolvedAttack::JamLsa {
                victims: p.victims.clone(),
            }),
            AttackKind::IdSpoofNd => {
                let ids = p.ids.clone().ok_or_else(|| ParamError::missing("ids"))?;
                if ids.is_empty() {
                    return Err(ParamError::bad("ids", "must be non-empty"));
                }
                Ok(ResolvedAttack::HelloSpoof {
                    identities: ids,
                    advertise: AdvertisePolicy::Heard,
                    mpr_flag: None,
                })
            }
            AttackKind::IdSpoofLsa => Ok(ResolvedAttack::HelloSpoof {
                identities: vec![need_target()?],
                advertise: AdvertisePolicy::Heard,
                mpr_flag: Some(
                    p.mpr_neighbor
                        .clone()
                        .ok_or_else(|| ParamError::missing("mpr_neighbor"))?,
                ),
            }),
            AttackKind::LinkSpoofLsa => Ok(ResolvedAttack::LinkSpoofLsa {
                spoof_links: p
                    .spoof_links
                    .clone()
                    .ok_or_else(|| ParamError::missing("spoof_links"))?,
            }),
            AttackKind::LoopLsa => Ok(ResolvedAttack::LoopLsa {
                target: need_target()?,
            }),
            AttackKind::LoopNd => Ok(ResolvedAttack::HelloSpoof {
                identities: vec![need_target()?],
                advertise: AdvertisePolicy::Heard,
                mpr_flag: Some(p.victim.clone().ok_or_else(|| ParamError::missing("victim"))?),
            }),
        }
    }

    /// Identities this attack presents in neighborhood discovery, which the
    /// data plane treats as claimed (absorbing matching destinations).
    pub fn claimed_ids(&self) -> Vec<RouterId> {
        match self.validate() {
            Ok(ResolvedAttack::HelloSpoof { identities, .. }) => identities,
            Ok(ResolvedAttack::TimingForge { target, .. }) => vec![target],
            Ok(ResolvedAttack::LoopLsa { target }) => vec![target],
            _ => vec![],
        }
    }

    /// True when the node runs the full honest state machine (possibly with
    /// overrides); false for pure HELLO spoofers.
    pub fn honest_chassis(&self) -> bool {
        matches!(
            self.validate(),
            Ok(ResolvedAttack::None)
                | Ok(ResolvedAttack::TcBurst { .. })
                | Ok(ResolvedAttack::HopField { .. })
                | Ok(ResolvedAttack::Blackhole)
                | Ok(ResolvedAttack::SeqnumExhaust { .. })
                | Ok(ResolvedAttack::AnsnJump { .. })
                | Ok(ResolvedAttack::LinkSpoofLsa { .. })
                | Ok(ResolvedAttack::LoopLsa { .. })
        )
    }
}

/// What a spoofer remembers about one radio neighbor.
#[derive(Debug, Clone, PartialEq)]
struct HeardNeighbor {
    expiry: SimTime,
    /// Our claimed ids their latest HELLO listed (non-LOST).
    lists: BTreeSet<RouterId>,
    /// Our claimed ids their latest HELLO flagged as MPR.
    flags: BTreeSet<RouterId>,
    /// Every id their latest HELLO listed (for stealth exclusion).
    listed_ids: BTreeSet<RouterId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JamPhase {
    Up,
    Down,
}

/// Messages a spoofer wants transmitted, plus flip notes for the log.
#[derive(Debug, Default)]
pub struct SpooferOutput {
    /// (sender identity, message) pairs.
    pub hellos: Vec<HelloMessage>,
    pub flips: Vec<String>,
}

/// Runtime state of a HELLO-spoofing adversary.
#[derive(Debug, Clone)]
pub struct Spoofer {
    own_id: RouterId,
    willingness: u8,
    attack: ResolvedAttack,
    start: SimTime,
    heard: BTreeMap<RouterId, HeardNeighbor>,
    /// TC originators and advertised ids seen so far.
    learned: BTreeSet<RouterId>,
    seqs: BTreeMap<RouterId, u32>,
    /// A14 phase.
    nd_phase: JamPhase,
    /// A15 per-victim phase.
    lsa_phase: BTreeMap<RouterId, JamPhase>,
}

impl Spoofer {
    pub fn new(own_id: RouterId, willingness: u8, attack: ResolvedAttack, start: SimTime) -> Self {
        Spoofer {
            own_id,
            willingness,
            attack,
            start,
            heard: BTreeMap::new(),
            learned: BTreeSet::new(),
            seqs: BTreeMap::new(),
            nd_phase: JamPhase::Up,
            lsa_phase: BTreeMap::new(),
        }
    }

    /// When this spoofer starts emitting.
    pub fn start_time(&self) -> SimTime {
        self.start
    }

    /// The identities this spoofer emits HELLOs under.
    pub fn identities(&self) -> Vec<RouterId> {
        match &self.attack {
            ResolvedAttack::HelloSpoof { identities, .. } if !identities.is_empty() => {
                identities.clone()
            }
            ResolvedAttack::TimingForge { target, .. } => vec![target.clone()],
            _ => vec![self.own_id.clone()],
        }
    }

    fn next_seq(&mut self, id: &RouterId) -> u32 {
        let c = self.seqs.entry(id.clone()).or_insert(0);
        let s = *c;
        *c = c.wrapping_add(1);
        s
    }

    fn prune(&mut self, now: SimTime) {
        self.heard.retain(|_, rec| rec.expiry > now);
    }

    /// Ids overheard in TCs (originators and advertised neighbors) so far.
    pub fn overheard(&self) -> &BTreeSet<RouterId> {
        &self.learned
    }

    /// Ids within two hops of this device, per its own listening: radio
    /// neighbors plus everything their HELLOs list.
    fn within_two_hops(&self) -> BTreeSet<RouterId> {
        let mut set = BTreeSet::new();
        for (id, rec) in &self.heard {
            set.insert(id.clone());
            set.extend(rec.listed_ids.iter().cloned());
        }
        set
    }

    fn heard_status(&self, neighbor: &RouterId, as_id: &RouterId) -> LinkStatus {
        match self.heard.get(neighbor) {
            Some(rec) if rec.lists.contains(as_id) => LinkStatus::Symmetric,
            _ => LinkStatus::Heard,
        }
    }

    fn spoofed_link_set(&self, now: SimTime) -> Vec<RouterId> {
        let ResolvedAttack::HelloSpoof {
            advertise:
                AdvertisePolicy::HeardPlus {
                    set,
                    exclude,
                    exclude_within_two_hops,
                },
            ..
        } = &self.attack
        else {
            return vec![];
        };
        let mut ids: BTreeSet<RouterId> = match set {
            SpoofSet::List(list) => list.iter().cloned().collect(),
            SpoofSet::Overheard {
                learn_window,
                plus_phantom,
            } => {
                if now < self.start + crate::types::SimDuration::from_secs_f64(*learn_window) {
                    return vec![];
                }
                let mut s = self.learned.clone();
                if let Some(ph) = plus_phantom {
                    s.insert(ph.clone());
                }
                s
            }
        };
        ids.remove(&self.own_id);
        for ex in exclude {
            ids.remove(ex);
        }
        if *exclude_within_two_hops {
            for near in self.within_two_hops() {
                ids.remove(&near);
            }
        }
        ids.into_iter().collect()
    }

    /// Build this tick's HELLOs (one per claimed identity).
    pub fn periodic_hellos(&mut self, now: SimTime, params: &ProtocolParams) -> SpooferOutput {
        self.prune(now);
        let mut out = SpooferOutput::default();
        match self.attack.clone() {
            ResolvedAttack::HelloSpoof {
                advertise, mpr_flag, ..
            } => {
                for id in self.identities() {
                    let mut entries: Vec<HelloEntry> = vec![];
                    match &advertise {
                        AdvertisePolicy::Nothing => {}
                        AdvertisePolicy::Heard | AdvertisePolicy::HeardPlus { .. } => {
                            let heard: Vec<RouterId> = self.heard.keys().cloned().collect();
                            for n in heard {
                                if n == id {
                                    continue;
                                }
                                entries.push(HelloEntry {
                                    id: n.clone(),
                                    status: self.heard_status(&n, &id),
                                    mpr: mpr_flag.as_ref() == Some(&n),
                                });
                            }
                            for spoofed in self.spoofed_link_set(now) {
                                if spoofed == id || entries.iter().any(|e| e.id == spoofed) {
                                    continue;
                                }
                                entries.push(HelloEntry {
                                    id: spoofed,
                                    status: LinkStatus::Symmetric,
                                    mpr: false,
                                });
                            }
                        }
                    }
                    // An MPR flag on a neighbor we have not heard yet still
                    // needs an entry to ride on.
                    if let Some(flag) = &mpr_flag {
                        if !entries.iter().any(|e| &e.id == flag) {
                            entries.push(HelloEntry {
                                id: flag.clone(),
                                status: self.heard_status(flag, &id),
                                mpr: true,
                            });
                        }
                    }
                    entries.sort_by(|a, b| a.id.cmp(&b.id));
                    let seq = self.next_seq(&id);
                    out.hellos.push(HelloMessage {
                        originator: id,
                        msg_seq_num: seq,
                        willingness: self.willingness,
                        interval_time: params.hello_interval,
                        validity_time: params.hello_validity(),
                        entries,
                    });
                }
            }
            ResolvedAttack::TimingForge {
                target,
                forged_interval,
                forged_validity,
                ..
            } => {
                let mut entries: Vec<HelloEntry> = self
                    .heard
                    .keys()
                    .filter(|n| **n != target)
                    .map(|n| HelloEntry {
                        id: n.clone(),
                        status: LinkStatus::Symmetric,
                        mpr: false,
                    })
                    .collect();
                entries.sort_by(|a, b| a.id.cmp(&b.id));
                let seq = self.next_seq(&target);
                out.hellos.push(HelloMessage {
                    originator: target.clone(),
                    msg_seq_num: seq,
                    willingness: self.willingness,
                    interval_time: forged_interval.unwrap_or(params.hello_interval),
                    validity_time: forged_validity
                        .map(ValiditySchedule::uniform)
                        .unwrap_or_else(|| params.hello_validity()),
                    entries,
                });
            }
            ResolvedAttack::JamNd { mode, victim, phantom } => {
                out.hellos.push(self.jam_nd_hello(&mode, &victim, &phantom, params));
            }
            ResolvedAttack::JamLsa { victims } => {
                out.hellos.push(self.jam_lsa_hello(victims.as_deref(), params));
            }
            _ => {}
        }
        out
    }

    fn jam_nd_hello(
        &mut self,
        mode: &JamNdMode,
        victim: &RouterId,
        phantom: &RouterId,
        params: &ProtocolParams,
    ) -> HelloMessage {
        let own = self.own_id.clone();
        let mut entries = vec![HelloEntry {
            id: victim.clone(),
            status: self.heard_status(victim, &own),
            mpr: false,
        }];
        let mut willingness = self.willingness;
        match mode {
            JamNdMode::Link => {
                entries.push(HelloEntry {
                    id: phantom.clone(),
                    status: match self.nd_phase {
                        JamPhase::Up => LinkStatus::Symmetric,
                        JamPhase::Down => LinkStatus::Lost,
                    },
                    mpr: false,
                });
            }
            JamNdMode::Willingness => {
                willingness = match self.nd_phase {
                    JamPhase::Up => 7,
                    JamPhase::Down => 0,
                };
            }
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        let seq = self.next_seq(&own);
        HelloMessage {
            originator: own,
            msg_seq_num: seq,
            willingness,
            interval_time: params.hello_interval,
            validity_time: params.hello_validity(),
            entries,
        }
    }

    fn jam_lsa_hello(&mut self, victims: Option<&[RouterId]>, params: &ProtocolParams) -> HelloMessage {
        let own = self.own_id.clone();
        let mut entries: Vec<HelloEntry> = vec![];
        let heard: Vec<RouterId> = self.heard.keys().cloned().collect();
        for n in heard {
            let is_victim = victims.map(|v| v.contains(&n)).unwrap_or(true);
            if is_victim {
                let phase = *self.lsa_phase.entry(n.clone()).or_insert(JamPhase::Up);
                entries.push(match phase {
                    JamPhase::Up => HelloEntry {
                        id: n,
                        status: LinkStatus::Symmetric,
                        mpr: true,
                    },
                    JamPhase::Down => HelloEntry {
                        id: n,
                        status: LinkStatus::Lost,
                        mpr: false,
                    },
                });
            } else {
                entries.push(HelloEntry {
                    id: n.clone(),
                    status: self.heard_status(&n, &own),
                    mpr: false,
                });
            }
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        let seq = self.next_seq(&own);
        HelloMessage {
            originator: own,
            msg_seq_num: seq,
            // The LSA jammer stays out of everyone's MPR sets.
            willingness: 0,
            interval_time: params.hello_interval,
            validity_time: params.hello_validity(),
            entries,
        }
    }

    /// Digest a received message; reaction-keyed attacks may answer
    /// immediately.
    pub fn observe(
        &mut self,
        msg: &crate::types::ControlMessage,
        now: SimTime,
        params: &ProtocolParams,
    ) -> SpooferOutput {
        let mut out = SpooferOutput::default();
        match msg {
            crate::types::ControlMessage::Hello(h) => {
                self.note_hello(h, now);
                if let ResolvedAttack::JamNd { mode, victim, phantom } = self.attack.clone() {
                    if &h.originator == &victim {
                        let own = self.own_id.clone();
                        let flagged = self
                            .heard
                            .get(&victim)
                            .map(|rec| rec.flags.contains(&own))
                            .unwrap_or(false);
                        let flip = match (self.nd_phase, flagged) {
                            (JamPhase::Up, true) => Some(JamPhase::Down),
                            (JamPhase::Down, false) => Some(JamPhase::Up),
                            _ => None,
                        };
                        if let Some(next) = flip {
                            self.nd_phase = next;
                            out.flips.push(format!(
                                "nd phase={}",
                                if next == JamPhase::Up { "up" } else { "down" }
                            ));
                            out.hellos
                                .push(self.jam_nd_hello(&mode, &victim, &phantom, params));
                        }
                    }
                }
            }
            crate::types::ControlMessage::Tc(tc) => {
                self.note_tc(tc);
                if let ResolvedAttack::JamLsa { victims } = self.attack.clone() {
                    let is_victim = victims
                        .as_ref()
                        .map(|v| v.contains(&tc.originator))
                        .unwrap_or_else(|| self.heard.contains_key(&tc.originator));
                    if is_victim {
                        let advertised = tc.advertised_neighbors.contains(&self.own_id);
                        let phase = *self
                            .lsa_phase
                            .entry(tc.originator.clone())
                            .or_insert(JamPhase::Up);
                        let flip = match (phase, advertised) {
                            (JamPhase::Up, true) => Some(JamPhase::Down),
                            (JamPhase::Down, false) => Some(JamPhase::Up),
                            _ => None,
                        };
                        if let Some(next) = flip {
                            self.lsa_phase.insert(tc.originator.clone(), next);
                            out.flips.push(format!(
                                "lsa victim={} phase={}",
                                tc.originator,
                                if next == JamPhase::Up { "mpr" } else { "lost" }
                            ));
                            out.hellos
                                .push(self.jam_lsa_hello(victims.as_deref(), params));
                        }
                    }
                }
            }
        }
        out
    }

    fn note_hello(&mut self, h: &HelloMessage, now: SimTime) {
        let claimed: BTreeSet<RouterId> = self.identities().into_iter().collect();
        let validity = h.validity_time.for_distance(1);
        let mut lists = BTreeSet::new();
        let mut flags = BTreeSet::new();
        let mut listed_ids = BTreeSet::new();
        for e in &h.entries {
            listed_ids.insert(e.id.clone());
            if claimed.contains(&e.id) && e.status != LinkStatus::Lost {
                lists.insert(e.id.clone());
                if e.mpr {
                    flags.insert(e.id.clone());
                }
            }
        }
        self.heard.insert(
            h.originator.clone(),
            HeardNeighbor {
                expiry: now + validity,
                lists,
                flags,
                listed_ids,
            },
        );
    }

    fn note_tc(&mut self, tc: &TcMessage) {
        self.learned.insert(tc.originator.clone());
        for id in &tc.advertised_neighbors {
            self.learned.insert(id.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ControlMessage;

    fn params() -> ProtocolParams {
        ProtocolParams::default()
    }

    fn hello_from(id: &str, entries: Vec<(&str, LinkStatus, bool)>) -> ControlMessage {
        ControlMessage::Hello(HelloMessage {
            originator: RouterId::from(id),
            msg_seq_num: 0,
            willingness: 3,
            interval_time: 2.0,
            validity_time: ValiditySchedule::uniform(6.0),
            entries: entries
                .into_iter()
                .map(|(i, status, mpr)| HelloEntry {
                    id: RouterId::from(i),
                    status,
                    mpr,
                })
                .collect(),
        })
    }

    fn tc_from(id: &str, advertised: Vec<&str>) -> ControlMessage {
        ControlMessage::Tc(TcMessage {
            originator: RouterId::from(id),
            msg_seq_num: 0,
            ansn: 1,
            hop_count: 0,
            hop_limit: 255,
            interval_time: 5.0,
            validity_time: ValiditySchedule::uniform(15.0),
            advertised_neighbors: advertised.into_iter().map(RouterId::from).collect(),
        })
    }

    fn config(kind: AttackKind, f: impl FnOnce(&mut AttackParams)) -> AttackConfig {
        let mut params = AttackParams::default();
        f(&mut params);
        AttackConfig { kind, params }
    }

    #[test]
    fn required_params_are_enforced_by_kind() {
        let err = config(AttackKind::AnsnJump, |p| p.target = Some("a".into()))
            .validate()
            .unwrap_err();
        assert_eq!(err.field, "params.jump");
        let err = config(AttackKind::Spoof1hopDup, |_| {}).validate().unwrap_err();
        assert_eq!(err.field, "params.target");
        let err = config(AttackKind::HopField, |p| {
            p.hop_limit = Some(2);
            p.hop_count = Some(HopCountMode::Zero);
        })
        .validate()
        .unwrap_err();
        assert_eq!(err.field, "params.hop_limit");
        assert!(config(AttackKind::Blackhole, |_| {}).validate().is_ok());
    }

    #[test]
    fn spoofed_identity_keeps_per_id_seq_counters() {
        let attack = config(AttackKind::IdSpoofNd, |p| {
            p.ids = Some(vec!["a".into(), "b".into()])
        })
        .validate()
        .unwrap();
        let mut sp = Spoofer::new("x9".into(), 0, attack, SimTime::ZERO);
        let out1 = sp.periodic_hellos(SimTime::from_secs_f64(1.0), &params());
        let out2 = sp.periodic_hellos(SimTime::from_secs_f64(3.0), &params());
        assert_eq!(out1.hellos.len(), 2);
        assert_eq!(out1.hellos[0].msg_seq_num, 0);
        assert_eq!(out2.hellos[0].msg_seq_num, 1);
        assert_eq!(out2.hellos[0].originator, RouterId::from("a"));
    }

    #[test]
    fn spoofer_mirrors_symmetry_per_claimed_id() {
        let attack = config(AttackKind::Spoof1hopLink, |p| p.target = Some("b".into()))
            .validate()
            .unwrap();
        let mut sp = Spoofer::new("x9".into(), 3, attack, SimTime::ZERO);
        let t = SimTime::from_secs_f64(1.0);
        // a hears us (as b): symmetric. c does not list b: heard only.
        sp.observe(&hello_from("a", vec![("b", LinkStatus::Heard, false)]), t, &params());
        sp.observe(&hello_from("c", vec![]), t, &params());
        let out = sp.periodic_hellos(SimTime::from_secs_f64(2.0), &params());
        let h = &out.hellos[0];
        assert_eq!(h.originator, RouterId::from("b"));
        let a = h.entries.iter().find(|e| e.id.as_str() == "a").unwrap();
        assert_eq!(a.status, LinkStatus::Symmetric);
        let c = h.entries.iter().find(|e| e.id.as_str() == "c").unwrap();
        assert_eq!(c.status, LinkStatus::Heard);
    }

    #[test]
    fn overhear_learn_collects_tc_ids_and_window_gates() {
        let attack = config(AttackKind::LinkSpoofHello, |p| {
            p.learn_window = Some(10.0);
            p.plus_phantom = Some(true);
            p.phantom_id = Some("w".into());
        })
        .validate()
        .unwrap();
        let mut sp = Spoofer::new("x9".into(), 3, attack, SimTime::ZERO);
        sp.observe(&tc_from("r1", vec!["r2", "r3"]), SimTime::from_secs_f64(1.0), &params());
        assert_eq!(
            sp.overheard().iter().map(|r| r.as_str()).collect::<Vec<_>>(),
            vec!["r1", "r2", "r3"]
        );
        // Window still open: nothing spoofed yet.
        let out = sp.periodic_hellos(SimTime::from_secs_f64(5.0), &params());
        assert!(out.hellos[0].entries.is_empty());
        // Window closed: learned set plus the phantom.
        let out = sp.periodic_hellos(SimTime::from_secs_f64(11.0), &params());
        let ids: Vec<&str> = out.hellos[0].entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["r1", "r2", "r3", "w"]);
        assert!(out.hellos[0].entries.iter().all(|e| e.status == LinkStatus::Symmetric));
    }

    #[test]
    fn stealth_spoofer_excludes_its_two_hop_view() {
        let attack = config(AttackKind::LinkSpoofNdStealth, |p| {
            p.learn_window = Some(0.0);
        })
        .validate()
        .unwrap();
        let mut sp = Spoofer::new("x9".into(), 3, attack, SimTime::ZERO);
        let t = SimTime::from_secs_f64(1.0);
        // e is our neighbor; its HELLO makes d and f two-hop ids.
        sp.observe(
            &hello_from(
                "e",
                vec![("d", LinkStatus::Symmetric, false), ("f", LinkStatus::Symmetric, false)],
            ),
            t,
            &params(),
        );
        for (orig, adv) in [("a", vec!["b"]), ("c", vec!["b", "d"]), ("g", vec!["h", "i"])] {
            sp.observe(&tc_from(orig, adv), t, &params());
        }
        let out = sp.periodic_hellos(SimTime::from_secs_f64(2.0), &params());
        let ids: Vec<&str> = out.hellos[0].entries.iter().map(|e| e.id.as_str()).collect();
        // d, f (2-hop) and e (1-hop) are suppressed; e itself is still listed
        // as a real heard neighbor.
        assert_eq!(ids, vec!["a", "b", "c", "e", "g", "h", "i"]);
        let spoofed: Vec<&str> = out.hellos[0]
            .entries
            .iter()
            .filter(|e| e.id.as_str() != "e")
            .map(|e| e.id.as_str())
            .collect();
        assert!(!spoofed.contains(&"d") && !spoofed.contains(&"f"));
    }

    #[test]
    fn jam_nd_flips_only_on_reflection() {
        let attack = config(AttackKind::IndirectJamNd, |p| {
            p.victim = Some("a".into());
            p.phantom_id = Some("b".into());
        })
        .validate()
        .unwrap();
        let mut sp = Spoofer::new("x9".into(), 3, attack, SimTime::ZERO);
        let t = SimTime::from_secs_f64(1.0);
        // Initial phase advertises the phantom link as SYM.
        let out = sp.periodic_hellos(t, &params());
        let phantom = out.hellos[0].entries.iter().find(|e| e.id.as_str() == "b").unwrap();
        assert_eq!(phantom.status, LinkStatus::Symmetric);
        // Victim HELLO without our flag: no flip.
        let out = sp.observe(&hello_from("a", vec![("x9", LinkStatus::Symmetric, false)]), t, &params());
        assert!(out.hellos.is_empty());
        // Victim reflects the MPR selection: flip to LOST immediately.
        let out = sp.observe(&hello_from("a", vec![("x9", LinkStatus::Symmetric, true)]), t, &params());
        assert_eq!(out.flips.len(), 1);
        let phantom = out.hellos[0].entries.iter().find(|e| e.id.as_str() == "b").unwrap();
        assert_eq!(phantom.status, LinkStatus::Lost);
        // Victim still flags us (stale): no flip until the reflection clears.
        let out = sp.observe(&hello_from("a", vec![("x9", LinkStatus::Symmetric, true)]), t, &params());
        assert!(out.flips.is_empty());
        let out = sp.observe(&hello_from("a", vec![("x9", LinkStatus::Symmetric, false)]), t, &params());
        assert_eq!(out.flips.len(), 1);
    }

    #[test]
    fn jam_lsa_flips_on_victim_tc_and_forces_willingness_zero() {
        let attack = config(AttackKind::IndirectJamLsa, |_| {}).validate().unwrap();
        let mut sp = Spoofer::new("x9".into(), 3, attack, SimTime::ZERO);
        let t = SimTime::from_secs_f64(1.0);
        sp.observe(&hello_from("a", vec![("x9", LinkStatus::Heard, false)]), t, &params());
        let out = sp.periodic_hellos(t, &params());
        assert_eq!(out.hellos[0].willingness, 0);
        let a = out.hellos[0].entries.iter().find(|e| e.id.as_str() == "a").unwrap();
        assert!(a.mpr && a.status == LinkStatus::Symmetric);
        // Victim's TC advertises us: declare the link LOST.
        let out = sp.observe(&tc_from("a", vec!["x9"]), t, &params());
        assert_eq!(out.flips.len(), 1);
        let a = out.hellos[0].entries.iter().find(|e| e.id.as_str() == "a").unwrap();
        assert_eq!(a.status, LinkStatus::Lost);
        // Victim's TC no longer advertises us: re-select.
        let out = sp.observe(&tc_from("a", vec![]), t, &params());
        assert_eq!(out.flips.len(), 1);
        let a = out.hellos[0].entries.iter().find(|e| e.id.as_str() == "a").unwrap();
        assert!(a.mpr && a.status == LinkStatus::Symmetric);
    }

    #[test]
    fn loop_nd_forces_mpr_flag_on_victim() {
        let attack = config(AttackKind::LoopNd, |p| {
            p.target = Some("g".into());
            p.victim = Some("a".into());
        })
        .validate()
        .unwrap();
        let mut sp = Spoofer::new("x9".into(), 3, attack, SimTime::ZERO);
        let t = SimTime::from_secs_f64(1.0);
        sp.observe(&hello_from("a", vec![("g", LinkStatus::Heard, false)]), t, &params());
        let out = sp.periodic_hellos(SimTime::from_secs_f64(2.0), &params());
        let h = &out.hellos[0];
        assert_eq!(h.originator, RouterId::from("g"));
        let a = h.entries.iter().find(|e| e.id.as_str() == "a").unwrap();
        assert!(a.mpr);
        assert_eq!(a.status, LinkStatus::Symmetric);
    }

    #[test]
    fn timing_forge_overrides_announced_fields() {
        let attack = config(AttackKind::ValidityForge, |p| {
            p.target = Some("a".into());
            p.forged_validity = Some(0.001);
        })
        .validate()
        .unwrap();
        let mut sp = Spoofer::new("x9".into(), 3, attack, SimTime::ZERO);
        sp.observe(&hello_from("b", vec![]), SimTime::from_secs_f64(0.5), &params());
        let out = sp.periodic_hellos(SimTime::from_secs_f64(1.0), &params());
        let h = &out.hellos[0];
        assert_eq!(h.originator, RouterId::from("a"));
        assert_eq!(h.validity_time, ValiditySchedule::uniform(0.001));
        assert!(h.entries.iter().any(|e| e.id.as_str() == "b"));
    }

    #[test]
    fn claimed_ids_cover_identity_spoofs_only() {
        let a16 = config(AttackKind::IdSpoofNd, |p| {
            p.ids = Some(vec!["a".into(), "b".into()])
        });
        assert_eq!(a16.claimed_ids().len(), 2);
        let a6 = config(AttackKind::TcBurst, |p| {
            p.burst_size = Some(10);
            p.burst_window = Some(0.1);
        });
        assert!(a6.claimed_ids().is_empty());
        let a20 = config(AttackKind::LoopLsa, |p| p.target = Some("g".into()));
        assert_eq!(a20.claimed_ids(), vec![RouterId::from("g")]);
    }
}
