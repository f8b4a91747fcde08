//! A deterministic discrete-event simulator of the OLSRv2 routing protocol
//! with a pluggable adversary framework.
//!
//! The crate models the three core OLSRv2 processes — neighborhood discovery
//! over HELLOs, MPR-scoped flooding, and TC link-state advertisement — on a
//! ground-truth topology with per-direction receivability, wormhole tunnels
//! and an instantaneous data-plane trace. A catalog of attacker behaviors
//! (identity spoofing, link spoofing, jitter collapse, hop-field tampering,
//! sequence-number and timing forgery, indirect jamming, loop creation)
//! plugs into the same engine, and analysis helpers turn finished runs into
//! flooding-coverage sets, topology-consistency reports, loop findings,
//! misdelivery matrices and amplification ratios.
//!
//! Start with the runnable examples (`cargo run --example baseline_convergence`)
//! or the scenario harness (`cargo run -- run scenarios/<name>.json`).

pub mod adversary;
pub mod analysis;
pub mod cli;
pub mod engine;
pub mod flooding;
pub mod report;
pub mod router;
pub mod scenario;
pub mod types;

pub use engine::{run, RunOutput, TraceOutcome};
pub use scenario::{load_scenario, ScenarioSpec};
pub use types::{ProtocolParams, RouterId, SimTime};
