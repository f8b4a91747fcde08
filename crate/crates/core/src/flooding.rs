//! MPR-scoped diffusion: the forwarding rule, jittered scheduling and
//! whole-queue piggybacking.
//!
//! HELLOs are link-local and never forwarded; everything here concerns TCs.

use rand::Rng;

use crate::router::RouterState;
use crate::types::{ProtocolParams, RouterId, SimDuration, SimTime, TcMessage};

/// A TC queued for retransmission at a jittered due time.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardJob {
    /// Outgoing copy, hop fields already stepped.
    pub message: TcMessage,
    pub received_at: SimTime,
    pub due: SimTime,
    pub received_from: RouterId,
}

/// The MPR forwarding rule: retransmit iff the link-local sender selected
/// this router as MPR, there is hop budget left, and the message is not our
/// own. Forwarding a hop count already at the cap would overflow it, so such
/// messages travel no further.
pub fn forward_decision(
    state: &RouterState,
    msg: &TcMessage,
    sender: &RouterId,
    now: SimTime,
    params: &ProtocolParams,
) -> bool {
    if msg.originator == state.self_id {
        return false;
    }
    if msg.hop_limit <= 1 || msg.hop_count == u8::MAX {
        return false;
    }
    state
        .neighbor_set
        .get(sender)
        .map(|rec| rec.is_mpr_selector && rec.usable(now, params.lq_threshold))
        .unwrap_or(false)
}

/// Queue a forward with uniform jitter in `[0, max_jitter]`, stepping the
/// hop fields on the outgoing copy.
pub fn schedule_forward(
    state: &mut RouterState,
    msg: &TcMessage,
    sender: &RouterId,
    now: SimTime,
    max_jitter: SimDuration,
    rng: &mut impl Rng,
) -> SimTime {
    let mut out = msg.clone();
    out.hop_count = out.hop_count.saturating_add(1);
    out.hop_limit = out.hop_limit.saturating_sub(1);
    let jitter = SimDuration(rng.gen_range(0..=max_jitter.0));
    let due = now + jitter;
    state.pending_queue.push_back(ForwardJob {
        message: out,
        received_at: now,
        due,
        received_from: sender.clone(),
    });
    due
}

/// Earliest due time over the queue, if any.
pub fn earliest_due(state: &RouterState) -> Option<SimTime> {
    state.pending_queue.iter().map(|j| j.due).min()
}

/// Piggyback flush: once the earliest job is due, every queued job (due or
/// not) goes out together as one transmission.
pub fn flush_piggyback(state: &mut RouterState, now: SimTime) -> Vec<ForwardJob> {
    let jobs: Vec<ForwardJob> = state.pending_queue.drain(..).collect();
    state.counters.tcs_forwarded += jobs.len() as u64;
    let _ = now;
    jobs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::process_hello;
    use crate::types::{HelloEntry, HelloMessage, LinkStatus, ValiditySchedule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym_selector_hello(from: &str, me: &str, mpr: bool) -> HelloMessage {
        HelloMessage {
            originator: RouterId::from(from),
            msg_seq_num: 0,
            willingness: 3,
            interval_time: 2.0,
            validity_time: ValiditySchedule::uniform(6.0),
            entries: vec![HelloEntry {
                id: RouterId::from(me),
                status: LinkStatus::Symmetric,
                mpr,
            }],
        }
    }

    fn tc(from: &str, hop_count: u8, hop_limit: u8) -> TcMessage {
        TcMessage {
            originator: RouterId::from(from),
            msg_seq_num: 1,
            ansn: 1,
            hop_count,
            hop_limit,
            interval_time: 5.0,
            validity_time: ValiditySchedule::uniform(15.0),
            advertised_neighbors: vec![],
        }
    }

    #[test]
    fn forwards_only_for_selectors() {
        let params = ProtocolParams::default();
        let mut r = RouterState::new(RouterId::from("r"), 3);
        let t = SimTime::from_secs_f64(1.0);
        process_hello(&mut r, &sym_selector_hello("s", "r", true), t, &params);
        process_hello(&mut r, &sym_selector_hello("q", "r", false), t, &params);
        assert!(forward_decision(&r, &tc("o", 0, 10), &RouterId::from("s"), t, &params));
        assert!(!forward_decision(&r, &tc("o", 0, 10), &RouterId::from("q"), t, &params));
        assert!(!forward_decision(&r, &tc("o", 0, 10), &RouterId::from("unknown"), t, &params));
        // Own origin never bounces back out.
        assert!(!forward_decision(&r, &tc("r", 0, 10), &RouterId::from("s"), t, &params));
        // Exhausted budget.
        assert!(!forward_decision(&r, &tc("o", 0, 1), &RouterId::from("s"), t, &params));
        // Hop count at the cap travels no further.
        assert!(!forward_decision(&r, &tc("o", 255, 10), &RouterId::from("s"), t, &params));
    }

    #[test]
    fn schedule_steps_hop_fields_and_bounds_jitter() {
        let mut r = RouterState::new(RouterId::from("r"), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let now = SimTime::from_secs_f64(10.0);
        let max = SimDuration::from_secs_f64(0.5);
        for _ in 0..200 {
            let due = schedule_forward(&mut r, &tc("o", 3, 252), &RouterId::from("s"), now, max, &mut rng);
            assert!(due >= now && due <= now + max);
        }
        let job = r.pending_queue.front().unwrap();
        assert_eq!(job.message.hop_count, 4);
        assert_eq!(job.message.hop_limit, 251);
    }

    #[test]
    fn flush_takes_everything_once_earliest_is_due() {
        let mut r = RouterState::new(RouterId::from("r"), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let max = SimDuration::from_secs_f64(0.5);
        let t0 = SimTime::from_secs_f64(10.0);
        for i in 0..3 {
            let mut m = tc("o", 0, 10);
            m.msg_seq_num = i;
            schedule_forward(&mut r, &m, &RouterId::from("s"), t0, max, &mut rng);
        }
        let first_due = earliest_due(&r).unwrap();
        let jobs = flush_piggyback(&mut r, first_due);
        assert_eq!(jobs.len(), 3);
        assert!(r.pending_queue.is_empty());
        assert_eq!(r.counters.tcs_forwarded, 3);
        // Effective jitter never exceeds the per-job bound.
        for j in &jobs {
            assert!(first_due.saturating_sub(j.received_at) <= max);
        }
    }
}
