//! Assertion evaluation and the machine-readable run report.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use crate::analysis;
use crate::engine::{LogBody, RunOutput, TraceOutcome};
use crate::scenario::{
    AssertionSpec, RecalcCounter, RouterSelector, ScenarioSpec, TraceExpect,
};
use crate::types::{RouterId, SimTime};

#[derive(Debug, Clone, Serialize)]
pub struct AssertionOutcome {
    pub id: String,
    pub pass: bool,
    pub observed: String,
    pub expected: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Full evaluation result for one run.
pub struct Evaluation {
    pub outcomes: Vec<AssertionOutcome>,
    pub report: serde_json::Value,
}

impl Evaluation {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

fn honest_handle(run: &RunOutput, id: &RouterId) -> Result<u32, String> {
    run.snapshot_by_id(id)
        .map(|s| s.handle)
        .ok_or_else(|| format!("no honest router claims `{id}`"))
}

fn selector_handles(run: &RunOutput, sel: &RouterSelector) -> Result<Vec<u32>, String> {
    match sel {
        RouterSelector::AllHonest(_) => Ok(run.honest_snapshots().map(|s| s.handle).collect()),
        RouterSelector::List(ids) => ids.iter().map(|id| honest_handle(run, id)).collect(),
    }
}

fn norm_edge(a: &RouterId, b: &RouterId) -> (RouterId, RouterId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn norm_cycles(mut cycles: Vec<Vec<RouterId>>) -> Vec<Vec<RouterId>> {
    for c in &mut cycles {
        c.sort();
    }
    cycles.sort();
    cycles
}

fn counter_value(run: &RunOutput, handle: u32, counter: RecalcCounter) -> u64 {
    let Some(state) = &run.snapshots[handle as usize].state else {
        return 0;
    };
    let c = state.counters;
    match counter {
        RecalcCounter::MprRecalcs => c.mpr_recalcs,
        RecalcCounter::RouteRecalcs => c.route_recalcs,
        RecalcCounter::HellosSent => c.hellos_sent,
        RecalcCounter::TcsSent => c.tcs_sent,
        RecalcCounter::TcsForwarded => c.tcs_forwarded,
    }
}

fn recalc_event_matches(counter: RecalcCounter, body: &LogBody) -> bool {
    match counter {
        RecalcCounter::MprRecalcs => matches!(body, LogBody::MprRecalc { .. }),
        RecalcCounter::RouteRecalcs => matches!(body, LogBody::RouteRecalc { .. }),
        RecalcCounter::HellosSent => matches!(body, LogBody::HelloSent { .. }),
        RecalcCounter::TcsSent => matches!(body, LogBody::TcSent { .. }),
        RecalcCounter::TcsForwarded => matches!(body, LogBody::TcForwarded { .. }),
    }
}

fn trace_matches(run: &RunOutput, outcome: &TraceOutcome, expect: &TraceExpect) -> bool {
    match (expect, outcome) {
        (TraceExpect::DeliveredAtHandle(h), TraceOutcome::Delivered { at, .. }) => at == h,
        (TraceExpect::DeliveredAt(id), TraceOutcome::Delivered { at, .. }) => {
            let snap = &run.snapshots[*at as usize];
            snap.is_honest && snap.claimed.contains(id)
        }
        (TraceExpect::DroppedAtHandle(h), TraceOutcome::Dropped { at, .. }) => at == h,
        (TraceExpect::Loop(ids), TraceOutcome::Loop { cycle }) => {
            let mut got: Vec<RouterId> = cycle
                .iter()
                .map(|h| {
                    run.snapshots[*h as usize]
                        .claimed
                        .first()
                        .cloned()
                        .unwrap_or_else(|| RouterId::new(format!("#{h}")))
                })
                .collect();
            got.sort();
            let mut want = ids.clone();
            want.sort();
            got == want
        }
        _ => false,
    }
}

fn eval_one(
    run: &RunOutput,
    baseline: Option<&RunOutput>,
    a: &AssertionSpec,
) -> AssertionOutcome {
    let fail = |observed: String, expected: String| AssertionOutcome {
        id: a.id().to_string(),
        pass: false,
        observed,
        expected,
        tolerance: None,
    };
    let verdict = |pass: bool, observed: String, expected: String| AssertionOutcome {
        id: a.id().to_string(),
        pass,
        observed,
        expected,
        tolerance: None,
    };

    match a {
        AssertionSpec::MprSet { router, equals, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let got: Vec<RouterId> = run.snapshots[h as usize]
                .state
                .as_ref()
                .map(|s| s.mprs.clone())
                .unwrap_or_default();
            let mut want = equals.clone();
            want.sort();
            verdict(got == want, format!("{got:?}"), format!("{want:?}"))
        }
        AssertionSpec::Coverage { origin, full, excludes, margin, .. } => {
            let cov = analysis::coverage_by_origin(run);
            let Some(oc) = cov.get(origin) else {
                return fail(format!("no TCs originated by `{origin}`"), "coverage data".into());
            };
            if !excludes.is_empty() {
                let mut excluded_handles = vec![];
                for id in excludes {
                    match honest_handle(run, id) {
                        Ok(h) => excluded_handles.push((id.clone(), h)),
                        Err(e) => return fail(e, String::new()),
                    }
                }
                let mut hits = 0u64;
                for (_, set) in oc.per_message.values() {
                    for (_, h) in &excluded_handles {
                        if set.contains(h) {
                            hits += 1;
                        }
                    }
                }
                verdict(
                    hits == 0,
                    format!("{hits} processed TCs from {origin} at excluded routers"),
                    "0".into(),
                )
            } else if full.unwrap_or(true) {
                let all: Vec<u32> = run.honest_snapshots().map(|s| s.handle).collect();
                let origin_node = run.snapshot_by_id(origin).map(|s| s.handle);
                let warm = SimTime::from_secs_f64(3.0 * run.params.tc_interval);
                let cutoff =
                    SimTime::from_secs_f64(run.duration.as_secs_f64() - margin);
                let mut counted = 0;
                let mut incomplete = 0;
                for (t, set) in oc.per_message.values() {
                    if *t < warm || *t > cutoff {
                        continue;
                    }
                    counted += 1;
                    let missing = all
                        .iter()
                        .filter(|h| Some(**h) != origin_node && !set.contains(h))
                        .count();
                    if missing > 0 {
                        incomplete += 1;
                    }
                }
                verdict(
                    counted > 0 && incomplete == 0,
                    format!("{incomplete} of {counted} countable TCs incomplete"),
                    "all countable TCs reach every honest router".into(),
                )
            } else {
                fail("coverage assertion needs `full` or `excludes`".into(), String::new())
            }
        }
        AssertionSpec::TcProcessedTotal { router, origins, max, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let count = analysis::count_events(run, h, SimTime::ZERO, run.duration, |b| {
                matches!(b, LogBody::TcProcessed { origin, .. } if origins.contains(origin))
            });
            verdict(count <= *max, format!("{count}"), format!("<= {max}"))
        }
        AssertionSpec::AppliedInWindow { router, origin, from, to, min, max, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let count = analysis::count_events(
                run,
                h,
                SimTime::from_secs_f64(*from),
                SimTime::from_secs_f64(*to),
                |b| matches!(b, LogBody::TcApplied { origin: o, .. } if o == origin),
            );
            let ok = min.map(|m| count >= m).unwrap_or(true)
                && max.map(|m| count <= m).unwrap_or(true);
            verdict(
                ok,
                format!("{count} applications in [{from}, {to}]"),
                format!("min={min:?} max={max:?}"),
            )
        }
        AssertionSpec::OldAnsnMin { router, origin, min, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let count = analysis::count_events(run, h, SimTime::ZERO, run.duration, |b| {
                matches!(b, LogBody::TcOldAnsn { origin: o, .. } if o == origin)
            });
            verdict(count >= *min, format!("{count}"), format!(">= {min}"))
        }
        AssertionSpec::DupDropExists { router, origin, from_sender, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let count = analysis::count_events(run, h, SimTime::ZERO, run.duration, |b| {
                matches!(
                    b,
                    LogBody::DupDropped { origin: o, sender, .. }
                        if o == origin && sender == from_sender
                )
            });
            verdict(count >= 1, format!("{count}"), ">= 1".into())
        }
        AssertionSpec::Trace { src, dst, any_of, .. } => {
            let matrix = analysis::misdelivery_matrix(run);
            let Some(outcome) = matrix.get(&(src.clone(), dst.clone())) else {
                return fail(format!("no probe recorded for ({src}, {dst})"), String::new());
            };
            let ok = any_of.iter().any(|e| trace_matches(run, outcome, e));
            verdict(ok, outcome.label(), format!("{any_of:?}"))
        }
        AssertionSpec::Loops { dst, equals, .. } => {
            let got = norm_cycles(analysis::find_loops(run, dst));
            let want = norm_cycles(equals.clone());
            verdict(got == want, format!("{got:?}"), format!("{want:?}"))
        }
        AssertionSpec::Consistency { routers, expect, .. } => {
            let handles = match selector_handles(run, routers) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let report = analysis::consistency_check(run, &handles);
            verdict(
                report.consistent == *expect,
                format!("consistent={}", report.consistent),
                format!("consistent={expect}"),
            )
        }
        AssertionSpec::SnapshotEdges { router, equals, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let got = run.snapshots[h as usize]
                .state
                .as_ref()
                .map(|s| s.perceived_edges.clone())
                .unwrap_or_default();
            let want: std::collections::BTreeSet<(RouterId, RouterId)> =
                equals.iter().map(|(x, y)| norm_edge(x, y)).collect();
            verdict(got == want, format!("{got:?}"), format!("{want:?}"))
        }
        AssertionSpec::MapContains { routers, edges, .. } => {
            let handles = match selector_handles(run, routers) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let want: Vec<(RouterId, RouterId)> =
                edges.iter().map(|(x, y)| norm_edge(x, y)).collect();
            let mut missing = vec![];
            for h in handles {
                let got = run.snapshots[h as usize]
                    .state
                    .as_ref()
                    .map(|s| s.perceived_edges.clone())
                    .unwrap_or_default();
                for e in &want {
                    if !got.contains(e) {
                        missing.push((h, e.clone()));
                    }
                }
            }
            verdict(
                missing.is_empty(),
                format!("missing: {missing:?}"),
                "all routers hold all edges".into(),
            )
        }
        AssertionSpec::RateRatio { router, counter, expected, tolerance, .. } => {
            let Some(base) = baseline else {
                return fail("baseline run unavailable".into(), String::new());
            };
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let hb = match honest_handle(base, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let name = counter.to_string();
            match analysis::amplification(run, base, h, hb, &name) {
                Ok(ratio) => AssertionOutcome {
                    id: a.id().to_string(),
                    pass: (ratio - expected).abs() <= tolerance * expected,
                    observed: format!("{ratio:.3}"),
                    expected: format!("{expected:.3}"),
                    tolerance: Some(*tolerance),
                },
                Err(e) => fail(e, format!("{expected:.3}")),
            }
        }
        AssertionSpec::MeanJitterRatio { router, min, max, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let samples = analysis::jitter_samples(run, h);
            let Some(m) = analysis::mean(&samples) else {
                return fail("no forwarded TCs at router".into(), String::new());
            };
            let ratio = m / run.params.max_jitter;
            let ok = min.map(|lo| ratio >= lo).unwrap_or(true)
                && max.map(|hi| ratio <= hi).unwrap_or(true);
            verdict(
                ok,
                format!("mean jitter ratio {ratio:.4} over {} forwards", samples.len()),
                format!("min={min:?} max={max:?}"),
            )
        }
        AssertionSpec::RecalcVsFlips { router, counter, attacker, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let (from, to) = analysis::steady_window(run);
            let flip_cutoff = SimTime::from_secs_f64(to.as_secs_f64() - 1.0);
            let flips = analysis::count_events(run, *attacker, from, flip_cutoff, |b| {
                matches!(b, LogBody::AttackFlip { .. })
            });
            let recalcs = analysis::count_events(run, h, from, to, |b| {
                recalc_event_matches(*counter, b)
            });
            verdict(
                flips >= 1 && recalcs >= flips,
                format!("{recalcs} recalcs vs {flips} flips"),
                "recalcs >= flips >= 1".into(),
            )
        }
        AssertionSpec::RecalcVsApplied { router, origin, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let applied = analysis::count_events(run, h, SimTime::ZERO, run.duration, |b| {
                matches!(b, LogBody::TcApplied { origin: o, .. } if o == origin)
            });
            let recalcs = analysis::count_events(run, h, SimTime::ZERO, run.duration, |b| {
                matches!(b, LogBody::RouteRecalc { .. })
            });
            verdict(
                applied >= 1 && recalcs >= applied,
                format!("{recalcs} route recalcs vs {applied} applied TCs"),
                "recalcs >= applied >= 1".into(),
            )
        }
        AssertionSpec::LinkDownWithin { router, neighbor, after, within, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let start = SimTime::from_secs_f64(*after);
            let deadline = SimTime::from_secs_f64(after + within);
            let down = run
                .events
                .iter()
                .filter(|e| e.node == h && e.t > start)
                .find(|e| match &e.body {
                    LogBody::NeighborRemoved { neighbor: n } => n == neighbor,
                    LogBody::LinkChanged { neighbor: n, usable, .. } => n == neighbor && !usable,
                    _ => false,
                })
                .map(|e| e.t);
            match down {
                Some(t) if t <= deadline => {
                    verdict(true, format!("down at t={t}"), format!("<= {deadline}"))
                }
                Some(t) => verdict(false, format!("down at t={t}"), format!("<= {deadline}")),
                None => fail("link never went down".into(), format!("<= {deadline}")),
            }
        }
        AssertionSpec::LqExcludedWithinMisses { router, neighbor, max_misses, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let excluded_at = run
                .events
                .iter()
                .filter(|e| e.node == h)
                .find(|e| matches!(&e.body, LogBody::LqExcluded { neighbor: n, .. } if n == neighbor))
                .map(|e| e.t);
            let Some(at) = excluded_at else {
                return fail("link never excluded by quality".into(), format!("<= {max_misses} misses"));
            };
            let misses = analysis::count_events(run, h, SimTime::ZERO, at, |b| {
                matches!(b, LogBody::LqMiss { neighbor: n, .. } if n == neighbor)
            });
            verdict(
                misses <= *max_misses,
                format!("excluded after {misses} misses"),
                format!("<= {max_misses} misses"),
            )
        }
        AssertionSpec::RouteFlapsMin { router, dst, min, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let flaps = analysis::route_flaps(run, h, dst);
            verdict(flaps >= *min, format!("{flaps}"), format!(">= {min}"))
        }
        AssertionSpec::TopoValidityExact { router, advertiser, after, seconds, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let start = SimTime::from_secs_f64(*after);
            let mut count = 0;
            let mut wrong = vec![];
            for e in run.events.iter().filter(|e| e.node == h && e.t > start) {
                if let LogBody::TcApplied { origin, validity_s, .. } = &e.body {
                    if origin == advertiser {
                        count += 1;
                        if (validity_s - seconds).abs() > 1e-9 {
                            wrong.push(*validity_s);
                        }
                    }
                }
            }
            verdict(
                count >= 1 && wrong.is_empty(),
                format!("{count} applications, wrong validities: {wrong:?}"),
                format!("all exactly {seconds} s"),
            )
        }
        AssertionSpec::SymCount { router, equals, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let got = run.snapshots[h as usize]
                .state
                .as_ref()
                .map(|s| s.sym_neighbors.len() as u64)
                .unwrap_or(0);
            verdict(got == *equals, format!("{got}"), format!("{equals}"))
        }
        AssertionSpec::TopologyEmpty { router, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let empty = run.snapshots[h as usize]
                .state
                .as_ref()
                .map(|s| s.topology_empty)
                .unwrap_or(true);
            verdict(empty, format!("empty={empty}"), "empty=true".into())
        }
        AssertionSpec::RouteExists { router, dst, distance, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let entry = run.snapshots[h as usize]
                .state
                .as_ref()
                .and_then(|s| s.routing_table.distance(dst));
            match (entry, distance) {
                (Some(d), Some(want)) => {
                    verdict(d == *want, format!("distance {d}"), format!("distance {want}"))
                }
                (Some(d), None) => verdict(true, format!("distance {d}"), "reachable".into()),
                (None, _) => fail("no route".into(), "reachable".into()),
            }
        }
        AssertionSpec::NoSpoofLeak { .. } => {
            let leaks = analysis::spoof_leaks(run);
            verdict(
                leaks.is_empty(),
                format!("leaks: {leaks:?}"),
                "no honest TC advertises an attacker-backed link".into(),
            )
        }
        AssertionSpec::CounterMin { router, counter, min, .. } => {
            let h = match honest_handle(run, router) {
                Ok(h) => h,
                Err(e) => return fail(e, String::new()),
            };
            let got = counter_value(run, h, *counter);
            verdict(got >= *min, format!("{got}"), format!(">= {min}"))
        }
    }
}

/// Evaluate every assertion and assemble the report JSON.
pub fn evaluate(
    spec: &ScenarioSpec,
    run: &RunOutput,
    baseline: Option<&RunOutput>,
) -> Evaluation {
    let outcomes: Vec<AssertionOutcome> = spec
        .assertions
        .iter()
        .map(|a| eval_one(run, baseline, a))
        .collect();

    // Coverage summary per originator.
    let cov = analysis::coverage_by_origin(run);
    let honest: Vec<u32> = run.honest_snapshots().map(|s| s.handle).collect();
    let mut coverage_json = BTreeMap::new();
    for (origin, oc) in &cov {
        let origin_node = run.snapshot_by_id(origin).map(|s| s.handle);
        let mut full = 0;
        let mut missed: BTreeMap<String, u64> = BTreeMap::new();
        for (_, set) in oc.per_message.values() {
            let missing: Vec<u32> = honest
                .iter()
                .copied()
                .filter(|h| Some(*h) != origin_node && !set.contains(h))
                .collect();
            if missing.is_empty() {
                full += 1;
            }
            for h in missing {
                *missed.entry(h.to_string()).or_insert(0) += 1;
            }
        }
        coverage_json.insert(
            origin.to_string(),
            json!({
                "messages": oc.per_message.len(),
                "full_coverage": full,
                "missed_by_handle": missed,
            }),
        );
    }

    let consistency = analysis::consistency_check(run, &honest);
    let max_diff = consistency.pairwise_diffs.values().copied().max().unwrap_or(0);

    // Loops toward destinations someone asserts or probes about.
    let mut loop_dsts: Vec<RouterId> = vec![];
    for a in &spec.assertions {
        if let AssertionSpec::Loops { dst, .. } = a {
            loop_dsts.push(dst.clone());
        }
    }
    for p in &spec.probes {
        loop_dsts.push(p.dst.clone());
    }
    loop_dsts.sort();
    loop_dsts.dedup();
    let loops_json: BTreeMap<String, serde_json::Value> = loop_dsts
        .iter()
        .map(|dst| {
            let cycles = analysis::find_loops(run, dst);
            (dst.to_string(), json!(cycles.iter().map(|c| c.iter().map(|r| r.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>()))
        })
        .collect();

    let (from, to) = analysis::steady_window(run);
    let mut rates_json = BTreeMap::new();
    for snap in &run.snapshots {
        if let Some(state) = &snap.state {
            let c = state.counters;
            rates_json.insert(
                snap.handle.to_string(),
                json!({
                    "hellos_sent": c.hellos_sent,
                    "tcs_sent": c.tcs_sent,
                    "tcs_forwarded": c.tcs_forwarded,
                    "mpr_recalcs": c.mpr_recalcs,
                    "route_recalcs": c.route_recalcs,
                    "steady_hello_rate": analysis::rate_in_window(run, snap.handle, "hellos_sent", from, to),
                    "steady_tc_rate": analysis::rate_in_window(run, snap.handle, "tcs_sent", from, to),
                }),
            );
        }
    }

    let misdelivery: Vec<serde_json::Value> = run
        .traces
        .iter()
        .map(|t| {
            json!({
                "at": t.at.as_secs_f64(),
                "src": t.src.to_string(),
                "dst": t.dst.to_string(),
                "outcome": t.outcome.label(),
            })
        })
        .collect();

    let report = json!({
        "scenario": run.scenario_name,
        "seed": run.seed,
        "duration": run.duration.as_secs_f64(),
        "coverage": coverage_json,
        "consistency": {
            "consistent": consistency.consistent,
            "pairs_compared": consistency.pairwise_diffs.len(),
            "max_pairwise_diff": max_diff,
        },
        "loops": loops_json,
        "rates": rates_json,
        "misdelivery": misdelivery,
        "assertions": outcomes.iter().map(|o| serde_json::to_value(o).expect("serializable")).collect::<Vec<_>>(),
    });

    Evaluation { outcomes, report }
}
