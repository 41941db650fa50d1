//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion over all of them so every line is printed before a failure.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ttp_clique::abstract_model::M6Config;
use ttp_clique::checker::{self, Constraint, CrossCheckReport, PropertyId, SweepConfig, DEFAULT_STATE_CAP};
use ttp_clique::kfault::expected_counter_count;
use ttp_clique::ring::{run, SlotEvent};
use ttp_clique::trace::{render_tables, table_blocks};
use ttp_clique::{GateRule, Scenario, StationId};

/// Golden traces must finish within this wall time.
const GOLDEN_BUDGET: Duration = Duration::from_secs(1);
/// Ring sizes of the single-fault sweeps.
const SWEEP_N: std::ops::RangeInclusive<usize> = 3..=8;
/// Ring sizes of the property checks.
const CHECK_N: std::ops::RangeInclusive<usize> = 3..=12;
/// Ring sizes of the two-fault sweep.
const K2_N: std::ops::RangeInclusive<usize> = 4..=7;
/// Extra fault counts for the counter audit, on the smallest rings.
const AUDIT_K: std::ops::RangeInclusive<usize> = 3..=5;
const AUDIT_N: std::ops::RangeInclusive<usize> = 3..=4;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

struct Outcome {
    id: u8,
    pass: bool,
    detail: String,
}

fn outcome(id: u8, pass: bool, detail: impl Into<String>) -> Outcome {
    let o = Outcome {
        id,
        pass,
        detail: detail.into(),
    };
    println!(
        "criterion {}: {} ({})",
        o.id,
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o
}

/// Rendered blocks that differ from the fixture, by caption.
fn golden_diff(scenario: &str, tables: &str) -> (Vec<String>, ttp_clique::RingState, Duration) {
    let sc = Scenario::load(&fixture(scenario)).unwrap();
    let start = Instant::now();
    let ring = run(&sc).unwrap();
    let elapsed = start.elapsed();
    let rendered = table_blocks(&render_tables(ring.trace().unwrap()));
    let expected = table_blocks(&std::fs::read_to_string(fixture(tables)).unwrap());
    let mut bad = Vec::new();
    for (caption, body) in &expected {
        match rendered.iter().find(|(c, _)| c == caption) {
            Some((_, got)) if got == body => {}
            Some((_, got)) => bad.push(format!("{caption}:\n{got}")),
            None => bad.push(format!("{caption}: missing")),
        }
    }
    (bad, ring, elapsed)
}

fn departures(ring: &ttp_clique::RingState) -> Vec<StationId> {
    ring.trace()
        .unwrap()
        .records
        .iter()
        .flat_map(|r| r.events.iter())
        .filter_map(|e| match e {
            SlotEvent::GateFailed(s) | SlotEvent::CheckLeave(s) => Some(*s),
            _ => None,
        })
        .collect()
}

fn active_set(ring: &ttp_clique::RingState) -> Vec<usize> {
    ring.active().map(|s| s.id.0).collect()
}

fn criterion_1() -> Outcome {
    let (bad, ring, t) = golden_diff("single_fault.scn", "single_fault_tables.txt");
    let dep = departures(&ring);
    let active = active_set(&ring);
    let pass = bad.is_empty() && dep == [StationId(3), StationId(1)] && active == [0, 2] && t < GOLDEN_BUDGET;
    outcome(
        1,
        pass,
        format!(
            "7 tables, {} differ; departures {dep:?}; active {active:?}; {t:?}",
            bad.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let (bad, ring, t) = golden_diff("two_faults.scn", "two_faults_tables.txt");
    let active = active_set(&ring);
    let pass = bad.is_empty() && active == [2] && t < GOLDEN_BUDGET;
    outcome(
        2,
        pass,
        format!("6 tables, {} differ; active {active:?}; {t:?}", bad.len()),
    )
}

fn single_fault_sweeps() -> Vec<CrossCheckReport> {
    SWEEP_N
        .map(|n| checker::cross_check(n, 1, &SweepConfig::default()).unwrap())
        .collect()
}

fn criterion_3(reps: &[CrossCheckReport]) -> Outcome {
    let runs: usize = reps.iter().map(|r| r.runs).sum();
    let unstable: usize = reps
        .iter()
        .map(|r| r.failures_of("stabilization") + r.failures_of("second-round-emitters"))
        .sum();
    let not_tight: Vec<usize> = reps
        .iter()
        .filter(|r| r.split_after_one_round == 0)
        .map(|r| r.n)
        .collect();
    outcome(
        3,
        runs > 0 && unstable == 0 && not_tight.is_empty(),
        format!("{runs} runs, {unstable} not stabilized, sizes never split after one round: {not_tight:?}"),
    )
}

fn criterion_4(reps: &[CrossCheckReport]) -> Outcome {
    let gates: usize = reps.iter().map(|r| r.gates_checked).sum();
    let bad: usize = reps
        .iter()
        .map(|r| r.failures_of("counting") + r.failures_of("k-fault-oracle"))
        .sum();
    outcome(
        4,
        gates > 0 && bad == 0,
        format!("{gates} gate evaluations, {bad} mismatches"),
    )
}

fn criterion_5() -> Outcome {
    let wanted = [
        PropertyId::P1,
        PropertyId::P2,
        PropertyId::P3,
        PropertyId::P4,
        PropertyId::P6,
        PropertyId::P7,
    ];
    let mut checked = 0;
    let mut failed = Vec::new();
    for n in CHECK_N {
        for c in [Constraint::Any, Constraint::Majority, Constraint::Tie] {
            let (_, verdicts) = checker::check_all(n, c, &M6Config::default(), DEFAULT_STATE_CAP).unwrap();
            for v in verdicts.iter().filter(|v| wanted.contains(&v.property)) {
                checked += 1;
                if !v.holds {
                    let len = v.witness.as_ref().map_or(0, |w| w.len());
                    failed.push(format!("{} n={n} {c} (witness {len} steps)", v.property));
                }
            }
        }
    }
    outcome(
        5,
        failed.is_empty(),
        format!("{checked} verdicts, failing: [{}]", failed.join(", ")),
    )
}

fn criterion_6(reps: &[CrossCheckReport]) -> Outcome {
    let steps: usize = reps.iter().map(|r| r.transitions_checked).sum();
    let bad: usize = reps
        .iter()
        .map(|r| r.failures_of("simulation") + r.failures_of("abstraction") + r.failures_of("stabilization-agreement"))
        .sum();
    outcome(
        6,
        steps > 0 && bad == 0,
        format!("{steps} concrete steps, {bad} without an abstract transition"),
    )
}

fn criterion_7(reps: &[CrossCheckReport]) -> Outcome {
    let runs: usize = reps.iter().map(|r| r.runs).sum();
    let gates: usize = reps.iter().map(|r| r.gates_checked).sum();
    let failures: usize = reps.iter().map(|r| r.failures).sum();
    let first = reps.iter().flat_map(|r| r.findings.first()).next();
    let mut detail = format!("{runs} two-fault runs, {gates} gates, {failures} failures");
    if let Some(f) = first {
        detail.push_str(&format!("; first: {f}"));
    }
    outcome(7, runs > 0 && gates > 0 && failures == 0, detail)
}

fn criterion_8(reps: &[CrossCheckReport]) -> Outcome {
    let audits: usize = reps.iter().map(|r| r.counter_audits).sum();
    let bad: usize = reps.iter().map(|r| r.failures_of("counter-audit")).sum();
    let ks: Vec<usize> = (1..=5).map(expected_counter_count).collect();
    outcome(
        8,
        audits > 0 && bad == 0,
        format!("{audits} counter trees audited, {bad} off the formula; formula for k=1..5: {ks:?}"),
    )
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    // Weakened concrete gate against criterion 3.
    let mut concrete = None;
    for n in SWEEP_N {
        let rep = checker::stabilization_sweep(n, GateRule::NonStrict).unwrap();
        if let Some(f) = rep.findings.first() {
            concrete = Some(format!("n={n} {f}"));
            break;
        }
    }
    notes.push(format!(
        "gate a>=f on the ring: {}",
        concrete.as_deref().unwrap_or("no witness")
    ));

    let mutated = |cfg: M6Config, label: &str, notes: &mut Vec<String>| {
        for n in 3..=8 {
            for c in [Constraint::Any, Constraint::Majority, Constraint::Tie] {
                let (_, verdicts) = checker::check_all(n, c, &cfg, DEFAULT_STATE_CAP).unwrap();
                for v in verdicts {
                    if matches!(v.property, PropertyId::P1 | PropertyId::P7) && !v.holds {
                        if let Some(w) = v.witness {
                            notes.push(format!(
                                "{label}: {} fails at n={n} {c}, witness {} steps",
                                v.property,
                                w.len()
                            ));
                            return true;
                        }
                    }
                }
            }
        }
        notes.push(format!("{label}: no P1/P7 witness"));
        false
    };
    let weak = M6Config {
        gate: GateRule::NonStrict,
        enforce_invariants: false,
        ..M6Config::default()
    };
    let no_d0 = M6Config {
        drop_d0_guard: true,
        enforce_invariants: false,
        ..M6Config::default()
    };
    let gate_model = mutated(weak, "gate a>=f in the model", &mut notes);
    let guard_model = mutated(no_d0, "without d0<c0", &mut notes);
    outcome(9, concrete.is_some() && gate_model && guard_model, notes.join("; "))
}

#[test]
fn acceptance() {
    println!();
    let mut results = vec![criterion_1(), criterion_2()];
    let k1 = single_fault_sweeps();
    results.push(criterion_3(&k1));
    results.push(criterion_4(&k1));
    results.push(criterion_5());
    results.push(criterion_6(&k1));
    let k2: Vec<CrossCheckReport> = K2_N
        .map(|n| checker::cross_check(n, 2, &SweepConfig::default()).unwrap())
        .collect();
    results.push(criterion_7(&k2));
    let mut audited: Vec<CrossCheckReport> = k1.iter().chain(&k2).cloned().collect();
    for k in AUDIT_K {
        for n in AUDIT_N {
            audited.push(checker::cross_check(n, k, &SweepConfig::default()).unwrap());
        }
    }
    results.push(criterion_8(&audited));
    results.push(criterion_9());

    let failed: Vec<u8> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
