//! Explicit-state exploration of the counter automaton, the properties
//! checked on it, and sweeps that hold the concrete ring against the
//! abstraction and the counting oracles.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::abstract_model::{
    abstract_init_with, abstract_successors, abstraction_map, concrete_inputs, counting_oracle, AbstractInputs,
    AbstractState, M6Config, Phase, Rule,
};
use crate::error::{Error, Result};
use crate::kfault;
use crate::ring::{check_stabilization, RingState, SlotEvent};
use crate::station::{GateRule, StationId};

/// Constraint on the guessed size `x` of the accepting side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Any,
    /// `x > n - x`
    Majority,
    /// `x = n - x`
    Tie,
}

impl Constraint {
    pub fn admits(self, n: usize, x: usize) -> bool {
        match self {
            Constraint::Any => true,
            Constraint::Majority => x > n - x,
            Constraint::Tie => 2 * x == n,
        }
    }

    /// Properties checked under this constraint.
    pub fn properties(self) -> &'static [PropertyId] {
        use PropertyId::*;
        match self {
            Constraint::Any => &[P1, P6, P7, NC],
            Constraint::Majority => &[P1, P2, P6, P7, NC],
            Constraint::Tie => &[P1, P3, P4, P6, P7, NC],
        }
    }
}

impl FromStr for Constraint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "any" => Ok(Constraint::Any),
            "majority" => Ok(Constraint::Majority),
            "tie" => Ok(Constraint::Tie),
            other => Err(format!("unknown constraint {other:?} (expected any, majority or tie)")),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Any => "any",
            Constraint::Majority => "majority",
            Constraint::Tie => "tie",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PropertyId {
    P1,
    P2,
    P3,
    P4,
    P6,
    P7,
    /// Non-clique: both classes never coexist in the normal phase.
    NC,
    /// Counting oracle against concrete gate counters.
    CA,
    /// Concrete steps map to abstract transitions.
    SIM,
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A graph node: abstract state plus the inputs fixed for its run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Node {
    pub state: AbstractState,
    pub inputs: AbstractInputs,
}

#[derive(Debug, Clone)]
pub struct StateGraph {
    pub n: usize,
    pub constraint: Constraint,
    pub config: M6Config,
    pub nodes: Vec<Node>,
    /// BFS tree: predecessor and the rule taken from it.
    pub parent: Vec<Option<(usize, Rule)>>,
    pub succ: Vec<Vec<(Rule, usize)>>,
    pub initial: Vec<usize>,
    pub deadlocks: Vec<usize>,
    /// First bound or conservation violation met (only kept when not enforced).
    pub invariant_breaks: Vec<(usize, String)>,
}

pub const DEFAULT_STATE_CAP: usize = 5_000_000;

/// Breadth-first closure from every admissible initial choice of `(x, g)`.
pub fn explore(n: usize, constraint: Constraint, cfg: &M6Config, cap: usize) -> Result<StateGraph> {
    let mut g = StateGraph {
        n,
        constraint,
        config: *cfg,
        nodes: Vec::new(),
        parent: Vec::new(),
        succ: Vec::new(),
        initial: Vec::new(),
        deadlocks: Vec::new(),
        invariant_breaks: Vec::new(),
    };
    let mut index: HashMap<Node, usize> = HashMap::new();
    for x in (1..=n).filter(|x| constraint.admits(n, *x)) {
        for guess in [false, true] {
            let inputs = AbstractInputs { x: x as u16, g: guess };
            if !cfg.admits(n, inputs) {
                continue;
            }
            let node = Node {
                state: abstract_init_with(n, inputs, cfg)?,
                inputs,
            };
            index.insert(node, g.nodes.len());
            g.initial.push(g.nodes.len());
            g.nodes.push(node);
            g.parent.push(None);
        }
    }
    let mut frontier: Vec<usize> = g.initial.clone();
    g.succ.resize(g.nodes.len(), Vec::new());
    while !frontier.is_empty() {
        let expanded: Vec<(usize, Vec<(Rule, Node)>)> = frontier
            .par_iter()
            .map(|&i| {
                let node = g.nodes[i];
                let next = abstract_successors(&node.state, node.inputs, cfg)
                    .into_iter()
                    .map(|(r, s)| {
                        (
                            r,
                            Node {
                                state: s,
                                inputs: node.inputs,
                            },
                        )
                    })
                    .collect();
                (i, next)
            })
            .collect();
        let mut next_frontier = Vec::new();
        for (i, next) in expanded {
            if next.is_empty() {
                g.deadlocks.push(i);
            }
            let mut edges = Vec::with_capacity(next.len());
            for (rule, node) in next {
                let j = match index.get(&node) {
                    Some(&j) => j,
                    None => {
                        if let Some(why) = node.state.invariant_violation() {
                            if cfg.enforce_invariants {
                                return Err(Error::Invariant(format!("n={n}, inputs {:?}: {why}", node.inputs)));
                            }
                            g.invariant_breaks.push((g.nodes.len(), why));
                        }
                        let j = g.nodes.len();
                        if j >= cap {
                            return Err(Error::StateCap { n, cap });
                        }
                        index.insert(node, j);
                        g.nodes.push(node);
                        g.parent.push(Some((i, rule)));
                        g.succ.push(Vec::new());
                        next_frontier.push(j);
                        j
                    }
                };
                edges.push((rule, j));
            }
            g.succ[i] = edges;
        }
        frontier = next_frontier;
    }
    Ok(g)
}

impl StateGraph {
    /// Shortest path from an initial node to `target`.
    pub fn path_to(&self, target: usize) -> Vec<(Option<Rule>, Node)> {
        let mut path = Vec::new();
        let mut cur = Some(target);
        while let Some(i) = cur {
            let via = self.parent[i];
            path.push((via.map(|(_, r)| r), self.nodes[i]));
            cur = via.map(|(p, _)| p);
        }
        path.reverse();
        path
    }

    /// Nodes that are stuck before the normal phase.
    pub fn deadlocks_before_normal(&self) -> Vec<usize> {
        self.deadlocks
            .iter()
            .copied()
            .filter(|&i| self.nodes[i].state.phase() != Phase::Normal)
            .collect()
    }
}

/// Counterexample: states from an initial node, each with the rule that led to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub inputs: AbstractInputs,
    pub steps: Vec<(Option<Rule>, AbstractState)>,
}

impl Witness {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn from_path(path: Vec<(Option<Rule>, Node)>) -> Self {
        Self {
            inputs: path[0].1.inputs,
            steps: path.into_iter().map(|(r, n)| (r, n.state)).collect(),
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "inputs x={} g={}", self.inputs.x, self.inputs.g)?;
        for (rule, s) in &self.steps {
            match rule {
                Some(r) => writeln!(f, "  --{r:?}--> {s}")?,
                None => writeln!(f, "  {s}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyVerdict {
    pub property: PropertyId,
    pub n: usize,
    pub constraint: Constraint,
    pub holds: bool,
    pub witness: Option<Witness>,
    /// Nodes where the property's premise held; zero means a vacuous pass.
    pub premises: usize,
}

#[derive(Serialize)]
struct ReportLine {
    property: PropertyId,
    n: usize,
    constraint: Constraint,
    verdict: &'static str,
    witness_len: Option<usize>,
}

impl PropertyVerdict {
    /// One line of the machine-readable report.
    pub fn report_line(&self) -> String {
        serde_json::to_string(&ReportLine {
            property: self.property,
            n: self.n,
            constraint: self.constraint,
            verdict: if self.holds { "holds" } else { "fails" },
            witness_len: self.witness.as_ref().map(Witness::len),
        })
        .expect("plain struct serializes")
    }
}

fn end_of_round(s: &AbstractState, r: u16) -> bool {
    s.fault_seen && s.r == r && s.cp == s.n
}

/// Invariant-style check: first node (in BFS order, so on a shortest path)
/// where `premise` holds and `ok` does not.
fn check_invariant(
    g: &StateGraph,
    id: PropertyId,
    premise: impl Fn(&Node) -> bool,
    ok: impl Fn(&Node) -> bool,
) -> PropertyVerdict {
    let mut premises = 0;
    let mut bad = None;
    for (i, node) in g.nodes.iter().enumerate() {
        if premise(node) {
            premises += 1;
            if bad.is_none() && !ok(node) {
                bad = Some(i);
            }
        }
    }
    // BFS order is by discovery, which is nondecreasing in depth.
    PropertyVerdict {
        property: id,
        n: g.n,
        constraint: g.constraint,
        holds: bad.is_none(),
        witness: bad.map(|i| Witness::from_path(g.path_to(i))),
        premises,
    }
}

/// `r = 0, cp = N` (end of the first round) implies `c1 != c0`.
pub fn check_p1(g: &StateGraph) -> PropertyVerdict {
    check_invariant(
        g,
        PropertyId::P1,
        |n| end_of_round(&n.state, 0),
        |n| n.state.c1 != n.state.c0,
    )
}

/// With a majority accepting, `c1 = x` at the end of the first round.
pub fn check_p2(g: &StateGraph) -> PropertyVerdict {
    check_invariant(
        g,
        PropertyId::P2,
        |n| end_of_round(&n.state, 0),
        |n| n.state.c1 == n.inputs.x,
    )
}

fn p3_trigger(n: &Node) -> bool {
    n.state.fault_seen && n.state.d1 == n.inputs.x && n.state.d0 < n.inputs.x
}

/// `AG((d1 = x and d0 < x) => AG(c1 = x))`, searched as reachability of a
/// bad node after a trigger, over pairs (node, trigger seen).
pub fn check_p3(g: &StateGraph) -> PropertyVerdict {
    type Key = (usize, bool);
    let premises = g.nodes.iter().filter(|n| p3_trigger(n)).count();
    let mut seen: HashMap<Key, Option<(Key, Rule)>> = HashMap::new();
    let mut queue = VecDeque::new();
    for &i in &g.initial {
        let key = (i, p3_trigger(&g.nodes[i]));
        seen.insert(key, None);
        queue.push_back(key);
    }
    let mut bad = None;
    while let Some((i, trig)) = queue.pop_front() {
        if trig && g.nodes[i].state.c1 != g.nodes[i].inputs.x {
            bad = Some((i, trig));
            break;
        }
        for &(rule, j) in &g.succ[i] {
            let key = (j, trig || p3_trigger(&g.nodes[j]));
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(key) {
                e.insert(Some(((i, trig), rule)));
                queue.push_back(key);
            }
        }
    }
    let witness = bad.map(|mut key| {
        let mut path = Vec::new();
        loop {
            let via = seen[&key];
            path.push((via.map(|(_, r)| r), g.nodes[key.0]));
            match via {
                Some((prev, _)) => key = prev,
                None => break,
            }
        }
        path.reverse();
        Witness::from_path(path)
    });
    PropertyVerdict {
        property: PropertyId::P3,
        n: g.n,
        constraint: g.constraint,
        holds: witness.is_none(),
        witness,
        premises,
    }
}

/// `AG((d1 = x and d0 < x) => c1 + c0 - 2 d1 <= 0)`.
pub fn check_p4(g: &StateGraph) -> PropertyVerdict {
    check_invariant(g, PropertyId::P4, p3_trigger, |n| {
        n.state.c1 + n.state.c0 <= 2 * n.state.d1
    })
}

/// After the first round, no round ends with both classes populated.
pub fn check_p6(g: &StateGraph) -> PropertyVerdict {
    check_invariant(
        g,
        PropertyId::P6,
        |n| n.state.fault_seen && n.state.r >= 1 && n.state.cp == n.state.n,
        |n| n.state.c1 == 0 || n.state.c0 == 0,
    )
}

/// At the end of the second round one class is empty.
pub fn check_p7(g: &StateGraph) -> PropertyVerdict {
    check_invariant(
        g,
        PropertyId::P7,
        |n| end_of_round(&n.state, 1),
        |n| n.state.c1 == 0 || n.state.c0 == 0,
    )
}

/// In the normal phase one class is empty.
pub fn check_nc(g: &StateGraph) -> PropertyVerdict {
    check_invariant(
        g,
        PropertyId::NC,
        |n| n.state.phase() == Phase::Normal,
        |n| n.state.c1 == 0 || n.state.c0 == 0,
    )
}

pub fn check_property(g: &StateGraph, p: PropertyId) -> PropertyVerdict {
    match p {
        PropertyId::P1 => check_p1(g),
        PropertyId::P2 => check_p2(g),
        PropertyId::P3 => check_p3(g),
        PropertyId::P4 => check_p4(g),
        PropertyId::P6 => check_p6(g),
        PropertyId::P7 => check_p7(g),
        PropertyId::NC => check_nc(g),
        PropertyId::CA | PropertyId::SIM => panic!("{p} is a cross-check, not a graph property"),
    }
}

/// Explores once and checks every property of `constraint`.
pub fn check_all(
    n: usize,
    constraint: Constraint,
    cfg: &M6Config,
    cap: usize,
) -> Result<(StateGraph, Vec<PropertyVerdict>)> {
    let g = explore(n, constraint, cfg, cap)?;
    let verdicts = constraint.properties().iter().map(|p| check_property(&g, *p)).collect();
    Ok((g, verdicts))
}

// ---------------------------------------------------------------------------
// Concrete sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepConfig {
    pub gate: GateRule,
    /// Abort once this many runs have been generated.
    pub max_runs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gate: GateRule::Strict,
            max_runs: 20_000_000,
        }
    }
}

/// One failed check in a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: &'static str,
    /// `slot:accept` per fault, e.g. `0:{2} 2:{}`.
    pub scenario: String,
    pub slot: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] faults {}", self.kind, self.scenario)?;
        if let Some(s) = self.slot {
            write!(f, " slot {s}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CrossCheckReport {
    pub n: usize,
    pub k: usize,
    pub runs: usize,
    pub gates_checked: usize,
    pub transitions_checked: usize,
    /// Gates no oracle clause covers (only outside the oracle's premises).
    pub gates_uncovered: usize,
    pub stabilized: usize,
    pub degenerate: usize,
    /// Runs still split one round after the last fault.
    pub split_after_one_round: usize,
    pub counter_audits: usize,
    pub failures: usize,
    /// Failures per finding kind.
    pub by_kind: BTreeMap<&'static str, usize>,
    /// First findings, capped.
    pub findings: Vec<Finding>,
}

const MAX_FINDINGS: usize = 25;

impl CrossCheckReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }

    /// Failures of one kind, e.g. `"counting"` or `"simulation"`.
    pub fn failures_of(&self, kind: &str) -> usize {
        self.by_kind.get(kind).copied().unwrap_or(0)
    }

    fn fail(&mut self, f: Finding) {
        self.failures += 1;
        *self.by_kind.entry(f.kind).or_default() += 1;
        if self.findings.len() < MAX_FINDINGS {
            self.findings.push(f);
        }
    }

    fn merge(mut self, other: CrossCheckReport) -> CrossCheckReport {
        self.runs += other.runs;
        self.gates_checked += other.gates_checked;
        self.transitions_checked += other.transitions_checked;
        self.gates_uncovered += other.gates_uncovered;
        self.stabilized += other.stabilized;
        self.degenerate += other.degenerate;
        self.split_after_one_round += other.split_after_one_round;
        self.counter_audits += other.counter_audits;
        self.failures += other.failures;
        for (k, v) in other.by_kind {
            *self.by_kind.entry(k).or_default() += v;
        }
        for f in other.findings {
            if self.findings.len() < MAX_FINDINGS {
                self.findings.push(f);
            }
        }
        self
    }
}

fn describe(ring: &RingState) -> String {
    ring.faults
        .iter()
        .map(|f| {
            let ids: Vec<String> = f.accepted.iter().map(|s| s.0.to_string()).collect();
            format!("{}:{{{}}}", f.slot, ids.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Receivers a fault in the next slot may be accepted by.
fn receivers(ring: &RingState) -> Vec<StationId> {
    let owner = ring.turn();
    ring.active().map(|s| s.id).filter(|s| *s != owner).collect()
}

fn subsets(items: &[StationId]) -> impl Iterator<Item = BTreeSet<StationId>> + '_ {
    (0u64..1 << items.len()).map(move |mask| {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, s)| *s)
            .collect()
    })
}

/// Checks everything a finished run allows: stabilization, the k-fault
/// oracle, the counter audit and, for single faults, the abstraction.
fn evaluate_run(ring: &RingState, rep: &mut CrossCheckReport) {
    let trace = ring.trace().expect("sweeps record traces");
    let n = ring.n;
    let scenario = describe(ring);
    let last = ring.faults.last().expect("sweep runs have faults").slot;
    let end = last + 2 * n;
    rep.runs += 1;

    for v in &ring.violations {
        rep.fail(Finding {
            kind: "runtime-invariant",
            scenario: scenario.clone(),
            slot: None,
            detail: v.to_string(),
        });
    }

    match check_stabilization(trace) {
        Ok(st) => {
            if st.classes_after_first_round > 1 {
                rep.split_after_one_round += 1;
            }
            if st.degenerate {
                rep.degenerate += 1;
            }
            if st.stabilized {
                rep.stabilized += 1;
            } else {
                rep.fail(Finding {
                    kind: "stabilization",
                    scenario: scenario.clone(),
                    slot: Some(end),
                    detail: format!("not a single class two rounds after the last fault: {st:?}"),
                });
            }
            if !st.single_class_emitters {
                rep.fail(Finding {
                    kind: "second-round-emitters",
                    scenario: scenario.clone(),
                    slot: None,
                    detail: "emitters of the second round span several classes".into(),
                });
            }
        }
        Err(e) => rep.fail(Finding {
            kind: "stabilization",
            scenario: scenario.clone(),
            slot: None,
            detail: e.to_string(),
        }),
    }

    match kfault::verify_trace(trace, end) {
        Ok(or) => {
            rep.gates_checked += or.checked;
            rep.counter_audits += 1;
            if or.counters != or.expected_counters {
                rep.fail(Finding {
                    kind: "counter-audit",
                    scenario: scenario.clone(),
                    slot: None,
                    detail: format!(
                        "{} counters created, formula gives {}",
                        or.counters, or.expected_counters
                    ),
                });
            }
            // The oracle covers every gate once all faults fall in the round after the first.
            let within_round = last - ring.faults[0].slot < n;
            if within_round && !or.uncovered.is_empty() {
                rep.fail(Finding {
                    kind: "oracle-coverage",
                    scenario: scenario.clone(),
                    slot: or.uncovered.first().copied(),
                    detail: format!("{} gates not covered by any clause", or.uncovered.len()),
                });
            }
            rep.gates_uncovered += or.uncovered.len();
            for m in or.mismatches {
                rep.fail(Finding {
                    kind: "k-fault-oracle",
                    scenario: scenario.clone(),
                    slot: Some(m.slot),
                    detail: format!("{:?}: expected {:?}, concrete {:?}", m.clause, m.expected, m.actual),
                });
            }
        }
        Err(e) => rep.fail(Finding {
            kind: "k-fault-oracle",
            scenario: scenario.clone(),
            slot: None,
            detail: e.to_string(),
        }),
    }

    if ring.faults.len() == 1 {
        single_fault_checks(ring, &scenario, rep);
    }
}

fn single_fault_checks(ring: &RingState, scenario: &str, rep: &mut CrossCheckReport) {
    let trace = ring.trace().expect("sweeps record traces");
    let n = ring.n;
    let fault = &ring.faults[0];
    let inputs = concrete_inputs(trace).expect("one fault");
    let cfg = M6Config::default();
    let fail = |rep: &mut CrossCheckReport, kind, slot, detail| {
        rep.fail(Finding {
            kind,
            scenario: scenario.to_string(),
            slot,
            detail,
        })
    };

    // Leaving through CheckII happens exactly when both followers rejected.
    let followers: Vec<&str> = trace.records[fault.slot + 1..]
        .iter()
        .filter(|r| r.emitted)
        .take(2)
        .map(|r| r.stations[r.emitter.0].label.as_str())
        .collect();
    let both_rejected = followers.len() == 2 && followers.iter().all(|l| *l == "0");
    if inputs.g != both_rejected {
        fail(
            rep,
            "leave-active",
            None,
            format!("g={} but followers {followers:?}", inputs.g),
        );
    }

    let mut states = Vec::with_capacity(trace.records.len() + 1);
    for t in 0..=trace.records.len() {
        match abstraction_map(trace, t) {
            Ok(s) => states.push(s),
            Err(e) => {
                fail(rep, "abstraction", Some(t), e.to_string());
                return;
            }
        }
    }
    for t in 0..trace.records.len() {
        let (pre, post) = (&states[t], &states[t + 1]);
        rep.transitions_checked += 1;
        if !abstract_successors(pre, inputs, &cfg).iter().any(|(_, s)| s == post) {
            fail(rep, "simulation", Some(t), format!("{pre} has no transition to {post}"));
        }
        if post.fault_seen {
            let snaps = trace.after(t + 1);
            let active_with = |l: &str| snaps.iter().any(|s| s.is_active() && s.label == l);
            if (post.c0 == 0 && active_with("0")) || (post.c1 == 0 && active_with("1")) {
                fail(
                    rep,
                    "soundness",
                    Some(t),
                    format!("{post} reports an empty class that is populated"),
                );
            }
        }
        let rec = &trace.records[t];
        if let Some(g) = rec.gate {
            if t < fault.slot + 2 * n {
                let in_s1 = trace.after(t)[rec.emitter.0].label == "1";
                let want = counting_oracle(pre, in_s1);
                rep.gates_checked += 1;
                if want != (g.a, g.f) {
                    fail(
                        rep,
                        "counting",
                        Some(t),
                        format!("oracle {want:?}, concrete ({}, {})", g.a, g.f),
                    );
                }
            }
        }
    }
    let end = fault.slot + 2 * n;
    if end < states.len() {
        let s = &states[end];
        let stable = check_stabilization(trace).map(|v| v.stabilized).unwrap_or(false);
        if stable != (s.c0 == 0 || s.c1 == 0) {
            fail(
                rep,
                "stabilization-agreement",
                Some(end),
                format!("ring stable={stable}, abstract {s}"),
            );
        }
    }
}

/// Finishes a run `2N` slots past its last fault and evaluates it.
fn finish(mut ring: RingState, rep: &mut CrossCheckReport) -> Result<()> {
    let last = ring.faults.last().expect("faults placed").slot;
    let end = last + 3 * ring.n;
    while ring.slot < end {
        ring.step(None, &[])?;
    }
    evaluate_run(&ring, rep);
    Ok(())
}

/// Places the remaining faults in slots `[ring.slot, window_end)` and recurses.
fn place(
    ring: RingState,
    left: usize,
    window_end: usize,
    window: usize,
    rep: &mut CrossCheckReport,
    cap: usize,
) -> Result<()> {
    if left == 0 {
        return finish(ring, rep);
    }
    let mut ring = ring;
    while ring.slot < window_end {
        if ring.owner_will_emit() {
            let rcv = receivers(&ring);
            for accept in subsets(&rcv) {
                if rep.runs >= cap {
                    return Err(Error::StateCap { n: ring.n, cap });
                }
                let mut branch = ring.clone();
                branch.step(Some(&accept), &[])?;
                let t = branch.slot;
                place(branch, left - 1, t + window - 1, window, rep, cap)?;
            }
        }
        ring.step(None, &[])?;
    }
    Ok(())
}

/// Exhaustive sweep over `k` faults in a ring of `n`: the first fault in any
/// slot of the first round, each later one within `window` slots of the
/// previous (two rounds for k <= 2, one round beyond), every accept set.
pub fn cross_check(n: usize, k: usize, cfg: &SweepConfig) -> Result<CrossCheckReport> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let window = if k <= 2 { 2 * n } else { n };
    let base = RingState::with_gate(n, cfg.gate)?;
    let mut starts = Vec::new();
    let mut ring = base;
    for _ in 0..n {
        if ring.owner_will_emit() {
            for accept in subsets(&receivers(&ring)) {
                let mut b = ring.clone();
                b.step(Some(&accept), &[])?;
                starts.push(b);
            }
        }
        ring.step(None, &[])?;
    }
    let per_start = cfg.max_runs / starts.len().max(1) + 1;
    let reports: Vec<Result<CrossCheckReport>> = starts
        .into_par_iter()
        .map(|b| {
            let mut rep = CrossCheckReport {
                n,
                k,
                ..Default::default()
            };
            let t = b.slot;
            place(b, k - 1, t + window - 1, window, &mut rep, per_start)?;
            Ok(rep)
        })
        .collect();
    let mut total = CrossCheckReport {
        n,
        k,
        ..Default::default()
    };
    for r in reports {
        total = total.merge(r?);
    }
    Ok(total)
}

/// Stabilization sweep over single faults with a configurable gate; the
/// strict gate always stabilizes, a weakened one need not.
pub fn stabilization_sweep(n: usize, gate: GateRule) -> Result<CrossCheckReport> {
    let mut rep = CrossCheckReport {
        n,
        k: 1,
        ..Default::default()
    };
    let mut ring = RingState::with_gate(n, gate)?;
    for _ in 0..n {
        if ring.owner_will_emit() {
            for accept in subsets(&receivers(&ring)) {
                let mut b = ring.clone();
                b.step(Some(&accept), &[])?;
                let last = b.slot - 1;
                while b.slot < last + 2 * n {
                    b.step(None, &[])?;
                }
                rep.runs += 1;
                let scenario = describe(&b);
                match check_stabilization(b.trace().expect("trace")) {
                    Ok(st) if st.stabilized => rep.stabilized += 1,
                    Ok(st) => rep.fail(Finding {
                        kind: "stabilization",
                        scenario,
                        slot: Some(last + 2 * n),
                        detail: format!("{st:?}"),
                    }),
                    Err(e) => return Err(e),
                }
            }
        }
        ring.step(None, &[])?;
    }
    Ok(rep)
}

/// Whether the trace contains a departure through CheckII.
pub fn has_check_leave(ring: &RingState) -> bool {
    ring.trace()
        .map(|t| {
            t.records
                .iter()
                .any(|r| r.events.iter().any(|e| matches!(e, SlotEvent::CheckLeave(_))))
        })
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_with_odd_n_has_no_initial_nodes() {
        let g = explore(5, Constraint::Tie, &M6Config::default(), DEFAULT_STATE_CAP).unwrap();
        assert!(g.nodes.is_empty());
        let v = check_p3(&g);
        assert!(v.holds && v.premises == 0);
    }

    #[test]
    fn small_graph_reaches_normal_phase() {
        let g = explore(3, Constraint::Any, &M6Config::default(), DEFAULT_STATE_CAP).unwrap();
        assert!(g.nodes.iter().any(|n| n.state.phase() == Phase::Normal));
        for p in Constraint::Any.properties() {
            let v = check_property(&g, *p);
            assert!(v.holds, "{p}: {:?}", v.witness);
            assert!(v.premises > 0, "{p} vacuous");
        }
    }

    #[test]
    fn state_cap_aborts() {
        assert!(matches!(
            explore(6, Constraint::Any, &M6Config::default(), 50),
            Err(Error::StateCap { cap: 50, .. })
        ));
    }

    #[test]
    fn report_line_format() {
        let g = explore(4, Constraint::Majority, &M6Config::default(), DEFAULT_STATE_CAP).unwrap();
        let v = check_p2(&g);
        assert_eq!(
            v.report_line(),
            r#"{"property":"P2","n":4,"constraint":"majority","verdict":"holds","witness_len":null}"#
        );
    }

    #[test]
    fn single_fault_sweep_small() {
        let rep = cross_check(4, 1, &SweepConfig::default()).unwrap();
        assert!(rep.ok(), "{:#?}", rep.findings);
        assert_eq!(rep.runs, 4 * 8);
    }

    #[test]
    fn witness_paths_start_at_initial_nodes() {
        let cfg = M6Config {
            gate: GateRule::NonStrict,
            enforce_invariants: false,
            ..M6Config::default()
        };
        let g = explore(4, Constraint::Any, &cfg, DEFAULT_STATE_CAP).unwrap();
        let v = check_p7(&g);
        if let Some(w) = &v.witness {
            assert!(!w.steps[0].1.fault_seen);
            assert!(w.steps[0].0.is_none());
            assert!(w.steps[1..].iter().all(|(r, _)| r.is_some()));
        }
    }
}
