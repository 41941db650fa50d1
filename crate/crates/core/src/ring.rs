//! Synchronous TDMA ring: one slot per step, the slot owner gates and emits,
//! every other station receives simultaneously.
//!
//! Slot `t` belongs to station `t mod N`. The initial state is the
//! fault-free steady state right after `s_{N-1}` has sent, so slot 0 starts
//! a round with `s_0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::station::{
    FrameKind, GateRule, IntegrationAction, IntegrationEvent, Location, MembershipVector, Phase, ProtocolError,
    ReceiveOutcome, Reception, StationId, StationState,
};
use crate::MIN_STATIONS;

/// What one station looked like after a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StationSnapshot {
    pub m: String,
    pub a: u32,
    pub f: u32,
    pub location: Location,
    /// Partition label: one bit per fault seen while active.
    #[serde(skip)]
    pub label: String,
    #[serde(skip)]
    pub phase: Phase,
}

impl StationSnapshot {
    fn of(st: &StationState, label: &str) -> Self {
        Self {
            m: st.m.to_string(),
            a: st.a,
            f: st.f,
            location: st.location,
            label: label.to_string(),
            phase: st.check.phase,
        }
    }

    pub fn is_active(&self) -> bool {
        self.location.is_active()
    }

    pub fn vector(&self) -> MembershipVector {
        self.m.parse().expect("snapshots hold 0/1 strings")
    }
}

/// Counters seen by the clique-avoidance gate, before it resets them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateEval {
    pub a: u32,
    pub f: u32,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotEvent {
    GateFailed(StationId),
    /// Left the active state because CheckIIb passed.
    CheckLeave(StationId),
    IntegrationStarted {
        station: StationId,
        source: StationId,
    },
    IntegrationImpossible(StationId),
    IntegrationCountersReset(StationId),
    Reintegrated(StationId),
    IntegrationFailed(StationId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotRecord {
    pub slot: usize,
    pub emitter: StationId,
    pub emitted: bool,
    pub fault: bool,
    pub gate: Option<GateEval>,
    pub events: Vec<SlotEvent>,
    pub stations: Vec<StationSnapshot>,
}

/// A fault as it actually played out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultEvent {
    pub slot: usize,
    pub emitter: StationId,
    /// Receivers whose CRC evaluation accepted the frame.
    pub accepted: BTreeSet<StationId>,
    /// Emitter's label before the split.
    pub class_before: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub n: usize,
    pub initial: Vec<StationSnapshot>,
    pub records: Vec<SlotRecord>,
    pub faults: Vec<FaultEvent>,
}

impl Trace {
    /// Station snapshots after `slots_done` slots (0 gives the initial state).
    pub fn after(&self, slots_done: usize) -> &[StationSnapshot] {
        if slots_done == 0 {
            &self.initial
        } else {
            &self.records[slots_done - 1].stations
        }
    }

    pub fn check_leaves(&self) -> impl Iterator<Item = (usize, StationId)> + '_ {
        self.records.iter().flat_map(|r| {
            r.events.iter().filter_map(move |e| match e {
                SlotEvent::CheckLeave(s) => Some((r.slot, *s)),
                _ => None,
            })
        })
    }
}

/// Runtime assertion failures. A correct implementation never records any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MutualRecognition {
        slot: usize,
        s: StationId,
        other: StationId,
    },
    CounterDiscipline {
        slot: usize,
        station: StationId,
        a: u32,
        f: u32,
        received: u32,
    },
    OwnBitCleared {
        slot: usize,
        station: StationId,
    },
    FailedVectorNotZero {
        slot: usize,
        station: StationId,
    },
    ForeignAccept {
        slot: usize,
        station: StationId,
    },
    UnexpectedCheckLeave {
        slot: usize,
        station: StationId,
    },
    PartitionMismatch {
        slot: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MutualRecognition { slot, s, other } => {
                write!(
                    f,
                    "slot {slot}: {s} and {other} share a vector but do not list each other"
                )
            }
            Violation::CounterDiscipline {
                slot,
                station,
                a,
                f: fl,
                received,
            } => write!(
                f,
                "slot {slot}: {station} has a={a} f={fl} after {received} received frames"
            ),
            Violation::OwnBitCleared { slot, station } => {
                write!(f, "slot {slot}: active {station} has its own bit cleared")
            }
            Violation::FailedVectorNotZero { slot, station } => {
                write!(f, "slot {slot}: failed {station} keeps a nonzero vector")
            }
            Violation::ForeignAccept { slot, station } => {
                write!(f, "slot {slot}: {station} accepted a faulty frame from another class")
            }
            Violation::UnexpectedCheckLeave { slot, station } => {
                write!(f, "slot {slot}: {station} left via CheckII without having been faulted")
            }
            Violation::PartitionMismatch { slot } => {
                write!(f, "slot {slot}: partition labels disagree with vector equality")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RingState {
    pub n: usize,
    /// Next slot to run.
    pub slot: usize,
    pub stations: Vec<StationState>,
    pub gate: GateRule,
    pub labels: Vec<String>,
    pub faults: Vec<FaultEvent>,
    pub fault_origin: Option<StationId>,
    last_emit: Vec<Option<usize>>,
    received: Vec<u32>,
    pub violations: Vec<Violation>,
    trace: Option<Trace>,
}

impl RingState {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_gate(n, GateRule::Strict)
    }

    pub fn with_gate(n: usize, gate: GateRule) -> Result<Self> {
        if n < MIN_STATIONS {
            return Err(Error::Config(format!(
                "n = {n} but at least {MIN_STATIONS} stations are required"
            )));
        }
        let stations: Vec<StationState> = (0..n)
            .map(|j| {
                let mut st = StationState::steady(StationId(j), n, (n - j) as u32);
                if j == n - 1 {
                    st.check = crate::station::CheckPhase::awaiting_first();
                }
                st
            })
            .collect();
        let labels = vec![String::new(); n];
        let initial = stations
            .iter()
            .zip(&labels)
            .map(|(s, l)| StationSnapshot::of(s, l))
            .collect();
        Ok(Self {
            n,
            slot: 0,
            last_emit: (0..n).map(|_| None).collect(),
            received: (0..n).map(|j| (n - 1 - j) as u32).collect(),
            stations,
            gate,
            labels,
            faults: Vec::new(),
            fault_origin: None,
            violations: Vec::new(),
            trace: Some(Trace {
                n,
                initial,
                records: Vec::new(),
                faults: Vec::new(),
            }),
        })
    }

    /// Stop recording snapshots (sweeps that only need gate outcomes).
    pub fn without_trace(mut self) -> Self {
        self.trace = None;
        self
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.trace.as_ref()
    }

    pub fn into_trace(self) -> Option<Trace> {
        self.trace
    }

    pub fn turn(&self) -> StationId {
        StationId(self.slot % self.n)
    }

    pub fn active(&self) -> impl Iterator<Item = &StationState> {
        self.stations.iter().filter(|s| s.is_active())
    }

    /// Whether the owner of the next slot will emit.
    pub fn owner_will_emit(&self) -> bool {
        let st = &self.stations[self.turn().0];
        match st.location {
            l if l.is_active() => st.gate_passes(self.gate),
            Location::IntegCounting => self.gate.admits(st.a, st.f),
            _ => false,
        }
    }

    fn integration_source(&self) -> Option<StationId> {
        self.stations
            .iter()
            .filter(|s| s.is_active())
            .filter_map(|s| self.last_emit[s.id.0].map(|t| (t, s.id)))
            .max()
            .map(|(_, id)| id)
            .or_else(|| {
                self.active()
                    .map(|s| s.id)
                    .max_by_key(|id| (id.0 + self.n - self.slot % self.n) % self.n)
            })
    }

    /// Runs one slot. `fault` is the accept set if this slot's frame is faulted.
    pub fn step(&mut self, fault: Option<&BTreeSet<StationId>>, integrate: &[StationId]) -> Result<SlotRecord> {
        let t = self.slot;
        let n = self.n;
        let owner = self.turn();
        let sim_err = |message: String| Error::Simulation { slot: t, message };
        let mut events = Vec::new();

        let mut just_started = BTreeSet::new();
        for &s in integrate {
            if s.0 >= n {
                return Err(sim_err(format!("integration of unknown station {}", s.0)));
            }
            if self.stations[s.0].location != Location::Failed {
                return Err(sim_err(format!(
                    "{s} cannot integrate while {:?}",
                    self.stations[s.0].location
                )));
            }
            let source = self.integration_source();
            let src_state = source.map(|id| self.stations[id.0].clone());
            match self.stations[s.0].reintegrate_step(
                IntegrationEvent::Start {
                    source: src_state.as_ref(),
                },
                self.gate,
            ) {
                Ok(_) => {
                    events.push(SlotEvent::IntegrationStarted {
                        station: s,
                        source: source.expect("start succeeded with a source"),
                    });
                    self.received[s.0] = 0;
                    let src = source.expect("start succeeded with a source");
                    self.labels[s.0] = self.labels[src.0].clone();
                    just_started.insert(s);
                }
                Err(ProtocolError::NoIntegrationSource) => events.push(SlotEvent::IntegrationImpossible(s)),
                Err(e) => return Err(e.into()),
            }
        }

        let mut frame = None;
        let mut gate = None;
        let own = &mut self.stations[owner.0];
        if own.is_active() {
            let (a, f) = (own.a, own.f);
            let passed = own.clique_gate(self.gate);
            gate = Some(GateEval { a, f, passed });
            if passed {
                frame = Some(own.frame(FrameKind::Normal));
            } else {
                events.push(SlotEvent::GateFailed(owner));
            }
        } else if own.location.is_integrating() && !just_started.contains(&owner) {
            let (a, f) = (own.a, own.f);
            match own.reintegrate_step(IntegrationEvent::OwnSlot, self.gate)? {
                IntegrationAction::CountersReset => events.push(SlotEvent::IntegrationCountersReset(owner)),
                IntegrationAction::Emits(fr) => {
                    gate = Some(GateEval { a, f, passed: true });
                    events.push(SlotEvent::Reintegrated(owner));
                    frame = Some(fr);
                }
                IntegrationAction::Fails => {
                    gate = Some(GateEval { a, f, passed: false });
                    events.push(SlotEvent::IntegrationFailed(owner));
                }
                IntegrationAction::Started => unreachable!("own slot never starts integration"),
            }
        }
        if own.location.is_integrating() || frame.is_some() {
            self.received[owner.0] = 0;
        }
        if frame.is_some() {
            self.last_emit[owner.0] = Some(t);
        }

        if let Some(accept) = fault {
            if frame.is_none() {
                return Err(sim_err(format!("fault scheduled but {owner} does not emit")));
            }
            if let Some(bad) = accept
                .iter()
                .find(|s| s.0 >= n || **s == owner || !self.stations[s.0].is_active())
            {
                return Err(sim_err(format!(
                    "accept set member {} is not an active receiver",
                    bad.0
                )));
            }
        }

        let mut accepted = vec![false; n];
        accepted[owner.0] = frame.is_some();
        for s in (0..n).map(StationId).filter(|s| *s != owner) {
            let reception = match fault {
                Some(acc) if !acc.contains(&s) => Reception::Corrupted,
                _ => Reception::Intact,
            };
            let out = self.stations[s.0].receive_step(owner, frame.as_ref(), reception)?;
            if frame.is_some() && out != ReceiveOutcome::Ignored {
                self.received[s.0] += 1;
            }
            accepted[s.0] = out.accepted();
            if out == ReceiveOutcome::Checked(crate::station::CheckOutcome::LeaveActive) {
                events.push(SlotEvent::CheckLeave(s));
                if !self.faults.iter().any(|fe| fe.emitter == s) {
                    self.violations
                        .push(Violation::UnexpectedCheckLeave { slot: t, station: s });
                }
            }
        }

        if fault.is_some() {
            let class_before = self.labels[owner.0].clone();
            let mut accepted_set = BTreeSet::new();
            for (s, &acc) in accepted.iter().enumerate().take(n) {
                if !self.stations[s].is_active() {
                    continue;
                }
                if s != owner.0 && acc {
                    accepted_set.insert(StationId(s));
                    if self.labels[s] != class_before {
                        self.violations.push(Violation::ForeignAccept {
                            slot: t,
                            station: StationId(s),
                        });
                    }
                }
                self.labels[s].push(if acc { '1' } else { '0' });
            }
            if self.fault_origin.is_none() {
                self.fault_origin = Some(owner);
                for st in &mut self.stations {
                    st.faulty_station = Some(owner);
                }
            }
            let ev = FaultEvent {
                slot: t,
                emitter: owner,
                accepted: accepted_set,
                class_before,
            };
            if let Some(tr) = &mut self.trace {
                tr.faults.push(ev.clone());
            }
            self.faults.push(ev);
        }

        self.check_invariants(t);

        let record = SlotRecord {
            slot: t,
            emitter: owner,
            emitted: frame.is_some(),
            fault: fault.is_some(),
            gate,
            events,
            stations: self
                .stations
                .iter()
                .zip(&self.labels)
                .map(|(s, l)| StationSnapshot::of(s, l))
                .collect(),
        };
        if let Some(tr) = &mut self.trace {
            tr.records.push(record.clone());
        }
        self.slot += 1;
        Ok(record)
    }

    fn check_invariants(&mut self, t: usize) {
        for (i, st) in self.stations.iter().enumerate() {
            let id = StationId(i);
            if st.is_active() {
                if !st.m.get(id) {
                    self.violations.push(Violation::OwnBitCleared { slot: t, station: id });
                }
                if st.a + st.f != 1 + self.received[i] {
                    self.violations.push(Violation::CounterDiscipline {
                        slot: t,
                        station: id,
                        a: st.a,
                        f: st.f,
                        received: self.received[i],
                    });
                }
            } else if st.location == Location::IntegCounting {
                if st.a + st.f != self.received[i] {
                    self.violations.push(Violation::CounterDiscipline {
                        slot: t,
                        station: id,
                        a: st.a,
                        f: st.f,
                        received: self.received[i],
                    });
                }
            } else if st.location == Location::Failed && st.m.count_ones() != 0 {
                self.violations
                    .push(Violation::FailedVectorNotZero { slot: t, station: id });
            }
        }
        let active: Vec<&StationState> = self.active().collect();
        let mut found = Vec::new();
        for (i, s) in active.iter().enumerate() {
            for o in &active[i + 1..] {
                if s.m == o.m && !(s.m.get(o.id) && o.m.get(s.id)) {
                    found.push(Violation::MutualRecognition {
                        slot: t,
                        s: s.id,
                        other: o.id,
                    });
                }
            }
        }
        self.violations.extend(found);
        if !self.partition_classes().vector_consistent {
            self.violations.push(Violation::PartitionMismatch { slot: t });
        }
    }

    pub fn snapshots(&self) -> Vec<StationSnapshot> {
        self.stations
            .iter()
            .zip(&self.labels)
            .map(|(s, l)| StationSnapshot::of(s, l))
            .collect()
    }

    pub fn partition_classes(&self) -> PartitionMap {
        PartitionMap::from_snapshots(&self.snapshots())
    }

    pub fn is_single_clique(&self) -> bool {
        is_single_clique(&self.snapshots())
    }

    pub fn clique_status(&self) -> CliqueStatus {
        clique_status(&self.snapshots())
    }
}

/// Runs a scenario to its horizon with the protocol's strict gate.
pub fn run(scenario: &Scenario) -> Result<RingState> {
    run_with(scenario, GateRule::Strict)
}

pub fn run_with(scenario: &Scenario, gate: GateRule) -> Result<RingState> {
    scenario.validate()?;
    let mut ring = RingState::with_gate(scenario.n, gate)?;
    for t in 0..scenario.horizon() {
        let integrate: Vec<StationId> = scenario
            .integrations
            .iter()
            .filter(|r| r.slot == t)
            .map(|r| r.station)
            .collect();
        let fault = scenario.fault_at(t).map(|f| &f.accept);
        ring.step(fault, &integrate)?;
    }
    Ok(ring)
}

/// Active stations grouped by partition label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    pub classes: BTreeMap<String, BTreeSet<StationId>>,
    /// Same label exactly when same vector.
    pub vector_consistent: bool,
}

impl PartitionMap {
    pub fn from_snapshots(snaps: &[StationSnapshot]) -> Self {
        let mut classes: BTreeMap<String, BTreeSet<StationId>> = BTreeMap::new();
        let mut by_vector: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut by_label: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (i, s) in snaps.iter().enumerate().filter(|(_, s)| s.is_active()) {
            classes.entry(s.label.clone()).or_default().insert(StationId(i));
            by_vector.entry(&s.m).or_default().insert(&s.label);
            by_label.entry(&s.label).or_default().insert(&s.m);
        }
        let vector_consistent = by_vector.values().all(|l| l.len() == 1) && by_label.values().all(|v| v.len() == 1);
        Self {
            classes,
            vector_consistent,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Every pair of active stations lists each other.
pub fn is_single_clique(snaps: &[StationSnapshot]) -> bool {
    let active: Vec<(usize, MembershipVector)> = snaps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_active())
        .map(|(i, s)| (i, s.vector()))
        .collect();
    active
        .iter()
        .all(|(i, vi)| active.iter().all(|(j, _)| vi.get(StationId(*j)) || i == j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliqueStatus {
    SingleClique,
    /// No station is active; vacuously a clique.
    Degenerate,
    Split,
}

pub fn clique_status(snaps: &[StationSnapshot]) -> CliqueStatus {
    if !snaps.iter().any(|s| s.is_active()) {
        CliqueStatus::Degenerate
    } else if is_single_clique(snaps) {
        CliqueStatus::SingleClique
    } else {
        CliqueStatus::Split
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stabilization {
    pub stabilized: bool,
    pub degenerate: bool,
    pub surviving_label: Option<String>,
    /// Number of partition classes one round after the last fault.
    pub classes_after_first_round: usize,
    /// Successful emitters of the second round all carry the same label.
    pub single_class_emitters: bool,
    /// Slot count at which the verdict was taken.
    pub judged_after: usize,
}

/// Verdict two rounds after the last fault (or at the end of a fault-free trace).
pub fn check_stabilization(trace: &Trace) -> Result<Stabilization> {
    let n = trace.n;
    let (end, round1_end, round2) = match trace.faults.last() {
        Some(f) => (f.slot + 2 * n, f.slot + n, f.slot + n..f.slot + 2 * n),
        None => (trace.records.len(), trace.records.len(), 0..0),
    };
    if end > trace.records.len() {
        return Err(Error::Scenario(format!(
            "trace of {} slots ends before two quiet rounds after the last fault (needs {end})",
            trace.records.len()
        )));
    }
    let snaps = trace.after(end);
    let classes = PartitionMap::from_snapshots(snaps);
    let status = clique_status(snaps);
    let emitter_labels: BTreeSet<&str> = trace.records[round2]
        .iter()
        .filter(|r| r.emitted)
        .map(|r| r.stations[r.emitter.0].label.as_str())
        .collect();
    Ok(Stabilization {
        stabilized: status == CliqueStatus::SingleClique && classes.len() == 1,
        degenerate: status == CliqueStatus::Degenerate,
        surviving_label: (classes.len() == 1).then(|| classes.classes.keys().next().cloned().unwrap()),
        classes_after_first_round: PartitionMap::from_snapshots(trace.after(round1_end)).len(),
        single_class_emitters: emitter_labels.len() <= 1,
        judged_after: end,
    })
}
