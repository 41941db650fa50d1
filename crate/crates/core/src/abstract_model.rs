//! Counter abstraction of the single-fault ring.
//!
//! Stations are replaced by population counters per control location:
//! `c_in` (no fault yet), `c1` (accepted the faulty frame), `c0` (rejected
//! it), `cF` (left the active state). `d0`, `d1`, `dF` count the slots of the
//! current round already taken by each population, `cp` is the position in
//! the round (the faulty station's slot starts a round) and `r` counts
//! rounds since the fault, saturating at 2.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::Trace;
use crate::station::GateRule;
use crate::MIN_STATIONS;

/// Rounds after the fault are tracked up to this value.
pub const R_MAX: u16 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AbstractState {
    pub n: u16,
    pub c_in: u16,
    pub c0: u16,
    pub c1: u16,
    pub cf: u16,
    pub cp: u16,
    pub r: u16,
    pub d0: u16,
    pub d1: u16,
    pub df: u16,
    /// Station whose slot comes next, numbered from 1.
    pub tg: u16,
    /// Faulty station, numbered from 1 (0 before the fault).
    pub sg: u16,
    pub fault_seen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Phase {
    PreFault,
    Round1,
    LaterRound,
    Normal,
}

impl AbstractState {
    pub fn phase(&self) -> Phase {
        match (self.fault_seen, self.r) {
            (false, _) => Phase::PreFault,
            (true, 0) => Phase::Round1,
            (true, 1) => Phase::LaterRound,
            _ => Phase::Normal,
        }
    }

    pub fn population(&self) -> u16 {
        self.c_in + self.c0 + self.c1 + self.cf
    }

    fn advance_turn(&mut self) {
        self.tg = self.tg % self.n + 1;
    }

    /// Counter bounds; population is conserved once the fault happened.
    pub fn invariant_violation(&self) -> Option<String> {
        let s = self;
        if s.d0 > s.c0 || s.d1 > s.c1 || s.df > s.cf {
            return Some(format!("d-counter exceeds its population in {s}"));
        }
        if s.cp < 1 || s.cp > s.n {
            return Some(format!("cp out of range in {s}"));
        }
        if s.fault_seen && s.population() != s.n {
            return Some(format!("population not conserved in {s}"));
        }
        None
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(c_in={} c0={} c1={} cF={} cp={} r={} d0={} d1={} dF={} tG={} sG={})",
            self.c_in, self.c0, self.c1, self.cf, self.cp, self.r, self.d0, self.d1, self.df, self.tg, self.sg
        )
    }
}

/// Nondeterministic inputs fixed for a whole run: the guessed size of the
/// accepting side and whether CheckII forces the faulty station out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AbstractInputs {
    pub x: u16,
    pub g: bool,
}

/// Reading of the `g` strengthening on `l1`.
///
/// When the faulty station leaves at its next slot, the owners of the two
/// slots after it reject its frame, so they never sit at `l1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GGuard {
    /// With `g`, no `l1` move at `cp` 1 or 2 in any round, and `g` needs at
    /// least two rejecting stations.
    #[default]
    Conjunctive,
    /// The printed disjunction on the later-round emission, which is always true.
    Literal,
}

/// Model variants. The default is the protocol; the rest exist for mutation tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct M6Config {
    pub gate: GateRule,
    pub drop_d0_guard: bool,
    pub g_guard: GGuard,
    pub init_d1: u16,
    /// The slot closing a round belongs to the faulty station, which is never at `l0`.
    pub owner_guard: bool,
    /// Abort on a bound or conservation violation.
    pub enforce_invariants: bool,
}

impl Default for M6Config {
    fn default() -> Self {
        Self {
            gate: GateRule::Strict,
            drop_d0_guard: false,
            g_guard: GGuard::Conjunctive,
            init_d1: 1,
            owner_guard: true,
            enforce_invariants: true,
        }
    }
}

impl M6Config {
    /// Whether `inp` can be the input of some run of `n` stations.
    pub fn admits(&self, n: usize, inp: AbstractInputs) -> bool {
        let x = inp.x as usize;
        (1..=n).contains(&x) && (self.g_guard == GGuard::Literal || !inp.g || n - x >= 2)
    }

    pub fn is_mutated(&self) -> bool {
        let d = M6Config::default();
        self.gate != d.gate || self.drop_d0_guard || self.init_d1 != d.init_d1
    }
}

/// Transition names, numbered in the order of the model's transition list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    Tick,
    Fault,
    L0EmitRound1,
    L0EmitRollover,
    L0EmitLater,
    L0FailRound1,
    L0FailRollover,
    L0FailLater,
    L1EmitRound1,
    L1EmitRollover,
    L1LeaveRollover,
    L1EmitLater,
    L1FailRound1,
    L1FailRollover,
    L1FailLater,
    LFSilent,
    LFRollover,
}

pub fn abstract_init(n: usize, inputs: AbstractInputs) -> Result<AbstractState> {
    abstract_init_with(n, inputs, &M6Config::default())
}

pub fn abstract_init_with(n: usize, inputs: AbstractInputs, cfg: &M6Config) -> Result<AbstractState> {
    if n < MIN_STATIONS {
        return Err(Error::Config(format!(
            "n = {n} but at least {MIN_STATIONS} stations are required"
        )));
    }
    if inputs.x < 1 || inputs.x as usize > n {
        return Err(Error::Config(format!("x = {} outside [1, {n}]", inputs.x)));
    }
    let n = n as u16;
    Ok(AbstractState {
        n,
        c_in: n,
        c0: 0,
        c1: 1,
        cf: 0,
        cp: 1,
        r: 0,
        d0: 0,
        d1: cfg.init_d1,
        df: 0,
        tg: 1,
        sg: 0,
        fault_seen: false,
    })
}

/// All states reachable in one guarded transition.
pub fn abstract_successors(s: &AbstractState, inp: AbstractInputs, cfg: &M6Config) -> Vec<(Rule, AbstractState)> {
    let mut out = Vec::new();
    if !s.fault_seen {
        if s.c_in > 0 {
            let mut t = *s;
            t.advance_turn();
            out.push((Rule::Tick, t));
            let mut t = *s;
            t.c1 = inp.x;
            t.c0 = s.n - inp.x;
            t.c_in = 0;
            t.sg = s.tg;
            t.fault_seen = true;
            t.advance_turn();
            out.push((Rule::Fault, t));
        }
        return out;
    }

    let n = s.n;
    let full = s.cp == n;
    let open = s.cp < n;
    let gt = |a: u16, b: u16| match cfg.gate {
        GateRule::Strict => a > b,
        GateRule::NonStrict => a >= b,
    };
    let pass1_0 = gt(s.c0 + s.c1, 2 * s.d1);
    let pass1_1 = gt(s.c0 + s.c1, 2 * s.d0);
    let pass_0 = gt(s.c0, s.c1);
    let pass_1 = gt(s.c1, s.c0);
    let d0_open = cfg.drop_d0_guard || s.d0 < s.c0;
    let d1_open = s.d1 < s.c1;
    let l0_full = full && !cfg.owner_guard;
    let r0 = s.r == 0;
    let later = s.r > 0;
    let g_ok = match cfg.g_guard {
        GGuard::Conjunctive => !inp.g || !(s.cp == 1 || s.cp == 2),
        GGuard::Literal => true,
    };

    let step = |rule: Rule, f: &dyn Fn(&mut AbstractState)| {
        let mut t = *s;
        f(&mut t);
        t.advance_turn();
        (rule, t)
    };
    let next_slot = |t: &mut AbstractState| t.cp += 1;
    let rollover = |t: &mut AbstractState| {
        t.cp = 1;
        t.r = (t.r + 1).min(R_MAX);
    };

    // A transition of a location needs a process there.
    if s.c0 > 0 {
        if d0_open && pass1_0 && open && r0 {
            out.push(step(Rule::L0EmitRound1, &|t| {
                next_slot(t);
                t.d0 += 1;
            }));
        }
        if s.d0 == s.c0 && pass_0 && l0_full {
            out.push(step(Rule::L0EmitRollover, &|t| {
                rollover(t);
                t.d0 = 1;
                t.d1 = 0;
                t.df = 0;
            }));
        }
        if d0_open && pass_0 && open && later {
            out.push(step(Rule::L0EmitLater, &|t| {
                next_slot(t);
                t.d0 += 1;
            }));
        }
        if d0_open && !pass1_0 && open && r0 {
            out.push(step(Rule::L0FailRound1, &|t| {
                next_slot(t);
                t.c0 -= 1;
                t.cf += 1;
                t.df += 1;
            }));
        }
        if s.d0 == s.c0 && !pass_0 && l0_full {
            out.push(step(Rule::L0FailRollover, &|t| {
                rollover(t);
                t.c0 -= 1;
                t.cf += 1;
                t.d0 = 0;
                t.df = 1;
                t.d1 = 0;
            }));
        }
        if d0_open && !pass_0 && open && later {
            out.push(step(Rule::L0FailLater, &|t| {
                next_slot(t);
                t.c0 -= 1;
                t.cf += 1;
                t.df += 1;
            }));
        }
    }
    if s.c1 > 0 {
        if d1_open && pass1_1 && open && r0 && g_ok {
            out.push(step(Rule::L1EmitRound1, &|t| {
                next_slot(t);
                t.d1 += 1;
            }));
        }
        if s.d1 == s.c1 && pass_1 && full && (!r0 || !inp.g) {
            out.push(step(Rule::L1EmitRollover, &|t| {
                rollover(t);
                t.d1 = 1;
                t.d0 = 0;
                t.df = 0;
            }));
        }
        if s.d1 == s.c1 && pass_1 && full && r0 && inp.g {
            out.push(step(Rule::L1LeaveRollover, &|t| {
                rollover(t);
                t.d1 = 0;
                t.df = 1;
                t.d0 = 0;
                t.cf += 1;
                t.c1 -= 1;
            }));
        }
        if d1_open && pass_1 && open && later && g_ok {
            out.push(step(Rule::L1EmitLater, &|t| {
                next_slot(t);
                t.d1 += 1;
            }));
        }
        if d1_open && !pass1_1 && open && r0 && g_ok {
            out.push(step(Rule::L1FailRound1, &|t| {
                next_slot(t);
                t.c1 -= 1;
                t.cf += 1;
                t.df += 1;
            }));
        }
        if s.d1 == s.c1 && !pass_1 && full {
            out.push(step(Rule::L1FailRollover, &|t| {
                rollover(t);
                t.c1 -= 1;
                t.cf += 1;
                t.df = 1;
                t.d1 = 0;
                t.d0 = 0;
            }));
        }
        if d1_open && !pass_1 && open && later && g_ok {
            out.push(step(Rule::L1FailLater, &|t| {
                next_slot(t);
                t.c1 -= 1;
                t.cf += 1;
                t.df += 1;
            }));
        }
    }
    if s.cf > 0 {
        if s.df < s.cf && open {
            out.push(step(Rule::LFSilent, &|t| {
                next_slot(t);
                t.df += 1;
            }));
        }
        if s.df == s.cf && full {
            out.push(step(Rule::LFRollover, &|t| {
                rollover(t);
                t.df = 1;
                t.d0 = 0;
                t.d1 = 0;
            }));
        }
    }
    out
}

/// Inputs a concrete single-fault trace corresponds to.
pub fn concrete_inputs(trace: &Trace) -> Option<AbstractInputs> {
    let fault = trace.faults.first()?;
    let origin = fault.emitter;
    Some(AbstractInputs {
        x: (fault.accepted.len() + 1) as u16,
        g: trace.check_leaves().any(|(_, s)| s == origin),
    })
}

/// Counts the concrete ring after `slots_done` slots into an abstract state.
///
/// A faulty station that left through CheckII is still counted in `c1` until
/// its own slot comes round, which is where the abstract model moves it.
pub fn abstraction_map(trace: &Trace, slots_done: usize) -> Result<AbstractState> {
    let n = trace.n;
    let t = slots_done;
    if t > trace.records.len() {
        return Err(Error::Config(format!("trace has only {} slots", trace.records.len())));
    }
    let faults: Vec<_> = trace.faults.iter().filter(|f| f.slot < t).collect();
    if faults.len() > 1 {
        return Err(Error::Config("abstraction applies to single-fault runs only".into()));
    }
    let snaps = trace.after(t);
    if snaps.iter().any(|s| s.location.is_integrating()) {
        return Err(Error::Config("re-integration is outside the abstract model".into()));
    }
    let tg = (t % n) as u16 + 1;
    let Some(fault) = faults.first() else {
        let mut s = abstract_init(n, AbstractInputs { x: 1, g: false })?;
        s.tg = tg;
        return Ok(s);
    };
    let e = t - fault.slot;
    let q = (e - 1) / n;
    let origin = fault.emitter;
    let pending_leaver = t <= fault.slot + n && trace.check_leaves().any(|(slot, s)| s == origin && slot < t);
    let count = |label: &str| snaps.iter().filter(|s| s.is_active() && s.label == label).count() as u16;
    let c1 = count("1") + pending_leaver as u16;
    let c0 = count("0");
    let (mut d0, mut d1, mut df) = (0, 0, 0);
    for r in &trace.records[fault.slot + q * n..t] {
        if !r.emitted {
            df += 1;
        } else if r.stations[r.emitter.0].label == "1" {
            d1 += 1;
        } else {
            d0 += 1;
        }
    }
    Ok(AbstractState {
        n: n as u16,
        c_in: 0,
        c0,
        c1,
        cf: n as u16 - c0 - c1,
        cp: ((e - 1) % n) as u16 + 1,
        r: (q as u16).min(R_MAX),
        d0,
        d1,
        df,
        tg,
        sg: (fault.slot % n) as u16 + 1,
        fault_seen: true,
    })
}

/// Gate counters predicted from the abstract pre-state of the gate's slot.
///
/// In the first round after the fault a station of `S_1` has accepted all of
/// `W` except the `S_0` stations that already sent, and dually for `S_0`.
/// From the faulty station's next slot on, a station has accepted its own
/// class and rejected the other.
pub fn counting_oracle(pre: &AbstractState, in_s1: bool) -> (u32, u32) {
    let w = (pre.c0 + pre.c1) as u32;
    if !pre.fault_seen {
        return (pre.n as u32, 0);
    }
    let (mine, other, d_other) = if in_s1 {
        (pre.c1, pre.c0, pre.d0)
    } else {
        (pre.c0, pre.c1, pre.d1)
    };
    if pre.r == 0 && pre.cp < pre.n {
        (w - d_other as u32, d_other as u32)
    } else {
        (mine as u32, other as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::run;
    use crate::scenario::{FaultSpec, Scenario};

    fn inputs(x: u16, g: bool) -> AbstractInputs {
        AbstractInputs { x, g }
    }

    #[test]
    fn init_values() {
        let s = abstract_init(4, inputs(2, false)).unwrap();
        assert_eq!(
            (s.c_in, s.c0, s.c1, s.cf, s.cp, s.r, s.d0, s.d1, s.df),
            (4, 0, 1, 0, 1, 0, 0, 1, 0)
        );
        assert_eq!(abstract_init(3, inputs(1, false)).unwrap().c_in, 3);
        assert!(abstract_init(2, inputs(1, false)).is_err());
        assert!(abstract_init(4, inputs(0, false)).is_err());
        assert!(abstract_init(4, inputs(5, false)).is_err());
    }

    #[test]
    fn pre_fault_tick_and_fault() {
        let cfg = M6Config::default();
        let s = abstract_init(4, inputs(2, false)).unwrap();
        let succ = abstract_successors(&s, inputs(2, false), &cfg);
        assert_eq!(succ.len(), 2);
        let (_, tick) = succ.iter().find(|(r, _)| *r == Rule::Tick).unwrap();
        assert_eq!(AbstractState { tg: 2, ..s }, *tick);
        let (_, f) = succ.iter().find(|(r, _)| *r == Rule::Fault).unwrap();
        assert_eq!((f.c1, f.c0, f.c_in, f.sg), (2, 2, 0, 1));
    }

    #[test]
    fn failing_l0_rollover() {
        let cfg = M6Config {
            owner_guard: false,
            ..M6Config::default()
        };
        let s = AbstractState {
            n: 4,
            c_in: 0,
            c0: 2,
            c1: 2,
            cf: 0,
            cp: 4,
            r: 0,
            d0: 2,
            d1: 2,
            df: 0,
            tg: 1,
            sg: 1,
            fault_seen: true,
        };
        let succ = abstract_successors(&s, inputs(2, false), &cfg);
        let (_, t) = succ.iter().find(|(r, _)| *r == Rule::L0FailRollover).unwrap();
        assert_eq!((t.c0, t.cf, t.r, t.cp, t.d0, t.df, t.d1), (1, 1, 1, 1, 0, 1, 0));
        let guarded = abstract_successors(&s, inputs(2, false), &M6Config::default());
        assert!(guarded
            .iter()
            .all(|(r, _)| !matches!(r, Rule::L0FailRollover | Rule::L0EmitRollover)));
    }

    #[test]
    fn single_fault_abstraction_points() {
        let trace = run(&Scenario::new(4, 2).with_fault(FaultSpec::new(0, [2])))
            .unwrap()
            .into_trace()
            .unwrap();
        let s1 = abstraction_map(&trace, 1).unwrap();
        assert_eq!((s1.c1, s1.c0, s1.cf, s1.d1, s1.d0), (2, 2, 0, 1, 0));
        let s4 = abstraction_map(&trace, 4).unwrap();
        assert_eq!((s4.c1, s4.c0, s4.cf), (2, 1, 1));
        let s0 = abstraction_map(&trace, 0).unwrap();
        assert_eq!((s0.c_in, s0.c1, s0.fault_seen), (4, 1, false));
    }

    #[test]
    fn single_fault_steps_are_abstract_transitions() {
        let trace = run(&Scenario::new(4, 4).with_fault(FaultSpec::new(0, [2])))
            .unwrap()
            .into_trace()
            .unwrap();
        let inp = concrete_inputs(&trace).unwrap();
        assert_eq!(inp, inputs(2, false));
        let cfg = M6Config::default();
        for t in 0..trace.records.len() {
            let pre = abstraction_map(&trace, t).unwrap();
            let post = abstraction_map(&trace, t + 1).unwrap();
            assert!(
                abstract_successors(&pre, inp, &cfg).iter().any(|(_, s)| *s == post),
                "slot {t}: {pre} -/-> {post}"
            );
        }
        let end = abstraction_map(&trace, 9).unwrap();
        assert_eq!((end.c0, end.phase()), (0, Phase::Normal));
    }

    #[test]
    fn counting_oracle_on_single_fault() {
        let trace = run(&Scenario::new(4, 2).with_fault(FaultSpec::new(0, [2])))
            .unwrap()
            .into_trace()
            .unwrap();
        // s_3 at slot 3: S_0, round 1, a = |W| - d1 = 4 - 2, f = 2.
        let pre = abstraction_map(&trace, 3).unwrap();
        assert_eq!(counting_oracle(&pre, false), (2, 2));
        // s_0 at slot 4: later-rounds clause, |S_1| = 2, |S_0| = 1.
        let pre = abstraction_map(&trace, 4).unwrap();
        assert_eq!(counting_oracle(&pre, true), (2, 1));
    }
}
