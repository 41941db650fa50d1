//! Counters for several faults.
//!
//! Fault `i` splits the emitter's class `w` into `w1` (emitter plus accepting
//! receivers) and `w0`; every other class `v` carries on as `v0`. Level `i`
//! therefore has `i + 1` classes, each with a population `C` and a send
//! counter `d`. Send counters of a level freeze when the next fault arrives,
//! and those of the last level freeze one round after it. The last level
//! also keeps `dA` (sends) and `dF` (removals) per class, reset at the last
//! fault and whenever some fault's clock `Cp(i)` reaches N after it.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::Trace;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounters {
    pub c: i64,
    pub d: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AuxCounters {
    pub da: i64,
    pub df: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Level {
    pub fault_slot: usize,
    pub classes: BTreeMap<String, ClassCounters>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KFaultCounterTree {
    pub n: usize,
    /// Active stations before the first fault.
    pub root_population: i64,
    pub levels: Vec<Level>,
    pub aux: BTreeMap<String, AuxCounters>,
}

/// Number of counters a `k`-fault scenario needs: `(C, d)` per class and
/// level, one clock per fault, `(dA, dF)` per class of the last level.
pub fn expected_counter_count(k: usize) -> usize {
    (1..=k).map(|i| 2 * (i + 1)).sum::<usize>() + k + 2 * (k + 1)
}

/// A counter appearing in an oracle formula.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// `|W|`, the working stations.
    W,
    D(String),
    DA(String),
    DF(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::W => write!(f, "|W|"),
            Term::D(w) => write!(f, "d_{w}"),
            Term::DA(w) => write!(f, "dA_{w}"),
            Term::DF(w) => write!(f, "dF_{w}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expr {
    pub plus: Vec<Term>,
    pub minus: Vec<Term>,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in &self.plus {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "{t}")?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        for t in &self.minus {
            write!(f, " - {t}")?;
        }
        Ok(())
    }
}

/// Which formula covers a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Clause {
    PreFault,
    /// Within one round of the first fault.
    FirstRound,
    /// Past `Cp(i) = N` but before `Cp(i+1) = N`; `i` counts from 1.
    Between(usize),
    /// Second round after the last fault.
    SecondRound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Oracle {
    pub clause: Clause,
    pub cacc: Expr,
    pub cfail: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// No clause applies at this slot.
    Uncovered,
    UnknownClass(String),
}

impl KFaultCounterTree {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            root_population: n as i64,
            levels: Vec::new(),
            aux: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    /// `|W|`: population summed over the current level.
    pub fn working(&self) -> i64 {
        match self.levels.last() {
            Some(l) => l.classes.values().map(|c| c.c).sum(),
            None => self.root_population,
        }
    }

    pub fn counter_count(&self) -> usize {
        self.levels.iter().map(|l| 2 * l.classes.len()).sum::<usize>() + self.levels.len() + 2 * self.aux.len()
    }

    /// `Cp(i)` at slot `t`, with `i` counting from 1.
    pub fn clock(&self, i: usize, t: usize) -> i64 {
        t as i64 - self.levels[i - 1].fault_slot as i64
    }

    /// Fault at `slot` on a frame from `emitter_class`, accepted by `accepted` receivers.
    pub fn split(&mut self, slot: usize, emitter_class: &str, accepted: usize) -> Result<()> {
        let prev: Vec<(String, i64)> = match self.levels.last() {
            Some(l) => l.classes.iter().map(|(w, c)| (w.clone(), c.c)).collect(),
            None => vec![(String::new(), self.root_population)],
        };
        let pop = prev
            .iter()
            .find(|(w, _)| w == emitter_class)
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::Scenario(format!("fault {}: unknown class {emitter_class:?}", self.k() + 1)))?;
        let ones = accepted as i64 + 1;
        if pop < ones {
            return Err(Error::Scenario(format!(
                "fault {}: class {emitter_class:?} has {pop} stations but {ones} accept",
                self.k() + 1
            )));
        }
        let mut classes = BTreeMap::new();
        for (w, c) in prev {
            if w == emitter_class {
                classes.insert(format!("{w}1"), ClassCounters { c: ones, d: 1 });
                classes.insert(format!("{w}0"), ClassCounters { c: c - ones, d: 0 });
            } else {
                classes.insert(format!("{w}0"), ClassCounters { c, d: 0 });
            }
        }
        self.aux = classes.keys().map(|w| (w.clone(), AuxCounters::default())).collect();
        self.levels.push(Level {
            fault_slot: slot,
            classes,
        });
        Ok(())
    }

    fn pad(&self, label: &str) -> String {
        let mut w = label.to_string();
        while w.len() < self.k() {
            w.push('0');
        }
        w
    }

    /// Auxiliary counters restart one round after each fault; a gate at
    /// that slot already sees them cleared.
    pub fn begin_slot(&mut self, t: usize) {
        let Some(last) = self.levels.last() else { return };
        if t > last.fault_slot && self.levels.iter().any(|l| t == l.fault_slot + self.n) {
            self.aux.values_mut().for_each(|a| *a = AuxCounters::default());
        }
    }

    /// Accounts for slot `t` (not a fault slot). `owner_label` is the slot
    /// owner's partition label; `sent_last_round` says whether it emitted N
    /// slots earlier, so that a silent slot means it was just removed.
    pub fn observe(&mut self, t: usize, owner_label: &str, emitted: bool, sent_last_round: bool) {
        let Some(last) = self.levels.last() else {
            if !emitted && sent_last_round {
                self.root_population -= 1;
            }
            return;
        };
        let fk = last.fault_slot;
        let n = self.n;
        self.begin_slot(t);
        let w = self.pad(owner_label);
        let level = self.levels.last_mut().expect("checked above");
        if emitted {
            if t < fk + n {
                level.classes.get_mut(&w).expect("owner class exists").d += 1;
            }
            self.aux.get_mut(&w).expect("owner class exists").da += 1;
        } else if sent_last_round {
            level.classes.get_mut(&w).expect("owner class exists").c -= 1;
            self.aux.get_mut(&w).expect("owner class exists").df += 1;
        }
    }

    /// Formula for the gate counters of a station labelled `ws` at slot `t`.
    pub fn oracle(&self, ws: &str, t: usize) -> std::result::Result<Oracle, OracleError> {
        let k = self.k();
        if k == 0 {
            return Ok(Oracle {
                clause: Clause::PreFault,
                cacc: Expr {
                    plus: vec![Term::W],
                    minus: vec![],
                },
                cfail: Expr::default(),
            });
        }
        let n = self.n as i64;
        if ws.len() != k || !self.levels[k - 1].classes.contains_key(ws) {
            return Err(OracleError::UnknownClass(ws.to_string()));
        }
        let fk = self.levels[k - 1].fault_slot;
        if t >= fk + 2 * self.n {
            return Err(OracleError::Uncovered);
        }
        if self.clock(1, t) <= n {
            let rejected: Vec<Term> = self
                .levels
                .iter()
                .flat_map(|l| l.classes.keys())
                .filter(|w| !ws.starts_with(w.as_str()))
                .map(|w| Term::D(w.clone()))
                .collect();
            return Ok(Oracle {
                clause: Clause::FirstRound,
                cacc: Expr {
                    plus: vec![Term::W],
                    minus: rejected.clone(),
                },
                cfail: Expr {
                    plus: rejected,
                    minus: vec![],
                },
            });
        }
        if t >= fk + self.n {
            let own = ws.to_string();
            let others: Vec<&String> = self.levels[k - 1].classes.keys().filter(|w| **w != own).collect();
            return Ok(Oracle {
                clause: Clause::SecondRound,
                cacc: Expr {
                    plus: vec![Term::D(own.clone())],
                    minus: vec![Term::DF(own)],
                },
                cfail: Expr {
                    plus: others.iter().map(|w| Term::D((*w).clone())).collect(),
                    minus: others.iter().map(|w| Term::DF((*w).clone())).collect(),
                },
            });
        }
        let i = (1..k)
            .find(|&i| self.clock(i, t) >= n && self.clock(i + 1, t) < n)
            .ok_or(OracleError::Uncovered)?;
        if fk - self.levels[i - 1].fault_slot >= self.n {
            // The last fault is not in the round after fault i.
            return Err(OracleError::Uncovered);
        }
        let prefix = &ws[..i];
        let mut cacc = Expr::default();
        let mut cfail = Expr::default();
        for j in i..=k {
            for w in self.levels[j - 1].classes.keys() {
                if w == &ws[..j] {
                    cacc.plus.push(Term::D(w.clone()));
                } else {
                    cfail.plus.push(Term::D(w.clone()));
                }
            }
        }
        for w in self.levels[k - 1].classes.keys() {
            let target = if w.starts_with(prefix) { &mut cacc } else { &mut cfail };
            target.minus.push(Term::DA(w.clone()));
            target.minus.push(Term::DF(w.clone()));
        }
        Ok(Oracle {
            clause: Clause::Between(i),
            cacc,
            cfail,
        })
    }

    pub fn value(&self, term: &Term) -> i64 {
        match term {
            Term::W => self.working(),
            Term::D(w) => self
                .levels
                .get(w.len() - 1)
                .and_then(|l| l.classes.get(w))
                .map_or(0, |c| c.d),
            Term::DA(w) => self.aux.get(w).map_or(0, |a| a.da),
            Term::DF(w) => self.aux.get(w).map_or(0, |a| a.df),
        }
    }

    pub fn eval(&self, e: &Expr) -> i64 {
        e.plus.iter().map(|t| self.value(t)).sum::<i64>() - e.minus.iter().map(|t| self.value(t)).sum::<i64>()
    }
}

/// A gate where the oracle and the concrete counters disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub slot: usize,
    pub clause: Clause,
    pub expected: (i64, i64),
    pub actual: (u32, u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub checked: usize,
    pub uncovered: Vec<usize>,
    pub mismatches: Vec<Mismatch>,
    /// Counters created, and the closed-form count for the same number of faults.
    pub counters: usize,
    pub expected_counters: usize,
}

/// One gate as seen by the oracle.
#[derive(Debug, Clone)]
pub struct GateCheck<'a> {
    pub slot: usize,
    pub station: usize,
    pub label: &'a str,
    /// Formula with its value, or why none applies.
    pub oracle: std::result::Result<(Oracle, (i64, i64)), OracleError>,
    pub actual: (u32, u32),
}

/// Replays `trace` through a counter tree and compares every gate up to
/// `until` (exclusive) with the oracle.
pub fn verify_trace(trace: &Trace, until: usize) -> Result<OracleReport> {
    replay(trace, until, |_, _| {})
}

/// [`verify_trace`], also handing each gate and the tree at that point to `visit`.
pub fn replay(
    trace: &Trace,
    until: usize,
    mut visit: impl FnMut(&GateCheck<'_>, &KFaultCounterTree),
) -> Result<OracleReport> {
    let n = trace.n;
    let until = until.min(trace.records.len());
    let mut tree = KFaultCounterTree::new(n);
    let mut report = OracleReport::default();
    for t in 0..until {
        let rec = &trace.records[t];
        let owner = rec.emitter.0;
        tree.begin_slot(t);
        if let Some(g) = rec.gate {
            let label = trace.after(t)[owner].label.as_str();
            let oracle = tree.oracle(label, t).map(|o| {
                let v = (tree.eval(&o.cacc), tree.eval(&o.cfail));
                (o, v)
            });
            let check = GateCheck {
                slot: t,
                station: owner,
                label,
                oracle,
                actual: (g.a, g.f),
            };
            match &check.oracle {
                Ok((o, expected)) => {
                    report.checked += 1;
                    if *expected != (g.a as i64, g.f as i64) {
                        report.mismatches.push(Mismatch {
                            slot: t,
                            clause: o.clause,
                            expected: *expected,
                            actual: (g.a, g.f),
                        });
                    }
                }
                Err(OracleError::Uncovered) => report.uncovered.push(t),
                Err(OracleError::UnknownClass(w)) => {
                    return Err(Error::Simulation {
                        slot: t,
                        message: format!("station label {w:?} is not a class of the counter tree"),
                    })
                }
            }
            visit(&check, &tree);
        }
        if let Some(f) = trace.faults.iter().find(|f| f.slot == t) {
            tree.split(t, &f.class_before, f.accepted.len())?;
        } else {
            let sent_last_round = t < n || trace.records[t - n].emitted;
            let label = &rec.stations[owner].label;
            tree.observe(t, label, rec.emitted, sent_last_round);
        }
    }
    report.counters = tree.counter_count();
    report.expected_counters = expected_counter_count(tree.k());
    Ok(report)
}
