//! Scenarios: ring size, horizon, fault placements, re-integration requests.
//!
//! Text format, one directive per line, `#` starts a comment:
//!
//! ```text
//! n = 4
//! rounds = 4
//! fault slot=0 accept=2
//! integrate station=3 slot=12
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::station::StationId;
use crate::MIN_STATIONS;

/// A fault hitting the frame sent in `slot`. Receivers in `accept` take the
/// frame as it was sent; every other receiver sees it corrupted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultSpec {
    pub slot: usize,
    pub accept: BTreeSet<StationId>,
}

impl FaultSpec {
    pub fn new(slot: usize, accept: impl IntoIterator<Item = usize>) -> Self {
        Self {
            slot,
            accept: accept.into_iter().map(StationId).collect(),
        }
    }

    pub fn emitter(&self, n: usize) -> StationId {
        StationId(self.slot % n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntegrationRequest {
    pub station: StationId,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scenario {
    pub n: usize,
    pub rounds: usize,
    pub faults: Vec<FaultSpec>,
    pub integrations: Vec<IntegrationRequest>,
}

/// Outcome of the fault-rate check.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RateReport {
    pub warnings: Vec<String>,
    /// Two full rounds follow the last fault inside the horizon.
    pub quiescent: bool,
}

impl Scenario {
    pub fn new(n: usize, rounds: usize) -> Self {
        Self {
            n,
            rounds,
            faults: Vec::new(),
            integrations: Vec::new(),
        }
    }

    pub fn with_fault(mut self, fault: FaultSpec) -> Self {
        self.faults.push(fault);
        self
    }

    pub fn with_integration(mut self, station: usize, slot: usize) -> Self {
        self.integrations.push(IntegrationRequest {
            station: StationId(station),
            slot,
        });
        self
    }

    pub fn horizon(&self) -> usize {
        self.rounds * self.n
    }

    pub fn fault_at(&self, slot: usize) -> Option<&FaultSpec> {
        self.faults.iter().find(|f| f.slot == slot)
    }

    pub fn last_fault_slot(&self) -> Option<usize> {
        self.faults.last().map(|f| f.slot)
    }

    /// Structural validation: ids in range, slots ordered and within the horizon.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.n < MIN_STATIONS {
            return bad(format!(
                "n = {} but at least {MIN_STATIONS} stations are required",
                self.n
            ));
        }
        if self.rounds == 0 {
            return bad("rounds must be positive".into());
        }
        let horizon = self.horizon();
        let mut prev: Option<usize> = None;
        for fault in &self.faults {
            if prev.is_some_and(|p| fault.slot <= p) {
                return bad(format!("fault slots must be strictly increasing (slot {})", fault.slot));
            }
            prev = Some(fault.slot);
            if fault.slot >= horizon {
                return bad(format!("fault slot {} beyond horizon {horizon}", fault.slot));
            }
            let emitter = fault.emitter(self.n);
            for s in &fault.accept {
                if s.0 >= self.n {
                    return bad(format!("fault slot {}: station {} out of range", fault.slot, s.0));
                }
                if *s == emitter {
                    return bad(format!(
                        "fault slot {}: accept set must not contain the emitter {}",
                        fault.slot, s.0
                    ));
                }
            }
        }
        for req in &self.integrations {
            if req.station.0 >= self.n {
                return bad(format!("integrate: station {} out of range", req.station.0));
            }
            if req.slot >= horizon {
                return bad(format!("integrate: slot {} beyond horizon {horizon}", req.slot));
            }
        }
        Ok(())
    }

    /// Fault-rate check. Gaps under two rounds between faults only warn; a
    /// horizon that ends before two quiet rounds after the last fault is
    /// reported as not quiescent.
    pub fn rate_report(&self) -> RateReport {
        let mut report = RateReport {
            warnings: Vec::new(),
            quiescent: true,
        };
        for pair in self.faults.windows(2) {
            let gap = pair[1].slot - pair[0].slot;
            if gap < 2 * self.n {
                report.warnings.push(format!(
                    "faults at slots {} and {} are {gap} slots apart (less than two rounds)",
                    pair[0].slot, pair[1].slot
                ));
            }
        }
        if let Some(last) = self.last_fault_slot() {
            if last + 2 * self.n > self.horizon() {
                report.quiescent = false;
                report.warnings.push(format!(
                    "horizon {} ends before two quiet rounds after the fault at slot {last}",
                    self.horizon()
                ));
            }
        }
        report
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut rounds = None;
        let mut faults = Vec::new();
        let mut integrations = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, rest) = match line.split_once(char::is_whitespace) {
                Some((h, r)) => (h, r.trim()),
                None => (line, ""),
            };
            match head {
                "fault" => {
                    let kv = parse_pairs(rest).map_err(err)?;
                    let slot = require(&kv, "slot").map_err(err)?;
                    let slot = parse_usize("slot", slot).map_err(err)?;
                    let accept = require(&kv, "accept").map_err(err)?;
                    let accept = parse_id_list(accept).map_err(err)?;
                    reject_unknown(&kv, &["slot", "accept"]).map_err(err)?;
                    faults.push(FaultSpec { slot, accept });
                }
                "integrate" => {
                    let kv = parse_pairs(rest).map_err(err)?;
                    let station = parse_usize("station", require(&kv, "station").map_err(err)?).map_err(err)?;
                    let slot = parse_usize("slot", require(&kv, "slot").map_err(err)?).map_err(err)?;
                    reject_unknown(&kv, &["station", "slot"]).map_err(err)?;
                    integrations.push(IntegrationRequest {
                        station: StationId(station),
                        slot,
                    });
                }
                _ => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| err(format!("unrecognised directive {line:?}")))?;
                    let value = parse_usize(key.trim(), value.trim()).map_err(err)?;
                    match key.trim() {
                        "n" => n = Some(value),
                        "rounds" => rounds = Some(value),
                        other => return Err(err(format!("unknown key {other:?}"))),
                    }
                }
            }
        }
        let missing = |what: &str| Error::Parse {
            line: text.lines().count().max(1),
            message: format!("missing `{what} = ...`"),
        };
        let scenario = Scenario {
            n: n.ok_or_else(|| missing("n"))?,
            rounds: rounds.ok_or_else(|| missing("rounds"))?,
            faults,
            integrations,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "rounds = {}", self.rounds)?;
        for fault in &self.faults {
            let ids: Vec<String> = fault.accept.iter().map(|s| s.0.to_string()).collect();
            writeln!(f, "fault slot={} accept={}", fault.slot, ids.join(","))?;
        }
        for req in &self.integrations {
            writeln!(f, "integrate station={} slot={}", req.station.0, req.slot)?;
        }
        Ok(())
    }
}

fn parse_pairs(rest: &str) -> std::result::Result<Vec<(&str, &str)>, String> {
    let mut out = Vec::new();
    for token in rest.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found {token:?}"))?;
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(format!("duplicate key {k:?}"));
        }
        out.push((k, v));
    }
    Ok(out)
}

fn require<'a>(kv: &[(&str, &'a str)], key: &str) -> std::result::Result<&'a str, String> {
    kv.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| format!("missing {key}="))
}

fn reject_unknown(kv: &[(&str, &str)], allowed: &[&str]) -> std::result::Result<(), String> {
    match kv.iter().find(|(k, _)| !allowed.contains(k)) {
        Some((k, _)) => Err(format!("unknown key {k:?}")),
        None => Ok(()),
    }
}

fn parse_usize(key: &str, v: &str) -> std::result::Result<usize, String> {
    v.parse()
        .map_err(|_| format!("{key}: expected a non-negative integer, found {v:?}"))
}

fn parse_id_list(v: &str) -> std::result::Result<BTreeSet<StationId>, String> {
    if v.is_empty() {
        return Ok(BTreeSet::new());
    }
    let mut ids = BTreeSet::new();
    for part in v.split(',') {
        let id = parse_usize("accept", part.trim())?;
        if !ids.insert(StationId(id)) {
            return Err(format!("accept: station {id} listed twice"));
        }
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BASIC: &str = "n = 4\nrounds = 2\nfault slot=0 accept=2\n";

    #[test]
    fn parses_basic_file() {
        let s = Scenario::parse(BASIC).unwrap();
        assert_eq!(s.n, 4);
        assert_eq!(s.rounds, 2);
        assert_eq!(s.faults, vec![FaultSpec::new(0, [2])]);
        assert!(s.rate_report().quiescent);
    }

    #[test]
    fn comments_blank_lines_and_empty_accept() {
        let text = "# two faults\nn=4\n\nrounds = 3  # horizon\nfault slot=0 accept=2,3\nfault slot=2 accept=\nintegrate station=1 slot=9\n";
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.faults[1].accept.len(), 0);
        assert_eq!(s.integrations[0].station, StationId(1));
        assert_eq!(s.rate_report().warnings.len(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("n = 4\nrounds = x\n", 2),
            ("n = 4\nrounds = 2\nfault slot=0\n", 3),
            ("n = 4\nrounds = 2\nfault slot=0 accept=1 extra=3\n", 3),
            ("n = 4\nrounds = 2\nbogus line\n", 3),
            ("n = 4\nrounds = 2\nfault slot=0 accept=1,1\n", 3),
        ];
        for (text, line) in cases {
            match Scenario::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let bad = [
            "n = 2\nrounds = 2\n",
            "n = 4\nrounds = 2\nfault slot=0 accept=7\n",
            "n = 4\nrounds = 2\nfault slot=0 accept=0\n",
            "n = 4\nrounds = 2\nfault slot=3 accept=\nfault slot=1 accept=\n",
            "n = 4\nrounds = 2\nfault slot=8 accept=\n",
            "n = 4\nrounds = 2\nintegrate station=4 slot=1\n",
        ];
        for text in bad {
            assert!(matches!(Scenario::parse(text), Err(Error::Scenario(_))), "{text:?}");
        }
    }

    #[test]
    fn quiescence_needs_two_rounds_after_last_fault() {
        let s = Scenario::new(4, 2).with_fault(FaultSpec::new(1, [2]));
        let r = s.rate_report();
        assert!(!r.quiescent);
        assert_eq!(r.warnings.len(), 1);
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        (3usize..9, 1usize..5).prop_flat_map(|(n, rounds)| {
            let horizon = n * rounds;
            let fault = (0..horizon, proptest::collection::btree_set(0..n, 0..n));
            (
                Just(n),
                Just(rounds),
                proptest::collection::vec(fault, 0..4),
                proptest::collection::vec((0..n, 0..horizon), 0..3),
            )
                .prop_map(|(n, rounds, raw_faults, integ)| {
                    let mut slots: Vec<(usize, BTreeSet<usize>)> = raw_faults;
                    slots.sort_by_key(|(s, _)| *s);
                    slots.dedup_by_key(|(s, _)| *s);
                    let mut sc = Scenario::new(n, rounds);
                    for (slot, mut acc) in slots {
                        acc.remove(&(slot % n));
                        sc.faults.push(FaultSpec::new(slot, acc));
                    }
                    for (st, slot) in integ {
                        sc = sc.with_integration(st, slot);
                    }
                    sc
                })
        })
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(s in arb_scenario()) {
            let text = s.to_string();
            let back = Scenario::parse(&text).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
