//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a property or cross-check failed, 2 bad input,
//! 3 a resource cap was hit.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::abstract_model::M6Config;
use crate::checker::{self, Constraint, SweepConfig, DEFAULT_STATE_CAP};
use crate::error::Error;
use crate::kfault::{self, OracleError};
use crate::ring::{check_stabilization, clique_status, run_with, CliqueStatus, PartitionMap};
use crate::scenario::Scenario;
use crate::station::GateRule;
use crate::trace;
use crate::MIN_STATIONS;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAP: i32 = 3;

/// Inclusive range of ring sizes, written `lo..hi` or as a single size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NRange {
    pub lo: usize,
    pub hi: usize,
}

impl NRange {
    pub fn iter(self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }
}

impl FromStr for NRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad ring size {v:?} in range {s:?}"))
        };
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
            None => (num(s)?, num(s)?),
        };
        if lo < MIN_STATIONS {
            return Err(format!("ring sizes start at {MIN_STATIONS}, got {lo}"));
        }
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        Ok(NRange { lo, hi })
    }
}

impl fmt::Display for NRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GateArg {
    /// `a > f`
    Strict,
    /// `a >= f`, a deliberately broken gate
    NonStrict,
}

impl From<GateArg> for GateRule {
    fn from(g: GateArg) -> Self {
        match g {
            GateArg::Strict => GateRule::Strict,
            GateArg::NonStrict => GateRule::NonStrict,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ttp-clique",
    version,
    about = "TTP membership and clique avoidance: simulate, abstract, check"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its trace (JSON lines) or per-slot tables.
    Simulate(SimulateArgs),
    /// Run a scenario and print the partition classes after every slot.
    Partition(ScenarioArgs),
    /// Explore the counter automaton and check its properties.
    Check(CheckArgs),
    /// Sweep every fault placement and compare the ring with the oracles.
    CrossCheck(CrossCheckArgs),
    /// Replay a scenario through the k-fault counter tree, gate by gate.
    KfaultOracle(ScenarioArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario file.
    #[arg(value_name = "SCENARIO", conflicts_with = "scenario")]
    pub path: Option<PathBuf>,
    /// Same as the positional argument.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: ScenarioArgs,
    /// Print a table per slot; the trace then goes to `--out` only.
    #[arg(long)]
    pub tables: bool,
    /// Clique-avoidance gate.
    #[arg(long, value_enum, default_value = "strict")]
    pub gate: GateArg,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Same as `--n`.
    #[arg(value_name = "RANGE", conflicts_with = "n")]
    pub range: Option<NRange>,
    /// Same as `--constraint`.
    #[arg(value_name = "CONSTRAINT", conflicts_with = "constraint")]
    pub constraint_pos: Option<Constraint>,
    /// Ring sizes, `lo..hi`.
    #[arg(long)]
    pub n: Option<NRange>,
    /// any, majority or tie.
    #[arg(long)]
    pub constraint: Option<Constraint>,
    /// Clique-avoidance gate.
    #[arg(long, value_enum, default_value = "strict")]
    pub gate: GateArg,
    /// Remove the `d0 < c0` strengthening.
    #[arg(long)]
    pub drop_d0_guard: bool,
    /// Maximum number of states per exploration.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub cap: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossCheckArgs {
    /// Same as `--n`.
    #[arg(value_name = "RANGE", conflicts_with = "n")]
    pub range: Option<NRange>,
    /// Same as `--k`.
    #[arg(value_name = "K", conflicts_with = "k")]
    pub k_pos: Option<usize>,
    /// Ring sizes, `lo..hi`.
    #[arg(long)]
    pub n: Option<NRange>,
    /// Number of faults per run.
    #[arg(long)]
    pub k: Option<usize>,
    /// Clique-avoidance gate.
    #[arg(long, value_enum, default_value = "strict")]
    pub gate: GateArg,
    /// Maximum number of runs per ring size.
    #[arg(long, default_value_t = SweepConfig::default().max_runs)]
    pub cap: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_INPUT
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::StateCap { .. } => EXIT_CAP,
        Error::Invariant(_) => EXIT_FAILED,
        _ => EXIT_INPUT,
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> crate::Result<i32> {
    match cmd {
        Command::Simulate(a) => simulate(&a, out, err),
        Command::Partition(a) => partition(&a, out, err),
        Command::Check(a) => check(&a, out, err),
        Command::CrossCheck(a) => cross_check(&a, out, err),
        Command::KfaultOracle(a) => kfault_oracle(&a, out, err),
    }
}

fn load(args: &ScenarioArgs, err: &mut dyn Write) -> crate::Result<Scenario> {
    let path = args
        .path
        .as_ref()
        .or(args.scenario.as_ref())
        .ok_or_else(|| Error::Config("a scenario file is required".into()))?;
    let sc = Scenario::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        other => other,
    })?;
    for w in sc.rate_report().warnings {
        writeln!(err, "warning: {w}")?;
    }
    Ok(sc)
}

/// Runs `f` against `--out` when given, else against `out`.
fn with_output(
    path: Option<&Path>,
    out: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> crate::Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(out)?,
    }
    Ok(())
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> crate::Result<i32> {
    let sc = load(&a.input, err)?;
    let ring = run_with(&sc, a.gate.into())?;
    let tr = ring.trace().expect("runs record traces");
    if a.tables {
        write!(out, "{}", trace::render_tables(tr))?;
        if let Some(p) = &a.input.out {
            with_output(Some(p), out, |w| trace::write_jsonl(tr, w))?;
        }
    } else {
        with_output(a.input.out.as_deref(), out, |w| trace::write_jsonl(tr, w))?;
    }
    for v in &ring.violations {
        writeln!(err, "violation: {v}")?;
    }
    Ok(if ring.violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn describe(classes: &PartitionMap) -> String {
    if classes.is_empty() {
        return "(no active station)".into();
    }
    classes
        .classes
        .iter()
        .map(|(label, ids)| {
            let ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
            let label = if label.is_empty() { "-" } else { label };
            format!("{label}={{{}}}", ids.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn partition(a: &ScenarioArgs, out: &mut dyn Write, err: &mut dyn Write) -> crate::Result<i32> {
    let sc = load(a, err)?;
    let ring = run_with(&sc, GateRule::Strict)?;
    let tr = ring.trace().expect("runs record traces");
    let stab = if sc.faults.is_empty() {
        None
    } else {
        check_stabilization(tr).ok()
    };
    with_output(a.out.as_deref(), out, |w| {
        for r in &tr.records {
            let status = match clique_status(&r.stations) {
                CliqueStatus::SingleClique => "single clique",
                CliqueStatus::Degenerate => "degenerate",
                CliqueStatus::Split => "split",
            };
            let classes = PartitionMap::from_snapshots(&r.stations);
            writeln!(w, "{}: {} ({status})", trace::caption(r), describe(&classes))?;
        }
        if let Some(s) = &stab {
            writeln!(
                w,
                "two rounds after the last fault: {}",
                if s.stabilized { "stabilized" } else { "NOT stabilized" }
            )?;
        }
        Ok(())
    })?;
    Ok(match stab {
        Some(s) if !s.stabilized => EXIT_FAILED,
        _ => EXIT_OK,
    })
}

fn check(a: &CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> crate::Result<i32> {
    let range = a
        .range
        .or(a.n)
        .ok_or_else(|| Error::Config("a ring-size range is required".into()))?;
    let constraint = a.constraint_pos.or(a.constraint).unwrap_or(Constraint::Any);
    let cfg = M6Config {
        gate: a.gate.into(),
        drop_d0_guard: a.drop_d0_guard,
        enforce_invariants: !a.drop_d0_guard && a.gate == GateArg::Strict,
        ..M6Config::default()
    };
    let mut lines = Vec::new();
    let mut first_witness = None;
    for n in range.iter() {
        let (graph, verdicts) = checker::check_all(n, constraint, &cfg, a.cap)?;
        for d in graph.deadlocks_before_normal() {
            writeln!(
                err,
                "finding: n={n} deadlock at {} {:?}",
                graph.nodes[d].state, graph.nodes[d].inputs
            )?;
        }
        for v in verdicts {
            lines.push(v.report_line());
            if v.holds && v.premises == 0 && !graph.nodes.is_empty() {
                writeln!(err, "note: n={n} {} holds vacuously", v.property)?;
            }
            if let (false, None) = (v.holds, &first_witness) {
                first_witness = Some((n, v.property, v.witness.clone()));
            }
        }
    }
    with_output(a.out.as_deref(), out, |w| {
        lines.iter().try_for_each(|l| writeln!(w, "{l}"))
    })?;
    match first_witness {
        Some((n, p, Some(wit))) => {
            writeln!(
                err,
                "{p} fails for n={n}; shortest witness ({} steps):\n{wit}",
                wit.len()
            )?;
            Ok(EXIT_FAILED)
        }
        Some(_) => Ok(EXIT_FAILED),
        None => Ok(EXIT_OK),
    }
}

fn cross_check(a: &CrossCheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> crate::Result<i32> {
    let range = a
        .range
        .or(a.n)
        .ok_or_else(|| Error::Config("a ring-size range is required".into()))?;
    let k = a.k_pos.or(a.k).unwrap_or(1);
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > 2 {
        writeln!(
            err,
            "warning: k={k}: the number of fault placements grows factorially; later faults are kept within one round of the previous one"
        )?;
    }
    let cfg = SweepConfig {
        gate: a.gate.into(),
        max_runs: a.cap,
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for n in range.iter() {
        let rep = checker::cross_check(n, k, &cfg)?;
        ok &= rep.ok();
        for f in &rep.findings {
            writeln!(err, "n={n}: {f}")?;
        }
        let mut summary = rep.clone();
        summary.findings.clear();
        lines.push(serde_json::to_string(&summary).expect("plain struct serializes"));
    }
    with_output(a.out.as_deref(), out, |w| {
        lines.iter().try_for_each(|l| writeln!(w, "{l}"))
    })?;
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

fn kfault_oracle(a: &ScenarioArgs, out: &mut dyn Write, err: &mut dyn Write) -> crate::Result<i32> {
    let sc = load(a, err)?;
    let ring = run_with(&sc, GateRule::Strict)?;
    let tr = ring.trace().expect("runs record traces");
    let until = sc.last_fault_slot().map_or(tr.records.len(), |f| f + 2 * sc.n);
    let mut lines = Vec::new();
    let report = kfault::replay(tr, until, |g, _| {
        let head = format!(
            "slot {} s_{} [{}]",
            g.slot,
            g.station,
            if g.label.is_empty() { "-" } else { g.label }
        );
        let line = match &g.oracle {
            Ok((o, (acc, fail))) => {
                let verdict = if (*acc, *fail) == (g.actual.0 as i64, g.actual.1 as i64) {
                    "ok"
                } else {
                    "MISMATCH"
                };
                format!(
                    "{head} {:?}: CAcc = {} = {acc}, CFail = {} = {fail}; ring ({}, {}) {verdict}",
                    o.clause, o.cacc, o.cfail, g.actual.0, g.actual.1
                )
            }
            Err(OracleError::Uncovered) => format!("{head} no clause applies; ring ({}, {})", g.actual.0, g.actual.1),
            Err(OracleError::UnknownClass(w)) => format!("{head} unknown class {w}"),
        };
        lines.push(line);
    })?;
    with_output(a.out.as_deref(), out, |w| {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        writeln!(
            w,
            "gates checked {}, uncovered {}, mismatches {}; counters {} (formula {})",
            report.checked,
            report.uncovered.len(),
            report.mismatches.len(),
            report.counters,
            report.expected_counters
        )
    })?;
    let ok = report.mismatches.is_empty() && report.counters == report.expected_counters;
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}
