//! Weaken the gate or drop a guard and watch the checks catch it.

use ttp_clique::abstract_model::M6Config;
use ttp_clique::checker::{check_all, stabilization_sweep, Constraint, DEFAULT_STATE_CAP};
use ttp_clique::GateRule;

fn main() -> ttp_clique::Result<()> {
    let rep = stabilization_sweep(4, GateRule::NonStrict)?;
    println!("ring with a >= f: {} of {} runs fail", rep.failures, rep.runs);
    if let Some(f) = rep.findings.first() {
        println!("  {f}");
    }

    let mutants = [
        (
            "a >= f",
            M6Config {
                gate: GateRule::NonStrict,
                enforce_invariants: false,
                ..M6Config::default()
            },
        ),
        (
            "no d0 < c0",
            M6Config {
                drop_d0_guard: true,
                enforce_invariants: false,
                ..M6Config::default()
            },
        ),
        (
            "d1 starts at 0",
            M6Config {
                init_d1: 0,
                enforce_invariants: false,
                ..M6Config::default()
            },
        ),
    ];
    for (name, cfg) in mutants {
        let (_, verdicts) = check_all(4, Constraint::Tie, &cfg, DEFAULT_STATE_CAP)?;
        let failing: Vec<String> = verdicts
            .iter()
            .filter(|v| !v.holds)
            .map(|v| v.property.to_string())
            .collect();
        println!("{name}: fails {failing:?}");
    }
    Ok(())
}
