//! Replay a two-fault run through the per-level counters and print each gate.

use ttp_clique::kfault::replay;
use ttp_clique::ring::run;
use ttp_clique::{FaultSpec, Scenario};

fn main() -> ttp_clique::Result<()> {
    let sc = Scenario::new(4, 3)
        .with_fault(FaultSpec::new(0, [2, 3]))
        .with_fault(FaultSpec::new(2, []));
    let trace = run(&sc)?.into_trace().expect("traced");
    let report = replay(&trace, trace.records.len(), |gate, _tree| match &gate.oracle {
        Ok((oracle, (a, f))) => println!(
            "slot {} {}: {:?} predicts ({a}, {f}), ring has {:?}",
            gate.slot, gate.station, oracle.clause, gate.actual
        ),
        Err(e) => println!("slot {} {}: {e:?}", gate.slot, gate.station),
    })?;
    println!(
        "checked {}, mismatches {}, counters {} (formula {})",
        report.checked,
        report.mismatches.len(),
        report.counters,
        report.expected_counters
    );
    Ok(())
}
