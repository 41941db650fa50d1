//! Sweep every single-fault placement on small rings against the abstract model.

use ttp_clique::checker::{cross_check, SweepConfig};

fn main() -> ttp_clique::Result<()> {
    let cfg = SweepConfig::default();
    for (n, k) in [(3, 1), (4, 1), (5, 1), (6, 1), (4, 2)] {
        let rep = cross_check(n, k, &cfg)?;
        println!(
            "n={n} k={k}: {} runs, {} gates, {} steps, {} failures",
            rep.runs, rep.gates_checked, rep.transitions_checked, rep.failures
        );
        for f in rep.findings.iter().take(3) {
            println!("  {f}");
        }
    }
    Ok(())
}
