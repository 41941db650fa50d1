//! A second fault inside the first round of the first: three classes, then one survivor.

use ttp_clique::ring::{run, PartitionMap};
use ttp_clique::{FaultSpec, Scenario};

fn main() -> ttp_clique::Result<()> {
    let sc = Scenario::new(4, 3)
        .with_fault(FaultSpec::new(0, [2, 3]))
        .with_fault(FaultSpec::new(2, []));
    let ring = run(&sc)?;
    let trace = ring.trace().expect("traced");
    for t in [1, 3, 4, sc.horizon()] {
        println!(
            "after {t} slots: {:?}",
            PartitionMap::from_snapshots(trace.after(t)).classes
        );
    }
    let active: Vec<_> = ring.active().map(|s| s.id).collect();
    println!("active at the end: {active:?}");
    Ok(())
}
