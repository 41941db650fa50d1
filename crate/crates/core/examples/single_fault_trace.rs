//! One asymmetric fault on a four-station ring, printed as per-slot tables.

use ttp_clique::ring::{check_stabilization, run};
use ttp_clique::trace::render_tables;
use ttp_clique::{FaultSpec, Scenario};

fn main() -> ttp_clique::Result<()> {
    // s_0's first frame is accepted by s_2 only.
    let sc = Scenario::new(4, 2).with_fault(FaultSpec::new(0, [2]));
    let ring = run(&sc)?;
    let trace = ring.trace().expect("traced");
    print!("{}", render_tables(trace));
    println!("{:?}", check_stabilization(trace)?);
    Ok(())
}
