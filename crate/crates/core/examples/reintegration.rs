//! A station that lost the gate rejoins by copying a live member's vector.

use ttp_clique::ring::run;
use ttp_clique::{FaultSpec, Scenario};

fn main() -> ttp_clique::Result<()> {
    let sc = Scenario::new(4, 6)
        .with_fault(FaultSpec::new(0, [2]))
        .with_integration(3, 8);
    let ring = run(&sc)?;
    for r in &ring.trace().expect("traced").records {
        for e in &r.events {
            println!("slot {:2}: {e:?}", r.slot);
        }
    }
    for s in &ring.stations {
        println!("{}: {} {:?}", s.id, s.m, s.location);
    }
    println!("single clique: {}", ring.is_single_clique());
    Ok(())
}
