//! Parse a scenario from text, check its fault rate, and emit JSON lines.

use ttp_clique::ring::run;
use ttp_clique::trace::write_jsonl;
use ttp_clique::Scenario;

const TEXT: &str = "\
# two faults, less than a round apart
n = 5
rounds = 4
fault slot=1 accept=0,2,3
fault slot=3 accept=0,1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::parse(TEXT)?;
    println!("{:?}", sc.rate_report());
    let trace = run(&sc)?.into_trace().expect("traced");
    write_jsonl(&trace, std::io::stdout().lock())?;
    Ok(())
}
