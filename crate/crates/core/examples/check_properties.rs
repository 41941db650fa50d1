//! Explore the counter automaton for a few ring sizes and print every verdict.

use ttp_clique::abstract_model::M6Config;
use ttp_clique::checker::{check_all, Constraint, DEFAULT_STATE_CAP};

fn main() -> ttp_clique::Result<()> {
    for n in 3..=8 {
        for c in [Constraint::Any, Constraint::Majority, Constraint::Tie] {
            let (graph, verdicts) = check_all(n, c, &M6Config::default(), DEFAULT_STATE_CAP)?;
            println!(
                "n={n} {c}: {} states, {} deadlocks",
                graph.nodes.len(),
                graph.deadlocks.len()
            );
            for v in verdicts {
                println!("  {}", v.report_line());
                if let Some(w) = v.witness.filter(|_| !v.holds) {
                    println!("{w}");
                }
            }
        }
    }
    Ok(())
}
