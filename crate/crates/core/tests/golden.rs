use std::path::PathBuf;

use ttp_clique::ring::{check_stabilization, run, SlotEvent};
use ttp_clique::trace::{render_tables, table_blocks, to_jsonl};
use ttp_clique::{Scenario, StationId};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn assert_tables(scenario: &str, tables: &str) {
    let ring = run(&Scenario::load(&fixture(scenario)).unwrap()).unwrap();
    let rendered = table_blocks(&render_tables(ring.trace().unwrap()));
    let expected = table_blocks(&std::fs::read_to_string(fixture(tables)).unwrap());
    assert!(!expected.is_empty());
    for (caption, body) in &expected {
        let got = rendered
            .iter()
            .find(|(c, _)| c == caption)
            .unwrap_or_else(|| panic!("no table captioned {caption:?}"));
        assert_eq!(&got.1, body, "table {caption:?}");
    }
    assert!(ring.violations.is_empty(), "{:?}", ring.violations);
}

#[test]
fn single_fault_tables() {
    assert_tables("single_fault.scn", "single_fault_tables.txt");
}

#[test]
fn two_fault_tables() {
    assert_tables("two_faults.scn", "two_faults_tables.txt");
}

#[test]
fn jsonl_has_one_line_per_slot() {
    let sc = Scenario::load(&fixture("two_faults.scn")).unwrap();
    let trace = run(&sc).unwrap().into_trace().unwrap();
    let text = to_jsonl(&trace);
    assert_eq!(text.lines().count(), sc.horizon());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("slot").is_some() && v.get("stations").is_some(), "{line}");
    }
}

#[test]
fn departed_station_rejoins() {
    let ring = run(&Scenario::load(&fixture("reintegration.scn")).unwrap()).unwrap();
    let trace = ring.trace().unwrap();
    let events: Vec<&SlotEvent> = trace.records.iter().flat_map(|r| &r.events).collect();
    assert!(events.contains(&&SlotEvent::GateFailed(StationId(3))));
    assert!(events.contains(&&SlotEvent::Reintegrated(StationId(3))));
    assert!(ring.is_single_clique());
    assert_eq!(ring.active().count(), 3);
    assert!(check_stabilization(trace).unwrap().stabilized);
}
