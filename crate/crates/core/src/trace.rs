//! Trace output: JSON lines for machines, per-slot tables for people.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use crate::ring::{SlotRecord, StationSnapshot, Trace};

#[derive(Serialize)]
struct JsonRecord<'a> {
    slot: usize,
    emitter: usize,
    emitted: bool,
    stations: &'a [StationSnapshot],
}

/// One JSON object per slot: `slot`, `emitter`, `emitted`, then per station
/// `m`, `a`, `f`, `location`, in that order.
pub fn write_jsonl<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    for r in &trace.records {
        let rec = JsonRecord {
            slot: r.slot,
            emitter: r.emitter.0,
            emitted: r.emitted,
            stations: &r.stations,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_jsonl(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Caption of the table printed after a slot.
pub fn caption(r: &SlotRecord) -> String {
    let what = if r.emitted { "sent" } else { "silent" };
    format!("after slot {} (s_{} {what})", r.slot, r.emitter.0)
}

/// Table with columns `m[s_0] .. m[s_{N-1}] CAcc CFail`, one row per station.
pub fn render_table(title: &str, snaps: &[StationSnapshot]) -> String {
    let n = snaps.len();
    let headers: Vec<String> = (0..n).map(|i| format!("m[s_{i}]")).collect();
    let name_w = format!("s_{}", n - 1).len().max("station".len());
    let mut out = String::new();
    writeln!(out, "{title}").unwrap();
    write!(out, "{:<name_w$}", "station").unwrap();
    for h in &headers {
        write!(out, " {h}").unwrap();
    }
    writeln!(out, " {:>5} {:>5}", "CAcc", "CFail").unwrap();
    for (i, s) in snaps.iter().enumerate() {
        write!(out, "{:<name_w$}", format!("s_{i}")).unwrap();
        for (h, bit) in headers.iter().zip(s.m.chars()) {
            write!(out, " {bit:>w$}", w = h.len()).unwrap();
        }
        writeln!(out, " {:>5} {:>5}", s.a, s.f).unwrap();
    }
    out
}

/// Initial table followed by one table per slot, blank line between tables.
pub fn render_tables(trace: &Trace) -> String {
    let mut blocks = vec![render_table("initial", &trace.initial)];
    blocks.extend(trace.records.iter().map(|r| render_table(&caption(r), &r.stations)));
    blocks.join("\n")
}

/// Splits rendered tables back into `(caption, body)` blocks.
pub fn table_blocks(text: &str) -> Vec<(String, String)> {
    text.split("\n\n")
        .filter(|b| !b.trim().is_empty())
        .map(|b| {
            let b = b.trim_end_matches('\n');
            let (head, _) = b.split_once('\n').unwrap_or((b, ""));
            (head.to_string(), format!("{b}\n"))
        })
        .collect()
}
