//! Writes a JSON Lines trace at each detail level, parses it back and checks
//! the digest recorded in the report.
//!
//! ```bash
//! cargo run --example trace_jsonl [out.jsonl]
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use pels::scenario::Scenario;
use pels::trace::{digest, emit_trace, parse_trace, TraceLevel};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/sequenced_action.json");
    let scenario = Scenario::load(path).unwrap();

    for level in [TraceLevel::Off, TraceLevel::Grants, TraceLevel::Full] {
        let report = scenario.run(level).unwrap();
        let mut bytes = Vec::new();
        emit_trace(&report.trace, &mut bytes).unwrap();
        let parsed = parse_trace(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(digest(&parsed), report.trace_digest);
        println!("{level:?}: {} records, sha256 {}", parsed.len(), report.trace_digest);
    }

    let report = scenario.run(TraceLevel::Full).unwrap();
    match std::env::args().nth(1) {
        Some(out) => {
            emit_trace(&report.trace, &mut BufWriter::new(File::create(&out).unwrap())).unwrap();
            println!("full trace written to {out}");
        }
        None => {
            println!("--- full trace ---");
            emit_trace(&report.trace, &mut std::io::stdout()).unwrap();
        }
    }
}
