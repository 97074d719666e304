//! One link's action drives a loopback line that triggers a second link, and
//! the output history shows the three-cycle hop.
//!
//! ```bash
//! cargo run --example inter_link_trigger
//! ```

use std::path::Path;

use pels::scenario::Scenario;
use pels::trace::{TraceLevel, TraceRecord};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/inter_link.json");
    let report = Scenario::load(path).unwrap().run(TraceLevel::Full).unwrap();
    for r in &report.trace {
        match r {
            TraceRecord::Trigger {
                cycle, link, accepted, ..
            } => {
                println!("cycle {cycle:>2}: link {link} triggered (accepted: {accepted})")
            }
            TraceRecord::Outputs { cycle, lines } => println!("cycle {cycle:>2}: outputs {lines}"),
            TraceRecord::Complete {
                cycle, link, latency, ..
            } => {
                println!("cycle {cycle:>2}: link {link} done after {latency} cycles")
            }
            _ => {}
        }
    }
}
