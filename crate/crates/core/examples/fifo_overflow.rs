//! A timer firing every cycle outruns a seven-cycle link program: the
//! four-deep trigger FIFO fills and newer events are dropped.
//!
//! ```bash
//! cargo run --example fifo_overflow
//! ```

use std::path::Path;

use pels::scenario::Scenario;
use pels::trace::{TraceLevel, TraceRecord};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/fifo_overflow.json");
    let mut scenario = Scenario::load(path).unwrap();
    for depth in [1, 4, 16] {
        scenario.links[0].fifo_depth = depth;
        let report = scenario.run(TraceLevel::Full).unwrap();
        let link = &report.links[0];
        let first_drop = report.trace.iter().find_map(|r| match r {
            TraceRecord::Trigger {
                cycle, accepted: false, ..
            } => Some(*cycle),
            _ => None,
        });
        println!(
            "depth {depth:>2}: accepted {:>3}, dropped {:>3}, first drop at {:?}, worst latency {:?}",
            link.triggers_accepted, link.triggers_dropped, first_drop, link.latency.max
        );
    }
}
