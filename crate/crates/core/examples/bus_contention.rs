//! Eight links hammer the shared bus; the round-robin arbiter grants each of
//! them once per eight transfers and no wait exceeds `(links − 1) · T`.
//!
//! ```bash
//! cargo run --example bus_contention
//! ```

use std::path::Path;

use pels::scenario::Scenario;
use pels::trace::{GrantStatus, TraceLevel, TraceRecord};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/bus_contention.json");
    let report = Scenario::load(path).unwrap().run(TraceLevel::Grants).unwrap();

    let order: Vec<String> = report
        .trace
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Bus {
                cycle,
                master,
                status: GrantStatus::Granted,
                ..
            } => Some(format!("{cycle}:L{master}")),
            _ => None,
        })
        .take(24)
        .collect();
    println!("first grants: {}", order.join(" "));
    println!();
    println!("master  writes  max.wait  wait histogram");
    for m in &report.bus.masters {
        println!(
            "{:>6}  {:>6}  {:>8}  {:?}",
            m.master, m.writes, m.max_wait, m.grant_waits
        );
    }
}
