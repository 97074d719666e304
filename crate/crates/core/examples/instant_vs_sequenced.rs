//! Measures trigger-to-output latency for an instant action, a sequenced
//! register update, and the interrupt-driven baseline handling the same event.
//!
//! ```bash
//! cargo run --example instant_vs_sequenced
//! ```

use std::path::Path;

use pels::report::compare;
use pels::scenario::Scenario;
use pels::trace::TraceLevel;

fn run(name: &str) -> pels::report::SimReport {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    Scenario::load(path).unwrap().run(TraceLevel::Off).unwrap()
}

fn main() {
    let instant = run("instant_action.json");
    let sequenced = run("sequenced_action.json");
    let baseline = run("baseline_sequenced.json");

    println!("instant action   : {} cycles", instant.links[0].latencies[0]);
    println!("sequenced action : {} cycles", sequenced.links[0].latencies[0]);
    println!(
        "baseline core    : {} cycles",
        baseline.baseline.as_ref().unwrap().latencies[0]
    );
    println!();
    println!("{}", compare(&sequenced, &baseline).unwrap());
}
