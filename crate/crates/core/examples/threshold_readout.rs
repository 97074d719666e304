//! A sensor readout that drives an actuator only above a threshold, run once
//! on a link and once on the baseline core, with the memory-activity proxy
//! comparison at a shared 55 MHz clock.
//!
//! ```bash
//! cargo run --example threshold_readout
//! ```

use std::path::Path;

use pels::report::compare_at;
use pels::scenario::Scenario;
use pels::trace::TraceLevel;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let pels = Scenario::load(dir.join("threshold_pels.json")).unwrap();
    let baseline = Scenario::load(dir.join("threshold_baseline.json")).unwrap();
    assert_eq!(pels.stimulus_digest(), baseline.stimulus_digest());

    let a = pels.run(TraceLevel::Off).unwrap();
    let b = baseline.run(TraceLevel::Off).unwrap();
    let link = &a.links[0];
    println!(
        "link: {} readouts, {} actuations, latencies {:?}",
        link.completed, link.bus_writes, link.latencies
    );
    println!(
        "core: {} interrupts, {} shared fetches",
        b.baseline.as_ref().unwrap().handled,
        b.activity.shared_fetches
    );
    println!();
    println!("{}", compare_at(&a, &b, Some(55.0), Some(55.0)).unwrap());
}
