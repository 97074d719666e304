//! Sweeps link count × SCM size over a template scenario and validates each
//! configuration.
//!
//! ```bash
//! cargo run --release --example config_sweep
//! ```

use std::path::Path;

use pels::scenario::Scenario;
use pels::sweep::{render_table, sweep};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/sweep.json");
    let template = Scenario::load(path).unwrap();
    let links: Vec<usize> = (1..=8).collect();
    let results = sweep(&template, &links, &[4, 6, 8]);
    print!("{}", render_table(&results));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} configurations passed", results.len() - failed, results.len());
}
