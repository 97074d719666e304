//! Configuration sweeps over link count × SCM size with per-point validation.
//!
//! Each point replicates the template scenario's first link `n` times, sets
//! every link's SCM size, runs the scenario twice and checks:
//!
//! * the program fits the SCM,
//! * no simulation errors and the run reaches quiescence,
//! * FIFO conservation: accepted + dropped equals the trigger records, and every
//!   accepted token completed,
//! * bus consistency: per-link transfer counts equal the bus totals and grants on
//!   a segment never overlap,
//! * every grant wait is within `(L−1)·T`,
//! * both runs produce the same trace digest.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::SimReport;
use crate::scenario::{ConfigError, Scenario};
use crate::trace::{GrantStatus, TraceLevel, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub links: usize,
    pub scm_lines: usize,
    pub passed: bool,
    pub failures: Vec<String>,
    pub cycles: u64,
    pub completed: u64,
    pub triggers_dropped: u64,
    pub latency_mean: Option<f64>,
    pub latency_max: Option<u64>,
    pub max_grant_wait: u64,
    pub trace_digest: String,
}

impl SweepResult {
    fn failed(links: usize, scm_lines: usize, failure: String) -> Self {
        SweepResult {
            links,
            scm_lines,
            passed: false,
            failures: vec![failure],
            cycles: 0,
            completed: 0,
            triggers_dropped: 0,
            latency_mean: None,
            latency_max: None,
            max_grant_wait: 0,
            trace_digest: String::new(),
        }
    }
}

/// Parses `a..b` or `a..=b` (both inclusive) or a comma list.
pub fn parse_counts(spec: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid list `{spec}`, expected `a..b` or `a,b,c`");
    let spec = spec.trim();
    let counts: Vec<usize> = if let Some((a, b)) = spec.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if counts.is_empty() || counts.contains(&0) {
        return Err(format!("`{spec}` must list positive counts"));
    }
    Ok(counts)
}

/// The template scenario with its first link replicated `links` times.
pub fn variant(template: &Scenario, links: usize, scm_lines: usize) -> Result<Scenario, ConfigError> {
    let first = template
        .links
        .first()
        .ok_or_else(|| ConfigError::new(template.name.clone(), "sweep template needs at least one link"))?;
    let mut s = template.clone();
    s.name = format!("{}-l{links}-s{scm_lines}", template.name);
    s.links = vec![first.clone(); links];
    for l in &mut s.links {
        l.scm_lines = scm_lines;
    }
    s.expect = None;
    Ok(s)
}

fn check(report: &SimReport, links: usize, transfer: u64) -> Vec<String> {
    let mut failures = Vec::new();
    if report.has_errors() {
        failures.push(format!(
            "{} simulation error(s): {}",
            report.errors.len(),
            report.errors[0].message
        ));
    }
    if report.end != crate::trace::EndReason::Quiescent {
        failures.push("run hit the clock limit".into());
    }

    let mut triggers = vec![0u64; links];
    let mut grants: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for r in &report.trace {
        match r {
            TraceRecord::Trigger { link, .. } => triggers[*link] += 1,
            TraceRecord::Bus {
                cycle,
                segment,
                status: GrantStatus::Granted,
                ..
            } => grants.entry(*segment).or_default().push(*cycle),
            _ => {}
        }
    }
    for l in &report.links {
        if l.triggers_accepted + l.triggers_dropped != triggers[l.link] {
            failures.push(format!(
                "link {}: accepted {} + dropped {} != {} trigger records",
                l.link, l.triggers_accepted, l.triggers_dropped, triggers[l.link]
            ));
        }
        if l.completed + l.aborted != l.triggers_accepted {
            failures.push(format!(
                "link {}: {} accepted but {} finished",
                l.link,
                l.triggers_accepted,
                l.completed + l.aborted
            ));
        }
        if l.latencies.len() as u64 != l.completed {
            failures.push(format!("link {}: latency samples != completions", l.link));
        }
        let m = &report.bus.masters[l.link];
        if l.bus_reads != m.reads || l.bus_writes != m.writes {
            failures.push(format!("link {}: transfer counts disagree with the bus", l.link));
        }
    }
    for (segment, cycles) in &grants {
        if let Some(w) = cycles.windows(2).find(|w| w[1] - w[0] < transfer) {
            failures.push(format!("segment {segment}: grants at {} and {} overlap", w[0], w[1]));
        }
    }
    let bound = (links as u64 - 1) * transfer;
    for m in report.bus.masters.iter().take(links) {
        if m.max_wait > bound {
            failures.push(format!("link {}: grant wait {} above {bound}", m.master, m.max_wait));
        }
    }
    failures
}

/// Runs and validates one sweep point.
pub fn run_point(template: &Scenario, links: usize, scm_lines: usize) -> SweepResult {
    let scenario = match variant(template, links, scm_lines) {
        Ok(s) => s,
        Err(e) => return SweepResult::failed(links, scm_lines, e.to_string()),
    };
    let first = match scenario.run(TraceLevel::Full) {
        Ok(r) => r,
        Err(e) => return SweepResult::failed(links, scm_lines, e.to_string()),
    };
    let mut failures = check(&first, links, scenario.bus.transfer_cycles);
    match scenario.run(TraceLevel::Full) {
        Ok(again) if again.trace_digest == first.trace_digest => {}
        Ok(_) => failures.push("second run produced a different trace".into()),
        Err(e) => failures.push(e.to_string()),
    }
    let all = first.all_latencies();
    let summary = crate::report::LatencySummary::from_samples(&all);
    SweepResult {
        links,
        scm_lines,
        passed: failures.is_empty(),
        failures,
        cycles: first.cycles,
        completed: first.links.iter().map(|l| l.completed).sum(),
        triggers_dropped: first.links.iter().map(|l| l.triggers_dropped).sum(),
        latency_mean: summary.mean,
        latency_max: summary.max,
        max_grant_wait: first
            .bus
            .masters
            .iter()
            .take(links)
            .map(|m| m.max_wait)
            .max()
            .unwrap_or(0),
        trace_digest: first.trace_digest,
    }
}

/// Every (links, scm_lines) combination, evaluated in parallel, in grid order.
pub fn sweep(template: &Scenario, links: &[usize], scm_lines: &[usize]) -> Vec<SweepResult> {
    let grid: Vec<(usize, usize)> = links
        .iter()
        .flat_map(|&l| scm_lines.iter().map(move |&s| (l, s)))
        .collect();
    grid.par_iter().map(|&(l, s)| run_point(template, l, s)).collect()
}

/// Fixed-width table of sweep results.
pub fn render_table(results: &[SweepResult]) -> String {
    let mut out = String::from("links  scm  result  cycles  completed  dropped  lat.mean  lat.max  max.wait\n");
    for r in results {
        out.push_str(&format!(
            "{:>5}  {:>3}  {:<6}  {:>6}  {:>9}  {:>7}  {:>8}  {:>7}  {:>8}\n",
            r.links,
            r.scm_lines,
            if r.passed { "pass" } else { "FAIL" },
            r.cycles,
            r.completed,
            r.triggers_dropped,
            r.latency_mean.map_or("-".into(), |m| format!("{m:.2}")),
            r.latency_max.map_or("-".into(), |m| m.to_string()),
            r.max_grant_wait,
        ));
        for f in &r.failures {
            out.push_str(&format!("         - {f}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEMPLATE: &str = r#"{
        "name": "grid",
        "peripherals": [{ "name": "gpio", "type": "gpio", "base": "0x1000" }],
        "links": [{ "mask": [0], "base": "0x1000", "program": "set 0, 1\nclear 0, 1" }],
        "stimuli": [{ "cycle": 0, "line": 0, "pulse": true }, { "cycle": 40, "line": 0, "pulse": true }]
    }"#;

    #[test]
    fn counts_parse() {
        assert_eq!(parse_counts("1..8").unwrap(), (1..=8).collect::<Vec<_>>());
        assert_eq!(parse_counts("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_counts("4,6,8").unwrap(), vec![4, 6, 8]);
        assert!(parse_counts("8..1").is_err());
        assert!(parse_counts("0,4").is_err());
        assert!(parse_counts("x").is_err());
    }

    #[test]
    fn small_grid_passes() {
        let t = Scenario::from_json(TEMPLATE, "t").unwrap();
        let results = sweep(&t, &[1, 2, 3], &[4, 6]);
        assert_eq!(results.len(), 6);
        assert!(results.iter().all(|r| r.passed), "{}", render_table(&results));
        assert_eq!(results[0].latency_max, Some(13));
        // three links contend: the last one waits for two full RMWs' worth of slots
        assert!(results[4].max_grant_wait <= 4);
    }

    #[test]
    fn oversized_program_fails_its_point() {
        let t = Scenario::from_json(
            &TEMPLATE.replace("set 0, 1\\nclear 0, 1", "wait 1\\nwait 1\\nwait 1\\nwait 1\\nwait 1"),
            "t",
        )
        .unwrap();
        let results = sweep(&t, &[1], &[4, 6]);
        assert!(!results[0].passed);
        assert!(
            results[0].failures[0].contains("does not fit"),
            "{:?}",
            results[0].failures
        );
        assert!(results[1].passed);
    }
}
