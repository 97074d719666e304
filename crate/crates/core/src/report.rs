//! Run reports and the cycle/activity comparison between two runs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{EndReason, TraceRecord};

pub const REPORT_VERSION: u32 = 1;

/// Label carried by every activity block so it is not mistaken for a power figure.
pub const POWER_PROXY_LABEL: &str = "power proxy: activity counts only; power is not simulated";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub samples: usize,
    pub min: Option<u64>,
    pub max: Option<u64>,
    pub mean: Option<f64>,
    /// max − min.
    pub jitter: Option<u64>,
}

impl LatencySummary {
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return LatencySummary::default();
        }
        let min = *samples.iter().min().unwrap();
        let max = *samples.iter().max().unwrap();
        let mean = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
        LatencySummary {
            samples: samples.len(),
            min: Some(min),
            max: Some(max),
            mean: Some(mean),
            jitter: Some(max - min),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub link: usize,
    pub latency: LatencySummary,
    pub latencies: Vec<u64>,
    pub triggers_accepted: u64,
    pub triggers_dropped: u64,
    pub completed: u64,
    pub aborted: u64,
    pub commands_executed: u64,
    pub scm_fetches: u64,
    pub bus_reads: u64,
    pub bus_writes: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub master: usize,
    pub latency: LatencySummary,
    pub latencies: Vec<u64>,
    pub interrupts: u64,
    pub handled: u64,
    pub shared_fetches: u64,
    pub bus_reads: u64,
    pub bus_writes: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MasterReport {
    pub master: usize,
    pub name: String,
    pub reads: u64,
    pub writes: u64,
    pub errors: u64,
    /// Grant wait in cycles → number of transfers.
    pub grant_waits: BTreeMap<u64, u64>,
    pub max_wait: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BusReport {
    pub segments: usize,
    pub transfer_cycles: u64,
    pub masters: Vec<MasterReport>,
}

impl BusReport {
    pub fn transactions(&self) -> u64 {
        self.masters.iter().map(|m| m.reads + m.writes).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityReport {
    pub label: String,
    /// Instruction fetches from shared memory by the baseline core.
    pub shared_fetches: u64,
    /// Fetches from the links' private SCMs.
    pub scm_fetches: u64,
    pub bus_transactions: u64,
    /// Shared-memory fetches plus interconnect transfers.
    pub memory_activity: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimErrorRecord {
    pub cycle: u64,
    pub source: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub version: u32,
    pub scenario: String,
    /// SHA-256 over the stimuli and peripheral declarations.
    pub stimulus_digest: String,
    pub cycles: u64,
    pub end: EndReason,
    pub links: Vec<LinkReport>,
    pub baseline: Option<BaselineReport>,
    pub bus: BusReport,
    pub activity: ActivityReport,
    pub errors: Vec<SimErrorRecord>,
    pub trace_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

impl SimReport {
    /// Every latency sample of the run: all links, then the baseline core.
    pub fn all_latencies(&self) -> Vec<u64> {
        let mut all: Vec<u64> = self.links.iter().flat_map(|l| l.latencies.iter().copied()).collect();
        if let Some(b) = &self.baseline {
            all.extend(&b.latencies);
        }
        all
    }

    /// Mean over every latency sample.
    pub fn headline_latency(&self) -> Option<f64> {
        LatencySummary::from_samples(&self.all_latencies()).mean
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Copy without the in-memory trace.
    pub fn without_trace(&self) -> SimReport {
        SimReport {
            trace: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("reports come from different stimuli ({a} vs {b})")]
    MismatchedStimulus { a: String, b: String },
}

/// One side of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSide {
    pub scenario: String,
    pub latency_cycles: Option<f64>,
    pub frequency_mhz: Option<f64>,
    pub latency_ns: Option<f64>,
    pub shared_fetches: u64,
    pub bus_transactions: u64,
    pub memory_activity: u64,
}

/// `baseline / pels` ratios. `None` means the denominator is zero while the
/// numerator is not (unbounded ratio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub pels: CompareSide,
    pub baseline: CompareSide,
    pub latency_ratio: Option<f64>,
    pub bus_transaction_ratio: Option<f64>,
    pub shared_fetch_ratio: Option<f64>,
    pub memory_activity_ratio: Option<f64>,
    pub power: String,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if num == den {
        Some(1.0)
    } else if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

fn side(r: &SimReport, frequency_mhz: Option<f64>) -> CompareSide {
    let latency = r.headline_latency();
    CompareSide {
        scenario: r.scenario.clone(),
        latency_cycles: latency,
        frequency_mhz,
        latency_ns: latency.zip(frequency_mhz).map(|(l, f)| l * 1000.0 / f),
        shared_fetches: r.activity.shared_fetches,
        bus_transactions: r.activity.bus_transactions,
        memory_activity: r.activity.memory_activity,
    }
}

/// Compares a PELS run with a baseline run of the same stimulus.
pub fn compare(pels: &SimReport, baseline: &SimReport) -> Result<Comparison, CompareError> {
    compare_at(pels, baseline, None, None)
}

/// [`compare`] with clock-frequency annotations, in MHz, for each side.
pub fn compare_at(
    pels: &SimReport,
    baseline: &SimReport,
    pels_mhz: Option<f64>,
    baseline_mhz: Option<f64>,
) -> Result<Comparison, CompareError> {
    if pels.stimulus_digest != baseline.stimulus_digest {
        return Err(CompareError::MismatchedStimulus {
            a: pels.stimulus_digest.clone(),
            b: baseline.stimulus_digest.clone(),
        });
    }
    let p = side(pels, pels_mhz);
    let b = side(baseline, baseline_mhz);
    let latency_ratio = match (b.latency_cycles, p.latency_cycles) {
        (Some(bl), Some(pl)) => ratio(bl, pl),
        _ => None,
    };
    Ok(Comparison {
        latency_ratio,
        bus_transaction_ratio: ratio(b.bus_transactions as f64, p.bus_transactions as f64),
        shared_fetch_ratio: ratio(b.shared_fetches as f64, p.shared_fetches as f64),
        memory_activity_ratio: ratio(b.memory_activity as f64, p.memory_activity as f64),
        pels: p,
        baseline: b,
        power: "not simulated".into(),
    })
}

fn show_ratio(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.2}x"),
        None => "unbounded".into(),
    }
}

fn show_opt(v: Option<f64>, unit: &str) -> String {
    match v {
        Some(v) => format!("{v:.2} {unit}"),
        None => "-".into(),
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>16} {:>16}", "", "pels", "baseline")?;
        writeln!(
            f,
            "{:<22} {:>16} {:>16}",
            "scenario", self.pels.scenario, self.baseline.scenario
        )?;
        writeln!(
            f,
            "{:<22} {:>16} {:>16}",
            "latency",
            show_opt(self.pels.latency_cycles, "cyc"),
            show_opt(self.baseline.latency_cycles, "cyc")
        )?;
        if self.pels.latency_ns.is_some() || self.baseline.latency_ns.is_some() {
            writeln!(
                f,
                "{:<22} {:>16} {:>16}",
                "latency @ clock",
                show_opt(self.pels.latency_ns, "ns"),
                show_opt(self.baseline.latency_ns, "ns")
            )?;
        }
        writeln!(
            f,
            "{:<22} {:>16} {:>16}",
            "shared fetches", self.pels.shared_fetches, self.baseline.shared_fetches
        )?;
        writeln!(
            f,
            "{:<22} {:>16} {:>16}",
            "bus transactions", self.pels.bus_transactions, self.baseline.bus_transactions
        )?;
        writeln!(
            f,
            "{:<22} {:>16} {:>16}",
            "memory activity", self.pels.memory_activity, self.baseline.memory_activity
        )?;
        writeln!(f, "latency ratio          {}", show_ratio(self.latency_ratio))?;
        writeln!(f, "bus transaction ratio  {}", show_ratio(self.bus_transaction_ratio))?;
        writeln!(f, "shared fetch ratio     {}", show_ratio(self.shared_fetch_ratio))?;
        writeln!(
            f,
            "memory activity ratio  {}  ({POWER_PROXY_LABEL})",
            show_ratio(self.memory_activity_ratio)
        )?;
        write!(f, "power                  {}", self.power)
    }
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = match self.end {
            EndReason::Quiescent => "quiescent",
            EndReason::ClockLimit => "clock limit",
        };
        writeln!(f, "scenario {}: {} cycles ({end})", self.scenario, self.cycles)?;
        for l in &self.links {
            writeln!(
                f,
                "  link {}: latency min {} max {} mean {} over {} run(s); accepted {} dropped {}; bus r/w {}/{}{}",
                l.link,
                opt(l.latency.min),
                opt(l.latency.max),
                l.latency.mean.map_or("-".into(), |m| format!("{m:.2}")),
                l.latency.samples,
                l.triggers_accepted,
                l.triggers_dropped,
                l.bus_reads,
                l.bus_writes,
                l.error.as_ref().map_or(String::new(), |e| format!("; error: {e}")),
            )?;
        }
        if let Some(b) = &self.baseline {
            writeln!(
                f,
                "  baseline: latency min {} max {} over {} event(s); shared fetches {}{}",
                opt(b.latency.min),
                opt(b.latency.max),
                b.latency.samples,
                b.shared_fetches,
                b.error.as_ref().map_or(String::new(), |e| format!("; error: {e}")),
            )?;
        }
        writeln!(
            f,
            "  activity ({}): shared fetches {}, scm fetches {}, bus transactions {}",
            self.activity.label,
            self.activity.shared_fetches,
            self.activity.scm_fetches,
            self.activity.bus_transactions
        )?;
        for e in &self.errors {
            writeln!(f, "  error at cycle {} in {}: {}", e.cycle, e.source, e.message)?;
        }
        write!(f, "  trace sha256 {}", self.trace_digest)
    }
}

fn opt(v: Option<u64>) -> String {
    v.map_or("-".into(), |v| v.to_string())
}
