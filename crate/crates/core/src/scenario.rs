//! JSON scenario files: declaration, loading, validation and expectations.
//!
//! ```json
//! {
//!   "name": "sequenced",
//!   "clock_limit": 1000,
//!   "fabric": { "inputs": 8, "outputs": 32, "loopback": [{ "output": 1, "input": 5 }] },
//!   "bus": { "segments": 1, "transfer_cycles": 2 },
//!   "peripherals": [
//!     { "name": "gpio", "type": "gpio", "base": "0x1A10_1000" },
//!     { "name": "tick", "type": "timer", "base": "0x1A10_2000", "period": 10,
//!       "event_line": 1, "enabled_at": 0, "until": 100 }
//!   ],
//!   "links": [
//!     { "scm_lines": 4, "mask": [0], "mode": "any", "base": "0x1A10_1000",
//!       "program": "set 0, 0x1" }
//!   ],
//!   "stimuli": [{ "cycle": 0, "line": 0, "level": true }],
//!   "expect": { "links": [{ "link": 0, "latency": 7 }] }
//! }
//! ```
//!
//! Programs are inline source text or `{ "file": "prog.pels" }`, resolved
//! relative to the scenario file. Addresses are numbers or `"0x…"` strings.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::asm::{assemble_str, parse_literal, Location, Program};
use crate::fabric::LineSet;
use crate::link::{LinkConfig, TriggerMode, DEFAULT_FIFO_DEPTH};
use crate::periph::{
    BaselineCpuModel, Device, Gpio, RegisterBlock, Scratch, Sensor, SensorMode, SensorSchedule, Timer,
};
use crate::report::SimReport;
use crate::sim::{simulate, BaselineSpec, LinkSpec, SimConfig, Stimulus, DEFAULT_CLOCK_LIMIT};
use crate::trace::TraceLevel;

/// Invalid scenario, with the place it was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn address<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(u64),
        Text(String),
    }
    let value = match Raw::deserialize(d)? {
        Raw::Num(n) => n,
        Raw::Text(s) => {
            parse_literal(s.trim(), Location::new(1, 1))
                .map_err(|_| serde::de::Error::custom(format!("invalid address `{s}`")))?
                .value
        }
    };
    u32::try_from(value).map_err(|_| serde::de::Error::custom(format!("address {value:#x} exceeds 32 bits")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProgramSource {
    Inline(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopbackDecl {
    pub output: usize,
    pub input: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FabricDecl {
    pub inputs: usize,
    pub outputs: usize,
    pub loopback: Vec<LoopbackDecl>,
}

impl Default for FabricDecl {
    fn default() -> Self {
        FabricDecl {
            inputs: 8,
            outputs: 32,
            loopback: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusDecl {
    pub segments: usize,
    pub transfer_cycles: u64,
}

impl Default for BusDecl {
    fn default() -> Self {
        BusDecl {
            segments: 1,
            transfer_cycles: crate::bus::DEFAULT_TRANSFER_CYCLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSchedule {
    pub seed: u64,
    pub samples: usize,
    pub spacing: u64,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SensorModeDecl {
    #[default]
    Continuous,
    Triggered {
        #[serde(default)]
        start_line: Option<usize>,
        conversion_cycles: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DeviceDecl {
    Gpio {
        #[serde(default)]
        out: u32,
    },
    Timer {
        period: u32,
        #[serde(default)]
        event_line: Option<usize>,
        /// Cycle at which counting is enabled; absent means disabled until CTRL is written.
        #[serde(default)]
        enabled_at: Option<u64>,
        /// Last cycle on which the timer may pulse.
        #[serde(default)]
        until: Option<u64>,
    },
    Sensor {
        #[serde(default)]
        schedule: Vec<(u64, u32)>,
        #[serde(default)]
        random: Option<RandomSchedule>,
        #[serde(default)]
        mode: SensorModeDecl,
        #[serde(default)]
        event_line: Option<usize>,
    },
    Scratch {
        words: u32,
        #[serde(default)]
        init: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeripheralDecl {
    pub name: String,
    #[serde(deserialize_with = "address")]
    pub base: u32,
    #[serde(default)]
    pub segment: usize,
    #[serde(flatten)]
    pub device: DeviceDecl,
}

impl PeripheralDecl {
    pub fn build(&self) -> Result<RegisterBlock, String> {
        let device = match &self.device {
            DeviceDecl::Gpio { out } => Device::Gpio(Gpio { pins: *out }),
            DeviceDecl::Timer {
                period,
                event_line,
                enabled_at,
                until,
            } => {
                let mut t = Timer::new(*period, *event_line);
                t.until = *until;
                if let Some(at) = enabled_at {
                    t.enable_at(*at);
                }
                Device::Timer(t)
            }
            DeviceDecl::Sensor {
                schedule,
                random,
                mode,
                event_line,
            } => {
                let schedule = match (random, schedule.is_empty()) {
                    (Some(_), false) => return Err("give either `schedule` or `random`, not both".into()),
                    (Some(r), true) => SensorSchedule::random(r.seed, r.samples, r.spacing, r.max),
                    (None, _) => SensorSchedule::new(schedule.clone()),
                };
                let mode = match *mode {
                    SensorModeDecl::Continuous => SensorMode::Continuous,
                    SensorModeDecl::Triggered {
                        start_line,
                        conversion_cycles,
                    } => SensorMode::Triggered {
                        start_line,
                        conversion_cycles,
                    },
                };
                Device::Sensor(Sensor::new(schedule, mode, *event_line))
            }
            DeviceDecl::Scratch { words, init } => {
                if init.len() > *words as usize {
                    return Err(format!("{} initial values for {} words", init.len(), words));
                }
                let mut s = Scratch::new(*words);
                s.words[..init.len()].copy_from_slice(init);
                Device::Scratch(s)
            }
        };
        Ok(RegisterBlock::new(self.name.clone(), self.base, device).on_segment(self.segment))
    }
}

fn yes() -> bool {
    true
}

fn default_scm_lines() -> usize {
    8
}

fn default_fifo_depth() -> usize {
    DEFAULT_FIFO_DEPTH
}

fn default_clock_limit() -> u64 {
    DEFAULT_CLOCK_LIMIT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDecl {
    #[serde(default = "default_scm_lines")]
    pub scm_lines: usize,
    pub mask: Vec<usize>,
    #[serde(default)]
    pub mode: TriggerMode,
    #[serde(deserialize_with = "address")]
    pub base: u32,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_fifo_depth")]
    pub fifo_depth: usize,
    #[serde(default)]
    pub segment: usize,
    pub program: ProgramSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineDecl {
    pub irq_lines: Vec<usize>,
    #[serde(deserialize_with = "address")]
    pub base: u32,
    pub handler: ProgramSource,
    #[serde(default)]
    pub interrupt_entry_cycles: Option<u32>,
    #[serde(default)]
    pub handler_cycles: Option<u32>,
    #[serde(default)]
    pub memory_fetches_per_handler: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusDecl {
    pub cycle: u64,
    pub line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<bool>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pulse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkExpect {
    pub link: usize,
    /// Every latency sample equals this.
    #[serde(default)]
    pub latency: Option<u64>,
    #[serde(default)]
    pub latency_max: Option<u64>,
    #[serde(default)]
    pub completed: Option<u64>,
    #[serde(default)]
    pub dropped_min: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineExpect {
    #[serde(default)]
    pub latency: Option<u64>,
    #[serde(default)]
    pub handled: Option<u64>,
}

/// Assertions checked by `pels run --check`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expect {
    pub links: Vec<LinkExpect>,
    pub baseline: Option<BaselineExpect>,
    /// Require no simulation errors.
    pub no_errors: bool,
    pub quiescent: bool,
}

impl Expect {
    /// Failed expectations, empty when all hold.
    pub fn check(&self, report: &SimReport) -> Vec<String> {
        let mut failures = Vec::new();
        for e in &self.links {
            let Some(l) = report.links.get(e.link) else {
                failures.push(format!("link {} does not exist", e.link));
                continue;
            };
            if let Some(want) = e.latency {
                if l.latencies.is_empty() || l.latencies.iter().any(|&x| x != want) {
                    failures.push(format!(
                        "link {}: latency {:?}, expected all {want}",
                        e.link, l.latencies
                    ));
                }
            }
            if let Some(max) = e.latency_max {
                if l.latency.max.is_some_and(|m| m > max) {
                    failures.push(format!("link {}: max latency {:?} above {max}", e.link, l.latency.max));
                }
            }
            if let Some(n) = e.completed {
                if l.completed != n {
                    failures.push(format!("link {}: {} completed, expected {n}", e.link, l.completed));
                }
            }
            if let Some(n) = e.dropped_min {
                if l.triggers_dropped < n {
                    failures.push(format!(
                        "link {}: {} dropped, expected at least {n}",
                        e.link, l.triggers_dropped
                    ));
                }
            }
        }
        if let Some(e) = &self.baseline {
            match &report.baseline {
                None => failures.push("scenario has no baseline core".into()),
                Some(b) => {
                    if let Some(want) = e.latency {
                        if b.latencies.is_empty() || b.latencies.iter().any(|&x| x != want) {
                            failures.push(format!("baseline: latency {:?}, expected all {want}", b.latencies));
                        }
                    }
                    if let Some(n) = e.handled {
                        if b.handled != n {
                            failures.push(format!("baseline: {} handled, expected {n}", b.handled));
                        }
                    }
                }
            }
        }
        if self.no_errors && report.has_errors() {
            failures.push(format!("{} simulation error(s) recorded", report.errors.len()));
        }
        if self.quiescent && report.end != crate::trace::EndReason::Quiescent {
            failures.push("run hit the clock limit".into());
        }
        failures
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_clock_limit")]
    pub clock_limit: u64,
    #[serde(default)]
    pub fabric: FabricDecl,
    #[serde(default)]
    pub bus: BusDecl,
    #[serde(default)]
    pub peripherals: Vec<PeripheralDecl>,
    #[serde(default)]
    pub links: Vec<LinkDecl>,
    #[serde(default)]
    pub baseline: Option<BaselineDecl>,
    #[serde(default)]
    pub stimuli: Vec<StimulusDecl>,
    #[serde(default)]
    pub expect: Option<Expect>,
    /// File the scenario came from; program files resolve against its directory.
    #[serde(skip)]
    pub origin: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        let mut s = Scenario::from_json(&text, &path.display().to_string())?;
        s.origin = Some(path.to_path_buf());
        Ok(s)
    }

    /// Parses scenario JSON; `origin` names the source in diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text)
            .map_err(|e| ConfigError::new(format!("{origin}:{}:{}", e.line(), e.column()), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialize")
    }

    fn origin_name(&self) -> String {
        self.origin
            .as_ref()
            .map_or_else(|| format!("scenario `{}`", self.name), |p| p.display().to_string())
    }

    fn base_dir(&self) -> PathBuf {
        self.origin
            .as_ref()
            .and_then(|p| p.parent())
            .map(Path::to_path_buf)
            .unwrap_or_default()
    }

    fn program(&self, src: &ProgramSource, at: &str) -> Result<Program, ConfigError> {
        let (text, location) = match src {
            ProgramSource::Inline(text) => (text.clone(), format!("{}: {at}", self.origin_name())),
            ProgramSource::File { file } => {
                let path = self.base_dir().join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    ConfigError::new(
                        format!("{}: {at}", self.origin_name()),
                        format!("{}: {e}", path.display()),
                    )
                })?;
                (text, path.display().to_string())
            }
        };
        assemble_str(&text).map_err(|e| ConfigError::new(location, e.to_string()))
    }

    /// SHA-256 over the stimuli and peripheral declarations.
    pub fn stimulus_digest(&self) -> String {
        let identity = serde_json::json!({
            "peripherals": self.peripherals,
            "stimuli": self.stimuli,
        });
        hex::encode(Sha256::digest(identity.to_string().as_bytes()))
    }

    /// Validates the scenario and lowers it to a simulator configuration.
    pub fn build(&self, trace_level: TraceLevel) -> Result<SimConfig, ConfigError> {
        let origin = self.origin_name();
        let at = |what: String| format!("{origin}: {what}");

        let mut peripherals = Vec::with_capacity(self.peripherals.len());
        for (i, p) in self.peripherals.iter().enumerate() {
            peripherals.push(
                p.build()
                    .map_err(|m| ConfigError::new(at(format!("peripherals[{i}]")), m))?,
            );
        }

        let mut links = Vec::with_capacity(self.links.len());
        for (i, l) in self.links.iter().enumerate() {
            if let Some(&line) = l.mask.iter().find(|&&line| line >= crate::fabric::MAX_LINES) {
                return Err(ConfigError::new(
                    at(format!("links[{i}].mask")),
                    format!("line {line} out of range"),
                ));
            }
            links.push(LinkSpec {
                config: LinkConfig {
                    event_mask: LineSet::from_lines(l.mask.iter().copied()),
                    trigger_mode: l.mode,
                    base_address: l.base,
                    enabled: l.enabled,
                    fifo_depth: l.fifo_depth,
                },
                scm_lines: l.scm_lines,
                program: self.program(&l.program, &format!("links[{i}].program"))?,
                segment: l.segment,
            });
        }

        let baseline = match &self.baseline {
            None => None,
            Some(b) => {
                if let Some(&line) = b.irq_lines.iter().find(|&&line| line >= crate::fabric::MAX_LINES) {
                    return Err(ConfigError::new(
                        at("baseline.irq_lines".into()),
                        format!("line {line} out of range"),
                    ));
                }
                let d = BaselineCpuModel::default();
                Some(BaselineSpec {
                    model: BaselineCpuModel {
                        interrupt_entry_cycles: b.interrupt_entry_cycles.unwrap_or(d.interrupt_entry_cycles),
                        handler_cycles: b.handler_cycles.unwrap_or(d.handler_cycles),
                        memory_fetches_per_handler: b
                            .memory_fetches_per_handler
                            .unwrap_or(d.memory_fetches_per_handler),
                    },
                    irq_lines: LineSet::from_lines(b.irq_lines.iter().copied()),
                    base_address: b.base,
                    handler: self.program(&b.handler, "baseline.handler")?,
                })
            }
        };

        let mut stimuli = Vec::with_capacity(self.stimuli.len());
        for (i, s) in self.stimuli.iter().enumerate() {
            stimuli.push(match (s.level, s.pulse) {
                (Some(level), false) => Stimulus::level(s.cycle, s.line, level),
                (None, true) => Stimulus::pulse(s.cycle, s.line),
                _ => {
                    return Err(ConfigError::new(
                        at(format!("stimuli[{i}]")),
                        "give exactly one of `level` or `pulse: true`",
                    ))
                }
            });
        }

        Ok(SimConfig {
            name: self.name.clone(),
            clock_limit: self.clock_limit,
            input_width: self.fabric.inputs,
            output_width: self.fabric.outputs,
            loopback: self.fabric.loopback.iter().map(|l| (l.output, l.input)).collect(),
            segments: self.bus.segments,
            transfer_cycles: self.bus.transfer_cycles,
            peripherals,
            links,
            baseline,
            stimuli,
            trace_level,
            stimulus_digest: Some(self.stimulus_digest()),
        })
    }

    /// Builds and runs the scenario.
    pub fn run(&self, trace_level: TraceLevel) -> Result<SimReport, ConfigError> {
        let cfg = self.build(trace_level)?;
        simulate(cfg).map_err(|e| ConfigError::new(self.origin_name(), e.to_string()))
    }
}
