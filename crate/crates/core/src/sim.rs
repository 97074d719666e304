//! The global clock: steps stimuli, peripherals, links, the baseline core and
//! the bus in a fixed order every cycle.
//!
//! Order within cycle `c`:
//!
//! 1. the fabric registers last cycle's outputs onto loopback inputs and clears pulses;
//! 2. stimuli scheduled for `c` are applied;
//! 3. peripherals tick and may pulse input lines;
//! 4. links step in index order (FSM, then trigger sampling);
//! 5. the baseline core steps;
//! 6. the bus retires finished transfers, routing them back to their links, then grants.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asm::Program;
use crate::bus::{Bus, BusError, BusEvent, DEFAULT_TRANSFER_CYCLES};
use crate::fabric::{EventFabric, FabricError, LineSet};
use crate::isa::OpCode;
use crate::link::{FsmState, LinkConfig, LinkError, LinkEvent, LinkState};
use crate::periph::{BaselineCpuModel, BaselineEvent, BaselineState, PeriphError, PeripheralMap, RegisterBlock};
use crate::report::{
    ActivityReport, BaselineReport, BusReport, LatencySummary, LinkReport, MasterReport, SimErrorRecord, SimReport,
    POWER_PROXY_LABEL, REPORT_VERSION,
};
use crate::trace::{digest, hex32, EndReason, GrantStatus, TraceLevel, TraceRecord, TRACE_FORMAT, TRACE_VERSION};

pub const DEFAULT_CLOCK_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusAction {
    /// Hold the line at a level from this cycle on.
    Level(bool),
    /// Assert the line for this cycle only.
    Pulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stimulus {
    pub cycle: u64,
    pub line: usize,
    pub action: StimulusAction,
}

impl Stimulus {
    pub fn level(cycle: u64, line: usize, level: bool) -> Self {
        Stimulus {
            cycle,
            line,
            action: StimulusAction::Level(level),
        }
    }

    pub fn pulse(cycle: u64, line: usize) -> Self {
        Stimulus {
            cycle,
            line,
            action: StimulusAction::Pulse,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub config: LinkConfig,
    pub scm_lines: usize,
    pub program: Program,
    pub segment: usize,
}

#[derive(Debug, Clone)]
pub struct BaselineSpec {
    pub model: BaselineCpuModel,
    pub irq_lines: LineSet,
    pub base_address: u32,
    pub handler: Program,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub name: String,
    pub clock_limit: u64,
    pub input_width: usize,
    pub output_width: usize,
    /// (output line, input line) pairs.
    pub loopback: Vec<(usize, usize)>,
    pub segments: usize,
    pub transfer_cycles: u64,
    pub peripherals: Vec<RegisterBlock>,
    pub links: Vec<LinkSpec>,
    pub baseline: Option<BaselineSpec>,
    pub stimuli: Vec<Stimulus>,
    pub trace_level: TraceLevel,
    /// Identity of the stimulus for comparisons; derived from stimuli and
    /// peripherals when absent.
    pub stimulus_digest: Option<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            name: "unnamed".into(),
            clock_limit: DEFAULT_CLOCK_LIMIT,
            input_width: 8,
            output_width: 32,
            loopback: Vec::new(),
            segments: 1,
            transfer_cycles: DEFAULT_TRANSFER_CYCLES,
            peripherals: Vec::new(),
            links: Vec::new(),
            baseline: None,
            stimuli: Vec::new(),
            trace_level: TraceLevel::Full,
            stimulus_digest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("fabric: {0}")]
    Fabric(#[from] FabricError),
    #[error("bus: {0}")]
    Bus(#[from] BusError),
    #[error("peripherals: {0}")]
    Periph(#[from] PeriphError),
    #[error("link {link}: {error}")]
    Link { link: usize, error: LinkError },
    #[error("link {link}: event mask uses line {line}, only {width} input lines exist")]
    MaskWidth { link: usize, line: usize, width: usize },
    #[error("{owner}: action at index {index} drives group {group}, only {groups} output group(s) exist")]
    ActionGroup {
        owner: String,
        index: usize,
        group: usize,
        groups: usize,
    },
    #[error("stimulus {index} drives line {line}, only {width} input lines exist")]
    StimulusLine { index: usize, line: usize, width: usize },
    #[error("peripheral `{name}` drives event line {line}, only {width} {what} lines exist")]
    PeripheralLine {
        name: String,
        line: usize,
        width: usize,
        what: &'static str,
    },
}

fn check_actions(owner: String, prog: &Program, groups: usize) -> Result<(), SimError> {
    for (index, cmd) in prog.commands().iter().enumerate() {
        if cmd.opcode == OpCode::Action && cmd.group() as usize >= groups {
            return Err(SimError::ActionGroup {
                owner,
                index,
                group: cmd.group() as usize,
                groups,
            });
        }
    }
    Ok(())
}

fn check_peripheral_lines(blocks: &[RegisterBlock], inputs: usize, outputs: usize) -> Result<(), SimError> {
    use crate::periph::{Device, SensorMode};
    for b in blocks {
        let (event, start) = match &b.device {
            Device::Timer(t) => (t.event_line, None),
            Device::Sensor(s) => match s.mode {
                SensorMode::Triggered { start_line, .. } => (s.event_line, start_line),
                SensorMode::Continuous => (s.event_line, None),
            },
            _ => (None, None),
        };
        if let Some(line) = event.filter(|&l| l >= inputs) {
            return Err(SimError::PeripheralLine {
                name: b.name.clone(),
                line,
                width: inputs,
                what: "input",
            });
        }
        if let Some(line) = start.filter(|&l| l >= outputs) {
            return Err(SimError::PeripheralLine {
                name: b.name.clone(),
                line,
                width: outputs,
                what: "output",
            });
        }
    }
    Ok(())
}

fn default_digest(stimuli: &[Stimulus], blocks: &[RegisterBlock]) -> String {
    let mut h = Sha256::new();
    h.update(format!("{stimuli:?}").as_bytes());
    h.update(format!("{blocks:?}").as_bytes());
    hex::encode(h.finalize())
}

pub struct Simulator {
    name: String,
    clock_limit: u64,
    level: TraceLevel,
    stimulus_digest: String,
    fabric: EventFabric,
    bus: Bus,
    links: Vec<LinkState>,
    baseline: Option<BaselineState>,
    stimuli: Vec<Stimulus>,
    next_stimulus: usize,
    cycle: u64,
    prev_outputs: LineSet,
    trace: Vec<TraceRecord>,
    errors: Vec<SimErrorRecord>,
    end: Option<EndReason>,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        let fabric = EventFabric::new(cfg.input_width, cfg.output_width, cfg.loopback.clone())?;
        check_peripheral_lines(&cfg.peripherals, cfg.input_width, cfg.output_width)?;
        for (index, s) in cfg.stimuli.iter().enumerate() {
            if s.line >= cfg.input_width {
                return Err(SimError::StimulusLine {
                    index,
                    line: s.line,
                    width: cfg.input_width,
                });
            }
        }
        let stimulus_digest = cfg
            .stimulus_digest
            .clone()
            .unwrap_or_else(|| default_digest(&cfg.stimuli, &cfg.peripherals));
        let map = PeripheralMap::new(cfg.peripherals)?;

        let mut links = Vec::with_capacity(cfg.links.len());
        let mut master_segments = Vec::new();
        for (i, spec) in cfg.links.iter().enumerate() {
            if let Some(line) = spec.config.event_mask.iter().find(|&l| l >= cfg.input_width) {
                return Err(SimError::MaskWidth {
                    link: i,
                    line,
                    width: cfg.input_width,
                });
            }
            check_actions(format!("link {i}"), &spec.program, fabric.groups())?;
            let mut link =
                LinkState::new(i, spec.config, spec.scm_lines).map_err(|error| SimError::Link { link: i, error })?;
            link.load_program(&spec.program)
                .map_err(|error| SimError::Link { link: i, error })?;
            links.push(link);
            master_segments.push(spec.segment);
        }
        let baseline = match cfg.baseline {
            Some(spec) => {
                check_actions("baseline handler".into(), &spec.handler, fabric.groups())?;
                master_segments.push(0);
                Some(BaselineState::new(
                    spec.model,
                    spec.irq_lines,
                    spec.base_address,
                    spec.handler,
                ))
            }
            None => None,
        };
        let bus = Bus::new(map, cfg.segments, cfg.transfer_cycles, master_segments)?;

        let mut stimuli = cfg.stimuli;
        stimuli.sort_by_key(|s| s.cycle);

        let mut sim = Simulator {
            name: cfg.name,
            clock_limit: cfg.clock_limit,
            level: cfg.trace_level,
            stimulus_digest,
            fabric,
            bus,
            links,
            baseline,
            stimuli,
            next_stimulus: 0,
            cycle: 0,
            prev_outputs: LineSet::EMPTY,
            trace: Vec::new(),
            errors: Vec::new(),
            end: None,
        };
        let header = TraceRecord::Header {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            scenario: sim.name.clone(),
            links: sim.links.len(),
            masters: sim.bus.masters(),
            level: sim.level,
        };
        sim.emit(header);
        Ok(sim)
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn fabric(&self) -> &EventFabric {
        &self.fabric
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    pub fn baseline(&self) -> Option<&BaselineState> {
        self.baseline.as_ref()
    }

    pub fn finished(&self) -> Option<EndReason> {
        self.end
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    fn emit(&mut self, r: TraceRecord) {
        if r.level() <= self.level {
            self.trace.push(r);
        }
    }

    fn baseline_master(&self) -> usize {
        self.links.len()
    }

    /// Nothing left that could change state.
    fn quiescent(&self) -> bool {
        self.next_stimulus >= self.stimuli.len()
            && self.links.iter().all(LinkState::quiescent)
            && self.bus.idle()
            && !self.fabric.loopback_pending()
            && self.baseline.as_ref().is_none_or(BaselineState::idle)
            && !self.bus.peripherals().active_after(self.cycle)
    }

    /// Simulates one cycle. Returns `false` once the run has ended.
    pub fn step(&mut self) -> bool {
        if self.end.is_some() {
            return false;
        }
        if self.cycle >= self.clock_limit {
            self.finish(EndReason::ClockLimit, self.cycle.saturating_sub(1));
            return false;
        }
        let c = self.cycle;
        self.fabric.begin_cycle();

        while let Some(s) = self.stimuli.get(self.next_stimulus).copied().filter(|s| s.cycle <= c) {
            self.next_stimulus += 1;
            let level = match s.action {
                StimulusAction::Level(level) => {
                    self.fabric.set_level(s.line, level);
                    Some(level)
                }
                StimulusAction::Pulse => {
                    self.fabric.pulse(s.line);
                    None
                }
            };
            self.emit(TraceRecord::Stimulus {
                cycle: c,
                line: s.line,
                level,
            });
        }

        self.bus.peripherals_mut().tick(c, &mut self.fabric);

        for i in 0..self.links.len() {
            let events = self.links[i]
                .step(c, &mut self.fabric, &mut self.bus, i)
                .expect("a link never has two bus requests outstanding");
            let link = &self.links[i];
            if link.state() != FsmState::Idle {
                let r = TraceRecord::Link {
                    cycle: c,
                    link: i,
                    state: link.state(),
                    pc: link.pc(),
                    fifo: link.fifo_len(),
                };
                self.emit(r);
            }
            self.link_events(i, events);
        }

        if let Some(mut base) = self.baseline.take() {
            let master = self.baseline_master();
            let mut port = self.bus.port(master, c);
            let events = base.step(c, &mut self.fabric, &mut port);
            self.baseline = Some(base);
            for e in events {
                match e {
                    BaselineEvent::Interrupt { cycle } => self.emit(TraceRecord::Irq { cycle }),
                    BaselineEvent::Completed { cycle, latency } => self.emit(TraceRecord::BaselineDone {
                        cycle,
                        latency: Some(latency),
                        error: None,
                    }),
                    BaselineEvent::Failed { cycle, error } => {
                        self.errors.push(SimErrorRecord {
                            cycle,
                            source: "baseline".into(),
                            message: error.clone(),
                        });
                        self.emit(TraceRecord::BaselineDone {
                            cycle,
                            latency: None,
                            error: Some(error),
                        });
                    }
                    BaselineEvent::Read { .. } | BaselineEvent::Write { .. } => {}
                }
            }
        }

        for e in self.bus.tick(c) {
            match e {
                BusEvent::Granted(t) => self.emit(TraceRecord::Bus {
                    cycle: c,
                    master: t.master,
                    segment: t.segment,
                    kind: t.kind,
                    address: hex32(t.address),
                    data: hex32(t.data),
                    status: GrantStatus::Granted,
                }),
                BusEvent::Waiting {
                    master,
                    segment,
                    request,
                    ..
                } => self.emit(TraceRecord::Bus {
                    cycle: c,
                    master,
                    segment,
                    kind: request.kind,
                    address: hex32(request.address),
                    data: hex32(request.data),
                    status: GrantStatus::Waiting,
                }),
                BusEvent::Completed(done) => {
                    self.emit(TraceRecord::BusDone {
                        cycle: c,
                        master: done.txn.master,
                        kind: done.txn.kind,
                        address: hex32(done.txn.address),
                        data: done.result.ok().map(hex32),
                        error: done.result.err().map(|e| e.to_string()),
                    });
                    let m = done.txn.master;
                    if m < self.links.len() {
                        let events = self.links[m].on_bus_complete(c, &done);
                        self.link_events(m, events);
                    }
                }
            }
        }

        let outputs = self.fabric.outputs();
        if outputs != self.prev_outputs {
            self.prev_outputs = outputs;
            self.emit(TraceRecord::Outputs {
                cycle: c,
                lines: outputs.to_string(),
            });
        }

        if self.quiescent() {
            self.finish(EndReason::Quiescent, c);
            self.cycle = c + 1;
            return false;
        }
        self.cycle = c + 1;
        true
    }

    fn link_events(&mut self, link: usize, events: Vec<LinkEvent>) {
        for e in events {
            let r = match e {
                LinkEvent::Accepted { token } => TraceRecord::Trigger {
                    cycle: token.detect_cycle,
                    link,
                    token: Some(token.id),
                    accepted: true,
                },
                LinkEvent::Dropped { cycle } => TraceRecord::Trigger {
                    cycle,
                    link,
                    token: None,
                    accepted: false,
                },
                LinkEvent::Started { .. } => continue,
                LinkEvent::Executed { cycle, pc, opcode } => TraceRecord::Exec {
                    cycle,
                    link,
                    pc,
                    op: opcode.mnemonic().into(),
                },
                LinkEvent::Completed { cycle, token, latency } => TraceRecord::Complete {
                    cycle,
                    link,
                    token: token.id,
                    latency,
                },
                LinkEvent::Aborted { cycle, token, error } => {
                    self.errors.push(SimErrorRecord {
                        cycle,
                        source: format!("link {link}"),
                        message: error.clone(),
                    });
                    TraceRecord::Abort {
                        cycle,
                        link,
                        token: token.id,
                        error,
                    }
                }
            };
            self.emit(r);
        }
    }

    fn finish(&mut self, reason: EndReason, cycle: u64) {
        self.end = Some(reason);
        self.emit(TraceRecord::End { cycle, reason });
    }

    /// Runs to quiescence or the clock limit.
    pub fn run(mut self) -> SimReport {
        while self.step() {}
        self.report()
    }

    /// Report for the cycles simulated so far.
    pub fn report(&self) -> SimReport {
        let links: Vec<LinkReport> = self
            .links
            .iter()
            .map(|l| LinkReport {
                link: l.id,
                latency: LatencySummary::from_samples(&l.stats.latencies),
                latencies: l.stats.latencies.clone(),
                triggers_accepted: l.stats.triggers_accepted,
                triggers_dropped: l.stats.triggers_dropped,
                completed: l.stats.completed,
                aborted: l.stats.aborted,
                commands_executed: l.stats.commands_executed,
                scm_fetches: l.stats.scm_fetches,
                bus_reads: l.stats.bus_reads,
                bus_writes: l.stats.bus_writes,
                error: l.error().map(str::to_owned),
            })
            .collect();
        let baseline = self.baseline.as_ref().map(|b| BaselineReport {
            master: self.baseline_master(),
            latency: LatencySummary::from_samples(&b.stats.latencies),
            latencies: b.stats.latencies.clone(),
            interrupts: b.stats.interrupts,
            handled: b.stats.handled,
            shared_fetches: b.stats.shared_fetches,
            bus_reads: b.stats.bus_reads,
            bus_writes: b.stats.bus_writes,
            error: b.stats.error.clone(),
        });
        let masters = self
            .bus
            .stats()
            .iter()
            .enumerate()
            .map(|(m, st)| MasterReport {
                master: m,
                name: if m < self.links.len() {
                    format!("link{m}")
                } else {
                    "baseline".into()
                },
                reads: st.reads,
                writes: st.writes,
                errors: st.errors,
                grant_waits: st.grant_waits.clone(),
                max_wait: st.max_wait,
            })
            .collect();
        let bus = BusReport {
            segments: self.bus.segments(),
            transfer_cycles: self.bus.transfer_cycles(),
            masters,
        };
        let shared_fetches = baseline.as_ref().map_or(0, |b| b.shared_fetches);
        let bus_transactions = bus.transactions();
        let activity = ActivityReport {
            label: POWER_PROXY_LABEL.into(),
            shared_fetches,
            scm_fetches: links.iter().map(|l| l.scm_fetches).sum(),
            bus_transactions,
            memory_activity: shared_fetches + bus_transactions,
        };
        SimReport {
            version: REPORT_VERSION,
            scenario: self.name.clone(),
            stimulus_digest: self.stimulus_digest.clone(),
            cycles: self.cycle,
            end: self.end.unwrap_or(EndReason::ClockLimit),
            links,
            baseline,
            bus,
            activity,
            errors: self.errors.clone(),
            trace_digest: digest(&self.trace),
            trace: self.trace.clone(),
        }
    }
}

/// Builds and runs a simulation.
pub fn simulate(cfg: SimConfig) -> Result<SimReport, SimError> {
    Ok(Simulator::new(cfg)?.run())
}
