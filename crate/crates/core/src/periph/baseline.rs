//! Calibrated stand-in for the main core handling a linking event through an interrupt.
//!
//! This is a latency/activity model, not an instruction-set simulator. The
//! handler's peripheral effects are described with the same microcode a link
//! would run; they are applied functionally at the completion cycle.

use std::collections::VecDeque;

use crate::asm::Program;
use crate::fabric::{EventFabric, LineSet};
use crate::isa::OpCode;
use crate::link::{execute_jump_if, execute_rmw, register_address};

use super::DecodeError;

/// Upper bound on commands executed by one functional handler run.
pub const MAX_HANDLER_STEPS: usize = 4096;

/// Register access without bus timing.
pub trait RegisterPort {
    fn read(&mut self, address: u32) -> Result<u32, DecodeError>;
    fn write(&mut self, address: u32, value: u32) -> Result<(), DecodeError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineCpuModel {
    pub interrupt_entry_cycles: u32,
    pub handler_cycles: u32,
    /// Instruction fetches from shared memory per handled event.
    pub memory_fetches_per_handler: u32,
}

impl Default for BaselineCpuModel {
    fn default() -> Self {
        BaselineCpuModel {
            interrupt_entry_cycles: 10,
            handler_cycles: 6,
            memory_fetches_per_handler: 16,
        }
    }
}

impl BaselineCpuModel {
    pub fn total_latency(&self) -> u64 {
        self.interrupt_entry_cycles as u64 + self.handler_cycles as u64
    }

    /// Timing and fetch count for an event raised at `event_cycle` on an idle core.
    pub fn handle_event(&self, event_cycle: u64) -> HandlerOutcome {
        HandlerOutcome {
            event_cycle,
            completion_cycle: event_cycle + self.total_latency(),
            shared_fetches: self.memory_fetches_per_handler as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandlerOutcome {
    pub event_cycle: u64,
    pub completion_cycle: u64,
    pub shared_fetches: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaselineEvent {
    Interrupt { cycle: u64 },
    Completed { cycle: u64, latency: u64 },
    Failed { cycle: u64, error: String },
    Read { address: u32, value: u32 },
    Write { address: u32, value: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaselineStats {
    pub interrupts: u64,
    pub handled: u64,
    pub shared_fetches: u64,
    pub bus_reads: u64,
    pub bus_writes: u64,
    pub latencies: Vec<u64>,
    pub error: Option<String>,
}

/// The baseline core wired into a running simulation.
#[derive(Debug, Clone)]
pub struct BaselineState {
    pub model: BaselineCpuModel,
    pub irq_lines: LineSet,
    pub base_address: u32,
    pub handler: Program,
    pub stats: BaselineStats,
    capture_reg: u32,
    prev_pending: bool,
    queue: VecDeque<u64>,
    active: Option<HandlerOutcome>,
}

impl BaselineState {
    pub fn new(model: BaselineCpuModel, irq_lines: LineSet, base_address: u32, handler: Program) -> Self {
        BaselineState {
            model,
            irq_lines,
            base_address,
            handler,
            stats: BaselineStats::default(),
            capture_reg: 0,
            prev_pending: false,
            queue: VecDeque::new(),
            active: None,
        }
    }

    pub fn idle(&self) -> bool {
        self.active.is_none() && self.queue.is_empty()
    }

    pub fn step(&mut self, cycle: u64, fabric: &mut EventFabric, port: &mut dyn RegisterPort) -> Vec<BaselineEvent> {
        let mut events = Vec::new();
        let masked = fabric.inputs() & self.irq_lines;
        let pending = !masked.is_empty();
        let fresh = !(fabric.pulses() & self.irq_lines).is_empty();
        if pending && (!self.prev_pending || fresh) {
            self.stats.interrupts += 1;
            self.queue.push_back(cycle);
            events.push(BaselineEvent::Interrupt { cycle });
        }
        self.prev_pending = pending;

        loop {
            if let Some(outcome) = self.active {
                if outcome.completion_cycle > cycle {
                    break;
                }
                self.active = None;
                self.stats.shared_fetches += outcome.shared_fetches;
                match self.run_handler(fabric, port, &mut events) {
                    Ok(()) => {
                        let latency = cycle - outcome.event_cycle;
                        self.stats.handled += 1;
                        self.stats.latencies.push(latency);
                        events.push(BaselineEvent::Completed { cycle, latency });
                    }
                    Err(error) => {
                        self.stats.error.get_or_insert(error.clone());
                        events.push(BaselineEvent::Failed { cycle, error });
                    }
                }
            }
            match self.queue.pop_front() {
                Some(event_cycle) => {
                    let mut outcome = self.model.handle_event(cycle);
                    outcome.event_cycle = event_cycle;
                    self.active = Some(outcome);
                }
                None => break,
            }
        }
        events
    }

    fn run_handler(
        &mut self,
        fabric: &mut EventFabric,
        port: &mut dyn RegisterPort,
        events: &mut Vec<BaselineEvent>,
    ) -> Result<(), String> {
        let cmds = self.handler.commands();
        let mut pc = 0usize;
        let mut loop_remaining: Option<u32> = None;
        for _ in 0..MAX_HANDLER_STEPS {
            let Some(cmd) = cmds.get(pc) else {
                return Ok(());
            };
            let mut next = pc + 1;
            match cmd.opcode {
                OpCode::Write => {
                    let addr = register_address(self.base_address, cmd.offset());
                    port.write(addr, cmd.operand).map_err(|e| e.to_string())?;
                    self.stats.bus_writes += 1;
                    events.push(BaselineEvent::Write {
                        address: addr,
                        value: cmd.operand,
                    });
                }
                OpCode::Set | OpCode::Clear | OpCode::Toggle | OpCode::Capture => {
                    let addr = register_address(self.base_address, cmd.offset());
                    let old = port.read(addr).map_err(|e| e.to_string())?;
                    self.stats.bus_reads += 1;
                    events.push(BaselineEvent::Read {
                        address: addr,
                        value: old,
                    });
                    if cmd.opcode == OpCode::Capture {
                        self.capture_reg = old & cmd.operand;
                    } else {
                        let new = execute_rmw(old, cmd.opcode, cmd.operand);
                        port.write(addr, new).map_err(|e| e.to_string())?;
                        self.stats.bus_writes += 1;
                        events.push(BaselineEvent::Write {
                            address: addr,
                            value: new,
                        });
                    }
                }
                OpCode::JumpIf => {
                    let cond = cmd.condition().expect("validated program");
                    if execute_jump_if(self.capture_reg, cond, cmd.operand) {
                        next = cmd.target() as usize;
                    }
                }
                OpCode::Loop => {
                    let remaining = loop_remaining.unwrap_or(cmd.operand);
                    if remaining != 0 {
                        loop_remaining = Some(remaining - 1);
                        next = cmd.target() as usize;
                    } else {
                        loop_remaining = None;
                    }
                }
                OpCode::Wait => {}
                OpCode::Action => {
                    let mode = cmd.action_mode().expect("validated program");
                    fabric
                        .drive_group(cmd.group() as usize, mode, cmd.operand)
                        .map_err(|e| e.to_string())?;
                }
            }
            pc = next;
        }
        Err(format!("handler exceeded {MAX_HANDLER_STEPS} commands"))
    }
}
