//! One linking unit: trigger unit, trigger FIFO, private SCM and execution FSM.
//!
//! Timing, relative to the cycle the triggering input is asserted (cycle 0):
//!
//! | cycle | activity |
//! |-------|----------|
//! | 0     | trigger predicate evaluated, token pushed into the FIFO |
//! | 1     | idle FSM pops the token and fetches SCM line 0 |
//! | 2     | first command executes; `action` drives outputs here |
//! | 2..4  | read-modify-write: bus read granted at 2, data back at 4 |
//! | 5     | modify, bus write requested |
//! | 5..7  | bus write, complete at 7 |
//!
//! Fetch overlaps execution: the line after a finished command is fetched in
//! the cycle the command finishes and executes in the next one. When that line
//! is the blank sentinel or past the end of the SCM, the program completes in
//! the finishing cycle and the FSM is idle from the next cycle.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{validate_against_capacity, AsmError, Program};
use crate::bus::{Bus, BusError, BusKind, BusRequest, Completion};
use crate::fabric::{EventFabric, FabricError, LineSet};
use crate::isa::{ActionMode, Command, Condition, OpCode};

pub const DEFAULT_FIFO_DEPTH: usize = 4;
pub const MAX_FIFO_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerMode {
    /// All selected lines active (AND).
    All,
    /// Any selected line active (OR).
    #[default]
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkConfig {
    pub event_mask: LineSet,
    pub trigger_mode: TriggerMode,
    pub base_address: u32,
    pub enabled: bool,
    pub fifo_depth: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            event_mask: LineSet::EMPTY,
            trigger_mode: TriggerMode::Any,
            base_address: 0,
            enabled: true,
            fifo_depth: DEFAULT_FIFO_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("base address {0:#x} is not word aligned")]
    MisalignedBase(u32),
    #[error("FIFO depth {0} outside 1..={MAX_FIFO_DEPTH}")]
    FifoDepth(usize),
    #[error("SCM must have 1..=256 lines, got {0}")]
    ScmLines(usize),
    #[error("program of {len} commands does not fit a {capacity}-line SCM")]
    CapacityExceeded { len: usize, capacity: usize },
    #[error("program rejected: {0}")]
    Program(AsmError),
    #[error("link is busy")]
    LinkBusy,
}

/// The trigger predicate on the current input vector.
///
/// An empty mask never triggers, in either mode.
pub fn evaluate_trigger(inputs: LineSet, cfg: &LinkConfig) -> bool {
    let masked = inputs & cfg.event_mask;
    match cfg.trigger_mode {
        TriggerMode::Any => !masked.is_empty(),
        TriggerMode::All => !cfg.event_mask.is_empty() && masked == cfg.event_mask,
    }
}

/// Bitwise modify step of `set`, `clear` and `toggle`.
pub fn execute_rmw(old: u32, opcode: OpCode, mask: u32) -> u32 {
    match opcode {
        OpCode::Set => old | mask,
        OpCode::Clear => old & !mask,
        OpCode::Toggle => old ^ mask,
        other => panic!("{} is not a read-modify-write command", other.mnemonic()),
    }
}

/// Value `capture` stores from a bus read.
pub fn execute_capture(bus_value: u32, mask: u32) -> u32 {
    bus_value & mask
}

pub fn execute_jump_if(capture_reg: u32, cond: Condition, operand: u32) -> bool {
    cond.holds(capture_reg, operand)
}

/// Drives the output group selected by an `action` command.
pub fn execute_action(cmd: &Command, fabric: &mut EventFabric) -> Result<(), FabricError> {
    let mode = cmd.action_mode().unwrap_or(ActionMode::Set);
    fabric.drive_group(cmd.group() as usize, mode, cmd.operand)
}

/// Byte address of a register command's word offset.
pub fn register_address(base: u32, offset: u16) -> u32 {
    base.wrapping_add(4 * offset as u32)
}

/// What the execution unit did in a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsmState {
    Idle,
    Fetch,
    /// Single-cycle control commands: `jif`, `loop`, and the load cycle of `wait`.
    Execute,
    ExecAction,
    BusReadPend,
    Modify,
    BusWritePend,
    WaitCount,
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FsmState::Idle => "idle",
            FsmState::Fetch => "fetch",
            FsmState::Execute => "execute",
            FsmState::ExecAction => "exec_action",
            FsmState::BusReadPend => "bus_read_pend",
            FsmState::Modify => "modify",
            FsmState::BusWritePend => "bus_write_pend",
            FsmState::WaitCount => "wait_count",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Sequence number among the link's accepted triggers.
    pub id: u64,
    pub detect_cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    /// The command at `pc` executes in the next step.
    Ready,
    ReadPending(Command),
    Modify {
        cmd: Command,
        old: u32,
    },
    WritePending,
    Waiting {
        remaining: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkEvent {
    Accepted { token: Token },
    Dropped { cycle: u64 },
    Started { cycle: u64, token: Token },
    Executed { cycle: u64, pc: usize, opcode: OpCode },
    Completed { cycle: u64, token: Token, latency: u64 },
    Aborted { cycle: u64, token: Token, error: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    pub triggers_accepted: u64,
    pub triggers_dropped: u64,
    pub commands_executed: u64,
    pub bus_reads: u64,
    pub bus_writes: u64,
    pub scm_fetches: u64,
    pub completed: u64,
    pub aborted: u64,
    /// Trigger-to-completion latency of every completed program, in order.
    pub latencies: Vec<u64>,
    /// Times each SCM line was executed.
    pub line_executions: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct LinkState {
    pub id: usize,
    pub config: LinkConfig,
    scm: Vec<Option<Command>>,
    fifo: VecDeque<Token>,
    phase: Phase,
    pc: usize,
    loop_counter: Option<u32>,
    current: Option<Token>,
    capture_reg: u32,
    prev_predicate: bool,
    next_token: u64,
    last_state: FsmState,
    error: Option<String>,
    pub stats: LinkStats,
}

impl LinkState {
    pub fn new(id: usize, config: LinkConfig, scm_lines: usize) -> Result<Self, LinkError> {
        if !config.base_address.is_multiple_of(4) {
            return Err(LinkError::MisalignedBase(config.base_address));
        }
        if !(1..=MAX_FIFO_DEPTH).contains(&config.fifo_depth) {
            return Err(LinkError::FifoDepth(config.fifo_depth));
        }
        if !(1..=crate::asm::MAX_PROGRAM_LEN).contains(&scm_lines) {
            return Err(LinkError::ScmLines(scm_lines));
        }
        Ok(LinkState {
            id,
            config,
            scm: vec![None; scm_lines],
            fifo: VecDeque::with_capacity(config.fifo_depth),
            phase: Phase::Idle,
            pc: 0,
            loop_counter: None,
            current: None,
            capture_reg: 0,
            prev_predicate: false,
            next_token: 0,
            last_state: FsmState::Idle,
            error: None,
            stats: LinkStats {
                line_executions: vec![0; scm_lines],
                ..LinkStats::default()
            },
        })
    }

    /// Writes `prog` into the SCM; the remaining lines become blank.
    pub fn load_program(&mut self, prog: &Program) -> Result<(), LinkError> {
        if self.phase != Phase::Idle {
            return Err(LinkError::LinkBusy);
        }
        validate_against_capacity(prog, self.scm.len()).map_err(|e| match e {
            AsmError::CapacityExceeded { len, capacity } => LinkError::CapacityExceeded { len, capacity },
            other => LinkError::Program(other),
        })?;
        self.scm.iter_mut().for_each(|l| *l = None);
        for (line, cmd) in self.scm.iter_mut().zip(prog.commands()) {
            *line = Some(*cmd);
        }
        Ok(())
    }

    pub fn scm(&self) -> &[Option<Command>] {
        &self.scm
    }

    pub fn scm_lines(&self) -> usize {
        self.scm.len()
    }

    pub fn fifo_len(&self) -> usize {
        self.fifo.len()
    }

    pub fn pc(&self) -> usize {
        self.pc
    }

    pub fn capture_reg(&self) -> u32 {
        self.capture_reg
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    /// What the FSM did in the most recent cycle.
    pub fn state(&self) -> FsmState {
        self.last_state
    }

    pub fn is_idle(&self) -> bool {
        self.phase == Phase::Idle
    }

    /// Idle with nothing queued.
    pub fn quiescent(&self) -> bool {
        self.is_idle() && self.fifo.is_empty()
    }

    /// Advances one cycle: the FSM first, then the trigger unit samples the
    /// inputs. A token pushed now is popped no earlier than the next cycle.
    /// `master` is this link's bus master id.
    pub fn step(
        &mut self,
        cycle: u64,
        fabric: &mut EventFabric,
        bus: &mut Bus,
        master: usize,
    ) -> Result<Vec<LinkEvent>, BusError> {
        let mut events = Vec::new();
        self.last_state = match self.phase {
            Phase::Idle => match self.fifo.pop_front() {
                Some(token) => {
                    self.current = Some(token);
                    self.pc = 0;
                    self.loop_counter = None;
                    events.push(LinkEvent::Started { cycle, token });
                    self.fetch(cycle, &mut events);
                    FsmState::Fetch
                }
                None => FsmState::Idle,
            },
            Phase::Ready => self.execute(cycle, fabric, bus, master, &mut events)?,
            Phase::ReadPending(_) => FsmState::BusReadPend,
            Phase::WritePending => FsmState::BusWritePend,
            Phase::Modify { cmd, old } => {
                let new = execute_rmw(old, cmd.opcode, cmd.operand);
                let addr = register_address(self.config.base_address, cmd.offset());
                bus.request(master, BusRequest::write(addr, new), cycle)?;
                self.phase = Phase::WritePending;
                FsmState::Modify
            }
            Phase::Waiting { remaining } => {
                if remaining <= 1 {
                    self.advance(self.pc + 1, cycle, &mut events);
                } else {
                    self.phase = Phase::Waiting {
                        remaining: remaining - 1,
                    };
                }
                FsmState::WaitCount
            }
        };
        self.sample_trigger(cycle, fabric, &mut events);
        Ok(events)
    }

    fn sample_trigger(&mut self, cycle: u64, fabric: &EventFabric, events: &mut Vec<LinkEvent>) {
        if !self.config.enabled {
            return;
        }
        let predicate = evaluate_trigger(fabric.inputs(), &self.config);
        let fresh_pulse = !(fabric.pulses() & self.config.event_mask).is_empty();
        if predicate && (!self.prev_predicate || fresh_pulse) {
            if self.fifo.len() < self.config.fifo_depth {
                let token = Token {
                    id: self.next_token,
                    detect_cycle: cycle,
                };
                self.next_token += 1;
                self.fifo.push_back(token);
                self.stats.triggers_accepted += 1;
                events.push(LinkEvent::Accepted { token });
            } else {
                self.stats.triggers_dropped += 1;
                events.push(LinkEvent::Dropped { cycle });
            }
        }
        self.prev_predicate = predicate;
    }

    fn execute(
        &mut self,
        cycle: u64,
        fabric: &mut EventFabric,
        bus: &mut Bus,
        master: usize,
        events: &mut Vec<LinkEvent>,
    ) -> Result<FsmState, BusError> {
        let cmd = self.scm[self.pc].expect("ready line holds a command");
        self.stats.commands_executed += 1;
        self.stats.line_executions[self.pc] += 1;
        events.push(LinkEvent::Executed {
            cycle,
            pc: self.pc,
            opcode: cmd.opcode,
        });
        let addr = register_address(self.config.base_address, cmd.offset());
        let state = match cmd.opcode {
            OpCode::Action => {
                match execute_action(&cmd, fabric) {
                    Ok(()) => self.advance(self.pc + 1, cycle, events),
                    Err(e) => self.abort(cycle, e.to_string(), events),
                }
                FsmState::ExecAction
            }
            OpCode::Write => {
                bus.request(master, BusRequest::write(addr, cmd.operand), cycle)?;
                self.phase = Phase::WritePending;
                FsmState::BusWritePend
            }
            OpCode::Set | OpCode::Clear | OpCode::Toggle | OpCode::Capture => {
                bus.request(master, BusRequest::read(addr), cycle)?;
                self.phase = Phase::ReadPending(cmd);
                FsmState::BusReadPend
            }
            OpCode::JumpIf => {
                let cond = cmd.condition().expect("validated program");
                let next = if execute_jump_if(self.capture_reg, cond, cmd.operand) {
                    cmd.target() as usize
                } else {
                    self.pc + 1
                };
                self.advance(next, cycle, events);
                FsmState::Execute
            }
            OpCode::Loop => {
                let remaining = self.loop_counter.unwrap_or(cmd.operand);
                if remaining != 0 {
                    self.loop_counter = Some(remaining - 1);
                    self.advance(cmd.target() as usize, cycle, events);
                } else {
                    self.loop_counter = None;
                    self.advance(self.pc + 1, cycle, events);
                }
                FsmState::Execute
            }
            OpCode::Wait => {
                if cmd.operand == 0 {
                    self.advance(self.pc + 1, cycle, events);
                } else {
                    self.phase = Phase::Waiting { remaining: cmd.operand };
                }
                FsmState::Execute
            }
        };
        Ok(state)
    }

    /// Routes a finished bus transfer back to the FSM. Called in the cycle the
    /// transfer completes, after [`LinkState::step`].
    pub fn on_bus_complete(&mut self, cycle: u64, done: &Completion) -> Vec<LinkEvent> {
        let mut events = Vec::new();
        match done.txn.kind {
            BusKind::Read => self.stats.bus_reads += 1,
            BusKind::Write => self.stats.bus_writes += 1,
        }
        let value = match done.result {
            Ok(v) => v,
            Err(e) => {
                self.abort(cycle, e.to_string(), &mut events);
                return events;
            }
        };
        match self.phase {
            Phase::ReadPending(cmd) if cmd.opcode == OpCode::Capture => {
                self.capture_reg = execute_capture(value, cmd.operand);
                self.advance(self.pc + 1, cycle, &mut events);
            }
            Phase::ReadPending(cmd) => self.phase = Phase::Modify { cmd, old: value },
            Phase::WritePending => self.advance(self.pc + 1, cycle, &mut events),
            other => panic!("link {} got a bus completion while {other:?}", self.id),
        }
        events
    }

    /// Finishes the current command: fetches line `next` or completes the program.
    fn advance(&mut self, next: usize, cycle: u64, events: &mut Vec<LinkEvent>) {
        self.pc = next;
        self.fetch(cycle, events);
    }

    fn fetch(&mut self, cycle: u64, events: &mut Vec<LinkEvent>) {
        match self.scm.get(self.pc).copied().flatten() {
            Some(_) => {
                self.stats.scm_fetches += 1;
                self.phase = Phase::Ready;
            }
            None => {
                let token = self.current.take().expect("program running");
                let latency = cycle - token.detect_cycle;
                self.stats.completed += 1;
                self.stats.latencies.push(latency);
                self.phase = Phase::Idle;
                self.pc = 0;
                events.push(LinkEvent::Completed { cycle, token, latency });
            }
        }
    }

    fn abort(&mut self, cycle: u64, error: String, events: &mut Vec<LinkEvent>) {
        let token = self.current.take().expect("program running");
        self.stats.aborted += 1;
        self.error.get_or_insert_with(|| error.clone());
        self.phase = Phase::Idle;
        self.pc = 0;
        self.loop_counter = None;
        events.push(LinkEvent::Aborted { cycle, token, error });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble_str;
    use crate::bus::BusEvent;
    use crate::periph::{Device, PeripheralMap, RegisterBlock, Scratch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bit_loop(old: u32, opcode: OpCode, mask: u32) -> u32 {
        let mut out = 0u32;
        for i in 0..32 {
            let o = (old >> i) & 1;
            let m = (mask >> i) & 1;
            let bit = match opcode {
                OpCode::Set => o | m,
                OpCode::Clear => {
                    if m == 1 {
                        0
                    } else {
                        o
                    }
                }
                OpCode::Toggle => {
                    if m == 1 {
                        1 - o
                    } else {
                        o
                    }
                }
                _ => unreachable!(),
            };
            out |= bit << i;
        }
        out
    }

    #[test]
    fn rmw_examples() {
        assert_eq!(execute_rmw(0xF0, OpCode::Set, 0x0F), 0xFF);
        assert_eq!(execute_rmw(0xFF, OpCode::Clear, 0x0F), 0xF0);
        assert_eq!(execute_rmw(0xFF, OpCode::Toggle, 0x0F0F), 0x0FF0);
    }

    #[test]
    fn rmw_matches_bit_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for op in [OpCode::Set, OpCode::Clear, OpCode::Toggle] {
            for _ in 0..10_000 {
                let (old, mask) = (rng.random::<u32>(), rng.random::<u32>());
                assert_eq!(execute_rmw(old, op, mask), bit_loop(old, op, mask));
            }
        }
    }

    #[test]
    fn capture_and_jump_examples() {
        assert_eq!(execute_capture(0xDEAD_BEEF, 0xFFFF), 0xBEEF);
        assert_eq!(execute_capture(0xDEAD_BEEF, 0), 0);
        assert_eq!(execute_capture(0xDEAD_BEEF, u32::MAX), 0xDEAD_BEEF);
        assert!(execute_jump_if(0x20, Condition::Ltu, 0x40));
        assert!(!execute_jump_if(0x40, Condition::Ltu, 0x40));
        assert!(execute_jump_if(0xFFFF_FFFF, Condition::Geu, 1));
    }

    #[test]
    fn trigger_examples() {
        let cfg = |mask: u128, mode| LinkConfig {
            event_mask: LineSet(mask),
            trigger_mode: mode,
            ..LinkConfig::default()
        };
        assert!(evaluate_trigger(LineSet(0b0100), &cfg(0b0110, TriggerMode::Any)));
        assert!(!evaluate_trigger(LineSet(0b0100), &cfg(0b0110, TriggerMode::All)));
        assert!(evaluate_trigger(LineSet(0b0110), &cfg(0b0110, TriggerMode::All)));
        assert!(!evaluate_trigger(LineSet(u128::MAX), &cfg(0, TriggerMode::All)));
        assert!(!evaluate_trigger(LineSet(u128::MAX), &cfg(0, TriggerMode::Any)));
    }

    #[test]
    fn register_addresses_are_word_offsets() {
        assert_eq!(register_address(0x1000, 4), 0x1010);
        assert_eq!(register_address(0xFFFF_FFFC, 1), 0);
    }

    fn link(program: &str, scm: usize) -> LinkState {
        let mut l = LinkState::new(
            0,
            LinkConfig {
                event_mask: LineSet::single(0),
                base_address: 0x1000,
                ..LinkConfig::default()
            },
            scm,
        )
        .unwrap();
        l.load_program(&assemble_str(program).unwrap()).unwrap();
        l
    }

    #[test]
    fn load_fills_remaining_lines_with_sentinel() {
        let l = link("wait 1\nwait 2\nwait 3\nwait 4", 8);
        assert!(l.scm()[..4].iter().all(Option::is_some));
        assert!(l.scm()[4..].iter().all(Option::is_none));
    }

    #[test]
    fn oversized_program_is_rejected() {
        let mut l = link("", 4);
        let prog = assemble_str(&"wait 1\n".repeat(8)).unwrap();
        assert_eq!(
            l.load_program(&prog),
            Err(LinkError::CapacityExceeded { len: 8, capacity: 4 })
        );
    }

    #[test]
    fn bad_configuration() {
        let cfg = LinkConfig {
            base_address: 0x1002,
            ..LinkConfig::default()
        };
        assert_eq!(
            LinkState::new(0, cfg, 4).unwrap_err(),
            LinkError::MisalignedBase(0x1002)
        );
        let cfg = LinkConfig {
            fifo_depth: 17,
            ..LinkConfig::default()
        };
        assert_eq!(LinkState::new(0, cfg, 4).unwrap_err(), LinkError::FifoDepth(17));
        assert_eq!(
            LinkState::new(0, LinkConfig::default(), 0).unwrap_err(),
            LinkError::ScmLines(0)
        );
    }

    /// Minimal cycle loop: one link, one scratch block, input 0 pulsed at `pulses`.
    struct Rig {
        link: LinkState,
        fabric: EventFabric,
        bus: Bus,
        events: Vec<LinkEvent>,
        states: Vec<FsmState>,
    }

    impl Rig {
        fn new(program: &str) -> Self {
            let map = PeripheralMap::new(vec![RegisterBlock::new(
                "ram",
                0x1000,
                Device::Scratch(Scratch::new(4)),
            )])
            .unwrap();
            Rig {
                link: link(program, 8),
                fabric: EventFabric::new(4, 32, vec![]).unwrap(),
                bus: Bus::new(map, 1, 2, vec![0]).unwrap(),
                events: Vec::new(),
                states: Vec::new(),
            }
        }

        fn cycle(&mut self, c: u64, pulse: bool) {
            self.fabric.begin_cycle();
            if pulse {
                self.fabric.pulse(0);
            }
            let ev = self.link.step(c, &mut self.fabric, &mut self.bus, 0).unwrap();
            self.events.extend(ev);
            self.states.push(self.link.state());
            for e in self.bus.tick(c) {
                if let BusEvent::Completed(done) = e {
                    let ev = self.link.on_bus_complete(c, &done);
                    self.events.extend(ev);
                }
            }
        }

        fn run(&mut self, pulses: &[u64], cycles: u64) {
            for c in 0..cycles {
                self.cycle(c, pulses.contains(&c));
            }
        }
    }

    #[test]
    fn set_program_walks_the_documented_states() {
        let mut rig = Rig::new("set 0, 0x1");
        rig.run(&[0], 10);
        use FsmState::*;
        assert_eq!(
            rig.states,
            vec![
                Idle,
                Fetch,
                BusReadPend,
                BusReadPend,
                BusReadPend,
                Modify,
                BusWritePend,
                BusWritePend,
                Idle,
                Idle
            ]
        );
        assert_eq!(rig.link.stats.latencies, vec![7]);
        assert_eq!(rig.bus.peripherals().peek(0x1000), Ok(1));
    }

    #[test]
    fn load_while_busy_is_rejected() {
        let mut rig = Rig::new("set 0, 0x1");
        rig.run(&[0], 3);
        assert_eq!(rig.link.state(), FsmState::BusReadPend);
        assert_eq!(rig.link.load_program(&Program::empty()), Err(LinkError::LinkBusy));
    }

    #[test]
    fn wait_spends_exactly_n_cycles_counting() {
        let mut rig = Rig::new("wait 3");
        rig.run(&[0], 10);
        let counting = rig.states.iter().filter(|s| **s == FsmState::WaitCount).count();
        assert_eq!(counting, 3);
        // fetch at 1, load at 2, count 3..=5
        assert_eq!(rig.link.stats.latencies, vec![5]);
    }

    #[test]
    fn loop_body_runs_count_plus_one_times() {
        for k in [0u32, 1, 5] {
            let mut rig = Rig::new(&format!("top: action grp0.toggle, 1\nloop {k}, top"));
            rig.run(&[0], 40);
            assert_eq!(rig.link.stats.line_executions[0], k as u64 + 1);
            assert_eq!(rig.link.stats.line_executions[1], k as u64 + 1);
        }
    }

    #[test]
    fn loop_counter_reloads_on_next_trigger() {
        let mut rig = Rig::new("top: wait 0\nloop 2, top");
        rig.run(&[0, 20], 40);
        assert_eq!(rig.link.stats.line_executions[0], 6);
        assert_eq!(rig.link.stats.completed, 2);
    }

    #[test]
    fn capture_then_branch() {
        let mut rig = Rig::new("capture 0, 0xFF\njif ltu, 0x40, done\naction grp0.set, 1\ndone: wait 0");
        rig.run(&[0], 20);
        // scratch word 0 reads 0, so the branch skips the action
        assert_eq!(rig.fabric.outputs(), LineSet::EMPTY);
        assert_eq!(rig.link.stats.line_executions, vec![1, 1, 0, 1, 0, 0, 0, 0]);
        assert_eq!(rig.link.capture_reg(), 0);
    }

    #[test]
    fn bus_error_aborts_and_sticks() {
        let mut rig = Rig::new("write 8, 1\naction grp0.set, 1");
        rig.run(&[0, 20], 40);
        assert_eq!(rig.link.stats.aborted, 2);
        assert!(rig.link.stats.latencies.is_empty());
        assert!(rig.link.error().unwrap().contains("0x00001020"));
        assert_eq!(rig.fabric.outputs(), LineSet::EMPTY);
        assert!(rig.link.quiescent());
    }

    #[test]
    fn fifo_drops_newest_when_full() {
        let mut rig = Rig::new("wait 50");
        let pulses: Vec<u64> = (0..10).map(|i| 2 * i).collect();
        rig.run(&pulses, 5);
        for c in 5..30 {
            rig.cycle(c, pulses.contains(&c));
        }
        // token 0 starts at cycle 1; tokens 1..=4 fill the FIFO; 5..=9 are dropped
        assert_eq!(rig.link.stats.triggers_accepted, 5);
        assert_eq!(rig.link.stats.triggers_dropped, 5);
        assert_eq!(rig.link.fifo_len(), 4);
    }

    #[test]
    fn held_level_triggers_once() {
        let mut rig = Rig::new("action grp0.toggle, 1");
        for c in 0..20 {
            rig.fabric.begin_cycle();
            rig.fabric.set_level(0, true);
            let ev = rig.link.step(c, &mut rig.fabric, &mut rig.bus, 0).unwrap();
            rig.events.extend(ev);
        }
        assert_eq!(rig.link.stats.triggers_accepted, 1);
    }

    #[test]
    fn disabled_link_is_inert() {
        let mut rig = Rig::new("action grp0.set, 1");
        rig.link.config.enabled = false;
        rig.run(&[0, 3, 9], 20);
        assert_eq!(
            rig.link.stats,
            LinkStats {
                line_executions: vec![0; 8],
                ..LinkStats::default()
            }
        );
        assert_eq!(rig.fabric.outputs(), LineSet::EMPTY);
    }

    #[test]
    fn empty_program_completes_in_fetch_cycle() {
        let mut rig = Rig::new("");
        rig.run(&[0], 5);
        assert_eq!(rig.link.stats.latencies, vec![1]);
        assert_eq!(rig.link.stats.commands_executed, 0);
    }
}
