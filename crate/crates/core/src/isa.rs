//! Command set and its 48-bit binary encoding.
//!
//! Every command is one 48-bit word:
//!
//! ```text
//!  47    44 43        32 31                               0
//! +--------+------------+----------------------------------+
//! | opcode |  field12   |             operand              |
//! +--------+------------+----------------------------------+
//! ```
//!
//! The meaning of `field12` depends on the opcode:
//!
//! * `write`, `set`, `clear`, `toggle`, `capture`: word offset from the link's base address.
//! * `jump-if`: `[11:8]` condition code, `[7:0]` absolute target line.
//! * `loop`: `[7:0]` absolute target line, upper nibble zero.
//! * `action`: `[11:8]` mode (0 = set levels, 1 = toggle), `[7:0]` event-line group.
//! * `wait`: unused, zero.
//!
//! Program images are plain sequences of these words, big-endian, six bytes each.

use std::fmt;

use thiserror::Error;

/// Width of one encoded command in bytes.
pub const COMMAND_BYTES: usize = 6;

pub const FIELD12_MASK: u16 = 0x0FFF;
pub const WORD_MASK: u64 = 0xFFFF_FFFF_FFFF;

/// Opcode nibble reserved for blank SCM lines.
pub const NOP_NIBBLE: u8 = 0x0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum OpCode {
    Write = 0x1,
    Set = 0x2,
    Clear = 0x3,
    Toggle = 0x4,
    Capture = 0x5,
    JumpIf = 0x6,
    Loop = 0x7,
    Wait = 0x8,
    Action = 0x9,
}

impl OpCode {
    pub const ALL: [OpCode; 9] = [
        OpCode::Write,
        OpCode::Set,
        OpCode::Clear,
        OpCode::Toggle,
        OpCode::Capture,
        OpCode::JumpIf,
        OpCode::Loop,
        OpCode::Wait,
        OpCode::Action,
    ];

    pub fn nibble(self) -> u8 {
        self as u8
    }

    pub fn from_nibble(nibble: u8) -> Result<Self, IsaError> {
        Ok(match nibble {
            0x1 => OpCode::Write,
            0x2 => OpCode::Set,
            0x3 => OpCode::Clear,
            0x4 => OpCode::Toggle,
            0x5 => OpCode::Capture,
            0x6 => OpCode::JumpIf,
            0x7 => OpCode::Loop,
            0x8 => OpCode::Wait,
            0x9 => OpCode::Action,
            other => return Err(IsaError::UndefinedOpcode(other)),
        })
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            OpCode::Write => "write",
            OpCode::Set => "set",
            OpCode::Clear => "clear",
            OpCode::Toggle => "toggle",
            OpCode::Capture => "capture",
            OpCode::JumpIf => "jif",
            OpCode::Loop => "loop",
            OpCode::Wait => "wait",
            OpCode::Action => "action",
        }
    }

    /// Commands that address a peripheral register through the link's base address.
    pub fn is_register_access(self) -> bool {
        matches!(
            self,
            OpCode::Write | OpCode::Set | OpCode::Clear | OpCode::Toggle | OpCode::Capture
        )
    }

    /// Commands that read a register before completing.
    pub fn reads_bus(self) -> bool {
        matches!(self, OpCode::Set | OpCode::Clear | OpCode::Toggle | OpCode::Capture)
    }

    pub fn has_target(self) -> bool {
        matches!(self, OpCode::JumpIf | OpCode::Loop)
    }
}

impl fmt::Display for OpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Comparison applied by `jump-if` between the capture register and the operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Condition {
    Eq = 0,
    Ne = 1,
    Ltu = 2,
    Geu = 3,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Eq, Condition::Ne, Condition::Ltu, Condition::Geu];

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Condition::Eq,
            1 => Condition::Ne,
            2 => Condition::Ltu,
            3 => Condition::Geu,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::Eq => "eq",
            Condition::Ne => "ne",
            Condition::Ltu => "ltu",
            Condition::Geu => "geu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Condition::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn holds(self, value: u32, operand: u32) -> bool {
        match self {
            Condition::Eq => value == operand,
            Condition::Ne => value != operand,
            Condition::Ltu => value < operand,
            Condition::Geu => value >= operand,
        }
    }
}

/// How an `action` command drives its event-line group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ActionMode {
    /// Level write: lines with a one bit go high, all others in the group go low.
    Set = 0,
    /// Lines with a one bit invert.
    Toggle = 1,
}

impl ActionMode {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ActionMode::Set),
            1 => Some(ActionMode::Toggle),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionMode::Set => "set",
            ActionMode::Toggle => "toggle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("undefined opcode 0x{0:X}")]
    UndefinedOpcode(u8),
    #[error("field value 0x{0:X} does not fit in 12 bits")]
    FieldWidth(u32),
    #[error("program image length {0} is not a multiple of {COMMAND_BYTES} bytes")]
    TruncatedImage(usize),
}

/// A decoded command: opcode, 12-bit field and 32-bit operand.
///
/// `field12` is kept raw; the typed views ([`Command::condition`],
/// [`Command::target`], ...) interpret it per opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Command {
    pub opcode: OpCode,
    field12: u16,
    pub operand: u32,
}

impl Command {
    pub fn new(opcode: OpCode, field12: u16, operand: u32) -> Result<Self, IsaError> {
        if field12 > FIELD12_MASK {
            return Err(IsaError::FieldWidth(field12 as u32));
        }
        Ok(Command {
            opcode,
            field12,
            operand,
        })
    }

    pub fn field12(&self) -> u16 {
        self.field12
    }

    pub fn write(offset: u16, value: u32) -> Result<Self, IsaError> {
        Command::new(OpCode::Write, offset, value)
    }

    pub fn set(offset: u16, mask: u32) -> Result<Self, IsaError> {
        Command::new(OpCode::Set, offset, mask)
    }

    pub fn clear(offset: u16, mask: u32) -> Result<Self, IsaError> {
        Command::new(OpCode::Clear, offset, mask)
    }

    pub fn toggle(offset: u16, mask: u32) -> Result<Self, IsaError> {
        Command::new(OpCode::Toggle, offset, mask)
    }

    pub fn capture(offset: u16, mask: u32) -> Result<Self, IsaError> {
        Command::new(OpCode::Capture, offset, mask)
    }

    pub fn jump_if(cond: Condition, operand: u32, target: u8) -> Self {
        Command {
            opcode: OpCode::JumpIf,
            field12: ((cond.code() as u16) << 8) | target as u16,
            operand,
        }
    }

    pub fn loop_back(count: u32, target: u8) -> Self {
        Command {
            opcode: OpCode::Loop,
            field12: target as u16,
            operand: count,
        }
    }

    pub fn wait(cycles: u32) -> Self {
        Command {
            opcode: OpCode::Wait,
            field12: 0,
            operand: cycles,
        }
    }

    pub fn action(mode: ActionMode, group: u8, bits: u32) -> Self {
        Command {
            opcode: OpCode::Action,
            field12: ((mode as u16) << 8) | group as u16,
            operand: bits,
        }
    }

    /// Word offset for register-access commands.
    pub fn offset(&self) -> u16 {
        self.field12
    }

    /// Condition code of a `jump-if`; `None` for reserved codes.
    pub fn condition(&self) -> Option<Condition> {
        Condition::from_code((self.field12 >> 8) as u8)
    }

    /// Target line of `jump-if` / `loop`.
    pub fn target(&self) -> u8 {
        (self.field12 & 0xFF) as u8
    }

    pub fn action_mode(&self) -> Option<ActionMode> {
        ActionMode::from_code((self.field12 >> 8) as u8)
    }

    pub fn group(&self) -> u8 {
        (self.field12 & 0xFF) as u8
    }

    /// Checks the opcode-specific sub-layout of `field12`.
    ///
    /// Returns a short description of the first violation.
    pub fn sub_field_violation(&self) -> Option<&'static str> {
        match self.opcode {
            OpCode::JumpIf if self.condition().is_none() => Some("reserved jump condition code"),
            OpCode::Loop if self.field12 >> 8 != 0 => Some("loop field bits [11:8] must be zero"),
            OpCode::Action if self.action_mode().is_none() => Some("reserved action mode"),
            OpCode::Wait if self.field12 != 0 => Some("wait field must be zero"),
            _ => None,
        }
    }
}

/// A packed 48-bit command word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodedCommand(u64);

impl EncodedCommand {
    /// Bits above 47 are discarded.
    pub fn new(bits: u64) -> Self {
        EncodedCommand(bits & WORD_MASK)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn opcode_nibble(self) -> u8 {
        (self.0 >> 44) as u8 & 0xF
    }

    pub fn to_be_bytes(self) -> [u8; COMMAND_BYTES] {
        let b = self.0.to_be_bytes();
        [b[2], b[3], b[4], b[5], b[6], b[7]]
    }

    pub fn from_be_bytes(bytes: [u8; COMMAND_BYTES]) -> Self {
        let mut b = [0u8; 8];
        b[2..].copy_from_slice(&bytes);
        EncodedCommand(u64::from_be_bytes(b))
    }
}

impl fmt::Display for EncodedCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:012X}", self.0)
    }
}

pub fn encode(cmd: &Command) -> EncodedCommand {
    EncodedCommand((cmd.opcode.nibble() as u64) << 44 | (cmd.field12 as u64) << 32 | cmd.operand as u64)
}

pub fn decode(word: EncodedCommand) -> Result<Command, IsaError> {
    let opcode = OpCode::from_nibble(word.opcode_nibble())?;
    Ok(Command {
        opcode,
        field12: ((word.0 >> 32) & FIELD12_MASK as u64) as u16,
        operand: word.0 as u32,
    })
}

/// Packs commands into a big-endian image, six bytes per command.
pub fn encode_image(commands: &[Command]) -> Vec<u8> {
    commands.iter().flat_map(|c| encode(c).to_be_bytes()).collect()
}

pub fn decode_image(bytes: &[u8]) -> Result<Vec<Command>, IsaError> {
    if !bytes.len().is_multiple_of(COMMAND_BYTES) {
        return Err(IsaError::TruncatedImage(bytes.len()));
    }
    bytes
        .chunks_exact(COMMAND_BYTES)
        .map(|chunk| {
            let word = EncodedCommand::from_be_bytes(chunk.try_into().expect("exact chunk"));
            decode(word)
        })
        .collect()
}
