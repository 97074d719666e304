use std::collections::HashMap;

use super::error::{AsmError, Location};
use super::parse::{Literal, SourceProgram, Statement, Target};
use crate::isa::{self, Command, IsaError, OpCode};

/// Longest program the 8-bit target field can address.
pub const MAX_PROGRAM_LEN: usize = 256;

/// A validated command sequence. Execution starts at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    commands: Vec<Command>,
}

impl Program {
    /// Validates `commands`: length bound, opcode sub-fields, targets in range,
    /// backward non-nested loops.
    pub fn new(commands: Vec<Command>) -> Result<Self, AsmError> {
        validate(&commands, None)?;
        Ok(Program { commands })
    }

    pub fn empty() -> Self {
        Program::default()
    }

    pub fn commands(&self) -> &[Command] {
        &self.commands
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn to_image(&self) -> Vec<u8> {
        isa::encode_image(&self.commands)
    }

    pub fn from_image(bytes: &[u8]) -> Result<Self, ImageError> {
        let commands = isa::decode_image(bytes)?;
        Ok(Program::new(commands)?)
    }

    pub fn validate_against_capacity(&self, scm_lines: usize) -> Result<(), AsmError> {
        validate_against_capacity(self, scm_lines)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error(transparent)]
    Decode(#[from] IsaError),
    #[error(transparent)]
    Invalid(#[from] AsmError),
}

/// Program fits an SCM with `scm_lines` lines.
pub fn validate_against_capacity(prog: &Program, scm_lines: usize) -> Result<(), AsmError> {
    // targets are already < len, so the length check covers them
    if prog.len() > scm_lines {
        return Err(AsmError::CapacityExceeded {
            len: prog.len(),
            capacity: scm_lines,
        });
    }
    Ok(())
}

fn validate(commands: &[Command], locations: Option<&[Location]>) -> Result<(), AsmError> {
    let loc = |i: usize| locations.map(|l| l[i]);
    let len = commands.len();
    if len > MAX_PROGRAM_LEN {
        return Err(AsmError::ProgramTooLong {
            len,
            max: MAX_PROGRAM_LEN,
        });
    }
    let mut last_loop: Option<usize> = None;
    for (i, cmd) in commands.iter().enumerate() {
        if let Some(reason) = cmd.sub_field_violation() {
            return Err(AsmError::InvalidField { line: i, reason });
        }
        if !cmd.opcode.has_target() {
            continue;
        }
        let target = cmd.target() as usize;
        if target >= len {
            return Err(AsmError::TargetOutOfRange {
                location: loc(i),
                line: i,
                target,
                len,
            });
        }
        if cmd.opcode == OpCode::Loop {
            if target > i {
                return Err(AsmError::LoopTargetForward {
                    location: loc(i),
                    line: i,
                    target,
                });
            }
            // body is [target, i]; the previous loop must lie before it
            if let Some(prev) = last_loop.filter(|&p| p >= target) {
                return Err(AsmError::NestedLoop {
                    location: loc(prev),
                    inner: prev,
                    outer: i,
                });
            }
            last_loop = Some(i);
        }
    }
    Ok(())
}

fn fit(lit: &Literal, bits: u32) -> Result<u64, AsmError> {
    if bits < 64 && lit.value >> bits != 0 {
        return Err(AsmError::OperandWidth {
            location: lit.location,
            value: lit.value,
            bits,
        });
    }
    Ok(lit.value)
}

/// Resolves labels and packs a parsed program into validated commands.
pub fn assemble(src: &SourceProgram) -> Result<Program, AsmError> {
    let mut labels: HashMap<&str, usize> = HashMap::new();
    for (i, line) in src.lines.iter().enumerate() {
        for l in &line.labels {
            labels.insert(l, i);
        }
    }
    for (l, _) in &src.trailing_labels {
        labels.insert(l, src.lines.len());
    }

    let resolve = |target: &Target| -> Result<u8, AsmError> {
        let (index, location) = match target {
            Target::Label { name, location } => {
                let idx = *labels.get(name.as_str()).ok_or_else(|| AsmError::UndefinedLabel {
                    location: *location,
                    label: name.clone(),
                })?;
                (idx as u64, *location)
            }
            Target::Index(lit) => (lit.value, lit.location),
        };
        if index >= src.lines.len() as u64 || index > u8::MAX as u64 {
            return Err(AsmError::TargetOutOfRange {
                location: Some(location),
                line: 0,
                target: index.min(usize::MAX as u64) as usize,
                len: src.lines.len(),
            });
        }
        Ok(index as u8)
    };

    let mut commands = Vec::with_capacity(src.lines.len());
    for (i, line) in src.lines.iter().enumerate() {
        let cmd = match &line.statement {
            Statement::Register { opcode, offset, value } => {
                Command::new(*opcode, fit(offset, 12)? as u16, fit(value, 32)? as u32)
                    .expect("offset checked to 12 bits")
            }
            Statement::JumpIf {
                condition,
                operand,
                target,
            } => Command::jump_if(
                *condition,
                fit(operand, 32)? as u32,
                resolve(target).map_err(|e| fix_line(e, i))?,
            ),
            Statement::Loop { count, target } => {
                Command::loop_back(fit(count, 32)? as u32, resolve(target).map_err(|e| fix_line(e, i))?)
            }
            Statement::Wait { cycles } => Command::wait(fit(cycles, 32)? as u32),
            Statement::Action { group, mode, bits } => {
                Command::action(*mode, fit(group, 8)? as u8, fit(bits, 32)? as u32)
            }
        };
        commands.push(cmd);
    }

    let locations: Vec<Location> = src.lines.iter().map(|l| l.location).collect();
    validate(&commands, Some(&locations))?;
    Ok(Program { commands })
}

fn fix_line(err: AsmError, line: usize) -> AsmError {
    match err {
        AsmError::TargetOutOfRange {
            location, target, len, ..
        } => AsmError::TargetOutOfRange {
            location,
            line,
            target,
            len,
        },
        other => other,
    }
}

/// Parses and assembles in one step.
pub fn assemble_str(text: &str) -> Result<Program, AsmError> {
    assemble(&super::parse::parse(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{ActionMode, Condition};

    #[test]
    fn threshold_readout_program() {
        let src = "\
            capture 0x0, 0xffff
            jif ltu, 0x200, done
            write 0x4, 0x1
      done: action grp0.set, 0b1
        ";
        let prog = assemble_str(src).unwrap();
        assert_eq!(prog.len(), 4);
        assert_eq!(prog.commands()[1], Command::jump_if(Condition::Ltu, 0x200, 3));
        assert_eq!(prog.commands()[3], Command::action(ActionMode::Set, 0, 1));
    }

    #[test]
    fn nested_loop_rejected() {
        let src = "\
        outer: wait 1
        inner: wait 2
               loop 1, inner
               loop 3, outer
        ";
        let err = assemble_str(src).unwrap_err();
        assert_eq!(err.code(), "E203");
        assert_eq!(err.location().map(|l| l.line), Some(3));
    }

    #[test]
    fn sequential_loops_allowed() {
        let src = "a: wait 1\nloop 1, a\nb: wait 1\nloop 2, b";
        assert_eq!(assemble_str(src).unwrap().len(), 4);
    }

    #[test]
    fn self_loop_allowed() {
        let prog = assemble_str("spin: loop 3, spin").unwrap();
        assert_eq!(prog.commands()[0], Command::loop_back(3, 0));
    }

    #[test]
    fn empty_source_is_empty_program() {
        assert!(assemble_str("").unwrap().is_empty());
        assert!(assemble_str("# just a comment").unwrap().is_empty());
    }

    #[test]
    fn undefined_label() {
        let err = assemble_str("jif eq, 0, nowhere").unwrap_err();
        assert_eq!(err.code(), "E201");
    }

    #[test]
    fn target_out_of_range() {
        assert_eq!(assemble_str("jif eq, 0, 5").unwrap_err().code(), "E202");
        // a trailing label names the index past the end
        assert_eq!(assemble_str("jif eq, 0, end\nwait 1\nend:").unwrap_err().code(), "E202");
    }

    #[test]
    fn forward_loop_rejected() {
        assert_eq!(assemble_str("loop 1, next\nnext: wait 1").unwrap_err().code(), "E205");
    }

    #[test]
    fn operand_width() {
        let err = assemble_str("set 0x1000, 1").unwrap_err();
        assert_eq!(err.code(), "E204");
        assert_eq!(err.location(), Some(Location::new(1, 5)));
        assert_eq!(assemble_str("write 0, 0x1_0000_0000").unwrap_err().code(), "E204");
        assert_eq!(assemble_str("action grp256.set, 1").unwrap_err().code(), "E204");
        assert_eq!(assemble_str("wait 0x1_0000_0000").unwrap_err().code(), "E204");
    }

    #[test]
    fn capacity() {
        let four = assemble_str("wait 1\nwait 1\nwait 1\nwait 1").unwrap();
        assert!(validate_against_capacity(&four, 4).is_ok());
        let five = assemble_str("wait 1\nwait 1\nwait 1\nwait 1\nwait 1").unwrap();
        assert_eq!(
            validate_against_capacity(&five, 4),
            Err(AsmError::CapacityExceeded { len: 5, capacity: 4 })
        );
        let eight = Program::new(vec![Command::wait(0); 8]).unwrap();
        assert!(validate_against_capacity(&eight, 8).is_ok());
    }

    #[test]
    fn too_long() {
        let err = Program::new(vec![Command::wait(0); MAX_PROGRAM_LEN + 1]).unwrap_err();
        assert_eq!(err.code(), "E206");
        assert!(Program::new(vec![Command::wait(0); MAX_PROGRAM_LEN]).is_ok());
    }

    #[test]
    fn raw_commands_are_validated() {
        let bad_cond = Command::new(OpCode::JumpIf, 0x500, 0).unwrap();
        assert_eq!(Program::new(vec![bad_cond]).unwrap_err().code(), "E207");
        let far = Command::jump_if(Condition::Eq, 0, 1);
        assert_eq!(Program::new(vec![far]).unwrap_err().code(), "E202");
    }

    #[test]
    fn image_roundtrip() {
        let prog = assemble_str("capture 0, 0xff\njif geu, 3, 0\naction grp1.toggle, 2").unwrap();
        let image = prog.to_image();
        assert_eq!(image.len(), 18);
        assert_eq!(Program::from_image(&image).unwrap(), prog);
        assert!(matches!(
            Program::from_image(&[0u8; 6]),
            Err(ImageError::Decode(IsaError::UndefinedOpcode(0)))
        ));
    }
}
