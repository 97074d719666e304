use std::collections::BTreeSet;
use std::fmt::Write;

use super::program::Program;
use crate::isa::{Command, OpCode};

/// Renders a program as `.pels` source. Jump and loop targets get `L<index>` labels.
pub fn disassemble(prog: &Program) -> String {
    let targets: BTreeSet<u8> = prog
        .commands()
        .iter()
        .filter(|c| c.opcode.has_target())
        .map(|c| c.target())
        .collect();

    let mut out = String::new();
    for (i, cmd) in prog.commands().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if targets.contains(&(i as u8)) {
            let _ = write!(out, "L{i}: ");
        }
        out.push_str(&render(cmd));
    }
    out
}

/// One command as source text, without a label.
pub fn render(cmd: &Command) -> String {
    let op = cmd.opcode.mnemonic();
    match cmd.opcode {
        OpCode::Write | OpCode::Set | OpCode::Clear | OpCode::Toggle | OpCode::Capture => {
            format!("{op} {:#x}, {:#x}", cmd.offset(), cmd.operand)
        }
        OpCode::JumpIf => match cmd.condition() {
            Some(cond) => format!("{op} {}, {:#x}, L{}", cond.name(), cmd.operand, cmd.target()),
            None => format!("# {op} <reserved condition> {:#05x}, {:#x}", cmd.field12(), cmd.operand),
        },
        OpCode::Loop => format!("{op} {}, L{}", cmd.operand, cmd.target()),
        OpCode::Wait => format!("{op} {}", cmd.operand),
        OpCode::Action => match cmd.action_mode() {
            Some(mode) => format!("{op} grp{}.{}, {:#x}", cmd.group(), mode.name(), cmd.operand),
            None => format!("# {op} <reserved mode> {:#05x}, {:#x}", cmd.field12(), cmd.operand),
        },
    }
}
