//! Textual microcode: parser, assembler, disassembler and capacity checks.
//!
//! Grammar, one command per line:
//!
//! | form                              | command  |
//! |-----------------------------------|----------|
//! | `write <off>, <value>`            | write    |
//! | `set/clear/toggle <off>, <mask>`  | RMW      |
//! | `capture <off>, <mask>`           | capture  |
//! | `jif <eq/ne/ltu/geu>, <v>, <tgt>` | jump-if  |
//! | `loop <count>, <tgt>`             | loop     |
//! | `wait <cycles>`                   | wait     |
//! | `action grp<g>.<set/toggle>, <b>` | action   |
//!
//! `#` starts a comment, `name:` defines a label, targets are labels or line indices.

mod disasm;
mod error;
mod parse;
mod program;

pub use disasm::{disassemble, render};
pub use error::{AsmError, Location, SyntaxKind};
pub use parse::{parse, parse_literal, Literal, SourceLine, SourceProgram, Statement, Target};
pub use program::{assemble, assemble_str, validate_against_capacity, ImageError, Program, MAX_PROGRAM_LEN};
