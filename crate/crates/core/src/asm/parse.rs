//! Line-oriented parser for `.pels` microcode source.
//!
//! ```text
//! # threshold check after sensor readout
//!         capture 0x0, 0xfff
//!         jif ltu, 0x200, done
//!         write 0x4, 0x1
//! done:   action grp0.set, 0b1
//! ```

use std::collections::HashSet;

use super::error::{AsmError, Location, SyntaxKind};
use crate::isa::{ActionMode, Condition, OpCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub value: u64,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Label { name: String, location: Location },
    Index(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    /// `write`, `set`, `clear`, `toggle` and `capture`.
    Register {
        opcode: OpCode,
        offset: Literal,
        value: Literal,
    },
    JumpIf {
        condition: Condition,
        operand: Literal,
        target: Target,
    },
    Loop {
        count: Literal,
        target: Target,
    },
    Wait {
        cycles: Literal,
    },
    Action {
        group: Literal,
        mode: ActionMode,
        bits: Literal,
    },
}

impl Statement {
    pub fn opcode(&self) -> OpCode {
        match self {
            Statement::Register { opcode, .. } => *opcode,
            Statement::JumpIf { .. } => OpCode::JumpIf,
            Statement::Loop { .. } => OpCode::Loop,
            Statement::Wait { .. } => OpCode::Wait,
            Statement::Action { .. } => OpCode::Action,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    /// Labels naming this command.
    pub labels: Vec<String>,
    pub statement: Statement,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceProgram {
    pub lines: Vec<SourceLine>,
    /// Labels after the last command. They name index `lines.len()`.
    pub trailing_labels: Vec<(String, Location)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Word(&'a str),
    Colon,
    Comma,
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<(Tok<'_>, Location)>, AsmError> {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut toks = Vec::new();
    let bytes = code.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let loc = Location::new(lineno, i + 1);
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b':' {
            toks.push((Tok::Colon, loc));
            i += 1;
        } else if c == b',' {
            toks.push((Tok::Comma, loc));
            i += 1;
        } else if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            toks.push((Tok::Word(&code[start..i]), loc));
        } else {
            let ch = code[i..].chars().next().unwrap_or('?');
            return Err(AsmError::syntax(
                loc,
                SyntaxKind::BadOperand,
                format!("unexpected character `{ch}`"),
            ));
        }
    }
    Ok(toks)
}

fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses a decimal, `0x` hexadecimal or `0b` binary literal. `_` separators are allowed.
pub fn parse_literal(word: &str, location: Location) -> Result<Literal, AsmError> {
    let bad = |msg: String| AsmError::syntax(location, SyntaxKind::BadLiteral, msg);
    let (digits, radix) = if let Some(rest) = word.strip_prefix("0x").or(word.strip_prefix("0X")) {
        (rest, 16)
    } else if let Some(rest) = word.strip_prefix("0b").or(word.strip_prefix("0B")) {
        (rest, 2)
    } else {
        (word, 10)
    };
    let cleaned: String = digits.chars().filter(|&c| c != '_').collect();
    if cleaned.is_empty() {
        return Err(bad(format!("malformed literal `{word}`")));
    }
    match u64::from_str_radix(&cleaned, radix) {
        Ok(value) => Ok(Literal { value, location }),
        Err(e) if matches!(e.kind(), std::num::IntErrorKind::PosOverflow) => {
            Err(bad(format!("literal `{word}` is out of range")))
        }
        Err(_) => Err(bad(format!("malformed literal `{word}`"))),
    }
}

fn parse_target(word: &str, location: Location) -> Result<Target, AsmError> {
    if word.starts_with(|c: char| c.is_ascii_digit()) {
        Ok(Target::Index(parse_literal(word, location)?))
    } else if is_identifier(word) {
        Ok(Target::Label {
            name: word.to_string(),
            location,
        })
    } else {
        Err(AsmError::syntax(
            location,
            SyntaxKind::BadOperand,
            format!("expected a label or line index, found `{word}`"),
        ))
    }
}

fn parse_group(word: &str, location: Location) -> Result<(Literal, ActionMode), AsmError> {
    let bad = || {
        AsmError::syntax(
            location,
            SyntaxKind::BadOperand,
            format!("expected `grp<N>.set` or `grp<N>.toggle`, found `{word}`"),
        )
    };
    let rest = word.strip_prefix("grp").ok_or_else(bad)?;
    let (index, mode) = rest.split_once('.').ok_or_else(bad)?;
    if index.is_empty() || !index.starts_with(|c: char| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mode = match mode {
        "set" => ActionMode::Set,
        "toggle" => ActionMode::Toggle,
        _ => return Err(bad()),
    };
    let group = parse_literal(index, Location::new(location.line, location.column + 3))?;
    Ok((group, mode))
}

fn mnemonic(word: &str) -> Option<OpCode> {
    OpCode::ALL.into_iter().find(|op| op.mnemonic() == word)
}

fn arity(op: OpCode) -> usize {
    match op {
        OpCode::JumpIf => 3,
        OpCode::Wait => 1,
        _ => 2,
    }
}

fn parse_statement(op: OpCode, args: &[(&str, Location)], location: Location) -> Result<Statement, AsmError> {
    if args.len() != arity(op) {
        return Err(AsmError::syntax(
            location,
            SyntaxKind::Arity,
            format!(
                "`{}` takes {} operand(s), found {}",
                op.mnemonic(),
                arity(op),
                args.len()
            ),
        ));
    }
    let lit = |i: usize| parse_literal(args[i].0, args[i].1);
    Ok(match op {
        OpCode::Write | OpCode::Set | OpCode::Clear | OpCode::Toggle | OpCode::Capture => Statement::Register {
            opcode: op,
            offset: lit(0)?,
            value: lit(1)?,
        },
        OpCode::JumpIf => {
            let (name, loc) = args[0];
            let condition = Condition::from_name(name).ok_or_else(|| {
                AsmError::syntax(
                    loc,
                    SyntaxKind::BadOperand,
                    format!("unknown condition `{name}`, expected eq, ne, ltu or geu"),
                )
            })?;
            Statement::JumpIf {
                condition,
                operand: lit(1)?,
                target: parse_target(args[2].0, args[2].1)?,
            }
        }
        OpCode::Loop => Statement::Loop {
            count: lit(0)?,
            target: parse_target(args[1].0, args[1].1)?,
        },
        OpCode::Wait => Statement::Wait { cycles: lit(0)? },
        OpCode::Action => {
            let (group, mode) = parse_group(args[0].0, args[0].1)?;
            Statement::Action {
                group,
                mode,
                bits: lit(1)?,
            }
        }
    })
}

pub fn parse(text: &str) -> Result<SourceProgram, AsmError> {
    let mut program = SourceProgram::default();
    let mut pending: Vec<(String, Location)> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let toks = tokenize(raw, idx + 1)?;
        let mut i = 0;
        while let (Some((Tok::Word(w), loc)), Some((Tok::Colon, _))) = (toks.get(i), toks.get(i + 1)) {
            if !is_identifier(w) {
                return Err(AsmError::syntax(
                    *loc,
                    SyntaxKind::BadOperand,
                    format!("invalid label name `{w}`"),
                ));
            }
            if !seen.insert(w.to_string()) {
                return Err(AsmError::syntax(
                    *loc,
                    SyntaxKind::DuplicateLabel,
                    format!("label `{w}` is already defined"),
                ));
            }
            pending.push((w.to_string(), *loc));
            i += 2;
        }
        let Some((head, location)) = toks.get(i) else {
            continue;
        };
        let Tok::Word(word) = head else {
            return Err(AsmError::syntax(
                *location,
                SyntaxKind::BadOperand,
                "expected a mnemonic",
            ));
        };
        let op = mnemonic(word).ok_or_else(|| {
            AsmError::syntax(
                *location,
                SyntaxKind::UnknownMnemonic,
                format!("unknown mnemonic `{word}`"),
            )
        })?;

        let mut args: Vec<(&str, Location)> = Vec::new();
        let mut expect_operand = true;
        for (tok, loc) in &toks[i + 1..] {
            match (tok, expect_operand) {
                (Tok::Word(w), true) => {
                    args.push((w, *loc));
                    expect_operand = false;
                }
                (Tok::Comma, false) => expect_operand = true,
                (Tok::Word(w), false) => {
                    return Err(AsmError::syntax(
                        *loc,
                        SyntaxKind::BadOperand,
                        format!("expected `,` before `{w}`"),
                    ))
                }
                (_, _) => return Err(AsmError::syntax(*loc, SyntaxKind::BadOperand, "expected an operand")),
            }
        }
        if expect_operand && !args.is_empty() {
            return Err(AsmError::syntax(
                Location::new(idx + 1, raw.len()),
                SyntaxKind::BadOperand,
                "trailing `,`",
            ));
        }

        let statement = parse_statement(op, &args, *location)?;
        program.lines.push(SourceLine {
            labels: pending.drain(..).map(|(l, _)| l).collect(),
            statement,
            location: *location,
        });
    }
    program.trailing_labels = pending;
    Ok(program)
}
