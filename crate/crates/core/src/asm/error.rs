use std::fmt;

use thiserror::Error;

/// 1-based line/column of a token in `.pels` source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub fn new(line: usize, column: usize) -> Self {
        Location { line, column }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntaxKind {
    UnknownMnemonic,
    Arity,
    BadLiteral,
    DuplicateLabel,
    BadOperand,
}

impl SyntaxKind {
    pub fn code(self) -> &'static str {
        match self {
            SyntaxKind::UnknownMnemonic => "E101",
            SyntaxKind::Arity => "E102",
            SyntaxKind::BadLiteral => "E103",
            SyntaxKind::DuplicateLabel => "E104",
            SyntaxKind::BadOperand => "E105",
        }
    }
}

fn at(loc: &Option<Location>) -> String {
    match loc {
        Some(l) => format!("{l}: "),
        None => String::new(),
    }
}

/// Diagnostics from parsing, assembling and capacity checks.
///
/// Every variant has a stable code, see [`AsmError::code`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("{location}: error[{}]: {message}", kind.code())]
    Syntax {
        location: Location,
        kind: SyntaxKind,
        message: String,
    },
    #[error("{location}: error[E201]: undefined label `{label}`")]
    UndefinedLabel { location: Location, label: String },
    #[error(
        "{}error[E202]: line {line} targets index {target}, program has {len} commands",
        at(location)
    )]
    TargetOutOfRange {
        location: Option<Location>,
        line: usize,
        target: usize,
        len: usize,
    },
    #[error(
        "{}error[E203]: loop at index {inner} lies inside the body of loop at index {outer}",
        at(location)
    )]
    NestedLoop {
        location: Option<Location>,
        inner: usize,
        outer: usize,
    },
    #[error("{location}: error[E204]: value {value:#x} does not fit in {bits} bits")]
    OperandWidth { location: Location, value: u64, bits: u32 },
    #[error("{}error[E205]: loop at index {line} targets later index {target}", at(location))]
    LoopTargetForward {
        location: Option<Location>,
        line: usize,
        target: usize,
    },
    #[error("error[E206]: program has {len} commands, at most {max} are addressable")]
    ProgramTooLong { len: usize, max: usize },
    #[error("error[E207]: command at index {line}: {reason}")]
    InvalidField { line: usize, reason: &'static str },
    #[error("error[E301]: program of {len} commands does not fit a {capacity}-line SCM")]
    CapacityExceeded { len: usize, capacity: usize },
}

impl AsmError {
    pub fn code(&self) -> &'static str {
        match self {
            AsmError::Syntax { kind, .. } => kind.code(),
            AsmError::UndefinedLabel { .. } => "E201",
            AsmError::TargetOutOfRange { .. } => "E202",
            AsmError::NestedLoop { .. } => "E203",
            AsmError::OperandWidth { .. } => "E204",
            AsmError::LoopTargetForward { .. } => "E205",
            AsmError::ProgramTooLong { .. } => "E206",
            AsmError::InvalidField { .. } => "E207",
            AsmError::CapacityExceeded { .. } => "E301",
        }
    }

    pub fn location(&self) -> Option<Location> {
        match self {
            AsmError::Syntax { location, .. }
            | AsmError::UndefinedLabel { location, .. }
            | AsmError::OperandWidth { location, .. } => Some(*location),
            AsmError::TargetOutOfRange { location, .. }
            | AsmError::NestedLoop { location, .. }
            | AsmError::LoopTargetForward { location, .. } => *location,
            _ => None,
        }
    }

    pub(crate) fn syntax(location: Location, kind: SyntaxKind, message: impl Into<String>) -> Self {
        AsmError::Syntax {
            location,
            kind,
            message: message.into(),
        }
    }
}
