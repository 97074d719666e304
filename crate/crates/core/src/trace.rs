//! Cycle-stamped trace records and their JSON Lines encoding.
//!
//! Every record is one JSON object per line with a `type` tag first. Field
//! order is fixed by the struct definitions, so a trace is byte-identical
//! across runs of the same scenario.

use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bus::BusKind;
use crate::link::FsmState;

pub const TRACE_FORMAT: &str = "pels-trace";
pub const TRACE_VERSION: u32 = 1;

/// Environment variable selecting the trace level.
pub const TRACE_LEVEL_ENV: &str = "PELS_TRACE_LEVEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    /// Header and end record only.
    Off,
    /// Adds bus grant records.
    Grants,
    /// Everything.
    #[default]
    Full,
}

impl FromStr for TraceLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" => Ok(TraceLevel::Off),
            "grants" => Ok(TraceLevel::Grants),
            "full" => Ok(TraceLevel::Full),
            other => Err(format!("unknown trace level `{other}`, expected off, grants or full")),
        }
    }
}

impl TraceLevel {
    /// Reads [`TRACE_LEVEL_ENV`]; unset means `full`.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(TRACE_LEVEL_ENV) {
            Ok(v) => v.parse(),
            Err(_) => Ok(TraceLevel::Full),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Quiescent,
    ClockLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrantStatus {
    Granted,
    Waiting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        format: String,
        version: u32,
        scenario: String,
        links: usize,
        masters: usize,
        level: TraceLevel,
    },
    Stimulus {
        cycle: u64,
        line: usize,
        level: Option<bool>,
    },
    Trigger {
        cycle: u64,
        link: usize,
        token: Option<u64>,
        accepted: bool,
    },
    Link {
        cycle: u64,
        link: usize,
        state: FsmState,
        pc: usize,
        fifo: usize,
    },
    Exec {
        cycle: u64,
        link: usize,
        pc: usize,
        op: String,
    },
    Outputs {
        cycle: u64,
        lines: String,
    },
    Bus {
        cycle: u64,
        master: usize,
        segment: usize,
        kind: BusKind,
        address: String,
        data: String,
        status: GrantStatus,
    },
    BusDone {
        cycle: u64,
        master: usize,
        kind: BusKind,
        address: String,
        data: Option<String>,
        error: Option<String>,
    },
    Complete {
        cycle: u64,
        link: usize,
        token: u64,
        latency: u64,
    },
    Abort {
        cycle: u64,
        link: usize,
        token: u64,
        error: String,
    },
    Irq {
        cycle: u64,
    },
    BaselineDone {
        cycle: u64,
        latency: Option<u64>,
        error: Option<String>,
    },
    End {
        cycle: u64,
        reason: EndReason,
    },
}

impl TraceRecord {
    pub fn cycle(&self) -> Option<u64> {
        match self {
            TraceRecord::Header { .. } => None,
            TraceRecord::Stimulus { cycle, .. }
            | TraceRecord::Trigger { cycle, .. }
            | TraceRecord::Link { cycle, .. }
            | TraceRecord::Exec { cycle, .. }
            | TraceRecord::Outputs { cycle, .. }
            | TraceRecord::Bus { cycle, .. }
            | TraceRecord::BusDone { cycle, .. }
            | TraceRecord::Complete { cycle, .. }
            | TraceRecord::Abort { cycle, .. }
            | TraceRecord::Irq { cycle }
            | TraceRecord::BaselineDone { cycle, .. }
            | TraceRecord::End { cycle, .. } => Some(*cycle),
        }
    }

    /// Lowest level at which the record is kept.
    pub fn level(&self) -> TraceLevel {
        match self {
            TraceRecord::Header { .. } | TraceRecord::End { .. } => TraceLevel::Off,
            TraceRecord::Bus { .. } => TraceLevel::Grants,
            _ => TraceLevel::Full,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

pub fn hex32(v: u32) -> String {
    format!("{v:#010x}")
}

/// Writes `records` as JSON Lines.
pub fn emit_trace<W: Write>(records: &[TraceRecord], sink: &mut W) -> io::Result<()> {
    for r in records {
        sink.write_all(r.to_line().as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

/// Hex SHA-256 of the JSON Lines encoding.
pub fn digest(records: &[TraceRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(r.to_line().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Parses a JSON Lines trace.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_tagged_with_stable_field_order() {
        let r = TraceRecord::Complete {
            cycle: 7,
            link: 0,
            token: 0,
            latency: 7,
        };
        assert_eq!(
            r.to_line(),
            r#"{"type":"complete","cycle":7,"link":0,"token":0,"latency":7}"#
        );
        let end = TraceRecord::End {
            cycle: 3,
            reason: EndReason::ClockLimit,
        };
        assert_eq!(end.to_line(), r#"{"type":"end","cycle":3,"reason":"clock_limit"}"#);
    }

    #[test]
    fn emit_and_parse_round_trip() {
        let records = vec![
            TraceRecord::Header {
                format: TRACE_FORMAT.into(),
                version: TRACE_VERSION,
                scenario: "t".into(),
                links: 1,
                masters: 1,
                level: TraceLevel::Full,
            },
            TraceRecord::Bus {
                cycle: 2,
                master: 0,
                segment: 0,
                kind: BusKind::Read,
                address: hex32(0x1000),
                data: hex32(0),
                status: GrantStatus::Granted,
            },
            TraceRecord::End {
                cycle: 8,
                reason: EndReason::Quiescent,
            },
        ];
        let mut buf = Vec::new();
        emit_trace(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_trace(&text).unwrap(), records);
        assert_eq!(digest(&records), digest(&parse_trace(&text).unwrap()));
        assert_eq!(digest(&records).len(), 64);
    }

    #[test]
    fn levels_parse() {
        assert_eq!("grants".parse::<TraceLevel>(), Ok(TraceLevel::Grants));
        assert_eq!(" OFF ".parse::<TraceLevel>(), Ok(TraceLevel::Off));
        assert!("verbose".parse::<TraceLevel>().is_err());
    }

    #[test]
    fn sink_errors_surface() {
        struct Broken;
        impl Write for Broken {
            fn write(&mut self, _: &[u8]) -> io::Result<usize> {
                Err(io::Error::other("disk full"))
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        let err = emit_trace(&[TraceRecord::Irq { cycle: 0 }], &mut Broken).unwrap_err();
        assert_eq!(err.to_string(), "disk full");
    }
}
