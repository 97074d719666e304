//! Single-wire event lines: peripheral-driven inputs, action outputs and loopback routing.

use std::fmt;
use std::ops::{BitAnd, BitOr, BitOrAssign, BitXor, Not};

use thiserror::Error;

/// Widest supported input or output vector.
pub const MAX_LINES: usize = 128;

/// Action outputs are organised in groups of this many lines.
pub const GROUP_WIDTH: usize = 32;

/// A set of event lines, bit `i` is line `i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineSet(pub u128);

impl LineSet {
    pub const EMPTY: LineSet = LineSet(0);

    pub fn from_lines<I: IntoIterator<Item = usize>>(lines: I) -> Self {
        let mut set = LineSet::EMPTY;
        for l in lines {
            set.insert(l);
        }
        set
    }

    pub fn single(line: usize) -> Self {
        LineSet::from_lines([line])
    }

    pub fn contains(self, line: usize) -> bool {
        line < MAX_LINES && (self.0 >> line) & 1 == 1
    }

    pub fn insert(&mut self, line: usize) {
        assert!(line < MAX_LINES, "event line {line} out of range");
        self.0 |= 1u128 << line;
    }

    pub fn set(&mut self, line: usize, level: bool) {
        assert!(line < MAX_LINES, "event line {line} out of range");
        if level {
            self.0 |= 1u128 << line;
        } else {
            self.0 &= !(1u128 << line);
        }
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_LINES).filter(move |&l| self.contains(l))
    }

    /// The 32 lines of group `g`, line `32*g` in bit 0.
    pub fn group(self, g: usize) -> u32 {
        (self.0 >> (g * GROUP_WIDTH)) as u32
    }

    pub fn set_group(&mut self, g: usize, bits: u32) {
        let shift = g * GROUP_WIDTH;
        self.0 = (self.0 & !((u32::MAX as u128) << shift)) | ((bits as u128) << shift);
    }

    /// Lines below `width`.
    pub fn below(width: usize) -> Self {
        if width >= MAX_LINES {
            LineSet(u128::MAX)
        } else {
            LineSet((1u128 << width) - 1)
        }
    }
}

impl fmt::Display for LineSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl BitAnd for LineSet {
    type Output = LineSet;
    fn bitand(self, rhs: Self) -> Self {
        LineSet(self.0 & rhs.0)
    }
}

impl BitOr for LineSet {
    type Output = LineSet;
    fn bitor(self, rhs: Self) -> Self {
        LineSet(self.0 | rhs.0)
    }
}

impl BitOrAssign for LineSet {
    fn bitor_assign(&mut self, rhs: Self) {
        self.0 |= rhs.0;
    }
}

impl BitXor for LineSet {
    type Output = LineSet;
    fn bitxor(self, rhs: Self) -> Self {
        LineSet(self.0 ^ rhs.0)
    }
}

impl Not for LineSet {
    type Output = LineSet;
    fn not(self) -> Self {
        LineSet(!self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("{what} width {width} exceeds {MAX_LINES} lines")]
    TooWide { what: &'static str, width: usize },
    #[error("output width {0} is not a positive multiple of {GROUP_WIDTH}")]
    OutputGroups(usize),
    #[error("loopback output line {0} is outside the output vector")]
    LoopbackOutput(usize),
    #[error("loopback input line {0} is outside the input vector")]
    LoopbackInput(usize),
    #[error("action group {group} out of range, {groups} group(s) available")]
    GroupOutOfRange { group: usize, groups: usize },
}

/// The event-line fabric shared by all links.
///
/// Input lines are the OR of externally held levels, one-cycle peripheral
/// pulses and loopback-routed outputs from the previous cycle. Inputs are
/// broadcast: every link sees the same vector in the same cycle.
#[derive(Debug, Clone)]
pub struct EventFabric {
    input_width: usize,
    output_width: usize,
    loopback: Vec<(usize, usize)>,
    levels: LineSet,
    pulses: LineSet,
    looped: LineSet,
    inputs: LineSet,
    outputs: LineSet,
}

impl EventFabric {
    pub fn new(input_width: usize, output_width: usize, loopback: Vec<(usize, usize)>) -> Result<Self, FabricError> {
        if input_width > MAX_LINES {
            return Err(FabricError::TooWide {
                what: "input",
                width: input_width,
            });
        }
        if output_width > MAX_LINES {
            return Err(FabricError::TooWide {
                what: "output",
                width: output_width,
            });
        }
        if output_width == 0 || !output_width.is_multiple_of(GROUP_WIDTH) {
            return Err(FabricError::OutputGroups(output_width));
        }
        for &(out, inp) in &loopback {
            if out >= output_width {
                return Err(FabricError::LoopbackOutput(out));
            }
            if inp >= input_width {
                return Err(FabricError::LoopbackInput(inp));
            }
        }
        Ok(EventFabric {
            input_width,
            output_width,
            loopback,
            levels: LineSet::EMPTY,
            pulses: LineSet::EMPTY,
            looped: LineSet::EMPTY,
            inputs: LineSet::EMPTY,
            outputs: LineSet::EMPTY,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn groups(&self) -> usize {
        self.output_width / GROUP_WIDTH
    }

    pub fn loopback(&self) -> &[(usize, usize)] {
        &self.loopback
    }

    /// Starts a cycle: registers the previous cycle's outputs into the
    /// loopback inputs and clears pulses.
    pub fn begin_cycle(&mut self) {
        let mut looped = LineSet::EMPTY;
        for &(out, inp) in &self.loopback {
            if self.outputs.contains(out) {
                looped.insert(inp);
            }
        }
        self.looped = looped;
        self.pulses = LineSet::EMPTY;
        self.settle();
    }

    /// Holds an input line at `level` until changed.
    pub fn set_level(&mut self, line: usize, level: bool) {
        if line < self.input_width {
            self.levels.set(line, level);
            self.settle();
        }
    }

    /// Asserts an input line for the current cycle only.
    pub fn pulse(&mut self, line: usize) {
        if line < self.input_width {
            self.pulses.insert(line);
            self.settle();
        }
    }

    fn settle(&mut self) {
        self.inputs = self.levels | self.pulses | self.looped;
    }

    pub fn inputs(&self) -> LineSet {
        self.inputs
    }

    /// Lines carrying a fresh one-cycle pulse this cycle.
    pub fn pulses(&self) -> LineSet {
        self.pulses
    }

    pub fn outputs(&self) -> LineSet {
        self.outputs
    }

    /// Output changes not yet visible on the loopback inputs.
    pub fn loopback_pending(&self) -> bool {
        self.loopback
            .iter()
            .any(|&(out, inp)| self.outputs.contains(out) != self.looped.contains(inp))
    }

    pub fn drive_group(&mut self, group: usize, mode: crate::isa::ActionMode, bits: u32) -> Result<(), FabricError> {
        if group >= self.groups() {
            return Err(FabricError::GroupOutOfRange {
                group,
                groups: self.groups(),
            });
        }
        let old = self.outputs.group(group);
        let new = match mode {
            crate::isa::ActionMode::Set => bits,
            crate::isa::ActionMode::Toggle => old ^ bits,
        };
        self.outputs.set_group(group, new);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::ActionMode;

    #[test]
    fn group_level_write_and_toggle() {
        let mut f = EventFabric::new(8, 32, vec![]).unwrap();
        f.drive_group(0, ActionMode::Set, 0b0011).unwrap();
        assert_eq!(f.outputs().group(0), 0b0011);
        f.drive_group(0, ActionMode::Toggle, 0b0010).unwrap();
        assert_eq!(f.outputs().group(0), 0b0001);
        f.drive_group(0, ActionMode::Set, 0b0100).unwrap();
        assert_eq!(f.outputs().group(0), 0b0100);
        assert_eq!(
            f.drive_group(1, ActionMode::Set, 1),
            Err(FabricError::GroupOutOfRange { group: 1, groups: 1 })
        );
    }

    #[test]
    fn groups_are_independent() {
        let mut f = EventFabric::new(8, 96, vec![]).unwrap();
        f.drive_group(1, ActionMode::Set, 0xFFFF_FFFF).unwrap();
        f.drive_group(2, ActionMode::Set, 0x1).unwrap();
        assert_eq!(f.outputs().group(0), 0);
        assert!(f.outputs().contains(32) && f.outputs().contains(63) && f.outputs().contains(64));
        f.drive_group(1, ActionMode::Set, 0).unwrap();
        assert_eq!(f.outputs(), LineSet::single(64));
    }

    #[test]
    fn loopback_is_registered_one_cycle() {
        let mut f = EventFabric::new(8, 32, vec![(0, 5)]).unwrap();
        f.begin_cycle();
        f.drive_group(0, ActionMode::Set, 1).unwrap();
        assert!(!f.inputs().contains(5));
        assert!(f.loopback_pending());
        f.begin_cycle();
        assert!(f.inputs().contains(5));
        assert!(!f.loopback_pending());
    }

    #[test]
    fn pulses_last_one_cycle() {
        let mut f = EventFabric::new(8, 32, vec![]).unwrap();
        f.begin_cycle();
        f.pulse(2);
        f.set_level(3, true);
        assert_eq!(f.inputs(), LineSet::from_lines([2, 3]));
        assert_eq!(f.pulses(), LineSet::single(2));
        f.begin_cycle();
        assert_eq!(f.inputs(), LineSet::single(3));
    }

    #[test]
    fn config_errors() {
        assert!(EventFabric::new(129, 32, vec![]).is_err());
        assert_eq!(
            EventFabric::new(8, 20, vec![]).unwrap_err(),
            FabricError::OutputGroups(20)
        );
        assert_eq!(
            EventFabric::new(8, 32, vec![(32, 0)]).unwrap_err(),
            FabricError::LoopbackOutput(32)
        );
        assert_eq!(
            EventFabric::new(8, 32, vec![(0, 8)]).unwrap_err(),
            FabricError::LoopbackInput(8)
        );
    }
}
