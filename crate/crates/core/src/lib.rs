//! Cycle-accurate simulator of a peripheral event linking system.
//!
//! Independent *links* watch a broadcast vector of single-wire event lines.
//! When a link's trigger condition fires it runs a short microcode program
//! from its private memory, either driving output event lines directly
//! (instant actions) or performing read-modify-write sequences on
//! memory-mapped peripheral registers over a round-robin arbitrated bus
//! (sequenced actions).
//!
//! | module | contents |
//! |--------|----------|
//! | [`isa`] | command set and the 48-bit binary encoding |
//! | [`asm`] | assembler, validator and disassembler for `.pels` sources |
//! | [`fabric`], [`link`], [`sim`] | event lines, links and the global clock |
//! | [`bus`] | interconnect, arbitration and address decode |
//! | [`periph`] | GPIO, timer, sensor and scratch models, plus the baseline interrupt-driven core |
//! | [`scenario`], [`report`], [`trace`], [`sweep`], [`cli`] | JSON scenarios, reports, JSON Lines traces, configuration sweeps and the `pels` command line |

pub mod asm;
pub mod bus;
pub mod cli;
pub mod fabric;
pub mod isa;
pub mod link;
pub mod periph;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod trace;
