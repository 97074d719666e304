//! Memory-mapped interconnect: per-segment round-robin arbitration and address decode.
//!
//! A transfer granted in cycle `g` occupies its segment during cycles
//! `g+1 ..= g+T` and completes at the end of `g+T`, where `T` is the transfer
//! length (two cycles by default, setup + access). The segment can grant the
//! next request in the completion cycle itself, so back-to-back transfers on a
//! saturated segment are exactly `T` cycles apart.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::periph::{DecodeError, PeripheralMap, RegisterPort};

pub const DEFAULT_TRANSFER_CYCLES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusRequest {
    pub kind: BusKind,
    pub address: u32,
    /// Write data, ignored for reads.
    pub data: u32,
}

impl BusRequest {
    pub fn read(address: u32) -> Self {
        BusRequest {
            kind: BusKind::Read,
            address,
            data: 0,
        }
    }

    pub fn write(address: u32, data: u32) -> Self {
        BusRequest {
            kind: BusKind::Write,
            address,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusTransaction {
    pub master: usize,
    pub segment: usize,
    pub kind: BusKind,
    pub address: u32,
    pub data: u32,
    pub request_cycle: u64,
    pub issue_cycle: u64,
    pub complete_cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub txn: BusTransaction,
    /// Read data, or the written value for writes.
    pub result: Result<u32, DecodeError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusEvent {
    Granted(BusTransaction),
    Waiting {
        cycle: u64,
        master: usize,
        segment: usize,
        request: BusRequest,
    },
    Completed(Completion),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("bus needs at least one segment")]
    NoSegments,
    #[error("transfer length must be at least one cycle")]
    ZeroTransfer,
    #[error("master {master} is attached to segment {segment}, bus has {segments}")]
    BadSegment {
        master: usize,
        segment: usize,
        segments: usize,
    },
    #[error("peripheral `{name}` is on segment {segment}, bus has {segments}")]
    PeripheralSegment {
        name: String,
        segment: usize,
        segments: usize,
    },
    #[error("master {0} already has a request outstanding")]
    AlreadyPending(usize),
    #[error("unknown master {0}")]
    UnknownMaster(usize),
}

/// Round-robin grant state for one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arbiter {
    masters: usize,
    rr_pointer: usize,
}

impl Arbiter {
    /// Starts with the pointer on the last master so master 0 has first priority.
    pub fn new(masters: usize) -> Self {
        Arbiter {
            masters,
            rr_pointer: masters.saturating_sub(1),
        }
    }

    pub fn with_pointer(masters: usize, rr_pointer: usize) -> Self {
        Arbiter { masters, rr_pointer }
    }

    pub fn pointer(&self) -> usize {
        self.rr_pointer
    }

    pub fn masters(&self) -> usize {
        self.masters
    }

    /// Grants the first requester scanning from `rr_pointer + 1`, wrapping.
    pub fn arbitrate(&mut self, requests: &[usize]) -> Option<usize> {
        if self.masters == 0 {
            return None;
        }
        let granted = (1..=self.masters)
            .map(|k| (self.rr_pointer + k) % self.masters)
            .find(|m| requests.contains(m))?;
        self.rr_pointer = granted;
        Some(granted)
    }
}

pub fn arbitrate(state: &mut Arbiter, requests: &[usize]) -> Option<usize> {
    state.arbitrate(requests)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasterStats {
    pub reads: u64,
    pub writes: u64,
    pub errors: u64,
    /// Cycles from request to grant, counted per transfer.
    pub grant_waits: BTreeMap<u64, u64>,
    pub max_wait: u64,
}

impl MasterStats {
    pub fn transactions(&self) -> u64 {
        self.reads + self.writes
    }

    fn complete(&mut self, kind: BusKind, ok: bool) {
        match kind {
            BusKind::Read => self.reads += 1,
            BusKind::Write => self.writes += 1,
        }
        if !ok {
            self.errors += 1;
        }
    }
}

#[derive(Debug, Clone)]
struct Segment {
    arbiter: Arbiter,
    in_flight: Option<BusTransaction>,
}

#[derive(Debug, Clone)]
pub struct Bus {
    transfer_cycles: u64,
    segments: Vec<Segment>,
    master_segment: Vec<usize>,
    pending: Vec<Option<(BusRequest, u64)>>,
    stats: Vec<MasterStats>,
    map: PeripheralMap,
}

impl Bus {
    /// `master_segments[m]` is the segment master `m` is attached to.
    pub fn new(
        map: PeripheralMap,
        segments: usize,
        transfer_cycles: u64,
        master_segments: Vec<usize>,
    ) -> Result<Self, BusError> {
        if segments == 0 {
            return Err(BusError::NoSegments);
        }
        if transfer_cycles == 0 {
            return Err(BusError::ZeroTransfer);
        }
        for (master, &segment) in master_segments.iter().enumerate() {
            if segment >= segments {
                return Err(BusError::BadSegment {
                    master,
                    segment,
                    segments,
                });
            }
        }
        for b in map.blocks() {
            if b.segment >= segments {
                return Err(BusError::PeripheralSegment {
                    name: b.name.clone(),
                    segment: b.segment,
                    segments,
                });
            }
        }
        let masters = master_segments.len();
        Ok(Bus {
            transfer_cycles,
            segments: (0..segments)
                .map(|_| Segment {
                    arbiter: Arbiter::new(masters),
                    in_flight: None,
                })
                .collect(),
            master_segment: master_segments,
            pending: vec![None; masters],
            stats: vec![MasterStats::default(); masters],
            map,
        })
    }

    pub fn transfer_cycles(&self) -> u64 {
        self.transfer_cycles
    }

    pub fn segments(&self) -> usize {
        self.segments.len()
    }

    pub fn masters(&self) -> usize {
        self.master_segment.len()
    }

    pub fn segment_of(&self, master: usize) -> Option<usize> {
        self.master_segment.get(master).copied()
    }

    pub fn peripherals(&self) -> &PeripheralMap {
        &self.map
    }

    pub fn peripherals_mut(&mut self) -> &mut PeripheralMap {
        &mut self.map
    }

    pub fn stats(&self) -> &[MasterStats] {
        &self.stats
    }

    pub fn is_pending(&self, master: usize) -> bool {
        self.pending.get(master).is_some_and(|p| p.is_some())
    }

    /// Posts a request from `master` in `cycle`. It is considered for grant in the same cycle.
    pub fn request(&mut self, master: usize, req: BusRequest, cycle: u64) -> Result<(), BusError> {
        let slot = self.pending.get_mut(master).ok_or(BusError::UnknownMaster(master))?;
        if slot.is_some() {
            return Err(BusError::AlreadyPending(master));
        }
        *slot = Some((req, cycle));
        Ok(())
    }

    /// No pending requests and nothing in flight.
    pub fn idle(&self) -> bool {
        self.pending.iter().all(Option::is_none) && self.segments.iter().all(|s| s.in_flight.is_none())
    }

    /// Ends `cycle` on every segment: retires the transfer completing now,
    /// then grants the next requester if the segment is free.
    pub fn tick(&mut self, cycle: u64) -> Vec<BusEvent> {
        let mut events = Vec::new();
        for seg_idx in 0..self.segments.len() {
            if let Some(txn) = self.segments[seg_idx].in_flight {
                if txn.complete_cycle <= cycle {
                    self.segments[seg_idx].in_flight = None;
                    let result = match txn.kind {
                        BusKind::Read => self.map.read(txn.address, Some(seg_idx), cycle),
                        BusKind::Write => self
                            .map
                            .write(txn.address, txn.data, Some(seg_idx), cycle)
                            .map(|_| txn.data),
                    };
                    self.stats[txn.master].complete(txn.kind, result.is_ok());
                    events.push(BusEvent::Completed(Completion { txn, result }));
                }
            }

            let requesters: Vec<usize> = (0..self.pending.len())
                .filter(|&m| self.master_segment[m] == seg_idx && self.pending[m].is_some())
                .collect();
            if self.segments[seg_idx].in_flight.is_none() {
                if let Some(master) = self.segments[seg_idx].arbiter.arbitrate(&requesters) {
                    let (req, request_cycle) = self.pending[master].take().expect("requester");
                    let txn = BusTransaction {
                        master,
                        segment: seg_idx,
                        kind: req.kind,
                        address: req.address,
                        data: req.data,
                        request_cycle,
                        issue_cycle: cycle,
                        complete_cycle: cycle + self.transfer_cycles,
                    };
                    let wait = cycle - request_cycle;
                    let st = &mut self.stats[master];
                    *st.grant_waits.entry(wait).or_insert(0) += 1;
                    st.max_wait = st.max_wait.max(wait);
                    self.segments[seg_idx].in_flight = Some(txn);
                    events.push(BusEvent::Granted(txn));
                }
            }
            for m in requesters {
                if let Some((request, _)) = self.pending[m] {
                    events.push(BusEvent::Waiting {
                        cycle,
                        master: m,
                        segment: seg_idx,
                        request,
                    });
                }
            }
        }
        events
    }

    /// Performs an access immediately, outside arbitration, reaching every
    /// segment. Counted in `master`'s statistics.
    pub fn access_untimed(&mut self, master: usize, req: BusRequest, cycle: u64) -> Result<u32, DecodeError> {
        let result = match req.kind {
            BusKind::Read => self.map.read(req.address, None, cycle),
            BusKind::Write => self.map.write(req.address, req.data, None, cycle).map(|_| req.data),
        };
        if let Some(st) = self.stats.get_mut(master) {
            st.complete(req.kind, result.is_ok());
        }
        result
    }

    /// A [`RegisterPort`] view for `master` at `cycle`.
    pub fn port(&mut self, master: usize, cycle: u64) -> UntimedPort<'_> {
        UntimedPort {
            bus: self,
            master,
            cycle,
        }
    }
}

pub struct UntimedPort<'a> {
    bus: &'a mut Bus,
    master: usize,
    cycle: u64,
}

impl RegisterPort for UntimedPort<'_> {
    fn read(&mut self, address: u32) -> Result<u32, DecodeError> {
        self.bus
            .access_untimed(self.master, BusRequest::read(address), self.cycle)
    }

    fn write(&mut self, address: u32, value: u32) -> Result<(), DecodeError> {
        self.bus
            .access_untimed(self.master, BusRequest::write(address, value), self.cycle)
            .map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periph::{Device, RegisterBlock, Scratch};

    fn scratch_bus(masters: usize, transfer: u64) -> Bus {
        let mut s = Scratch::new(16);
        s.words[4] = 0xABCD;
        let map = PeripheralMap::new(vec![RegisterBlock::new("ram", 0x1000, Device::Scratch(s))]).unwrap();
        Bus::new(map, 1, transfer, vec![0; masters]).unwrap()
    }

    #[test]
    fn arbitrate_examples() {
        let mut a = Arbiter::with_pointer(3, 0);
        assert_eq!(arbitrate(&mut a, &[0, 1, 2]), Some(1));
        assert_eq!(a.pointer(), 1);

        let mut a = Arbiter::with_pointer(3, 2);
        assert_eq!(arbitrate(&mut a, &[0]), Some(0));

        let mut a = Arbiter::with_pointer(3, 1);
        assert_eq!(arbitrate(&mut a, &[]), None);
        assert_eq!(a.pointer(), 1);
    }

    #[test]
    fn reset_pointer_favours_master_zero() {
        let mut a = Arbiter::new(4);
        assert_eq!(a.arbitrate(&[0, 3]), Some(0));
        assert_eq!(a.arbitrate(&[0, 3]), Some(3));
        assert_eq!(a.arbitrate(&[0, 3]), Some(0));
    }

    fn run_until_complete(bus: &mut Bus, from: u64, to: u64) -> Vec<Completion> {
        (from..to)
            .flat_map(|c| bus.tick(c))
            .filter_map(|e| match e {
                BusEvent::Completed(c) => Some(c),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn uncontended_read_takes_two_cycles() {
        let mut bus = scratch_bus(1, 2);
        bus.request(0, BusRequest::read(0x1010), 2).unwrap();
        let done = run_until_complete(&mut bus, 2, 10);
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].txn.issue_cycle, 2);
        assert_eq!(done[0].txn.complete_cycle, 4);
        assert_eq!(done[0].result, Ok(0xABCD));
        assert!(bus.idle());
    }

    #[test]
    fn unmapped_write_is_a_decode_error() {
        let mut bus = scratch_bus(1, 2);
        bus.request(0, BusRequest::write(0xFFFF_0000, 1), 0).unwrap();
        let done = run_until_complete(&mut bus, 0, 5);
        assert_eq!(done[0].result, Err(DecodeError::Unmapped(0xFFFF_0000)));
        assert_eq!(bus.stats()[0].errors, 1);
    }

    #[test]
    fn simultaneous_reads_serialize() {
        let mut bus = scratch_bus(2, 2);
        bus.request(0, BusRequest::read(0x1000), 2).unwrap();
        bus.request(1, BusRequest::read(0x1004), 2).unwrap();
        let done = run_until_complete(&mut bus, 2, 12);
        assert_eq!(done.len(), 2);
        assert_eq!(done[1].txn.complete_cycle - done[0].txn.complete_cycle, 2);
        assert_eq!(bus.stats()[1].max_wait, 2);
    }

    #[test]
    fn double_request_rejected() {
        let mut bus = scratch_bus(1, 2);
        bus.request(0, BusRequest::read(0x1000), 0).unwrap();
        assert_eq!(
            bus.request(0, BusRequest::read(0x1000), 0),
            Err(BusError::AlreadyPending(0))
        );
        assert_eq!(
            bus.request(5, BusRequest::read(0x1000), 0),
            Err(BusError::UnknownMaster(5))
        );
    }

    #[test]
    fn segments_are_independent() {
        let map = PeripheralMap::new(vec![
            RegisterBlock::new("a", 0x1000, Device::Scratch(Scratch::new(4))),
            RegisterBlock::new("b", 0x2000, Device::Scratch(Scratch::new(4))).on_segment(1),
        ])
        .unwrap();
        let mut bus = Bus::new(map, 2, 2, vec![0, 1, 1]).unwrap();
        bus.request(0, BusRequest::write(0x1000, 1), 0).unwrap();
        bus.request(1, BusRequest::write(0x2000, 2), 0).unwrap();
        bus.request(2, BusRequest::write(0x1004, 3), 0).unwrap();
        let done = run_until_complete(&mut bus, 0, 10);
        let by_master: BTreeMap<usize, &Completion> = done.iter().map(|c| (c.txn.master, c)).collect();
        assert_eq!(by_master[&0].txn.complete_cycle, 2);
        assert_eq!(by_master[&1].txn.complete_cycle, 2);
        // master 2 waits behind master 1 on segment 1, then cannot reach segment 0
        assert_eq!(by_master[&2].txn.complete_cycle, 4);
        assert!(matches!(by_master[&2].result, Err(DecodeError::OtherSegment { .. })));
    }

    #[test]
    fn bad_configuration() {
        let map = PeripheralMap::default();
        assert_eq!(Bus::new(map.clone(), 0, 2, vec![]).unwrap_err(), BusError::NoSegments);
        assert_eq!(Bus::new(map.clone(), 1, 0, vec![]).unwrap_err(), BusError::ZeroTransfer);
        assert!(matches!(
            Bus::new(map, 1, 2, vec![0, 1]),
            Err(BusError::BadSegment { master: 1, .. })
        ));
    }

    /// Saturating masters that re-request the cycle after each completion.
    fn saturate(masters: usize, transfer: u64, cycles: u64) -> (Vec<BusTransaction>, Bus) {
        let mut bus = scratch_bus(masters, transfer);
        let mut grants = Vec::new();
        let mut ready: Vec<Option<u64>> = vec![Some(0); masters];
        for c in 0..cycles {
            for (m, r) in ready.iter_mut().enumerate() {
                if r.is_some_and(|at| at <= c) {
                    bus.request(m, BusRequest::read(0x1000), c).unwrap();
                    *r = None;
                }
            }
            for e in bus.tick(c) {
                match e {
                    BusEvent::Granted(t) => grants.push(t),
                    BusEvent::Completed(done) => ready[done.txn.master] = Some(c + 1),
                    BusEvent::Waiting { .. } => {}
                }
            }
        }
        (grants, bus)
    }

    #[test]
    fn saturated_bus_is_fair_and_bounded() {
        let (grants, bus) = saturate(8, 2, 2000);
        for w in grants.windows(2) {
            assert_eq!(w[1].issue_cycle - w[0].issue_cycle, 2);
        }
        for w in grants.windows(8) {
            let mut masters: Vec<usize> = w.iter().map(|t| t.master).collect();
            masters.sort();
            assert_eq!(masters, (0..8).collect::<Vec<_>>());
        }
        for st in bus.stats() {
            assert!(st.max_wait <= 7 * 2);
        }
    }

    #[test]
    fn untimed_access_counts() {
        let mut bus = scratch_bus(2, 2);
        assert_eq!(bus.access_untimed(1, BusRequest::read(0x1010), 0), Ok(0xABCD));
        let mut port = bus.port(1, 0);
        port.write(0x1000, 5).unwrap();
        assert_eq!(port.read(0x1000), Ok(5));
        assert_eq!(bus.stats()[1].transactions(), 3);
    }
}
