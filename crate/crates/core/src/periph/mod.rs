//! Memory-mapped peripheral models and the address map that decodes into them.
//!
//! All register offsets are word offsets, matching the `field12` convention of
//! register-access commands.

mod baseline;
mod device;

pub use baseline::{
    BaselineCpuModel, BaselineEvent, BaselineState, BaselineStats, HandlerOutcome, RegisterPort, MAX_HANDLER_STEPS,
};
pub use device::{Device, Gpio, Scratch, Sensor, SensorMode, SensorSchedule, Timer};

use thiserror::Error;

use crate::fabric::EventFabric;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeriphError {
    #[error("peripheral `{0}` base address {1:#x} is not word aligned")]
    Misaligned(String, u32),
    #[error("peripheral `{0}` extends past the end of the address space")]
    Overflow(String),
    #[error("peripherals `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("peripheral `{0}`: {1}")]
    Invalid(String, String),
}

/// Error raised by the interconnect for an access no peripheral claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("no peripheral at address {0:#010x}")]
    Unmapped(u32),
    #[error("address {0:#010x} is not word aligned")]
    Misaligned(u32),
    #[error("address {address:#010x} is not reachable from bus segment {segment}")]
    OtherSegment { address: u32, segment: usize },
}

/// One peripheral instance at a fixed place in the address map.
#[derive(Debug, Clone)]
pub struct RegisterBlock {
    pub name: String,
    pub base: u32,
    pub segment: usize,
    pub device: Device,
}

impl RegisterBlock {
    pub fn new(name: impl Into<String>, base: u32, device: Device) -> Self {
        RegisterBlock {
            name: name.into(),
            base,
            segment: 0,
            device,
        }
    }

    pub fn on_segment(mut self, segment: usize) -> Self {
        self.segment = segment;
        self
    }

    pub fn size_words(&self) -> u32 {
        self.device.size_words()
    }

    /// One past the last byte address, as u64 so the top of memory is representable.
    pub fn end(&self) -> u64 {
        self.base as u64 + 4 * self.size_words() as u64
    }

    pub fn contains(&self, address: u32) -> bool {
        (self.base as u64..self.end()).contains(&(address as u64))
    }
}

/// Disjoint set of register blocks.
#[derive(Debug, Clone, Default)]
pub struct PeripheralMap {
    blocks: Vec<RegisterBlock>,
}

impl PeripheralMap {
    pub fn new(blocks: Vec<RegisterBlock>) -> Result<Self, PeriphError> {
        for b in &blocks {
            if b.base % 4 != 0 {
                return Err(PeriphError::Misaligned(b.name.clone(), b.base));
            }
            if b.end() > 1u64 << 32 {
                return Err(PeriphError::Overflow(b.name.clone()));
            }
            b.device
                .validate()
                .map_err(|msg| PeriphError::Invalid(b.name.clone(), msg))?;
        }
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.sort_by_key(|&i| blocks[i].base);
        for w in order.windows(2) {
            let (a, b) = (&blocks[w[0]], &blocks[w[1]]);
            if a.end() > b.base as u64 {
                return Err(PeriphError::Overlap(a.name.clone(), b.name.clone()));
            }
        }
        Ok(PeripheralMap { blocks })
    }

    pub fn blocks(&self) -> &[RegisterBlock] {
        &self.blocks
    }

    pub fn get(&self, name: &str) -> Option<&RegisterBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut RegisterBlock> {
        self.blocks.iter_mut().find(|b| b.name == name)
    }

    /// Block index and word offset for `address`. `segment = None` reaches every segment.
    pub fn decode(&self, address: u32, segment: Option<usize>) -> Result<(usize, u32), DecodeError> {
        if !address.is_multiple_of(4) {
            return Err(DecodeError::Misaligned(address));
        }
        let idx = self
            .blocks
            .iter()
            .position(|b| b.contains(address))
            .ok_or(DecodeError::Unmapped(address))?;
        let block = &self.blocks[idx];
        if let Some(seg) = segment {
            if block.segment != seg {
                return Err(DecodeError::OtherSegment { address, segment: seg });
            }
        }
        Ok((idx, (address - block.base) / 4))
    }

    pub fn read(&self, address: u32, segment: Option<usize>, cycle: u64) -> Result<u32, DecodeError> {
        let (idx, offset) = self.decode(address, segment)?;
        Ok(self.blocks[idx].device.read(offset, cycle))
    }

    /// Reads a register from any segment, for inspection outside a simulation.
    pub fn peek(&self, address: u32) -> Result<u32, DecodeError> {
        self.read(address, None, 0)
    }

    pub fn write(&mut self, address: u32, value: u32, segment: Option<usize>, cycle: u64) -> Result<(), DecodeError> {
        let (idx, offset) = self.decode(address, segment)?;
        self.blocks[idx].device.write(offset, value, cycle);
        Ok(())
    }

    /// Advances every device to `cycle`; event pulses land on `fabric`.
    pub fn tick(&mut self, cycle: u64, fabric: &mut EventFabric) {
        for b in &mut self.blocks {
            b.device.tick(cycle, fabric);
        }
    }

    /// Some device will still produce events after `cycle`.
    pub fn active_after(&self, cycle: u64) -> bool {
        self.blocks.iter().any(|b| b.device.active_after(cycle))
    }
}
