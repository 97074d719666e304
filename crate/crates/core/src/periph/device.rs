use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fabric::EventFabric;

/// General-purpose output pins.
///
/// | offset | register | behaviour                     |
/// |--------|----------|-------------------------------|
/// | 0      | OUT      | read/write pin vector         |
/// | 1      | SET      | write-1-to-set, reads 0       |
/// | 2      | CLR      | write-1-to-clear, reads 0     |
/// | 3      | TGL      | write-1-to-toggle, reads 0    |
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gpio {
    pub pins: u32,
}

impl Gpio {
    pub const OUT: u32 = 0;
    pub const SET: u32 = 1;
    pub const CLR: u32 = 2;
    pub const TGL: u32 = 3;

    pub fn new() -> Self {
        Gpio::default()
    }

    fn read(&self, offset: u32) -> u32 {
        match offset {
            Gpio::OUT => self.pins,
            _ => 0,
        }
    }

    fn write(&mut self, offset: u32, value: u32) {
        match offset {
            Gpio::OUT => self.pins = value,
            Gpio::SET => self.pins |= value,
            Gpio::CLR => self.pins &= !value,
            Gpio::TGL => self.pins ^= value,
            _ => {}
        }
    }
}

/// Free-running compare timer with an overflow event output.
///
/// | offset | register | behaviour                         |
/// |--------|----------|-----------------------------------|
/// | 0      | CTRL     | bit 0 enables counting            |
/// | 1      | PERIOD   | compare value, must be non-zero   |
/// | 2      | COUNT    | current count, read-only          |
///
/// Once enabled, the count increments every cycle. When it reaches `PERIOD`
/// the event line pulses for one cycle and the count wraps to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timer {
    pub period: u32,
    pub event_line: Option<usize>,
    /// Last cycle on which the timer may pulse.
    pub until: Option<u64>,
    enabled: bool,
    started_at: u64,
    count: u32,
    pulses: u64,
}

impl Timer {
    pub const CTRL: u32 = 0;
    pub const PERIOD: u32 = 1;
    pub const COUNT: u32 = 2;

    pub fn new(period: u32, event_line: Option<usize>) -> Self {
        Timer {
            period,
            event_line,
            until: None,
            enabled: false,
            started_at: 0,
            count: 0,
            pulses: 0,
        }
    }

    /// Enables counting from `cycle`; the first increment happens at `cycle + 1`.
    pub fn enable_at(&mut self, cycle: u64) {
        self.enabled = true;
        self.started_at = cycle;
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn pulses(&self) -> u64 {
        self.pulses
    }

    fn live(&self, cycle: u64) -> bool {
        self.enabled && self.period > 0 && self.until.is_none_or(|u| cycle <= u)
    }

    fn tick(&mut self, cycle: u64, fabric: &mut EventFabric) {
        if !self.live(cycle) || cycle <= self.started_at {
            return;
        }
        self.count += 1;
        if self.count >= self.period {
            self.count = 0;
            self.pulses += 1;
            if let Some(line) = self.event_line {
                fabric.pulse(line);
            }
        }
    }

    fn read(&self, offset: u32) -> u32 {
        match offset {
            Timer::CTRL => self.enabled as u32,
            Timer::PERIOD => self.period,
            Timer::COUNT => self.count,
            _ => 0,
        }
    }

    fn write(&mut self, offset: u32, value: u32, cycle: u64) {
        match offset {
            Timer::CTRL => {
                let on = value & 1 == 1;
                if on && !self.enabled {
                    self.enable_at(cycle);
                } else if !on {
                    self.enabled = false;
                }
            }
            Timer::PERIOD => self.period = value,
            _ => {}
        }
    }
}

/// Sample values over time, sorted by cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SensorSchedule(Vec<(u64, u32)>);

impl SensorSchedule {
    pub fn new(mut samples: Vec<(u64, u32)>) -> Self {
        samples.sort_by_key(|&(c, _)| c);
        SensorSchedule(samples)
    }

    /// `samples` values in `[0, max_value]`, one per `spacing`-cycle window at a
    /// random offset inside the window. Same seed, same schedule.
    pub fn random(seed: u64, samples: usize, spacing: u64, max_value: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spacing = spacing.max(1);
        let out = (0..samples as u64)
            .map(|k| {
                let cycle = k * spacing + rng.random_range(0..spacing);
                (cycle, rng.random_range(0..=max_value))
            })
            .collect();
        SensorSchedule(out)
    }

    pub fn samples(&self) -> &[(u64, u32)] {
        &self.0
    }

    /// Most recent value at or before `cycle`, zero before the first sample.
    pub fn value_at(&self, cycle: u64) -> u32 {
        let idx = self.0.partition_point(|&(c, _)| c <= cycle);
        if idx == 0 {
            0
        } else {
            self.0[idx - 1].1
        }
    }

    fn landing_at(&self, cycle: u64) -> bool {
        self.0.binary_search_by_key(&cycle, |&(c, _)| c).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorMode {
    /// DATA follows the schedule; every sample landing pulses the event line.
    Continuous,
    /// DATA latches the scheduled value when a conversion is started, either by
    /// writing START or by a rising edge on `start_line` (an action output line).
    Triggered {
        start_line: Option<usize>,
        conversion_cycles: u32,
    },
}

/// A sensor or ADC front end with a scheduled sample stream.
///
/// | offset | register | behaviour                          |
/// |--------|----------|------------------------------------|
/// | 0      | DATA     | latest sample, read-only           |
/// | 1      | START    | any write starts a conversion      |
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sensor {
    pub schedule: SensorSchedule,
    pub mode: SensorMode,
    pub event_line: Option<usize>,
    data: u32,
    start_level: bool,
    in_flight: Vec<(u64, u32)>,
    conversions: u64,
}

impl Sensor {
    pub const DATA: u32 = 0;
    pub const START: u32 = 1;

    pub fn new(schedule: SensorSchedule, mode: SensorMode, event_line: Option<usize>) -> Self {
        Sensor {
            schedule,
            mode,
            event_line,
            data: 0,
            start_level: false,
            in_flight: Vec::new(),
            conversions: 0,
        }
    }

    pub fn data(&self) -> u32 {
        self.data
    }

    pub fn conversions(&self) -> u64 {
        self.conversions
    }

    fn start(&mut self, cycle: u64) {
        if let SensorMode::Triggered { conversion_cycles, .. } = self.mode {
            let value = self.schedule.value_at(cycle);
            self.in_flight.push((cycle + conversion_cycles as u64, value));
        }
    }

    fn tick(&mut self, cycle: u64, fabric: &mut EventFabric) {
        let landed = match self.mode {
            SensorMode::Continuous => {
                self.data = self.schedule.value_at(cycle);
                self.schedule.landing_at(cycle)
            }
            SensorMode::Triggered { start_line, .. } => {
                if let Some(line) = start_line {
                    let level = fabric.outputs().contains(line);
                    if level && !self.start_level {
                        self.start(cycle);
                    }
                    self.start_level = level;
                }
                let mut landed = false;
                let mut i = 0;
                while i < self.in_flight.len() {
                    if self.in_flight[i].0 <= cycle {
                        self.data = self.in_flight.remove(i).1;
                        self.conversions += 1;
                        landed = true;
                    } else {
                        i += 1;
                    }
                }
                landed
            }
        };
        if landed {
            if let Some(line) = self.event_line {
                fabric.pulse(line);
            }
        }
    }

    fn active_after(&self, cycle: u64) -> bool {
        match self.mode {
            SensorMode::Continuous => {
                self.event_line.is_some() && self.schedule.samples().last().is_some_and(|&(c, _)| c > cycle)
            }
            SensorMode::Triggered { .. } => !self.in_flight.is_empty(),
        }
    }

    fn read(&self, offset: u32) -> u32 {
        match offset {
            Sensor::DATA => self.data,
            _ => 0,
        }
    }

    fn write(&mut self, offset: u32, cycle: u64) {
        if offset == Sensor::START {
            self.start(cycle);
        }
    }
}

/// Plain read/write registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scratch {
    pub words: Vec<u32>,
}

impl Scratch {
    pub fn new(size_words: u32) -> Self {
        Scratch {
            words: vec![0; size_words as usize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Device {
    Gpio(Gpio),
    Timer(Timer),
    Sensor(Sensor),
    Scratch(Scratch),
}

impl Device {
    pub fn size_words(&self) -> u32 {
        match self {
            Device::Gpio(_) => 4,
            Device::Timer(_) => 3,
            Device::Sensor(_) => 2,
            Device::Scratch(s) => s.words.len() as u32,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Device::Gpio(_) => "gpio",
            Device::Timer(_) => "timer",
            Device::Sensor(_) => "sensor",
            Device::Scratch(_) => "scratch",
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            Device::Timer(t) if t.period == 0 => Err("timer period must be non-zero".into()),
            Device::Sensor(Sensor {
                mode: SensorMode::Triggered {
                    conversion_cycles: 0, ..
                },
                ..
            }) => Err("conversion takes at least one cycle".into()),
            Device::Scratch(s) if s.words.is_empty() => Err("scratch block needs at least one word".into()),
            _ => Ok(()),
        }
    }

    pub fn read(&self, offset: u32, _cycle: u64) -> u32 {
        match self {
            Device::Gpio(g) => g.read(offset),
            Device::Timer(t) => t.read(offset),
            Device::Sensor(s) => s.read(offset),
            Device::Scratch(s) => s.words.get(offset as usize).copied().unwrap_or(0),
        }
    }

    pub fn write(&mut self, offset: u32, value: u32, cycle: u64) {
        match self {
            Device::Gpio(g) => g.write(offset, value),
            Device::Timer(t) => t.write(offset, value, cycle),
            Device::Sensor(s) => s.write(offset, cycle),
            Device::Scratch(s) => {
                if let Some(w) = s.words.get_mut(offset as usize) {
                    *w = value;
                }
            }
        }
    }

    pub fn tick(&mut self, cycle: u64, fabric: &mut EventFabric) {
        match self {
            Device::Timer(t) => t.tick(cycle, fabric),
            Device::Sensor(s) => s.tick(cycle, fabric),
            Device::Gpio(_) | Device::Scratch(_) => {}
        }
    }

    pub fn active_after(&self, cycle: u64) -> bool {
        match self {
            Device::Timer(t) => t.event_line.is_some() && t.live(cycle + 1),
            Device::Sensor(s) => s.active_after(cycle),
            Device::Gpio(_) | Device::Scratch(_) => false,
        }
    }
}
