//! Channel impairments and clear channel assessment.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::SimError;
use crate::mac::ChannelState;
use crate::modem::IqBuffer;

/// Received energy of a peer transmission, in units of the CCA threshold
/// scale. Two-node links are short enough that the peer always arrives at
/// unit power.
pub const PEER_ENERGY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMode {
    /// Octets pass through untouched; no PHY processing.
    Lossless,
    /// Each received chip decision is inverted with probability `p`.
    ChipFlip(f64),
    /// Gaussian noise of this standard deviation (sample units) on every
    /// I and Q sample.
    SampleAwgn(f64),
}

/// Half-open interval `[start, end)` of symbol times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusyInterval {
    pub start: u64,
    pub end: u64,
}

impl BusyInterval {
    pub fn contains(&self, t: u64) -> bool {
        (self.start..self.end).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    /// Data transmission attempts (0-based, counted over the whole session)
    /// whose ACK is dropped.
    pub ack_drop_pattern: Vec<u64>,
    pub busy_schedule: Vec<BusyInterval>,
    pub seed: u64,
    /// One-way delay in symbols.
    pub propagation_delay: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            mode: ChannelMode::Lossless,
            ack_drop_pattern: Vec::new(),
            busy_schedule: Vec::new(),
            seed: 0,
            propagation_delay: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        match self.mode {
            ChannelMode::ChipFlip(p) if !(0.0..=1.0).contains(&p) => {
                return Err(SimError::Config { key: "chip_flip_p".into(), reason: format!("{p} not in [0, 1]") })
            }
            ChannelMode::SampleAwgn(s) if !(s >= 0.0 && s.is_finite()) => {
                return Err(SimError::Config { key: "awgn_sigma".into(), reason: format!("{s} is not a non-negative number") })
            }
            _ => {}
        }
        if let Some(b) = self.busy_schedule.iter().find(|b| b.end < b.start) {
            return Err(SimError::Config { key: "busy".into(), reason: format!("interval {}-{} ends before it starts", b.start, b.end) });
        }
        Ok(())
    }
}

/// A signal at one of the two points where impairments apply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Signal {
    Chips(Vec<u8>),
    Samples(IqBuffer),
}

/// Applies the channel's impairment. Lossless mode passes either kind.
pub fn apply_impairment<R: Rng + ?Sized>(signal: Signal, chan: &ChannelConfig, rng: &mut R) -> Result<Signal, SimError> {
    match (chan.mode, signal) {
        (ChannelMode::Lossless, s) => Ok(s),
        (ChannelMode::ChipFlip(p), Signal::Chips(mut chips)) => {
            flip_chips(&mut chips, p, rng);
            Ok(Signal::Chips(chips))
        }
        (ChannelMode::SampleAwgn(sigma), Signal::Samples(mut buf)) => {
            add_noise(&mut buf, sigma, rng);
            Ok(Signal::Samples(buf))
        }
        _ => Err(SimError::ModeMismatch),
    }
}

/// Flips each chip with probability `p`; returns the number flipped.
pub fn flip_chips<R: Rng + ?Sized>(chips: &mut [u8], p: f64, rng: &mut R) -> usize {
    let mut flipped = 0;
    for c in chips.iter_mut() {
        if rng.random_bool(p) {
            *c ^= 1;
            flipped += 1;
        }
    }
    flipped
}

/// Adds Gaussian noise with saturating 16-bit arithmetic.
pub fn add_noise<R: Rng + ?Sized>(buf: &mut IqBuffer, sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut perturb = |s: &mut i16| {
        let v = f64::from(*s) + normal.sample(rng);
        *s = v.round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16;
    };
    buf.i_mut().iter_mut().for_each(&mut perturb);
    buf.q_mut().iter_mut().for_each(&mut perturb);
}

/// A transmission on the air, for energy detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activity {
    pub start: u64,
    pub end: u64,
    pub energy: f64,
}

/// Energy-detection CCA at one symbol time.
pub fn cca_read(chan: &ChannelConfig, activity: &[Activity], symbol_time: u64, threshold: f64) -> ChannelState {
    let scheduled = chan.busy_schedule.iter().any(|b| b.contains(symbol_time));
    let energy: f64 = activity
        .iter()
        .filter(|a| (a.start..a.end).contains(&symbol_time))
        .map(|a| a.energy)
        .sum();
    if scheduled || energy > threshold {
        ChannelState::Busy
    } else {
        ChannelState::Idle
    }
}
