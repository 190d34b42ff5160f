//! O-QPSK modem with half-sine pulse shaping over 16-bit I/Q samples.
//!
//! Timing: two samples per chip period Tc, so each half-sine pulse (2Tc)
//! spans four samples and the Q channel trails I by two samples. Even
//! chips go to I, odd chips to Q, and chip `c` starts at sample `2c`.

use std::f64::consts::PI;

use num_rational::Ratio;
use thiserror::Error;

use crate::spreading::{ChipTable, ChipSequence, DataSymbol, CHIPS_PER_SYMBOL};

pub const SAMPLES_PER_HALF_SINE: usize = 4;
pub const SAMPLES_PER_CHIP: usize = 2;
/// Delay of the Q channel relative to I, in samples (one chip period).
pub const Q_OFFSET: usize = 2;
pub const SAMPLES_PER_SYMBOL: usize = CHIPS_PER_SYMBOL * SAMPLES_PER_CHIP;

/// Minimum despreading agreement for a symbol to count during acquisition.
pub const ACQUISITION_MIN_SCORE: u32 = 24;
/// Zero symbols that must precede the SFD for a lock.
pub const ACQUISITION_MIN_PREAMBLE: usize = 4;
const PREAMBLE_SYMBOLS: usize = 8;
const SFD_SYMBOLS: [u8; 2] = [7, 10];

const Q15: i64 = 1 << 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModemError {
    #[error("buffer too short: {needed} samples needed, {available} available")]
    BufferTooShort { needed: usize, available: usize },
    #[error("no preamble and SFD found")]
    AcquisitionFailed,
    #[error("I and Q channels differ in length ({i} vs {q})")]
    ChannelLengthMismatch { i: usize, q: usize },
    #[error("invalid modem configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModemConfig {
    /// Chips per second.
    pub chip_rate: u32,
    /// Peak of the half-sine pulse.
    pub amplitude: i16,
    /// Carrier frequency for passband mixing, in Hz.
    pub if_frequency: f64,
}

impl Default for ModemConfig {
    fn default() -> Self {
        let chip_rate = 2_000_000;
        Self {
            chip_rate,
            amplitude: 23170,
            if_frequency: f64::from(chip_rate * SAMPLES_PER_CHIP as u32) / 4.0,
        }
    }
}

impl ModemConfig {
    pub fn sample_rate(&self) -> u32 {
        self.chip_rate * SAMPLES_PER_CHIP as u32
    }

    pub fn validate(&self) -> Result<(), ModemError> {
        if self.chip_rate == 0 {
            return Err(ModemError::InvalidConfig("chip_rate must be positive".into()));
        }
        if self.amplitude <= 0 {
            return Err(ModemError::InvalidConfig("amplitude must be positive".into()));
        }
        let nyquist = f64::from(self.sample_rate()) / 2.0;
        if !(0.0..=nyquist).contains(&self.if_frequency) {
            return Err(ModemError::InvalidConfig(format!(
                "if_frequency {} outside [0, {nyquist}]",
                self.if_frequency
            )));
        }
        Ok(())
    }

    /// Samples of a positive half-sine pulse, taken at phases
    /// pi * (k + 0.5) / 4.
    pub fn half_sine(&self) -> [i16; SAMPLES_PER_HALF_SINE] {
        let a = f64::from(self.amplitude);
        std::array::from_fn(|k| (a * (PI * (k as f64 + 0.5) / SAMPLES_PER_HALF_SINE as f64).sin()).round() as i16)
    }
}

/// Paired I and Q sample streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IqBuffer {
    i: Vec<i16>,
    q: Vec<i16>,
    sample_rate: u32,
}

impl IqBuffer {
    pub fn new(i: Vec<i16>, q: Vec<i16>, sample_rate: u32) -> Result<Self, ModemError> {
        if i.len() != q.len() {
            return Err(ModemError::ChannelLengthMismatch { i: i.len(), q: q.len() });
        }
        Ok(Self { i, q, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self { i: vec![0; len], q: vec![0; len], sample_rate }
    }

    pub fn i(&self) -> &[i16] {
        &self.i
    }

    pub fn q(&self) -> &[i16] {
        &self.q
    }

    pub fn i_mut(&mut self) -> &mut [i16] {
        &mut self.i
    }

    pub fn q_mut(&mut self) -> &mut [i16] {
        &mut self.q
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    /// Air time of the chips carried by a modulated buffer: its length less
    /// the Q tail, over the sample rate. Exact.
    pub fn airtime(&self) -> Ratio<u64> {
        Ratio::new(self.len().saturating_sub(Q_OFFSET) as u64, u64::from(self.sample_rate))
    }

    /// Prepends `n` zero samples to both channels.
    pub fn delayed(&self, n: usize) -> Self {
        let pad = |v: &[i16]| std::iter::repeat_n(0, n).chain(v.iter().copied()).collect();
        Self { i: pad(&self.i), q: pad(&self.q), sample_rate: self.sample_rate }
    }

    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self { i: self.i[..len].to_vec(), q: self.q[..len].to_vec(), sample_rate: self.sample_rate }
    }

    /// Samples interleaved as I, Q pairs.
    pub fn interleaved(&self) -> impl Iterator<Item = i16> + '_ {
        self.i.iter().zip(&self.q).flat_map(|(&i, &q)| [i, q])
    }
}

/// Output of [`modulate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Modulated {
    pub buffer: IqBuffer,
    /// A zero chip was appended to make the chip count even.
    pub padded: bool,
}

/// Exact air time of `octets` octets at the configured chip rate.
pub fn octet_airtime(octets: usize, cfg: &ModemConfig) -> Ratio<u64> {
    Ratio::new((octets * 2 * CHIPS_PER_SYMBOL) as u64, u64::from(cfg.chip_rate))
}

pub fn modulate(chips: &[u8], cfg: &ModemConfig) -> Modulated {
    let padded = chips.len() % 2 == 1;
    let pairs = chips.len().div_ceil(2);
    let len = if pairs == 0 { 0 } else { pairs * SAMPLES_PER_HALF_SINE + Q_OFFSET };
    let pulse = cfg.half_sine();
    let mut buffer = IqBuffer::zeros(len, cfg.sample_rate());

    for (c, &chip) in chips.iter().enumerate() {
        let start = c * SAMPLES_PER_CHIP;
        let channel = if c % 2 == 0 { &mut buffer.i } else { &mut buffer.q };
        for (slot, &p) in channel[start..start + SAMPLES_PER_HALF_SINE].iter_mut().zip(&pulse) {
            *slot = if chip != 0 { p } else { -p };
        }
    }
    if padded {
        let start = chips.len() * SAMPLES_PER_CHIP;
        for (slot, &p) in buffer.q[start..start + SAMPLES_PER_HALF_SINE].iter_mut().zip(&pulse) {
            *slot = -p;
        }
    }
    Modulated { buffer, padded }
}

fn div_round(x: i64, d: i64) -> i64 {
    if x >= 0 {
        (x + d / 2) / d
    } else {
        -((-x + d / 2) / d)
    }
}

fn saturate(x: i64) -> i16 {
    x.clamp(i64::from(i16::MIN), i64::from(i16::MAX)) as i16
}

/// Quadrature carrier at sample `n` as Q15 (cos, sin); unity is 1 << 15.
pub fn carrier(n: usize, cfg: &ModemConfig) -> (i64, i64) {
    let cycles = (cfg.if_frequency * n as f64 / f64::from(cfg.sample_rate())).fract();
    let phase = 2.0 * PI * cycles;
    (
        (phase.cos() * Q15 as f64).round() as i64,
        (phase.sin() * Q15 as f64).round() as i64,
    )
}

/// Up-converts baseband I/Q to a real passband signal:
/// `out[n] = (i[n] cos - q[n] sin)`, with Q15 carriers.
pub fn mix_up(buf: &IqBuffer, cfg: &ModemConfig) -> Vec<i16> {
    buf.i
        .iter()
        .zip(&buf.q)
        .enumerate()
        .map(|(n, (&i, &q))| {
            let (c, s) = carrier(n, cfg);
            saturate(div_round(i64::from(i) * c - i64::from(q) * s, Q15))
        })
        .collect()
}

/// Down-converts a passband signal: multiplies by twice the quadrature
/// carriers and smooths with a four-sample moving average over
/// `[n - 2, n + 1]`. Unity gain for slowly varying baseband.
pub fn mix_down(passband: &[i16], cfg: &ModemConfig) -> IqBuffer {
    let products: Vec<(i64, i64)> = passband
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let (c, s) = carrier(n, cfg);
            (i64::from(p) * c, -i64::from(p) * s)
        })
        .collect();
    let len = products.len();
    let mut i = Vec::with_capacity(len);
    let mut q = Vec::with_capacity(len);
    for n in 0..len {
        let lo = n.saturating_sub(2);
        let hi = (n + 2).min(len);
        let (si, sq) = products[lo..hi]
            .iter()
            .fold((0, 0), |(a, b), &(x, y)| (a + x, b + y));
        // 2 / 4 from the carrier gain and the average, and the Q15 scale.
        i.push(saturate(div_round(si, 2 * Q15)));
        q.push(saturate(div_round(sq, 2 * Q15)));
    }
    IqBuffer { i, q, sample_rate: cfg.sample_rate() }
}

/// Per-position matched-filter outputs for both channels.
struct Correlations {
    i: Vec<i64>,
    q: Vec<i64>,
}

impl Correlations {
    fn new(buf: &IqBuffer, cfg: &ModemConfig) -> Self {
        let pulse = cfg.half_sine().map(i64::from);
        let corr = |x: &[i16]| -> Vec<i64> {
            x.windows(SAMPLES_PER_HALF_SINE)
                .map(|w| w.iter().zip(&pulse).map(|(&s, &h)| i64::from(s) * h).sum())
                .collect()
        };
        Self { i: corr(&buf.i), q: corr(&buf.q) }
    }

    /// Matched-filter output for chip `c` of a stream starting at `base`.
    fn chip(&self, base: usize, c: usize) -> Option<i64> {
        let channel = if c % 2 == 0 { &self.i } else { &self.q };
        channel.get(base + c * SAMPLES_PER_CHIP).copied()
    }

    fn symbol(&self, base: usize) -> Option<SoftSymbol> {
        let mut bits = 0u32;
        let mut soft = [0i64; CHIPS_PER_SYMBOL];
        for (c, slot) in soft.iter_mut().enumerate() {
            let v = self.chip(base, c)?;
            *slot = v;
            bits |= u32::from(v > 0) << c;
        }
        let (symbol, score) = ChipTable::standard().despread(ChipSequence::from_bits(bits));
        Some(SoftSymbol { symbol, score, soft })
    }
}

struct SoftSymbol {
    symbol: DataSymbol,
    score: u32,
    soft: [i64; CHIPS_PER_SYMBOL],
}

impl SoftSymbol {
    fn is(&self, value: u8) -> bool {
        self.symbol.value() == value && self.score >= ACQUISITION_MIN_SCORE
    }

    /// Signed matched-filter energy against the detected symbol's chips.
    fn match_energy(&self) -> i64 {
        let row = ChipTable::standard().row(self.symbol);
        self.soft
            .iter()
            .enumerate()
            .map(|(c, &v)| if row.chip(c) == 1 { v } else { -v })
            .sum()
    }
}

/// Number of samples needed to demodulate `chip_count` chips.
pub fn samples_for_chips(chip_count: usize) -> usize {
    match chip_count {
        0 => 0,
        n => (n - 1) * SAMPLES_PER_CHIP + SAMPLES_PER_HALF_SINE,
    }
}

/// Hard chip decisions for `chip_count` chips starting at sample `start`.
pub fn demodulate_at(
    buf: &IqBuffer,
    start: usize,
    chip_count: usize,
    cfg: &ModemConfig,
) -> Result<Vec<u8>, ModemError> {
    let needed = start + samples_for_chips(chip_count);
    if buf.len() < needed {
        return Err(ModemError::BufferTooShort { needed, available: buf.len() });
    }
    let pulse = cfg.half_sine().map(i64::from);
    Ok((0..chip_count)
        .map(|c| {
            let channel = if c % 2 == 0 { &buf.i } else { &buf.q };
            let at = start + c * SAMPLES_PER_CHIP;
            let corr: i64 = channel[at..at + SAMPLES_PER_HALF_SINE]
                .iter()
                .zip(&pulse)
                .map(|(&s, &h)| i64::from(s) * h)
                .sum();
            u8::from(corr > 0)
        })
        .collect())
}

/// Matched-filter demodulation of a chip-aligned buffer. A correlation of
/// zero decides 0.
pub fn demodulate(buf: &IqBuffer, chip_count: usize, cfg: &ModemConfig) -> Result<Vec<u8>, ModemError> {
    demodulate_at(buf, 0, chip_count, cfg)
}

/// Sample positions found by [`acquire_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Acquisition {
    /// First sample of the earliest detected preamble symbol.
    pub preamble_start: usize,
    /// First sample of the SFD.
    pub sfd_start: usize,
    /// Preamble symbols detected before the SFD.
    pub preamble_symbols: usize,
}

/// Finds the earliest SFD preceded by at least four detected zero symbols,
/// refined to the sample with the strongest match.
pub fn acquire_frame(buf: &IqBuffer, cfg: &ModemConfig) -> Result<Acquisition, ModemError> {
    let corr = Correlations::new(buf, cfg);
    let lead = ACQUISITION_MIN_PREAMBLE * SAMPLES_PER_SYMBOL;

    // Signed match energy of the SFD and the required preamble at `t`, if
    // all of them are detected there.
    let detect = |t: usize| -> Option<i64> {
        let first = corr.symbol(t)?;
        if !first.is(SFD_SYMBOLS[0]) {
            return None;
        }
        let second = corr.symbol(t + SAMPLES_PER_SYMBOL)?;
        if !second.is(SFD_SYMBOLS[1]) {
            return None;
        }
        let mut energy = first.match_energy() + second.match_energy();
        for j in 1..=ACQUISITION_MIN_PREAMBLE {
            let s = corr.symbol(t - j * SAMPLES_PER_SYMBOL)?;
            if !s.is(0) {
                return None;
            }
            energy += s.match_energy();
        }
        Some(energy)
    };

    let first = (lead..buf.len())
        .find(|&t| detect(t).is_some())
        .ok_or(ModemError::AcquisitionFailed)?;
    // Neighbouring sample offsets also decode when the pulse is only
    // slightly misaligned; keep the strongest (earliest on ties).
    let mut best = (first, detect(first).unwrap_or(i64::MIN));
    for t in first + 1..first + SAMPLES_PER_HALF_SINE {
        if let Some(e) = detect(t) {
            if e > best.1 {
                best = (t, e);
            }
        }
    }
    let sfd_start = best.0;

    let mut preamble_symbols = ACQUISITION_MIN_PREAMBLE;
    while preamble_symbols < PREAMBLE_SYMBOLS {
        let Some(back) = sfd_start.checked_sub((preamble_symbols + 1) * SAMPLES_PER_SYMBOL) else {
            break;
        };
        match corr.symbol(back) {
            Some(s) if s.is(0) => preamble_symbols += 1,
            _ => break,
        }
    }
    Ok(Acquisition {
        preamble_start: sfd_start - preamble_symbols * SAMPLES_PER_SYMBOL,
        sfd_start,
        preamble_symbols,
    })
}

/// Sample offset of the first preamble sample of the first PPDU.
pub fn acquire(buf: &IqBuffer, cfg: &ModemConfig) -> Result<usize, ModemError> {
    acquire_frame(buf, cfg).map(|a| a.preamble_start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_sine_golden_samples() {
        // Frozen from a 50-digit evaluation of 23170 * sin(pi (k + 0.5) / 4).
        assert_eq!(ModemConfig::default().half_sine(), [8867, 21406, 21406, 8867]);
    }

    #[test]
    fn single_chip_layout() {
        let cfg = ModemConfig::default();
        let m = modulate(&[1, 0], &cfg);
        assert_eq!(m.buffer.i(), &[8867, 21406, 21406, 8867, 0, 0]);
        assert_eq!(m.buffer.q(), &[0, 0, -8867, -21406, -21406, -8867]);
        assert!(!m.padded);
    }

    #[test]
    fn one_symbol_is_66_samples() {
        let cfg = ModemConfig::default();
        let chips = vec![1u8; 32];
        assert_eq!(modulate(&chips, &cfg).buffer.len(), 66);
        assert_eq!(modulate(&[], &cfg).buffer.len(), 0);
    }

    #[test]
    fn odd_chip_count_padded() {
        let cfg = ModemConfig::default();
        let m = modulate(&[1, 1, 1], &cfg);
        assert!(m.padded);
        assert_eq!(m.buffer.len(), 10);
        assert_eq!(demodulate(&m.buffer, 4, &cfg).unwrap(), vec![1, 1, 1, 0]);
    }

    #[test]
    fn zero_chip_negates() {
        let cfg = ModemConfig::default();
        let one = modulate(&[1, 1], &cfg).buffer;
        let zero = modulate(&[0, 0], &cfg).buffer;
        assert!(one.i().iter().zip(zero.i()).all(|(a, b)| *a == -*b));
        assert!(one.q().iter().zip(zero.q()).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn zero_buffer_demodulates_to_zero_chips() {
        let cfg = ModemConfig::default();
        let buf = IqBuffer::zeros(66, cfg.sample_rate());
        assert_eq!(demodulate(&buf, 32, &cfg).unwrap(), vec![0u8; 32]);
    }

    #[test]
    fn short_buffer_rejected() {
        let cfg = ModemConfig::default();
        let buf = modulate(&[1u8; 32], &cfg).buffer.truncated(65);
        assert_eq!(
            demodulate(&buf, 32, &cfg),
            Err(ModemError::BufferTooShort { needed: 66, available: 65 })
        );
    }

    #[test]
    fn quarter_rate_carrier_pattern() {
        let cfg = ModemConfig::default();
        let i = vec![100, 200, 300, 400, 500, 600, 700, 800];
        let buf = IqBuffer::new(i, vec![0; 8], cfg.sample_rate()).unwrap();
        assert_eq!(mix_up(&buf, &cfg), vec![100, 0, -300, 0, 500, 0, -700, 0]);

        let silent = IqBuffer::zeros(16, cfg.sample_rate());
        assert!(mix_up(&silent, &cfg).iter().all(|&s| s == 0));
        let down = mix_down(&[0; 16], &cfg);
        assert!(down.i().iter().chain(down.q()).all(|&s| s == 0));
    }

    #[test]
    fn pure_cosine_downconverts_to_constant_i() {
        let cfg = ModemConfig::default();
        let passband: Vec<i16> = (0..64).map(|n| (carrier(n, &cfg).0 / 2) as i16).collect();
        let down = mix_down(&passband, &cfg);
        for n in 2..62 {
            assert_eq!(down.i()[n], 16384, "sample {n}");
            assert_eq!(down.q()[n], 0, "sample {n}");
        }
    }

    #[test]
    fn constant_baseband_survives_mixing() {
        let cfg = ModemConfig::default();
        let buf = IqBuffer::new(vec![12345; 40], vec![-20000; 40], cfg.sample_rate()).unwrap();
        let back = mix_down(&mix_up(&buf, &cfg), &cfg);
        for n in 2..38 {
            assert!((i32::from(back.i()[n]) - 12345).abs() <= 2);
            assert!((i32::from(back.q()[n]) + 20000).abs() <= 2);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ModemConfig::default().validate().is_ok());
        let cfg = ModemConfig { if_frequency: 3e6, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ModemConfig { amplitude: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
