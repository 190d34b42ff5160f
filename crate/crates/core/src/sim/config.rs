//! Line-oriented `key = value` session configuration and the key=value
//! report.
//!
//! Blank lines and anything after `#` are ignored. Unknown keys are errors.
//!
//! ```text
//! seed = 7
//! mode = chip_flip      # lossless | chip_flip | awgn
//! chip_flip_p = 0.02
//! payload_count = 20
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use rand::RngCore;

use super::log::{NodeId, RadioState};
use super::{stream, substream, BusyInterval, ChannelMode, SessionConfig, SessionReport, SimError};
use crate::mac::CcaMode;

/// Every key accepted by [`SimSpec::set`], with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "(required)"),
    ("mode", "lossless"),
    ("chip_flip_p", "0"),
    ("awgn_sigma", "0"),
    ("ack_drop", "(none)"),
    ("busy", "(none)"),
    ("propagation_delay", "0"),
    ("payload_count", "1"),
    ("payload_len", "10"),
    ("payload", "(random)"),
    ("tx_pan", "0x1234"),
    ("tx_addr", "0x0001"),
    ("rx_pan", "0x1234"),
    ("rx_addr", "0x0002"),
    ("min_be", "3"),
    ("max_be", "5"),
    ("max_csma_backoffs", "4"),
    ("max_frame_retries", "3"),
    ("unit_backoff_period", "20"),
    ("turnaround_time", "12"),
    ("ack_wait_duration", "54"),
    ("cca_duration", "8"),
    ("cca_mode", "energy"),
    ("cca_threshold", "0.1"),
    ("tx_ma", "17.4"),
    ("rx_ma", "19.7"),
    ("cca_ma", "19.7"),
    ("idle_ma", "0.02"),
    ("supply_voltage", "3.0"),
    ("amplitude", "23170"),
    ("chip_rate", "2000000"),
    ("if_frequency", "1000000"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeName {
    Lossless,
    ChipFlip,
    Awgn,
}

/// A parsed configuration, before the seed requirement is enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub session: SessionConfig,
    pub seed: Option<u64>,
    pub mode: ModeName,
    pub chip_flip_p: f64,
    pub awgn_sigma: f64,
    pub payload_count: usize,
    pub payload_len: usize,
    pub payload: Option<Vec<u8>>,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            seed: None,
            mode: ModeName::Lossless,
            chip_flip_p: 0.0,
            awgn_sigma: 0.0,
            payload_count: 1,
            payload_len: 10,
            payload: None,
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> SimError {
    SimError::Config { key: key.to_string(), reason: reason.into() }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, SimError> {
    value.parse().map_err(|_| bad(key, format!("cannot parse {value:?}")))
}

/// Decimal or `0x`-prefixed hexadecimal.
fn int<T: TryFrom<u64>>(key: &str, value: &str) -> Result<T, SimError> {
    let parsed = match value.strip_prefix("0x").or_else(|| value.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => value.parse(),
    };
    parsed
        .ok()
        .and_then(|v| T::try_from(v).ok())
        .ok_or_else(|| bad(key, format!("{value:?} is not a valid integer for this key")))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl SimSpec {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut spec = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line, format!("line {} is not key = value", n + 1)))?;
            spec.set(key.trim(), value.trim())?;
        }
        Ok(spec)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SimError> {
        let s = &mut self.session;
        match key {
            "seed" => self.seed = Some(int(key, value)?),
            "mode" => {
                self.mode = match value {
                    "lossless" => ModeName::Lossless,
                    "chip_flip" => ModeName::ChipFlip,
                    "awgn" => ModeName::Awgn,
                    other => return Err(bad(key, format!("unknown mode {other:?}"))),
                }
            }
            "chip_flip_p" => self.chip_flip_p = num(key, value)?,
            "awgn_sigma" => self.awgn_sigma = num(key, value)?,
            "ack_drop" => s.channel.ack_drop_pattern = list(value).map(|v| int(key, v)).collect::<Result<_, _>>()?,
            "busy" => {
                s.channel.busy_schedule = list(value)
                    .map(|v| {
                        let (a, b) = v.split_once('-').ok_or_else(|| bad(key, format!("{v:?} is not start-end")))?;
                        Ok(BusyInterval { start: int(key, a.trim())?, end: int(key, b.trim())? })
                    })
                    .collect::<Result<_, SimError>>()?
            }
            "propagation_delay" => s.channel.propagation_delay = int(key, value)?,
            "payload_count" => self.payload_count = int(key, value)?,
            "payload_len" => self.payload_len = int(key, value)?,
            "payload" => {
                self.payload = Some(hex::decode(value).map_err(|e| bad(key, e.to_string()))?);
            }
            "tx_pan" => s.tx.pan_id = int(key, value)?,
            "tx_addr" => s.tx.short_addr = int(key, value)?,
            "rx_pan" => s.rx.pan_id = int(key, value)?,
            "rx_addr" => s.rx.short_addr = int(key, value)?,
            "min_be" => s.mac.min_be = int(key, value)?,
            "max_be" => s.mac.max_be = int(key, value)?,
            "max_csma_backoffs" => s.mac.max_csma_backoffs = int(key, value)?,
            "max_frame_retries" => s.mac.max_frame_retries = int(key, value)?,
            "unit_backoff_period" => s.mac.unit_backoff_period = int(key, value)?,
            "turnaround_time" => s.mac.turnaround_time = int(key, value)?,
            "ack_wait_duration" => s.mac.ack_wait_duration = int(key, value)?,
            "cca_duration" => s.mac.cca_duration = int(key, value)?,
            "cca_mode" => s.mac.cca_mode = CcaMode::from_str(value).map_err(|e| bad(key, e.to_string()))?,
            "cca_threshold" => s.mac.cca_threshold = num(key, value)?,
            "tx_ma" => s.energy.tx_ma = num(key, value)?,
            "rx_ma" => s.energy.rx_ma = num(key, value)?,
            "cca_ma" => s.energy.cca_ma = num(key, value)?,
            "idle_ma" => s.energy.idle_ma = num(key, value)?,
            "supply_voltage" => s.energy.supply_voltage = num(key, value)?,
            "amplitude" => s.modem.amplitude = int(key, value)?,
            "chip_rate" => s.modem.chip_rate = int(key, value)?,
            "if_frequency" => s.modem.if_frequency = num(key, value)?,
            other => return Err(bad(other, "unknown key")),
        }
        Ok(())
    }

    /// Resolves the session configuration. Fails without a seed.
    pub fn session(&self) -> Result<SessionConfig, SimError> {
        let seed = self.seed.ok_or_else(|| bad("seed", "required; pass it in the config or with --seed"))?;
        let mut cfg = self.session.clone();
        cfg.channel.seed = seed;
        cfg.channel.mode = match self.mode {
            ModeName::Lossless => ChannelMode::Lossless,
            ModeName::ChipFlip => ChannelMode::ChipFlip(self.chip_flip_p),
            ModeName::Awgn => ChannelMode::SampleAwgn(self.awgn_sigma),
        };
        cfg.mac.validate().map_err(|e| bad("mac", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The payload list: either `payload` repeated, or seeded random
    /// octets of `payload_len` each.
    pub fn payloads(&self) -> Result<Vec<Vec<u8>>, SimError> {
        let seed = self.seed.ok_or_else(|| bad("seed", "required; pass it in the config or with --seed"))?;
        if let Some(p) = &self.payload {
            return Ok(vec![p.clone(); self.payload_count]);
        }
        let mut rng = substream(seed, stream::PAYLOAD);
        Ok((0..self.payload_count)
            .map(|_| {
                let mut p = vec![0u8; self.payload_len];
                rng.fill_bytes(&mut p);
                p
            })
            .collect())
    }
}

/// Renders stats and ledgers as `key=value` lines with fixed precision.
pub fn format_report(report: &SessionReport) -> String {
    let s = &report.stats;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    line("payloads", s.payloads.to_string());
    line("frames_sent", s.frames_sent.to_string());
    line("frames_intact", s.frames_intact.to_string());
    line("delivered", s.frames_delivered.to_string());
    line("duplicates", s.duplicates.to_string());
    line("acks_sent", s.acks_sent.to_string());
    line("acked", s.acked.to_string());
    line("acks_dropped", s.acks_dropped.to_string());
    line("retransmissions", s.retransmissions.to_string());
    line("channel_access_failures", s.channel_access_failures.to_string());
    line("no_acks", s.no_acks.to_string());
    line("chip_errors_injected", s.chip_errors_injected.to_string());
    line("bit_errors", s.bit_errors.to_string());
    line("bits_compared", s.bits_compared.to_string());
    line("per", format!("{:.6}", s.per()));
    line("ber", format!("{:.6}", s.ber()));
    line("airtime_us", format!("{:.3}", s.airtime_us()));
    line("span_symbols", report.span.to_string());
    for (node, ledger) in &report.ledgers {
        let n = node.name();
        for state in RadioState::ALL {
            let u = ledger.state(state);
            let st = state.name().to_lowercase();
            line(&format!("{n}.{st}_symbols"), u.symbols.to_string());
            line(&format!("{n}.{st}_charge_uc"), format!("{:.6}", u.charge_uc));
        }
        line(&format!("{n}.total_charge_uc"), format!("{:.6}", ledger.total_charge_uc));
        line(&format!("{n}.total_energy_uj"), format!("{:.6}", ledger.total_energy_uj));
    }
    debug_assert!(report.ledgers.contains_key(&NodeId::Tx));
    out
}
