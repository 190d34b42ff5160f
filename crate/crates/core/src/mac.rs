//! Point-to-point MAC: unslotted CSMA-CA, acknowledged data transmission
//! with retries, receive filtering, ACK generation and duplicate rejection.
//!
//! The engine is written against the [`Medium`] trait. It never looks at a
//! clock; every wait it needs is expressed as a call on the medium, which
//! owns time.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frame::{
    self, AddrMode, Address, AddressInfo, FrameControl, FrameError, FrameType, BROADCAST,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MacError {
    #[error("invalid MAC configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// How a clear channel assessment decides the channel is busy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcaMode {
    EnergyDetection,
    CarrierSense,
    CarrierSenseWithEnergy,
}

impl std::str::FromStr for CcaMode {
    type Err = MacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "energy" | "ed" => Ok(Self::EnergyDetection),
            "carrier" | "cs" => Ok(Self::CarrierSense),
            "combined" => Ok(Self::CarrierSenseWithEnergy),
            other => Err(MacError::InvalidConfig(format!("unknown CCA mode {other:?}"))),
        }
    }
}

/// MAC timing and retry parameters. Durations are in symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    pub min_be: u8,
    pub max_be: u8,
    pub max_csma_backoffs: u8,
    pub max_frame_retries: u8,
    pub unit_backoff_period: u64,
    pub turnaround_time: u64,
    pub ack_wait_duration: u64,
    pub cca_duration: u64,
    pub cca_mode: CcaMode,
    /// Received energy above which the channel reads busy.
    pub cca_threshold: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            min_be: 3,
            max_be: 5,
            max_csma_backoffs: 4,
            max_frame_retries: 3,
            unit_backoff_period: 20,
            turnaround_time: 12,
            ack_wait_duration: 54,
            cca_duration: 8,
            cca_mode: CcaMode::EnergyDetection,
            cca_threshold: 0.1,
        }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<(), MacError> {
        let bad = |m: &str| Err(MacError::InvalidConfig(m.to_string()));
        if self.min_be > self.max_be {
            return bad("min_be exceeds max_be");
        }
        if self.max_be > 20 {
            return bad("max_be above 20");
        }
        if self.unit_backoff_period == 0
            || self.turnaround_time == 0
            || self.ack_wait_duration == 0
            || self.cca_duration == 0
        {
            return bad("durations must be positive");
        }
        if self.cca_mode != CcaMode::EnergyDetection {
            return bad("only energy-detection CCA is implemented");
        }
        if !self.cca_threshold.is_finite() || self.cca_threshold < 0.0 {
            return bad("cca_threshold must be a non-negative number");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIdentity {
    pub pan_id: u16,
    pub short_addr: u16,
}

impl NodeIdentity {
    pub fn new(pan_id: u16, short_addr: u16) -> Self {
        Self { pan_id, short_addr }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelState {
    Idle,
    Busy,
}

/// What the MAC needs from the radio and the channel.
pub trait Medium {
    /// Radio idle for `symbols` (backoff).
    fn idle(&mut self, symbols: u64);
    /// Assesses the channel for `symbols`.
    fn cca(&mut self, symbols: u64, threshold: f64) -> ChannelState;
    /// Sends a PPDU; returns once the last symbol is on air.
    fn transmit(&mut self, ppdu: &[u8]);
    /// Listens for up to `timeout` symbols and returns the first PPDU that
    /// finishes arriving in that window. On `None` the whole timeout has
    /// elapsed.
    fn listen(&mut self, timeout: u64) -> Option<Heard>;
    /// Receive-to-transmit turnaround of `symbols`.
    fn turnaround(&mut self, symbols: u64);
}

/// A PPDU picked up by [`Medium::listen`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heard {
    pub ppdu: Vec<u8>,
    /// Symbols spent listening before it finished arriving.
    pub elapsed: u64,
}

/// Record of one CSMA-CA run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsmaOutcome {
    pub success: bool,
    /// Backoffs that ended in a busy channel.
    pub nb: u8,
    /// Backoff exponent used for each attempt.
    pub be_trace: Vec<u8>,
    /// Unit backoff periods drawn for each attempt.
    pub periods: Vec<u32>,
    pub backoff_symbols: u64,
}

impl CsmaOutcome {
    pub fn cca_attempts(&self) -> usize {
        self.be_trace.len()
    }
}

/// Uniform random backoff in `[0, 2^be - 1]` unit periods.
pub fn draw_backoff<R: Rng + ?Sized>(rng: &mut R, be: u8) -> u32 {
    rng.random_range(0..(1u32 << be))
}

/// Unslotted CSMA-CA.
pub fn csma_ca<M: Medium + ?Sized, R: Rng + ?Sized>(medium: &mut M, cfg: &MacConfig, rng: &mut R) -> CsmaOutcome {
    let mut nb = 0u8;
    let mut be = cfg.min_be;
    let mut out = CsmaOutcome { success: false, nb: 0, be_trace: Vec::new(), periods: Vec::new(), backoff_symbols: 0 };
    loop {
        let periods = draw_backoff(rng, be);
        let symbols = u64::from(periods) * cfg.unit_backoff_period;
        out.be_trace.push(be);
        out.periods.push(periods);
        out.backoff_symbols += symbols;
        medium.idle(symbols);
        if medium.cca(cfg.cca_duration, cfg.cca_threshold) == ChannelState::Idle {
            out.success = true;
            out.nb = nb;
            return out;
        }
        nb += 1;
        be = (be + 1).min(cfg.max_be);
        if nb > cfg.max_csma_backoffs {
            out.nb = nb;
            return out;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxStatus {
    Success,
    ChannelAccessFailure,
    NoAck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutcome {
    pub status: TxStatus,
    /// Data frames put on air.
    pub transmissions: u32,
    pub backoff_symbols: u64,
    pub cca_attempts: u32,
}

/// Data frame from `src` to `dest`, short-addressed. The ACK request is set
/// unless `dest` is the broadcast address.
pub fn build_data_frame(payload: &[u8], dest: NodeIdentity, src: NodeIdentity, seq: u8) -> Result<Vec<u8>, FrameError> {
    let mut fcf = FrameControl::new(FrameType::Data);
    fcf.ack_request = dest.short_addr != BROADCAST;
    fcf.dest_addr_mode = AddrMode::Short;
    fcf.src_addr_mode = AddrMode::Short;
    fcf.intra_pan = dest.pan_id == src.pan_id;
    let addr = AddressInfo {
        dest_pan: Some(dest.pan_id),
        dest_addr: Some(Address::Short(dest.short_addr)),
        src_pan: (!fcf.intra_pan).then_some(src.pan_id),
        src_addr: Some(Address::Short(src.short_addr)),
    };
    frame::build_frame(&fcf, seq, &addr, payload)
}

fn is_ack_for(ppdu: &[u8], seq: u8) -> bool {
    let Ok((start, len)) = frame::find_ppdu(ppdu) else {
        return false;
    };
    matches!(
        frame::parse_mpdu(&ppdu[start..start + len]),
        Ok(m) if m.fcf.frame_type == FrameType::Ack && m.seq == seq
    )
}

/// Sends one payload with CSMA-CA, ACK wait and retransmission.
#[allow(clippy::too_many_arguments)]
pub fn mac_send<M: Medium + ?Sized, R: Rng + ?Sized>(
    payload: &[u8],
    dest: NodeIdentity,
    me: NodeIdentity,
    seq: u8,
    cfg: &MacConfig,
    medium: &mut M,
    rng: &mut R,
) -> Result<TxOutcome, MacError> {
    let mpdu = build_data_frame(payload, dest, me, seq)?;
    let ppdu = frame::build_ppdu(&mpdu)?;
    let wants_ack = dest.short_addr != BROADCAST;
    let mut out = TxOutcome { status: TxStatus::NoAck, transmissions: 0, backoff_symbols: 0, cca_attempts: 0 };

    for _ in 0..=cfg.max_frame_retries {
        let csma = csma_ca(medium, cfg, rng);
        out.backoff_symbols += csma.backoff_symbols;
        out.cca_attempts += csma.cca_attempts() as u32;
        if !csma.success {
            out.status = TxStatus::ChannelAccessFailure;
            return Ok(out);
        }
        medium.transmit(&ppdu);
        out.transmissions += 1;
        if !wants_ack {
            out.status = TxStatus::Success;
            return Ok(out);
        }
        let mut remaining = cfg.ack_wait_duration;
        while let Some(heard) = medium.listen(remaining) {
            if is_ack_for(&heard.ppdu, seq) {
                out.status = TxStatus::Success;
                return Ok(out);
            }
            remaining = remaining.saturating_sub(heard.elapsed.max(1));
            if remaining == 0 {
                break;
            }
        }
    }
    out.status = TxStatus::NoAck;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IgnoreReason {
    /// Failed to parse, including FCS mismatches.
    Malformed(FrameError),
    /// Not addressed to this node.
    Address,
    /// Same (source, sequence) as the last frame delivered from that peer.
    Duplicate,
    /// Frame type this MAC does not deliver.
    FrameType(FrameType),
}

impl std::fmt::Display for IgnoreReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Malformed(FrameError::FcsMismatch { .. }) => f.write_str("fcs_mismatch"),
            Self::Malformed(_) => f.write_str("malformed"),
            Self::Address => f.write_str("address"),
            Self::Duplicate => f.write_str("duplicate"),
            Self::FrameType(t) => write!(f, "frame_type_{t:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Disposition {
    Delivered { payload: Vec<u8>, src: Option<Address>, seq: u8 },
    Ignored(IgnoreReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RxResult {
    pub disposition: Disposition,
    /// Sequence number of the ACK sent in response, if any.
    pub ack_sent: Option<u8>,
}

impl RxResult {
    fn ignored(reason: IgnoreReason) -> Self {
        Self { disposition: Disposition::Ignored(reason), ack_sent: None }
    }
}

/// Receive side of a node: address filter, ACK generation and the
/// per-peer duplicate filter.
#[derive(Debug, Clone)]
pub struct Receiver {
    me: NodeIdentity,
    last_delivered: BTreeMap<Address, u8>,
}

impl Receiver {
    pub fn new(me: NodeIdentity) -> Self {
        Self { me, last_delivered: BTreeMap::new() }
    }

    pub fn identity(&self) -> NodeIdentity {
        self.me
    }

    fn accepts(&self, addr: &AddressInfo) -> bool {
        let pan_ok = matches!(addr.dest_pan, Some(p) if p == self.me.pan_id || p == BROADCAST);
        let addr_ok = matches!(addr.dest_addr, Some(Address::Short(a)) if a == self.me.short_addr || a == BROADCAST);
        pan_ok && addr_ok
    }

    /// Handles one received PPDU.
    pub fn on_receive<M: Medium + ?Sized>(&mut self, ppdu: &[u8], cfg: &MacConfig, medium: &mut M) -> RxResult {
        let mpdu = match frame::find_ppdu(ppdu).and_then(|(s, l)| frame::parse_mpdu(&ppdu[s..s + l])) {
            Ok(m) => m,
            Err(e) => return RxResult::ignored(IgnoreReason::Malformed(e)),
        };
        if mpdu.fcf.frame_type != FrameType::Data {
            return RxResult::ignored(IgnoreReason::FrameType(mpdu.fcf.frame_type));
        }
        if !self.accepts(&mpdu.addr) {
            return RxResult::ignored(IgnoreReason::Address);
        }
        let broadcast = mpdu.addr.dest_addr == Some(Address::Short(BROADCAST));
        let ack_sent = if mpdu.fcf.ack_request && !broadcast {
            medium.turnaround(cfg.turnaround_time);
            medium.transmit(&frame::build_ppdu(&frame::build_ack_for(mpdu.seq)).expect("ack fits"));
            Some(mpdu.seq)
        } else {
            None
        };
        let src = mpdu.addr.src_addr;
        if let Some(src) = src {
            if self.last_delivered.get(&src) == Some(&mpdu.seq) {
                return RxResult { disposition: Disposition::Ignored(IgnoreReason::Duplicate), ack_sent };
            }
            self.last_delivered.insert(src, mpdu.seq);
        }
        RxResult {
            disposition: Disposition::Delivered { payload: mpdu.payload, src, seq: mpdu.seq },
            ack_sent,
        }
    }
}

/// Data sequence number generator: a counter modulo 256 with a seeded
/// starting point.
#[derive(Debug, Clone)]
pub struct SequenceCounter {
    next: u8,
}

impl SequenceCounter {
    pub fn from_seed(seed: u64) -> Self {
        Self { next: ChaCha8Rng::seed_from_u64(seed).random() }
    }

    pub fn starting_at(value: u8) -> Self {
        Self { next: value }
    }

    pub fn next_seq(&mut self) -> u8 {
        let seq = self.next;
        self.next = self.next.wrapping_add(1);
        seq
    }
}
