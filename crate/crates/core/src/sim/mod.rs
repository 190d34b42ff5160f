//! Deterministic two-node link simulator on a symbol clock.
//!
//! A sender pushes a list of payloads through [`mac_send`]; every frame on
//! the air is carried to the other node either as raw octets
//! ([`ChannelMode::Lossless`]) or through the full PHY with the configured
//! impairment. The receiver answers through [`Receiver`]. Both radios log
//! their state changes so [`account_energy`] can integrate charge.

pub mod channel;
pub mod config;
pub mod energy;
pub mod log;

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use channel::{
    apply_impairment, cca_read, Activity, BusyInterval, ChannelConfig, ChannelMode, Signal, PEER_ENERGY,
};
pub use energy::{account_energy, EnergyLedger, EnergyModel, StateUsage};
pub use log::{Event, EventKind, EventLog, NodeId, RadioState};

use crate::frame::{self, FrameError, FrameType};
use crate::mac::{
    self, ChannelState, Disposition, Heard, IgnoreReason, MacConfig, MacError, Medium, NodeIdentity, Receiver,
    SequenceCounter, TxOutcome, TxStatus,
};
use crate::modem::{ModemConfig, ModemError};
use crate::phy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("impairment does not apply to this signal kind")]
    ModeMismatch,
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl From<ModemError> for SimError {
    fn from(e: ModemError) -> Self {
        SimError::Config { key: "modem".into(), reason: e.to_string() }
    }
}

/// Independent random streams, so one consumer cannot shift another's draws.
pub mod stream {
    pub const BACKOFF: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const PAYLOAD: u64 = 3;
    pub const SEQUENCE: u64 = 4;
}

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub tx: NodeIdentity,
    pub rx: NodeIdentity,
    pub channel: ChannelConfig,
    pub mac: MacConfig,
    pub energy: EnergyModel,
    pub modem: ModemConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tx: NodeIdentity::new(0x1234, 0x0001),
            rx: NodeIdentity::new(0x1234, 0x0002),
            channel: ChannelConfig::default(),
            mac: MacConfig::default(),
            energy: EnergyModel::default(),
            modem: ModemConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.channel.validate()?;
        self.mac.validate().map_err(|e| SimError::Config { key: "mac".into(), reason: e.to_string() })?;
        self.energy.validate()?;
        self.modem.validate()?;
        if self.tx == self.rx {
            return Err(SimError::Config { key: "rx_addr".into(), reason: "both nodes share one identity".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkStats {
    pub payloads: u64,
    /// Data frames put on air, retransmissions included.
    pub frames_sent: u64,
    /// Data frames that reached the receiver with a valid FCS.
    pub frames_intact: u64,
    /// Distinct payloads handed up by the receiver.
    pub frames_delivered: u64,
    pub duplicates: u64,
    pub acks_sent: u64,
    /// Payloads whose transmission ended in success.
    pub acked: u64,
    pub acks_dropped: u64,
    pub retransmissions: u64,
    pub channel_access_failures: u64,
    pub no_acks: u64,
    pub chip_errors_injected: u64,
    pub bit_errors: u64,
    pub bits_compared: u64,
    /// Air time of all data frames, in symbols.
    pub data_airtime_symbols: u64,
}

impl LinkStats {
    /// Fraction of data frames that did not arrive intact.
    pub fn per(&self) -> f64 {
        if self.frames_sent == 0 {
            0.0
        } else {
            1.0 - self.frames_intact as f64 / self.frames_sent as f64
        }
    }

    /// Payload bit error fraction over frames received at the right length.
    pub fn ber(&self) -> f64 {
        if self.bits_compared == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_compared as f64
        }
    }

    /// Mean data frame air time in microseconds.
    pub fn airtime_us(&self) -> f64 {
        if self.frames_sent == 0 {
            0.0
        } else {
            (self.data_airtime_symbols * energy::SYMBOL_PERIOD_US) as f64 / self.frames_sent as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub stats: LinkStats,
    pub ledgers: BTreeMap<NodeId, EnergyLedger>,
    pub log: EventLog,
    pub outcomes: Vec<TxOutcome>,
    /// Symbol time at which the session ended.
    pub span: u64,
}

/// Air time of a PPDU in symbols.
pub fn ppdu_symbols(octets: usize) -> u64 {
    (octets * 2) as u64
}

/// A frame travelling towards the sender.
struct Inbound {
    start: u64,
    end: u64,
    ppdu: Vec<u8>,
}

/// State shared by both radio ports.
struct Shared<'a> {
    cfg: &'a SessionConfig,
    log: EventLog,
    stats: LinkStats,
    noise: ChaCha8Rng,
    activity: Vec<Activity>,
    states: [RadioState; 2],
    tx_now: u64,
    rx_now: u64,
    /// The receiver is transmitting until this time.
    rx_busy_until: u64,
    to_tx: Vec<Inbound>,
    /// Session-wide index of the current data transmission.
    attempt: u64,
    current_seq: u8,
    last_event: u64,
}

impl Shared<'_> {
    fn event(&mut self, time: u64, node: NodeId, kind: EventKind) {
        self.last_event = self.last_event.max(time);
        self.log.push(time, node, kind);
    }

    fn set_state(&mut self, time: u64, node: NodeId, state: RadioState) {
        let slot = &mut self.states[node as usize];
        if *slot != state {
            *slot = state;
            self.event(time, node, EventKind::State(state));
        }
    }

    /// Carries a PPDU across the channel. `Err` names why the PHY lost it.
    fn carry(&mut self, ppdu: &[u8]) -> Result<Vec<u8>, String> {
        let modem = &self.cfg.modem;
        match self.cfg.channel.mode {
            ChannelMode::Lossless => Ok(ppdu.to_vec()),
            ChannelMode::ChipFlip(p) => {
                let buf = phy::transmit(ppdu, modem);
                let mut flipped = 0;
                let noise = &mut self.noise;
                let rx = phy::receive_with(&buf, modem, |first, chips| {
                    // The header stays synchronised; errors hit the MPDU.
                    if first > 0 {
                        flipped += channel::flip_chips(chips, p, noise);
                    }
                });
                self.stats.chip_errors_injected += flipped as u64;
                rx.map(|r| r.ppdu).map_err(|e| e.to_string())
            }
            ChannelMode::SampleAwgn(sigma) => {
                let mut buf = phy::transmit(ppdu, modem);
                channel::add_noise(&mut buf, sigma, &mut self.noise);
                phy::receive(&buf, modem).map(|r| r.ppdu).map_err(|e| e.to_string())
            }
        }
    }

    fn cca(&self, from: u64, symbols: u64, threshold: f64) -> ChannelState {
        let busy = (from..from + symbols)
            .any(|t| cca_read(&self.cfg.channel, &self.activity, t, threshold) == ChannelState::Busy);
        if busy {
            ChannelState::Busy
        } else {
            ChannelState::Idle
        }
    }

    fn compare_payload(&mut self, sent: &[u8], received: &[u8]) {
        let Ok(m) = frame::parse_mpdu(sent) else { return };
        if received.len() != sent.len() {
            return;
        }
        let start = 3 + m.addr.len();
        let end = sent.len() - 2;
        for (a, b) in sent[start..end].iter().zip(&received[start..end]) {
            self.stats.bit_errors += u64::from((a ^ b).count_ones());
        }
        self.stats.bits_compared += 8 * (end - start) as u64;
    }
}

struct RxPort<'s, 'a> {
    shared: &'s mut Shared<'a>,
}

impl Medium for RxPort<'_, '_> {
    fn idle(&mut self, symbols: u64) {
        self.shared.rx_now += symbols;
    }

    fn cca(&mut self, symbols: u64, threshold: f64) -> ChannelState {
        let state = self.shared.cca(self.shared.rx_now, symbols, threshold);
        self.shared.rx_now += symbols;
        state
    }

    fn transmit(&mut self, ppdu: &[u8]) {
        let sh = &mut *self.shared;
        let start = sh.rx_now;
        let end = start + ppdu_symbols(ppdu.len());
        let seq = frame::find_ppdu(ppdu).map(|(s, _)| ppdu.get(s + 2).copied().unwrap_or(0)).unwrap_or(0);
        sh.set_state(start, NodeId::Rx, RadioState::Tx);
        sh.event(start, NodeId::Rx, EventKind::TxAck { seq });
        sh.activity.push(Activity { start, end, energy: PEER_ENERGY });
        sh.set_state(end, NodeId::Rx, RadioState::Rx);
        sh.rx_now = end;
        sh.rx_busy_until = end;
        sh.stats.acks_sent += 1;

        let delay = sh.cfg.channel.propagation_delay;
        if sh.cfg.channel.ack_drop_pattern.contains(&sh.attempt) {
            sh.stats.acks_dropped += 1;
            sh.event(end + delay, NodeId::Tx, EventKind::AckDropped { seq });
            return;
        }
        match sh.carry(ppdu) {
            Ok(received) => sh.to_tx.push(Inbound { start: start + delay, end: end + delay, ppdu: received }),
            Err(reason) => sh.event(end + delay, NodeId::Tx, EventKind::Lost { reason }),
        }
    }

    fn listen(&mut self, timeout: u64) -> Option<Heard> {
        self.shared.rx_now += timeout;
        None
    }

    fn turnaround(&mut self, symbols: u64) {
        self.shared.rx_now += symbols;
    }
}

struct TxPort<'s, 'a> {
    shared: &'s mut Shared<'a>,
    receiver: &'s mut Receiver,
}

impl TxPort<'_, '_> {
    fn deliver_to_rx(&mut self, ppdu: &[u8], start: u64, end: u64) {
        let sh = &mut *self.shared;
        let delay = sh.cfg.channel.propagation_delay;
        let (start, end) = (start + delay, end + delay);
        if start < sh.rx_busy_until {
            sh.event(end, NodeId::Rx, EventKind::Lost { reason: "half_duplex".into() });
            return;
        }
        let received = match sh.carry(ppdu) {
            Ok(r) => r,
            Err(reason) => {
                sh.event(end, NodeId::Rx, EventKind::Lost { reason });
                return;
            }
        };
        let sent_mpdu = frame::find_ppdu(ppdu).map(|(s, l)| ppdu[s..s + l].to_vec()).unwrap_or_default();
        if let Ok((s, l)) = frame::find_ppdu(&received) {
            let mpdu = &received[s..s + l];
            if frame::parse_mpdu(mpdu).is_ok() {
                sh.stats.frames_intact += 1;
            }
            sh.compare_payload(&sent_mpdu, mpdu);
        }

        sh.rx_now = sh.rx_now.max(end);
        let cfg: &SessionConfig = sh.cfg;
        let result = self.receiver.on_receive(&received, &cfg.mac, &mut RxPort { shared: &mut *sh });
        let kind = match result.disposition {
            Disposition::Delivered { payload, seq, .. } => {
                sh.stats.frames_delivered += 1;
                EventKind::Delivered { seq, octets: payload.len() }
            }
            Disposition::Ignored(reason) => {
                if reason == IgnoreReason::Duplicate {
                    sh.stats.duplicates += 1;
                }
                EventKind::Ignored { reason: reason.to_string() }
            }
        };
        sh.event(end, NodeId::Rx, kind);
    }
}

impl Medium for TxPort<'_, '_> {
    fn idle(&mut self, symbols: u64) {
        let sh = &mut *self.shared;
        sh.set_state(sh.tx_now, NodeId::Tx, RadioState::Idle);
        sh.event(sh.tx_now, NodeId::Tx, EventKind::Backoff { symbols });
        sh.tx_now += symbols;
    }

    fn cca(&mut self, symbols: u64, threshold: f64) -> ChannelState {
        let sh = &mut *self.shared;
        let start = sh.tx_now;
        sh.set_state(start, NodeId::Tx, RadioState::Cca);
        let state = sh.cca(start, symbols, threshold);
        sh.tx_now += symbols;
        sh.event(sh.tx_now, NodeId::Tx, EventKind::Cca(state));
        state
    }

    fn transmit(&mut self, ppdu: &[u8]) {
        let sh = &mut *self.shared;
        let start = sh.tx_now;
        let symbols = ppdu_symbols(ppdu.len());
        let end = start + symbols;
        sh.set_state(start, NodeId::Tx, RadioState::Tx);
        sh.event(start, NodeId::Tx, EventKind::TxData { seq: sh.current_seq, attempt: sh.attempt, octets: ppdu.len() });
        sh.activity.push(Activity { start, end, energy: PEER_ENERGY });
        sh.stats.frames_sent += 1;
        sh.stats.data_airtime_symbols += symbols;
        sh.tx_now = end;
        self.deliver_to_rx(ppdu, start, end);
        self.shared.attempt += 1;
    }

    fn listen(&mut self, timeout: u64) -> Option<Heard> {
        let sh = &mut *self.shared;
        let now = sh.tx_now;
        sh.set_state(now, NodeId::Tx, RadioState::Rx);
        // Anything that started while this radio was not listening is missed.
        sh.to_tx.retain(|f| f.start >= now);
        let pick = sh
            .to_tx
            .iter()
            .enumerate()
            .filter(|(_, f)| f.end <= now + timeout)
            .min_by_key(|(_, f)| f.end)
            .map(|(i, _)| i);
        match pick {
            Some(i) => {
                let f = sh.to_tx.remove(i);
                sh.tx_now = f.end;
                let matching = frame::find_ppdu(&f.ppdu)
                    .and_then(|(s, l)| frame::parse_mpdu(&f.ppdu[s..s + l]))
                    .is_ok_and(|m| m.fcf.frame_type == FrameType::Ack && m.seq == sh.current_seq);
                let kind = if matching {
                    EventKind::AckReceived { seq: sh.current_seq }
                } else {
                    EventKind::Ignored { reason: "not_matching_ack".into() }
                };
                sh.event(f.end, NodeId::Tx, kind);
                Some(Heard { ppdu: f.ppdu, elapsed: f.end - now })
            }
            None => {
                sh.tx_now = now + timeout;
                sh.event(sh.tx_now, NodeId::Tx, EventKind::AckTimeout);
                None
            }
        }
    }

    fn turnaround(&mut self, symbols: u64) {
        self.shared.tx_now += symbols;
    }
}

/// Runs one session: every payload is sent in order from `cfg.tx` to
/// `cfg.rx`. Fully determined by the configuration and its seed.
pub fn run_session(cfg: &SessionConfig, payloads: &[Vec<u8>]) -> Result<SessionReport, SimError> {
    cfg.validate()?;
    let seed = cfg.channel.seed;
    let mut backoff = substream(seed, stream::BACKOFF);
    let mut seqs = SequenceCounter::starting_at(substream(seed, stream::SEQUENCE).random());
    let mut receiver = Receiver::new(cfg.rx);
    let mut shared = Shared {
        cfg,
        log: EventLog::new(),
        stats: LinkStats { payloads: payloads.len() as u64, ..Default::default() },
        noise: substream(seed, stream::NOISE),
        activity: Vec::new(),
        states: [RadioState::Idle, RadioState::Idle],
        tx_now: 0,
        rx_now: 0,
        rx_busy_until: 0,
        to_tx: Vec::new(),
        attempt: 0,
        current_seq: 0,
        last_event: 0,
    };
    shared.event(0, NodeId::Tx, EventKind::State(RadioState::Idle));
    shared.set_state(0, NodeId::Rx, RadioState::Rx);

    let mut outcomes = Vec::with_capacity(payloads.len());
    for payload in payloads {
        let seq = seqs.next_seq();
        shared.current_seq = seq;
        let mut port = TxPort { shared: &mut shared, receiver: &mut receiver };
        let outcome = mac::mac_send(payload, cfg.rx, cfg.tx, seq, &cfg.mac, &mut port, &mut backoff)?;
        let sh = &mut shared;
        sh.to_tx.clear();
        sh.stats.retransmissions += u64::from(outcome.transmissions.saturating_sub(1));
        match outcome.status {
            TxStatus::Success => sh.stats.acked += 1,
            TxStatus::ChannelAccessFailure => sh.stats.channel_access_failures += 1,
            TxStatus::NoAck => sh.stats.no_acks += 1,
        }
        let now = sh.tx_now;
        sh.event(now, NodeId::Tx, EventKind::Outcome { status: outcome.status, transmissions: outcome.transmissions });
        sh.set_state(now, NodeId::Tx, RadioState::Idle);
        outcomes.push(outcome);
    }

    let span = shared.last_event.max(shared.tx_now).max(shared.rx_now);
    shared.event(span, NodeId::Tx, EventKind::End);
    shared.event(span, NodeId::Rx, EventKind::End);
    let mut log = shared.log;
    log.sort();
    let ledgers = account_energy(&log, &cfg.energy);
    Ok(SessionReport { stats: shared.stats, ledgers, log, outcomes, span })
}

/// Exact air time of a session span.
pub fn span_seconds(span: u64) -> Ratio<u64> {
    Ratio::new(span * energy::SYMBOL_PERIOD_US, 1_000_000)
}
