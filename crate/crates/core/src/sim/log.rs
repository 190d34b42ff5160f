//! Session event log. One line per event:
//! `<symbol_time> <node> <event> <detail>`.

use std::fmt;

use crate::mac::{ChannelState, TxStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Tx,
    Rx,
}

impl NodeId {
    pub const ALL: [NodeId; 2] = [NodeId::Tx, NodeId::Rx];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tx => "tx",
            Self::Rx => "rx",
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RadioState {
    Tx,
    Rx,
    Cca,
    Idle,
}

impl RadioState {
    pub const ALL: [RadioState; 4] = [RadioState::Tx, RadioState::Rx, RadioState::Cca, RadioState::Idle];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tx => "TX",
            Self::Rx => "RX",
            Self::Cca => "CCA",
            Self::Idle => "IDLE",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    State(RadioState),
    Backoff { symbols: u64 },
    Cca(ChannelState),
    TxData { seq: u8, attempt: u64, octets: usize },
    TxAck { seq: u8 },
    AckDropped { seq: u8 },
    AckReceived { seq: u8 },
    AckTimeout,
    Delivered { seq: u8, octets: usize },
    Ignored { reason: String },
    Lost { reason: String },
    Outcome { status: TxStatus, transmissions: u32 },
    End,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::State(s) => write!(f, "STATE {}", s.name()),
            Self::Backoff { symbols } => write!(f, "BACKOFF symbols={symbols}"),
            Self::Cca(ChannelState::Idle) => f.write_str("CCA idle"),
            Self::Cca(ChannelState::Busy) => f.write_str("CCA busy"),
            Self::TxData { seq, attempt, octets } => write!(f, "TX_DATA seq={seq} attempt={attempt} octets={octets}"),
            Self::TxAck { seq } => write!(f, "TX_ACK seq={seq}"),
            Self::AckDropped { seq } => write!(f, "ACK_DROPPED seq={seq}"),
            Self::AckReceived { seq } => write!(f, "ACK_RX seq={seq}"),
            Self::AckTimeout => f.write_str("ACK_TIMEOUT -"),
            Self::Delivered { seq, octets } => write!(f, "DELIVERED seq={seq} octets={octets}"),
            Self::Ignored { reason } => write!(f, "IGNORED {reason}"),
            Self::Lost { reason } => write!(f, "LOST {reason}"),
            Self::Outcome { status, transmissions } => {
                let s = match status {
                    TxStatus::Success => "success",
                    TxStatus::ChannelAccessFailure => "channel_access_failure",
                    TxStatus::NoAck => "no_ack",
                };
                write!(f, "OUTCOME {s} transmissions={transmissions}")
            }
            Self::End => f.write_str("END -"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time: u64,
    pub node: NodeId,
    pub kind: EventKind,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.time, self.node, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: u64, node: NodeId, kind: EventKind) {
        self.events.push(Event { time, node, kind });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Orders events by time, keeping insertion order among equal times.
    pub fn sort(&mut self) {
        self.events.sort_by_key(|e| e.time);
    }

    /// Time of the `END` event, if the log is closed.
    pub fn end_time(&self) -> Option<u64> {
        self.events.iter().rev().find(|e| e.kind == EventKind::End).map(|e| e.time)
    }

    /// State changes of one node, in log order.
    pub fn states(&self, node: NodeId) -> impl Iterator<Item = (u64, RadioState)> + '_ {
        self.events.iter().filter(move |e| e.node == node).filter_map(|e| match e.kind {
            EventKind::State(s) => Some((e.time, s)),
            _ => None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}
