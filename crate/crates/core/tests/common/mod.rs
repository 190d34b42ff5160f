#![allow(dead_code)]

use std::collections::VecDeque;

use lrwpan::frame::{self, Address, AddressInfo, AddrMode, FrameControl, FrameType};
use lrwpan::mac::{ChannelState, Heard, Medium};

/// Bit-serial CRC by polynomial long division, bits taken least
/// significant first, register starting at zero.
pub fn fcs_oracle(data: &[u8]) -> u16 {
    let mut reg: u32 = 0;
    for &byte in data {
        for i in 0..8 {
            let bit = u32::from((byte >> i) & 1);
            let top = (reg >> 15) & 1;
            reg = (reg << 1) & 0xFFFF;
            if top ^ bit == 1 {
                reg ^= 0x1021;
            }
        }
    }
    // The register holds the remainder with x^15 in bit 15; it goes out
    // on the wire highest power first, so reverse into octet-LSB order.
    (reg as u16).reverse_bits()
}

/// A medium driven by scripts instead of a clock.
#[derive(Default)]
pub struct ScriptedMedium {
    /// CCA results in order; idle once exhausted.
    pub cca_script: VecDeque<ChannelState>,
    /// Whether each data transmission is answered; answered once exhausted.
    pub ack_script: VecDeque<bool>,
    pub transmitted: Vec<Vec<u8>>,
    pub cca_count: usize,
    pub idle_symbols: u64,
    pub acks_delivered: usize,
    pending: Option<Vec<u8>>,
}

impl ScriptedMedium {
    pub fn always_busy() -> Self {
        Self { cca_script: std::iter::repeat_n(ChannelState::Busy, 1000).collect(), ..Default::default() }
    }

    pub fn dropping_acks(n: usize) -> Self {
        Self { ack_script: std::iter::repeat_n(false, n).collect(), ..Default::default() }
    }
}

impl Medium for ScriptedMedium {
    fn idle(&mut self, symbols: u64) {
        self.idle_symbols += symbols;
    }

    fn cca(&mut self, _symbols: u64, _threshold: f64) -> ChannelState {
        self.cca_count += 1;
        self.cca_script.pop_front().unwrap_or(ChannelState::Idle)
    }

    fn transmit(&mut self, ppdu: &[u8]) {
        self.transmitted.push(ppdu.to_vec());
        let (start, len) = frame::find_ppdu(ppdu).unwrap();
        let mpdu = frame::parse_mpdu(&ppdu[start..start + len]).unwrap();
        if mpdu.fcf.frame_type == FrameType::Data && self.ack_script.pop_front().unwrap_or(true) {
            self.acks_delivered += 1;
            self.pending = Some(frame::build_ppdu(&frame::build_ack_for(mpdu.seq)).unwrap());
        }
    }

    fn listen(&mut self, _timeout: u64) -> Option<Heard> {
        self.pending.take().map(|ppdu| Heard { ppdu, elapsed: 34 })
    }

    fn turnaround(&mut self, _symbols: u64) {}
}

/// Data frame with short addressing and an arbitrary payload.
pub fn data_frame(seq: u8, payload: &[u8]) -> Vec<u8> {
    let mut fcf = FrameControl::new(FrameType::Data);
    fcf.dest_addr_mode = AddrMode::Short;
    fcf.src_addr_mode = AddrMode::Short;
    fcf.intra_pan = true;
    let addr = AddressInfo {
        dest_pan: Some(0xBEEF),
        dest_addr: Some(Address::Short(0x0002)),
        src_pan: None,
        src_addr: Some(Address::Short(0x0001)),
    };
    frame::build_frame(&fcf, seq, &addr, payload).unwrap()
}
