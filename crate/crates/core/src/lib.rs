//! IEEE 802.15.4 2.4 GHz PHY and a point-to-point MAC subset in software.
//!
//! * [`frame`]: MPDU and PPDU construction, parsing and the FCS.
//! * [`spreading`]: 4-bit symbols to 32-chip sequences and back.
//! * [`modem`]: half-sine O-QPSK over 16-bit I/Q samples, mixing and
//!   packet acquisition.
//! * [`phy`]: the whole transmit and receive chain.
//! * [`mac`]: unslotted CSMA-CA, acknowledged delivery and receive filtering.
//! * [`sim`]: a deterministic two-node link simulator with energy accounting.
//! * [`iqfile`]: sample files and their sidecars.
//!
//! ```
//! use lrwpan::{frame, phy, modem::ModemConfig};
//!
//! let ppdu = frame::build_ppdu(&frame::build_ack_for(0x56)).unwrap();
//! let cfg = ModemConfig::default();
//! let rx = phy::receive(&phy::transmit(&ppdu, &cfg), &cfg).unwrap();
//! assert_eq!(frame::parse_mpdu(&rx.mpdu).unwrap().seq, 0x56);
//! ```

pub mod frame;
pub mod iqfile;
pub mod mac;
pub mod modem;
pub mod phy;
pub mod sim;
pub mod spreading;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/frames.md")]
    mod frames {}
    #[doc = include_str!("../../../book/src/spreading.md")]
    mod spreading {}
    #[doc = include_str!("../../../book/src/modem.md")]
    mod modem {}
    #[doc = include_str!("../../../book/src/mac.md")]
    mod mac {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
