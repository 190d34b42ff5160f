//! Whole-packet transmit and receive paths built from the spreading and
//! modem stages.

use thiserror::Error;

use crate::frame::{self, FrameError, MAX_MPDU_LEN, PHY_HEADER_LEN};
use crate::modem::{self, IqBuffer, ModemConfig, ModemError, SAMPLES_PER_CHIP, SAMPLES_PER_SYMBOL};
use crate::spreading::{self, CHIPS_PER_OCTET};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhyError {
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Spreads and modulates a PPDU.
pub fn transmit(ppdu: &[u8], cfg: &ModemConfig) -> IqBuffer {
    modem::modulate(&spreading::spread_octets(ppdu), cfg).buffer
}

/// A packet recovered by [`receive`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Received {
    /// Sample offset of the first detected preamble symbol.
    pub preamble_start: usize,
    /// Recovered PPDU octets, starting with the preamble octet before the SFD.
    pub ppdu: Vec<u8>,
    /// The MPDU octets inside `ppdu`. Not yet checked against its FCS.
    pub mpdu: Vec<u8>,
}

/// Acquires, demodulates and despreads the first packet in `buf`.
pub fn receive(buf: &IqBuffer, cfg: &ModemConfig) -> Result<Received, PhyError> {
    receive_with(buf, cfg, |_, _| {})
}

/// Like [`receive`], passing every hard chip decision through `impair`
/// exactly once before despreading. The first argument is the PPDU octet
/// index, counted from the last preamble octet, where the chips begin:
/// 0 for the header (preamble octet, SFD, length) and 3 for the MPDU.
pub fn receive_with<F: FnMut(usize, &mut [u8])>(buf: &IqBuffer, cfg: &ModemConfig, mut impair: F) -> Result<Received, PhyError> {
    let acq = modem::acquire_frame(buf, cfg)?;
    // Decode from the last preamble octet so the octet boundary is known.
    let start = acq.sfd_start - 2 * SAMPLES_PER_SYMBOL;
    let mut decode = |first: usize, octets: usize| -> Result<Vec<u8>, PhyError> {
        let at = start + first * CHIPS_PER_OCTET * SAMPLES_PER_CHIP;
        let mut chips = modem::demodulate_at(buf, at, octets * CHIPS_PER_OCTET, cfg)?;
        impair(first, &mut chips);
        let symbols: Vec<_> = spreading::despread_chips(&chips).into_iter().map(|(s, _)| s).collect();
        Ok(spreading::symbols_to_octets(&symbols).expect("whole octets"))
    };

    let mut ppdu = decode(0, 3)?;
    let len = usize::from(ppdu[2]);
    if !(1..=MAX_MPDU_LEN).contains(&len) {
        return Err(FrameError::NoFrameFound.into());
    }
    ppdu.extend(decode(3, len)?);
    let (offset, len) = frame::find_ppdu(&ppdu)?;
    let mpdu = ppdu[offset..offset + len].to_vec();
    Ok(Received { preamble_start: acq.preamble_start, ppdu, mpdu })
}

/// Samples per channel for a PPDU of `octets` octets.
pub fn ppdu_samples(octets: usize) -> usize {
    octets * 2 * SAMPLES_PER_SYMBOL + modem::Q_OFFSET
}

/// Octets of a PPDU carrying an MPDU of `mpdu_len` octets.
pub fn ppdu_len(mpdu_len: usize) -> usize {
    PHY_HEADER_LEN + mpdu_len
}
