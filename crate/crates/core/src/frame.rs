//! MAC frame codec.
//!
//! Builds, serializes and parses 802.15.4 MPDUs (frame control, sequence
//! number, addressing, payload, FCS) and wraps them in PPDUs for the air.
//! All multi-octet fields are little-endian on the wire.

use thiserror::Error;

/// Largest MPDU the PHY can carry (aMaxPHYPacketSize).
pub const MAX_MPDU_LEN: usize = 127;
/// FCF + sequence number + FCS.
pub const MIN_MPDU_LEN: usize = 5;
/// Synchronization header octets.
pub const PREAMBLE: [u8; 4] = [0x00; 4];
/// Start-of-frame delimiter.
pub const SFD: u8 = 0xA7;
/// Preamble + SFD + frame length.
pub const PHY_HEADER_LEN: usize = 6;
/// Broadcast PAN identifier and short address.
pub const BROADCAST: u16 = 0xFFFF;

const MHR_FIXED_LEN: usize = 3;
const FCS_LEN: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame of {len} octets exceeds the {MAX_MPDU_LEN}-octet limit")]
    OversizeFrame { len: usize },
    #[error("MPDU must contain at least one octet")]
    UndersizeFrame,
    #[error("addressing inconsistent with frame control: {0}")]
    InconsistentAddressing(&'static str),
    #[error("frame of {len} octets is shorter than the {MIN_MPDU_LEN}-octet minimum")]
    TooShort { len: usize },
    #[error("FCS mismatch: computed {computed:#06x}, received {received:#06x}")]
    FcsMismatch { computed: u16, received: u16 },
    #[error("frame too short for the addressing declared in frame control")]
    TruncatedAddressing,
    #[error("reserved addressing mode")]
    ReservedAddrMode,
    #[error("reserved frame type {0}")]
    ReservedFrameType(u8),
    #[error("no PPDU found in stream")]
    NoFrameFound,
}

const fn fcs_table() -> [u16; 256] {
    // x^16 + x^12 + x^5 + 1, bit-reversed for LSB-first processing.
    const POLY: u16 = 0x8408;
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u16;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ POLY } else { crc >> 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static FCS_TABLE: [u16; 256] = fcs_table();

/// Streaming 16-bit frame check sequence (ITU-T CRC, zero initial remainder,
/// bits taken least-significant first).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Fcs {
    crc: u16,
}

impl Fcs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, data: &[u8]) {
        for &byte in data {
            let idx = (self.crc ^ u16::from(byte)) & 0xFF;
            self.crc = (self.crc >> 8) ^ FCS_TABLE[idx as usize];
        }
    }

    pub fn finish(self) -> u16 {
        self.crc
    }
}

/// Checksum of `data` as carried in the MPDU footer.
pub fn compute_fcs(data: &[u8]) -> u16 {
    let mut fcs = Fcs::new();
    fcs.update(data);
    fcs.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    Beacon = 0,
    Data = 1,
    Ack = 2,
    MacCommand = 3,
}

impl FrameType {
    fn from_bits(bits: u16) -> Result<Self, FrameError> {
        match bits {
            0 => Ok(Self::Beacon),
            1 => Ok(Self::Data),
            2 => Ok(Self::Ack),
            3 => Ok(Self::MacCommand),
            other => Err(FrameError::ReservedFrameType(other as u8)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddrMode {
    None = 0,
    Short = 2,
    Extended = 3,
}

impl AddrMode {
    fn from_bits(bits: u16) -> Result<Self, FrameError> {
        match bits {
            0 => Ok(Self::None),
            2 => Ok(Self::Short),
            3 => Ok(Self::Extended),
            _ => Err(FrameError::ReservedAddrMode),
        }
    }

    /// Width of an address in this mode.
    pub fn addr_len(self) -> usize {
        match self {
            Self::None => 0,
            Self::Short => 2,
            Self::Extended => 8,
        }
    }
}

/// Frame control field.
///
/// Bit layout: 0-2 frame type, 3 security enabled, 4 frame pending,
/// 5 ack request, 6 intra-PAN, 10-11 destination addressing mode,
/// 14-15 source addressing mode. Everything else is reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameControl {
    pub frame_type: FrameType,
    pub security_enabled: bool,
    pub frame_pending: bool,
    pub ack_request: bool,
    pub intra_pan: bool,
    pub dest_addr_mode: AddrMode,
    pub src_addr_mode: AddrMode,
}

impl FrameControl {
    /// A frame control of the given type with every flag clear and no
    /// addressing.
    pub fn new(frame_type: FrameType) -> Self {
        Self {
            frame_type,
            security_enabled: false,
            frame_pending: false,
            ack_request: false,
            intra_pan: false,
            dest_addr_mode: AddrMode::None,
            src_addr_mode: AddrMode::None,
        }
    }

    pub fn ack() -> Self {
        Self::new(FrameType::Ack)
    }

    pub fn to_bits(&self) -> u16 {
        (self.frame_type as u16)
            | (u16::from(self.security_enabled) << 3)
            | (u16::from(self.frame_pending) << 4)
            | (u16::from(self.ack_request) << 5)
            | (u16::from(self.intra_pan) << 6)
            | ((self.dest_addr_mode as u16) << 10)
            | ((self.src_addr_mode as u16) << 14)
    }

    /// Decodes the field, ignoring reserved bits.
    pub fn from_bits(bits: u16) -> Result<Self, FrameError> {
        Ok(Self {
            frame_type: FrameType::from_bits(bits & 0x7)?,
            security_enabled: bits & (1 << 3) != 0,
            frame_pending: bits & (1 << 4) != 0,
            ack_request: bits & (1 << 5) != 0,
            intra_pan: bits & (1 << 6) != 0,
            dest_addr_mode: AddrMode::from_bits((bits >> 10) & 0x3)?,
            src_addr_mode: AddrMode::from_bits((bits >> 14) & 0x3)?,
        })
    }

    pub fn to_bytes(&self) -> [u8; 2] {
        self.to_bits().to_le_bytes()
    }

    /// Whether the source PAN identifier is carried on the wire.
    pub fn has_src_pan(&self) -> bool {
        self.src_addr_mode != AddrMode::None
            && !(self.intra_pan && self.dest_addr_mode != AddrMode::None)
    }

    /// Serialized length of the addressing fields this frame control
    /// declares.
    pub fn addressing_len(&self) -> usize {
        let dest = match self.dest_addr_mode {
            AddrMode::None => 0,
            mode => 2 + mode.addr_len(),
        };
        let src_pan = if self.has_src_pan() { 2 } else { 0 };
        dest + src_pan + self.src_addr_mode.addr_len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Address {
    Short(u16),
    Extended(u64),
}

impl Address {
    pub fn mode(&self) -> AddrMode {
        match self {
            Self::Short(_) => AddrMode::Short,
            Self::Extended(_) => AddrMode::Extended,
        }
    }

    fn write(&self, out: &mut Vec<u8>) {
        match *self {
            Self::Short(a) => out.extend_from_slice(&a.to_le_bytes()),
            Self::Extended(a) => out.extend_from_slice(&a.to_le_bytes()),
        }
    }
}

impl std::fmt::Display for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Short(a) => write!(f, "{a:04x}"),
            Self::Extended(a) => write!(f, "{a:016x}"),
        }
    }
}

/// Addressing fields of an MPDU. Which fields are present is fixed by the
/// frame control addressing modes and the intra-PAN flag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct AddressInfo {
    pub dest_pan: Option<u16>,
    pub dest_addr: Option<Address>,
    pub src_pan: Option<u16>,
    pub src_addr: Option<Address>,
}

impl AddressInfo {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        let addr_len = |a: &Option<Address>| a.map_or(0, |a| a.mode().addr_len());
        2 * usize::from(self.dest_pan.is_some())
            + addr_len(&self.dest_addr)
            + 2 * usize::from(self.src_pan.is_some())
            + addr_len(&self.src_addr)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, fcf: &FrameControl) -> Result<(), FrameError> {
        use FrameError::InconsistentAddressing as Bad;
        if fcf.frame_type == FrameType::Ack
            && (fcf.dest_addr_mode != AddrMode::None || fcf.src_addr_mode != AddrMode::None)
        {
            return Err(Bad("acknowledgment frames carry no addresses"));
        }
        let mode_of = |a: &Option<Address>| a.map_or(AddrMode::None, |a| a.mode());
        if mode_of(&self.dest_addr) != fcf.dest_addr_mode {
            return Err(Bad("destination address does not match its addressing mode"));
        }
        if mode_of(&self.src_addr) != fcf.src_addr_mode {
            return Err(Bad("source address does not match its addressing mode"));
        }
        if self.dest_pan.is_some() != (fcf.dest_addr_mode != AddrMode::None) {
            return Err(Bad("destination PAN id presence does not match its addressing mode"));
        }
        if self.src_pan.is_some() != fcf.has_src_pan() {
            return Err(Bad("source PAN id presence does not match addressing mode and intra-PAN flag"));
        }
        Ok(())
    }

    fn write(&self, out: &mut Vec<u8>) {
        if let Some(pan) = self.dest_pan {
            out.extend_from_slice(&pan.to_le_bytes());
        }
        if let Some(addr) = &self.dest_addr {
            addr.write(out);
        }
        if let Some(pan) = self.src_pan {
            out.extend_from_slice(&pan.to_le_bytes());
        }
        if let Some(addr) = &self.src_addr {
            addr.write(out);
        }
    }
}

/// A parsed MAC frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mpdu {
    pub fcf: FrameControl,
    pub seq: u8,
    pub addr: AddressInfo,
    pub payload: Vec<u8>,
    pub fcs: u16,
}

impl Mpdu {
    /// Length of the frame on the wire.
    pub fn len(&self) -> usize {
        MHR_FIXED_LEN + self.addr.len() + self.payload.len() + FCS_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FrameError> {
        build_frame(&self.fcf, self.seq, &self.addr, &self.payload)
    }
}

/// Serializes an MPDU and appends its FCS.
pub fn build_frame(
    fcf: &FrameControl,
    seq: u8,
    addr: &AddressInfo,
    payload: &[u8],
) -> Result<Vec<u8>, FrameError> {
    addr.check(fcf)?;
    let len = MHR_FIXED_LEN + addr.len() + payload.len() + FCS_LEN;
    if len > MAX_MPDU_LEN {
        return Err(FrameError::OversizeFrame { len });
    }
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&fcf.to_bytes());
    out.push(seq);
    addr.write(&mut out);
    out.extend_from_slice(payload);
    let fcs = compute_fcs(&out);
    out.extend_from_slice(&fcs.to_le_bytes());
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

/// Acknowledgment frame for sequence number `seq`.
pub fn build_ack_for(seq: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(MIN_MPDU_LEN);
    out.extend_from_slice(&FrameControl::ack().to_bytes());
    out.push(seq);
    let fcs = compute_fcs(&out);
    out.extend_from_slice(&fcs.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        if self.buf.len() < n {
            return Err(FrameError::TruncatedAddressing);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16, FrameError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn address(&mut self, mode: AddrMode) -> Result<Option<Address>, FrameError> {
        Ok(match mode {
            AddrMode::None => None,
            AddrMode::Short => Some(Address::Short(self.u16()?)),
            AddrMode::Extended => {
                let b = self.take(8)?;
                let mut raw = [0u8; 8];
                raw.copy_from_slice(b);
                Some(Address::Extended(u64::from_le_bytes(raw)))
            }
        })
    }
}

/// Parses and validates an MPDU. The FCS is verified before any header
/// field is interpreted.
pub fn parse_mpdu(bytes: &[u8]) -> Result<Mpdu, FrameError> {
    if bytes.len() < MIN_MPDU_LEN {
        return Err(FrameError::TooShort { len: bytes.len() });
    }
    let (body, tail) = bytes.split_at(bytes.len() - FCS_LEN);
    let received = u16::from_le_bytes([tail[0], tail[1]]);
    let computed = compute_fcs(body);
    if computed != received {
        return Err(FrameError::FcsMismatch { computed, received });
    }

    let fcf = FrameControl::from_bits(u16::from_le_bytes([body[0], body[1]]))?;
    let seq = body[2];
    let mut rd = Reader { buf: &body[MHR_FIXED_LEN..] };
    let mut addr = AddressInfo::none();
    if fcf.dest_addr_mode != AddrMode::None {
        addr.dest_pan = Some(rd.u16()?);
        addr.dest_addr = rd.address(fcf.dest_addr_mode)?;
    }
    if fcf.has_src_pan() {
        addr.src_pan = Some(rd.u16()?);
    }
    addr.src_addr = rd.address(fcf.src_addr_mode)?;

    Ok(Mpdu {
        fcf,
        seq,
        addr,
        payload: rd.buf.to_vec(),
        fcs: received,
    })
}

/// Prefixes an MPDU with preamble, SFD and frame length.
pub fn build_ppdu(mpdu: &[u8]) -> Result<Vec<u8>, FrameError> {
    match mpdu.len() {
        0 => Err(FrameError::UndersizeFrame),
        len if len > MAX_MPDU_LEN => Err(FrameError::OversizeFrame { len }),
        len => {
            let mut out = Vec::with_capacity(PHY_HEADER_LEN + len);
            out.extend_from_slice(&PREAMBLE);
            out.push(SFD);
            out.push(len as u8);
            out.extend_from_slice(mpdu);
            Ok(out)
        }
    }
}

/// Locates the first PPDU in an octet stream.
///
/// Returns the offset of the first MPDU octet and the frame length. A match
/// needs at least one preamble octet before the SFD, a length in `1..=127`
/// and that many octets remaining.
pub fn find_ppdu(stream: &[u8]) -> Result<(usize, usize), FrameError> {
    (1..stream.len())
        .filter(|&i| stream[i] == SFD && stream[i - 1] == 0x00)
        .find_map(|i| {
            let len = usize::from(*stream.get(i + 1)?);
            let start = i + 2;
            ((1..=MAX_MPDU_LEN).contains(&len) && stream.len() - start >= len).then_some((start, len))
        })
        .ok_or(FrameError::NoFrameFound)
}
