mod common;

use lrwpan::frame::{
    build_frame, build_ppdu, compute_fcs, find_ppdu, parse_mpdu, Address, AddressInfo, AddrMode, Fcs, FrameControl,
    FrameError, FrameType, MAX_MPDU_LEN,
};
use lrwpan::spreading::{octets_to_symbols, symbols_to_octets};
use proptest::prelude::*;

fn addr_mode() -> impl Strategy<Value = AddrMode> {
    prop_oneof![Just(AddrMode::None), Just(AddrMode::Short), Just(AddrMode::Extended)]
}

fn address(mode: AddrMode) -> BoxedStrategy<Option<Address>> {
    match mode {
        AddrMode::None => Just(None).boxed(),
        AddrMode::Short => any::<u16>().prop_map(|a| Some(Address::Short(a))).boxed(),
        AddrMode::Extended => any::<u64>().prop_map(|a| Some(Address::Extended(a))).boxed(),
    }
}

/// Consistent frame control and addressing for Data frames.
fn header() -> impl Strategy<Value = (FrameControl, AddressInfo)> {
    (addr_mode(), addr_mode(), any::<bool>(), any::<bool>(), any::<bool>())
        .prop_flat_map(|(dm, sm, intra, pending, ack)| {
            let mut fcf = FrameControl::new(FrameType::Data);
            fcf.dest_addr_mode = dm;
            fcf.src_addr_mode = sm;
            fcf.intra_pan = intra && dm != AddrMode::None && sm != AddrMode::None;
            fcf.frame_pending = pending;
            fcf.ack_request = ack;
            let src_pan = fcf.has_src_pan();
            (Just(fcf), address(dm), address(sm), any::<u16>(), any::<u16>()).prop_map(
                move |(fcf, dest_addr, src_addr, dp, sp)| {
                    let addr = AddressInfo {
                        dest_pan: dest_addr.map(|_| dp),
                        dest_addr,
                        src_pan: src_pan.then_some(sp),
                        src_addr,
                    };
                    (fcf, addr)
                },
            )
        })
}

proptest! {
    #[test]
    fn build_parse_roundtrip((fcf, addr) in header(), seq: u8, payload in prop::collection::vec(any::<u8>(), 0..100)) {
        let bytes = build_frame(&fcf, seq, &addr, &payload).unwrap();
        prop_assert_eq!(bytes.len(), 5 + addr.len() + payload.len());
        let m = parse_mpdu(&bytes).unwrap();
        prop_assert_eq!(m.fcf, fcf);
        prop_assert_eq!(m.seq, seq);
        prop_assert_eq!(m.addr, addr);
        prop_assert_eq!(&m.payload, &payload);
        prop_assert_eq!(m.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn fcs_streaming_matches_one_shot(data in prop::collection::vec(any::<u8>(), 0..300), split in 0usize..300) {
        let split = split.min(data.len());
        let mut fcs = Fcs::new();
        fcs.update(&data[..split]);
        fcs.update(&data[split..]);
        prop_assert_eq!(fcs.finish(), compute_fcs(&data));
        prop_assert_eq!(compute_fcs(&data), common::fcs_oracle(&data));
    }

    #[test]
    fn octet_symbol_identity(data in prop::collection::vec(any::<u8>(), 0..200)) {
        let symbols = octets_to_symbols(&data);
        prop_assert_eq!(symbols.len(), 2 * data.len());
        prop_assert_eq!(symbols_to_octets(&symbols).unwrap(), data);
    }

    #[test]
    fn ppdu_found_after_junk(junk in prop::collection::vec(1u8..=255, 0..20), seq: u8, payload in prop::collection::vec(any::<u8>(), 0..50)) {
        let mpdu = common::data_frame(seq, &payload);
        let mut stream = junk.clone();
        stream.extend(build_ppdu(&mpdu).unwrap());
        let (start, len) = find_ppdu(&stream).unwrap();
        prop_assert_eq!(&stream[start..start + len], &mpdu[..]);
    }

    #[test]
    fn parse_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..140)) {
        let _ = parse_mpdu(&bytes);
        let _ = find_ppdu(&bytes);
    }
}

#[test]
fn oversize_rejected_everywhere() {
    let fcf = FrameControl::new(FrameType::Data);
    let payload = vec![0u8; MAX_MPDU_LEN - 4];
    assert_eq!(
        build_frame(&fcf, 0, &AddressInfo::none(), &payload),
        Err(FrameError::OversizeFrame { len: MAX_MPDU_LEN + 1 })
    );
    assert!(matches!(build_ppdu(&[0u8; 128]), Err(FrameError::OversizeFrame { .. })));
}
