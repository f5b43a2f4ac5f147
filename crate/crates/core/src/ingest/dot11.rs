use alloc::vec::Vec;

use crate::frame::{FrameSubtype, InformationElement};
use crate::mac::MacAddress;

const MGMT_HEADER_LEN: usize = 24;
const FC_TYPE_MANAGEMENT: u8 = 0;
const FC1_MORE_FRAGMENTS: u8 = 0x04;
const FC1_PROTECTED: u8 = 0x40;
const FC1_ORDER: u8 = 0x80;

/// Why a captured 802.11 frame was not materialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeSkip {
    /// Control or data frame.
    NotManagement,
    /// Management frame with a subtype outside [`FrameSubtype`].
    UnknownSubtype,
    /// Non-zero fragment number.
    Fragment,
    /// Truncated header or IE list.
    Malformed,
}

/// The 802.11 fields the pipeline keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedFrame {
    pub subtype: FrameSubtype,
    pub dst: MacAddress,
    pub src: MacAddress,
    pub seq_num: u16,
    pub ies: Vec<InformationElement>,
}

/// Decodes one 802.11 frame (no FCS).
pub fn decode_frame(data: &[u8]) -> Result<DecodedFrame, DecodeSkip> {
    if data.len() < 2 {
        return Err(DecodeSkip::Malformed);
    }
    let fc0 = data[0];
    let fc1 = data[1];
    let frame_type = (fc0 >> 2) & 0x03;
    if fc0 & 0x03 != 0 {
        // protocol version must be 0
        return Err(DecodeSkip::Malformed);
    }
    if frame_type != FC_TYPE_MANAGEMENT {
        return Err(DecodeSkip::NotManagement);
    }
    let subtype = FrameSubtype::from_code(fc0 >> 4).ok_or(DecodeSkip::UnknownSubtype)?;
    let header_len = if fc1 & FC1_ORDER != 0 { MGMT_HEADER_LEN + 4 } else { MGMT_HEADER_LEN };
    if data.len() < header_len {
        return Err(DecodeSkip::Malformed);
    }
    let dst = MacAddress::from_slice(&data[4..10]);
    let src = MacAddress::from_slice(&data[10..16]);
    let seq_ctl = u16::from_le_bytes([data[22], data[23]]);
    if seq_ctl & 0x000f != 0 {
        return Err(DecodeSkip::Fragment);
    }
    let seq_num = seq_ctl >> 4;

    let body = &data[header_len..];
    let mut ies = Vec::new();
    let protected = fc1 & FC1_PROTECTED != 0;
    if subtype.carries_ies() && !protected {
        let fixed = subtype.fixed_body_len();
        if body.len() < fixed {
            return Err(DecodeSkip::Malformed);
        }
        let mut rest = &body[fixed..];
        while !rest.is_empty() {
            if rest.len() < 2 {
                return Err(DecodeSkip::Malformed);
            }
            let tag = rest[0];
            let len = rest[1] as usize;
            if rest.len() < 2 + len {
                return Err(DecodeSkip::Malformed);
            }
            ies.push(InformationElement::new(tag, rest[2..2 + len].to_vec()));
            rest = &rest[2 + len..];
        }
    } else if fc1 & FC1_MORE_FRAGMENTS == 0 && !protected && body.len() < subtype.fixed_body_len() {
        return Err(DecodeSkip::Malformed);
    }

    Ok(DecodedFrame { subtype, dst, src, seq_num, ies })
}

/// Encodes a management frame with zeroed fixed fields and no FCS.
///
/// IEs longer than 255 bytes cannot be represented and are truncated.
pub fn encode_frame(
    subtype: FrameSubtype,
    dst: MacAddress,
    src: MacAddress,
    seq_num: u16,
    ies: &[InformationElement],
) -> Vec<u8> {
    let mut out = Vec::with_capacity(MGMT_HEADER_LEN + 16);
    out.push((subtype.code() << 4) | (FC_TYPE_MANAGEMENT << 2));
    out.push(0);
    out.extend_from_slice(&[0, 0]); // duration
    out.extend_from_slice(&dst.octets());
    out.extend_from_slice(&src.octets());
    // BSSID: the addressed station, or wildcard for broadcast
    out.extend_from_slice(&dst.octets());
    out.extend_from_slice(&((seq_num & 0x0fff) << 4).to_le_bytes());
    out.resize(out.len() + subtype.fixed_body_len(), 0);
    if subtype.carries_ies() {
        for ie in ies {
            let len = ie.body.len().min(255);
            out.push(ie.tag);
            out.push(len as u8);
            out.extend_from_slice(&ie.body[..len]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn header(fc0: u8, seq: [u8; 2]) -> Vec<u8> {
        let mut v = vec![fc0, 0, 0, 0];
        v.extend_from_slice(&[0xff; 6]);
        v.extend_from_slice(&[0x02, 0, 0, 0x11, 0x22, 0x33]);
        v.extend_from_slice(&[0xff; 6]);
        v.extend_from_slice(&seq);
        v
    }

    #[test]
    fn probe_request_subtype_bits() {
        // type=0 subtype=4 -> 0b0100_00_00
        let f = decode_frame(&header(0x40, [0x50, 0x01])).unwrap();
        assert_eq!(f.subtype, FrameSubtype::ProbeRequest);
        assert_eq!(f.seq_num, 21);
        assert!(f.dst.is_broadcast());
    }

    #[test]
    fn control_and_data_are_skipped() {
        assert_eq!(decode_frame(&header(0x04 | 0xb0, [0, 0])), Err(DecodeSkip::NotManagement));
        assert_eq!(decode_frame(&header(0x08, [0, 0])), Err(DecodeSkip::NotManagement));
        assert_eq!(decode_frame(&header(0x60, [0, 0])), Err(DecodeSkip::UnknownSubtype));
    }

    #[test]
    fn nonzero_fragment_is_skipped() {
        assert_eq!(decode_frame(&header(0x40, [0x51, 0x01])), Err(DecodeSkip::Fragment));
    }

    #[test]
    fn truncated_ie_is_malformed() {
        let mut f = header(0x40, [0, 0]);
        f.extend_from_slice(&[0, 5, b'a', b'b']);
        assert_eq!(decode_frame(&f), Err(DecodeSkip::Malformed));
        assert_eq!(decode_frame(&f[..20]), Err(DecodeSkip::Malformed));
    }

    #[test]
    fn encode_decode_beacon_with_ies() {
        let ies = vec![InformationElement::new(0, b"net".to_vec()), InformationElement::new(221, vec![1, 2])];
        let src: MacAddress = "3c:aa:bb:01:02:03".parse().unwrap();
        let bytes = encode_frame(FrameSubtype::Beacon, MacAddress::BROADCAST, src, 4095, &ies);
        let f = decode_frame(&bytes).unwrap();
        assert_eq!(f.subtype, FrameSubtype::Beacon);
        assert_eq!(f.src, src);
        assert_eq!(f.seq_num, 4095);
        assert_eq!(f.ies, ies);
    }
}
