//! The management-frame record shared by every stage.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::Error;
use crate::mac::MacAddress;

/// Sequence numbers are 12-bit and wrap at this modulus.
pub const SEQ_MODULUS: u16 = 4096;

/// Forward distance from `from` to `to` on the 12-bit sequence circle.
pub fn seq_forward_gap(from: u16, to: u16) -> u16 {
    (to.wrapping_sub(from)) % SEQ_MODULUS
}

/// IEEE 802.11 management subtypes retained by the parser.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FrameSubtype {
    AssociationRequest = 0,
    AssociationResponse = 1,
    ReassociationRequest = 2,
    ReassociationResponse = 3,
    ProbeRequest = 4,
    ProbeResponse = 5,
    Beacon = 8,
    Disassociation = 10,
    Authentication = 11,
    Deauthentication = 12,
    Action = 13,
}

impl FrameSubtype {
    pub const ALL: [FrameSubtype; 11] = [
        FrameSubtype::AssociationRequest,
        FrameSubtype::AssociationResponse,
        FrameSubtype::ReassociationRequest,
        FrameSubtype::ReassociationResponse,
        FrameSubtype::ProbeRequest,
        FrameSubtype::ProbeResponse,
        FrameSubtype::Beacon,
        FrameSubtype::Disassociation,
        FrameSubtype::Authentication,
        FrameSubtype::Deauthentication,
        FrameSubtype::Action,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.code() == code)
    }

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub const fn name(self) -> &'static str {
        match self {
            FrameSubtype::AssociationRequest => "AssociationRequest",
            FrameSubtype::AssociationResponse => "AssociationResponse",
            FrameSubtype::ReassociationRequest => "ReassociationRequest",
            FrameSubtype::ReassociationResponse => "ReassociationResponse",
            FrameSubtype::ProbeRequest => "ProbeRequest",
            FrameSubtype::ProbeResponse => "ProbeResponse",
            FrameSubtype::Beacon => "Beacon",
            FrameSubtype::Disassociation => "Disassociation",
            FrameSubtype::Authentication => "Authentication",
            FrameSubtype::Deauthentication => "Deauthentication",
            FrameSubtype::Action => "Action",
        }
    }

    /// Whether the body carries a tagged information-element list.
    pub const fn carries_ies(self) -> bool {
        matches!(
            self,
            FrameSubtype::ProbeRequest
                | FrameSubtype::ProbeResponse
                | FrameSubtype::Beacon
                | FrameSubtype::AssociationRequest
                | FrameSubtype::AssociationResponse
                | FrameSubtype::ReassociationRequest
                | FrameSubtype::ReassociationResponse
        )
    }

    /// Length of the fixed fields preceding the IE list (or the whole
    /// minimal body for subtypes without IEs).
    pub const fn fixed_body_len(self) -> usize {
        match self {
            FrameSubtype::AssociationRequest => 4,
            FrameSubtype::AssociationResponse => 6,
            FrameSubtype::ReassociationRequest => 10,
            FrameSubtype::ReassociationResponse => 6,
            FrameSubtype::ProbeRequest => 0,
            FrameSubtype::ProbeResponse | FrameSubtype::Beacon => 12,
            FrameSubtype::Disassociation | FrameSubtype::Deauthentication => 2,
            FrameSubtype::Authentication => 6,
            FrameSubtype::Action => 1,
        }
    }
}

impl fmt::Display for FrameSubtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameSubtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|sub| sub.name() == s)
            .ok_or_else(|| Error::config(alloc::format!("unknown frame subtype {s:?}")))
    }
}

/// A tagged TLV field from a management frame body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InformationElement {
    pub tag: u8,
    pub body: Vec<u8>,
}

impl InformationElement {
    pub fn new(tag: u8, body: Vec<u8>) -> Self {
        InformationElement { tag, body }
    }
}

/// One parsed 802.11 management frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ManagementFrame {
    /// Seconds; absolute as read from the capture, relative after sanitizing.
    pub timestamp: f64,
    pub src: MacAddress,
    pub dst: MacAddress,
    pub subtype: FrameSubtype,
    /// 12-bit sequence number (0..=4095).
    pub seq_num: u16,
    pub ies: Vec<InformationElement>,
    pub capture_id: String,
    /// Packet record index within the capture.
    pub ordinal: u64,
    /// Set once the addresses have been replaced by keyed pseudonyms.
    pub pseudonymized: bool,
}

impl ManagementFrame {
    pub fn is_broadcast(&self) -> bool {
        self.dst.is_broadcast()
    }

    pub fn ie_tags(&self) -> impl Iterator<Item = u8> + '_ {
        self.ies.iter().map(|ie| ie.tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtype_codes_round_trip() {
        for sub in FrameSubtype::ALL {
            assert_eq!(FrameSubtype::from_code(sub.code()), Some(sub));
            assert_eq!(sub.name().parse::<FrameSubtype>().unwrap(), sub);
        }
        for code in [6u8, 7, 9, 14, 15] {
            assert_eq!(FrameSubtype::from_code(code), None);
        }
    }

    #[test]
    fn forward_gap_wraps() {
        assert_eq!(seq_forward_gap(4090, 6), 12);
        assert_eq!(seq_forward_gap(4095, 2), 3);
        assert_eq!(seq_forward_gap(100, 103), 3);
        assert_eq!(seq_forward_gap(7, 7), 0);
    }
}
