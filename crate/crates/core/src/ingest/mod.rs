//! Capture parsing, sanitization and randomized-MAC flagging.

mod dot11;
mod oui;
mod pcap;
mod sanitize;

pub use dot11::{decode_frame, encode_frame, DecodeSkip, DecodedFrame};
pub use oui::{is_randomized_mac, OuiTable};
pub use pcap::{
    parse_capture, write_capture, LinkType, ParseStats, ParsedCapture, PCAP_HEADER_LEN,
};
pub use sanitize::{pseudonym, sanitize};
