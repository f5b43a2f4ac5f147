use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::dot11::{decode_frame, encode_frame, DecodeSkip};
use crate::error::{Error, Result};
use crate::frame::ManagementFrame;

pub const PCAP_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
const MAGIC_NANOS: u32 = 0xa1b2_3c4d;
const SNAPLEN: u32 = 65_535;

const RADIOTAP_FLAGS_FCS: u8 = 0x10;
const RADIOTAP_FLAGS_BAD_FCS: u8 = 0x40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkType {
    /// LINKTYPE_IEEE802_11: raw 802.11 frames without FCS.
    Ieee80211,
    /// LINKTYPE_IEEE802_11_RADIOTAP.
    Radiotap,
}

impl LinkType {
    pub const fn code(self) -> u32 {
        match self {
            LinkType::Ieee80211 => 105,
            LinkType::Radiotap => 127,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            105 => Ok(LinkType::Ieee80211),
            127 => Ok(LinkType::Radiotap),
            other => Err(Error::UnsupportedLinkType(other)),
        }
    }
}

/// Per-capture counters for records that did not become frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub records: u64,
    pub frames: u64,
    /// Control and data frames.
    pub dropped_non_management: u64,
    pub dropped_unknown_subtype: u64,
    pub dropped_fragments: u64,
    pub malformed: u64,
    /// Set when the final record header or body ran past end of input.
    pub truncated_tail: bool,
}

impl ParseStats {
    pub fn skipped(&self) -> u64 {
        self.dropped_non_management + self.dropped_unknown_subtype + self.dropped_fragments + self.malformed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCapture {
    pub link_type: LinkType,
    pub frames: Vec<ManagementFrame>,
    pub stats: ParseStats,
}

#[derive(Clone, Copy)]
struct Endian {
    big: bool,
}

impl Endian {
    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        if self.big { u16::from_be_bytes(a) } else { u16::from_le_bytes(a) }
    }

    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        if self.big { u32::from_be_bytes(a) } else { u32::from_le_bytes(a) }
    }
}

/// Parses a classic pcap stream into management frames, in capture order.
///
/// Record-level problems are counted in [`ParseStats`] and never abort the
/// parse; only an unreadable global header or an unsupported link type is
/// an error.
pub fn parse_capture(bytes: &[u8], capture_id: &str) -> Result<ParsedCapture> {
    if bytes.len() < PCAP_HEADER_LEN {
        return Err(Error::Format("file shorter than the 24-byte pcap header".to_string()));
    }
    let raw_magic = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let (endian, nanos) = if raw_magic == MAGIC_MICROS {
        (Endian { big: false }, false)
    } else if raw_magic == MAGIC_MICROS.swap_bytes() {
        (Endian { big: true }, false)
    } else if raw_magic == MAGIC_NANOS {
        (Endian { big: false }, true)
    } else if raw_magic == MAGIC_NANOS.swap_bytes() {
        (Endian { big: true }, true)
    } else {
        return Err(Error::Format(alloc::format!("bad pcap magic {raw_magic:#010x}")));
    };
    let major = endian.u16(&bytes[4..6]);
    if major != 2 {
        return Err(Error::Format(alloc::format!("unsupported pcap version {major}")));
    }
    // upper bits may carry FCS-length metadata
    let link_type = LinkType::from_code(endian.u32(&bytes[20..24]) & 0x0fff_ffff)?;

    let capture_id: String = capture_id.into();
    let mut stats = ParseStats::default();
    let mut frames = Vec::new();
    let mut pos = PCAP_HEADER_LEN;
    let mut ordinal = 0u64;
    while pos < bytes.len() {
        if bytes.len() - pos < RECORD_HEADER_LEN {
            stats.truncated_tail = true;
            break;
        }
        let rec = &bytes[pos..pos + RECORD_HEADER_LEN];
        let ts_sec = endian.u32(&rec[0..4]);
        let ts_frac = endian.u32(&rec[4..8]);
        let incl_len = endian.u32(&rec[8..12]) as usize;
        pos += RECORD_HEADER_LEN;
        if bytes.len() - pos < incl_len {
            stats.truncated_tail = true;
            break;
        }
        let data = &bytes[pos..pos + incl_len];
        pos += incl_len;
        let this_ordinal = ordinal;
        ordinal += 1;
        stats.records += 1;

        let ticks_per_sec: u64 = if nanos { 1_000_000_000 } else { 1_000_000 };
        let ticks = ts_sec as u64 * ticks_per_sec + ts_frac as u64;
        let timestamp = ticks as f64 / ticks_per_sec as f64;
        let dot11 = match link_type {
            LinkType::Ieee80211 => Some(data),
            LinkType::Radiotap => strip_radiotap(data),
        };
        let Some(dot11) = dot11 else {
            stats.malformed += 1;
            continue;
        };
        match decode_frame(dot11) {
            Ok(d) => {
                stats.frames += 1;
                frames.push(ManagementFrame {
                    timestamp,
                    src: d.src,
                    dst: d.dst,
                    subtype: d.subtype,
                    seq_num: d.seq_num,
                    ies: d.ies,
                    capture_id: capture_id.clone(),
                    ordinal: this_ordinal,
                    pseudonymized: false,
                });
            }
            Err(DecodeSkip::NotManagement) => stats.dropped_non_management += 1,
            Err(DecodeSkip::UnknownSubtype) => stats.dropped_unknown_subtype += 1,
            Err(DecodeSkip::Fragment) => stats.dropped_fragments += 1,
            Err(DecodeSkip::Malformed) => stats.malformed += 1,
        }
    }
    Ok(ParsedCapture { link_type, frames, stats })
}

/// Returns the 802.11 frame behind a radiotap header, with any FCS removed.
/// `None` if the header is inconsistent or the frame failed its FCS check.
fn strip_radiotap(data: &[u8]) -> Option<&[u8]> {
    if data.len() < 8 || data[0] != 0 {
        return None;
    }
    let len = u16::from_le_bytes([data[2], data[3]]) as usize;
    if len < 8 || len > data.len() {
        return None;
    }
    let first_present = u32::from_le_bytes([data[4], data[5], data[6], data[7]]);
    // walk extended presence words
    let mut offset = 8;
    let mut word = first_present;
    while word & 0x8000_0000 != 0 {
        if offset + 4 > len {
            return None;
        }
        word = u32::from_le_bytes([data[offset], data[offset + 1], data[offset + 2], data[offset + 3]]);
        offset += 4;
    }
    let mut flags = 0u8;
    if first_present & 0x1 != 0 {
        // TSFT: u64, 8-byte aligned
        offset = (offset + 7) & !7;
        offset += 8;
    }
    if first_present & 0x2 != 0 {
        if offset >= len {
            return None;
        }
        flags = data[offset];
    }
    if flags & RADIOTAP_FLAGS_BAD_FCS != 0 {
        return None;
    }
    let mut frame = &data[len..];
    if flags & RADIOTAP_FLAGS_FCS != 0 {
        if frame.len() < 4 {
            return None;
        }
        frame = &frame[..frame.len() - 4];
    }
    Some(frame)
}

/// Microsecond tick for `t` seconds: floor, except that values within a
/// thousandth of a tick of an integer are rounded so that already-quantized
/// timestamps survive the float multiply.
fn micros(t: f64) -> u64 {
    if !(t > 0.0) {
        return 0;
    }
    let x = t * 1e6;
    let r = libm::round(x);
    let ticks = if libm::fabs(x - r) < 1e-3 { r } else { libm::floor(x) };
    ticks as u64
}

/// Writes frames as a little-endian classic pcap (linktype 105, µs ticks).
pub fn write_capture(frames: &[ManagementFrame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(PCAP_HEADER_LEN + frames.len() * 64);
    out.extend_from_slice(&MAGIC_MICROS.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes()); // thiszone
    out.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
    out.extend_from_slice(&SNAPLEN.to_le_bytes());
    out.extend_from_slice(&LinkType::Ieee80211.code().to_le_bytes());
    for frame in frames {
        let body = encode_frame(frame.subtype, frame.dst, frame.src, frame.seq_num, &frame.ies);
        let us = micros(frame.timestamp);
        let sec = (us / 1_000_000).min(u32::MAX as u64) as u32;
        let usec = (us % 1_000_000) as u32;
        out.extend_from_slice(&sec.to_le_bytes());
        out.extend_from_slice(&usec.to_le_bytes());
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
    }
    out
}
