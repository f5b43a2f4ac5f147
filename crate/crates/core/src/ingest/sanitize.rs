use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::ManagementFrame;
use crate::mac::MacAddress;

const SSID_TAG: u8 = 0;
const FLAG_BITS: u8 = 0x03;

/// Keyed 46-bit pseudonym for `mac`; the U/L and multicast bits of the
/// original are carried over and broadcast maps to itself.
pub fn pseudonym(mac: MacAddress, salt: &[u8]) -> MacAddress {
    if mac.is_broadcast() {
        return mac;
    }
    let mut hasher = Sha256::new();
    hasher.update((salt.len() as u64).to_le_bytes());
    hasher.update(salt);
    hasher.update(mac.octets());
    let digest = hasher.finalize();
    let mut octets = [0u8; 6];
    octets.copy_from_slice(&digest[..6]);
    octets[0] = (octets[0] & !FLAG_BITS) | (mac.octets()[0] & FLAG_BITS);
    MacAddress::new(octets)
}

/// Strips identifying content from a frame list.
///
/// Addresses become keyed pseudonyms, SSID bodies are zeroed (length kept)
/// and timestamps are rebased so the earliest frame is at zero. Frames
/// already marked `pseudonymized` keep their addresses, which makes the
/// operation idempotent for a fixed salt.
pub fn sanitize(frames: &[ManagementFrame], salt: &[u8]) -> Result<Vec<ManagementFrame>> {
    if salt.is_empty() {
        return Err(Error::config("sanitize salt must not be empty"));
    }
    if frames.is_empty() {
        return Err(Error::config("sanitize needs at least one frame"));
    }
    let origin = frames.iter().map(|f| f.timestamp).fold(f64::INFINITY, f64::min);
    Ok(frames
        .iter()
        .map(|f| {
            let mut out = f.clone();
            if !f.pseudonymized {
                out.src = pseudonym(f.src, salt);
                out.dst = pseudonym(f.dst, salt);
                out.pseudonymized = true;
            }
            out.timestamp = f.timestamp - origin;
            for ie in out.ies.iter_mut().filter(|ie| ie.tag == SSID_TAG) {
                ie.body.iter_mut().for_each(|b| *b = 0);
            }
            out
        })
        .collect())
}
