//! Fixed-size embedding of an FSM: seven scalar features plus a 256-bit
//! information-element presence bitmap.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::burst::{BurstGroup, DeviceId, PseudoId};
use crate::error::{Error, Result};
use crate::frame::FrameSubtype;
use crate::fsm::Fsm;
use crate::rng::child_rng;

pub const SCALAR_FEATURES: usize = 7;
pub const IE_BITS: usize = 256;
/// Total embedding dimension (scalars followed by bitmap flags).
pub const EMBEDDING_DIM: usize = SCALAR_FEATURES + IE_BITS;

pub const X1_STATES: usize = 0;
pub const X2_TRANSITIONS: usize = 1;
pub const X3_SELF_TRANSITIONS: usize = 2;
pub const X4_ENTROPY: usize = 3;
pub const X5_TRANSITION_RATE: usize = 4;
pub const X6_TIME_GAP: usize = 5;
pub const X7_SEQ_GAP: usize = 6;

pub const SCALAR_NAMES: [&str; SCALAR_FEATURES] =
    ["states", "transitions", "self_transitions", "entropy", "transition_rate", "time_gap", "seq_gap"];

/// Presence flags for IE tags 0..=255.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct IeBitmap(pub [u64; 4]);

impl IeBitmap {
    pub fn set(&mut self, tag: u8) {
        self.0[tag as usize / 64] |= 1 << (tag % 64);
    }

    pub fn get(&self, tag: u8) -> bool {
        self.0[tag as usize / 64] & (1 << (tag % 64)) != 0
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn intersection_count(&self, other: &IeBitmap) -> u32 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a & b).count_ones()).sum()
    }

    pub fn union_count(&self, other: &IeBitmap) -> u32 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a | b).count_ones()).sum()
    }

    /// Number of differing flags (Hamming distance).
    pub fn difference_count(&self, other: &IeBitmap) -> u32 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a ^ b).count_ones()).sum()
    }

    pub fn tags(&self) -> impl Iterator<Item = u8> + '_ {
        (0..=255u8).filter(move |&t| self.get(t))
    }

    /// 64 lowercase hex characters: byte `k` holds tags `8k..8k+8`, least
    /// significant bit first.
    pub fn to_hex(&self) -> String {
        const DIGITS: &[u8; 16] = b"0123456789abcdef";
        let mut s = String::with_capacity(64);
        for word in self.0 {
            for byte in word.to_le_bytes() {
                s.push(DIGITS[(byte >> 4) as usize] as char);
                s.push(DIGITS[(byte & 0xf) as usize] as char);
            }
        }
        s
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        if bytes.len() != 64 {
            return Err(Error::config(alloc::format!("IE bitmap hex must be 64 chars, got {}", bytes.len())));
        }
        let nibble = |c: u8| -> Result<u8> {
            (c as char)
                .to_digit(16)
                .map(|d| d as u8)
                .ok_or_else(|| Error::config(alloc::format!("invalid hex digit {:?}", c as char)))
        };
        let mut words = [0u64; 4];
        for (w, word) in words.iter_mut().enumerate() {
            let mut le = [0u8; 8];
            for (k, b) in le.iter_mut().enumerate() {
                let i = (w * 8 + k) * 2;
                *b = (nibble(bytes[i])? << 4) | nibble(bytes[i + 1])?;
            }
            *word = u64::from_le_bytes(le);
        }
        Ok(IeBitmap(words))
    }
}

impl fmt::Debug for IeBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.tags()).finish()
    }
}

impl FromIterator<u8> for IeBitmap {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut bitmap = IeBitmap::default();
        for tag in iter {
            bitmap.set(tag);
        }
        bitmap
    }
}

/// Embedding of one fingerprint (one burst group).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    /// x1..x7, in the order of the `X*` index constants.
    pub scalars: [f64; SCALAR_FEATURES],
    pub ie_bitmap: IeBitmap,
    pub normalized: bool,
    pub fingerprint_id: PseudoId,
    pub device_id: Option<DeviceId>,
}

impl FeatureVector {
    /// The full embedding as a dense vector of [`EMBEDDING_DIM`] entries.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(EMBEDDING_DIM);
        v.extend_from_slice(&self.scalars);
        v.extend((0..=255u8).map(|t| if self.ie_bitmap.get(t) { 1.0 } else { 0.0 }));
        v
    }
}

/// Shannon entropy, in bits, of the transition-pair distribution.
pub fn transition_entropy(fsm: &Fsm) -> f64 {
    let total = fsm.transition_total();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = fsm
        .transitions
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * libm::log2(p)
        })
        .sum();
    // a single pair yields -0.0
    h.max(0.0)
}

/// Computes x1..x7 from an FSM and attaches the IE bitmap of a seeded
/// probe-request draw from `group`.
pub fn extract_features(fsm: &Fsm, group: &BurstGroup, selector_seed: u64) -> FeatureVector {
    let transitions = fsm.transition_total() as f64;
    let rate = if fsm.duration > 0.0 { transitions / fsm.duration } else { 0.0 };
    let max_gap = fsm.inter_burst_gaps.iter().copied().fold(0.0, f64::max);
    FeatureVector {
        scalars: [
            fsm.states.len() as f64,
            transitions,
            fsm.self_transition_total() as f64,
            transition_entropy(fsm),
            rate,
            max_gap,
            fsm.seq_span as f64,
        ],
        ie_bitmap: ie_bitmap(group, selector_seed),
        normalized: false,
        fingerprint_id: group.pseudo_id,
        device_id: group.device_id.clone(),
    }
}

/// Tag-presence bitmap of one probe request drawn uniformly (seeded by
/// `selector_seed` and the group's pseudo id); all-zero if the group has
/// no probe requests.
pub fn ie_bitmap(group: &BurstGroup, selector_seed: u64) -> IeBitmap {
    let probes: Vec<_> = group.frames().filter(|f| f.subtype == FrameSubtype::ProbeRequest).collect();
    if probes.is_empty() {
        return IeBitmap::default();
    }
    let mut rng = child_rng(selector_seed, group.pseudo_id.0);
    let chosen = probes[rng.gen_range(0..probes.len())];
    chosen.ie_tags().collect()
}

/// Per-feature z-score statistics (population standard deviation).
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub mean: [f64; SCALAR_FEATURES],
    pub std: [f64; SCALAR_FEATURES],
}

impl Scaler {
    pub fn fit(vectors: &[FeatureVector]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::config("feature normalization needs at least 2 vectors"));
        }
        let n = vectors.len() as f64;
        let mut mean = [0.0; SCALAR_FEATURES];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v.scalars) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; SCALAR_FEATURES];
        for v in vectors {
            for k in 0..SCALAR_FEATURES {
                let d = v.scalars[k] - mean[k];
                std[k] += d * d;
            }
        }
        std.iter_mut().for_each(|s| *s = libm::sqrt(*s / n));
        Ok(Scaler { mean, std })
    }

    /// Zero-variance features map to 0.
    pub fn transform(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = v.clone();
        for k in 0..SCALAR_FEATURES {
            out.scalars[k] = if self.std[k] > 0.0 { (v.scalars[k] - self.mean[k]) / self.std[k] } else { 0.0 };
        }
        out.normalized = true;
        out
    }
}

/// Z-scores x1..x7 over `vectors`; the bitmap passes through unscaled.
pub fn normalize_features(vectors: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    let scaler = Scaler::fit(vectors)?;
    Ok(vectors.iter().map(|v| scaler.transform(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burst::{segment_bursts, Burst};
    use crate::frame::{InformationElement, ManagementFrame};
    use crate::fsm::{build_fsm, DstClass, FsmState};
    use crate::mac::MacAddress;
    use alloc::collections::{BTreeMap, BTreeSet};
    use alloc::vec;

    fn fsm_with(transitions: &[((u8, u8), u32)]) -> Fsm {
        let st = |k: u8| {
            FsmState::new(
                FrameSubtype::ALL[k as usize],
                if k.is_multiple_of(2) { DstClass::Broadcast } else { DstClass::Unicast },
            )
        };
        let map: BTreeMap<_, _> = transitions.iter().map(|&((a, b), c)| ((st(a), st(b)), c)).collect();
        let states: BTreeSet<_> = map.keys().flat_map(|&(a, b)| [a, b]).collect();
        Fsm {
            initial: *states.iter().next().unwrap(),
            states,
            transitions: map,
            start_time: 0.0,
            duration: 2.0,
            frame_count: 0,
            burst_count: 1,
            inter_burst_gaps: vec![],
            seq_span: 0,
        }
    }

    fn empty_group() -> BurstGroup {
        BurstGroup { pseudo_id: PseudoId(7), device_id: None, bursts: vec![], partial: false }
    }

    #[test]
    fn equiprobable_pairs_give_one_bit() {
        let fsm = fsm_with(&[((0, 0), 2), ((0, 1), 2)]);
        let v = extract_features(&fsm, &empty_group(), 0);
        assert_eq!(v.scalars[X2_TRANSITIONS], 4.0);
        assert_eq!(v.scalars[X3_SELF_TRANSITIONS], 2.0);
        assert_eq!(v.scalars[X4_ENTROPY], 1.0);
        assert_eq!(v.scalars[X5_TRANSITION_RATE], 2.0);
    }

    #[test]
    fn single_pair_entropy_is_zero() {
        assert_eq!(transition_entropy(&fsm_with(&[((0, 1), 5)])), 0.0);
    }

    fn frame(t: f64, seq: u16, subtype: FrameSubtype, tags: &[u8]) -> ManagementFrame {
        ManagementFrame {
            timestamp: t,
            src: "02:00:00:00:00:01".parse().unwrap(),
            dst: MacAddress::BROADCAST,
            subtype,
            seq_num: seq,
            ies: tags.iter().map(|&t| InformationElement::new(t, vec![])).collect(),
            capture_id: "c".into(),
            ordinal: 0,
            pseudonymized: false,
        }
    }

    fn group_of(bursts: Vec<Burst>) -> BurstGroup {
        BurstGroup { pseudo_id: PseudoId(1), device_id: None, bursts, partial: false }
    }

    #[test]
    fn single_frame_burst_conventions() {
        let g = group_of(segment_bursts(&[frame(1.0, 5, FrameSubtype::ProbeRequest, &[])], 1.0).unwrap());
        let v = extract_features(&build_fsm(&g).unwrap(), &g, 0);
        assert_eq!(v.scalars, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn seq_gap_wraps_across_bursts() {
        let frames = [
            frame(0.0, 4089, FrameSubtype::ProbeRequest, &[]),
            frame(0.1, 4090, FrameSubtype::ProbeRequest, &[]),
            frame(30.0, 6, FrameSubtype::ProbeRequest, &[]),
        ];
        let g = group_of(segment_bursts(&frames, 1.0).unwrap());
        let v = extract_features(&build_fsm(&g).unwrap(), &g, 0);
        assert_eq!(v.scalars[X7_SEQ_GAP], 12.0);
        assert!((v.scalars[X6_TIME_GAP] - 29.9).abs() < 1e-12);
    }

    #[test]
    fn presence_encoding() {
        let g = group_of(segment_bursts(&[frame(0.0, 1, FrameSubtype::ProbeRequest, &[0, 1, 50, 221])], 1.0).unwrap());
        let bm = ie_bitmap(&g, 3);
        assert_eq!(bm.tags().collect::<Vec<_>>(), vec![0, 1, 50, 221]);
        assert_eq!(bm.count_ones(), 4);
        assert_eq!(IeBitmap::from_hex(&bm.to_hex()).unwrap(), bm);
    }

    #[test]
    fn no_probe_requests_gives_zero_bitmap() {
        let g = group_of(segment_bursts(&[frame(0.0, 1, FrameSubtype::Authentication, &[])], 1.0).unwrap());
        assert!(ie_bitmap(&g, 1).is_empty());
    }

    #[test]
    fn bitmap_draw_is_seeded() {
        let frames: Vec<_> =
            (0..20u8).map(|i| frame(i as f64 * 0.1, i as u16, FrameSubtype::ProbeRequest, &[i])).collect();
        let g = group_of(segment_bursts(&frames, 1.0).unwrap());
        assert_eq!(ie_bitmap(&g, 11), ie_bitmap(&g, 11));
        let distinct: BTreeSet<_> = (0..40).map(|s| ie_bitmap(&g, s).to_hex()).collect();
        assert!(distinct.len() > 1);
    }

    fn with_scalars(s: [f64; 7]) -> FeatureVector {
        FeatureVector { scalars: s, ie_bitmap: IeBitmap::default(), normalized: false, fingerprint_id: PseudoId(0), device_id: None }
    }

    #[test]
    fn zscore_population() {
        let out = normalize_features(&[with_scalars([2.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0]), with_scalars([4.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0])])
            .unwrap();
        assert_eq!(out[0].scalars[0], -1.0);
        assert_eq!(out[1].scalars[0], 1.0);
        assert_eq!(out[0].scalars[1], 0.0);
        assert!(out.iter().all(|v| v.normalized));
    }

    #[test]
    fn normalization_needs_two() {
        assert!(matches!(normalize_features(&[with_scalars([0.0; 7])]), Err(Error::Config(_))));
    }

    #[test]
    fn hex_rejects_bad_input() {
        assert!(IeBitmap::from_hex("00").is_err());
        let mut s = String::from("g");
        s.push_str(&"0".repeat(63));
        assert!(IeBitmap::from_hex(&s).is_err());
    }
}
