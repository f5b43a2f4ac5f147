//! Client filtering, burst segmentation and P-sized burst grouping.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::frame::{FrameSubtype, ManagementFrame};
use crate::mac::MacAddress;

/// Maximum same-MAC inter-frame gap inside one burst, in seconds.
pub const DEFAULT_BURST_GAP: f64 = 1.0;

/// Gap comparisons tolerate float noise far below the capture tick (1 µs).
const GAP_EPSILON: f64 = 1e-9;

/// Grouping size that puts all of a device's bursts into one group.
pub const ALL_BURSTS: usize = usize::MAX;

/// Ground-truth device label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct DeviceId(pub String);

impl DeviceId {
    pub fn new(id: impl Into<String>) -> Self {
        DeviceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier assigned to one burst group (one fingerprint).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PseudoId(pub u64);

impl fmt::Display for PseudoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A maximal same-MAC run of frames with gaps of at most the burst gap.
#[derive(Clone, Debug, PartialEq)]
pub struct Burst {
    pub capture_id: String,
    pub mac: MacAddress,
    pub frames: Vec<ManagementFrame>,
    pub start_time: f64,
    pub end_time: f64,
    pub index_within_mac: usize,
}

impl Burst {
    pub fn first(&self) -> &ManagementFrame {
        &self.frames[0]
    }

    pub fn last(&self) -> &ManagementFrame {
        &self.frames[self.frames.len() - 1]
    }
}

/// Consecutive bursts of one device sharing a pseudo identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct BurstGroup {
    pub pseudo_id: PseudoId,
    /// `None` for bursts whose MAC has no ground truth.
    pub device_id: Option<DeviceId>,
    pub bursts: Vec<Burst>,
    /// Trailing group holding fewer than `P` bursts.
    pub partial: bool,
}

impl BurstGroup {
    pub fn frames(&self) -> impl Iterator<Item = &ManagementFrame> {
        self.bursts.iter().flat_map(|b| b.frames.iter())
    }

    pub fn start_time(&self) -> f64 {
        self.bursts.first().map_or(0.0, |b| b.start_time)
    }
}

/// Drops every frame from MACs that ever send a Beacon or Association
/// Response; those MACs are returned as the excluded set.
pub fn filter_clients(frames: &[ManagementFrame]) -> (Vec<ManagementFrame>, BTreeSet<MacAddress>) {
    let excluded: BTreeSet<MacAddress> = frames
        .iter()
        .filter(|f| matches!(f.subtype, FrameSubtype::Beacon | FrameSubtype::AssociationResponse))
        .map(|f| f.src)
        .collect();
    let kept = frames.iter().filter(|f| !excluded.contains(&f.src)).cloned().collect();
    (kept, excluded)
}

/// Splits frames into per-(capture, MAC) bursts.
///
/// A new burst starts only when the gap to the previous same-MAC frame
/// strictly exceeds `gap`. Output is ordered by start time, then MAC.
pub fn segment_bursts(frames: &[ManagementFrame], gap: f64) -> Result<Vec<Burst>> {
    if !(gap > 0.0) || !gap.is_finite() {
        return Err(Error::config(alloc::format!("burst gap must be positive, got {gap}")));
    }
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by(|&a, &b| frames[a].timestamp.total_cmp(&frames[b].timestamp));

    let mut streams: BTreeMap<(&str, MacAddress), Vec<&ManagementFrame>> = BTreeMap::new();
    for &i in &order {
        let f = &frames[i];
        streams.entry((f.capture_id.as_str(), f.src)).or_default().push(f);
    }

    let mut bursts = Vec::new();
    for ((capture_id, mac), stream) in streams {
        let mut index = 0;
        let mut current: Vec<ManagementFrame> = Vec::new();
        for f in stream {
            if let Some(prev) = current.last() {
                if f.timestamp - prev.timestamp > gap + GAP_EPSILON {
                    bursts.push(make_burst(capture_id, mac, core::mem::take(&mut current), index));
                    index += 1;
                }
            }
            current.push(f.clone());
        }
        if !current.is_empty() {
            bursts.push(make_burst(capture_id, mac, current, index));
        }
    }
    bursts.sort_by(|a, b| {
        a.start_time
            .total_cmp(&b.start_time)
            .then(a.mac.cmp(&b.mac))
            .then(a.capture_id.cmp(&b.capture_id))
            .then(a.index_within_mac.cmp(&b.index_within_mac))
    });
    Ok(bursts)
}

fn make_burst(capture_id: &str, mac: MacAddress, frames: Vec<ManagementFrame>, index: usize) -> Burst {
    Burst {
        capture_id: capture_id.into(),
        mac,
        start_time: frames[0].timestamp,
        end_time: frames[frames.len() - 1].timestamp,
        frames,
        index_within_mac: index,
    }
}

/// Chunks each device's bursts, in time order, into groups of `p`.
///
/// Groups never span captures. MACs missing from `device_map` (or mapped
/// to `None`) are unlabeled and grouped per MAC. A trailing group smaller
/// than `p` is kept and flagged `partial`. Pseudo ids are assigned in
/// order of group start time.
pub fn group_bursts(
    bursts: &[Burst],
    p: usize,
    device_map: &BTreeMap<MacAddress, Option<DeviceId>>,
) -> Result<Vec<BurstGroup>> {
    if p < 1 {
        return Err(Error::config("grouping size P must be at least 1"));
    }
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum ChainKey {
        Device(DeviceId),
        Unlabeled(MacAddress),
    }
    let mut chains: BTreeMap<(&str, ChainKey), Vec<&Burst>> = BTreeMap::new();
    for b in bursts {
        let key = match device_map.get(&b.mac).cloned().flatten() {
            Some(device) => ChainKey::Device(device),
            None => ChainKey::Unlabeled(b.mac),
        };
        chains.entry((b.capture_id.as_str(), key)).or_default().push(b);
    }

    let mut groups = Vec::new();
    for ((_, key), mut chain) in chains {
        chain.sort_by(|a, b| {
            a.start_time
                .total_cmp(&b.start_time)
                .then(a.mac.cmp(&b.mac))
                .then(a.index_within_mac.cmp(&b.index_within_mac))
        });
        let device_id = match &key {
            ChainKey::Device(d) => Some(d.clone()),
            ChainKey::Unlabeled(_) => None,
        };
        for chunk in chain.chunks(p) {
            groups.push(BurstGroup {
                pseudo_id: PseudoId(0),
                device_id: device_id.clone(),
                bursts: chunk.iter().map(|b| (*b).clone()).collect(),
                partial: chunk.len() < p && p != ALL_BURSTS,
            });
        }
    }
    groups.sort_by(|a, b| {
        let (fa, fb) = (a.bursts[0].first(), b.bursts[0].first());
        a.start_time()
            .total_cmp(&b.start_time())
            .then(fa.capture_id.cmp(&fb.capture_id))
            .then(a.bursts[0].mac.cmp(&b.bursts[0].mac))
            .then(fa.ordinal.cmp(&fb.ordinal))
    });
    for (i, g) in groups.iter_mut().enumerate() {
        g.pseudo_id = PseudoId(i as u64);
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn probe(t: f64, mac: &str, ordinal: u64) -> ManagementFrame {
        ManagementFrame {
            timestamp: t,
            src: mac.parse().unwrap(),
            dst: MacAddress::BROADCAST,
            subtype: FrameSubtype::ProbeRequest,
            seq_num: (ordinal % 4096) as u16,
            ies: vec![],
            capture_id: "c".into(),
            ordinal,
            pseudonymized: false,
        }
    }

    const A: &str = "02:00:00:00:00:0a";
    const B: &str = "02:00:00:00:00:0b";

    #[test]
    fn beacon_sender_is_excluded_entirely() {
        let mut frames = vec![probe(0.0, A, 0), probe(0.1, A, 1), probe(0.2, A, 2), probe(0.3, B, 3)];
        frames[1].subtype = FrameSubtype::Beacon;
        let (kept, excluded) = filter_clients(&frames);
        assert_eq!(kept, vec![frames[3].clone()]);
        assert_eq!(excluded.into_iter().collect::<Vec<_>>(), vec![A.parse().unwrap()]);
    }

    #[test]
    fn assoc_response_sender_is_excluded() {
        let mut frames = vec![probe(0.0, A, 0), probe(0.1, B, 1)];
        frames[0].subtype = FrameSubtype::AssociationResponse;
        let (kept, excluded) = filter_clients(&frames);
        assert_eq!(kept.len(), 1);
        assert!(excluded.contains(&A.parse().unwrap()));
    }

    #[test]
    fn one_second_boundary_is_inclusive() {
        let frames: Vec<_> = [0.0, 0.5, 1.0, 2.5].iter().enumerate().map(|(i, &t)| probe(t, A, i as u64)).collect();
        let bursts = segment_bursts(&frames, DEFAULT_BURST_GAP).unwrap();
        assert_eq!(bursts.len(), 2);
        assert_eq!(bursts[0].frames.len(), 3);
        assert_eq!((bursts[0].start_time, bursts[0].end_time), (0.0, 1.0));
        assert_eq!(bursts[1].frames.len(), 1);
        assert_eq!(bursts[1].index_within_mac, 1);
    }

    #[test]
    fn single_frame_single_burst() {
        let bursts = segment_bursts(&[probe(4.0, A, 0)], 1.0).unwrap();
        assert_eq!(bursts.len(), 1);
        assert_eq!(bursts[0].start_time, bursts[0].end_time);
    }

    #[test]
    fn unsorted_input_and_ties_keep_input_order() {
        let frames = vec![probe(2.0, A, 0), probe(1.0, A, 1), probe(1.0, A, 2)];
        let bursts = segment_bursts(&frames, 1.0).unwrap();
        let ords: Vec<_> = bursts[0].frames.iter().map(|f| f.ordinal).collect();
        assert_eq!(ords, vec![1, 2, 0]);
    }

    #[test]
    fn bursts_do_not_span_captures() {
        let mut frames = vec![probe(0.0, A, 0), probe(0.5, A, 1)];
        frames[1].capture_id = "other".into();
        assert_eq!(segment_bursts(&frames, 1.0).unwrap().len(), 2);
    }

    #[test]
    fn nonpositive_gap_rejected() {
        assert!(matches!(segment_bursts(&[], 0.0), Err(Error::Config(_))));
        assert!(matches!(segment_bursts(&[], -1.0), Err(Error::Config(_))));
    }

    fn seven_bursts() -> Vec<Burst> {
        let frames: Vec<_> = (0..7).map(|i| probe(i as f64 * 10.0, A, i)).collect();
        segment_bursts(&frames, 1.0).unwrap()
    }

    fn map_a() -> BTreeMap<MacAddress, Option<DeviceId>> {
        [(A.parse().unwrap(), Some(DeviceId::new("dev-a")))].into_iter().collect()
    }

    #[test]
    fn chunking_flags_partial_tail() {
        let groups = group_bursts(&seven_bursts(), 3, &map_a()).unwrap();
        let sizes: Vec<_> = groups.iter().map(|g| g.bursts.len()).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        assert_eq!(groups.iter().map(|g| g.partial).collect::<Vec<_>>(), vec![false, false, true]);
        assert!(groups.iter().all(|g| g.device_id == Some(DeviceId::new("dev-a"))));
    }

    #[test]
    fn p_one_is_identity_chunking() {
        let groups = group_bursts(&seven_bursts(), 1, &map_a()).unwrap();
        assert_eq!(groups.len(), 7);
        assert!(groups.iter().all(|g| !g.partial));
    }

    #[test]
    fn all_bursts_sentinel() {
        let groups = group_bursts(&seven_bursts(), ALL_BURSTS, &map_a()).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].bursts.len(), 7);
        assert!(!groups[0].partial);
    }

    #[test]
    fn unmapped_mac_is_unlabeled() {
        let groups = group_bursts(&seven_bursts(), 2, &BTreeMap::new()).unwrap();
        assert!(groups.iter().all(|g| g.device_id.is_none()));
        assert_eq!(groups.len(), 4);
    }

    #[test]
    fn zero_p_rejected() {
        assert!(matches!(group_bursts(&[], 0, &BTreeMap::new()), Err(Error::Config(_))));
    }
}
