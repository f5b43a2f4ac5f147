//! Frames to fingerprints in one call, plus the matrix/matching shortcuts
//! used by the experiment harness.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::burst::{filter_clients, group_bursts, segment_bursts, BurstGroup, DeviceId, DEFAULT_BURST_GAP};
use crate::error::Result;
use crate::features::{extract_features, normalize_features, FeatureVector};
use crate::frame::ManagementFrame;
use crate::fsm::{build_fsm, Fsm};
use crate::mac::MacAddress;
use crate::similarity::{
    combined_matrix, distance_matrix, nearest_neighbor_match, DistanceMatrix, MatchResult, Metric,
};

/// One burst group with its FSM and raw (unnormalized) feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub group: BurstGroup,
    pub fsm: Fsm,
    pub features: FeatureVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprints {
    pub fingerprints: Vec<Fingerprint>,
    /// MACs dropped as access points.
    pub excluded: BTreeSet<MacAddress>,
}

impl Fingerprints {
    pub fn groups(&self) -> Vec<BurstGroup> {
        self.fingerprints.iter().map(|f| f.group.clone()).collect()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.fingerprints.iter().map(|f| f.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<Option<DeviceId>> {
        self.fingerprints.iter().map(|f| f.group.device_id.clone()).collect()
    }
}

pub fn fingerprint_groups(groups: Vec<BurstGroup>, selector_seed: u64) -> Result<Vec<Fingerprint>> {
    groups
        .into_iter()
        .map(|group| {
            let fsm = build_fsm(&group)?;
            let features = extract_features(&fsm, &group, selector_seed);
            Ok(Fingerprint { group, fsm, features })
        })
        .collect()
}

/// AP filtering, segmentation (1 s gap), grouping by `p` and FSM/feature
/// extraction. Partial groups are dropped unless `include_partial`.
pub fn build_fingerprints(
    frames: &[ManagementFrame],
    device_map: &BTreeMap<MacAddress, Option<DeviceId>>,
    p: usize,
    include_partial: bool,
    selector_seed: u64,
) -> Result<Fingerprints> {
    let (clients, excluded) = filter_clients(frames);
    let bursts = segment_bursts(&clients, DEFAULT_BURST_GAP)?;
    let mut groups = group_bursts(&bursts, p, device_map)?;
    if !include_partial {
        groups.retain(|g| !g.partial);
    }
    Ok(Fingerprints { fingerprints: fingerprint_groups(groups, selector_seed)?, excluded })
}

/// The three base matrices over z-scored vectors, in `Metric::BASE` order.
pub fn base_matrices(vectors: &[FeatureVector]) -> Result<[DistanceMatrix; 3]> {
    let normalized = normalize_features(vectors)?;
    Ok(Metric::BASE.map(|m| distance_matrix(&normalized, m)))
}

/// Matrix for any metric, combined included.
pub fn metric_matrix(vectors: &[FeatureVector], metric: Metric) -> Result<DistanceMatrix> {
    if metric == Metric::Combined {
        let [e, m, c] = base_matrices(vectors)?;
        combined_matrix([&e, &m, &c])
    } else {
        Ok(distance_matrix(&normalize_features(vectors)?, metric))
    }
}

/// Nearest-neighbor matching accuracy for one metric.
pub fn match_fingerprints(vectors: &[FeatureVector], metric: Metric) -> Result<MatchResult> {
    let matrix = metric_matrix(vectors, metric)?;
    let labels: Vec<Option<DeviceId>> = vectors.iter().map(|v| v.device_id.clone()).collect();
    nearest_neighbor_match(&matrix, &labels)
}
