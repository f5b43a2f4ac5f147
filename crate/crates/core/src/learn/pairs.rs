use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::burst::{DeviceId, PseudoId};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::rng::child_rng;
use crate::similarity::Embedding;

/// Labeled fingerprint pair with its three-distance feature.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    /// `[euclidean, cosine, manhattan]`.
    pub features: [f64; 3],
    /// True iff both fingerprints come from the same device.
    pub label: bool,
    pub i: PseudoId,
    pub j: PseudoId,
    pub device_i: DeviceId,
    pub device_j: DeviceId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairPolicy {
    /// Every same-device pair plus an equal number of sampled cross-device pairs.
    #[default]
    Balanced,
    /// Every pair.
    Exhaustive,
}

pub fn pair_features(a: &Embedding, b: &Embedding) -> [f64; 3] {
    [a.euclidean(b), a.cosine(b), a.manhattan(b)]
}

/// Builds labeled pairs from fingerprints with known devices; unlabeled
/// vectors are ignored. Pairs come back ordered by input position.
pub fn build_pairs(vectors: &[FeatureVector], policy: PairPolicy, seed: u64) -> Result<Vec<PairSample>> {
    let labeled: Vec<(usize, &DeviceId)> =
        vectors.iter().enumerate().filter_map(|(i, v)| v.device_id.as_ref().map(|d| (i, d))).collect();
    if labeled.len() < 2 {
        return Err(Error::config("pair building needs at least 2 labeled fingerprints"));
    }
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut negatives_total = 0usize;
    for a in 0..labeled.len() {
        for b in a + 1..labeled.len() {
            if labeled[a].1 == labeled[b].1 {
                chosen.push((a, b));
            } else {
                negatives_total += 1;
            }
        }
    }
    let positives = chosen.len();
    let want_all_negatives = match policy {
        PairPolicy::Exhaustive => true,
        PairPolicy::Balanced => negatives_total <= positives,
    };
    let mut rng = child_rng(seed, 0x7061_6972);
    if want_all_negatives {
        for a in 0..labeled.len() {
            for b in a + 1..labeled.len() {
                if labeled[a].1 != labeled[b].1 {
                    chosen.push((a, b));
                }
            }
        }
    } else if negatives_total <= 4 * positives {
        let mut all: Vec<(usize, usize)> = Vec::with_capacity(negatives_total);
        for a in 0..labeled.len() {
            for b in a + 1..labeled.len() {
                if labeled[a].1 != labeled[b].1 {
                    all.push((a, b));
                }
            }
        }
        let (picked, _) = all.partial_shuffle(&mut rng, positives);
        chosen.extend_from_slice(picked);
    } else {
        let mut seen = BTreeSet::new();
        while seen.len() < positives {
            let a = rng.gen_range(0..labeled.len());
            let b = rng.gen_range(0..labeled.len());
            if a == b || labeled[a].1 == labeled[b].1 {
                continue;
            }
            seen.insert((a.min(b), a.max(b)));
        }
        chosen.extend(seen);
    }
    chosen.sort_unstable();

    let embeddings: Vec<Embedding> = labeled.iter().map(|&(i, _)| Embedding::new(&vectors[i])).collect();
    Ok(chosen
        .into_iter()
        .map(|(a, b)| {
            let (va, vb) = (&vectors[labeled[a].0], &vectors[labeled[b].0]);
            PairSample {
                features: pair_features(&embeddings[a], &embeddings[b]),
                label: labeled[a].1 == labeled[b].1,
                i: va.fingerprint_id,
                j: vb.fingerprint_id,
                device_i: labeled[a].1.clone(),
                device_j: labeled[b].1.clone(),
            }
        })
        .collect())
}

/// Seeded device-level split: each labeled device lands wholly in the
/// training or the test side. Returns indices into `vectors`.
pub fn split_by_device(vectors: &[FeatureVector], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let devices: BTreeSet<&DeviceId> = vectors.iter().filter_map(|v| v.device_id.as_ref()).collect();
    if devices.len() < 2 {
        return Err(Error::config("a device-disjoint split needs at least 2 labeled devices"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config("train fraction must lie strictly between 0 and 1"));
    }
    let mut order: Vec<&DeviceId> = devices.into_iter().collect();
    order.shuffle(&mut child_rng(seed, 0x7370_6c69));
    let n_train = (libm::round(order.len() as f64 * train_fraction) as usize).clamp(1, order.len() - 1);
    let train_devices: BTreeSet<&DeviceId> = order[..n_train].iter().copied().collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        match &v.device_id {
            Some(d) if train_devices.contains(d) => train.push(i),
            Some(_) => test.push(i),
            None => {}
        }
    }
    Ok((train, test))
}
