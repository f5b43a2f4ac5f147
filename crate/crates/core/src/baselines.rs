//! Probe-to-device association baselines (IE signature, sequence number)
//! and the discrimination-accuracy evaluation shared with FSM matching.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::burst::{BurstGroup, DeviceId, PseudoId};
use crate::error::{Error, Result};
use crate::features::IeBitmap;
use crate::frame::{seq_forward_gap, FrameSubtype};
use crate::rng::child_rng;
use crate::similarity::DistanceMatrix;

/// Default association window, seconds.
pub const DEFAULT_TAU: f64 = 600.0;
pub const DEFAULT_SAMPLES: usize = 1000;

/// One probe request as seen by the association methods.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeEvent {
    pub time: f64,
    /// The identifier the observer sees (the group's pseudo id).
    pub pseudo_id: PseudoId,
    pub seq_num: u16,
    pub ie_bitmap: IeBitmap,
    pub device_id: Option<DeviceId>,
    /// Index of the enclosing group in the slice passed to [`probe_events`].
    pub fingerprint: usize,
}

/// All probe requests of all groups, time-sorted (ties keep group order).
pub fn probe_events(groups: &[BurstGroup]) -> Vec<ProbeEvent> {
    let mut events: Vec<ProbeEvent> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, group)| {
            group.frames().filter(|f| f.subtype == FrameSubtype::ProbeRequest).map(move |f| ProbeEvent {
                time: f.timestamp,
                pseudo_id: group.pseudo_id,
                seq_num: f.seq_num,
                ie_bitmap: f.ie_tags().collect(),
                device_id: group.device_id.clone(),
                fingerprint: g,
            })
        })
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

/// |A∩B| / |A∪B|, with two empty sets counting as identical.
pub fn jaccard(a: &IeBitmap, b: &IeBitmap) -> f64 {
    let union = a.union_count(b);
    if union == 0 {
        return 1.0;
    }
    a.intersection_count(b) as f64 / union as f64
}

/// Picks the best-scoring candidate; on equal scores the latest one wins.
fn best_by<'a, I, S>(candidates: I, mut score: S) -> Option<&'a ProbeEvent>
where
    I: IntoIterator<Item = &'a ProbeEvent>,
    S: FnMut(&ProbeEvent) -> f64,
{
    let mut best: Option<(&ProbeEvent, f64)> = None;
    for c in candidates {
        let s = score(c);
        match best {
            Some((b, bs)) if s < bs || (s == bs && c.time < b.time) => {}
            _ => best = Some((c, s)),
        }
    }
    best.map(|(c, _)| c)
}

/// Candidate with the most similar IE bitmap (Jaccard).
pub fn ie_baseline_associate<'a, I>(target: &ProbeEvent, candidates: I) -> Option<&'a ProbeEvent>
where
    I: IntoIterator<Item = &'a ProbeEvent>,
{
    best_by(candidates, |c| jaccard(&target.ie_bitmap, &c.ie_bitmap))
}

/// Candidate whose sequence number precedes the target's most closely.
pub fn seq_baseline_associate<'a, I>(target: &ProbeEvent, candidates: I) -> Option<&'a ProbeEvent>
where
    I: IntoIterator<Item = &'a ProbeEvent>,
{
    best_by(candidates, |c| -(seq_forward_gap(c.seq_num, target.seq_num) as f64))
}

/// Candidate whose fingerprint is nearest to the target's in `matrix`.
pub fn fsm_associate<'a, I>(target: &ProbeEvent, candidates: I, matrix: &DistanceMatrix) -> Option<&'a ProbeEvent>
where
    I: IntoIterator<Item = &'a ProbeEvent>,
{
    best_by(candidates, |c| -matrix.get(target.fingerprint, c.fingerprint))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ie,
    Seq,
    Fsm,
}

impl Method {
    pub const fn name(self) -> &'static str {
        match self {
            Method::Ie => "ie",
            Method::Seq => "seq",
            Method::Fsm => "fsm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ie" => Ok(Method::Ie),
            "seq" => Ok(Method::Seq),
            "fsm" => Ok(Method::Fsm),
            other => Err(Error::config(alloc::format!("unknown association method {other:?}"))),
        }
    }
}

/// Events in `[t − τ, t)` carrying a different pseudo id than `events[k]`.
pub fn window_candidates(events: &[ProbeEvent], k: usize, tau: f64) -> impl Iterator<Item = &ProbeEvent> {
    let target = &events[k];
    let lo = events.partition_point(|e| e.time < target.time - tau);
    let hi = events.partition_point(|e| e.time < target.time);
    events[lo..hi.max(lo)].iter().filter(move |e| e.pseudo_id != target.pseudo_id)
}

/// Fraction of sampled probe events whose chosen predecessor belongs to
/// the same device.
///
/// Targets are drawn uniformly with replacement among labeled events that
/// have at least one candidate in their window. `fsm_matrix` must be the
/// combined distance matrix over the groups the events came from; it is
/// required for [`Method::Fsm`] only.
pub fn discrimination_accuracy(
    events: &[ProbeEvent],
    method: Method,
    samples: usize,
    tau: f64,
    seed: u64,
    fsm_matrix: Option<&DistanceMatrix>,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    if !(tau >= 0.0) {
        return Err(Error::config("tau must be non-negative"));
    }
    if events.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::contract("probe events must be time-sorted"));
    }
    if method == Method::Fsm && fsm_matrix.is_none() {
        return Err(Error::contract("fsm association needs a combined distance matrix"));
    }
    let eligible: Vec<usize> = (0..events.len())
        .filter(|&k| events[k].device_id.is_some() && window_candidates(events, k, tau).next().is_some())
        .collect();
    if eligible.is_empty() {
        return Err(Error::evaluation("no probe event has a candidate inside its window"));
    }
    let mut rng = child_rng(seed, 0x6469_7363);
    let mut correct = 0usize;
    for _ in 0..samples {
        let k = eligible[rng.gen_range(0..eligible.len())];
        let target = &events[k];
        let candidates = window_candidates(events, k, tau);
        let chosen = match method {
            Method::Ie => ie_baseline_associate(target, candidates),
            Method::Seq => seq_baseline_associate(target, candidates),
            Method::Fsm => fsm_associate(target, candidates, fsm_matrix.expect("checked above")),
        };
        if chosen.is_some_and(|c| c.device_id == target.device_id) {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples as f64)
}
