//! Per-group finite state machines over directional frame subtypes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::burst::{Burst, BurstGroup};
use crate::error::{Error, Result};
use crate::frame::{seq_forward_gap, FrameSubtype, ManagementFrame};

/// Destination context of a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DstClass {
    Broadcast,
    Unicast,
}

/// A state: the frame subtype plus whether it was sent to broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FsmState {
    pub subtype: FrameSubtype,
    pub dst_class: DstClass,
}

impl FsmState {
    pub const fn new(subtype: FrameSubtype, dst_class: DstClass) -> Self {
        FsmState { subtype, dst_class }
    }

    pub fn of(frame: &ManagementFrame) -> Self {
        let dst_class = if frame.is_broadcast() { DstClass::Broadcast } else { DstClass::Unicast };
        FsmState { subtype: frame.subtype, dst_class }
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = match self.dst_class {
            DstClass::Broadcast => 'B',
            DstClass::Unicast => 'U',
        };
        write!(f, "{}/{}", self.subtype, class)
    }
}

impl FromStr for FsmState {
    type Err = Error;

    /// Parses `SUBTYPE/B` or `SUBTYPE/U`.
    fn from_str(s: &str) -> Result<Self> {
        let (sub, class) = s
            .rsplit_once('/')
            .ok_or_else(|| Error::config(alloc::format!("state {s:?} lacks a /B or /U suffix")))?;
        let dst_class = match class {
            "B" => DstClass::Broadcast,
            "U" => DstClass::Unicast,
            _ => return Err(Error::config(alloc::format!("state {s:?}: class must be B or U"))),
        };
        Ok(FsmState { subtype: sub.parse()?, dst_class })
    }
}

pub type Transition = (FsmState, FsmState);

/// Transition structure and timing context of one burst group.
#[derive(Clone, Debug, PartialEq)]
pub struct Fsm {
    pub states: BTreeSet<FsmState>,
    /// Directed transitions with their observed multiplicity (always ≥ 1).
    pub transitions: BTreeMap<Transition, u32>,
    pub initial: FsmState,
    /// Time of the first frame.
    pub start_time: f64,
    /// Last frame time minus first frame time over the whole group.
    pub duration: f64,
    pub frame_count: usize,
    pub burst_count: usize,
    /// Start of burst k+1 minus end of burst k.
    pub inter_burst_gaps: Vec<f64>,
    /// Largest forward sequence-number gap between consecutive bursts.
    pub seq_span: u16,
}

impl Fsm {
    pub fn transition_total(&self) -> u64 {
        self.transitions.values().map(|&c| c as u64).sum()
    }

    pub fn self_transition_total(&self) -> u64 {
        self.transitions.iter().filter(|((a, b), _)| a == b).map(|(_, &c)| c as u64).sum()
    }
}

/// Builds the FSM of a burst group.
pub fn build_fsm(group: &BurstGroup) -> Result<Fsm> {
    build_fsm_from_bursts(&group.bursts)
}

/// Builds one FSM from consecutive bursts. Transitions are counted between
/// adjacent frames of the same burst only.
pub fn build_fsm_from_bursts(bursts: &[Burst]) -> Result<Fsm> {
    let first = bursts
        .first()
        .and_then(|b| b.frames.first())
        .ok_or_else(|| Error::contract("cannot build an FSM from an empty group"))?;
    if bursts.iter().any(|b| b.frames.is_empty()) {
        return Err(Error::contract("burst without frames"));
    }
    let mut states = BTreeSet::new();
    let mut transitions: BTreeMap<Transition, u32> = BTreeMap::new();
    let mut frame_count = 0;
    for burst in bursts {
        frame_count += burst.frames.len();
        let mut prev: Option<FsmState> = None;
        for frame in &burst.frames {
            let state = FsmState::of(frame);
            states.insert(state);
            if let Some(p) = prev {
                *transitions.entry((p, state)).or_insert(0) += 1;
            }
            prev = Some(state);
        }
    }
    let last_time = bursts[bursts.len() - 1].last().timestamp;
    let inter_burst_gaps = bursts.windows(2).map(|w| w[1].start_time - w[0].end_time).collect();
    let seq_span = bursts
        .windows(2)
        .map(|w| seq_forward_gap(w[0].last().seq_num, w[1].first().seq_num))
        .max()
        .unwrap_or(0);
    Ok(Fsm {
        states,
        transitions,
        initial: FsmState::of(first),
        start_time: first.timestamp,
        duration: (last_time - first.timestamp).max(0.0),
        frame_count,
        burst_count: bursts.len(),
        inter_burst_gaps,
        seq_span,
    })
}

/// Aggregates FSMs: union of states, pointwise sum of counts, summed
/// durations and concatenated gaps (in input order). The initial state is
/// taken from the member with the earliest start.
pub fn merge_fsms(fsms: &[Fsm]) -> Result<Fsm> {
    let earliest = fsms
        .iter()
        .min_by(|a, b| a.start_time.total_cmp(&b.start_time))
        .ok_or_else(|| Error::contract("cannot merge an empty FSM list"))?;
    let mut merged = Fsm {
        states: BTreeSet::new(),
        transitions: BTreeMap::new(),
        initial: earliest.initial,
        start_time: earliest.start_time,
        duration: 0.0,
        frame_count: 0,
        burst_count: 0,
        inter_burst_gaps: Vec::new(),
        seq_span: 0,
    };
    for fsm in fsms {
        merged.states.extend(fsm.states.iter().copied());
        for (&t, &c) in &fsm.transitions {
            *merged.transitions.entry(t).or_insert(0) += c;
        }
        merged.duration += fsm.duration;
        merged.frame_count += fsm.frame_count;
        merged.burst_count += fsm.burst_count;
        merged.inter_burst_gaps.extend_from_slice(&fsm.inter_burst_gaps);
        merged.seq_span = merged.seq_span.max(fsm.seq_span);
    }
    Ok(merged)
}

/// Mean transition count per FSM, per vendor tag.
pub fn vendor_transition_means<V, F>(fsms: &[Fsm], mut vendor_of: F) -> BTreeMap<V, f64>
where
    V: Ord,
    F: FnMut(&Fsm) -> V,
{
    let mut acc: BTreeMap<V, (u64, u64)> = BTreeMap::new();
    for fsm in fsms {
        let slot = acc.entry(vendor_of(fsm)).or_insert((0, 0));
        slot.0 += fsm.transition_total();
        slot.1 += 1;
    }
    acc.into_iter().map(|(v, (sum, n))| (v, sum as f64 / n as f64)).collect()
}
