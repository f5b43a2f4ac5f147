mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use wifsm_core::burst::{filter_clients, group_bursts, segment_bursts, DEFAULT_BURST_GAP};
use wifsm_core::fsm::{build_fsm, build_fsm_from_bursts, merge_fsms};
use wifsm_core::synth::generate_trace;
use wifsm_core::{FsmState, MacAddress, ManagementFrame};

/// Brute-force partition: per MAC, walk frames in time order and cut
/// wherever the microsecond gap exceeds one second.
fn oracle_partition(frames: &[ManagementFrame]) -> BTreeSet<Vec<u64>> {
    let mut by_mac: BTreeMap<MacAddress, Vec<(u64, u64)>> = BTreeMap::new();
    for f in frames {
        let micros = (f.timestamp * 1e6).round() as u64;
        by_mac.entry(f.src).or_default().push((micros, f.ordinal));
    }
    let mut parts = BTreeSet::new();
    for (_, mut stream) in by_mac {
        stream.sort();
        let mut current = vec![stream[0].1];
        for w in stream.windows(2) {
            if w[1].0 - w[0].0 > 1_000_000 {
                parts.insert(std::mem::take(&mut current));
            }
            current.push(w[1].1);
        }
        parts.insert(current);
    }
    parts
}

fn partition(frames: &[ManagementFrame]) -> BTreeSet<Vec<u64>> {
    segment_bursts(frames, DEFAULT_BURST_GAP)
        .unwrap()
        .iter()
        .map(|b| b.frames.iter().map(|f| f.ordinal).collect())
        .collect()
}

fn transition_counts(fsm: &wifsm_core::Fsm) -> (BTreeSet<FsmState>, BTreeMap<(FsmState, FsmState), u32>) {
    (fsm.states.clone(), fsm.transitions.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn segmentation_matches_gap_scan(frames in common::trace()) {
        prop_assert_eq!(partition(&frames), oracle_partition(&frames));
    }

    #[test]
    fn transitions_are_conserved(frames in common::trace(), p in 1usize..5) {
        let bursts = segment_bursts(&frames, DEFAULT_BURST_GAP).unwrap();
        for g in group_bursts(&bursts, p, &BTreeMap::new()).unwrap() {
            let fsm = build_fsm(&g).unwrap();
            prop_assert_eq!(fsm.transition_total() as usize, fsm.frame_count - fsm.burst_count);
            prop_assert_eq!(fsm.inter_burst_gaps.len(), g.bursts.len() - 1);
            let per_burst: Vec<_> = g.bursts.iter().map(|b| build_fsm_from_bursts(std::slice::from_ref(b)).unwrap()).collect();
            let merged = merge_fsms(&per_burst).unwrap();
            prop_assert_eq!(transition_counts(&merged), transition_counts(&fsm));
            prop_assert_eq!(merged.initial, fsm.initial);
            prop_assert_eq!(merged.frame_count, fsm.frame_count);
        }
    }

    #[test]
    fn merge_is_commutative_and_associative(frames in common::trace()) {
        let bursts = segment_bursts(&frames, DEFAULT_BURST_GAP).unwrap();
        let fsms: Vec<_> = bursts.iter().map(|b| build_fsm_from_bursts(std::slice::from_ref(b)).unwrap()).collect();
        let whole = transition_counts(&merge_fsms(&fsms).unwrap());
        let mut reversed = fsms.clone();
        reversed.reverse();
        prop_assert_eq!(transition_counts(&merge_fsms(&reversed).unwrap()), whole.clone());
        let mid = fsms.len() / 2;
        if mid > 0 {
            let nested = [merge_fsms(&fsms[..mid]).unwrap(), merge_fsms(&fsms[mid..]).unwrap()];
            prop_assert_eq!(transition_counts(&merge_fsms(&nested).unwrap()), whole);
        }
    }
}

#[test]
fn generator_output_partitions_and_conserves() {
    for seed in 0..20 {
        let (frames, truth) = generate_trace(&common::mixed_profiles(3), 600.0, seed).unwrap();
        let (clients, excluded) = filter_clients(&frames);
        assert_eq!(excluded.len(), 1);
        assert_eq!(partition(&clients), oracle_partition(&clients));
        let bursts = segment_bursts(&clients, DEFAULT_BURST_GAP).unwrap();
        for g in group_bursts(&bursts, 3, &truth.device_map()).unwrap() {
            let fsm = build_fsm(&g).unwrap();
            assert_eq!(fsm.transition_total() as usize, fsm.frame_count - fsm.burst_count);
            let per_burst: Vec<_> =
                g.bursts.iter().map(|b| build_fsm_from_bursts(std::slice::from_ref(b)).unwrap()).collect();
            assert_eq!(transition_counts(&merge_fsms(&per_burst).unwrap()), transition_counts(&fsm));
        }
    }
}

#[test]
fn one_frame_burst_only_adds_its_state() {
    let a = common::frame(0.0, common::mac(1), wifsm_core::FrameSubtype::ProbeRequest, 1);
    let b = common::frame(0.1, common::mac(1), wifsm_core::FrameSubtype::Action, 2);
    let lone = common::frame(9.0, common::mac(1), wifsm_core::FrameSubtype::Authentication, 3);
    let bursts = segment_bursts(&common::numbered(vec![a, b, lone]), DEFAULT_BURST_GAP).unwrap();
    assert_eq!(bursts.len(), 2);
    let first = build_fsm_from_bursts(&bursts[..1]).unwrap();
    let single = build_fsm_from_bursts(&bursts[1..]).unwrap();
    let merged = merge_fsms(&[first.clone(), single.clone()]).unwrap();
    assert_eq!(merged.transitions, first.transitions);
    let expected: BTreeSet<_> = first.states.union(&single.states).copied().collect();
    assert_eq!(merged.states, expected);
    assert_eq!(merged.states.len(), first.states.len() + 1);
}
