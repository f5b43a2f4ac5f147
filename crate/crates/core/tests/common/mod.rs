#![allow(dead_code)]

use proptest::prelude::*;
use wifsm_core::synth::{Distribution, IeTag, MacPolicy, RotationSeq, VendorProfile};
use wifsm_core::{FrameSubtype, FsmState, InformationElement, MacAddress, ManagementFrame};

pub fn mac(k: u8) -> MacAddress {
    MacAddress::new([0x02, 0, 0, 0, 0, k])
}

pub fn frame(t: f64, src: MacAddress, subtype: FrameSubtype, seq: u16) -> ManagementFrame {
    ManagementFrame {
        timestamp: t,
        src,
        dst: MacAddress::BROADCAST,
        subtype,
        seq_num: seq,
        ies: vec![InformationElement { tag: 0, body: vec![] }],
        capture_id: "t".into(),
        ordinal: 0,
        pseudonymized: false,
    }
}

/// Renumbers ordinals in slice order.
pub fn numbered(mut frames: Vec<ManagementFrame>) -> Vec<ManagementFrame> {
    for (k, f) in frames.iter_mut().enumerate() {
        f.ordinal = k as u64;
    }
    frames
}

pub fn client_subtype() -> impl Strategy<Value = FrameSubtype> {
    prop::sample::select(vec![
        FrameSubtype::ProbeRequest,
        FrameSubtype::Authentication,
        FrameSubtype::AssociationRequest,
        FrameSubtype::Action,
        FrameSubtype::Deauthentication,
    ])
}

/// Small random traces: up to four MACs, microsecond timestamps, gaps
/// straddling (and landing exactly on) the 1 s burst threshold.
pub fn trace() -> impl Strategy<Value = Vec<ManagementFrame>> {
    let gap = prop_oneof![0u64..900_000, 900_000u64..1_100_000, Just(1_000_000u64), 1_100_000u64..40_000_000];
    prop::collection::vec((gap, 0u8..4, client_subtype(), 0u16..4096, any::<bool>()), 1..120).prop_map(|steps| {
        let mut micros = 0u64;
        let frames = steps
            .into_iter()
            .map(|(g, m, subtype, seq, unicast)| {
                micros += g;
                let mut f = frame(micros as f64 / 1e6, mac(m), subtype, seq);
                if unicast {
                    f.dst = MacAddress::new([0x00, 0x11, 0x22, 0, 0, 9]);
                }
                f
            })
            .collect();
        numbered(frames)
    })
}

pub fn state(s: &str) -> FsmState {
    s.parse().unwrap()
}

/// A small rotating client profile.
pub fn profile(name: &str, states: &[&str], probs: Vec<Vec<f64>>, frames: (f64, f64)) -> VendorProfile {
    VendorProfile {
        name: name.into(),
        states: states.iter().map(|s| state(s)).collect(),
        transition_probs: probs,
        initial_state: state(states[0]),
        frames_per_burst: Distribution::Uniform { min: frames.0, max: frames.1 },
        intra_gap: Distribution::Uniform { min: 0.02, max: 0.2 },
        inter_gap: Distribution::TruncatedExponential { mean: 20.0, min: 2.0, max: 90.0 },
        bursts_per_device: Distribution::Uniform { min: 4.0, max: 12.0 },
        ie_tags: vec![IeTag { tag: 0, probability: 1.0 }, IeTag { tag: 1, probability: 1.0 }, IeTag { tag: 50, probability: 0.5 }],
        seq_increment: Distribution::Uniform { min: 1.0, max: 3.0 },
        mac_policy: MacPolicy::RotatePerBurst,
        rotation_seq: RotationSeq::Randomize,
        is_ap: false,
        device_jitter: 0.0,
    }
}

pub fn access_point() -> VendorProfile {
    let mut ap = profile("ap", &["Beacon/B", "ProbeResponse/U"], vec![vec![0.8, 0.2], vec![1.0, 0.0]], (1.0, 3.0));
    ap.mac_policy = MacPolicy::Persistent;
    ap.is_ap = true;
    ap
}

/// Two client vendors plus an access point.
pub fn mixed_profiles(devices: usize) -> Vec<(VendorProfile, usize)> {
    vec![
        (profile("va", &["ProbeRequest/B", "ProbeRequest/U"], vec![vec![0.4, 0.6], vec![0.5, 0.5]], (2.0, 6.0)), devices),
        (
            profile(
                "vb",
                &["ProbeRequest/B", "Authentication/U", "AssociationRequest/U"],
                vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.3, 0.7], vec![1.0, 0.0, 0.0]],
                (3.0, 9.0),
            ),
            devices,
        ),
        (access_point(), 1),
    ]
}
