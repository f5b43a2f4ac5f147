use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::profile::{MacPolicy, RotationSeq, VendorProfile};
use crate::burst::DeviceId;
use crate::error::{Error, Result};
use crate::frame::{FrameSubtype, InformationElement, ManagementFrame, SEQ_MODULUS};
use crate::fsm::DstClass;
use crate::mac::MacAddress;
use crate::rng::child_rng;

/// Capture id stamped on generated frames.
pub const SYNTH_CAPTURE_ID: &str = "synth";

const MICROS: f64 = 1_000_000.0;

/// True labels of a generated trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    /// Device of each frame, indexed by frame ordinal.
    pub frame_devices: Vec<DeviceId>,
    pub device_profiles: BTreeMap<DeviceId, String>,
    /// Every source address a device used.
    pub mac_devices: BTreeMap<MacAddress, DeviceId>,
}

impl GroundTruth {
    pub fn device_of_frame(&self, ordinal: u64) -> Option<&DeviceId> {
        self.frame_devices.get(ordinal as usize)
    }

    /// The MAC → device labeling used for grouping and evaluation.
    pub fn device_map(&self) -> BTreeMap<MacAddress, Option<DeviceId>> {
        self.mac_devices.iter().map(|(m, d)| (*m, Some(d.clone()))).collect()
    }
}

/// Body bytes for a generated IE; SSID is always the wildcard.
fn ie_body(tag: u8) -> Vec<u8> {
    if tag == 0 {
        Vec::new()
    } else {
        vec![tag; 1 + (tag as usize % 4)]
    }
}

fn vendor_oui(name: &str) -> [u8; 3] {
    // FNV-1a
    let mut h: u32 = 0x811c_9dc5;
    for b in name.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    [(h as u8) & !0x03, (h >> 8) as u8, (h >> 16) as u8]
}

struct MacPool {
    used: BTreeSet<MacAddress>,
}

impl MacPool {
    fn draw(&mut self, rng: &mut ChaCha8Rng, oui: Option<[u8; 3]>) -> MacAddress {
        loop {
            let mut o: [u8; 6] = rng.gen();
            match oui {
                Some(p) => o[..3].copy_from_slice(&p),
                None => o[0] = (o[0] & !0x03) | 0x02,
            }
            let mac = MacAddress::new(o);
            if self.used.insert(mac) {
                return mac;
            }
        }
    }
}

struct Jitter {
    frames: f64,
    intra: f64,
    inter: f64,
    seq: f64,
}

impl Jitter {
    fn draw(rng: &mut ChaCha8Rng, spread: f64) -> Self {
        let mut f = || 1.0 + spread * (2.0 * rng.gen::<f64>() - 1.0);
        Jitter { frames: f(), intra: f(), inter: f(), seq: f() }
    }
}

/// The profile's transition rows blended with a random row over the same
/// support, weighted by the device jitter.
fn device_transitions(profile: &VendorProfile, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let j = profile.device_jitter;
    profile
        .transition_probs
        .iter()
        .map(|row| {
            let noise: Vec<f64> = row.iter().map(|&p| if p > 0.0 { rng.gen::<f64>() } else { 0.0 }).collect();
            let total: f64 = noise.iter().sum();
            if total == 0.0 || j == 0.0 {
                return row.clone();
            }
            row.iter().zip(&noise).map(|(&p, &r)| (1.0 - j) * p + j * r / total).collect()
        })
        .collect()
}

struct Emitted {
    micros: u64,
    device: usize,
    frame: ManagementFrame,
}

fn to_micros(seconds: f64) -> u64 {
    libm::round(seconds * MICROS) as u64
}

#[allow(clippy::too_many_arguments)]
fn generate_device(
    profile: &VendorProfile,
    device: usize,
    duration_us: u64,
    rng: &mut ChaCha8Rng,
    pool: &mut MacPool,
    out: &mut Vec<Emitted>,
    macs: &mut Vec<MacAddress>,
) {
    let jitter = Jitter::draw(rng, profile.device_jitter);
    let oui = vendor_oui(&profile.name);
    let persistent = pool.draw(rng, Some(oui));
    let peer = pool.draw(rng, Some(vendor_oui("peer")));
    let cumulative: Vec<Vec<f64>> = device_transitions(profile, rng)
        .iter()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let n_states = profile.states.len();
    let next_state = |rng: &mut ChaCha8Rng, from: usize| {
        let u: f64 = rng.gen();
        cumulative[from].iter().position(|&c| u < c).unwrap_or_else(|| {
            // rounding slack: last state with non-zero probability
            (0..n_states).rev().find(|&k| profile.transition_probs[from][k] > 0.0).unwrap_or(from)
        })
    };
    let initial = profile.state_index(&profile.initial_state).expect("validated");

    let bursts = profile.bursts_per_device.sample_count(rng);
    let mut t = to_micros(rng.gen::<f64>() * profile.inter_gap.sample(rng) * jitter.inter);
    let mut seq = rng.gen_range(0..SEQ_MODULUS);
    let mut src = if profile.mac_policy == MacPolicy::Persistent { persistent } else { pool.draw(rng, None) };
    macs.push(src);
    for b in 0..bursts {
        if t >= duration_us {
            break;
        }
        let rotate = match profile.mac_policy {
            MacPolicy::Persistent => false,
            MacPolicy::RotatePerBurst => b > 0,
            MacPolicy::RotatePerKBursts(k) => b > 0 && b % k == 0,
        };
        if rotate {
            src = pool.draw(rng, None);
            macs.push(src);
            match profile.rotation_seq {
                RotationSeq::Continue => {}
                RotationSeq::Randomize => seq = rng.gen_range(0..SEQ_MODULUS),
                // the first frame then carries 0 + increment
                RotationSeq::Zero => seq = 0,
            }
        }
        let frames = libm::round(profile.frames_per_burst.sample(rng) * jitter.frames).max(1.0) as usize;
        let mut state = initial;
        for i in 0..frames {
            if i > 0 {
                let gap = to_micros(profile.intra_gap.sample(rng) * jitter.intra).clamp(1, MICROS as u64);
                t += gap;
                state = next_state(rng, state);
            }
            let inc = libm::round(profile.seq_increment.sample(rng) * jitter.seq).max(1.0) as u16;
            seq = (seq + inc) % SEQ_MODULUS;
            let st = profile.states[state];
            let ies = if st.subtype == FrameSubtype::ProbeRequest {
                profile
                    .ie_tags
                    .iter()
                    .filter(|tag| rng.gen::<f64>() < tag.probability)
                    .map(|tag| InformationElement { tag: tag.tag, body: ie_body(tag.tag) })
                    .collect()
            } else if st.subtype.carries_ies() {
                vec![InformationElement { tag: 0, body: Vec::new() }]
            } else {
                Vec::new()
            };
            out.push(Emitted {
                micros: t,
                device,
                frame: ManagementFrame {
                    timestamp: 0.0,
                    src,
                    dst: match st.dst_class {
                        DstClass::Broadcast => MacAddress::BROADCAST,
                        DstClass::Unicast => peer,
                    },
                    subtype: st.subtype,
                    seq_num: seq,
                    ies,
                    capture_id: String::from(SYNTH_CAPTURE_ID),
                    ordinal: 0,
                    pseudonymized: false,
                },
            });
        }
        let gap = to_micros(profile.inter_gap.sample(rng) * jitter.inter).max(MICROS as u64 + 1);
        t += gap;
    }
}

/// Generates a labeled, time-sorted trace. Device `k` of a profile is
/// named `{profile}-{k:03}`; timestamps are whole microseconds so the
/// trace survives a pcap round trip unchanged.
pub fn generate_trace(
    profiles: &[(VendorProfile, usize)],
    duration: f64,
    seed: u64,
) -> Result<(Vec<ManagementFrame>, GroundTruth)> {
    if profiles.is_empty() {
        return Err(Error::config("at least one profile is required"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::config("duration must be positive"));
    }
    let mut names = BTreeSet::new();
    for (p, _) in profiles {
        p.validate()?;
        if !names.insert(p.name.as_str()) {
            return Err(Error::Config(format!("duplicate profile name {:?}", p.name)));
        }
    }
    let duration_us = to_micros(duration);
    let mut pool = MacPool { used: BTreeSet::new() };
    let mut emitted = Vec::new();
    let mut truth = GroundTruth::default();
    let mut device_ids = Vec::new();
    for (profile, count) in profiles {
        for k in 0..*count {
            let d = device_ids.len();
            let id = DeviceId::new(format!("{}-{k:03}", profile.name));
            let mut rng = child_rng(seed, d as u64);
            let mut macs = Vec::new();
            generate_device(profile, d, duration_us, &mut rng, &mut pool, &mut emitted, &mut macs);
            for m in macs {
                truth.mac_devices.insert(m, id.clone());
            }
            truth.device_profiles.insert(id.clone(), profile.name.clone());
            device_ids.push(id);
        }
    }
    // per-device emission order is already time-ordered, so a stable sort
    // on (time, device) is the merge
    emitted.sort_by_key(|e| (e.micros, e.device));
    let mut frames = Vec::with_capacity(emitted.len());
    for (ordinal, e) in emitted.into_iter().enumerate() {
        let mut f = e.frame;
        f.timestamp = e.micros as f64 / MICROS;
        f.ordinal = ordinal as u64;
        truth.frame_devices.push(device_ids[e.device].clone());
        frames.push(f);
    }
    // drop addresses drawn for bursts that fell past the end of the trace
    let live: BTreeSet<MacAddress> = frames.iter().map(|f| f.src).collect();
    truth.mac_devices.retain(|m, _| live.contains(m));
    Ok((frames, truth))
}
