//! Generator profile files (TOML, schema `profiles.v1`).
//!
//! ```toml
//! schema = "profiles.v1"
//! environment = "classroom"
//! duration = 3600.0
//!
//! [[profile]]
//! name = "alpha"
//! devices = 5
//! states = ["ProbeRequest/B", "ProbeRequest/U"]
//! transitions = [[0.3, 0.7], [0.6, 0.4]]
//! frames_per_burst = { uniform = { min = 3.0, max = 5.0 } }
//! intra_gap = { constant = 0.05 }
//! inter_gap = { truncated_exponential = { mean = 30.0, min = 5.0, max = 120.0 } }
//! bursts_per_device = { constant = 40.0 }
//! seq_increment = { constant = 1.0 }
//! ie_tags = [{ tag = 0 }, { tag = 50, probability = 0.5 }]
//! mac_policy = "rotate_per_burst"
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;
use wifsm_core::synth::{Distribution, IeTag, MacPolicy, RotationSeq, VendorProfile};
use wifsm_core::FsmState;

use crate::error::{Error, Result};

pub const PROFILES_SCHEMA: &str = "profiles.v1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum DistributionSpec {
    Constant(f64),
    Uniform { min: f64, max: f64 },
    TruncatedExponential { mean: f64, min: f64, max: Option<f64> },
}

impl From<DistributionSpec> for Distribution {
    fn from(d: DistributionSpec) -> Self {
        match d {
            DistributionSpec::Constant(v) => Distribution::Constant(v),
            DistributionSpec::Uniform { min, max } => Distribution::Uniform { min, max },
            DistributionSpec::TruncatedExponential { mean, min, max } => {
                Distribution::TruncatedExponential { mean, min, max: max.unwrap_or(f64::INFINITY) }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum MacPolicySpec {
    Persistent,
    RotatePerBurst,
    RotatePerKBursts(usize),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum RotationSeqSpec {
    Continue,
    Randomize,
    Zero,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IeTagSpec {
    tag: u8,
    #[serde(default = "one")]
    probability: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpec {
    name: String,
    devices: usize,
    states: Vec<String>,
    transitions: Vec<Vec<f64>>,
    initial: Option<String>,
    frames_per_burst: DistributionSpec,
    intra_gap: DistributionSpec,
    inter_gap: DistributionSpec,
    bursts_per_device: DistributionSpec,
    #[serde(default)]
    ie_tags: Vec<IeTagSpec>,
    seq_increment: DistributionSpec,
    mac_policy: MacPolicySpec,
    rotation_seq: Option<RotationSeqSpec>,
    #[serde(default)]
    is_ap: bool,
    #[serde(default)]
    device_jitter: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    schema: String,
    environment: Option<String>,
    duration: f64,
    #[serde(rename = "profile")]
    profiles: Vec<ProfileSpec>,
}

/// A parsed profile mix ready for [`wifsm_core::synth::generate_trace`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSet {
    /// Tag used as the "environment" in reports.
    pub environment: String,
    pub duration: f64,
    pub profiles: Vec<(VendorProfile, usize)>,
}

fn config(msg: String) -> Error {
    Error::Core(wifsm_core::Error::Config(msg))
}

fn state(s: &str) -> Result<FsmState> {
    s.parse().map_err(|_| config(format!("bad state {s:?}; expected SUBTYPE/B or SUBTYPE/U")))
}

impl ProfileSpec {
    fn build(self) -> Result<(VendorProfile, usize)> {
        let states = self.states.iter().map(|s| state(s)).collect::<Result<Vec<_>>>()?;
        let initial = match &self.initial {
            Some(s) => state(s)?,
            None => *states.first().ok_or_else(|| config(format!("profile {:?} has no states", self.name)))?,
        };
        let profile = VendorProfile {
            name: self.name,
            states,
            transition_probs: self.transitions,
            initial_state: initial,
            frames_per_burst: self.frames_per_burst.into(),
            intra_gap: self.intra_gap.into(),
            inter_gap: self.inter_gap.into(),
            bursts_per_device: self.bursts_per_device.into(),
            ie_tags: self.ie_tags.into_iter().map(|t| IeTag { tag: t.tag, probability: t.probability }).collect(),
            seq_increment: self.seq_increment.into(),
            mac_policy: match self.mac_policy {
                MacPolicySpec::Persistent => MacPolicy::Persistent,
                MacPolicySpec::RotatePerBurst => MacPolicy::RotatePerBurst,
                MacPolicySpec::RotatePerKBursts(k) => MacPolicy::RotatePerKBursts(k),
            },
            rotation_seq: match self.rotation_seq {
                Some(RotationSeqSpec::Continue) => RotationSeq::Continue,
                Some(RotationSeqSpec::Zero) => RotationSeq::Zero,
                Some(RotationSeqSpec::Randomize) | None => RotationSeq::Randomize,
            },
            is_ap: self.is_ap,
            device_jitter: self.device_jitter,
        };
        profile.validate()?;
        Ok((profile, self.devices))
    }
}

/// Parses a profile file; `label` names the source in errors and is the
/// default environment tag.
pub fn parse_profiles(text: &str, label: &str) -> Result<ProfileSet> {
    let file: ProfileFile = toml::from_str(text).map_err(|e| config(format!("{label}: {e}")))?;
    if file.schema != PROFILES_SCHEMA {
        return Err(Error::Schema { path: label.into(), expected: PROFILES_SCHEMA.into(), found: file.schema });
    }
    if file.profiles.is_empty() {
        return Err(config(format!("{label}: no [[profile]] entries")));
    }
    Ok(ProfileSet {
        environment: file.environment.unwrap_or_else(|| label.to_string()),
        duration: file.duration,
        profiles: file.profiles.into_iter().map(ProfileSpec::build).collect::<Result<_>>()?,
    })
}

pub fn load_profiles(path: &Path) -> Result<ProfileSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("profiles");
    parse_profiles(&text, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = "profiles.v1"
duration = 100.0

[[profile]]
name = "a"
devices = 2
states = ["ProbeRequest/B", "ProbeRequest/U"]
transitions = [[0.5, 0.5], [1.0, 0.0]]
frames_per_burst = { uniform = { min = 2.0, max = 4.0 } }
intra_gap = { constant = 0.1 }
inter_gap = { truncated_exponential = { mean = 10.0, min = 2.0 } }
bursts_per_device = { constant = 3.0 }
seq_increment = { constant = 1.0 }
ie_tags = [{ tag = 0 }, { tag = 45, probability = 0.25 }]
mac_policy = { rotate_per_k_bursts = 2 }
"#;

    #[test]
    fn parses_minimal_file() {
        let set = parse_profiles(MINIMAL, "mini").unwrap();
        assert_eq!(set.environment, "mini");
        let (p, n) = &set.profiles[0];
        assert_eq!(*n, 2);
        assert_eq!(p.mac_policy, MacPolicy::RotatePerKBursts(2));
        assert_eq!(p.ie_tags[0].probability, 1.0);
        assert_eq!(p.inter_gap.support().1, f64::INFINITY);
        assert_eq!(p.initial_state.to_string(), "ProbeRequest/B");
    }

    #[test]
    fn schema_and_invariants_are_checked() {
        let wrong = MINIMAL.replace("profiles.v1", "profiles.v0");
        assert!(matches!(parse_profiles(&wrong, "x"), Err(Error::Schema { .. })));
        let bad_row = MINIMAL.replace("[1.0, 0.0]", "[0.9, 0.0]");
        assert_eq!(parse_profiles(&bad_row, "x").unwrap_err().exit_code(), 1);
        let unknown = MINIMAL.replace("devices = 2", "devices = 2\ncolour = 1");
        assert!(parse_profiles(&unknown, "x").is_err());
    }

    #[test]
    fn shipped_profiles_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles");
        let mut seen = 0;
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                load_profiles(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                seen += 1;
            }
        }
        assert!(seen >= 4);
    }
}
