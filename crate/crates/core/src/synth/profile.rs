use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::dist::Distribution;
use crate::error::{Error, Result};
use crate::frame::FrameSubtype;
use crate::fsm::FsmState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacPolicy {
    Persistent,
    RotatePerBurst,
    /// A fresh address every `k` bursts.
    RotatePerKBursts(usize),
}

/// What happens to the sequence counter when the source address rotates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RotationSeq {
    /// Keep counting across addresses.
    Continue,
    /// Jump to a uniformly random value.
    #[default]
    Randomize,
    /// Restart from zero.
    Zero,
}

/// An IE tag attached to probe requests with the given probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IeTag {
    pub tag: u8,
    pub probability: f64,
}

/// Generative behavior model of one vendor.
#[derive(Clone, Debug, PartialEq)]
pub struct VendorProfile {
    pub name: String,
    /// State space; row/column order of `transition_probs`.
    pub states: Vec<FsmState>,
    pub transition_probs: Vec<Vec<f64>>,
    pub initial_state: FsmState,
    pub frames_per_burst: Distribution,
    /// Seconds, within `(0, 1]`.
    pub intra_gap: Distribution,
    /// Seconds, within `(1, ∞)`.
    pub inter_gap: Distribution,
    pub bursts_per_device: Distribution,
    pub ie_tags: Vec<IeTag>,
    pub seq_increment: Distribution,
    pub mac_policy: MacPolicy,
    pub rotation_seq: RotationSeq,
    pub is_ap: bool,
    /// Relative spread of per-device multipliers on burst length, gaps and
    /// sequence increments, and how far each device's transition rows are
    /// blended toward a random row (0 makes all devices of the profile alike).
    pub device_jitter: f64,
}

impl VendorProfile {
    pub fn state_index(&self, s: &FsmState) -> Option<usize> {
        self.states.iter().position(|x| x == s)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(format!("profile {:?}: {msg}", self.name)));
        if self.name.is_empty() {
            return err("empty name".into());
        }
        let n = self.states.len();
        if n == 0 {
            return err("no states".into());
        }
        if self.states.iter().collect::<BTreeSet<_>>().len() != n {
            return err("duplicate states".into());
        }
        if self.transition_probs.len() != n || self.transition_probs.iter().any(|r| r.len() != n) {
            return err(format!("transition matrix must be {n}x{n}"));
        }
        for (i, row) in self.transition_probs.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return err(format!("row {i} has a probability outside [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return err(format!("row {i} sums to {sum}"));
            }
        }
        if self.state_index(&self.initial_state).is_none() {
            return err("initial state not in the state list".into());
        }
        for (what, d) in [
            ("frames_per_burst", &self.frames_per_burst),
            ("intra_gap", &self.intra_gap),
            ("inter_gap", &self.inter_gap),
            ("bursts_per_device", &self.bursts_per_device),
            ("seq_increment", &self.seq_increment),
        ] {
            d.validate(what)?;
            let (lo, _) = d.support();
            if lo < 0.0 {
                return err(format!("{what} has negative support"));
            }
        }
        let (lo, hi) = self.intra_gap.support();
        if !(lo > 0.0 && hi <= 1.0) {
            return err(format!("intra_gap support [{lo}, {hi}] not within (0, 1]"));
        }
        let (lo, _) = self.inter_gap.support();
        if !(lo > 1.0) {
            return err(format!("inter_gap support starts at {lo}, must exceed 1"));
        }
        if self.seq_increment.support().0 < 0.5 {
            return err("seq_increment must be a positive integer".into());
        }
        if let Some(t) = self.ie_tags.iter().find(|t| !(t.probability >= 0.0 && t.probability <= 1.0)) {
            return err(format!("tag {} has probability {}", t.tag, t.probability));
        }
        if self.mac_policy == MacPolicy::RotatePerKBursts(0) {
            return err("rotation period must be positive".into());
        }
        if !(self.device_jitter >= 0.0 && self.device_jitter < 1.0) {
            return err("device_jitter must be in [0, 1)".into());
        }
        if self.is_ap
            && !matches!(self.initial_state.subtype, FrameSubtype::Beacon | FrameSubtype::AssociationResponse)
        {
            return err("access-point profiles must start in Beacon or AssociationResponse".into());
        }
        Ok(())
    }

    /// Expected transitions per burst implied by `frames_per_burst`
    /// (ignores the per-device jitter and count rounding).
    pub fn expected_transitions_per_burst(&self) -> f64 {
        self.frames_per_burst.mean() - 1.0
    }
}
