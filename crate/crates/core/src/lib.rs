//! Behavioral fingerprinting of Wi-Fi clients from passively observed
//! 802.11 management frames.
//!
//! Frames are segmented into bursts, bursts are aggregated into groups of
//! `P`, each group becomes a finite state machine over directional frame
//! subtypes, and the machine is embedded as a fixed-size feature vector.
//! Vectors are compared by distance (nearest-neighbor matching) or by
//! pairwise supervised classifiers.
//!
//! The crate is `no_std` (with `alloc`); file IO, the record formats and the
//! command-line tool live in the `wifsm` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

// `!(x > 0.0)` style checks are deliberate: they reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod burst;
pub mod error;
pub mod features;
pub mod frame;
pub mod fsm;
pub mod ingest;
pub mod learn;
pub mod mac;
pub mod pipeline;
pub mod similarity;
pub mod synth;

mod rng;

pub use burst::{Burst, BurstGroup, DeviceId, PseudoId};
pub use error::{Error, Result};
pub use features::{FeatureVector, IeBitmap};
pub use frame::{FrameSubtype, InformationElement, ManagementFrame};
pub use fsm::{DstClass, Fsm, FsmState};
pub use mac::MacAddress;
pub use similarity::{DistanceMatrix, Metric};
