//! Labeled synthetic traces from vendor behavior profiles.

mod dist;
mod generate;
mod profile;

pub use dist::Distribution;
pub use generate::{generate_trace, GroundTruth, SYNTH_CAPTURE_ID};
pub use profile::{IeTag, MacPolicy, RotationSeq, VendorProfile};

/// Generated traces are written with the ordinary pcap writer.
pub use crate::ingest::write_capture;
