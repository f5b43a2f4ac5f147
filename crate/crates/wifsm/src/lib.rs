//! Command-line tooling, file formats and parallel experiment runs on top
//! of `wifsm-core`.

pub mod cli;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod par;
pub mod profiles;
pub mod store;

pub use error::{Error, Result};
