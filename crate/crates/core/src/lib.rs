//! Simulator for round-trip classical key distribution over coupled
//! Mach-Zehnder interferometers.
//!
//! - [`field`]: two-mode complex fields and 2×2 operators
//! - [`interferometer`]: single, coupled and chained interferometers
//! - [`drive`]: time-domain AOM schedules, phase noise and traces
//! - [`protocol`]: the key-distribution rounds and session transcripts
//! - [`adversary`]: beam-splitter taps and eavesdropper accuracy

pub mod adversary;
pub mod drive;
pub mod error;
pub mod field;
pub mod interferometer;
pub mod protocol;

pub use error::{Error, Result};
