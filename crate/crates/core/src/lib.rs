//! Coverage and base-station diversity analysis for millimeter-wave small
//! cells.
//!
//! * [`channel`]: free-space loss, Friis, aperture gain, CI path loss model
//!   and shadow fading sampling.
//! * [`fitting`]: least-squares CI fits and omnidirectional synthesis.
//! * [`coverage`]: receiver threshold, edge and region outage.
//! * [`diversity`]: geometry, serving-set combinatorics and the drop simulator.
//! * [`io`]: scenario, sample and mask file formats plus result emission.

pub mod channel;
pub mod coverage;
pub mod diversity;
pub mod error;
pub mod exec;
pub mod fitting;
pub mod io;

pub use error::{Error, Result};
pub use exec::Execution;

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 0x5EED_2016;
