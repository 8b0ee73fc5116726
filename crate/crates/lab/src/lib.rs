//! Experiment harness, file formats and command-line tool built on
//! [`chshrng_core`].
//!
//! * [`harness`] runs certified experiments with loophole controls and
//!   replays recorded inputs.
//! * [`formats`] reads and writes counts records, bit streams and round
//!   tables.
//! * [`profiles`] holds the bundled device rows and their fitted noise.
//! * [`reports`] emits the running-average, histogram, density and summary
//!   files.
//! * [`cli`] is the `chshrng` binary.

pub mod cli;
pub mod error;
pub mod formats;
pub mod harness;
pub mod profiles;
pub mod reports;

pub use error::{LabError, Result};
