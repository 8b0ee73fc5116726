//! Bit-stream generation, extraction and a small statistical battery.

mod battery;
mod bits;
mod extract;
mod qrng;
mod special;

pub use battery::{
    block_frequency_test, monobit_test, runs_test, Battery, TestKind, TestReport, DEFAULT_BLOCK_LEN, SIGNIFICANCE,
};
pub use bits::{BitStream, SourceTag};
pub use extract::{toeplitz_extract, toeplitz_hash, von_neumann, ExtractionBudget, DEFAULT_SECURITY_MARGIN};
pub use qrng::{hadamard_qrng, parity_qrng, parity_state};
pub use special::{erfc, igamc};
