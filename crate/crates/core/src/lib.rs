//! Desk-scale device-independent randomness from the CHSH game.
//!
//! * [`simulator`]: statevector simulation, outcome distributions, sampling
//!   and outcome-level depolarizing noise.
//! * [`game`]: referee inputs, quantum/classical strategies, round and
//!   experiment bookkeeping.
//! * [`certify`]: CHSH value, violation significance and min-entropy rate.
//! * [`randomness`]: Hadamard and parity QRNGs, von Neumann and Toeplitz
//!   extraction, and a three-test statistical battery.
//! * [`noise`]: fitting the depolarizing weight to a target winning rate.
//!
//! The crate is `no_std` (with `alloc`); IO lives elsewhere.

#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod certify;
mod error;
pub mod game;
pub mod noise;
pub mod randomness;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
