use thiserror::Error;

/// Errors raised by the simulation, game and randomness primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qubit count {requested} outside supported range 1..={cap}")]
    Capacity { requested: usize, cap: usize },
    #[error("qubit index {index} out of range for {n_qubits}-qubit state")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("gate targets must be distinct (qubit {0} repeated)")]
    DuplicateTarget(usize),
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid distribution: {0}")]
    Distribution(&'static str),
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("referee input sources must be independent (both use {0})")]
    FreedomOfChoice(alloc::string::String),
    #[error("bit source depleted after {consumed} bits")]
    Depleted { consumed: usize },
    #[error("requested {requested} output bits but the extraction budget allows {budget}")]
    ExtractionBudget { requested: usize, budget: usize },
    #[error("toeplitz seed must hold {expected} bits, got {actual}")]
    SeedLength { expected: usize, actual: usize },
    #[error("{test} needs at least {required} bits, got {actual}")]
    Length { test: &'static str, required: usize, actual: usize },
    #[error("win probability target {0} is outside the fittable range [0.5, cos^2(pi/8)]")]
    Unfittable(f64),
    #[error("invalid bit value {0}")]
    InvalidBit(u8),
}

pub type Result<T> = core::result::Result<T, Error>;
