use alloc::vec::Vec;

use super::bits::{BitStream, SourceTag};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::simulator::{self, Gate};

fn split_streams(indices: &[usize], n_qubits: usize, source: SourceTag) -> Vec<BitStream> {
    (0..n_qubits)
        .map(|q| {
            let shift = n_qubits - 1 - q;
            let bits = indices.iter().map(|&i| (i >> shift & 1) as u8).collect();
            BitStream::new(bits, source).expect("extracted bits are 0 or 1")
        })
        .collect()
}

fn sample_streams(n_qubits: usize, gates: &[Gate], shots: u64, seed: u64, source: SourceTag) -> Result<Vec<BitStream>> {
    let state = simulator::run_circuit(n_qubits, gates)?;
    let dist = simulator::probabilities(&state);
    let indices = simulator::sample_indices(&dist, shots, &mut CounterRng::new(seed))?;
    Ok(split_streams(&indices, n_qubits, source))
}

/// H on every qubit, measured `shots` times; one stream per qubit in shot
/// order.
pub fn hadamard_qrng(n_qubits: usize, shots: u64, seed: u64) -> Result<Vec<BitStream>> {
    simulator::new_state(n_qubits)?;
    let gates: Vec<Gate> = (0..n_qubits).map(Gate::H).collect();
    sample_streams(n_qubits, &gates, shots, seed, SourceTag::Hadamard)
}

/// Circuit preparing the uniform superposition of even-parity strings: H on
/// qubits `0..n-1`, each then CNOT'd onto the last qubit.
pub fn parity_state(n_qubits: usize) -> Result<Vec<Gate>> {
    if n_qubits < 3 {
        return Err(Error::Domain { what: "parity register size", value: n_qubits as f64 });
    }
    let last = n_qubits - 1;
    let mut gates: Vec<Gate> = (0..last).map(Gate::H).collect();
    gates.extend((0..last).map(|q| Gate::cnot(q, last)));
    Ok(gates)
}

/// Samples the parity state; the XOR of all streams is identically zero.
pub fn parity_qrng(n_qubits: usize, shots: u64, seed: u64) -> Result<Vec<BitStream>> {
    let gates = parity_state(n_qubits)?;
    sample_streams(n_qubits, &gates, shots, seed, SourceTag::Parity)
}
