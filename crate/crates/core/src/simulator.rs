//! Pure statevector simulation over a handful of qubits.
//!
//! Qubit 0 is the most significant bit of an amplitude index, so the outcome
//! string of index `i` printed MSB-first reads qubit 0 on the left.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Largest register `new_state` accepts unless a different cap is given.
pub const DEFAULT_QUBIT_CAP: usize = 12;

/// Tolerance used for normalization checks on amplitudes and probabilities.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// |0…0⟩ on `n_qubits` qubits.
pub fn new_state(n_qubits: usize) -> Result<StateVector> {
    new_state_with_cap(n_qubits, DEFAULT_QUBIT_CAP)
}

pub fn new_state_with_cap(n_qubits: usize, cap: usize) -> Result<StateVector> {
    if n_qubits == 0 || n_qubits > cap {
        return Err(Error::Capacity { requested: n_qubits, cap });
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector { n_qubits, amplitudes })
}

impl StateVector {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitIndex { index: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn apply_single(&mut self, q: usize, m: &[[Complex64; 2]; 2]) {
        let mask = self.mask(q);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let c = self.mask(control);
        let t = self.mask(target);
        for i in 0..self.amplitudes.len() {
            if i & c != 0 && i & t == 0 {
                self.amplitudes.swap(i, i | t);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Cnot { control: usize, target: usize },
    Ry { target: usize, theta: f64 },
}

impl Gate {
    pub fn ry(target: usize, theta: f64) -> Self {
        Gate::Ry { target, theta }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Ry { target: q, .. } => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    /// Dense unitary in row-major order: 2×2 for single-qubit gates, 4×4 for
    /// CNOT with the control as the high bit.
    pub fn matrix(&self) -> Vec<Vec<Complex64>> {
        let c = |re: f64| Complex64::new(re, 0.0);
        match *self {
            Gate::H(_) => {
                let h = c(FRAC_1_SQRT_2);
                vec![vec![h, h], vec![h, -h]]
            }
            Gate::X(_) => vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]],
            Gate::Ry { theta, .. } => {
                let (s, co) = (libm::sin(theta / 2.0), libm::cos(theta / 2.0));
                vec![vec![c(co), c(-s)], vec![c(s), c(co)]]
            }
            Gate::Cnot { .. } => {
                let mut m = vec![vec![c(0.0); 4]; 4];
                m[0][0] = c(1.0);
                m[1][1] = c(1.0);
                m[2][3] = c(1.0);
                m[3][2] = c(1.0);
                m
            }
        }
    }
}

/// Returns `gate · state`.
pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    apply_gate_in_place(&mut out, gate)?;
    Ok(out)
}

pub fn apply_gate_in_place(state: &mut StateVector, gate: &Gate) -> Result<()> {
    let targets = gate.targets();
    for &q in &targets {
        state.check_qubit(q)?;
    }
    if targets.len() == 2 && targets[0] == targets[1] {
        return Err(Error::DuplicateTarget(targets[0]));
    }
    match *gate {
        Gate::Cnot { control, target } => state.apply_cnot(control, target),
        Gate::H(q) | Gate::X(q) | Gate::Ry { target: q, .. } => {
            let m = gate.matrix();
            state.apply_single(q, &[[m[0][0], m[0][1]], [m[1][0], m[1][1]]]);
        }
    }
    Ok(())
}

/// Runs `gates` in order starting from |0…0⟩.
pub fn run_circuit(n_qubits: usize, gates: &[Gate]) -> Result<StateVector> {
    let mut state = new_state(n_qubits)?;
    for g in gates {
        apply_gate_in_place(&mut state, g)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(n_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits >= usize::BITS as usize || probs.len() != 1 << n_qubits {
            return Err(Error::Distribution("length must be 2^n_qubits"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Distribution("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if libm::fabs(total - 1.0) > NORM_TOLERANCE {
            return Err(Error::Distribution("probabilities must sum to 1"));
        }
        Ok(Self { n_qubits, probs })
    }

    pub fn uniform(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits >= usize::BITS as usize {
            return Err(Error::Distribution("length must be 2^n_qubits"));
        }
        let len = 1usize << n_qubits;
        Ok(Self { n_qubits, probs: vec![1.0 / len as f64; len] })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, bitstring: &str) -> Option<f64> {
        parse_bitstring(bitstring, self.n_qubits).map(|i| self.probs[i])
    }
}

/// Born-rule probabilities of `state`.
pub fn probabilities(state: &StateVector) -> OutcomeDistribution {
    OutcomeDistribution {
        n_qubits: state.n_qubits,
        probs: state.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// Mixes `dist` toward uniform with weight `lambda`.
pub fn depolarize(dist: &OutcomeDistribution, lambda: f64) -> Result<OutcomeDistribution> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain { what: "depolarizing weight", value: lambda });
    }
    let u = 1.0 / dist.probs.len() as f64;
    Ok(OutcomeDistribution {
        n_qubits: dist.n_qubits,
        probs: dist.probs.iter().map(|p| (1.0 - lambda) * p + lambda * u).collect(),
    })
}

/// Outcome string for amplitude index `index`, qubit 0 leftmost.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|q| if index >> (n_qubits - 1 - q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bitstring(s: &str, n_qubits: usize) -> Option<usize> {
    if s.len() != n_qubits {
        return None;
    }
    s.bytes().try_fold(0usize, |acc, b| match b {
        b'0' => Some(acc << 1),
        b'1' => Some(acc << 1 | 1),
        _ => None,
    })
}

/// Draws `shots` outcome indices from `dist`, advancing `rng` by one word per
/// shot.
pub fn sample_indices(dist: &OutcomeDistribution, shots: u64, rng: &mut CounterRng) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let mut cumulative = Vec::with_capacity(dist.probs.len());
    let mut acc = 0.0;
    for &p in &dist.probs {
        acc += p;
        cumulative.push(acc);
    }
    // Rounding can leave the last cumulative entry a hair under 1.
    let last_support = dist.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut out = Vec::with_capacity(shots as usize);
    for _ in 0..shots {
        let u = rng.next_f64();
        let idx = cumulative.partition_point(|&c| c <= u).min(last_support);
        out.push(idx);
    }
    Ok(out)
}

/// Execution result in the shared record/replay shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
    pub memory: Option<Vec<String>>,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl CountsRecord {
    /// Tallies outcome indices into a record; `keep_memory` retains per-shot
    /// order.
    pub fn from_indices(indices: &[usize], n_qubits: usize, keep_memory: bool) -> Self {
        let mut tally = vec![0u64; 1 << n_qubits];
        for &i in indices {
            tally[i] += 1;
        }
        let counts = tally
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (bitstring(i, n_qubits), c))
            .collect();
        let memory = keep_memory.then(|| indices.iter().map(|&i| bitstring(i, n_qubits)).collect());
        Self { shots: indices.len() as u64, counts, memory, metadata: serde_json::Map::new() }
    }

    pub fn count(&self, bitstring: &str) -> u64 {
        self.counts.get(bitstring).copied().unwrap_or(0)
    }
}

/// Samples `shots` outcomes with a generator seeded by `rng_seed`.
pub fn sample(dist: &OutcomeDistribution, shots: u64, rng_seed: u64) -> Result<CountsRecord> {
    sample_with_memory(dist, shots, rng_seed, false)
}

pub fn sample_with_memory(
    dist: &OutcomeDistribution,
    shots: u64,
    rng_seed: u64,
    keep_memory: bool,
) -> Result<CountsRecord> {
    let mut rng = CounterRng::new(rng_seed);
    let indices = sample_indices(dist, shots, &mut rng)?;
    let mut record = CountsRecord::from_indices(&indices, dist.n_qubits, keep_memory);
    record.metadata.insert("rng".into(), crate::rng::RNG_ALGORITHM.into());
    record.metadata.insert("seed".into(), rng_seed.into());
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        libm::fabs(a - b) < 1e-12
    }

    #[test]
    fn new_state_is_ground() {
        assert_eq!(new_state(1).unwrap().amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let s = new_state(2).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        assert_eq!(s.amplitudes()[0].re, 1.0);
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm_sqr() == 0.0));
    }

    #[test]
    fn capacity_errors() {
        assert_eq!(new_state(0), Err(Error::Capacity { requested: 0, cap: DEFAULT_QUBIT_CAP }));
        assert!(matches!(new_state(13), Err(Error::Capacity { .. })));
        assert!(new_state_with_cap(13, 14).is_ok());
    }

    #[test]
    fn hadamard_and_ry() {
        let s = apply_gate(&new_state(1).unwrap(), &Gate::H(0)).unwrap();
        assert!(close(s.amplitudes()[0].re, FRAC_1_SQRT_2));
        assert!(close(s.amplitudes()[1].re, FRAC_1_SQRT_2));

        let s = apply_gate(&new_state(1).unwrap(), &Gate::ry(0, core::f64::consts::FRAC_PI_2)).unwrap();
        assert!(close(s.amplitudes()[0].re, libm::cos(core::f64::consts::FRAC_PI_4)));
        assert!(close(s.amplitudes()[1].re, libm::sin(core::f64::consts::FRAC_PI_4)));
    }

    #[test]
    fn bell_pair() {
        let s = run_circuit(2, &[Gate::H(0), Gate::cnot(0, 1)]).unwrap();
        let a = s.amplitudes();
        assert!(close(a[0].re, FRAC_1_SQRT_2) && close(a[3].re, FRAC_1_SQRT_2));
        assert!(a[1].norm_sqr() == 0.0 && a[2].norm_sqr() == 0.0);
        let p = probabilities(&s);
        assert!(close(p.probs()[0], 0.5) && close(p.probs()[3], 0.5));
    }

    #[test]
    fn x_on_qubit_zero_sets_leftmost_bit() {
        let s = run_circuit(2, &[Gate::X(0)]).unwrap();
        let p = probabilities(&s);
        assert_eq!(p.prob_of("10"), Some(1.0));
        assert_eq!(bitstring(2, 2), "10");
    }

    #[test]
    fn target_errors() {
        let s = new_state(2).unwrap();
        assert_eq!(apply_gate(&s, &Gate::H(2)), Err(Error::QubitIndex { index: 2, n_qubits: 2 }));
        assert_eq!(apply_gate(&s, &Gate::cnot(1, 1)), Err(Error::DuplicateTarget(1)));
        assert!(matches!(apply_gate(&s, &Gate::cnot(0, 5)), Err(Error::QubitIndex { .. })));
    }

    #[test]
    fn depolarize_endpoints_and_domain() {
        let d = probabilities(&run_circuit(2, &[Gate::H(0), Gate::cnot(0, 1)]).unwrap());
        assert_eq!(depolarize(&d, 0.0).unwrap(), d);
        assert!(depolarize(&d, 1.0).unwrap().probs().iter().all(|&p| close(p, 0.25)));
        assert!(matches!(depolarize(&d, 1.5), Err(Error::Domain { .. })));
        assert!(matches!(depolarize(&d, -0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn deterministic_sampling() {
        let d = OutcomeDistribution::new(1, vec![1.0, 0.0]).unwrap();
        let rec = sample(&d, 100, 3).unwrap();
        assert_eq!(rec.counts.len(), 1);
        assert_eq!(rec.count("0"), 100);
        assert_eq!(sample(&d, 0, 3), Err(Error::ZeroShots));
    }

    #[test]
    fn distribution_validation() {
        assert!(OutcomeDistribution::new(1, vec![0.5, 0.4]).is_err());
        assert!(OutcomeDistribution::new(2, vec![0.5, 0.5]).is_err());
        assert!(OutcomeDistribution::new(1, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn memory_matches_counts() {
        let d = OutcomeDistribution::uniform(2).unwrap();
        let rec = sample_with_memory(&d, 500, 11, true).unwrap();
        let mem = rec.memory.as_ref().unwrap();
        assert_eq!(mem.len(), 500);
        for (k, &v) in &rec.counts {
            assert_eq!(mem.iter().filter(|m| *m == k).count() as u64, v);
        }
        assert_eq!(rec.counts.values().sum::<u64>(), 500);
    }
}
