//! The CHSH game: referee inputs, strategies, circuit compilation and
//! round/experiment bookkeeping.
//!
//! Alice holds qubit 0 and Bob qubit 1 of (|00⟩ + |11⟩)/√2. A planar
//! measurement angle φ is realised by rotating the state with Ry(2φ) and
//! measuring in the computational basis, so the probability of equal outputs
//! is cos²(φ_B − φ_A).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, labels, CounterRng};
use crate::simulator::{self, CountsRecord, Gate, OutcomeDistribution};

/// Ideal quantum winning probability, cos²(π/8).
pub fn quantum_value() -> f64 {
    let c = libm::cos(FRAC_PI_8);
    c * c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(u8, u8)", into = "(u8, u8)")]
pub struct GameSetting {
    x: u8,
    y: u8,
}

impl GameSetting {
    pub const ALL: [GameSetting; 4] =
        [GameSetting { x: 0, y: 0 }, GameSetting { x: 0, y: 1 }, GameSetting { x: 1, y: 0 }, GameSetting { x: 1, y: 1 }];

    pub fn new(x: u8, y: u8) -> Result<Self> {
        for b in [x, y] {
            if b > 1 {
                return Err(Error::InvalidBit(b));
            }
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> u8 {
        self.x
    }

    pub fn y(&self) -> u8 {
        self.y
    }

    /// Required value of a ⊕ b.
    pub fn target_parity(&self) -> u8 {
        self.x & self.y
    }
}

impl TryFrom<(u8, u8)> for GameSetting {
    type Error = Error;
    fn try_from((x, y): (u8, u8)) -> Result<Self> {
        GameSetting::new(x, y)
    }
}

impl From<GameSetting> for (u8, u8) {
    fn from(s: GameSetting) -> Self {
        (s.x, s.y)
    }
}

impl fmt::Display for GameSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x={}, y={})", self.x, self.y)
    }
}

/// Whether outputs `(a, b)` win under `setting`: a ⊕ b = x·y.
pub fn win_condition(setting: GameSetting, a: u8, b: u8) -> bool {
    (a ^ b) & 1 == setting.target_parity()
}

/// Identity of a referee bit source, used to enforce independence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceId {
    Seed(u64),
    Named(String),
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceId::Seed(s) => write!(f, "seed {s}"),
            SourceId::Named(n) => write!(f, "{n}"),
        }
    }
}

/// A stream of referee bits.
pub trait BitSource {
    fn id(&self) -> SourceId;
    fn next_bit(&mut self) -> Result<u8>;
}

/// Bits drawn from a seeded counter generator.
#[derive(Debug, Clone)]
pub struct SeededBits {
    seed: u64,
    rng: CounterRng,
}

impl SeededBits {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: CounterRng::new(seed) }
    }
}

impl BitSource for SeededBits {
    fn id(&self) -> SourceId {
        SourceId::Seed(self.seed)
    }

    fn next_bit(&mut self) -> Result<u8> {
        Ok(self.rng.next_bit())
    }
}

/// Draws `rounds` settings, x only from `source_a` and y only from `source_b`.
pub fn referee_inputs(
    rounds: usize,
    source_a: &mut dyn BitSource,
    source_b: &mut dyn BitSource,
) -> Result<Vec<GameSetting>> {
    let (ida, idb) = (source_a.id(), source_b.id());
    if ida == idb {
        return Err(Error::FreedomOfChoice(alloc::format!("{ida}")));
    }
    (0..rounds)
        .map(|_| GameSetting::new(source_a.next_bit()?, source_b.next_bit()?))
        .collect()
}

/// Planar measurement angles for both parties, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumStrategy {
    pub alice_angles: [f64; 2],
    pub bob_angles: [f64; 2],
    #[serde(default)]
    pub global_offset: f64,
}

impl Default for QuantumStrategy {
    fn default() -> Self {
        Self { alice_angles: [0.0, FRAC_PI_4], bob_angles: [FRAC_PI_8, -FRAC_PI_8], global_offset: 0.0 }
    }
}

impl QuantumStrategy {
    pub fn with_offset(offset: f64) -> Self {
        Self { global_offset: offset, ..Self::default() }
    }

    pub fn alice_angle(&self, x: u8) -> f64 {
        self.alice_angles[x as usize] + self.global_offset
    }

    pub fn bob_angle(&self, y: u8) -> f64 {
        self.bob_angles[y as usize] + self.global_offset
    }
}

/// Gate sequence for one round: Bell pair, then Ry(2φ) on each party's qubit.
/// Zero-angle rotations are omitted.
pub fn compile_round(setting: GameSetting, strategy: &QuantumStrategy) -> Vec<Gate> {
    let mut gates = vec![Gate::H(0), Gate::cnot(0, 1)];
    for (qubit, angle) in [(0, strategy.alice_angle(setting.x)), (1, strategy.bob_angle(setting.y))] {
        if angle != 0.0 {
            gates.push(Gate::ry(qubit, 2.0 * angle));
        }
    }
    gates
}

/// Analytic outcome distribution of a round after depolarizing with `lambda`.
pub fn round_distribution(setting: GameSetting, strategy: &QuantumStrategy, lambda: f64) -> Result<OutcomeDistribution> {
    let state = simulator::run_circuit(2, &compile_round(setting, strategy))?;
    simulator::depolarize(&simulator::probabilities(&state), lambda)
}

/// Probability that Alice and Bob output equal bits.
pub fn same_probability(dist: &OutcomeDistribution) -> f64 {
    dist.probs()[0b00] + dist.probs()[0b11]
}

/// Exact winning probability of a round under the noise model.
pub fn win_probability(setting: GameSetting, strategy: &QuantumStrategy, lambda: f64) -> Result<f64> {
    let same = same_probability(&round_distribution(setting, strategy, lambda)?);
    Ok(if setting.target_parity() == 0 { same } else { 1.0 - same })
}

/// Average winning probability over uniformly chosen settings.
pub fn average_win_probability(strategy: &QuantumStrategy, lambda: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in GameSetting::ALL {
        total += win_probability(s, strategy, lambda)?;
    }
    Ok(total / 4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub setting: GameSetting,
    pub shots: u64,
    pub same_count: u64,
    pub diff_count: u64,
    pub win_fraction: f64,
    pub counts: CountsRecord,
}

impl RoundResult {
    /// Builds the round bookkeeping from a two-qubit counts record.
    pub fn from_counts(setting: GameSetting, counts: CountsRecord) -> Self {
        let same_count = counts.count("00") + counts.count("11");
        let diff_count = counts.count("01") + counts.count("10");
        let shots = counts.shots;
        let win_fraction = win_fraction(setting, same_count, diff_count);
        Self { setting, shots, same_count, diff_count, win_fraction, counts }
    }

    /// Rebuilds a round from its same/diff tallies alone (e.g. a round CSV
    /// row). The attached record carries no per-outcome counts.
    pub fn from_tallies(setting: GameSetting, same_count: u64, diff_count: u64) -> Self {
        let shots = same_count + diff_count;
        let mut counts = CountsRecord {
            shots,
            counts: Default::default(),
            memory: None,
            metadata: serde_json::Map::new(),
        };
        counts.metadata.insert("tallies_only".into(), true.into());
        let win_fraction = win_fraction(setting, same_count, diff_count);
        Self { setting, shots, same_count, diff_count, win_fraction, counts }
    }

    pub fn win_count(&self) -> u64 {
        if self.setting.target_parity() == 0 {
            self.same_count
        } else {
            self.diff_count
        }
    }
}

/// Fraction of winning shots given the same/diff tallies.
pub fn win_fraction(setting: GameSetting, same_count: u64, diff_count: u64) -> f64 {
    let shots = same_count + diff_count;
    if shots == 0 {
        return 0.0;
    }
    let wins = if setting.target_parity() == 0 { same_count } else { diff_count };
    wins as f64 / shots as f64
}

/// Outcome indices for one round drawn from `rng`.
pub fn sample_round(
    setting: GameSetting,
    strategy: &QuantumStrategy,
    shots: u64,
    lambda: f64,
    rng: &mut CounterRng,
) -> Result<Vec<usize>> {
    let dist = round_distribution(setting, strategy, lambda)?;
    simulator::sample_indices(&dist, shots, rng)
}

pub fn play_round(
    setting: GameSetting,
    strategy: &QuantumStrategy,
    shots: u64,
    lambda: f64,
    rng_seed: u64,
) -> Result<RoundResult> {
    play_round_recorded(setting, strategy, shots, lambda, rng_seed, false)
}

/// As [`play_round`], optionally keeping per-shot memory in the counts.
pub fn play_round_recorded(
    setting: GameSetting,
    strategy: &QuantumStrategy,
    shots: u64,
    lambda: f64,
    rng_seed: u64,
    keep_memory: bool,
) -> Result<RoundResult> {
    let mut rng = CounterRng::new(rng_seed);
    let indices = sample_round(setting, strategy, shots, lambda, &mut rng)?;
    let counts = CountsRecord::from_indices(&indices, 2, keep_memory);
    Ok(RoundResult::from_counts(setting, counts))
}

/// Deterministic classical strategy `(a(0), a(1), b(0), b(1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassicalStrategy {
    table: [u8; 4],
}

impl ClassicalStrategy {
    pub fn new(a0: u8, a1: u8, b0: u8, b1: u8) -> Result<Self> {
        let table = [a0, a1, b0, b1];
        if let Some(&bad) = table.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBit(bad));
        }
        Ok(Self { table })
    }

    /// All 16 deterministic strategies.
    pub fn all() -> impl Iterator<Item = ClassicalStrategy> {
        (0u8..16).map(|m| ClassicalStrategy { table: [m >> 3 & 1, m >> 2 & 1, m >> 1 & 1, m & 1] })
    }

    pub fn alice(&self, x: u8) -> u8 {
        self.table[x as usize]
    }

    pub fn bob(&self, y: u8) -> u8 {
        self.table[2 + y as usize]
    }

    /// Number of settings (out of 4) this strategy wins.
    pub fn wins(&self) -> u32 {
        GameSetting::ALL.iter().filter(|&&s| play_classical_round(s, self)).count() as u32
    }
}

pub fn play_classical_round(setting: GameSetting, strategy: &ClassicalStrategy) -> bool {
    win_condition(setting, strategy.alice(setting.x), strategy.bob(setting.y))
}

/// Best deterministic value as an exact fraction `(wins, settings)`.
pub fn classical_value() -> (u32, u32) {
    let best = ClassicalStrategy::all().map(|s| s.wins()).max().unwrap_or(0);
    (best, GameSetting::ALL.len() as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rounds: Vec<RoundResult>,
    pub p_min: f64,
    pub p_avg: f64,
    pub p_max: f64,
    /// Population standard deviation of the round win fractions.
    pub sigma: f64,
}

impl ExperimentResult {
    /// Aggregates rounds stored in round-index order.
    pub fn from_rounds(rounds: Vec<RoundResult>) -> Self {
        if rounds.is_empty() {
            return Self { rounds, p_min: 0.0, p_avg: 0.0, p_max: 0.0, sigma: 0.0 };
        }
        let n = rounds.len() as f64;
        let fractions = rounds.iter().map(|r| r.win_fraction);
        let p_min = fractions.clone().fold(f64::INFINITY, f64::min);
        let p_max = fractions.clone().fold(f64::NEG_INFINITY, f64::max);
        let p_avg = fractions.clone().sum::<f64>() / n;
        let var = fractions.map(|w| (w - p_avg) * (w - p_avg)).sum::<f64>() / n;
        // Clamp away sub-ulp drift of the mean outside [min, max].
        let p_avg = p_avg.clamp(p_min, p_max);
        Self { rounds, p_min, p_avg, p_max, sigma: libm::sqrt(var) }
    }

    pub fn total_shots(&self) -> u64 {
        self.rounds.iter().map(|r| r.shots).sum()
    }

    pub fn total_wins(&self) -> u64 {
        self.rounds.iter().map(|r| r.win_count()).sum()
    }

    /// Shot-weighted winning fraction across all rounds.
    pub fn pooled_win_fraction(&self) -> f64 {
        let n = self.total_shots();
        if n == 0 {
            0.0
        } else {
            self.total_wins() as f64 / n as f64
        }
    }
}

/// Parameters of a seeded experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub rounds: usize,
    pub shots: u64,
    pub lambda: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub strategy: QuantumStrategy,
}

impl ExperimentConfig {
    pub fn new(rounds: usize, shots: u64, lambda: f64, master_seed: u64) -> Self {
        Self { rounds, shots, lambda, master_seed, strategy: QuantumStrategy::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Domain { what: "round count", value: 0.0 });
        }
        if self.shots == 0 {
            return Err(Error::ZeroShots);
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Domain { what: "depolarizing weight", value: self.lambda });
        }
        Ok(())
    }

    /// Default referee sources: two streams derived from the master seed.
    pub fn referee_sources(&self) -> (SeededBits, SeededBits) {
        (
            SeededBits::new(rng::derive_key(self.master_seed, labels::ALICE_INPUT)),
            SeededBits::new(rng::derive_key(self.master_seed, labels::BOB_INPUT)),
        )
    }
}

/// Plays every round with its own derived seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (mut a, mut b) = config.referee_sources();
    let settings = referee_inputs(config.rounds, &mut a, &mut b)?;
    let rounds = settings
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            play_round(s, &config.strategy, config.shots, config.lambda, rng::round_seed(config.master_seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult::from_rounds(rounds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: u8, y: u8) -> GameSetting {
        GameSetting::new(x, y).unwrap()
    }

    #[test]
    fn win_table() {
        assert!(win_condition(s(0, 0), 0, 0));
        assert!(win_condition(s(0, 0), 1, 1));
        assert!(win_condition(s(1, 1), 0, 1));
        assert!(win_condition(s(1, 1), 1, 0));
        assert!(!win_condition(s(1, 1), 1, 1));
        assert!(!win_condition(s(0, 1), 1, 0));
    }

    #[test]
    fn setting_rejects_non_bits() {
        assert_eq!(GameSetting::new(2, 0), Err(Error::InvalidBit(2)));
    }

    #[test]
    fn compile_examples() {
        let st = QuantumStrategy::default();
        assert_eq!(
            compile_round(s(1, 0), &st),
            vec![Gate::H(0), Gate::cnot(0, 1), Gate::ry(0, core::f64::consts::FRAC_PI_2), Gate::ry(1, FRAC_PI_4)]
        );
        assert_eq!(compile_round(s(0, 0), &st), vec![Gate::H(0), Gate::cnot(0, 1), Gate::ry(1, FRAC_PI_4)]);
        assert_eq!(
            compile_round(s(1, 1), &st),
            vec![Gate::H(0), Gate::cnot(0, 1), Gate::ry(0, core::f64::consts::FRAC_PI_2), Gate::ry(1, -FRAC_PI_4)]
        );
    }

    #[test]
    fn classical_strategies() {
        let zero = ClassicalStrategy::new(0, 0, 0, 0).unwrap();
        assert!(play_classical_round(s(0, 0), &zero));
        assert!(!play_classical_round(s(1, 1), &zero));
        assert_eq!(ClassicalStrategy::all().count(), 16);
        assert_eq!(classical_value(), (3, 4));
    }

    #[test]
    fn referee_requires_distinct_sources() {
        let mut a = SeededBits::new(5);
        let mut b = SeededBits::new(5);
        assert!(matches!(referee_inputs(4, &mut a, &mut b), Err(Error::FreedomOfChoice(_))));
    }

    #[test]
    fn referee_reproducible() {
        let run = || referee_inputs(4, &mut SeededBits::new(1), &mut SeededBits::new(2)).unwrap();
        assert_eq!(run().len(), 4);
        assert_eq!(run(), run());
    }

    #[test]
    fn single_round_statistics() {
        let r = play_round(s(0, 0), &QuantumStrategy::default(), 50, 0.0, 9).unwrap();
        let e = ExperimentResult::from_rounds(vec![r]);
        assert_eq!(e.p_min, e.p_avg);
        assert_eq!(e.p_avg, e.p_max);
        assert_eq!(e.sigma, 0.0);
    }

    #[test]
    fn bookkeeping_consistent() {
        for (i, setting) in GameSetting::ALL.into_iter().enumerate() {
            let r = play_round(setting, &QuantumStrategy::default(), 1000, 0.3, i as u64).unwrap();
            assert_eq!(r.same_count + r.diff_count, r.shots);
            assert_eq!(r.win_fraction, win_fraction(setting, r.same_count, r.diff_count));
        }
    }

    #[test]
    fn experiment_rejects_bad_config() {
        assert!(run_experiment(&ExperimentConfig::new(0, 10, 0.0, 1)).is_err());
        assert!(run_experiment(&ExperimentConfig::new(1, 0, 0.0, 1)).is_err());
        assert!(run_experiment(&ExperimentConfig::new(1, 10, 1.2, 1)).is_err());
    }
}
