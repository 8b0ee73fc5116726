//! Experiment orchestration with explicit loophole controls.
//!
//! An [`ExperimentSpec`] is the JSON accepted by `chshrng play --config`. It
//! names where the referee's inputs come from, the noise level, and the
//! [`LoopholeConfig`] flags. [`run_certified_experiment`] plays every round,
//! applies per-shot detection, certifies the post-selected statistics and
//! returns Alice's output bits.

use std::path::{Path, PathBuf};

use chshrng_core::certify::{certify_counts, certify_with_threshold, Certificate, DEFAULT_Z_THRESHOLD};
use chshrng_core::game::{
    referee_inputs, sample_round, BitSource, ExperimentConfig, ExperimentResult, GameSetting, QuantumStrategy,
    RoundResult, SeededBits, SourceId,
};
use chshrng_core::randomness::{BitStream, SourceTag};
use chshrng_core::rng::{derive_key, labels, round_seed, CounterRng, RNG_ALGORITHM};
use chshrng_core::simulator::CountsRecord;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::formats::{read_counts_record, read_to_string, FORMAT_VERSION};
use crate::profiles::find_profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopholeConfig {
    /// x and y must come from two distinct sources.
    pub independent_inputs: bool,
    /// Each round samples from its own derived seed rather than a carried
    /// stream.
    pub fresh_state_per_round: bool,
    /// Per-party, per-shot detection probability, in (0, 1].
    pub detection_efficiency: f64,
    /// Also report statistics counting undetected shots as losses.
    pub report_all_events: bool,
}

impl Default for LoopholeConfig {
    fn default() -> Self {
        Self { independent_inputs: true, fresh_state_per_round: true, detection_efficiency: 1.0, report_all_events: true }
    }
}

/// Where the referee's setting bits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSources {
    /// Two seeded generators. Missing seeds are derived from the master seed.
    Seeded {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed_a: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed_b: Option<u64>,
    },
    /// One generator feeding both x and y.
    Shared {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Recorded counts files with per-shot memory: one file feeds both
    /// parties, two files feed x and y respectively.
    Replay { files: Vec<PathBuf> },
}

impl Default for InputSources {
    fn default() -> Self {
        InputSources::Seeded { seed_a: None, seed_b: None }
    }
}

fn default_format_version() -> u64 {
    FORMAT_VERSION
}

fn default_threshold() -> f64 {
    DEFAULT_Z_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_format_version")]
    pub format_version: u64,
    pub rounds: usize,
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub master_seed: u64,
    #[serde(default)]
    pub strategy: QuantumStrategy,
    #[serde(default)]
    pub inputs: InputSources,
    #[serde(default)]
    pub loopholes: LoopholeConfig,
    #[serde(default = "default_threshold")]
    pub threshold_z: f64,
}

impl ExperimentSpec {
    pub fn new(rounds: usize, shots: u64, lambda: f64, master_seed: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            rounds,
            shots,
            lambda: Some(lambda),
            profile: None,
            master_seed,
            strategy: QuantumStrategy::default(),
            inputs: InputSources::default(),
            loopholes: LoopholeConfig::default(),
            threshold_z: DEFAULT_Z_THRESHOLD,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks every flag combination. Returns the depolarizing weight to use.
    pub fn validate(&self) -> Result<f64> {
        let config_err = |m: String| Err(LabError::Config(m));
        if self.format_version != FORMAT_VERSION {
            return config_err(format!("unsupported format_version {}", self.format_version));
        }
        if self.rounds == 0 {
            return config_err("rounds must be at least 1".into());
        }
        if self.shots == 0 {
            return config_err("shots must be at least 1".into());
        }
        if !self.threshold_z.is_finite() {
            return config_err("threshold_z must be finite".into());
        }
        let eta = self.loopholes.detection_efficiency;
        if !(eta > 0.0 && eta <= 1.0) {
            return config_err(format!("detection_efficiency must lie in (0, 1], got {eta}"));
        }
        let lambda = match (&self.lambda, &self.profile) {
            (Some(_), Some(_)) => return config_err("give either lambda or profile, not both".into()),
            (Some(l), None) => *l,
            (None, Some(name)) => find_profile(name)?.fitted_lambda,
            (None, None) => 0.0,
        };
        if !(0.0..=1.0).contains(&lambda) {
            return config_err(format!("lambda must lie in [0, 1], got {lambda}"));
        }
        let independent = self.loopholes.independent_inputs;
        match &self.inputs {
            InputSources::Shared { .. } if independent => {
                return config_err("independent_inputs requires two distinct sources, but inputs are shared".into())
            }
            InputSources::Seeded { .. } => {
                let (a, b) = self.seeded_pair();
                if a == b {
                    return config_err(format!("both input sources use seed {a}"));
                }
            }
            InputSources::Replay { files } => match files.as_slice() {
                [] => return config_err("replay needs at least one counts file".into()),
                [_] if independent => {
                    return config_err("independent_inputs requires two replay files, got one".into())
                }
                [a, b] if same_file(a, b) => {
                    return config_err(format!("both input sources replay {}", a.display()))
                }
                [_] | [_, _] => {}
                _ => return config_err(format!("replay takes one or two files, got {}", files.len())),
            },
            InputSources::Shared { .. } => {}
        }
        Ok(lambda)
    }

    fn seeded_pair(&self) -> (u64, u64) {
        match self.inputs {
            InputSources::Seeded { seed_a, seed_b } => (
                seed_a.unwrap_or_else(|| derive_key(self.master_seed, labels::ALICE_INPUT)),
                seed_b.unwrap_or_else(|| derive_key(self.master_seed, labels::BOB_INPUT)),
            ),
            _ => unreachable!("seeded_pair on non-seeded inputs"),
        }
    }

    fn shared_seed(&self, seed: Option<u64>) -> u64 {
        seed.unwrap_or_else(|| derive_key(self.master_seed, labels::ALICE_INPUT))
    }

    /// The core experiment this spec reduces to when every loophole flag is
    /// at its default and inputs are the derived seeds.
    pub fn core_config(&self, lambda: f64) -> ExperimentConfig {
        ExperimentConfig { rounds: self.rounds, shots: self.shots, lambda, master_seed: self.master_seed, strategy: self.strategy }
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Referee bits replayed from a recorded counts file, in memory order.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    path: PathBuf,
    bits: Vec<u8>,
    cursor: usize,
}

impl ReplaySource {
    /// Loads and validates the record. Per-shot memory is required; each
    /// memory entry contributes its bits left to right.
    pub fn open(path: &Path) -> Result<Self> {
        let record = read_counts_record(path)?;
        Self::from_record(path, &record)
    }

    pub fn from_record(path: &Path, record: &CountsRecord) -> Result<Self> {
        let memory = record
            .memory
            .as_ref()
            .ok_or_else(|| LabError::format(path, "replay needs the per-shot memory field"))?;
        let bits = memory.iter().flat_map(|m| m.bytes().map(|c| c - b'0')).collect();
        Ok(Self { path: path.to_path_buf(), bits, cursor: 0 })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }

    pub fn take(&mut self) -> Result<u8> {
        let bit = self.bits.get(self.cursor).copied().ok_or_else(|| LabError::Depleted {
            path: self.path.clone(),
            consumed: self.cursor,
        })?;
        self.cursor += 1;
        Ok(bit)
    }
}

impl BitSource for ReplaySource {
    fn id(&self) -> SourceId {
        SourceId::Named(self.path.display().to_string())
    }

    fn next_bit(&mut self) -> chshrng_core::Result<u8> {
        self.take().map_err(|_| chshrng_core::Error::Depleted { consumed: self.cursor })
    }
}

/// Draws the round settings for `spec`.
pub fn draw_settings(spec: &ExperimentSpec) -> Result<Vec<GameSetting>> {
    let rounds = spec.rounds;
    match &spec.inputs {
        InputSources::Seeded { .. } => {
            let (a, b) = spec.seeded_pair();
            Ok(referee_inputs(rounds, &mut SeededBits::new(a), &mut SeededBits::new(b))?)
        }
        InputSources::Shared { seed } => {
            let mut rng = CounterRng::new(spec.shared_seed(*seed));
            (0..rounds).map(|_| Ok(GameSetting::new(rng.next_bit(), rng.next_bit())?)).collect()
        }
        InputSources::Replay { files } => match files.as_slice() {
            [one] => {
                let mut src = ReplaySource::open(one)?;
                (0..rounds).map(|_| Ok(GameSetting::new(src.take()?, src.take()?)?)).collect()
            }
            [a, b] => {
                let (mut sa, mut sb) = (ReplaySource::open(a)?, ReplaySource::open(b)?);
                (0..rounds).map(|_| Ok(GameSetting::new(sa.take()?, sb.take()?)?)).collect()
            }
            _ => Err(LabError::Config("replay takes one or two files".into())),
        },
    }
}

/// Detection bookkeeping for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub detection_efficiency: f64,
    pub emitted_shots: u64,
    pub coincidences: u64,
    pub post_selected_p_win: f64,
    /// Coincident wins over emitted shots: a missed detection counts as a loss.
    pub all_event_win_fraction: f64,
    pub all_event_certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedRun {
    pub lambda: f64,
    /// Post-selected rounds: only shots where both parties detected.
    pub experiment: ExperimentResult,
    pub certificate: Certificate,
    /// Alice's outcome bit for every coincident shot, in round then shot order.
    pub alice_bits: BitStream,
    pub emitted_shots: u64,
    pub detection: Option<DetectionSummary>,
    pub notes: Vec<String>,
}

#[derive(Debug)]
struct RoundOutput {
    round: RoundResult,
    alice: Vec<u8>,
}

fn play_shots(
    index: usize,
    setting: GameSetting,
    spec: &ExperimentSpec,
    lambda: f64,
    outcomes: &mut CounterRng,
    detector: &mut CounterRng,
) -> Result<RoundOutput> {
    let indices = sample_round(setting, &spec.strategy, spec.shots, lambda, outcomes)?;
    let eta = spec.loopholes.detection_efficiency;
    let kept: Vec<usize> = if eta >= 1.0 {
        indices
    } else {
        indices
            .into_iter()
            .filter(|_| {
                let alice = detector.bernoulli(eta);
                let bob = detector.bernoulli(eta);
                alice && bob
            })
            .collect()
    };
    if kept.is_empty() {
        return Err(LabError::Config(format!(
            "round {index} recorded no coincidences; raise shots or detection_efficiency"
        )));
    }
    let alice = kept.iter().map(|&i| (i >> 1) as u8).collect();
    let round = RoundResult::from_counts(setting, CountsRecord::from_indices(&kept, 2, false));
    Ok(RoundOutput { round, alice })
}

fn play_fresh_round(index: usize, setting: GameSetting, spec: &ExperimentSpec, lambda: f64) -> Result<RoundOutput> {
    let seed = round_seed(spec.master_seed, index as u64);
    let mut outcomes = CounterRng::new(seed);
    let mut detector = CounterRng::new(derive_key(seed, labels::DETECTION));
    play_shots(index, setting, spec, lambda, &mut outcomes, &mut detector)
}

fn notes(spec: &ExperimentSpec) -> Vec<String> {
    let l = &spec.loopholes;
    let mut notes = vec!["locality: open; both parties are simulated in one process without space-like separation".to_string()];
    notes.push(if l.independent_inputs {
        "freedom of choice: x and y drawn from two distinct sources".into()
    } else {
        "freedom of choice: open; x and y may share a source".into()
    });
    notes.push(if l.fresh_state_per_round {
        "memory: partially closed; every round starts from a fresh state and its own derived seed, but all rounds run on the same simulated device".into()
    } else {
        "memory: open; one generator stream is carried across rounds".into()
    });
    let eta = l.detection_efficiency;
    notes.push(if eta >= 1.0 {
        "fair sampling: every emitted pair is detected".into()
    } else if l.report_all_events {
        format!("fair sampling: statistics are post-selected on coincidences at detection efficiency {eta}; all-event figures reported alongside")
    } else {
        format!("fair sampling: open; statistics are post-selected on coincidences at detection efficiency {eta} and all-event figures are suppressed")
    });
    notes
}

/// Plays every round of `spec` honoring its loophole flags and certifies the
/// post-selected statistics.
///
/// With fresh state, round `i` depends only on the master seed, its index
/// and its setting, so rounds run in parallel and any single round can be
/// replayed with [`replay_round`]. Without it, one stream is consumed by the
/// rounds in order.
pub fn run_certified_experiment(spec: &ExperimentSpec) -> Result<CertifiedRun> {
    let lambda = spec.validate()?;
    let settings = draw_settings(spec)?;
    let outputs: Vec<RoundOutput> = if spec.loopholes.fresh_state_per_round {
        settings
            .par_iter()
            .enumerate()
            .map(|(i, &s)| play_fresh_round(i, s, spec, lambda))
            .collect::<Result<_>>()?
    } else {
        let session = CounterRng::new(derive_key(spec.master_seed, labels::SESSION));
        let mut outcomes = session.clone();
        let mut detector = session.split(labels::DETECTION);
        settings
            .iter()
            .enumerate()
            .map(|(i, &s)| play_shots(i, s, spec, lambda, &mut outcomes, &mut detector))
            .collect::<Result<_>>()?
    };

    let mut alice = Vec::new();
    let mut rounds = Vec::with_capacity(outputs.len());
    for out in outputs {
        alice.extend(out.alice);
        rounds.push(out.round);
    }
    let experiment = ExperimentResult::from_rounds(rounds);
    let certificate = certify_with_threshold(&experiment, spec.threshold_z);
    let emitted_shots = spec.rounds as u64 * spec.shots;
    let detection = spec.loopholes.report_all_events.then(|| {
        let wins = experiment.total_wins();
        DetectionSummary {
            detection_efficiency: spec.loopholes.detection_efficiency,
            emitted_shots,
            coincidences: experiment.total_shots(),
            post_selected_p_win: certificate.p_win,
            all_event_win_fraction: wins as f64 / emitted_shots as f64,
            all_event_certificate: certify_counts(wins, emitted_shots, spec.threshold_z),
        }
    });
    Ok(CertifiedRun {
        lambda,
        experiment,
        certificate,
        alice_bits: BitStream::new(alice, SourceTag::Chsh)?,
        emitted_shots,
        detection,
        notes: notes(spec),
    })
}

/// Recomputes round `index` of a fresh-state run in isolation.
pub fn replay_round(spec: &ExperimentSpec, index: usize) -> Result<RoundResult> {
    let lambda = spec.validate()?;
    if !spec.loopholes.fresh_state_per_round {
        return Err(LabError::Config("single rounds can only be replayed with fresh_state_per_round".into()));
    }
    if index >= spec.rounds {
        return Err(LabError::Config(format!("round {index} out of range (rounds = {})", spec.rounds)));
    }
    let settings = draw_settings(spec)?;
    Ok(play_fresh_round(index, settings[index], spec, lambda)?.round)
}

/// Machine-readable record of a run, written as `run.json`.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub format_version: u64,
    pub rng: &'static str,
    pub spec: &'a ExperimentSpec,
    pub lambda: f64,
    pub certificate: &'a Certificate,
    pub alice_bits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<&'a DetectionSummary>,
    pub notes: &'a [String],
}

impl CertifiedRun {
    pub fn record<'a>(&'a self, spec: &'a ExperimentSpec) -> RunRecord<'a> {
        RunRecord {
            format_version: FORMAT_VERSION,
            rng: RNG_ALGORITHM,
            spec,
            lambda: self.lambda,
            certificate: &self.certificate,
            alice_bits: self.alice_bits.len(),
            detection: self.detection.as_ref(),
            notes: &self.notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chshrng_core::game::run_experiment;

    #[test]
    fn defaults_match_core_experiment() {
        let spec = ExperimentSpec::new(12, 200, 0.1, 5);
        let run = run_certified_experiment(&spec).unwrap();
        let core = run_experiment(&spec.core_config(0.1)).unwrap();
        assert_eq!(run.experiment, core);
        assert_eq!(run.alice_bits.len(), 12 * 200);
    }

    #[test]
    fn config_contradictions() {
        let mut spec = ExperimentSpec::new(10, 10, 0.0, 1);
        spec.inputs = InputSources::Shared { seed: None };
        assert!(matches!(spec.validate(), Err(LabError::Config(_))));
        spec.loopholes.independent_inputs = false;
        assert!(spec.validate().is_ok());

        let mut spec = ExperimentSpec::new(10, 10, 0.0, 1);
        spec.profile = Some("ibmq_lima".into());
        assert!(spec.validate().is_err());
        spec.lambda = None;
        assert!((spec.validate().unwrap() - 0.082232).abs() < 1e-6);

        let mut spec = ExperimentSpec::new(10, 10, 0.0, 1);
        spec.inputs = InputSources::Seeded { seed_a: Some(3), seed_b: Some(3) };
        assert!(spec.validate().is_err());
        spec.loopholes.detection_efficiency = 0.0;
        spec.inputs = InputSources::default();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"rounds": 3, "shots": 10, "master_seed": 9}"#).unwrap();
        assert_eq!(spec.loopholes, LoopholeConfig::default());
        assert_eq!(spec.inputs, InputSources::default());
        assert_eq!(spec.validate().unwrap(), 0.0);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"rounds": 3, "shots": 10, "master_seed": 9, "bogus": 1}"#)
            .is_err());
    }
}
