use std::fs;
use std::path::{Path, PathBuf};

use chshrng::formats::write_counts_record;
use chshrng::harness::{draw_settings, replay_round, run_certified_experiment, ExperimentSpec, InputSources};
use chshrng::reports::{emit_reports, histogram, ReportContext, HIST_FILE, RUNNING_AVG_FILE, SUMMARY_FILE};
use chshrng::LabError;
use chshrng_core::game::quantum_value;
use chshrng_core::rng::CounterRng;
use chshrng_core::simulator::CountsRecord;
use proptest::prelude::*;

fn memory_record(bits: &[u8]) -> CountsRecord {
    let memory: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
    let mut rec = CountsRecord { shots: bits.len() as u64, counts: Default::default(), memory: None, metadata: Default::default() };
    for m in &memory {
        *rec.counts.entry(m.clone()).or_default() += 1;
    }
    rec.memory = Some(memory);
    rec
}

fn write_record(dir: &Path, name: &str, bits: &[u8]) -> PathBuf {
    let path = dir.join(name);
    write_counts_record(&path, &memory_record(bits)).unwrap();
    path
}

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = CounterRng::new(seed);
    (0..n).map(|_| rng.next_bit()).collect()
}

fn replay_spec(rounds: usize, files: Vec<PathBuf>) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(rounds, 200, 0.0, 3);
    spec.inputs = InputSources::Replay { files };
    spec
}

#[test]
fn replay_rejects_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    fs::write(&a, r#"{"shots": 1000, "counts": {"0": 500, "1": 499}, "memory": null}"#).unwrap();
    let b = write_record(dir.path(), "b.json", &random_bits(50, 1));
    let err = run_certified_experiment(&replay_spec(10, vec![a, b])).unwrap_err();
    assert!(matches!(err, LabError::Integrity { .. }), "{err}");
    assert_eq!(err.exit_code(), 65);
}

#[test]
fn replay_rejects_schema_violations() {
    let dir = tempfile::tempdir().unwrap();
    let b = write_record(dir.path(), "b.json", &random_bits(50, 1));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"shots": "many", "counts": {}}"#).unwrap();
    let err = run_certified_experiment(&replay_spec(10, vec![bad, b.clone()])).unwrap_err();
    assert!(matches!(err, LabError::Format { .. }), "{err}");

    let no_memory = dir.path().join("nomem.json");
    fs::write(&no_memory, r#"{"shots": 2, "counts": {"0": 1, "1": 1}}"#).unwrap();
    let err = run_certified_experiment(&replay_spec(1, vec![no_memory, b])).unwrap_err();
    assert!(matches!(err, LabError::Format { .. }), "{err}");
}

#[test]
fn replay_exhaustion_is_explicit() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_record(dir.path(), "a.json", &random_bits(5, 1));
    let b = write_record(dir.path(), "b.json", &random_bits(50, 2));
    match run_certified_experiment(&replay_spec(10, vec![a, b])).unwrap_err() {
        LabError::Depleted { path, consumed } => {
            assert!(path.ends_with("a.json"));
            assert_eq!(consumed, 5);
        }
        other => panic!("expected depletion, got {other}"),
    }
}

#[test]
fn two_replay_files_feed_x_and_y() {
    let dir = tempfile::tempdir().unwrap();
    let (xa, xb) = (random_bits(40, 10), random_bits(40, 11));
    let a = write_record(dir.path(), "a.json", &xa);
    let b = write_record(dir.path(), "b.json", &xb);
    let spec = replay_spec(40, vec![a.clone(), b]);
    let settings = draw_settings(&spec).unwrap();
    for (i, s) in settings.iter().enumerate() {
        assert_eq!((s.x(), s.y()), (xa[i], xb[i]));
    }
    let run = run_certified_experiment(&spec).unwrap();
    assert_eq!(run.experiment.rounds.len(), 40);

    let single = replay_spec(10, vec![a.clone()]);
    assert!(matches!(single.validate(), Err(LabError::Config(_))));
    let twice = replay_spec(10, vec![a.clone(), a]);
    assert!(matches!(twice.validate(), Err(LabError::Config(_))));
}

#[test]
fn replay_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_record(dir.path(), "a.json", &random_bits(30, 4));
    let b = write_record(dir.path(), "b.json", &random_bits(30, 5));
    let spec = replay_spec(30, vec![a, b]);
    let first = run_certified_experiment(&spec).unwrap();
    let second = run_certified_experiment(&spec).unwrap();
    assert_eq!(first, second);
}

#[test]
fn ideal_run_certifies_with_full_alice_stream() {
    let run = run_certified_experiment(&ExperimentSpec::new(100, 1000, 0.0, 17)).unwrap();
    assert_eq!(run.certificate.verdict.to_string(), "CERTIFIED");
    assert_eq!(run.alice_bits.len(), 100_000);
    let d = run.detection.unwrap();
    assert_eq!(d.coincidences, 100_000);
    assert_eq!(d.all_event_win_fraction, d.post_selected_p_win);
}

#[test]
fn detection_thinning_matches_efficiency_squared() {
    let eta = 0.7;
    let mut spec = ExperimentSpec::new(100, 1000, 0.0, 99);
    spec.loopholes.detection_efficiency = eta;
    let run = run_certified_experiment(&spec).unwrap();
    let d = run.detection.unwrap();
    let n = 100_000f64;
    let q = eta * eta * quantum_value();
    let wins = run.experiment.total_wins() as f64;
    let sigma = (n * q * (1.0 - q)).sqrt();
    assert!((wins - n * q).abs() <= 3.0 * sigma, "wins {wins} expected {} ± {}", n * q, 3.0 * sigma);
    let c = d.coincidences as f64;
    let sc = (n * eta * eta * (1.0 - eta * eta)).sqrt();
    assert!((c - n * eta * eta).abs() <= 3.0 * sc);
    assert_eq!(run.alice_bits.len() as u64, d.coincidences);
}

#[test]
fn half_efficiency_post_selection_hides_losses() {
    let mut spec = ExperimentSpec::new(100, 1000, 0.0, 5);
    spec.loopholes.detection_efficiency = 0.5;
    let run = run_certified_experiment(&spec).unwrap();
    let d = run.detection.as_ref().unwrap();
    assert!((d.post_selected_p_win - quantum_value()).abs() < 0.01, "{}", d.post_selected_p_win);
    assert!(d.all_event_win_fraction < d.post_selected_p_win);
    assert!((d.all_event_win_fraction - 0.25 * quantum_value()).abs() < 0.01);
    assert_eq!(d.all_event_certificate.verdict.to_string(), "NOT_VIOLATED");
    assert!(run.notes.iter().any(|n| n.starts_with("fair sampling") && n.contains("post-selected")));

    spec.loopholes.report_all_events = false;
    let quiet = run_certified_experiment(&spec).unwrap();
    assert!(quiet.detection.is_none());
    assert_eq!(quiet.experiment, run.experiment);
}

#[test]
fn fresh_state_rounds_replay_in_isolation() {
    let mut spec = ExperimentSpec::new(25, 300, 0.2, 1234);
    spec.loopholes.detection_efficiency = 0.8;
    let run = run_certified_experiment(&spec).unwrap();
    for i in [0, 7, 24] {
        assert_eq!(replay_round(&spec, i).unwrap(), run.experiment.rounds[i]);
    }
    assert!(replay_round(&spec, 25).is_err());
}

#[test]
fn carried_state_run_is_deterministic_but_not_replayable() {
    let mut spec = ExperimentSpec::new(20, 200, 0.0, 8);
    spec.loopholes.fresh_state_per_round = false;
    let a = run_certified_experiment(&spec).unwrap();
    assert_eq!(a, run_certified_experiment(&spec).unwrap());
    assert!(matches!(replay_round(&spec, 3), Err(LabError::Config(_))));
    assert!(a.notes.iter().any(|n| n.starts_with("memory: open")));
}

#[test]
fn shared_source_needs_flag() {
    let mut spec = ExperimentSpec::new(10, 100, 0.0, 1);
    spec.inputs = InputSources::Shared { seed: Some(4) };
    assert!(matches!(run_certified_experiment(&spec), Err(LabError::Config(_))));
    spec.loopholes.independent_inputs = false;
    let run = run_certified_experiment(&spec).unwrap();
    assert!(run.notes.iter().any(|n| n.starts_with("freedom of choice: open")));
}

#[test]
fn reports_for_single_round() {
    let run = run_certified_experiment(&ExperimentSpec::new(1, 1000, 0.0, 2)).unwrap();
    let occupied = histogram(&run.experiment).iter().filter(|&&c| c > 0).count();
    assert_eq!(occupied, 1);
    let dir = tempfile::tempdir().unwrap();
    let files = emit_reports(&run.experiment, dir.path(), &ReportContext::default()).unwrap();
    assert_eq!(files.len(), 4);
    let hist = fs::read_to_string(dir.path().join(HIST_FILE)).unwrap();
    assert_eq!(hist.lines().filter(|l| l.ends_with(",1")).count(), 1);
}

#[test]
fn ideal_running_average_settles() {
    let run = run_certified_experiment(&ExperimentSpec::new(100, 1000, 0.0, 31)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&run.experiment, dir.path(), &ReportContext::default()).unwrap();
    let text = fs::read_to_string(dir.path().join(RUNNING_AVG_FILE)).unwrap();
    let last: f64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - 0.8536).abs() < 0.005, "{last}");
}

#[test]
fn lima_summary_row() {
    let mut spec = ExperimentSpec::new(100, 1000, 0.0, 7);
    spec.lambda = None;
    spec.profile = Some("ibmq_lima".into());
    let run = run_certified_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ctx = ReportContext { device: spec.profile.clone(), lambda: Some(run.lambda) };
    emit_reports(&run.experiment, dir.path(), &ctx).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["device"], "ibmq_lima");
    assert_eq!(summary["format_version"], 1);
    let avg = summary["p_avg"].as_f64().unwrap();
    assert!((avg - 0.82448).abs() < 0.01, "{avg}");
}

#[test]
fn unwritable_report_dir_is_io_error() {
    let run = run_certified_experiment(&ExperimentSpec::new(2, 100, 0.0, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let err = emit_reports(&run.experiment, &blocker.join("sub"), &ReportContext::default()).unwrap_err();
    assert!(matches!(err, LabError::Io { .. }), "{err}");
    assert_eq!(err.exit_code(), 74);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bookkeeping_holds(rounds in 1usize..12, shots in 20u64..300, seed in any::<u64>(), eta in 0.5f64..=1.0, lambda in 0.0f64..=1.0) {
        let mut spec = ExperimentSpec::new(rounds, shots, lambda, seed);
        spec.loopholes.detection_efficiency = eta;
        let run = run_certified_experiment(&spec).unwrap();
        prop_assert_eq!(run.alice_bits.len() as u64, run.experiment.total_shots());
        prop_assert!(run.experiment.total_shots() <= rounds as u64 * shots);
        for (i, r) in run.experiment.rounds.iter().enumerate() {
            prop_assert_eq!(r.same_count + r.diff_count, r.shots);
            prop_assert_eq!(&replay_round(&spec, i).unwrap(), r);
        }
    }
}
