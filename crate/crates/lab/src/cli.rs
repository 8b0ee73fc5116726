//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chshrng_core::certify::{certify_with_threshold, Certificate, Verdict, DEFAULT_Z_THRESHOLD};
use chshrng_core::noise::fit_lambda;
use chshrng_core::randomness::{
    hadamard_qrng, parity_qrng, toeplitz_extract, von_neumann, Battery, BitStream, ExtractionBudget,
    TestKind, DEFAULT_BLOCK_LEN, DEFAULT_SECURITY_MARGIN,
};
use chshrng_core::rng::CounterRng;
use chshrng_core::simulator::CountsRecord;
use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::error::{exit, LabError, Result};
use crate::formats::{
    canonical_json, read_bits, read_rounds_csv, read_to_string, round_sig, rounds_csv, write_atomic, write_bits,
    write_counts_record,
};
use crate::harness::{run_certified_experiment, ExperimentSpec, InputSources, LoopholeConfig};
use crate::profiles::{builtin_profiles, find_profile};
use crate::reports::{emit_reports, ReportContext};

pub const OUT_DIR_ENV: &str = "CHSHRNG_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "chshrng", version, about = "Simulated CHSH games, certified randomness and statistical tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play a certified CHSH experiment and write its records.
    Play(PlayArgs),
    /// Certify a recorded round table.
    Certify(CertifyArgs),
    /// Generate bits from the Hadamard or parity-state circuit.
    Qrng(QrngArgs),
    /// Post-process a bit stream with von Neumann or Toeplitz extraction.
    Extract(ExtractArgs),
    /// Run the statistical test battery on a bit stream.
    Test(TestArgs),
    /// Fit the depolarizing weight to a target average winning probability.
    FitNoise(FitNoiseArgs),
    /// Write report data files for a recorded round table.
    Report(ReportArgs),
}

const EXPERIMENT_FLAGS: [&str; 12] = [
    "rounds",
    "shots",
    "lambda",
    "profile",
    "seed",
    "detection_efficiency",
    "post_selected_only",
    "reuse_state",
    "shared_input_source",
    "input_a",
    "input_b",
    "threshold_z",
];

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// Number of rounds.
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    /// Shots per round.
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    /// Depolarizing weight in [0, 1].
    #[arg(long, conflicts_with = "profile")]
    pub lambda: Option<f64>,
    /// Device profile whose fitted noise to use.
    #[arg(long)]
    pub profile: Option<String>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Experiment JSON; replaces every experiment flag.
    #[arg(long, conflicts_with_all = EXPERIMENT_FLAGS)]
    pub config: Option<PathBuf>,
    /// Per-party detection probability in (0, 1].
    #[arg(long)]
    pub detection_efficiency: Option<f64>,
    /// Report only post-selected statistics.
    #[arg(long)]
    pub post_selected_only: bool,
    /// Carry one generator stream across rounds instead of a fresh state each round.
    #[arg(long)]
    pub reuse_state: bool,
    /// Let x and y share one input source.
    #[arg(long)]
    pub shared_input_source: bool,
    /// Counts record (with memory) supplying x, or both inputs when shared.
    #[arg(long)]
    pub input_a: Option<PathBuf>,
    /// Counts record (with memory) supplying y.
    #[arg(long, requires = "input_a")]
    pub input_b: Option<PathBuf>,
    /// Significance needed for a CERTIFIED verdict.
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    pub threshold_z: f64,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Round table written by `play`.
    #[arg(long)]
    pub rounds_csv: PathBuf,
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    pub threshold_z: f64,
    /// Also write the certificate to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QrngMode {
    Hadamard,
    Parity,
}

#[derive(Debug, Args)]
pub struct QrngArgs {
    #[arg(long, value_enum)]
    pub mode: QrngMode,
    #[arg(long, default_value_t = 1)]
    pub qubits: usize,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Packed output, shot by shot; FILE.txt gets one line per shot.
    #[arg(long, default_value = "qrng.bin")]
    pub out: PathBuf,
    /// Also write a counts record with per-shot memory (usable as a replay input).
    #[arg(long)]
    pub counts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExtractMethod {
    VonNeumann,
    Toeplitz,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("rate").args(["min_entropy_rate", "certificate"])))]
#[command(group(ArgGroup::new("seed_source").args(["seed", "seed_file"])))]
pub struct ExtractArgs {
    #[arg(long, value_enum)]
    pub method: ExtractMethod,
    /// Input stream (`.txt` for ASCII, otherwise packed).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Use only the first N input bits.
    #[arg(long)]
    pub in_bits: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Generate the Toeplitz seed from this integer.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Read the Toeplitz seed bits from a file; its leading bits are used.
    #[arg(long)]
    pub seed_file: Option<PathBuf>,
    /// Output length; defaults to the full extraction budget.
    #[arg(long)]
    pub out_len: Option<usize>,
    /// Min-entropy per input bit.
    #[arg(long)]
    pub min_entropy_rate: Option<f64>,
    /// Certificate JSON supplying the min-entropy rate.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// Bits of slack held back from the budget.
    #[arg(long, default_value_t = DEFAULT_SECURITY_MARGIN)]
    pub margin: usize,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Input stream (`.txt` for ASCII, otherwise packed).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated subset of monobit, block-frequency, runs.
    #[arg(long, value_delimiter = ',', default_values_t = TestKind::ALL)]
    pub tests: Vec<TestKind>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_LEN)]
    pub block_len: usize,
    /// Use only the first N input bits.
    #[arg(long)]
    pub in_bits: Option<usize>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("what").required(true).args(["target", "profile", "all"])))]
pub struct FitNoiseArgs {
    /// Average winning probability to match.
    #[arg(long)]
    pub target: Option<f64>,
    /// Built-in device profile.
    #[arg(long)]
    pub profile: Option<String>,
    /// Every built-in profile.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub rounds_csv: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Device label for the summary row.
    #[arg(long, conflicts_with = "lambda")]
    pub profile: Option<String>,
    /// Noise label for the summary row.
    #[arg(long)]
    pub lambda: Option<f64>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::USAGE,
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Play(a) => play(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Qrng(a) => qrng(a),
        Command::Extract(a) => extract(a),
        Command::Test(a) => test(a),
        Command::FitNoise(a) => fit_noise(a),
        Command::Report(a) => report(a),
    }
}

fn verdict_code(verdict: Verdict) -> i32 {
    if verdict == Verdict::Certified {
        exit::OK
    } else {
        exit::NOT_VIOLATED
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

fn play_spec(a: &PlayArgs) -> Result<ExperimentSpec> {
    if let Some(path) = &a.config {
        return ExperimentSpec::from_file(path);
    }
    let inputs = match (&a.input_a, &a.input_b) {
        (Some(x), Some(y)) => InputSources::Replay { files: vec![x.clone(), y.clone()] },
        (Some(x), None) => InputSources::Replay { files: vec![x.clone()] },
        _ if a.shared_input_source => InputSources::Shared { seed: None },
        _ => InputSources::default(),
    };
    let loopholes = LoopholeConfig {
        independent_inputs: !a.shared_input_source,
        fresh_state_per_round: !a.reuse_state,
        detection_efficiency: a.detection_efficiency.unwrap_or(1.0),
        report_all_events: !a.post_selected_only,
    };
    let mut spec = ExperimentSpec::new(a.rounds, a.shots, 0.0, a.seed);
    spec.lambda = a.lambda;
    spec.profile = a.profile.clone();
    spec.inputs = inputs;
    spec.loopholes = loopholes;
    spec.threshold_z = a.threshold_z;
    Ok(spec)
}

fn play(a: PlayArgs) -> Result<i32> {
    let spec = play_spec(&a)?;
    let run = run_certified_experiment(&spec)?;
    create_dir(&a.out)?;
    let certificate = canonical_json(&run.certificate, true)?;
    write_atomic(&a.out.join("rounds.csv"), rounds_csv(&run.experiment).as_bytes())?;
    write_atomic(&a.out.join("certificate.json"), certificate.as_bytes())?;
    write_atomic(&a.out.join("run.json"), canonical_json(&run.record(&spec), false)?.as_bytes())?;
    write_bits(&a.out.join("alice_bits.bin"), &run.alice_bits)?;
    let ctx = ReportContext { device: spec.profile.clone(), lambda: Some(run.lambda) };
    emit_reports(&run.experiment, &a.out, &ctx)?;
    print!("{certificate}");
    Ok(verdict_code(run.certificate.verdict))
}

fn certify_cmd(a: CertifyArgs) -> Result<i32> {
    let experiment = read_rounds_csv(&a.rounds_csv)?;
    let cert = certify_with_threshold(&experiment, a.threshold_z);
    let text = canonical_json(&cert, true)?;
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(verdict_code(cert.verdict))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn qrng(a: QrngArgs) -> Result<i32> {
    if a.shots == 0 {
        return Err(LabError::Config("shots must be at least 1".into()));
    }
    let streams = match a.mode {
        QrngMode::Hadamard => hadamard_qrng(a.qubits, a.shots, a.seed)?,
        QrngMode::Parity => parity_qrng(a.qubits, a.shots, a.seed)?,
    };
    let tag = streams[0].source;
    let shots = a.shots as usize;
    let mut flat = Vec::with_capacity(shots * streams.len());
    let mut text = String::with_capacity(shots * (streams.len() + 1));
    let mut memory = Vec::with_capacity(shots);
    for shot in 0..shots {
        let line: String = streams.iter().map(|s| char::from(b'0' + s.bits()[shot])).collect();
        flat.extend(streams.iter().map(|s| s.bits()[shot]));
        text.push_str(&line);
        text.push('\n');
        memory.push(line);
    }
    let packed = BitStream::new(flat, tag)?;
    write_atomic(&a.out, &packed.to_packed())?;
    write_atomic(&with_suffix(&a.out, ".txt"), text.as_bytes())?;
    if let Some(path) = &a.counts {
        let mut record = CountsRecord { shots: a.shots, counts: Default::default(), memory: None, metadata: Default::default() };
        for m in &memory {
            *record.counts.entry(m.clone()).or_default() += 1;
        }
        record.memory = Some(memory);
        record.metadata.insert("source".into(), tag.to_string().into());
        record.metadata.insert("seed".into(), a.seed.into());
        record.metadata.insert("rng".into(), chshrng_core::rng::RNG_ALGORITHM.into());
        write_counts_record(path, &record)?;
    }
    println!("{} bits ({} qubits x {} shots) written to {}", packed.len(), streams.len(), a.shots, a.out.display());
    Ok(exit::OK)
}

fn extract(a: ExtractArgs) -> Result<i32> {
    let input = read_bits(&a.input, a.in_bits)?;
    let output = match a.method {
        ExtractMethod::VonNeumann => von_neumann(&input),
        ExtractMethod::Toeplitz => {
            let rate = match (&a.min_entropy_rate, &a.certificate) {
                (Some(r), _) => *r,
                (None, Some(path)) => {
                    let cert: Certificate = serde_json::from_str(&read_to_string(path)?)
                        .map_err(|e| LabError::format(path, format!("not a certificate: {e}")))?;
                    if cert.verdict != Verdict::Certified {
                        eprintln!("certificate verdict is {}; no certified entropy to extract", cert.verdict);
                        return Ok(exit::NOT_VIOLATED);
                    }
                    cert.min_entropy_rate
                }
                (None, None) => {
                    return Err(LabError::Config("toeplitz needs --min-entropy-rate or --certificate".into()))
                }
            };
            if !(0.0..=1.0).contains(&rate) {
                return Err(LabError::Config(format!("min-entropy rate must lie in [0, 1], got {rate}")));
            }
            let budget = ExtractionBudget { min_entropy_rate: rate, security_margin: a.margin };
            let out_len = a.out_len.unwrap_or_else(|| budget.max_output(input.len()));
            let seed_len = input.len() + out_len.max(1) - 1;
            let seed = match (&a.seed, &a.seed_file) {
                (Some(s), _) => {
                    let mut rng = CounterRng::new(*s);
                    BitStream::external((0..seed_len).map(|_| rng.next_bit()).collect())?
                }
                (None, Some(path)) => {
                    let bits = read_bits(path, None)?;
                    if bits.len() < seed_len {
                        return Err(LabError::format(
                            path,
                            format!("seed file holds {} bits, {seed_len} needed", bits.len()),
                        ));
                    }
                    BitStream::external(bits.bits()[..seed_len].to_vec())?
                }
                (None, None) => return Err(LabError::Config("toeplitz needs --seed or --seed-file".into())),
            };
            toeplitz_extract(&input, &seed, out_len, &budget)?
        }
    };
    write_bits(&a.out, &output)?;
    println!("{} bits in, {} bits out, written to {}", input.len(), output.len(), a.out.display());
    Ok(exit::OK)
}

fn test(a: TestArgs) -> Result<i32> {
    let stream = read_bits(&a.input, a.in_bits)?;
    let battery = Battery { block_len: a.block_len, ..Battery::default() };
    let reports = battery.run_all(&a.tests, stream.bits())?;
    let text = canonical_json(&reports, false)?;
    if let Some(path) = &a.report {
        write_atomic(path, text.as_bytes())?;
    }
    print!("{text}");
    Ok(if reports.iter().all(|r| r.pass) { exit::OK } else { exit::TEST_FAILED })
}

fn fit_noise(a: FitNoiseArgs) -> Result<i32> {
    let rows: Vec<(String, f64)> = if let Some(t) = a.target {
        vec![(String::new(), t)]
    } else if let Some(name) = &a.profile {
        let p = find_profile(name)?;
        vec![(p.name, p.avg_win_target)]
    } else {
        builtin_profiles().into_iter().map(|p| (p.name, p.avg_win_target)).collect()
    };
    for (name, target) in rows {
        let lambda = round_sig(fit_lambda(target)?, 6);
        if name.is_empty() {
            println!("{lambda}");
        } else {
            println!("{name} {target} {lambda}");
        }
    }
    Ok(exit::OK)
}

fn report(a: ReportArgs) -> Result<i32> {
    let ctx = match &a.profile {
        Some(name) => {
            let p = find_profile(name)?;
            ReportContext { device: Some(p.name), lambda: Some(p.fitted_lambda) }
        }
        None => ReportContext { device: None, lambda: a.lambda },
    };
    let experiment = read_rounds_csv(&a.rounds_csv)?;
    for path in emit_reports(&experiment, &a.out, &ctx)? {
        println!("{}", path.display());
    }
    Ok(exit::OK)
}
