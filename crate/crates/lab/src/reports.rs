//! Report data files: running average, win-fraction histogram, kernel
//! density and a one-row summary.

use std::fs;
use std::path::{Path, PathBuf};

use chshrng_core::game::ExperimentResult;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::formats::{canonical_json, fmt_report_float, write_atomic, FORMAT_VERSION};

pub const HIST_BINS: usize = 100;
pub const DENSITY_STEP: f64 = 0.005;
/// Bandwidth used when every round has the same win fraction.
pub const FALLBACK_BANDWIDTH: f64 = 0.01;

pub const RUNNING_AVG_FILE: &str = "running_avg.csv";
pub const HIST_FILE: &str = "hist.csv";
pub const DENSITY_FILE: &str = "density.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Labels carried into the summary row.
#[derive(Debug, Clone, Default)]
pub struct ReportContext {
    pub device: Option<String>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub format_version: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub rounds: usize,
    pub shots: u64,
    pub p_min: f64,
    pub p_avg: f64,
    pub p_max: f64,
    pub sigma: f64,
    pub pooled_p_win: f64,
}

pub fn summary(experiment: &ExperimentResult, ctx: &ReportContext) -> Summary {
    Summary {
        format_version: FORMAT_VERSION,
        device: ctx.device.clone(),
        lambda: ctx.lambda,
        rounds: experiment.rounds.len(),
        shots: experiment.total_shots(),
        p_min: experiment.p_min,
        p_avg: experiment.p_avg,
        p_max: experiment.p_max,
        sigma: experiment.sigma,
        pooled_p_win: experiment.pooled_win_fraction(),
    }
}

fn header() -> String {
    format!("# format_version: {FORMAT_VERSION}\n")
}

pub fn running_average_csv(experiment: &ExperimentResult) -> String {
    let mut out = header() + "round,win_fraction,running_avg\n";
    let mut total = 0.0;
    for (i, r) in experiment.rounds.iter().enumerate() {
        total += r.win_fraction;
        let avg = total / (i + 1) as f64;
        out += &format!("{},{},{}\n", i + 1, fmt_report_float(r.win_fraction), fmt_report_float(avg));
    }
    out
}

/// Bin index of a round from its exact win/shot counts, so a fraction that
/// sits on a bin edge is never split by float rounding.
fn bin_of(wins: u64, shots: u64) -> usize {
    if shots == 0 {
        return 0;
    }
    ((wins as u128 * HIST_BINS as u128 / shots as u128) as usize).min(HIST_BINS - 1)
}

pub fn histogram(experiment: &ExperimentResult) -> [u64; HIST_BINS] {
    let mut bins = [0u64; HIST_BINS];
    for r in &experiment.rounds {
        bins[bin_of(r.win_count(), r.shots)] += 1;
    }
    bins
}

pub fn histogram_csv(experiment: &ExperimentResult) -> String {
    let mut out = header() + "bin_lo,bin_hi,count\n";
    for (i, count) in histogram(experiment).iter().enumerate() {
        out += &format!("{:.2},{:.2},{count}\n", i as f64 / 100.0, (i + 1) as f64 / 100.0);
    }
    out
}

/// Gaussian kernel density estimate with Silverman's rule-of-thumb bandwidth.
pub fn kernel_density(samples: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let h = if sd > 0.0 { 1.06 * sd * n.powf(-0.2) } else { FALLBACK_BANDWIDTH };
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&x| norm * samples.iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>())
        .collect()
}

pub fn density_grid() -> Vec<f64> {
    let steps = (1.0 / DENSITY_STEP).round() as usize;
    (0..=steps).map(|i| i as f64 * DENSITY_STEP).collect()
}

pub fn density_csv(experiment: &ExperimentResult) -> String {
    let samples: Vec<f64> = experiment.rounds.iter().map(|r| r.win_fraction).collect();
    let grid = density_grid();
    let mut out = header() + "x,density\n";
    for (x, d) in grid.iter().zip(kernel_density(&samples, &grid)) {
        out += &format!("{x:.3},{}\n", fmt_report_float(d));
    }
    out
}

/// Writes the four report files into `out_dir` and returns their paths.
pub fn emit_reports(experiment: &ExperimentResult, out_dir: &Path, ctx: &ReportContext) -> Result<Vec<PathBuf>> {
    if experiment.rounds.is_empty() {
        return Err(LabError::Config("cannot report on an empty experiment".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| LabError::io(out_dir, e))?;
    let files = [
        (RUNNING_AVG_FILE, running_average_csv(experiment)),
        (HIST_FILE, histogram_csv(experiment)),
        (DENSITY_FILE, density_csv(experiment)),
        (SUMMARY_FILE, canonical_json(&summary(experiment, ctx), true)?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = out_dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
