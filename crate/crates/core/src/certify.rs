//! Device-independent certification from CHSH game statistics.

use core::f64::consts::SQRT_2;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ExperimentResult;

/// Classical bound on the CHSH winning probability.
pub const CLASSICAL_BOUND: f64 = 0.75;

/// Default significance needed before a violation is reported as certified.
pub const DEFAULT_Z_THRESHOLD: f64 = 5.0;

/// Tsirelson bound, 2√2.
pub const TSIRELSON: f64 = 2.0 * SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    NotViolated,
    InsufficientData,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "CERTIFIED",
            Verdict::NotViolated => "NOT_VIOLATED",
            Verdict::InsufficientData => "INSUFFICIENT_DATA",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub p_win: f64,
    #[serde(rename = "n")]
    pub n_total_shots: u64,
    #[serde(rename = "s")]
    pub s_value: f64,
    #[serde(rename = "z", with = "signed_infinity")]
    pub z_score: f64,
    pub min_entropy_rate: f64,
    pub verdict: Verdict,
    pub threshold_z: f64,
}

/// JSON has no infinities: finite scores are numbers, the degenerate ±∞
/// sentinel is written as the string `"inf"` / `"-inf"`.
mod signed_infinity {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &f64, ser: S) -> Result<S::Ok, S::Error> {
        match *z {
            f64::INFINITY => ser.serialize_str("inf"),
            f64::NEG_INFINITY => ser.serialize_str("-inf"),
            z => ser.serialize_f64(z),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(alloc::string::String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Num(z) => Ok(z),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::invalid_value(de::Unexpected::Str(other), &"a number or +/-inf")),
            },
        }
    }
}

/// CHSH correlator from the game value: S = 8p − 4.
pub fn s_value(p_win: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_win) {
        return Err(Error::Domain { what: "winning probability", value: p_win });
    }
    Ok(8.0 * p_win - 4.0)
}

/// One-sided z-score of `p_win` against the classical bound under a binomial
/// model with `n_total_shots` trials. Degenerate p ∈ {0, 1} yields ±∞.
pub fn violation_significance(p_win: f64, n_total_shots: u64) -> Result<f64> {
    if n_total_shots == 0 {
        return Err(Error::Domain { what: "shot count", value: 0.0 });
    }
    if !(0.0..=1.0).contains(&p_win) {
        return Err(Error::Domain { what: "winning probability", value: p_win });
    }
    let excess = p_win - CLASSICAL_BOUND;
    let var = p_win * (1.0 - p_win);
    if var == 0.0 {
        return Ok(if excess > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY });
    }
    Ok(excess / libm::sqrt(var / n_total_shots as f64))
}

/// Certified min-entropy per output bit, `1 − log₂(1 + √(2 − S²/4))`,
/// floored at zero.
pub fn min_entropy_rate(s: f64) -> Result<f64> {
    if !(0.0..=TSIRELSON + 1e-12).contains(&s) {
        return Err(Error::Domain { what: "CHSH value", value: s });
    }
    let inner = (2.0 - s * s / 4.0).max(0.0);
    Ok((1.0 - libm::log2(1.0 + libm::sqrt(inner))).clamp(0.0, 1.0))
}

pub fn certify(experiment: &ExperimentResult) -> Certificate {
    certify_with_threshold(experiment, DEFAULT_Z_THRESHOLD)
}

/// Pools every shot of the experiment into a single certificate.
pub fn certify_with_threshold(experiment: &ExperimentResult, threshold_z: f64) -> Certificate {
    certify_counts(experiment.total_wins(), experiment.total_shots(), threshold_z)
}

/// Certificate from raw win/shot totals.
pub fn certify_counts(wins: u64, shots: u64, threshold_z: f64) -> Certificate {
    if shots == 0 {
        return Certificate {
            p_win: 0.0,
            n_total_shots: 0,
            s_value: 0.0,
            z_score: 0.0,
            min_entropy_rate: 0.0,
            verdict: Verdict::InsufficientData,
            threshold_z,
        };
    }
    let p_win = wins.min(shots) as f64 / shots as f64;
    let s = 8.0 * p_win - 4.0;
    let z = violation_significance(p_win, shots).unwrap_or(0.0);
    // Sampling noise can push the point estimate past Tsirelson.
    let rate = min_entropy_rate(s.clamp(0.0, TSIRELSON)).unwrap_or(0.0);
    let verdict = if z >= threshold_z && s > 2.0 { Verdict::Certified } else { Verdict::NotViolated };
    Certificate { p_win, n_total_shots: shots, s_value: s, z_score: z, min_entropy_rate: rate, verdict, threshold_z }
}
