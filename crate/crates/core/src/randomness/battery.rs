//! Frequency (monobit), block frequency and runs tests with the SP 800-22
//! statistics.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::special::{erfc, igamc};
use crate::error::{Error, Result};

/// Tests pass when `p_value >= SIGNIFICANCE`.
pub const SIGNIFICANCE: f64 = 0.01;
pub const DEFAULT_BLOCK_LEN: usize = 128;
const MIN_BITS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

impl TestReport {
    fn new(name: &str, statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self { test_name: name.to_string(), statistic, p_value, pass: p_value >= SIGNIFICANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Monobit,
    BlockFrequency,
    Runs,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::Monobit, TestKind::BlockFrequency, TestKind::Runs];

    pub fn name(&self) -> &'static str {
        match self {
            TestKind::Monobit => "monobit",
            TestKind::BlockFrequency => "block_frequency",
            TestKind::Runs => "runs",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s.trim().replace('-', "_").as_str() {
            "monobit" | "frequency" => Ok(TestKind::Monobit),
            "block_frequency" => Ok(TestKind::BlockFrequency),
            "runs" => Ok(TestKind::Runs),
            other => Err(alloc::format!("unknown test '{other}' (expected monobit, block-frequency or runs)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Battery {
    pub block_len: usize,
    /// When false, the minimum-length gates are skipped (for short
    /// reference vectors).
    pub enforce_length: bool,
}

impl Default for Battery {
    fn default() -> Self {
        Self { block_len: DEFAULT_BLOCK_LEN, enforce_length: true }
    }
}

impl Battery {
    fn gate(&self, test: &'static str, required: usize, bits: &[u8]) -> Result<()> {
        let required = if self.enforce_length { required } else { 1 };
        if bits.len() < required {
            return Err(Error::Length { test, required, actual: bits.len() });
        }
        Ok(())
    }

    pub fn run(&self, kind: TestKind, bits: &[u8]) -> Result<TestReport> {
        match kind {
            TestKind::Monobit => self.monobit(bits),
            TestKind::BlockFrequency => self.block_frequency(bits),
            TestKind::Runs => self.runs(bits),
        }
    }

    pub fn run_all(&self, kinds: &[TestKind], bits: &[u8]) -> Result<Vec<TestReport>> {
        kinds.iter().map(|&k| self.run(k, bits)).collect()
    }

    /// Statistic is |S_n|/√n with S_n the ±1 partial sum.
    pub fn monobit(&self, bits: &[u8]) -> Result<TestReport> {
        self.gate("monobit", MIN_BITS, bits)?;
        let n = bits.len() as f64;
        let sum: i64 = bits.iter().map(|&b| if b == 1 { 1i64 } else { -1 }).sum();
        let s_obs = (sum.unsigned_abs() as f64) / libm::sqrt(n);
        Ok(TestReport::new("monobit", s_obs, erfc(s_obs / core::f64::consts::SQRT_2)))
    }

    /// Statistic is χ² = 4M Σ(π_i − ½)² over ⌊n/M⌋ blocks.
    pub fn block_frequency(&self, bits: &[u8]) -> Result<TestReport> {
        let m = self.block_len;
        if m == 0 {
            return Err(Error::Domain { what: "block length", value: 0.0 });
        }
        self.gate("block_frequency", m.saturating_mul(10), bits)?;
        let blocks = bits.len() / m;
        if blocks == 0 {
            return Err(Error::Length { test: "block_frequency", required: m, actual: bits.len() });
        }
        let chi2 = 4.0
            * m as f64
            * bits
                .chunks_exact(m)
                .map(|block| {
                    let pi = block.iter().filter(|&&b| b == 1).count() as f64 / m as f64 - 0.5;
                    pi * pi
                })
                .sum::<f64>();
        Ok(TestReport::new("block_frequency", chi2, igamc(blocks as f64 / 2.0, chi2 / 2.0)))
    }

    /// Statistic is the total number of runs V_n. Fails outright (p = 0) when
    /// the frequency pre-test |π − ½| ≥ 2/√n is not met.
    pub fn runs(&self, bits: &[u8]) -> Result<TestReport> {
        self.gate("runs", MIN_BITS, bits)?;
        let n = bits.len() as f64;
        let pi = bits.iter().filter(|&&b| b == 1).count() as f64 / n;
        let v_obs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
        if libm::fabs(pi - 0.5) >= 2.0 / libm::sqrt(n) {
            return Ok(TestReport::new("runs", v_obs as f64, 0.0));
        }
        let spread = 2.0 * n * pi * (1.0 - pi);
        let p = erfc(libm::fabs(v_obs as f64 - spread) / (2.0 * libm::sqrt(2.0 * n) * pi * (1.0 - pi)));
        Ok(TestReport::new("runs", v_obs as f64, p))
    }
}

pub fn monobit_test(bits: &[u8]) -> Result<TestReport> {
    Battery::default().monobit(bits)
}

pub fn block_frequency_test(bits: &[u8], block_len: usize) -> Result<TestReport> {
    Battery { block_len, ..Battery::default() }.block_frequency(bits)
}

pub fn runs_test(bits: &[u8]) -> Result<TestReport> {
    Battery::default().runs(bits)
}
