//! Device profiles: per-device average winning probabilities and the
//! depolarizing weight fitted to each.

use std::path::Path;

use chshrng_core::noise::fit_lambda;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LabError, Result};
use crate::formats::{read_to_string, FORMAT_VERSION};

const BUILTIN: &str = include_str!("../data/device_profiles.json");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceProfile {
    pub name: String,
    pub avg_win_target: f64,
    pub fitted_lambda: f64,
    pub metadata: Map<String, Value>,
}

#[derive(Deserialize)]
struct RawProfile {
    name: String,
    avg_win_target: f64,
    #[serde(default)]
    metadata: Map<String, Value>,
}

#[derive(Deserialize)]
struct ProfileFile {
    format_version: u64,
    profiles: Vec<RawProfile>,
}

fn parse(text: &str, origin: &Path) -> Result<Vec<DeviceProfile>> {
    let file: ProfileFile =
        serde_json::from_str(text).map_err(|e| LabError::format(origin, format!("bad profile file: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return Err(LabError::format(origin, format!("unsupported format_version {}", file.format_version)));
    }
    file.profiles
        .into_iter()
        .map(|p| {
            let fitted_lambda = fit_lambda(p.avg_win_target)
                .map_err(|e| LabError::format(origin, format!("profile {}: {e}", p.name)))?;
            Ok(DeviceProfile { name: p.name, avg_win_target: p.avg_win_target, fitted_lambda, metadata: p.metadata })
        })
        .collect()
}

/// The five bundled device rows.
pub fn builtin_profiles() -> Vec<DeviceProfile> {
    parse(BUILTIN, Path::new("<builtin>")).expect("bundled profiles are valid")
}

pub fn load_profiles(path: &Path) -> Result<Vec<DeviceProfile>> {
    parse(&read_to_string(path)?, path)
}

pub fn find_profile(name: &str) -> Result<DeviceProfile> {
    let all = builtin_profiles();
    all.iter().find(|p| p.name == name).cloned().ok_or_else(|| {
        let known: Vec<&str> = all.iter().map(|p| p.name.as_str()).collect();
        LabError::Config(format!("unknown profile {name:?} (known: {})", known.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rows() {
        let all = builtin_profiles();
        assert_eq!(all.len(), 5);
        let belem = find_profile("ibmq_belem").unwrap();
        assert!((belem.fitted_lambda - 0.162163).abs() < 1e-6);
        assert!(find_profile("ibmq_nowhere").is_err());
    }

    #[test]
    fn rejects_unfittable_target() {
        let text = r#"{"format_version": 1, "profiles": [{"name": "x", "avg_win_target": 0.9}]}"#;
        assert!(matches!(parse(text, Path::new("p.json")), Err(LabError::Format { .. })));
    }
}
