//! On-disk formats: counts records, bit streams, round tables and canonical
//! JSON.
//!
//! Bit streams are stored either as ASCII text (`*.txt`, one character per
//! bit, newlines ignored on read) or as raw packed bytes, eight bits per byte,
//! most significant bit first. The final byte of a packed file is padded with
//! zero bits; readers that care about the exact length pass it explicitly.

use std::fs;
use std::io::Write;
use std::path::Path;

use chshrng_core::game::{ExperimentResult, GameSetting, RoundResult};
use chshrng_core::randomness::{BitStream, SourceTag};
use chshrng_core::simulator::{parse_bitstring, CountsRecord};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{LabError, Result};

/// Version stamped into every file this crate writes.
pub const FORMAT_VERSION: u64 = 1;

/// Significant digits kept for floats in report-style JSON.
pub const REPORT_SIG_DIGITS: usize = 6;

pub const ROUNDS_CSV_HEADER: &str = "round_index,x,y,same_count,diff_count,win_fraction";

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| LabError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| LabError::io(path, e))?;
    tmp.persist(path).map_err(|e| LabError::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Shortest decimal form of `x` after rounding to six significant digits.
pub fn fmt_report_float(x: f64) -> String {
    let r = round_sig(x, REPORT_SIG_DIGITS);
    if r == r.trunc() && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}

fn canonicalize(value: Value, round: bool) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v, round));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(|v| canonicalize(v, round)).collect()),
        Value::Number(n) if round && n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            serde_json::Number::from_f64(round_sig(x, REPORT_SIG_DIGITS)).map_or(Value::Null, Value::Number)
        }
        other => other,
    }
}

/// Pretty JSON with sorted keys and a trailing newline. With `round_floats`,
/// every float is cut to six significant digits.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T, round_floats: bool) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| LabError::Config(format!("serialization failed: {e}")))?;
    let mut text = serde_json::to_string_pretty(&canonicalize(v, round_floats))
        .map_err(|e| LabError::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Parses and validates a counts record file.
pub fn read_counts_record(path: &Path) -> Result<CountsRecord> {
    let text = read_to_string(path)?;
    let record: CountsRecord =
        serde_json::from_str(&text).map_err(|e| LabError::format(path, format!("not a counts record: {e}")))?;
    validate_counts_record(&record, path)?;
    Ok(record)
}

/// Checks bitstring keys, the counts/shots sum and, when present, that the
/// per-shot memory tallies to the same counts.
pub fn validate_counts_record(record: &CountsRecord, path: &Path) -> Result<usize> {
    let width = record
        .counts
        .keys()
        .next()
        .or_else(|| record.memory.as_ref().and_then(|m| m.first()))
        .map_or(0, |k| k.len());
    if width == 0 && record.shots > 0 {
        return Err(LabError::format(path, "record has shots but no outcomes"));
    }
    for key in record.counts.keys() {
        if parse_bitstring(key, width).is_none() {
            return Err(LabError::format(path, format!("outcome key {key:?} is not a {width}-bit string")));
        }
    }
    let total: u64 = record.counts.values().sum();
    if total != record.shots {
        return Err(LabError::integrity(path, format!("counts sum to {total} but shots = {}", record.shots)));
    }
    if let Some(memory) = &record.memory {
        if memory.len() as u64 != record.shots {
            return Err(LabError::integrity(
                path,
                format!("memory holds {} shots but shots = {}", memory.len(), record.shots),
            ));
        }
        let mut tally = std::collections::BTreeMap::<&str, u64>::new();
        for m in memory {
            if parse_bitstring(m, width).is_none() {
                return Err(LabError::format(path, format!("memory entry {m:?} is not a {width}-bit string")));
            }
            *tally.entry(m.as_str()).or_default() += 1;
        }
        let matches = tally.len() == record.counts.len()
            && tally.iter().all(|(k, v)| record.counts.get(*k) == Some(v));
        if !matches {
            return Err(LabError::integrity(path, "memory does not tally to counts"));
        }
    }
    Ok(width)
}

pub fn write_counts_record(path: &Path, record: &CountsRecord) -> Result<()> {
    let mut record = record.clone();
    record.metadata.insert("format_version".into(), FORMAT_VERSION.into());
    write_atomic(path, canonical_json(&record, false)?.as_bytes())
}

/// True when `path` names an ASCII bit file.
pub fn is_text_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt"))
}

/// Reads a bit stream, text or packed by extension. `len` truncates packed
/// input (dropping tail padding) and text input alike.
pub fn read_bits(path: &Path, len: Option<usize>) -> Result<BitStream> {
    let stream = if is_text_path(path) {
        let text = read_to_string(path)?;
        BitStream::from_ascii(&text, SourceTag::External).map_err(|e| LabError::format(path, e.to_string()))?
    } else {
        let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
        BitStream::from_packed(&bytes, None, SourceTag::External)
    };
    Ok(match len {
        Some(n) if n < stream.len() => BitStream::new(stream.bits()[..n].to_vec(), stream.source)?,
        Some(n) if n > stream.len() => {
            return Err(LabError::format(path, format!("asked for {n} bits, file holds {}", stream.len())))
        }
        _ => stream,
    })
}

/// Writes a bit stream, text (64 bits per line) or packed by extension.
pub fn write_bits(path: &Path, stream: &BitStream) -> Result<()> {
    if is_text_path(path) {
        let ascii = stream.to_ascii();
        let mut text = String::with_capacity(ascii.len() + ascii.len() / 64 + 1);
        for chunk in ascii.as_bytes().chunks(64) {
            text.push_str(std::str::from_utf8(chunk).expect("ascii"));
            text.push('\n');
        }
        write_atomic(path, text.as_bytes())
    } else {
        write_atomic(path, &stream.to_packed())
    }
}

/// Per-round table with a leading `# format_version` comment line.
pub fn rounds_csv(experiment: &ExperimentResult) -> String {
    let mut out = format!("# format_version: {FORMAT_VERSION}\n{ROUNDS_CSV_HEADER}\n");
    for (i, r) in experiment.rounds.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            r.setting.x(),
            r.setting.y(),
            r.same_count,
            r.diff_count,
            fmt_report_float(r.win_fraction)
        ));
    }
    out
}

/// Parses a round table back into an experiment. Round order must match the
/// `round_index` column.
pub fn read_rounds_csv(path: &Path) -> Result<ExperimentResult> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == ROUNDS_CSV_HEADER => {}
        other => {
            return Err(LabError::format(path, format!("expected header {ROUNDS_CSV_HEADER:?}, found {other:?}")))
        }
    }
    let mut rounds = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(LabError::format(path, format!("row {line_no}: expected 6 fields")));
        }
        let int = |i: usize| -> Result<u64> {
            fields[i].parse().map_err(|_| LabError::format(path, format!("row {line_no}: bad integer {:?}", fields[i])))
        };
        if int(0)? != line_no as u64 {
            return Err(LabError::integrity(path, format!("row {line_no}: round_index {} out of order", fields[0])));
        }
        let setting = GameSetting::new(int(1)? as u8, int(2)? as u8)
            .map_err(|e| LabError::format(path, format!("row {line_no}: {e}")))?;
        let round = RoundResult::from_tallies(setting, int(3)?, int(4)?);
        let stored: f64 =
            fields[5].parse().map_err(|_| LabError::format(path, format!("row {line_no}: bad win_fraction")))?;
        if (stored - round.win_fraction).abs() > 1e-5 {
            return Err(LabError::integrity(path, format!("row {line_no}: win_fraction disagrees with tallies")));
        }
        rounds.push(round);
    }
    Ok(ExperimentResult::from_rounds(rounds))
}
