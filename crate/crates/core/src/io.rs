//! Signal file formats.
//!
//! JSON: `{"fs": <Hz>, "samples": [...]}`.
//! CSV: a `fs=<Hz>` header line followed by one sample per line.
//!
//! Numbers written by this crate carry at most 12 significant digits.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Rounds to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Shortest decimal form of `round12(v)`, in exponent form outside
/// `[1e-4, 1e15)`.
pub fn fmt_num(v: f64) -> String {
    let r = round12(v);
    if r == 0.0 {
        // avoid "-0"
        return "0".into();
    }
    if r.abs() < 1e-4 || r.abs() >= 1e15 {
        return format!("{r:e}");
    }
    format!("{r}")
}

/// Converts a serializable value into JSON with every float rounded to
/// 12 significant digits.
pub fn to_json_value<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    round_json(&mut v);
    Ok(v)
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = to_json_value(value)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn round_json(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    let r = round12(f);
                    if let Some(num) = serde_json::Number::from_f64(if r == 0.0 { 0.0 } else { r })
                    {
                        *n = num;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn signal_from_json(text: &str) -> Result<Signal> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn signal_to_json(signal: &Signal) -> Result<String> {
    to_json_string(signal)
}

pub fn signal_from_csv(text: &str) -> Result<Signal> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV signal".into()))?;
    let fs: f64 = header
        .strip_prefix("fs=")
        .ok_or_else(|| Error::Parse(format!("expected `fs=<Hz>` header, got `{header}`")))?
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad sampling rate: {e}")))?;
    let samples = lines
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))
        })
        .collect::<Result<Vec<_>>>()?;
    Signal::new(samples, fs)
}

pub fn signal_to_csv(signal: &Signal) -> String {
    let mut out = format!("fs={}\n", fmt_num(signal.fs()));
    for v in signal.samples() {
        out.push_str(&fmt_num(*v));
        out.push('\n');
    }
    out
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a signal, choosing the format from the file extension.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if is_csv(path) {
        signal_from_csv(&text)
    } else {
        signal_from_json(&text)
    }
}

/// Serialises a signal in the format implied by `path`.
pub fn encode_signal(signal: &Signal, path: &Path) -> Result<String> {
    if is_csv(path) {
        Ok(signal_to_csv(signal))
    } else {
        signal_to_json(signal)
    }
}
