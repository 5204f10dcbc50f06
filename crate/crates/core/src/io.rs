//! Text formats: trace files, flat dotted-key TOML documents, and the layout
//! of a simulation directory.
//!
//! Floats are written with 17 significant digits, which is lossless for
//! `f64`, so write → read → write reproduces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::recon::TraceSet;
use crate::synth::{HomodyneTrace, Sample, TraceMeta};

pub const TRACE_S_FILE: &str = "trace_s.csv";
pub const TRACE_A_FILE: &str = "trace_a.csv";
pub const TRACE_PLUS_FILE: &str = "trace_plus.csv";
pub const TRACE_MINUS_FILE: &str = "trace_minus.csv";
pub const PDH_FILE: &str = "pdh.toml";
pub const TRUTH_FILE: &str = "truth.toml";
pub const REPORT_FILE: &str = "report.toml";

const COLUMNS: &str = "theta,x";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialises a trace: `# key: value` header lines, the column line, then
/// one `theta,x` row per sample.
pub fn format_trace(trace: &HomodyneTrace) -> String {
    let meta = trace.meta();
    let mut out = String::with_capacity(48 * trace.len() + 256);
    // writing to a String cannot fail
    let _ = writeln!(out, "# psi: {}", float(trace.psi()));
    let _ = writeln!(out, "# n_samples: {}", trace.len());
    let _ = writeln!(out, "# seed: {}", meta.seed);
    let _ = writeln!(out, "# scenario: {}", meta.scenario);
    let _ = writeln!(out, "# visibility: {}", float(meta.visibility));
    let _ = writeln!(out, "# electronic_noise_var: {}", float(meta.electronic_noise_var));
    out.push_str(COLUMNS);
    out.push('\n');
    for s in trace.samples() {
        let _ = writeln!(out, "{},{}", float(s.theta), float(s.x));
    }
    out
}

pub fn parse_trace(text: &str, path: &Path) -> Result<HomodyneTrace> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut psi = None;
    let mut n_samples = None;
    let mut meta = TraceMeta::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut seen_columns = false;

    for (no, line) in lines.by_ref() {
        if let Some(header) = line.strip_prefix('#') {
            let (key, value) = header
                .split_once(':')
                .ok_or_else(|| err(no, format!("header line without ':' separator: {line:?}")))?;
            let value = value.trim();
            let bad = |what: &str| err(no, format!("invalid {what} {value:?}"));
            match key.trim() {
                "psi" => psi = Some(value.parse::<f64>().map_err(|_| bad("psi"))?),
                "n_samples" => n_samples = Some(value.parse::<usize>().map_err(|_| bad("n_samples"))?),
                "seed" => meta.seed = value.parse().map_err(|_| bad("seed"))?,
                "scenario" => meta.scenario = value.to_string(),
                "visibility" => meta.visibility = value.parse().map_err(|_| bad("visibility"))?,
                "electronic_noise_var" => {
                    meta.electronic_noise_var = value.parse().map_err(|_| bad("electronic_noise_var"))?
                }
                other => return Err(err(no, format!("unknown header key {other:?}"))),
            }
        } else if line.trim() == COLUMNS {
            seen_columns = true;
            break;
        } else {
            return Err(err(
                no,
                format!("expected a '#' header or the column line {COLUMNS:?}, got {line:?}"),
            ));
        }
    }
    if !seen_columns {
        return Err(err(
            text.lines().count() + 1,
            format!("missing column line {COLUMNS:?}"),
        ));
    }
    let psi = psi.ok_or_else(|| err(1, "header is missing psi".into()))?;

    let mut samples = Vec::with_capacity(n_samples.unwrap_or(0));
    for (no, line) in lines {
        let (theta, x) = line
            .split_once(',')
            .ok_or_else(|| err(no, format!("expected two comma-separated values, got {line:?}")))?;
        let parse = |field: &str, name: &str| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| err(no, format!("invalid {name} value {field:?}")))
        };
        let sample = Sample {
            theta: parse(theta, "theta")?,
            x: parse(x, "x")?,
        };
        if !(sample.theta >= 0.0 && sample.theta < std::f64::consts::TAU && sample.x.is_finite()) {
            return Err(err(no, format!("sample out of range: {line:?}")));
        }
        samples.push(sample);
    }
    if let Some(n) = n_samples {
        if n != samples.len() {
            return Err(err(
                text.lines().count(),
                format!("header declares {n} samples but the file holds {}", samples.len()),
            ));
        }
    }
    HomodyneTrace::new(psi, samples, meta)
}

pub fn write_trace(path: &Path, trace: &HomodyneTrace) -> Result<()> {
    fs::write(path, format_trace(trace))?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<HomodyneTrace> {
    let text = read_text(path)?;
    parse_trace(&text, path)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(path.display().to_string()),
        _ => Error::Io(e),
    })
}

/// Paths of the four trace files in `dir`, ordered `s, a, plus, minus`.
pub fn trace_paths(dir: &Path) -> [PathBuf; 4] {
    [TRACE_S_FILE, TRACE_A_FILE, TRACE_PLUS_FILE, TRACE_MINUS_FILE].map(|f| dir.join(f))
}

pub fn write_trace_set(dir: &Path, traces: &TraceSet) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (path, trace) in trace_paths(dir).iter().zip(traces.all()) {
        write_trace(path, trace)?;
    }
    Ok(())
}

pub fn read_trace_set(dir: &Path) -> Result<TraceSet> {
    let paths = trace_paths(dir);
    let missing: Vec<_> = paths
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Missing(format!(
            "incomplete trace set, missing {}",
            missing.join(", ")
        )));
    }
    let [s, a, plus, minus] = paths;
    TraceSet::new(
        read_trace(&s)?,
        read_trace(&a)?,
        read_trace(&plus)?,
        read_trace(&minus)?,
    )
}

fn flatten(prefix: &str, table: &Table, out: &mut String) {
    for (key, value) in table {
        let key = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match value {
            Value::Table(inner) => flatten(&key, inner, out),
            other => {
                out.push_str(&key);
                out.push_str(" = ");
                out.push_str(&other.to_string());
                out.push('\n');
            }
        }
    }
}

/// Serialises `value` as TOML with every key fully dotted, one per line.
pub fn to_flat_toml<T: Serialize>(value: &T) -> Result<String> {
    let table = Table::try_from(value).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = String::new();
    flatten("", &table, &mut out);
    Ok(out)
}

pub fn from_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].lines().count().max(1))
            .unwrap_or(0);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.message().to_string(),
        }
    })
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_flat_toml(value)?)?;
    Ok(())
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_toml(&read_text(path)?, path)
}
