//! Dataset, split and report files.
//!
//! A dataset is stored as a data file (JSONL or CSV) plus a JSON manifest
//! sidecar carrying the metadata; the sidecar path is derived from the data
//! path by swapping the extension for `manifest.json`. Rows reference
//! subjects and classes by *name*, so files stay meaningful without the
//! loader. All floating-point values are written in scientific notation
//! with 17 significant digits, which round-trips `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tsaudit_core::data::{validate_dataset, Dataset, DatasetMeta, Matrix, Sample};
use tsaudit_core::synth::{ComponentBreakdown, SampleComponents};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Row { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("dataset failed validation with {count} violations; first: {first}")]
    InvalidDataset { count: usize, first: String },
}

/// On-disk encodings of the sample rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Jsonl,
    Csv,
}

impl DataFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DataFormat::Jsonl => "jsonl",
            DataFormat::Csv => "csv",
        }
    }

    /// Format implied by a file extension; defaults to JSONL when the
    /// extension is missing or unknown.
    pub fn infer(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DataFormat::Csv,
            _ => DataFormat::Jsonl,
        }
    }
}

impl core::str::FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(DataFormat::Jsonl),
            "csv" => Ok(DataFormat::Csv),
            other => Err(format!("unknown data format `{other}` (expected jsonl or csv)")),
        }
    }
}

/// Path of the metadata sidecar for a data file.
pub fn manifest_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("manifest.json")
}

/// Path of the component-breakdown sidecar for a data file.
pub fn breakdown_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("breakdown.jsonl")
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn file_err(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::File { path: path.to_path_buf(), message: message.into() }
}

fn row_err(path: &Path, line: u64, message: impl Into<String>) -> FormatError {
    FormatError::Row { path: path.to_path_buf(), line, message: message.into() }
}

/// 17 significant digits: enough to reproduce any finite `f64` bit for bit.
fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| file_err(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| row_err(path, e.line() as u64, e.to_string()))
}

/// One dataset row as stored in JSONL. Subjects and labels are names; the
/// manifest defines their indices.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    subject: String,
    label: String,
    t_index: usize,
    #[serde(default)]
    recording: Option<String>,
    #[serde(default)]
    span: Option<(f64, f64)>,
    values: Vec<f64>,
}

fn csv_header(sample_len: usize) -> Vec<String> {
    let mut header = vec![
        "subject".to_string(),
        "label".to_string(),
        "t_index".to_string(),
        "recording".to_string(),
        "span_start".to_string(),
        "span_end".to_string(),
    ];
    header.extend((0..sample_len).map(|i| format!("v{i}")));
    header
}

/// Writes the data file and its manifest sidecar. The dataset must pass
/// validation; sample order is preserved.
pub fn save_dataset(
    dataset: &Dataset,
    path: &Path,
    format: DataFormat,
) -> Result<(), FormatError> {
    let violations = validate_dataset(dataset);
    if !violations.is_empty() {
        return Err(FormatError::InvalidDataset {
            count: violations.len(),
            first: format!("{} ({})", violations[0].rule, violations[0].detail),
        });
    }
    save_json(&dataset.meta, &manifest_path(path))?;

    match format {
        DataFormat::Jsonl => {
            let mut text = String::new();
            for s in &dataset.samples {
                text.push_str("{\"subject\":");
                text.push_str(&json_str(&dataset.meta.subject_ids[s.subject]));
                text.push_str(",\"label\":");
                text.push_str(&json_str(&dataset.meta.class_names[s.label]));
                let _ = write!(text, ",\"t_index\":{}", s.t_index);
                text.push_str(",\"recording\":");
                match &s.recording {
                    Some(r) => text.push_str(&json_str(r)),
                    None => text.push_str("null"),
                }
                text.push_str(",\"span\":");
                match s.span {
                    Some((a, b)) => {
                        let _ = write!(text, "[{},{}]", full_precision(a), full_precision(b));
                    }
                    None => text.push_str("null"),
                }
                text.push_str(",\"values\":[");
                for (i, v) in s.values.as_slice().iter().enumerate() {
                    if i > 0 {
                        text.push(',');
                    }
                    text.push_str(&full_precision(*v));
                }
                text.push_str("]}\n");
            }
            fs::write(path, text).map_err(io_err(path))
        }
        DataFormat::Csv => {
            let mut writer = csv::Writer::from_path(path).map_err(|e| {
                file_err(path, e.to_string())
            })?;
            writer
                .write_record(csv_header(dataset.meta.sample_len()))
                .map_err(|e| file_err(path, e.to_string()))?;
            for s in &dataset.samples {
                let mut record: Vec<String> = vec![
                    dataset.meta.subject_ids[s.subject].clone(),
                    dataset.meta.class_names[s.label].clone(),
                    s.t_index.to_string(),
                    s.recording.clone().unwrap_or_default(),
                ];
                match s.span {
                    Some((a, b)) => {
                        record.push(full_precision(a));
                        record.push(full_precision(b));
                    }
                    None => {
                        record.push(String::new());
                        record.push(String::new());
                    }
                }
                record.extend(s.values.as_slice().iter().map(|&v| full_precision(v)));
                writer.write_record(&record).map_err(|e| file_err(path, e.to_string()))?;
            }
            writer.flush().map_err(io_err(path))
        }
    }
}

fn resolve_name(
    names: &[String],
    name: &str,
    what: &str,
    path: &Path,
    line: u64,
) -> Result<usize, FormatError> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| row_err(path, line, format!("unknown {what} name `{name}`")))
}

fn check_values(
    values: &[f64],
    expected: usize,
    path: &Path,
    line: u64,
) -> Result<(), FormatError> {
    if values.len() != expected {
        return Err(row_err(
            path,
            line,
            format!("dimension mismatch: row has {} values, manifest implies {expected}", values.len()),
        ));
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(row_err(path, line, format!("non-finite value at index {bad}")));
    }
    Ok(())
}

/// Loads a dataset from its data file plus manifest sidecar. The result is
/// fully validated; any violation is an error.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset, FormatError> {
    let meta: DatasetMeta = load_json(&manifest_path(path))?;
    let sample_len = meta.sample_len();
    let (t, c) = (meta.n_timestamps, meta.n_channels);

    let mut samples = Vec::new();
    match format {
        DataFormat::Jsonl => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line_no = i as u64 + 1;
                let line = line.map_err(io_err(path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: JsonRow = serde_json::from_str(&line)
                    .map_err(|e| row_err(path, line_no, e.to_string()))?;
                check_values(&row.values, sample_len, path, line_no)?;
                samples.push(Sample {
                    subject: resolve_name(&meta.subject_ids, &row.subject, "subject", path, line_no)?,
                    label: resolve_name(&meta.class_names, &row.label, "class", path, line_no)?,
                    t_index: row.t_index,
                    recording: row.recording,
                    span: row.span,
                    values: Matrix::from_vec(t, c, row.values)
                        .map_err(|e| row_err(path, line_no, e.to_string()))?,
                });
            }
        }
        DataFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(path)
                .map_err(|e| file_err(path, e.to_string()))?;
            let header = reader.headers().map_err(|e| file_err(path, e.to_string()))?;
            let expected = csv_header(sample_len);
            if header.len() != expected.len()
                || header.iter().zip(&expected).any(|(a, b)| a != b)
            {
                return Err(file_err(
                    path,
                    format!(
                        "dimension mismatch: header has {} columns, manifest implies {}",
                        header.len(),
                        expected.len()
                    ),
                ));
            }
            for result in reader.records() {
                let record = result.map_err(|e| match e.position() {
                    Some(p) => row_err(path, p.line(), e.to_string()),
                    None => file_err(path, e.to_string()),
                })?;
                let line_no = record.position().map_or(0, |p| p.line());
                let parse_f64 = |s: &str, what: &str| -> Result<f64, FormatError> {
                    s.parse::<f64>()
                        .map_err(|_| row_err(path, line_no, format!("bad {what} `{s}`")))
                };
                let mut values = Vec::with_capacity(sample_len);
                for cell in record.iter().skip(6) {
                    values.push(parse_f64(cell, "value")?);
                }
                check_values(&values, sample_len, path, line_no)?;
                let span = match (&record[4], &record[5]) {
                    ("", "") => None,
                    (a, b) => Some((parse_f64(a, "span_start")?, parse_f64(b, "span_end")?)),
                };
                samples.push(Sample {
                    subject: resolve_name(&meta.subject_ids, &record[0], "subject", path, line_no)?,
                    label: resolve_name(&meta.class_names, &record[1], "class", path, line_no)?,
                    t_index: record[2]
                        .parse()
                        .map_err(|_| row_err(path, line_no, format!("bad t_index `{}`", &record[2])))?,
                    recording: if record[3].is_empty() {
                        None
                    } else {
                        Some(record[3].to_string())
                    },
                    span,
                    values: Matrix::from_vec(t, c, values)
                        .map_err(|e| row_err(path, line_no, e.to_string()))?,
                });
            }
        }
    }

    let dataset = Dataset { meta, samples };
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        return Err(FormatError::InvalidDataset {
            count: violations.len(),
            first: format!("{} ({})", violations[0].rule, violations[0].detail),
        });
    }
    Ok(dataset)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BreakdownRow {
    class: Vec<f64>,
    subject: Vec<f64>,
    other: Vec<f64>,
}

/// Writes the per-sample component breakdown sidecar (JSONL, one object per
/// sample, aligned with the data file's rows).
pub fn save_breakdown(breakdown: &ComponentBreakdown, path: &Path) -> Result<(), FormatError> {
    let mut text = String::new();
    for parts in breakdown {
        for (key, matrix) in [
            ("{\"class\":[", &parts.class),
            (",\"subject\":[", &parts.subject),
            (",\"other\":[", &parts.other),
        ] {
            text.push_str(key);
            for (i, v) in matrix.as_slice().iter().enumerate() {
                if i > 0 {
                    text.push(',');
                }
                text.push_str(&full_precision(*v));
            }
            text.push(']');
        }
        text.push_str("}\n");
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Loads a breakdown sidecar; `meta` supplies the sample shape.
pub fn load_breakdown(
    path: &Path,
    meta: &DatasetMeta,
) -> Result<ComponentBreakdown, FormatError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let (t, c) = (meta.n_timestamps, meta.n_channels);
    let mut breakdown = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: BreakdownRow =
            serde_json::from_str(&line).map_err(|e| row_err(path, line_no, e.to_string()))?;
        let matrix = |data: Vec<f64>| {
            Matrix::from_vec(t, c, data).map_err(|e| row_err(path, line_no, e.to_string()))
        };
        breakdown.push(SampleComponents {
            class: matrix(row.class)?,
            subject: matrix(row.subject)?,
            other: matrix(row.other)?,
        });
    }
    Ok(breakdown)
}
