//! Dataset model: subject-grouped, windowed time series with class labels.
//!
//! A [`Dataset`] is a flat list of fixed-shape [`Sample`]s plus a
//! [`DatasetMeta`] describing the shared shape and the label/subject
//! vocabularies. Samples carry a per-subject temporal ordinal (`t_index`)
//! and, when they were cut from a longer recording, the recording id and the
//! half-open time span they cover — enough for splitters to reason about
//! temporal order and window overlap.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard-deviation floor used when standardizing, so constant channels
/// divide by this instead of zero.
pub const EPS_STD: f64 = 1e-8;

/// Errors from dataset construction and transformation.
#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("window length {window} exceeds recording length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("window length must be positive")]
    ZeroWindow,
    #[error("overlap {overlap} outside [0, 1)")]
    InvalidOverlap { overlap: f64 },
    #[error("labels length {labels} does not match recording length {len}")]
    LabelLengthMismatch { labels: usize, len: usize },
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("standardizer fit set is empty")]
    EmptyFitSet,
    #[error("fit index {index} out of bounds for {len} samples")]
    FitIndexOutOfBounds { index: usize, len: usize },
    #[error("standardizer has {got} channels, dataset has {expected}")]
    ChannelMismatch { expected: usize, got: usize },
}

/// Shared shape and vocabularies for every sample in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    /// Timesteps per sample (T).
    pub n_timestamps: usize,
    /// Channels per timestep (C).
    pub n_channels: usize,
    /// Class vocabulary; sample labels index into it.
    pub class_names: Vec<String>,
    /// Subject vocabulary; sample subjects index into it.
    pub subject_ids: Vec<String>,
    /// Free-form unit of the time axis (e.g. "seconds", "steps").
    pub time_unit: String,
}

impl DatasetMeta {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    /// Values per sample once flattened time-major (T * C).
    pub fn sample_len(&self) -> usize {
        self.n_timestamps * self.n_channels
    }
}

/// Dense row-major matrix of `f64`; samples use rows = timesteps,
/// cols = channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Wraps a flat row-major buffer; errors when the length is not
    /// `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if data.len() != rows * cols {
            return Err(DataError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Flat row-major view (time-major for samples: index `t * C + c`).
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// One windowed multichannel observation of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Index into `meta.subject_ids`.
    pub subject: usize,
    /// Index into `meta.class_names`.
    pub label: usize,
    /// Temporal ordinal of this sample within its subject (and recording).
    pub t_index: usize,
    /// Source recording id, when the sample was cut from a recording.
    pub recording: Option<String>,
    /// Half-open `[start, end)` span in the source recording's time axis.
    pub span: Option<(f64, f64)>,
    /// T x C values, rows = timesteps.
    pub values: Matrix,
}

/// A subject-grouped time-series classification dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Label of each sample, in sample order.
    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Sample indices grouped by subject, preserving sample order.
    pub fn indices_by_subject(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut by_subject: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            by_subject.entry(s.subject).or_default().push(i);
        }
        by_subject
    }

    /// Distinct labels seen for each subject that has samples.
    pub fn labels_by_subject(&self) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut by_subject: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for s in &self.samples {
            by_subject.entry(s.subject).or_default().insert(s.label);
        }
        by_subject
    }
}

/// Structural grouping of a dataset, which determines the evaluation setups
/// that make sense for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    /// Single subject, multiple classes: no between-subject structure.
    #[serde(rename = "type-i")]
    TypeI,
    /// Multiple subjects and at least one subject carries several classes.
    #[serde(rename = "type-ii")]
    TypeII,
    /// Multiple subjects, each carrying exactly one class.
    #[serde(rename = "type-iii")]
    TypeIII,
    /// Single subject, single class: nothing to classify.
    #[serde(rename = "degenerate")]
    Degenerate,
}

impl core::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            DatasetKind::TypeI => "type-i",
            DatasetKind::TypeII => "type-ii",
            DatasetKind::TypeIII => "type-iii",
            DatasetKind::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

/// One validation failure, tied to a sample when applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending sample index, or `None` for dataset-level rules.
    pub sample: Option<usize>,
    /// Stable rule name (see the `rules` module).
    pub rule: &'static str,
    pub detail: String,
}

/// Stable rule names reported by [`validate_dataset`].
pub mod rules {
    pub const DIMENSION_MISMATCH: &str = "dimension-mismatch";
    pub const NON_FINITE_VALUE: &str = "non-finite-value";
    pub const LABEL_OUT_OF_RANGE: &str = "label-out-of-range";
    pub const SUBJECT_OUT_OF_RANGE: &str = "subject-out-of-range";
    pub const INVALID_SPAN: &str = "invalid-span";
    pub const DUPLICATE_TEMPORAL_POSITION: &str = "duplicate-temporal-position";
    pub const UNREFERENCED_SUBJECT: &str = "unreferenced-subject";
    pub const EMPTY_CLASS_SET: &str = "empty-class-set";
    pub const EMPTY_SUBJECT_SET: &str = "empty-subject-set";
    pub const ZERO_DIMENSION: &str = "zero-dimension";
    pub const DUPLICATE_NAME: &str = "duplicate-name";
}

/// Checks every structural invariant and returns all violations found
/// (empty means the dataset is well formed).
///
/// The unreferenced-subject rule only applies to datasets that have samples;
/// an empty dataset is a valid (if useless) container.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let meta = &dataset.meta;
    let mut out = Vec::new();

    if meta.class_names.is_empty() {
        out.push(Violation {
            sample: None,
            rule: rules::EMPTY_CLASS_SET,
            detail: String::from("class_names is empty"),
        });
    }
    if meta.subject_ids.is_empty() {
        out.push(Violation {
            sample: None,
            rule: rules::EMPTY_SUBJECT_SET,
            detail: String::from("subject_ids is empty"),
        });
    }
    if meta.n_timestamps == 0 || meta.n_channels == 0 {
        out.push(Violation {
            sample: None,
            rule: rules::ZERO_DIMENSION,
            detail: format!(
                "n_timestamps={} n_channels={}",
                meta.n_timestamps, meta.n_channels
            ),
        });
    }
    for (names, what) in [(&meta.class_names, "class"), (&meta.subject_ids, "subject")] {
        let mut seen = BTreeSet::new();
        for n in names.iter() {
            if !seen.insert(n) {
                out.push(Violation {
                    sample: None,
                    rule: rules::DUPLICATE_NAME,
                    detail: format!("duplicate {what} name {n:?}"),
                });
            }
        }
    }

    let mut seen_positions: BTreeSet<(usize, Option<&str>, usize)> = BTreeSet::new();
    let mut referenced: BTreeSet<usize> = BTreeSet::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        if s.values.rows() != meta.n_timestamps || s.values.cols() != meta.n_channels {
            out.push(Violation {
                sample: Some(i),
                rule: rules::DIMENSION_MISMATCH,
                detail: format!(
                    "values are {}x{}, expected {}x{}",
                    s.values.rows(),
                    s.values.cols(),
                    meta.n_timestamps,
                    meta.n_channels
                ),
            });
        }
        if s.values.as_slice().iter().any(|v| !v.is_finite()) {
            out.push(Violation {
                sample: Some(i),
                rule: rules::NON_FINITE_VALUE,
                detail: String::from("values contain NaN or infinity"),
            });
        }
        if s.label >= meta.n_classes() {
            out.push(Violation {
                sample: Some(i),
                rule: rules::LABEL_OUT_OF_RANGE,
                detail: format!("label {} with {} classes", s.label, meta.n_classes()),
            });
        }
        if s.subject >= meta.n_subjects() {
            out.push(Violation {
                sample: Some(i),
                rule: rules::SUBJECT_OUT_OF_RANGE,
                detail: format!("subject {} with {} subjects", s.subject, meta.n_subjects()),
            });
        } else {
            referenced.insert(s.subject);
        }
        if let Some((start, end)) = s.span {
            if !start.is_finite() || !end.is_finite() || end <= start {
                out.push(Violation {
                    sample: Some(i),
                    rule: rules::INVALID_SPAN,
                    detail: format!("span [{start}, {end})"),
                });
            }
        }
        let key = (s.subject, s.recording.as_deref(), s.t_index);
        if !seen_positions.insert(key) {
            out.push(Violation {
                sample: Some(i),
                rule: rules::DUPLICATE_TEMPORAL_POSITION,
                detail: format!(
                    "subject {} recording {:?} t_index {}",
                    s.subject, s.recording, s.t_index
                ),
            });
        }
    }

    if !dataset.samples.is_empty() {
        for (idx, id) in meta.subject_ids.iter().enumerate() {
            if !referenced.contains(&idx) {
                out.push(Violation {
                    sample: None,
                    rule: rules::UNREFERENCED_SUBJECT,
                    detail: format!("subject {id:?} has no samples"),
                });
            }
        }
    }

    out
}

/// Classifies the grouping structure of a non-empty dataset.
pub fn classify_dataset_kind(dataset: &Dataset) -> Result<DatasetKind, DataError> {
    if dataset.samples.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let by_subject = dataset.labels_by_subject();
    let n_subjects = by_subject.len();
    let distinct_labels: BTreeSet<usize> =
        dataset.samples.iter().map(|s| s.label).collect();
    let multi_label_subject = by_subject.values().any(|labels| labels.len() > 1);

    Ok(if n_subjects == 1 {
        if distinct_labels.len() >= 2 {
            DatasetKind::TypeI
        } else {
            DatasetKind::Degenerate
        }
    } else if multi_label_subject {
        DatasetKind::TypeII
    } else {
        DatasetKind::TypeIII
    })
}

/// Cuts a recording of shape L x C into fixed windows.
///
/// Windows have length `window_len` and start every
/// `stride = round(window_len * (1 - overlap))` timesteps (at least 1), as
/// long as they fit entirely inside the recording. Each window becomes a
/// [`Sample`] with `t_index` equal to its ordinal, `span = (start, start +
/// window_len)`, and the majority label over its timesteps — ties resolve to
/// the window's first-timestep label when that is among the tied labels,
/// otherwise to the smallest tied label.
pub fn segment_recording(
    recording: &Matrix,
    subject: usize,
    labels: &[usize],
    recording_id: Option<&str>,
    window_len: usize,
    overlap: f64,
) -> Result<Vec<Sample>, DataError> {
    let len = recording.rows();
    if window_len == 0 {
        return Err(DataError::ZeroWindow);
    }
    if window_len > len {
        return Err(DataError::WindowTooLong { window: window_len, len });
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(DataError::InvalidOverlap { overlap });
    }
    if labels.len() != len {
        return Err(DataError::LabelLengthMismatch { labels: labels.len(), len });
    }

    let stride_f = window_len as f64 * (1.0 - overlap);
    let stride = (libm::round(stride_f) as usize).max(1);

    let mut samples = Vec::new();
    let mut start = 0usize;
    let mut ordinal = 0usize;
    while start + window_len <= len {
        let window_labels = &labels[start..start + window_len];
        let label = majority_label(window_labels);
        let values = Matrix::from_fn(window_len, recording.cols(), |t, c| {
            recording.get(start + t, c)
        });
        samples.push(Sample {
            subject,
            label,
            t_index: ordinal,
            recording: recording_id.map(String::from),
            span: Some((start as f64, (start + window_len) as f64)),
            values,
        });
        start += stride;
        ordinal += 1;
    }
    Ok(samples)
}

/// Majority label; ties prefer the first timestep's label, then the smallest.
fn majority_label(window_labels: &[usize]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in window_labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let first = window_labels[0];
    if counts.get(&first) == Some(&max) {
        return first;
    }
    counts
        .iter()
        .filter(|(_, &c)| c == max)
        .map(|(&l, _)| l)
        .next()
        .expect("non-empty window")
}

/// Per-channel affine normalization fitted on a subset of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// Per-channel mean over fit samples and timesteps.
    pub mean: Vec<f64>,
    /// Per-channel population standard deviation, floored at [`EPS_STD`].
    pub stddev: Vec<f64>,
}

impl Standardizer {
    /// Fits channel statistics on `fit_indices` only.
    pub fn fit(dataset: &Dataset, fit_indices: &[usize]) -> Result<Self, DataError> {
        if fit_indices.is_empty() {
            return Err(DataError::EmptyFitSet);
        }
        let n = dataset.samples.len();
        for &i in fit_indices {
            if i >= n {
                return Err(DataError::FitIndexOutOfBounds { index: i, len: n });
            }
        }
        let c_channels = dataset.meta.n_channels;
        let t_steps = dataset.meta.n_timestamps;
        let count = (fit_indices.len() * t_steps) as f64;

        let mut mean = vec![0.0; c_channels];
        for &i in fit_indices {
            let values = &dataset.samples[i].values;
            for t in 0..t_steps {
                for (c, m) in mean.iter_mut().enumerate() {
                    *m += values.get(t, c);
                }
            }
        }
        for m in mean.iter_mut() {
            *m /= count;
        }

        let mut var = vec![0.0; c_channels];
        for &i in fit_indices {
            let values = &dataset.samples[i].values;
            for t in 0..t_steps {
                for (c, v) in var.iter_mut().enumerate() {
                    let d = values.get(t, c) - mean[c];
                    *v += d * d;
                }
            }
        }
        let stddev = var
            .iter()
            .map(|&v| {
                let sd = libm::sqrt(v / count);
                if sd < EPS_STD {
                    EPS_STD
                } else {
                    sd
                }
            })
            .collect();

        Ok(Standardizer { mean, stddev })
    }

    /// Applies `(v - mean) / stddev` channel-wise to one sample matrix.
    pub fn apply(&self, values: &Matrix) -> Result<Matrix, DataError> {
        if values.cols() != self.mean.len() {
            return Err(DataError::ChannelMismatch {
                expected: self.mean.len(),
                got: values.cols(),
            });
        }
        Ok(Matrix::from_fn(values.rows(), values.cols(), |t, c| {
            (values.get(t, c) - self.mean[c]) / self.stddev[c]
        }))
    }
}

/// Standardizes every sample of `dataset` with statistics fitted on
/// `fit_indices` only (use the training set to avoid leaking evaluation
/// statistics into the transform).
pub fn standardize(
    dataset: &Dataset,
    fit_indices: &[usize],
) -> Result<(Dataset, Standardizer), DataError> {
    let standardizer = Standardizer::fit(dataset, fit_indices)?;
    let samples = dataset
        .samples
        .iter()
        .map(|s| {
            Ok(Sample { values: standardizer.apply(&s.values)?, ..s.clone() })
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok((Dataset { meta: dataset.meta.clone(), samples }, standardizer))
}
