//! Synthetic cohorts with a controllable subject signature.
//!
//! Every generated value is an exact sum of three components, returned
//! alongside the dataset as a [`ComponentBreakdown`]:
//!
//! - *class*: a sinusoid whose frequency is set by the class label;
//! - *subject*: a smoothed-noise template drawn once per subject — the
//!   "fingerprint" a classifier can exploit as a shortcut;
//! - *other*: iid Gaussian noise.
//!
//! Scaling the subject amplitude against the class amplitude dials subject
//! leakage in and out, which is what makes these cohorts useful for testing
//! leakage diagnostics end to end.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    classify_dataset_kind, segment_recording, DataError, Dataset, DatasetKind, DatasetMeta,
    Matrix, Sample,
};
use crate::rng::{self, tags};

/// Attempts to draw multi-class segment labels before giving up.
const MAX_SEGMENT_RETRIES: u32 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("{field} must be positive")]
    ZeroField { field: &'static str },
    #[error("smooth_width must be odd, got {0}")]
    EvenSmoothWidth(usize),
    #[error("need at least {min} {what}, got {got}")]
    TooFew { what: &'static str, min: usize, got: usize },
    #[error("{field} must be finite and nonnegative")]
    BadAmplitude { field: &'static str },
    #[error("breakdown has {got} entries, dataset has {expected}")]
    BreakdownMismatch { expected: usize, got: usize },
    #[error("component shapes do not match sample {index}")]
    ComponentShape { index: usize },
    #[error("segment labels never produced a multi-class subject after {0} attempts")]
    SegmentRetriesExhausted(u32),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// The additive parts of one generated sample, already scaled by their
/// amplitudes, so `class + subject + other` reproduces the sample exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleComponents {
    pub class: Matrix,
    pub subject: Matrix,
    pub other: Matrix,
}

/// Per-sample component breakdown, aligned with `dataset.samples`.
pub type ComponentBreakdown = Vec<SampleComponents>;

/// Configuration for a single-label cohort (every subject carries one
/// class; subject i gets class i mod K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthType3Config {
    pub n_subjects: usize,
    pub n_classes: usize,
    pub samples_per_subject: usize,
    pub n_timestamps: usize,
    pub n_channels: usize,
    /// Amplitude of the class sinusoid.
    pub alpha_class: f64,
    /// Amplitude of the per-subject template.
    pub alpha_subject: f64,
    /// Amplitude of the iid noise.
    pub alpha_other: f64,
    /// Draw a uniform phase per sample for the class sinusoid, so the class
    /// signal cannot be matched point-for-point across samples.
    pub phase_jitter: bool,
    /// Moving-average width for the subject template; odd, >= 1.
    pub smooth_width: usize,
    pub seed: u64,
}

impl Default for SynthType3Config {
    fn default() -> Self {
        SynthType3Config {
            n_subjects: 20,
            n_classes: 3,
            samples_per_subject: 200,
            n_timestamps: 64,
            n_channels: 4,
            alpha_class: 0.5,
            alpha_subject: 2.0,
            alpha_other: 1.0,
            phase_jitter: true,
            smooth_width: 5,
            seed: 7,
        }
    }
}

/// Configuration for a multi-label cohort: each subject is one long
/// recording of contiguous class segments, cut into (possibly overlapping)
/// windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthType2Config {
    pub n_subjects: usize,
    pub n_classes: usize,
    pub segments_per_subject: usize,
    /// Timesteps per segment; the recording has
    /// `segments_per_subject * segment_len` timesteps.
    pub segment_len: usize,
    pub window_len: usize,
    /// Fractional overlap between consecutive windows, in [0, 1).
    pub overlap: f64,
    pub n_channels: usize,
    pub alpha_class: f64,
    pub alpha_subject: f64,
    pub alpha_other: f64,
    pub smooth_width: usize,
    pub seed: u64,
}

impl Default for SynthType2Config {
    fn default() -> Self {
        SynthType2Config {
            n_subjects: 8,
            n_classes: 2,
            segments_per_subject: 6,
            segment_len: 50,
            window_len: 10,
            overlap: 0.8,
            n_channels: 3,
            alpha_class: 0.6,
            alpha_subject: 0.8,
            alpha_other: 0.6,
            smooth_width: 5,
            seed: 7,
        }
    }
}

fn check_amplitude(value: f64, field: &'static str) -> Result<(), SynthError> {
    if !value.is_finite() || value < 0.0 {
        return Err(SynthError::BadAmplitude { field });
    }
    Ok(())
}

fn check_smooth_width(width: usize) -> Result<(), SynthError> {
    if width == 0 || width.is_multiple_of(2) {
        return Err(SynthError::EvenSmoothWidth(width));
    }
    Ok(())
}

/// Centered moving average along rows (time), window clamped at the edges.
fn smooth_rows(m: &Matrix, width: usize) -> Matrix {
    let half = width / 2;
    let rows = m.rows();
    Matrix::from_fn(rows, m.cols(), |t, c| {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(rows - 1);
        let mut sum = 0.0;
        for r in lo..=hi {
            sum += m.get(r, c);
        }
        sum / (hi - lo + 1) as f64
    })
}

/// Std-normal matrix drawn from `stream`.
fn normal_matrix<R: Rng>(rows: usize, cols: usize, stream: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng::normal(stream))
}

fn subject_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:02}")).collect()
}

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

/// Class sinusoid value: frequency `k + 1` cycles over `period` timesteps.
fn class_wave(label: usize, t: f64, period: f64, phase: f64) -> f64 {
    libm::sin(2.0 * core::f64::consts::PI * (label + 1) as f64 * t / period + phase)
}

/// Generates a single-label cohort: subject i carries class i mod K for all
/// of its `samples_per_subject` samples (`t_index` 0, 1, ...).
///
/// Per sample: `alpha_class * sin(2 pi (k+1) t / T + phase)` (one phase per
/// sample when `phase_jitter` is set, else 0) plus the subject's smoothed
/// noise template times `alpha_subject` plus iid noise times `alpha_other`.
pub fn generate_type3(
    config: &SynthType3Config,
) -> Result<(Dataset, ComponentBreakdown), SynthError> {
    for (field, value) in [
        ("n_subjects", config.n_subjects),
        ("n_classes", config.n_classes),
        ("samples_per_subject", config.samples_per_subject),
        ("n_timestamps", config.n_timestamps),
        ("n_channels", config.n_channels),
    ] {
        if value == 0 {
            return Err(SynthError::ZeroField { field });
        }
    }
    if config.n_subjects < 2 {
        return Err(SynthError::TooFew { what: "subjects", min: 2, got: config.n_subjects });
    }
    if config.n_subjects < config.n_classes {
        return Err(SynthError::TooFew {
            what: "subjects (one per class)",
            min: config.n_classes,
            got: config.n_subjects,
        });
    }
    check_smooth_width(config.smooth_width)?;
    check_amplitude(config.alpha_class, "alpha_class")?;
    check_amplitude(config.alpha_subject, "alpha_subject")?;
    check_amplitude(config.alpha_other, "alpha_other")?;

    let (t_len, c_len) = (config.n_timestamps, config.n_channels);
    let meta = DatasetMeta {
        name: String::from("synth-type3"),
        n_timestamps: t_len,
        n_channels: c_len,
        class_names: class_names(config.n_classes),
        subject_ids: subject_names(config.n_subjects),
        time_unit: String::from("steps"),
    };

    let mut samples = Vec::with_capacity(config.n_subjects * config.samples_per_subject);
    let mut breakdown = Vec::with_capacity(samples.capacity());
    for subject in 0..config.n_subjects {
        let label = subject % config.n_classes;
        let template = smooth_rows(
            &normal_matrix(
                t_len,
                c_len,
                &mut rng::stream(config.seed, &[tags::SUBJECT_TEMPLATE, subject as u64]),
            ),
            config.smooth_width,
        );
        for j in 0..config.samples_per_subject {
            let su = subject as u64;
            let phase = if config.phase_jitter {
                rng::stream(config.seed, &[tags::SAMPLE_PHASE, su, j as u64])
                    .random_range(0.0..2.0 * core::f64::consts::PI)
            } else {
                0.0
            };
            let class = Matrix::from_fn(t_len, c_len, |t, _| {
                config.alpha_class * class_wave(label, t as f64, t_len as f64, phase)
            });
            let subject_part = Matrix::from_fn(t_len, c_len, |t, c| {
                config.alpha_subject * template.get(t, c)
            });
            let mut noise_stream = rng::stream(config.seed, &[tags::SAMPLE_NOISE, su, j as u64]);
            let other = Matrix::from_fn(t_len, c_len, |_, _| {
                config.alpha_other * rng::normal(&mut noise_stream)
            });
            let values = Matrix::from_fn(t_len, c_len, |t, c| {
                class.get(t, c) + subject_part.get(t, c) + other.get(t, c)
            });
            samples.push(Sample {
                subject,
                label,
                t_index: j,
                recording: None,
                span: None,
                values,
            });
            breakdown.push(SampleComponents { class, subject: subject_part, other });
        }
    }
    Ok((Dataset { meta, samples }, breakdown))
}

/// Generates a multi-label cohort: per subject, one recording made of
/// contiguous class segments (segment classes drawn uniformly, redrawn with
/// `seed + 1`, ... until at least one subject is multi-class) is cut into
/// windows of `window_len` with the configured overlap.
///
/// The class sinusoid restarts at each segment boundary; the subject
/// template and the iid noise are drawn once per recording timestep, so
/// overlapping windows share their overlapping values exactly — the
/// memorization shortcut that overlapping windows create in real pipelines.
pub fn generate_type2(
    config: &SynthType2Config,
) -> Result<(Dataset, ComponentBreakdown), SynthError> {
    for (field, value) in [
        ("n_subjects", config.n_subjects),
        ("n_classes", config.n_classes),
        ("segments_per_subject", config.segments_per_subject),
        ("segment_len", config.segment_len),
        ("window_len", config.window_len),
        ("n_channels", config.n_channels),
    ] {
        if value == 0 {
            return Err(SynthError::ZeroField { field });
        }
    }
    if config.n_subjects < 2 {
        return Err(SynthError::TooFew { what: "subjects", min: 2, got: config.n_subjects });
    }
    if config.n_classes < 2 {
        return Err(SynthError::TooFew { what: "classes", min: 2, got: config.n_classes });
    }
    if config.segments_per_subject < 2 {
        return Err(SynthError::TooFew {
            what: "segments per subject",
            min: 2,
            got: config.segments_per_subject,
        });
    }
    check_smooth_width(config.smooth_width)?;
    check_amplitude(config.alpha_class, "alpha_class")?;
    check_amplitude(config.alpha_subject, "alpha_subject")?;
    check_amplitude(config.alpha_other, "alpha_other")?;

    let rec_len = config.segments_per_subject * config.segment_len;
    if config.window_len > rec_len {
        return Err(DataError::WindowTooLong { window: config.window_len, len: rec_len }.into());
    }

    let meta = DatasetMeta {
        name: String::from("synth-type2"),
        n_timestamps: config.window_len,
        n_channels: config.n_channels,
        class_names: class_names(config.n_classes),
        subject_ids: subject_names(config.n_subjects),
        time_unit: String::from("steps"),
    };

    // Segment classes are drawn uniformly, so a small cohort can come out
    // single-class per subject (after windowing and majority voting); such
    // draws are discarded and retried with the next seed offset.
    let mut attempt = 0u32;
    loop {
        let mut samples = Vec::new();
        let mut breakdown = Vec::new();
        for subject in 0..config.n_subjects {
            let su = subject as u64;
            let mut class_stream = rng::stream(
                config.seed + attempt as u64,
                &[tags::SEGMENT_CLASSES, su],
            );
            let segment_classes: Vec<usize> = (0..config.segments_per_subject)
                .map(|_| class_stream.random_range(0..config.n_classes))
                .collect();
            let labels: Vec<usize> = (0..rec_len)
                .map(|t| segment_classes[t / config.segment_len])
                .collect();
            let class = Matrix::from_fn(rec_len, config.n_channels, |t, _| {
                let local_t = (t % config.segment_len) as f64;
                config.alpha_class
                    * class_wave(labels[t], local_t, config.window_len as f64, 0.0)
            });
            let template = smooth_rows(
                &normal_matrix(
                    rec_len,
                    config.n_channels,
                    &mut rng::stream(config.seed, &[tags::SUBJECT_TEMPLATE, su]),
                ),
                config.smooth_width,
            );
            let mut noise_stream = rng::stream(config.seed, &[tags::RECORDING_NOISE, su]);
            let other = Matrix::from_fn(rec_len, config.n_channels, |_, _| {
                config.alpha_other * rng::normal(&mut noise_stream)
            });
            let recording = Matrix::from_fn(rec_len, config.n_channels, |t, c| {
                class.get(t, c) + config.alpha_subject * template.get(t, c) + other.get(t, c)
            });

            let rec_id = format!("r{subject:02}");
            let windows = segment_recording(
                &recording,
                subject,
                &labels,
                Some(&rec_id),
                config.window_len,
                config.overlap,
            )?;
            for window in windows {
                let (start, _) = window.span.expect("segment_recording always sets spans");
                let start = start as usize;
                let slice = |source: &Matrix, scale: f64| {
                    Matrix::from_fn(config.window_len, config.n_channels, |t, c| {
                        scale * source.get(start + t, c)
                    })
                };
                breakdown.push(SampleComponents {
                    class: slice(&class, 1.0),
                    subject: slice(&template, config.alpha_subject),
                    other: slice(&other, 1.0),
                });
                samples.push(window);
            }
        }

        let dataset = Dataset { meta: meta.clone(), samples };
        if classify_dataset_kind(&dataset)? == DatasetKind::TypeII {
            return Ok((dataset, breakdown));
        }
        attempt += 1;
        if attempt > MAX_SEGMENT_RETRIES {
            return Err(SynthError::SegmentRetriesExhausted(attempt));
        }
    }
}

/// Verifies that each sample equals the sum of its breakdown components to
/// within `1e-9` absolutely. Errors when the breakdown does not line up
/// with the dataset; returns `false` on a numeric mismatch.
pub fn reconstruct_check(
    dataset: &Dataset,
    breakdown: &ComponentBreakdown,
) -> Result<bool, SynthError> {
    if breakdown.len() != dataset.samples.len() {
        return Err(SynthError::BreakdownMismatch {
            expected: dataset.samples.len(),
            got: breakdown.len(),
        });
    }
    for (index, (sample, parts)) in dataset.samples.iter().zip(breakdown).enumerate() {
        let shape = (sample.values.rows(), sample.values.cols());
        for m in [&parts.class, &parts.subject, &parts.other] {
            if (m.rows(), m.cols()) != shape {
                return Err(SynthError::ComponentShape { index });
            }
        }
        for t in 0..shape.0 {
            for c in 0..shape.1 {
                let sum = parts.class.get(t, c) + parts.subject.get(t, c) + parts.other.get(t, c);
                if (sum - sample.values.get(t, c)).abs() > 1e-9 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
