//! Core library for auditing subject-identity leakage in grouped
//! time-series classification.
//!
//! Datasets group samples by subject. A classifier evaluated on a split that
//! mixes samples of the same subject across train and test can score far
//! above its true generalization ability by recognizing *who* a sample came
//! from instead of *what* class it belongs to. This crate provides the
//! building blocks for measuring that effect:
//!
//! - [`data`]: the dataset model, validation, windowing and standardization;
//! - [`split`]: subject-dependent and subject-exclusive splitters plus an
//!   independent split verifier;
//! - [`protocol`]: label transforms (per-subject random labels, subject as
//!   class) and the evaluation setups built from them;
//! - [`model`]: a small, fully deterministic MLP classifier;
//! - [`metrics`]: confusion matrix, accuracy, macro-F1, run summaries and
//!   chance levels;
//! - [`synth`]: synthetic cohorts with a controlled subject signature and an
//!   exact additive component breakdown;
//! - [`audit`]: orchestration of the setup battery and leakage diagnostics.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! front end live in the companion `tsaudit` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod audit;
pub mod data;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod rng;
pub mod split;
pub mod synth;

pub use audit::{AuditConfig, AuditError, AuditReport, LeakageDiagnostics, SetupResult};
pub use data::{DataError, Dataset, DatasetKind, DatasetMeta, Matrix, Sample, Standardizer};
pub use metrics::{ConfusionMatrix, MetricSummary};
pub use model::{MlpParams, TrainConfig, TrainedModel};
pub use protocol::{EvaluationSetup, RelabelRecord, RelabelTransform};
pub use split::{Split, SplitConfig, SplitPolicy, SplitReport};
