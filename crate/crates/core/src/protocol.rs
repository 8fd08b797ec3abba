//! Evaluation setups: label transforms plus split policies.
//!
//! The setups differ along two axes. The *split* axis controls whether
//! subjects are shared between train and eval (subject-dependent) or held
//! out entirely (subject-independent). The *label* axis optionally replaces
//! the class labels before splitting:
//!
//! - per-subject random labels keep each subject internally consistent but
//!   sever any real class signal — a model can only score above chance by
//!   recognizing subjects;
//! - subject-as-class turns the dataset into a subject identification task,
//!   measuring how recognizable subjects are in the first place.
//!
//! Relabeling happens *before* splitting, so split stratification and
//! verification see the labels the model will be trained on.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{classify_dataset_kind, DataError, Dataset, DatasetKind, Sample};
use crate::rng::{self, tags};
use crate::split::{
    causal_subject_dependent, leave_n_out, leave_one_out, mixed_subject_dependent, Split,
    SplitConfig, SplitError,
};

/// Upper bound on coverage redraws in [`randomize_subject_labels`].
pub const MAX_RELABEL_RETRIES: u32 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("random-label protocols require a multi-subject cohort where every subject carries one class (got {kind})")]
    NotSingleLabelCohort { kind: DatasetKind },
    #[error("random-label protocols need at least two classes")]
    TooFewClasses,
    #[error("subject discrimination needs at least two subjects")]
    TooFewSubjects,
    #[error("random labels left some of the {k} classes empty after {retries} attempts")]
    CoverageExhausted { k: usize, retries: u32 },
    #[error("leave-one-out fold {fold} out of range for {n_subjects} subjects")]
    FoldOutOfRange { fold: usize, n_subjects: usize },
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// The seven evaluation setups an audit can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationSetup {
    /// Original labels, random sample-level split.
    SubDepMixed,
    /// Original labels, per-subject temporal split.
    SubDepCausal,
    /// Original labels, leave-n-subjects-out split.
    SubIndepLno,
    /// Original labels, one leave-one-subject-out fold.
    SubIndepLoo,
    /// Subject-as-class labels, random sample-level split.
    SubDisc,
    /// Per-subject random labels, random sample-level split.
    RSubDep,
    /// Per-subject random labels, leave-n-subjects-out split.
    RSubIndep,
}

impl EvaluationSetup {
    pub const ALL: [EvaluationSetup; 7] = [
        EvaluationSetup::SubDepMixed,
        EvaluationSetup::SubDepCausal,
        EvaluationSetup::SubIndepLno,
        EvaluationSetup::SubIndepLoo,
        EvaluationSetup::SubDisc,
        EvaluationSetup::RSubDep,
        EvaluationSetup::RSubIndep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvaluationSetup::SubDepMixed => "sub-dep-mixed",
            EvaluationSetup::SubDepCausal => "sub-dep-causal",
            EvaluationSetup::SubIndepLno => "sub-indep-lno",
            EvaluationSetup::SubIndepLoo => "sub-indep-loo",
            EvaluationSetup::SubDisc => "sub-disc",
            EvaluationSetup::RSubDep => "r-sub-dep",
            EvaluationSetup::RSubIndep => "r-sub-indep",
        }
    }
}

impl core::fmt::Display for EvaluationSetup {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown evaluation setup {0:?}")]
pub struct UnknownSetup(pub String);

impl core::str::FromStr for EvaluationSetup {
    type Err = UnknownSetup;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EvaluationSetup::ALL
            .into_iter()
            .find(|setup| setup.name() == s)
            .ok_or_else(|| UnknownSetup(String::from(s)))
    }
}

/// Label transform applied before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelabelTransform {
    None,
    RandomPerSubject,
    SubjectAsClass,
}

/// How [`randomize_subject_labels`] draws the new labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelabelMode {
    /// Independent uniform draw per subject; class sizes may shift.
    #[default]
    Assign,
    /// Shuffle the existing subject labels among subjects; class sizes are
    /// preserved exactly.
    Permute,
}

/// Record of a label transform, kept alongside results so a relabeled run
/// can be reproduced and sanity-checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelRecord {
    pub transform: RelabelTransform,
    /// Draw mode, for [`RelabelTransform::RandomPerSubject`] only.
    pub mode: Option<RelabelMode>,
    /// New label per subject index; empty for [`RelabelTransform::None`].
    pub mapping: Vec<usize>,
    /// Class count before the transform.
    pub original_k: usize,
    /// Coverage redraws that were needed (assign mode only).
    pub retries: u32,
}

impl RelabelRecord {
    fn none(original_k: usize) -> Self {
        RelabelRecord {
            transform: RelabelTransform::None,
            mode: None,
            mapping: Vec::new(),
            original_k,
            retries: 0,
        }
    }
}

fn relabel_samples(dataset: &Dataset, mapping: &[usize]) -> Vec<Sample> {
    dataset
        .samples
        .iter()
        .map(|s| Sample { label: mapping[s.subject], ..s.clone() })
        .collect()
}

/// Replaces every subject's label with a random class, identically for all
/// of the subject's samples. Only defined for multi-subject cohorts where
/// each subject carries a single class, so the transform destroys the class
/// signal completely while leaving subject identity intact.
///
/// In [`RelabelMode::Assign`] mode, draws that leave a class with no samples
/// anywhere in the dataset are redrawn from the same stream (at most
/// [`MAX_RELABEL_RETRIES`] times); the retry count is recorded.
pub fn randomize_subject_labels(
    dataset: &Dataset,
    seed: u64,
    mode: RelabelMode,
) -> Result<(Dataset, RelabelRecord), ProtocolError> {
    let kind = classify_dataset_kind(dataset)?;
    if kind != DatasetKind::TypeIII {
        return Err(ProtocolError::NotSingleLabelCohort { kind });
    }
    let k = dataset.meta.n_classes();
    if k < 2 {
        return Err(ProtocolError::TooFewClasses);
    }
    let n_subjects = dataset.meta.n_subjects();

    let (mapping, retries) = match mode {
        RelabelMode::Assign => {
            let mut stream = rng::stream(seed, &[tags::RELABEL]);
            let mut retries = 0u32;
            loop {
                let mapping: Vec<usize> =
                    (0..n_subjects).map(|_| stream.random_range(0..k)).collect();
                let mut covered = alloc::vec![false; k];
                for s in &dataset.samples {
                    covered[mapping[s.subject]] = true;
                }
                if covered.iter().all(|&c| c) {
                    break (mapping, retries);
                }
                if retries >= MAX_RELABEL_RETRIES {
                    return Err(ProtocolError::CoverageExhausted { k, retries });
                }
                retries += 1;
            }
        }
        RelabelMode::Permute => {
            // Each subject has exactly one label; shuffle those labels
            // among the subjects.
            let by_subject = dataset.labels_by_subject();
            let mut labels: Vec<usize> = (0..n_subjects)
                .map(|s| {
                    by_subject
                        .get(&s)
                        .and_then(|set| set.iter().next().copied())
                        .unwrap_or(0)
                })
                .collect();
            labels.shuffle(&mut rng::stream(seed, &[tags::RELABEL]));
            (labels, 0)
        }
    };

    let relabeled = Dataset {
        meta: dataset.meta.clone(),
        samples: relabel_samples(dataset, &mapping),
    };
    let record = RelabelRecord {
        transform: RelabelTransform::RandomPerSubject,
        mode: Some(mode),
        mapping,
        original_k: k,
        retries,
    };
    Ok((relabeled, record))
}

/// Turns the dataset into a subject identification task: the class
/// vocabulary becomes the subject ids (in order of first appearance in the
/// sample list) and every sample is labeled with its own subject.
pub fn subject_discrimination_relabel(
    dataset: &Dataset,
) -> Result<(Dataset, RelabelRecord), ProtocolError> {
    if dataset.samples.is_empty() {
        return Err(DataError::EmptyDataset.into());
    }
    let n_subjects = dataset.meta.n_subjects();
    if n_subjects < 2 {
        return Err(ProtocolError::TooFewSubjects);
    }

    let mut order: Vec<usize> = Vec::with_capacity(n_subjects);
    let mut position = alloc::vec![usize::MAX; n_subjects];
    for s in &dataset.samples {
        if position[s.subject] == usize::MAX {
            position[s.subject] = order.len();
            order.push(s.subject);
        }
    }
    // Subjects without samples (possible in unvalidated input) go last, in
    // id order, so the mapping stays total.
    for (subject, pos) in position.iter_mut().enumerate() {
        if *pos == usize::MAX {
            *pos = order.len();
            order.push(subject);
        }
    }

    let mut meta = dataset.meta.clone();
    meta.class_names = order
        .iter()
        .map(|&s| dataset.meta.subject_ids[s].clone())
        .collect();
    let relabeled = Dataset {
        samples: relabel_samples(dataset, &position),
        meta,
    };
    let record = RelabelRecord {
        transform: RelabelTransform::SubjectAsClass,
        mode: None,
        mapping: position,
        original_k: dataset.meta.n_classes(),
        retries: 0,
    };
    Ok((relabeled, record))
}

/// A fully materialized evaluation setup: the (possibly relabeled) dataset,
/// the split into train/val/test, and the relabel record.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupData {
    pub dataset: Dataset,
    pub split: Split,
    pub relabel: RelabelRecord,
}

/// Materializes `setup` on `dataset`: applies the setup's label transform
/// (seeded by `seed`), then its split policy (with `config`, seeded by
/// `seed`). For [`EvaluationSetup::SubIndepLoo`], `config.loo_fold` selects
/// the fold.
pub fn build_setup(
    setup: EvaluationSetup,
    dataset: &Dataset,
    config: &SplitConfig,
    seed: u64,
    relabel_mode: RelabelMode,
) -> Result<SetupData, ProtocolError> {
    let config = SplitConfig { seed, ..config.clone() };
    let original_k = dataset.meta.n_classes();

    let (dataset, relabel) = match setup {
        EvaluationSetup::SubDepMixed
        | EvaluationSetup::SubDepCausal
        | EvaluationSetup::SubIndepLno
        | EvaluationSetup::SubIndepLoo => {
            (dataset.clone(), RelabelRecord::none(original_k))
        }
        EvaluationSetup::SubDisc => subject_discrimination_relabel(dataset)?,
        EvaluationSetup::RSubDep | EvaluationSetup::RSubIndep => {
            randomize_subject_labels(dataset, seed, relabel_mode)?
        }
    };

    let split = match setup {
        EvaluationSetup::SubDepMixed
        | EvaluationSetup::SubDisc
        | EvaluationSetup::RSubDep => mixed_subject_dependent(&dataset, &config)?,
        EvaluationSetup::SubDepCausal => causal_subject_dependent(&dataset, &config)?,
        EvaluationSetup::SubIndepLno | EvaluationSetup::RSubIndep => {
            leave_n_out(&dataset, &config)?
        }
        EvaluationSetup::SubIndepLoo => {
            let folds = leave_one_out(&dataset)?;
            folds
                .into_iter()
                .nth(config.loo_fold)
                .ok_or(ProtocolError::FoldOutOfRange {
                    fold: config.loo_fold,
                    n_subjects: dataset.meta.n_subjects(),
                })?
        }
    };

    Ok(SetupData { dataset, split, relabel })
}
