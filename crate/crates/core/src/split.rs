//! Train/val/test splitters and an independent split verifier.
//!
//! Three families with very different leakage characteristics:
//!
//! - [`mixed_subject_dependent`]: a seeded permutation of sample indices,
//!   ignoring subjects entirely — the split most prone to subject leakage;
//! - [`causal_subject_dependent`]: per-subject temporal split, earliest
//!   samples to train, latest to test — subjects still shared, but training
//!   never sees the future of an evaluated sample;
//! - [`leave_n_out`] / [`leave_one_out`]: subject-exclusive splits where
//!   held-out subjects contribute no training samples at all.
//!
//! [`verify_split`] re-checks any split against the dataset it came from,
//! independently of how it was built.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::rng::{self, tags};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("fractions {0:?} must be nonnegative and sum to 1")]
    BadFractions(String),
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("{set} set would be empty ({n} samples, fraction {fraction})")]
    EmptySet { set: &'static str, n: usize, fraction: f64 },
    #[error("subject {subject} has only {n} samples, too few for the requested fractions")]
    SubjectTooSmall { subject: usize, n: usize },
    #[error("subject {subject} has duplicate t_index {t_index}; temporal order is ambiguous")]
    DuplicateTimeIndex { subject: usize, t_index: usize },
    #[error("cannot hold out {n_holdout} of {n_subjects} subjects; at least one training subject is required")]
    TooFewSubjects { n_subjects: usize, n_holdout: usize },
    #[error("{set} subject count is zero; pass an explicit count for small cohorts")]
    EmptySubjectSet { set: &'static str },
    #[error("unknown subject {0:?} in explicit holdout list")]
    UnknownSubject(String),
    #[error("subject {0:?} appears in both explicit holdout lists")]
    OverlappingHoldout(String),
}

/// How the indices of a [`Split`] were allowed to relate to subjects and
/// time; [`verify_split`] checks the invariants the policy promises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    /// Samples assigned independently of subject and time.
    MixedSample,
    /// Subjects shared across sets, but within each subject train precedes
    /// val precedes test in `t_index`.
    CausalPerSubject,
    /// Every subject's samples live in exactly one set.
    SubjectExclusive,
}

/// Index sets into `dataset.samples`, with the policy they were built under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub policy: SplitPolicy,
    /// Seed used for randomized assignment; `None` for deterministic splits.
    pub seed: Option<u64>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Parameters shared by all splitters. Sample-level splitters use
/// `fractions`; subject-exclusive splitters use the subject counts (each
/// count defaults to the floor of its fraction times the subject count)
/// or, when given, the explicit holdout lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// (train, val, test) fractions; must be nonnegative and sum to 1.
    pub fractions: (f64, f64, f64),
    pub n_val_subjects: Option<usize>,
    pub n_test_subjects: Option<usize>,
    /// Explicit validation subjects (by id); overrides counts when set.
    pub val_subjects: Option<Vec<String>>,
    /// Explicit test subjects (by id); overrides counts when set.
    pub test_subjects: Option<Vec<String>>,
    /// Balance held-out subjects across classes (subjects grouped by their
    /// majority label). Useful when each subject carries a single class.
    pub stratify_by_label: bool,
    /// Which leave-one-subject-out fold to evaluate when a single fold is
    /// requested from the full enumeration.
    pub loo_fold: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: (0.6, 0.2, 0.2),
            n_val_subjects: None,
            n_test_subjects: None,
            val_subjects: None,
            test_subjects: None,
            stratify_by_label: false,
            loo_fold: 0,
            seed: 0,
        }
    }
}

fn check_fractions(f: (f64, f64, f64)) -> Result<(), SplitError> {
    let (a, b, c) = f;
    let sum = a + b + c;
    if a < 0.0 || b < 0.0 || c < 0.0 || (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadFractions(format!("({a}, {b}, {c})")));
    }
    Ok(())
}

/// Splits `floor(f_train * n)` / `floor(f_val * n)` / remainder, erroring
/// when a set with a positive fraction comes out empty.
fn fraction_counts(
    n: usize,
    fractions: (f64, f64, f64),
) -> Result<(usize, usize, usize), SplitError> {
    let (f_train, f_val, f_test) = fractions;
    let n_train = (f_train * n as f64) as usize;
    let n_val = (f_val * n as f64) as usize;
    let n_test = n - n_train - n_val;
    for (set, size, fraction) in [
        ("train", n_train, f_train),
        ("val", n_val, f_val),
        ("test", n_test, f_test),
    ] {
        if fraction > 0.0 && size == 0 {
            return Err(SplitError::EmptySet { set, n, fraction });
        }
    }
    Ok((n_train, n_val, n_test))
}

/// Random sample-level split: a seeded permutation of all indices carved
/// into train/val/test by `config.fractions`. Subjects and time are ignored,
/// which is exactly what makes this split leak subject identity.
pub fn mixed_subject_dependent(
    dataset: &Dataset,
    config: &SplitConfig,
) -> Result<Split, SplitError> {
    check_fractions(config.fractions)?;
    let n = dataset.n_samples();
    if n == 0 {
        return Err(SplitError::EmptyDataset);
    }
    let (n_train, n_val, _) = fraction_counts(n, config.fractions)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(config.seed, &[tags::MIXED_SPLIT]));

    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut val: Vec<usize> = order[n_train..n_train + n_val].to_vec();
    let mut test: Vec<usize> = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Ok(Split {
        policy: SplitPolicy::MixedSample,
        seed: Some(config.seed),
        train,
        val,
        test,
    })
}

/// Per-subject temporal split: each subject's samples are ordered by
/// `t_index` and carved by `config.fractions` — earliest to train, then val,
/// latest to test. Deterministic; no randomness is involved.
pub fn causal_subject_dependent(
    dataset: &Dataset,
    config: &SplitConfig,
) -> Result<Split, SplitError> {
    check_fractions(config.fractions)?;
    if dataset.n_samples() == 0 {
        return Err(SplitError::EmptyDataset);
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (subject, mut indices) in dataset.indices_by_subject() {
        indices.sort_by_key(|&i| dataset.samples[i].t_index);
        for pair in indices.windows(2) {
            let t = dataset.samples[pair[1]].t_index;
            if dataset.samples[pair[0]].t_index == t {
                return Err(SplitError::DuplicateTimeIndex { subject, t_index: t });
            }
        }
        let n = indices.len();
        let (n_train, n_val, _) = fraction_counts(n, config.fractions)
            .map_err(|_| SplitError::SubjectTooSmall { subject, n })?;
        train.extend_from_slice(&indices[..n_train]);
        val.extend_from_slice(&indices[n_train..n_train + n_val]);
        test.extend_from_slice(&indices[n_train + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Ok(Split {
        policy: SplitPolicy::CausalPerSubject,
        seed: None,
        train,
        val,
        test,
    })
}

/// Holdout subject ids resolved against the dataset, in meta order.
fn resolve_subject_list(
    dataset: &Dataset,
    names: &[String],
) -> Result<BTreeSet<usize>, SplitError> {
    let mut set = BTreeSet::new();
    for name in names {
        let idx = dataset
            .meta
            .subject_ids
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| SplitError::UnknownSubject(name.clone()))?;
        set.insert(idx);
    }
    Ok(set)
}

/// Subject-exclusive split: whole subjects are held out for validation and
/// test. Assignment comes from explicit holdout lists when given, otherwise
/// from a seeded subject permutation (optionally stratified by label) with
/// the last `n_test` subjects to test and the previous `n_val` to val.
pub fn leave_n_out(dataset: &Dataset, config: &SplitConfig) -> Result<Split, SplitError> {
    check_fractions(config.fractions)?;
    if dataset.n_samples() == 0 {
        return Err(SplitError::EmptyDataset);
    }
    let n_subjects = dataset.meta.n_subjects();

    let (val_subjects, test_subjects, seed) = if config.val_subjects.is_some()
        || config.test_subjects.is_some()
    {
        let val = resolve_subject_list(dataset, config.val_subjects.as_deref().unwrap_or(&[]))?;
        let test = resolve_subject_list(dataset, config.test_subjects.as_deref().unwrap_or(&[]))?;
        if let Some(&dup) = val.intersection(&test).next() {
            return Err(SplitError::OverlappingHoldout(
                dataset.meta.subject_ids[dup].clone(),
            ));
        }
        if test.is_empty() {
            return Err(SplitError::EmptySubjectSet { set: "test" });
        }
        if val.len() + test.len() >= n_subjects {
            return Err(SplitError::TooFewSubjects {
                n_subjects,
                n_holdout: val.len() + test.len(),
            });
        }
        (val, test, None)
    } else {
        let (_, f_val, f_test) = config.fractions;
        let n_val = config
            .n_val_subjects
            .unwrap_or((f_val * n_subjects as f64) as usize);
        let n_test = config
            .n_test_subjects
            .unwrap_or((f_test * n_subjects as f64) as usize);
        if n_test == 0 {
            return Err(SplitError::EmptySubjectSet { set: "test" });
        }
        if n_val + n_test >= n_subjects {
            return Err(SplitError::TooFewSubjects { n_subjects, n_holdout: n_val + n_test });
        }
        let order = subject_order(dataset, config);
        let test: BTreeSet<usize> = order[n_subjects - n_test..].iter().copied().collect();
        let val: BTreeSet<usize> =
            order[n_subjects - n_test - n_val..n_subjects - n_test].iter().copied().collect();
        (val, test, Some(config.seed))
    };

    let mut split = Split {
        policy: SplitPolicy::SubjectExclusive,
        seed,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (i, s) in dataset.samples.iter().enumerate() {
        if test_subjects.contains(&s.subject) {
            split.test.push(i);
        } else if val_subjects.contains(&s.subject) {
            split.val.push(i);
        } else {
            split.train.push(i);
        }
    }
    Ok(split)
}

/// Permutation of subject indices used by [`leave_n_out`].
///
/// Unstratified: one seeded shuffle of all subjects. Stratified: subjects
/// are grouped by majority label, each group is shuffled with its own
/// substream, and groups are interleaved round-robin from the tail of the
/// order backwards, so larger groups spill their surplus toward the front
/// (the training side) and any tail of the order (the held-out subjects)
/// covers the classes as evenly as possible.
fn subject_order(dataset: &Dataset, config: &SplitConfig) -> Vec<usize> {
    let n_subjects = dataset.meta.n_subjects();
    if !config.stratify_by_label {
        let mut order: Vec<usize> = (0..n_subjects).collect();
        order.shuffle(&mut rng::stream(config.seed, &[tags::SUBJECT_PERM]));
        return order;
    }

    let mut label_counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for s in &dataset.samples {
        *label_counts.entry(s.subject).or_default().entry(s.label).or_insert(0) += 1;
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for subject in 0..n_subjects {
        let majority = label_counts
            .get(&subject)
            .and_then(|counts| {
                let max = counts.values().copied().max()?;
                counts.iter().find(|(_, &c)| c == max).map(|(&l, _)| l)
            })
            .unwrap_or(0);
        groups.entry(majority).or_default().push(subject);
    }
    for (label, group) in groups.iter_mut() {
        group.shuffle(&mut rng::stream(config.seed, &[tags::SUBJECT_PERM, *label as u64]));
    }

    let mut reversed = Vec::with_capacity(n_subjects);
    let mut remaining: BTreeMap<usize, Vec<usize>> = groups;
    while reversed.len() < n_subjects {
        for group in remaining.values_mut() {
            if let Some(subject) = group.pop() {
                reversed.push(subject);
            }
        }
    }
    reversed.reverse();
    reversed
}

/// All leave-one-subject-out folds, in subject order. Fold `i` holds out
/// subject `i` as the test set; validation is empty (select models by final
/// epoch or an inner split).
pub fn leave_one_out(dataset: &Dataset) -> Result<Vec<Split>, SplitError> {
    if dataset.n_samples() == 0 {
        return Err(SplitError::EmptyDataset);
    }
    let n_subjects = dataset.meta.n_subjects();
    if n_subjects < 2 {
        return Err(SplitError::TooFewSubjects { n_subjects, n_holdout: 1 });
    }
    let mut folds = Vec::with_capacity(n_subjects);
    for holdout in 0..n_subjects {
        let mut split = Split {
            policy: SplitPolicy::SubjectExclusive,
            seed: None,
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (i, s) in dataset.samples.iter().enumerate() {
            if s.subject == holdout {
                split.test.push(i);
            } else {
                split.train.push(i);
            }
        }
        folds.push(split);
    }
    Ok(folds)
}

/// What a split verification can flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// A subject contributes samples to more than one set under a
    /// subject-exclusive policy.
    SubjectInTrainAndEval,
    /// Under a causal policy, some subject's training samples do not all
    /// precede its evaluation samples (or val does not precede test).
    TemporalOrderBroken,
    /// Under a subject-exclusive policy, train and test windows from the
    /// same recording overlap in time.
    SpanOverlapAcrossSets,
    /// An index appears in more than one set, twice in the same set, or
    /// out of range.
    IndexOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitViolation {
    pub kind: ViolationKind,
    pub detail: String,
}

/// Outcome of [`verify_split`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub violations: Vec<SplitViolation>,
    /// Number of train/test pairs from the same recording whose spans
    /// intersect. Informational under sample-level policies (where such
    /// pairs are expected); a violation under subject-exclusive ones.
    pub leak_pair_count: u64,
    /// Diagnostics that are not violations, e.g. recordings shared across
    /// train and test without span metadata to check for overlap.
    pub notes: Vec<String>,
}

impl SplitReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `split` against `dataset` independently of how it was built:
/// index-set sanity for all policies, subject exclusivity and span overlap
/// for [`SplitPolicy::SubjectExclusive`], temporal order for
/// [`SplitPolicy::CausalPerSubject`], plus the informational
/// train/test overlapping-window count.
pub fn verify_split(dataset: &Dataset, split: &Split) -> SplitReport {
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    let n = dataset.n_samples();

    // Index sanity: in range, no duplicates within or across sets.
    let mut seen: BTreeMap<usize, &'static str> = BTreeMap::new();
    for (set_name, indices) in
        [("train", &split.train), ("val", &split.val), ("test", &split.test)]
    {
        for &i in indices {
            if i >= n {
                violations.push(SplitViolation {
                    kind: ViolationKind::IndexOverlap,
                    detail: format!("index {i} out of range for {n} samples in {set_name}"),
                });
                continue;
            }
            if let Some(prev) = seen.insert(i, set_name) {
                violations.push(SplitViolation {
                    kind: ViolationKind::IndexOverlap,
                    detail: format!("index {i} in both {prev} and {set_name}"),
                });
            }
        }
    }

    fn in_range(indices: &[usize], n: usize) -> impl Iterator<Item = usize> + '_ {
        indices.iter().copied().filter(move |&i| i < n)
    }

    if split.policy == SplitPolicy::SubjectExclusive {
        let mut subject_sets: BTreeMap<usize, BTreeSet<&'static str>> = BTreeMap::new();
        for (set_name, indices) in
            [("train", &split.train), ("val", &split.val), ("test", &split.test)]
        {
            for i in in_range(indices, n) {
                subject_sets
                    .entry(dataset.samples[i].subject)
                    .or_default()
                    .insert(set_name);
            }
        }
        for (subject, sets) in subject_sets {
            if sets.len() > 1 {
                let names: Vec<&str> = sets.into_iter().collect();
                violations.push(SplitViolation {
                    kind: ViolationKind::SubjectInTrainAndEval,
                    detail: format!("subject {subject} has samples in {}", names.join(" and ")),
                });
            }
        }
    }

    if split.policy == SplitPolicy::CausalPerSubject {
        // Per subject: max t(train) < min t(val + test) and
        // max t(val) < min t(test).
        type TimeBounds = [(Option<usize>, Option<usize>); 3];
        let mut t_bounds: BTreeMap<usize, TimeBounds> = BTreeMap::new();
        for (slot, indices) in [(0, &split.train), (1, &split.val), (2, &split.test)] {
            for i in in_range(indices, n) {
                let s = &dataset.samples[i];
                let bounds = &mut t_bounds.entry(s.subject).or_default()[slot];
                bounds.0 = Some(bounds.0.map_or(s.t_index, |m: usize| m.min(s.t_index)));
                bounds.1 = Some(bounds.1.map_or(s.t_index, |m: usize| m.max(s.t_index)));
            }
        }
        for (subject, [train, val, test]) in t_bounds {
            let eval_min = match (val.0, test.0) {
                (Some(v), Some(t)) => Some(v.min(t)),
                (v, t) => v.or(t),
            };
            if let (Some(train_max), Some(eval_min)) = (train.1, eval_min) {
                if train_max >= eval_min {
                    violations.push(SplitViolation {
                        kind: ViolationKind::TemporalOrderBroken,
                        detail: format!(
                            "subject {subject}: train reaches t={train_max}, eval starts at t={eval_min}"
                        ),
                    });
                }
            }
            if let (Some(val_max), Some(test_min)) = (val.1, test.0) {
                if val_max >= test_min {
                    violations.push(SplitViolation {
                        kind: ViolationKind::TemporalOrderBroken,
                        detail: format!(
                            "subject {subject}: val reaches t={val_max}, test starts at t={test_min}"
                        ),
                    });
                }
            }
        }
    }

    // Overlapping train/test windows from the same recording.
    let mut by_recording: BTreeMap<&str, [Vec<usize>; 2]> = BTreeMap::new();
    for (slot, indices) in [(0, &split.train), (1, &split.test)] {
        for i in in_range(indices, n) {
            if let Some(rec) = dataset.samples[i].recording.as_deref() {
                by_recording.entry(rec).or_default()[slot].push(i);
            }
        }
    }
    let mut leak_pair_count = 0u64;
    let mut unverifiable_pairs = 0u64;
    for (rec, [train_idx, test_idx]) in &by_recording {
        let mut overlapping = 0u64;
        for &a in train_idx {
            for &b in test_idx {
                match (dataset.samples[a].span, dataset.samples[b].span) {
                    (Some((s1, e1)), Some((s2, e2))) => {
                        if s1.max(s2) < e1.min(e2) {
                            overlapping += 1;
                        }
                    }
                    _ => unverifiable_pairs += 1,
                }
            }
        }
        leak_pair_count += overlapping;
        if overlapping > 0 && split.policy == SplitPolicy::SubjectExclusive {
            violations.push(SplitViolation {
                kind: ViolationKind::SpanOverlapAcrossSets,
                detail: format!(
                    "recording {rec:?} has {overlapping} overlapping train/test window pairs"
                ),
            });
        }
    }
    if unverifiable_pairs > 0 {
        notes.push(format!(
            "{unverifiable_pairs} train/test pairs share a recording but lack span metadata; overlap not detectable"
        ));
    }

    SplitReport { violations, leak_pair_count, notes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::testutil::dataset;
    use crate::data::{segment_recording, Dataset, Matrix};
    use alloc::string::ToString;
    use alloc::vec;

    fn cfg(seed: u64) -> SplitConfig {
        SplitConfig { seed, ..SplitConfig::default() }
    }

    /// Dataset with `per_subject` samples per subject, one label per subject
    /// cycling over `k` classes.
    fn grouped(n_subjects: usize, per_subject: usize, k: usize) -> Dataset {
        let rows: Vec<(usize, usize, usize)> = (0..n_subjects)
            .flat_map(|s| (0..per_subject).map(move |t| (s, s % k, t)))
            .collect();
        dataset(2, 1, k, n_subjects, &rows)
    }

    fn assert_partition(ds: &Dataset, split: &Split) {
        let mut all: Vec<usize> = split
            .train
            .iter()
            .chain(&split.val)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        let expect: Vec<usize> = (0..ds.n_samples()).collect();
        assert_eq!(all, expect, "split must partition the index set");
    }

    #[test]
    fn mixed_split_sizes_follow_floor_rule() {
        let ds = grouped(4, 25, 2);
        let split = mixed_subject_dependent(&ds, &cfg(41)).unwrap();
        assert_eq!(split.train.len(), 60);
        assert_eq!(split.val.len(), 20);
        assert_eq!(split.test.len(), 20);
        assert_eq!(split.policy, SplitPolicy::MixedSample);
        assert_eq!(split.seed, Some(41));
        assert_partition(&ds, &split);
    }

    #[test]
    fn mixed_split_small_n() {
        let ds = grouped(1, 5, 1);
        let split = mixed_subject_dependent(&ds, &cfg(0)).unwrap();
        assert_eq!(
            (split.train.len(), split.val.len(), split.test.len()),
            (3, 1, 1)
        );
    }

    #[test]
    fn mixed_split_is_deterministic_and_seed_sensitive() {
        let ds = grouped(3, 20, 3);
        let a = mixed_subject_dependent(&ds, &cfg(41)).unwrap();
        let b = mixed_subject_dependent(&ds, &cfg(41)).unwrap();
        let c = mixed_subject_dependent(&ds, &cfg(42)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn mixed_split_errors() {
        let ds = grouped(1, 1, 1);
        assert!(matches!(
            mixed_subject_dependent(&ds, &cfg(0)),
            Err(SplitError::EmptySet { set: "train", .. })
        ));
        let bad = SplitConfig { fractions: (0.5, 0.2, 0.2), ..cfg(0) };
        assert!(matches!(
            mixed_subject_dependent(&grouped(1, 10, 1), &bad),
            Err(SplitError::BadFractions(_))
        ));
        let neg = SplitConfig { fractions: (1.2, -0.1, -0.1), ..cfg(0) };
        assert!(matches!(
            mixed_subject_dependent(&grouped(1, 10, 1), &neg),
            Err(SplitError::BadFractions(_))
        ));
    }

    #[test]
    fn mixed_split_allows_empty_set_with_zero_fraction() {
        let ds = grouped(1, 10, 1);
        let config = SplitConfig { fractions: (0.8, 0.0, 0.2), ..cfg(0) };
        let split = mixed_subject_dependent(&ds, &config).unwrap();
        assert_eq!(
            (split.train.len(), split.val.len(), split.test.len()),
            (8, 0, 2)
        );
    }

    #[test]
    fn causal_split_sends_earliest_to_train() {
        // One subject, t_index 0..9 in scrambled sample order.
        let order = [7usize, 1, 4, 0, 9, 3, 8, 2, 6, 5];
        let rows: Vec<(usize, usize, usize)> = order.iter().map(|&t| (0, 0, t)).collect();
        let ds = dataset(2, 1, 1, 1, &rows);
        let split = causal_subject_dependent(&ds, &cfg(0)).unwrap();
        let t_of = |indices: &[usize]| -> Vec<usize> {
            let mut t: Vec<usize> = indices.iter().map(|&i| ds.samples[i].t_index).collect();
            t.sort_unstable();
            t
        };
        assert_eq!(t_of(&split.train), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(t_of(&split.val), vec![6, 7]);
        assert_eq!(t_of(&split.test), vec![8, 9]);
        assert_eq!(split.policy, SplitPolicy::CausalPerSubject);
        assert_eq!(split.seed, None);
        assert_partition(&ds, &split);
    }

    #[test]
    fn causal_split_is_per_subject() {
        let ds = grouped(3, 10, 2);
        let split = causal_subject_dependent(&ds, &cfg(0)).unwrap();
        assert_eq!(split.train.len(), 18);
        assert_eq!(split.val.len(), 6);
        assert_eq!(split.test.len(), 6);
        // Every subject appears in every set.
        for set in [&split.train, &split.val, &split.test] {
            let subjects: BTreeSet<usize> = set.iter().map(|&i| ds.samples[i].subject).collect();
            assert_eq!(subjects.len(), 3);
        }
        assert!(verify_split(&ds, &split).passed());
    }

    #[test]
    fn causal_split_rejects_duplicate_t_index() {
        let ds = dataset(2, 1, 2, 1, &[(0, 0, 3), (0, 1, 3)]);
        assert_eq!(
            causal_subject_dependent(&ds, &cfg(0)),
            Err(SplitError::DuplicateTimeIndex { subject: 0, t_index: 3 })
        );
    }

    #[test]
    fn causal_split_rejects_subject_with_too_few_samples() {
        let mut rows = vec![(0usize, 0usize, 0usize)];
        rows.extend((0..10).map(|t| (1, 0, t)));
        let ds = dataset(2, 1, 1, 2, &rows);
        assert_eq!(
            causal_subject_dependent(&ds, &cfg(0)),
            Err(SplitError::SubjectTooSmall { subject: 0, n: 1 })
        );
    }

    #[test]
    fn leave_n_out_uses_counts() {
        let ds = grouped(5, 4, 2);
        let config = SplitConfig {
            n_val_subjects: Some(1),
            n_test_subjects: Some(1),
            ..cfg(41)
        };
        let split = leave_n_out(&ds, &config).unwrap();
        assert_eq!(split.policy, SplitPolicy::SubjectExclusive);
        let subjects = |set: &[usize]| -> BTreeSet<usize> {
            set.iter().map(|&i| ds.samples[i].subject).collect()
        };
        assert_eq!(subjects(&split.train).len(), 3);
        assert_eq!(subjects(&split.val).len(), 1);
        assert_eq!(subjects(&split.test).len(), 1);
        assert_partition(&ds, &split);
        assert!(verify_split(&ds, &split).passed());
    }

    #[test]
    fn leave_n_out_defaults_to_subject_fractions() {
        let ds = grouped(10, 3, 2);
        let split = leave_n_out(&ds, &cfg(7)).unwrap();
        let subjects = |set: &[usize]| -> BTreeSet<usize> {
            set.iter().map(|&i| ds.samples[i].subject).collect()
        };
        assert_eq!(subjects(&split.train).len(), 6);
        assert_eq!(subjects(&split.val).len(), 2);
        assert_eq!(subjects(&split.test).len(), 2);
    }

    #[test]
    fn leave_n_out_is_deterministic_and_seed_sensitive() {
        let ds = grouped(8, 3, 2);
        let a = leave_n_out(&ds, &cfg(1)).unwrap();
        let b = leave_n_out(&ds, &cfg(1)).unwrap();
        let c = leave_n_out(&ds, &cfg(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn leave_n_out_honors_explicit_lists() {
        let ds = grouped(6, 2, 2);
        let config = SplitConfig {
            val_subjects: Some(vec!["s1".to_string(), "s3".to_string()]),
            test_subjects: Some(vec!["s0".to_string()]),
            ..cfg(99)
        };
        let split = leave_n_out(&ds, &config).unwrap();
        assert_eq!(split.seed, None);
        let subjects = |set: &[usize]| -> BTreeSet<usize> {
            set.iter().map(|&i| ds.samples[i].subject).collect()
        };
        assert_eq!(subjects(&split.val), BTreeSet::from([1, 3]));
        assert_eq!(subjects(&split.test), BTreeSet::from([0]));
        assert_eq!(subjects(&split.train), BTreeSet::from([2, 4, 5]));
    }

    #[test]
    fn leave_n_out_errors() {
        let ds = grouped(2, 3, 2);
        let config = SplitConfig {
            n_val_subjects: Some(1),
            n_test_subjects: Some(1),
            ..cfg(0)
        };
        assert_eq!(
            leave_n_out(&ds, &config),
            Err(SplitError::TooFewSubjects { n_subjects: 2, n_holdout: 2 })
        );

        let ds3 = grouped(3, 3, 2);
        // floor(0.2 * 3) = 0 test subjects.
        assert_eq!(
            leave_n_out(&ds3, &cfg(0)),
            Err(SplitError::EmptySubjectSet { set: "test" })
        );

        let unknown = SplitConfig {
            test_subjects: Some(vec!["nobody".to_string()]),
            ..cfg(0)
        };
        assert_eq!(
            leave_n_out(&ds3, &unknown),
            Err(SplitError::UnknownSubject("nobody".to_string()))
        );

        let overlapping = SplitConfig {
            val_subjects: Some(vec!["s0".to_string()]),
            test_subjects: Some(vec!["s0".to_string()]),
            ..cfg(0)
        };
        assert_eq!(
            leave_n_out(&ds3, &overlapping),
            Err(SplitError::OverlappingHoldout("s0".to_string()))
        );
    }

    #[test]
    fn stratified_holdout_covers_every_class() {
        // 20 subjects, 3 classes, subject i -> class i mod 3.
        let ds = grouped(20, 5, 3);
        let config = SplitConfig {
            n_val_subjects: Some(4),
            n_test_subjects: Some(4),
            stratify_by_label: true,
            ..cfg(41)
        };
        let split = leave_n_out(&ds, &config).unwrap();
        for set in [&split.train, &split.val, &split.test] {
            let labels: BTreeSet<usize> = set.iter().map(|&i| ds.samples[i].label).collect();
            assert_eq!(labels, BTreeSet::from([0, 1, 2]), "set lacks a class");
        }
        assert!(verify_split(&ds, &split).passed());
    }

    #[test]
    fn loo_folds_partition_and_hold_out_each_subject() {
        let ds = grouped(4, 3, 2);
        let folds = leave_one_out(&ds).unwrap();
        assert_eq!(folds.len(), 4);
        for (fold, split) in folds.iter().enumerate() {
            assert!(split.val.is_empty());
            assert_eq!(split.seed, None);
            let test_subjects: BTreeSet<usize> =
                split.test.iter().map(|&i| ds.samples[i].subject).collect();
            assert_eq!(test_subjects, BTreeSet::from([fold]));
            assert_partition(&ds, split);
            assert!(verify_split(&ds, split).passed());
        }
    }

    #[test]
    fn loo_requires_two_subjects() {
        let ds = grouped(1, 4, 1);
        assert_eq!(
            leave_one_out(&ds),
            Err(SplitError::TooFewSubjects { n_subjects: 1, n_holdout: 1 })
        );
    }

    #[test]
    fn verify_flags_subject_overlap_under_exclusive_policy() {
        let ds = grouped(3, 2, 2);
        let mut split = leave_n_out(
            &ds,
            &SplitConfig { n_val_subjects: Some(1), n_test_subjects: Some(1), ..cfg(3) },
        )
        .unwrap();
        // Move one training sample into test: its subject now straddles sets.
        let moved = split.train.pop().unwrap();
        split.test.push(moved);
        let report = verify_split(&ds, &split);
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::SubjectInTrainAndEval));
    }

    #[test]
    fn verify_flags_broken_temporal_order() {
        let ds = grouped(1, 6, 1);
        let mut split = causal_subject_dependent(&ds, &cfg(0)).unwrap();
        assert!(verify_split(&ds, &split).passed());
        // Swap one train index with one test index.
        core::mem::swap(&mut split.train[0], &mut split.test[0]);
        split.train.sort_unstable();
        split.test.sort_unstable();
        let report = verify_split(&ds, &split);
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::TemporalOrderBroken));
    }

    #[test]
    fn verify_flags_index_overlap_and_out_of_range() {
        let ds = grouped(2, 2, 2);
        let split = Split {
            policy: SplitPolicy::MixedSample,
            seed: None,
            train: vec![0, 1],
            val: vec![1],
            test: vec![99],
        };
        let report = verify_split(&ds, &split);
        let kinds: Vec<ViolationKind> = report.violations.iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::IndexOverlap, ViolationKind::IndexOverlap]);
    }

    /// Windowed single-subject recording: overlapping windows land in both
    /// train and test under a mixed split, and the verifier counts exactly
    /// the intersecting pairs.
    #[test]
    fn verify_counts_leaking_window_pairs() {
        let rec = Matrix::from_fn(100, 1, |t, _| t as f64);
        let labels = vec![0usize; 100];
        let samples = segment_recording(&rec, 0, &labels, Some("r0"), 20, 0.8).unwrap();
        let meta = crate::data::testutil::meta(20, 1, 1, 1);
        let ds = Dataset { meta, samples };
        let split = mixed_subject_dependent(&ds, &cfg(41)).unwrap();
        let report = verify_split(&ds, &split);

        // Brute-force recount.
        let mut expect = 0u64;
        for &a in &split.train {
            for &b in &split.test {
                let (s1, e1) = ds.samples[a].span.unwrap();
                let (s2, e2) = ds.samples[b].span.unwrap();
                if s1.max(s2) < e1.min(e2) {
                    expect += 1;
                }
            }
        }
        assert!(expect > 0, "80% overlap must produce leaking pairs");
        assert_eq!(report.leak_pair_count, expect);
        // Informational only under a sample-level policy.
        assert!(report.passed());
    }

    #[test]
    fn non_overlapping_windows_do_not_leak() {
        let rec = Matrix::from_fn(100, 1, |t, _| t as f64);
        let labels = vec![0usize; 100];
        let samples = segment_recording(&rec, 0, &labels, Some("r0"), 20, 0.0).unwrap();
        let meta = crate::data::testutil::meta(20, 1, 1, 1);
        let ds = Dataset { meta, samples };
        let split = mixed_subject_dependent(&ds, &cfg(41)).unwrap();
        assert_eq!(verify_split(&ds, &split).leak_pair_count, 0);
    }

    #[test]
    fn missing_spans_are_noted_not_flagged() {
        let mut ds = grouped(1, 4, 1);
        for s in ds.samples.iter_mut() {
            s.recording = Some("r0".to_string());
        }
        let config = SplitConfig { fractions: (0.5, 0.0, 0.5), ..cfg(0) };
        let split = mixed_subject_dependent(&ds, &config).unwrap();
        let report = verify_split(&ds, &split);
        assert!(report.passed());
        assert_eq!(report.leak_pair_count, 0);
        assert_eq!(report.notes.len(), 1);
        assert!(report.notes[0].contains("span metadata"));
    }

    #[test]
    fn exclusive_policy_escalates_span_overlap() {
        // Two subjects sharing one recording id (e.g. a paired session);
        // spans overlap across the subject boundary.
        let rec = Matrix::from_fn(40, 1, |t, _| t as f64);
        let labels = vec![0usize; 40];
        let mut samples = segment_recording(&rec, 0, &labels, Some("shared"), 20, 0.8).unwrap();
        let mut other = segment_recording(&rec, 1, &labels, Some("shared"), 20, 0.8).unwrap();
        // Keep temporal positions unique per (subject, recording): already so.
        samples.append(&mut other);
        let meta = crate::data::testutil::meta(20, 1, 1, 2);
        let ds = Dataset { meta, samples };
        let config = SplitConfig {
            n_val_subjects: Some(0),
            n_test_subjects: Some(1),
            ..cfg(5)
        };
        let split = leave_n_out(&ds, &config).unwrap();
        let report = verify_split(&ds, &split);
        assert!(report.leak_pair_count > 0);
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::SpanOverlapAcrossSets));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        // Subjects need at least 5 samples so the per-subject 60/20/20
        // causal carve leaves every part non-empty.
        fn arb_grouped() -> impl Strategy<Value = Dataset> {
            (2usize..6, 5usize..12, 1usize..4).prop_map(|(s, m, k)| grouped(s, m, k))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn mixed_split_partitions(ds in arb_grouped(), seed in 0u64..1000) {
                let split = mixed_subject_dependent(&ds, &cfg(seed)).unwrap();
                assert_partition(&ds, &split);
                prop_assert!(verify_split(&ds, &split).passed());
            }

            #[test]
            fn causal_split_orders_time(ds in arb_grouped(), seed in 0u64..1000) {
                let split = causal_subject_dependent(&ds, &cfg(seed)).unwrap();
                assert_partition(&ds, &split);
                prop_assert!(verify_split(&ds, &split).passed());
            }

            #[test]
            fn lno_split_is_subject_exclusive(ds in arb_grouped(), seed in 0u64..1000) {
                let config = SplitConfig {
                    n_val_subjects: Some(0),
                    n_test_subjects: Some(1),
                    seed,
                    ..SplitConfig::default()
                };
                let split = leave_n_out(&ds, &config).unwrap();
                assert_partition(&ds, &split);
                prop_assert!(verify_split(&ds, &split).passed());
            }

            #[test]
            fn loo_folds_hold_invariants(ds in arb_grouped()) {
                for split in leave_one_out(&ds).unwrap() {
                    assert_partition(&ds, &split);
                    prop_assert!(verify_split(&ds, &split).passed());
                }
            }
        }
    }

    /// Sample-level random assignment routinely places the same subject in
    /// both train and test; this is the leakage the mixed split exists to
    /// demonstrate.
    #[test]
    fn mixed_split_routinely_mixes_subjects_across_sets() {
        let ds = grouped(5, 10, 2);
        let mut mixed_seeds = 0;
        for seed in 0..100 {
            let split = mixed_subject_dependent(&ds, &cfg(seed)).unwrap();
            let train_subjects: BTreeSet<usize> =
                split.train.iter().map(|&i| ds.samples[i].subject).collect();
            let test_subjects: BTreeSet<usize> =
                split.test.iter().map(|&i| ds.samples[i].subject).collect();
            if train_subjects.intersection(&test_subjects).next().is_some() {
                mixed_seeds += 1;
            }
        }
        assert_eq!(mixed_seeds, 100);
    }
}
