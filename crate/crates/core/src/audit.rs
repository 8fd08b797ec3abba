//! Audit orchestration: run an evaluation battery and derive leakage
//! diagnostics.
//!
//! A full audit runs a battery of [`EvaluationSetup`]s across several seeds,
//! trains the reference MLP in each run, and condenses the scores into a
//! few diagnostics:
//!
//! - *subject-shortcut reliance* (SSR): how much of a subject-dependent
//!   score survives when per-subject random labels destroy the class
//!   signal, normalized to chance — near 1 means the score is carried by
//!   subject identity, not by the class;
//! - *generalization gap*: subject-dependent minus subject-independent
//!   macro-F1;
//! - *subject identifiability*: macro-F1 of subject discrimination;
//! - *random-label subject-independent sanity*: that setup must sit at
//!   chance, or something is wrong with the pipeline itself.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    classify_dataset_kind, validate_dataset, DataError, Dataset, DatasetKind,
};
use crate::metrics::{
    self, chance_level, summarize_runs, ChanceMetric, MetricError, MetricSummary,
};
use crate::model::{self, ModelError, ModelSelection, TrainConfig};
use crate::protocol::{
    build_setup, EvaluationSetup, ProtocolError, RelabelMode, RelabelRecord,
};
use crate::rng::PRNG_ALGORITHM;
use crate::split::{verify_split, SplitConfig, SplitReport};

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("dataset failed validation with {count} violations; first: {first}")]
    InvalidDataset { count: usize, first: String },
    #[error("full audit requires multi-subject data (dataset is {kind})")]
    UnsupportedKind { kind: DatasetKind },
    #[error("no seeds configured")]
    NoSeeds,
    #[error("battery is empty")]
    EmptyBattery,
    #[error("run count mismatch for {setup}: {got} outcomes for {expected} seeds")]
    OutcomeCountMismatch { setup: EvaluationSetup, expected: usize, got: usize },
    #[error("split verification failed for {setup} seed {seed}: {count} violations; first: {first}")]
    LeakySplit { setup: EvaluationSetup, seed: u64, count: usize, first: String },
    #[error("{setup} seed {seed}: {source}")]
    Protocol { setup: EvaluationSetup, seed: u64, source: ProtocolError },
    #[error("{setup} seed {seed}: {source}")]
    Model { setup: EvaluationSetup, seed: u64, source: ModelError },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Thresholds and estimation knobs for [`LeakageDiagnostics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    /// SSR is 0 when the subject-dependent score exceeds chance by no more
    /// than this (nothing to attribute).
    pub ssr_denominator_floor: f64,
    /// Allowed |score - chance| for the random-label subject-independent
    /// sanity check.
    pub rindep_tolerance: f64,
    /// SSR at or above this is moderate reliance.
    pub moderate_ssr: f64,
    /// SSR at or above this is severe reliance.
    pub severe_ssr: f64,
    /// Monte-Carlo draws for the macro-F1 chance level.
    pub chance_mc_draws: usize,
    pub chance_seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            ssr_denominator_floor: 0.01,
            rindep_tolerance: 0.05,
            moderate_ssr: 0.3,
            severe_ssr: 0.8,
            chance_mc_draws: 200,
            chance_seed: 0,
        }
    }
}

/// Everything an audit runs with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Setups to run; `None` picks the default battery for the dataset
    /// kind (see [`plan_battery`]).
    pub battery: Option<Vec<EvaluationSetup>>,
    pub split: SplitConfig,
    pub train: TrainConfig,
    /// One training run per seed per setup.
    pub seeds: Vec<u64>,
    pub relabel_mode: RelabelMode,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            battery: None,
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            seeds: alloc::vec![41, 42, 43, 44, 45],
            relabel_mode: RelabelMode::Assign,
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

/// Scores of one setup across all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupResult {
    pub setup: EvaluationSetup,
    pub seeds: Vec<u64>,
    pub accuracy: MetricSummary,
    pub macro_f1: MetricSummary,
    /// One record per seed, aligned with `seeds`.
    pub relabel_records: Vec<RelabelRecord>,
    pub split_reports: Vec<SplitReport>,
}

/// One (setup, seed) training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub relabel: RelabelRecord,
    pub split_report: SplitReport,
}

/// How strongly the audited scores lean on subject identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    None,
    Moderate,
    Severe,
}

impl core::fmt::Display for Severity {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Severity::None => "none",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        })
    }
}

/// Outcome of the random-label subject-independent sanity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RIndepSanity {
    /// Macro-F1 minus the macro-F1 chance level.
    pub delta: f64,
    /// True when |delta| is within the configured tolerance.
    pub pass: bool,
}

/// Derived leakage diagnostics. Fields are `None` when the battery did not
/// include the setups they need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageDiagnostics {
    /// Analytic 1/k accuracy of a uniform predictor.
    pub chance_accuracy: f64,
    /// Monte-Carlo macro-F1 of a uniform predictor against the dataset's
    /// label composition.
    pub chance_macro_f1: f64,
    /// Subject-dependent minus subject-independent macro-F1.
    pub generalization_gap: Option<f64>,
    /// Subject-shortcut reliance in [0, 1]; see [`diagnostics_from_means`].
    pub ssr: Option<f64>,
    pub severity: Option<Severity>,
    /// Macro-F1 of the subject-discrimination setup.
    pub subject_identifiability: Option<f64>,
    pub rindep_sanity: Option<RIndepSanity>,
}

/// Mean macro-F1 per setup, the inputs diagnostics are derived from.
/// All on the same scale (fractions or percents — the diagnostics are
/// scale-free as long as the chance levels match).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiagnosticsInputs {
    pub f1_sub_dep: Option<f64>,
    pub f1_r_sub_dep: Option<f64>,
    pub f1_sub_indep: Option<f64>,
    pub f1_r_sub_indep: Option<f64>,
    pub f1_sub_disc: Option<f64>,
    pub chance_accuracy: f64,
    pub chance_macro_f1: f64,
}

/// Pure diagnostics arithmetic.
///
/// SSR is `(F1_random-label-dep - chance) / (F1_sub-dep - chance)` clamped
/// to [0, 1]; when the denominator is at or below the configured floor the
/// subject-dependent score itself is at chance and SSR is defined as 0.
pub fn diagnostics_from_means(
    inputs: &DiagnosticsInputs,
    config: &DiagnosticsConfig,
) -> LeakageDiagnostics {
    let chance = inputs.chance_macro_f1;

    let ssr = match (inputs.f1_sub_dep, inputs.f1_r_sub_dep) {
        (Some(dep), Some(rdep)) => {
            let denom = dep - chance;
            Some(if denom <= config.ssr_denominator_floor {
                0.0
            } else {
                ((rdep - chance) / denom).clamp(0.0, 1.0)
            })
        }
        _ => None,
    };
    let severity = ssr.map(|s| {
        if s >= config.severe_ssr {
            Severity::Severe
        } else if s >= config.moderate_ssr {
            Severity::Moderate
        } else {
            Severity::None
        }
    });
    let generalization_gap = match (inputs.f1_sub_dep, inputs.f1_sub_indep) {
        (Some(dep), Some(indep)) => Some(dep - indep),
        _ => None,
    };
    let rindep_sanity = inputs.f1_r_sub_indep.map(|f1| {
        let delta = f1 - chance;
        RIndepSanity { delta, pass: delta.abs() <= config.rindep_tolerance }
    });

    LeakageDiagnostics {
        chance_accuracy: inputs.chance_accuracy,
        chance_macro_f1: chance,
        generalization_gap,
        ssr,
        severity,
        subject_identifiability: inputs.f1_sub_disc,
        rindep_sanity,
    }
}

/// Derives diagnostics from finished setup results, with chance levels
/// computed for the dataset the battery ran on.
pub fn compute_diagnostics(
    dataset: &Dataset,
    results: &[SetupResult],
    config: &DiagnosticsConfig,
) -> Result<LeakageDiagnostics, AuditError> {
    let k = dataset.meta.n_classes();
    let labels = dataset.labels();
    let chance_accuracy = chance_level(k, ChanceMetric::Accuracy, &labels, 0, 0)?;
    let chance_macro_f1 = chance_level(
        k,
        ChanceMetric::MacroF1,
        &labels,
        config.chance_mc_draws,
        config.chance_seed,
    )?;

    let mut inputs = DiagnosticsInputs {
        chance_accuracy,
        chance_macro_f1,
        ..DiagnosticsInputs::default()
    };
    for result in results {
        let mean = Some(result.macro_f1.mean);
        match result.setup {
            EvaluationSetup::SubDepMixed => inputs.f1_sub_dep = mean,
            EvaluationSetup::SubIndepLno => inputs.f1_sub_indep = mean,
            EvaluationSetup::SubDisc => inputs.f1_sub_disc = mean,
            EvaluationSetup::RSubDep => inputs.f1_r_sub_dep = mean,
            EvaluationSetup::RSubIndep => inputs.f1_r_sub_indep = mean,
            EvaluationSetup::SubDepCausal | EvaluationSetup::SubIndepLoo => {}
        }
    }
    Ok(diagnostics_from_means(&inputs, config))
}

/// Fixed conventions recorded in every report so numbers can be
/// reinterpreted later without guessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub spread: String,
    pub macro_f1: String,
    pub chance_macro_f1: String,
    pub model_selection: String,
    pub relabel_mode: RelabelMode,
}

/// Reproducibility context for a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub tool_version: String,
    pub prng: String,
    pub seeds: Vec<u64>,
    pub conventions: Conventions,
}

/// Dataset facts the report refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub kind: DatasetKind,
    pub n_samples: usize,
    pub n_subjects: usize,
    pub n_classes: usize,
    pub n_timestamps: usize,
    pub n_channels: usize,
    pub class_names: Vec<String>,
    pub time_unit: String,
}

/// The complete audit output; serializes to the report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub dataset: DatasetSummary,
    pub battery: Vec<EvaluationSetup>,
    pub setups: Vec<SetupResult>,
    pub diagnostics: LeakageDiagnostics,
    pub split_config: SplitConfig,
    pub train_config: TrainConfig,
    pub diagnostics_config: DiagnosticsConfig,
    pub environment: Environment,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Default battery per dataset kind. Single-label cohorts get the full
/// leakage battery (random-label setups are only defined there); multi-label
/// cohorts get the temporal comparison instead. The causal and
/// leave-one-subject-out variants beyond these defaults are opt-in via
/// [`AuditConfig::battery`].
pub fn plan_battery(kind: DatasetKind) -> Result<Vec<EvaluationSetup>, AuditError> {
    match kind {
        DatasetKind::TypeIII => Ok(alloc::vec![
            EvaluationSetup::SubDepMixed,
            EvaluationSetup::SubIndepLno,
            EvaluationSetup::SubDisc,
            EvaluationSetup::RSubDep,
            EvaluationSetup::RSubIndep,
        ]),
        DatasetKind::TypeII => Ok(alloc::vec![
            EvaluationSetup::SubDepMixed,
            EvaluationSetup::SubDepCausal,
            EvaluationSetup::SubIndepLno,
        ]),
        kind => Err(AuditError::UnsupportedKind { kind }),
    }
}

/// Validates the dataset and resolves the effective battery and config for
/// it: single-label cohorts get label-stratified subject holdouts.
pub fn resolve_audit(
    dataset: &Dataset,
    config: &AuditConfig,
) -> Result<(DatasetKind, Vec<EvaluationSetup>, AuditConfig), AuditError> {
    let violations = validate_dataset(dataset);
    if !violations.is_empty() {
        return Err(AuditError::InvalidDataset {
            count: violations.len(),
            first: format!("{} ({})", violations[0].rule, violations[0].detail),
        });
    }
    let kind = classify_dataset_kind(dataset)?;
    if matches!(kind, DatasetKind::TypeI | DatasetKind::Degenerate) {
        return Err(AuditError::UnsupportedKind { kind });
    }
    if config.seeds.is_empty() {
        return Err(AuditError::NoSeeds);
    }
    let battery = match &config.battery {
        Some(setups) if setups.is_empty() => return Err(AuditError::EmptyBattery),
        Some(setups) => setups.clone(),
        None => plan_battery(kind)?,
    };
    let mut effective = config.clone();
    if kind == DatasetKind::TypeIII {
        effective.split.stratify_by_label = true;
    }
    Ok((kind, battery, effective))
}

/// Executes one (setup, seed) run: build the setup, verify the split hard
/// (any violation aborts), train, and score the test set.
pub fn execute_run(
    dataset: &Dataset,
    setup: EvaluationSetup,
    config: &AuditConfig,
    seed: u64,
) -> Result<RunOutcome, AuditError> {
    let built = build_setup(setup, dataset, &config.split, seed, config.relabel_mode)
        .map_err(|source| AuditError::Protocol { setup, seed, source })?;
    let split_report = verify_split(&built.dataset, &built.split);
    if !split_report.passed() {
        return Err(AuditError::LeakySplit {
            setup,
            seed,
            count: split_report.violations.len(),
            first: split_report.violations[0].detail.clone(),
        });
    }

    let mut train_config = TrainConfig { seed, ..config.train.clone() };
    if built.split.val.is_empty() {
        train_config.selection = ModelSelection::LastEpoch;
    }
    let model = model::train(&built.dataset, &built.split, &train_config)
        .map_err(|source| AuditError::Model { setup, seed, source })?;
    let (pred, _) = model::predict(&model, &built.dataset, &built.split.test)
        .map_err(|source| AuditError::Model { setup, seed, source })?;
    let truth: Vec<usize> = built
        .split
        .test
        .iter()
        .map(|&i| built.dataset.samples[i].label)
        .collect();
    let k = built.dataset.meta.n_classes();

    Ok(RunOutcome {
        seed,
        accuracy: metrics::accuracy(k, &truth, &pred)?,
        macro_f1: metrics::macro_f1(k, &truth, &pred)?,
        relabel: built.relabel,
        split_report,
    })
}

/// Folds per-seed outcomes into a [`SetupResult`]; `outcomes` must be
/// aligned with `seeds`.
pub fn assemble_setup_result(
    setup: EvaluationSetup,
    seeds: &[u64],
    outcomes: Vec<RunOutcome>,
) -> Result<SetupResult, AuditError> {
    if outcomes.len() != seeds.len() {
        return Err(AuditError::OutcomeCountMismatch {
            setup,
            expected: seeds.len(),
            got: outcomes.len(),
        });
    }
    let accuracy = summarize_runs(&outcomes.iter().map(|o| o.accuracy).collect::<Vec<_>>())?;
    let macro_f1 = summarize_runs(&outcomes.iter().map(|o| o.macro_f1).collect::<Vec<_>>())?;
    Ok(SetupResult {
        setup,
        seeds: seeds.to_vec(),
        accuracy,
        macro_f1,
        relabel_records: outcomes.iter().map(|o| o.relabel.clone()).collect(),
        split_reports: outcomes.into_iter().map(|o| o.split_report).collect(),
    })
}

/// Runs one setup across all configured seeds.
pub fn run_setup_experiment(
    dataset: &Dataset,
    setup: EvaluationSetup,
    config: &AuditConfig,
) -> Result<SetupResult, AuditError> {
    if config.seeds.is_empty() {
        return Err(AuditError::NoSeeds);
    }
    let outcomes = config
        .seeds
        .iter()
        .map(|&seed| execute_run(dataset, setup, config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_setup_result(setup, &config.seeds, outcomes)
}

/// Builds the final report from finished setup results.
pub fn assemble_report(
    dataset: &Dataset,
    kind: DatasetKind,
    battery: Vec<EvaluationSetup>,
    setups: Vec<SetupResult>,
    config: &AuditConfig,
) -> Result<AuditReport, AuditError> {
    let diagnostics = compute_diagnostics(dataset, &setups, &config.diagnostics)?;
    Ok(AuditReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: DatasetSummary {
            name: dataset.meta.name.clone(),
            kind,
            n_samples: dataset.n_samples(),
            n_subjects: dataset.meta.n_subjects(),
            n_classes: dataset.meta.n_classes(),
            n_timestamps: dataset.meta.n_timestamps,
            n_channels: dataset.meta.n_channels,
            class_names: dataset.meta.class_names.clone(),
            time_unit: dataset.meta.time_unit.clone(),
        },
        battery,
        setups,
        diagnostics,
        split_config: config.split.clone(),
        train_config: config.train.clone(),
        diagnostics_config: config.diagnostics.clone(),
        environment: Environment {
            tool_version: String::from(env!("CARGO_PKG_VERSION")),
            prng: String::from(PRNG_ALGORITHM),
            seeds: config.seeds.clone(),
            conventions: Conventions {
                spread: String::from(
                    "sample standard deviation (n-1 denominator); 0 for a single run",
                ),
                macro_f1: String::from(
                    "unweighted mean of per-class F1 over all declared classes; a class with no true and no predicted samples scores 0",
                ),
                chance_macro_f1: String::from(
                    "Monte-Carlo mean macro-F1 of a uniform random predictor against the full dataset labels",
                ),
                model_selection: String::from(
                    "epoch with best validation macro-F1, earliest on ties; final epoch when the split has no validation set",
                ),
                relabel_mode: config.relabel_mode,
            },
        },
    })
}

/// Runs the whole battery serially and assembles the report.
pub fn run_full_audit(dataset: &Dataset, config: &AuditConfig) -> Result<AuditReport, AuditError> {
    let (kind, battery, effective) = resolve_audit(dataset, config)?;
    let setups = battery
        .iter()
        .map(|&setup| run_setup_experiment(dataset, setup, &effective))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_report(dataset, kind, battery, setups, &effective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::testutil::dataset;
    use crate::synth::{generate_type2, generate_type3, SynthType2Config, SynthType3Config};

    fn tiny_type3() -> Dataset {
        generate_type3(&SynthType3Config {
            n_subjects: 6,
            n_classes: 2,
            samples_per_subject: 8,
            n_timestamps: 8,
            n_channels: 1,
            ..SynthType3Config::default()
        })
        .unwrap()
        .0
    }

    fn fast_config() -> AuditConfig {
        AuditConfig {
            split: SplitConfig {
                n_val_subjects: Some(1),
                n_test_subjects: Some(1),
                ..SplitConfig::default()
            },
            train: TrainConfig {
                hidden_width: 4,
                epochs: 4,
                batch_size: 8,
                ..TrainConfig::default()
            },
            seeds: alloc::vec![41, 42],
            ..AuditConfig::default()
        }
    }

    #[test]
    fn battery_defaults_follow_dataset_kind() {
        assert_eq!(
            plan_battery(DatasetKind::TypeIII).unwrap(),
            alloc::vec![
                EvaluationSetup::SubDepMixed,
                EvaluationSetup::SubIndepLno,
                EvaluationSetup::SubDisc,
                EvaluationSetup::RSubDep,
                EvaluationSetup::RSubIndep,
            ]
        );
        assert_eq!(
            plan_battery(DatasetKind::TypeII).unwrap(),
            alloc::vec![
                EvaluationSetup::SubDepMixed,
                EvaluationSetup::SubDepCausal,
                EvaluationSetup::SubIndepLno,
            ]
        );
        assert_eq!(
            plan_battery(DatasetKind::TypeI).unwrap_err(),
            AuditError::UnsupportedKind { kind: DatasetKind::TypeI }
        );
    }

    /// Worked diagnostics on percent-scale inputs.
    #[test]
    fn ssr_matches_hand_computation() {
        let config = DiagnosticsConfig::default();
        // Sub-dep 97.56, random-label dep 97.12, chance 33.33.
        let d = diagnostics_from_means(
            &DiagnosticsInputs {
                f1_sub_dep: Some(97.56),
                f1_r_sub_dep: Some(97.12),
                f1_sub_indep: Some(48.72),
                chance_accuracy: 33.33,
                chance_macro_f1: 33.33,
                ..DiagnosticsInputs::default()
            },
            &config,
        );
        let ssr = d.ssr.unwrap();
        assert!((ssr - 0.993).abs() < 0.001, "ssr {ssr}");
        assert_eq!(d.severity, Some(Severity::Severe));
        let gap = d.generalization_gap.unwrap();
        assert!((gap - 48.84).abs() < 1e-9, "gap {gap}");

        // Sub-dep 88.02, random-label dep 71.15, chance 20.0.
        let d = diagnostics_from_means(
            &DiagnosticsInputs {
                f1_sub_dep: Some(88.02),
                f1_r_sub_dep: Some(71.15),
                chance_accuracy: 20.0,
                chance_macro_f1: 20.0,
                ..DiagnosticsInputs::default()
            },
            &config,
        );
        let ssr = d.ssr.unwrap();
        assert!((ssr - 0.752).abs() < 0.001, "ssr {ssr}");
        assert_eq!(d.severity, Some(Severity::Moderate));
    }

    #[test]
    fn ssr_floors_and_clamps() {
        let config = DiagnosticsConfig::default();
        let base = DiagnosticsInputs {
            chance_macro_f1: 0.5,
            ..DiagnosticsInputs::default()
        };
        // Denominator at chance: defined as zero.
        let d = diagnostics_from_means(
            &DiagnosticsInputs {
                f1_sub_dep: Some(0.505),
                f1_r_sub_dep: Some(0.9),
                ..base
            },
            &config,
        );
        assert_eq!(d.ssr, Some(0.0));
        assert_eq!(d.severity, Some(Severity::None));
        // Random-label score above the honest score: clamped to 1.
        let d = diagnostics_from_means(
            &DiagnosticsInputs {
                f1_sub_dep: Some(0.8),
                f1_r_sub_dep: Some(0.95),
                ..base
            },
            &config,
        );
        assert_eq!(d.ssr, Some(1.0));
        // Random-label score below chance: clamped to 0.
        let d = diagnostics_from_means(
            &DiagnosticsInputs {
                f1_sub_dep: Some(0.8),
                f1_r_sub_dep: Some(0.4),
                ..base
            },
            &config,
        );
        assert_eq!(d.ssr, Some(0.0));
        // Missing setups leave fields empty.
        let d = diagnostics_from_means(&base, &config);
        assert_eq!(d.ssr, None);
        assert_eq!(d.severity, None);
        assert_eq!(d.generalization_gap, None);
        assert_eq!(d.rindep_sanity, None);
    }

    #[test]
    fn severity_thresholds_are_inclusive() {
        let config = DiagnosticsConfig::default();
        let with_ssr = |ssr_target: f64| {
            // chance 0, denom 1.0 -> ssr == f1_r_sub_dep.
            diagnostics_from_means(
                &DiagnosticsInputs {
                    f1_sub_dep: Some(1.0),
                    f1_r_sub_dep: Some(ssr_target),
                    ..DiagnosticsInputs::default()
                },
                &config,
            )
            .severity
            .unwrap()
        };
        assert_eq!(with_ssr(0.8), Severity::Severe);
        assert_eq!(with_ssr(0.79), Severity::Moderate);
        assert_eq!(with_ssr(0.3), Severity::Moderate);
        assert_eq!(with_ssr(0.29), Severity::None);
    }

    #[test]
    fn rindep_sanity_tolerance() {
        let config = DiagnosticsConfig::default();
        let with_f1 = |f1: f64| {
            diagnostics_from_means(
                &DiagnosticsInputs {
                    f1_r_sub_indep: Some(f1),
                    chance_macro_f1: 0.5,
                    ..DiagnosticsInputs::default()
                },
                &config,
            )
            .rindep_sanity
            .unwrap()
        };
        assert!(with_f1(0.54).pass);
        assert!(with_f1(0.46).pass);
        assert!(!with_f1(0.56).pass);
        let sanity = with_f1(0.58);
        assert!((sanity.delta - 0.08).abs() < 1e-12);
        assert!(!sanity.pass);
        // The tolerance itself is inclusive: a delta bit-equal to it passes.
        let boundary = diagnostics_from_means(
            &DiagnosticsInputs {
                f1_r_sub_indep: Some(0.05),
                chance_macro_f1: 0.0,
                ..DiagnosticsInputs::default()
            },
            &config,
        )
        .rindep_sanity
        .unwrap();
        assert!(boundary.pass);
    }

    #[test]
    fn setup_experiment_summarizes_across_seeds() {
        let ds = tiny_type3();
        let config = fast_config();
        let result =
            run_setup_experiment(&ds, EvaluationSetup::SubDepMixed, &config).unwrap();
        assert_eq!(result.seeds, alloc::vec![41, 42]);
        assert_eq!(result.accuracy.values.len(), 2);
        assert_eq!(result.relabel_records.len(), 2);
        assert_eq!(result.split_reports.len(), 2);
        let mean = result.macro_f1.values.iter().sum::<f64>() / 2.0;
        assert!((result.macro_f1.mean - mean).abs() < 1e-15);
        // Determinism.
        let again =
            run_setup_experiment(&ds, EvaluationSetup::SubDepMixed, &config).unwrap();
        assert_eq!(result, again);
    }

    #[test]
    fn full_audit_on_single_label_cohort_fills_all_diagnostics() {
        let ds = tiny_type3();
        let config = fast_config();
        let report = run_full_audit(&ds, &config).unwrap();
        assert_eq!(report.schema_version, REPORT_SCHEMA_VERSION);
        assert_eq!(report.battery.len(), 5);
        assert_eq!(report.setups.len(), 5);
        assert_eq!(report.dataset.kind, DatasetKind::TypeIII);
        assert!(report.diagnostics.ssr.is_some());
        assert!(report.diagnostics.severity.is_some());
        assert!(report.diagnostics.generalization_gap.is_some());
        assert!(report.diagnostics.subject_identifiability.is_some());
        assert!(report.diagnostics.rindep_sanity.is_some());
        assert!((report.diagnostics.chance_accuracy - 0.5).abs() < 1e-12);
        // Stratification was applied to the effective config.
        assert!(report.split_config.stratify_by_label);

        let again = run_full_audit(&ds, &config).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn full_audit_on_multi_label_cohort_skips_random_label_diagnostics() {
        let (ds, _) = generate_type2(&SynthType2Config {
            n_subjects: 4,
            n_classes: 2,
            segments_per_subject: 4,
            segment_len: 10,
            window_len: 5,
            overlap: 0.0,
            n_channels: 1,
            ..SynthType2Config::default()
        })
        .unwrap();
        let config = fast_config();
        let report = run_full_audit(&ds, &config).unwrap();
        assert_eq!(
            report.battery,
            alloc::vec![
                EvaluationSetup::SubDepMixed,
                EvaluationSetup::SubDepCausal,
                EvaluationSetup::SubIndepLno,
            ]
        );
        assert!(report.diagnostics.ssr.is_none());
        assert!(report.diagnostics.rindep_sanity.is_none());
        assert!(report.diagnostics.generalization_gap.is_some());
        assert!(!report.split_config.stratify_by_label);
    }

    #[test]
    fn full_audit_rejects_single_subject_data() {
        let ds = dataset(2, 1, 2, 1, &[(0, 0, 0), (0, 1, 1)]);
        assert_eq!(
            run_full_audit(&ds, &fast_config()).unwrap_err(),
            AuditError::UnsupportedKind { kind: DatasetKind::TypeI }
        );
    }

    #[test]
    fn full_audit_rejects_invalid_dataset() {
        let mut ds = tiny_type3();
        ds.samples[0].label = 99;
        let err = run_full_audit(&ds, &fast_config()).unwrap_err();
        assert!(matches!(err, AuditError::InvalidDataset { count: 1, .. }));
    }

    #[test]
    fn audit_requires_seeds() {
        let ds = tiny_type3();
        let config = AuditConfig { seeds: alloc::vec![], ..fast_config() };
        assert_eq!(run_full_audit(&ds, &config).unwrap_err(), AuditError::NoSeeds);
    }

    #[test]
    fn explicit_battery_overrides_default() {
        let ds = tiny_type3();
        let config = AuditConfig {
            battery: Some(alloc::vec![EvaluationSetup::SubIndepLoo]),
            seeds: alloc::vec![41],
            ..fast_config()
        };
        let report = run_full_audit(&ds, &config).unwrap();
        assert_eq!(report.setups.len(), 1);
        assert_eq!(report.setups[0].setup, EvaluationSetup::SubIndepLoo);
        // Leave-one-out has no validation set, so every other diagnostic
        // input is missing.
        assert_eq!(report.diagnostics.ssr, None);

        let empty = AuditConfig { battery: Some(alloc::vec![]), ..fast_config() };
        assert_eq!(run_full_audit(&ds, &empty).unwrap_err(), AuditError::EmptyBattery);
    }

    #[test]
    fn parallel_style_assembly_matches_serial_run() {
        let ds = tiny_type3();
        let config = fast_config();
        let (kind, battery, effective) = resolve_audit(&ds, &config).unwrap();
        // Simulate the out-of-order execution a thread pool would produce:
        // run all (setup, seed) pairs, then assemble in deterministic order.
        let mut all: Vec<(usize, RunOutcome)> = Vec::new();
        for (s, &setup) in battery.iter().enumerate() {
            for &seed in effective.seeds.iter().rev() {
                all.push((s, execute_run(&ds, setup, &effective, seed).unwrap()));
            }
        }
        let mut setups = Vec::new();
        for (s, &setup) in battery.iter().enumerate() {
            let mut outcomes: Vec<RunOutcome> = all
                .iter()
                .filter(|(i, _)| *i == s)
                .map(|(_, o)| o.clone())
                .collect();
            outcomes.sort_by_key(|o| {
                effective.seeds.iter().position(|&x| x == o.seed).unwrap()
            });
            setups.push(assemble_setup_result(setup, &effective.seeds, outcomes).unwrap());
        }
        let report =
            assemble_report(&ds, kind, battery, setups, &effective).unwrap();
        let serial = run_full_audit(&ds, &config).unwrap();
        assert_eq!(report, serial);
    }

    #[test]
    fn outcome_count_mismatch_is_detected() {
        let err = assemble_setup_result(
            EvaluationSetup::SubDepMixed,
            &[41, 42],
            alloc::vec![],
        )
        .unwrap_err();
        assert_eq!(
            err,
            AuditError::OutcomeCountMismatch {
                setup: EvaluationSetup::SubDepMixed,
                expected: 2,
                got: 0
            }
        );
    }
}
