//! Run configuration: a JSON file, command-line flags, or both (flags win).

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tsaudit_core::audit::{AuditConfig, DiagnosticsConfig};
use tsaudit_core::model::{ModelSelection, TrainConfig};
use tsaudit_core::protocol::{EvaluationSetup, RelabelMode};
use tsaudit_core::split::SplitConfig;
use tsaudit_core::synth::{SynthType2Config, SynthType3Config};

use crate::formats::DataFormat;
use crate::render::ReportFormat;
use crate::run::CliError;

pub const DEFAULT_SEEDS: [u64; 5] = [41, 42, 43, 44, 45];

/// Fully resolved configuration of one run. Unknown keys in the file are
/// rejected so typos cannot silently fall back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Load the dataset from this file. Exactly one dataset source may be
    /// set (this, `synth_type3` or `synth_type2`).
    pub dataset_path: Option<PathBuf>,
    /// Row encoding of `dataset_path`; inferred from the extension when
    /// absent. Also the output format of `gen`.
    pub dataset_format: Option<DataFormat>,
    pub synth_type3: Option<SynthType3Config>,
    pub synth_type2: Option<SynthType2Config>,
    /// Setup battery for `audit`; `None` picks the default for the dataset
    /// kind.
    pub battery: Option<Vec<EvaluationSetup>>,
    /// The single setup `split` and `eval` operate on.
    pub setup: Option<EvaluationSetup>,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub relabel_mode: RelabelMode,
    pub diagnostics: DiagnosticsConfig,
    pub report_formats: Vec<ReportFormat>,
    /// Worker threads for the audit fan-out; results are identical for any
    /// value.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_path: None,
            dataset_format: None,
            synth_type3: None,
            synth_type2: None,
            battery: None,
            setup: None,
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            relabel_mode: RelabelMode::Assign,
            diagnostics: DiagnosticsConfig::default(),
            report_formats: vec![ReportFormat::Json, ReportFormat::Markdown],
            jobs: 1,
        }
    }
}

/// The dataset source a config resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetSource {
    Path,
    Type3,
    Type2,
}

impl RunConfig {
    /// The audit-facing slice of the config.
    pub fn audit_config(&self) -> AuditConfig {
        AuditConfig {
            battery: self.battery.clone(),
            split: self.split.clone(),
            train: self.train.clone(),
            seeds: self.seeds.clone(),
            relabel_mode: self.relabel_mode,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Checks that exactly one dataset source is configured.
    pub fn dataset_source(&self) -> Result<DatasetSource, CliError> {
        let sources = [
            (self.dataset_path.is_some(), DatasetSource::Path),
            (self.synth_type3.is_some(), DatasetSource::Type3),
            (self.synth_type2.is_some(), DatasetSource::Type2),
        ];
        let mut found = None;
        for (set, source) in sources {
            if !set {
                continue;
            }
            if found.is_some() {
                return Err(CliError::config(
                    "conflicting dataset sources: set exactly one of dataset_path, synth_type3, synth_type2",
                ));
            }
            found = Some(source);
        }
        found.ok_or_else(|| {
            CliError::config(
                "no dataset source: set one of dataset_path, synth_type3, synth_type2",
            )
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds must be nonempty"));
        }
        if self.jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        if self.report_formats.is_empty() {
            return Err(CliError::config("report_formats must be nonempty"));
        }
        Ok(())
    }
}

/// Flags shared by every dataset-consuming subcommand; each mirrors a
/// config key and overrides it.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// JSON run-config file; flags override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dataset data file (manifest sidecar derived from this path).
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Data file encoding: jsonl or csv.
    #[arg(long, value_name = "FMT")]
    pub dataset_format: Option<String>,
    /// Inline single-label cohort spec, e.g. "S=20,K=3,m=200,T=64,C=4".
    #[arg(long, value_name = "SPEC")]
    pub synth_type3: Option<String>,
    /// Inline windowed-recording cohort spec, e.g.
    /// "S=8,K=2,segments=6,segment_len=50,window=10,overlap=0.8,C=3".
    #[arg(long, value_name = "SPEC")]
    pub synth_type2: Option<String>,
    /// Comma-separated setup battery for audit runs.
    #[arg(long, value_name = "LIST")]
    pub battery: Option<String>,
    /// Evaluation setup, e.g. sub-dep-mixed or sub-indep-lno.
    #[arg(long, value_name = "SETUP")]
    pub setup: Option<String>,
    /// Comma-separated training seeds.
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,
    /// Train/val/test fractions, e.g. "0.6,0.2,0.2".
    #[arg(long, value_name = "F,F,F")]
    pub fractions: Option<String>,
    /// Validation subjects held out by subject-exclusive splits.
    #[arg(long, value_name = "N")]
    pub n_val_subjects: Option<usize>,
    /// Test subjects held out by subject-exclusive splits.
    #[arg(long, value_name = "N")]
    pub n_test_subjects: Option<usize>,
    /// Explicit validation subject ids, comma-separated.
    #[arg(long, value_name = "LIST")]
    pub val_subjects: Option<String>,
    /// Explicit test subject ids, comma-separated.
    #[arg(long, value_name = "LIST")]
    pub test_subjects: Option<String>,
    /// Stratify subject holdouts by label.
    #[arg(long, value_name = "BOOL")]
    pub stratify_by_label: Option<bool>,
    /// Fold index for the leave-one-subject-out setup.
    #[arg(long, value_name = "N")]
    pub loo_fold: Option<usize>,
    /// Hidden width of both MLP layers.
    #[arg(long, value_name = "N")]
    pub hidden_width: Option<usize>,
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    #[arg(long, value_name = "LR")]
    pub learning_rate: Option<f64>,
    /// Checkpoint rule: best-val-macro-f1 or last-epoch.
    #[arg(long, value_name = "RULE")]
    pub selection: Option<String>,
    /// Random-label draw mode: assign or permute.
    #[arg(long, value_name = "MODE")]
    pub relabel_mode: Option<String>,
    /// Worker threads for the audit fan-out.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Report formats to emit, e.g. "json,markdown".
    #[arg(long, value_name = "LIST")]
    pub report_formats: Option<String>,
}

fn parse_list<T: core::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: core::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|e| CliError::config(format!("bad {what} `{p}`: {e}")))
        })
        .collect()
}

fn parse_kv<'a>(part: &'a str, spec: &str) -> Result<(&'a str, &'a str), CliError> {
    part.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| {
            CliError::config(format!("bad synth spec `{spec}`: expected key=value, got `{part}`"))
        })
}

fn parse_value<T: core::str::FromStr>(value: &str, key: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|_| CliError::config(format!("bad value `{value}` for synth key `{key}`")))
}

/// Parses an inline single-label cohort spec. Unset keys keep their
/// defaults; keys are S, K, m, T, C, alpha_d, alpha_s, alpha_o, jitter,
/// smooth and seed.
pub fn parse_type3_spec(spec: &str) -> Result<SynthType3Config, CliError> {
    let mut cfg = SynthType3Config::default();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = parse_kv(part, spec)?;
        match key {
            "S" => cfg.n_subjects = parse_value(value, key)?,
            "K" => cfg.n_classes = parse_value(value, key)?,
            "m" => cfg.samples_per_subject = parse_value(value, key)?,
            "T" => cfg.n_timestamps = parse_value(value, key)?,
            "C" => cfg.n_channels = parse_value(value, key)?,
            "alpha_d" => cfg.alpha_class = parse_value(value, key)?,
            "alpha_s" => cfg.alpha_subject = parse_value(value, key)?,
            "alpha_o" => cfg.alpha_other = parse_value(value, key)?,
            "jitter" => cfg.phase_jitter = parse_value(value, key)?,
            "smooth" => cfg.smooth_width = parse_value(value, key)?,
            "seed" => cfg.seed = parse_value(value, key)?,
            other => {
                return Err(CliError::config(format!("unknown synth_type3 key `{other}`")));
            }
        }
    }
    Ok(cfg)
}

/// Parses an inline windowed-recording cohort spec. Keys are S, K,
/// segments, segment_len, window, overlap, C, alpha_d, alpha_s, alpha_o,
/// smooth and seed.
pub fn parse_type2_spec(spec: &str) -> Result<SynthType2Config, CliError> {
    let mut cfg = SynthType2Config::default();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = parse_kv(part, spec)?;
        match key {
            "S" => cfg.n_subjects = parse_value(value, key)?,
            "K" => cfg.n_classes = parse_value(value, key)?,
            "segments" => cfg.segments_per_subject = parse_value(value, key)?,
            "segment_len" => cfg.segment_len = parse_value(value, key)?,
            "window" => cfg.window_len = parse_value(value, key)?,
            "overlap" => cfg.overlap = parse_value(value, key)?,
            "C" => cfg.n_channels = parse_value(value, key)?,
            "alpha_d" => cfg.alpha_class = parse_value(value, key)?,
            "alpha_s" => cfg.alpha_subject = parse_value(value, key)?,
            "alpha_o" => cfg.alpha_other = parse_value(value, key)?,
            "smooth" => cfg.smooth_width = parse_value(value, key)?,
            "seed" => cfg.seed = parse_value(value, key)?,
            other => {
                return Err(CliError::config(format!("unknown synth_type2 key `{other}`")));
            }
        }
    }
    Ok(cfg)
}

fn parse_setup(s: &str) -> Result<EvaluationSetup, CliError> {
    s.parse::<EvaluationSetup>()
        .map_err(|e| CliError::config(e.to_string()))
}

/// Loads the config file (when given) and applies flag overrides.
pub fn resolve_config(flags: &ConfigFlags) -> Result<RunConfig, CliError> {
    let mut config = match &flags.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };

    if let Some(path) = &flags.dataset {
        config.dataset_path = Some(path.clone());
    }
    if let Some(fmt) = &flags.dataset_format {
        config.dataset_format =
            Some(fmt.parse::<DataFormat>().map_err(CliError::config)?);
    }
    if let Some(spec) = &flags.synth_type3 {
        config.synth_type3 = Some(parse_type3_spec(spec)?);
    }
    if let Some(spec) = &flags.synth_type2 {
        config.synth_type2 = Some(parse_type2_spec(spec)?);
    }
    if let Some(list) = &flags.battery {
        let names: Vec<String> = parse_list(list, "setup")?;
        let mut battery = Vec::new();
        for name in &names {
            battery.push(parse_setup(name)?);
        }
        config.battery = Some(battery);
    }
    if let Some(setup) = &flags.setup {
        config.setup = Some(parse_setup(setup)?);
    }
    if let Some(list) = &flags.seeds {
        config.seeds = parse_list(list, "seed")?;
    }
    if let Some(list) = &flags.fractions {
        let parts: Vec<f64> = parse_list(list, "fraction")?;
        if parts.len() != 3 {
            return Err(CliError::config("fractions must be three comma-separated numbers"));
        }
        config.split.fractions = (parts[0], parts[1], parts[2]);
    }
    if let Some(n) = flags.n_val_subjects {
        config.split.n_val_subjects = Some(n);
    }
    if let Some(n) = flags.n_test_subjects {
        config.split.n_test_subjects = Some(n);
    }
    if let Some(list) = &flags.val_subjects {
        config.split.val_subjects = Some(parse_list(list, "subject id")?);
    }
    if let Some(list) = &flags.test_subjects {
        config.split.test_subjects = Some(parse_list(list, "subject id")?);
    }
    if let Some(v) = flags.stratify_by_label {
        config.split.stratify_by_label = v;
    }
    if let Some(fold) = flags.loo_fold {
        config.split.loo_fold = fold;
    }
    if let Some(n) = flags.hidden_width {
        config.train.hidden_width = n;
    }
    if let Some(n) = flags.epochs {
        config.train.epochs = n;
    }
    if let Some(n) = flags.batch_size {
        config.train.batch_size = n;
    }
    if let Some(lr) = flags.learning_rate {
        config.train.learning_rate = lr;
    }
    if let Some(rule) = &flags.selection {
        config.train.selection = match rule.as_str() {
            "best-val-macro-f1" => ModelSelection::BestValMacroF1,
            "last-epoch" => ModelSelection::LastEpoch,
            other => {
                return Err(CliError::config(format!(
                    "unknown selection rule `{other}` (expected best-val-macro-f1 or last-epoch)"
                )));
            }
        };
    }
    if let Some(mode) = &flags.relabel_mode {
        config.relabel_mode = match mode.as_str() {
            "assign" => RelabelMode::Assign,
            "permute" => RelabelMode::Permute,
            other => {
                return Err(CliError::config(format!(
                    "unknown relabel mode `{other}` (expected assign or permute)"
                )));
            }
        };
    }
    if let Some(jobs) = flags.jobs {
        config.jobs = jobs;
    }
    if let Some(list) = &flags.report_formats {
        config.report_formats = parse_list(list, "report format")?;
    }

    config.validate()?;
    Ok(config)
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}
