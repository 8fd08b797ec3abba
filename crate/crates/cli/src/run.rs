//! Command execution: output directories, provenance manifests, error→exit
//! code mapping and the audit fan-out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tsaudit_core::audit::{
    self, AuditConfig, AuditError, RunOutcome, SetupResult,
};
use tsaudit_core::data::Dataset;
use tsaudit_core::protocol::{build_setup, EvaluationSetup, RelabelTransform};
use tsaudit_core::split::verify_split;
use tsaudit_core::synth::{generate_type2, generate_type3, ComponentBreakdown, SynthError};

use crate::config::{resolve_config, ConfigFlags, DatasetSource, RunConfig};
use crate::formats::{
    self, breakdown_path, load_dataset, manifest_path, save_breakdown, save_dataset,
    save_json, DataFormat, FormatError,
};
use crate::render::{render_report, ReportFormat};

/// Stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok,
    /// Bad invocation: flags, config file, conflicting sources, output
    /// directory already used.
    ConfigError,
    /// The dataset (or its combination with the requested setup) is
    /// unusable: parse errors, validation violations, too few subjects.
    DataError,
    /// The run itself failed: training divergence, leaky split abort,
    /// output write failure.
    RunFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::ConfigError => 2,
            ExitStatus::DataError => 3,
            ExitStatus::RunFailure => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }

    pub fn run(message: impl Into<String>) -> Self {
        CliError::Run(message.into())
    }

    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::ConfigError,
            CliError::Data(_) => ExitStatus::DataError,
            CliError::Run(_) => ExitStatus::RunFailure,
        }
    }
}

fn load_err(e: FormatError) -> CliError {
    CliError::data(e.to_string())
}

fn write_err(e: FormatError) -> CliError {
    CliError::run(e.to_string())
}

fn synth_err(e: SynthError) -> CliError {
    match e {
        // Retry exhaustion means the cohort parameters cannot yield the
        // advertised dataset kind — a data problem, not a crash.
        SynthError::SegmentRetriesExhausted { .. } => CliError::data(e.to_string()),
        _ => CliError::config(e.to_string()),
    }
}

fn audit_err(e: AuditError) -> CliError {
    match e {
        AuditError::InvalidDataset { .. }
        | AuditError::UnsupportedKind { .. }
        | AuditError::Protocol { .. }
        | AuditError::Data(_) => CliError::data(e.to_string()),
        AuditError::NoSeeds | AuditError::EmptyBattery => CliError::config(e.to_string()),
        AuditError::LeakySplit { .. }
        | AuditError::Model { .. }
        | AuditError::Metric(_)
        | AuditError::OutcomeCountMismatch { .. } => CliError::run(e.to_string()),
    }
}

/// Provenance manifest emitted into every output directory: the resolved
/// config plus SHA-256 hashes of all inputs and outputs.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    config: &'a RunConfig,
    inputs: &'a BTreeMap<String, FileStamp>,
    outputs: &'a BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
struct FileStamp {
    path: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write as _;
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Collects everything one command run produces under its write-once
/// output directory.
struct OutDir {
    root: PathBuf,
    inputs: BTreeMap<String, FileStamp>,
    outputs: BTreeMap<String, String>,
}

impl OutDir {
    /// Creates the directory; an existing one is refused so a finished
    /// run can never be silently overwritten.
    fn create(root: &Path) -> Result<OutDir, CliError> {
        if root.exists() {
            return Err(CliError::config(format!(
                "output directory {} already exists; runs are write-once",
                root.display()
            )));
        }
        if let Some(parent) = root.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)
                    .map_err(|e| CliError::run(format!("{}: {e}", parent.display())))?;
            }
        }
        fs::create_dir(root).map_err(|e| CliError::run(format!("{}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf(), inputs: BTreeMap::new(), outputs: BTreeMap::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn stamp_input(&mut self, key: &str, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(
            key.to_string(),
            FileStamp { path: path.display().to_string(), sha256: sha256_file(path)? },
        );
        Ok(())
    }

    /// Records an output file's hash after it has been written.
    fn stamp_output(&mut self, name: &str) -> Result<(), CliError> {
        let hash = sha256_file(&self.path(name)).map_err(|e| CliError::run(e.to_string()))?;
        self.outputs.insert(name.to_string(), hash);
        println!("wrote {}", self.path(name).display());
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        save_json(value, &self.path(name)).map_err(write_err)?;
        self.stamp_output(name)
    }

    fn emit_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.path(name), text)
            .map_err(|e| CliError::run(format!("{}: {e}", self.path(name).display())))?;
        self.stamp_output(name)
    }

    fn finish(mut self, command: &str, config: &RunConfig) -> Result<(), CliError> {
        let manifest = RunManifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: &std::mem::take(&mut self.inputs),
            outputs: &std::mem::take(&mut self.outputs),
        };
        save_json(&manifest, &self.path("manifest.json")).map_err(write_err)?;
        println!("wrote {}", self.path("manifest.json").display());
        Ok(())
    }
}

/// Loads or generates the configured dataset, stamping file inputs.
fn obtain_dataset(
    config: &RunConfig,
    out: &mut OutDir,
) -> Result<(Dataset, Option<ComponentBreakdown>), CliError> {
    match config.dataset_source()? {
        DatasetSource::Path => {
            let path = config.dataset_path.as_ref().expect("source checked");
            let format = config.dataset_format.unwrap_or_else(|| DataFormat::infer(path));
            out.stamp_input("dataset", path)?;
            out.stamp_input("dataset_manifest", &manifest_path(path))?;
            let dataset = load_dataset(path, format).map_err(load_err)?;
            Ok((dataset, None))
        }
        DatasetSource::Type3 => {
            let cfg = config.synth_type3.as_ref().expect("source checked");
            let (dataset, breakdown) = generate_type3(cfg).map_err(synth_err)?;
            Ok((dataset, Some(breakdown)))
        }
        DatasetSource::Type2 => {
            let cfg = config.synth_type2.as_ref().expect("source checked");
            let (dataset, breakdown) = generate_type2(cfg).map_err(synth_err)?;
            Ok((dataset, Some(breakdown)))
        }
    }
}

fn stamp_config_input(flags: &ConfigFlags, out: &mut OutDir) -> Result<(), CliError> {
    if let Some(path) = &flags.config {
        out.stamp_input("config", path)?;
    }
    Ok(())
}

/// `gen`: materialize a synthetic cohort as dataset files.
pub fn gen(flags: &ConfigFlags, out_path: &Path, with_breakdown: bool) -> Result<(), CliError> {
    let config = resolve_config(flags)?;
    let source = config.dataset_source()?;
    if source == DatasetSource::Path {
        return Err(CliError::config(
            "gen needs a synthetic source (synth_type3 or synth_type2), not dataset_path",
        ));
    }
    let mut out = OutDir::create(out_path)?;
    stamp_config_input(flags, &mut out)?;
    let (dataset, breakdown) = obtain_dataset(&config, &mut out)?;

    let format = config.dataset_format.unwrap_or(DataFormat::Jsonl);
    let data_name = format!("dataset.{}", format.extension());
    let data_path = out.path(&data_name);
    save_dataset(&dataset, &data_path, format).map_err(write_err)?;
    out.stamp_output(&data_name)?;
    let manifest_name = manifest_path(Path::new(&data_name)).display().to_string();
    out.stamp_output(&manifest_name)?;
    if with_breakdown {
        let breakdown = breakdown.expect("synthetic sources always carry a breakdown");
        let name = breakdown_path(Path::new(&data_name)).display().to_string();
        save_breakdown(&breakdown, &out.path(&name)).map_err(write_err)?;
        out.stamp_output(&name)?;
    }
    out.finish("gen", &config)
}

/// `split`: build and verify the split (and any label transform) a setup
/// would use, without training anything.
pub fn split_cmd(flags: &ConfigFlags, out_path: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let config = resolve_config(flags)?;
    let setup = config
        .setup
        .ok_or_else(|| CliError::config("split needs --setup (or `setup` in the config)"))?;
    let seed = seed.unwrap_or(config.seeds[0]);

    let mut out = OutDir::create(out_path)?;
    stamp_config_input(flags, &mut out)?;
    let (dataset, _) = obtain_dataset(&config, &mut out)?;

    let built = build_setup(setup, &dataset, &config.split, seed, config.relabel_mode)
        .map_err(|e| CliError::data(e.to_string()))?;
    let report = verify_split(&built.dataset, &built.split);

    out.emit_json("split.json", &built.split)?;
    out.emit_json("split_report.json", &report)?;
    if built.relabel.transform != RelabelTransform::None {
        out.emit_json("relabel.json", &built.relabel)?;
    }
    out.finish("split", &config)
}

/// Runs every (setup, seed) pair of the battery, fanning out across
/// `jobs` worker threads. Outcomes are assembled in deterministic
/// (battery, seed) order, so the result is identical for any job count.
pub fn run_battery(
    dataset: &Dataset,
    battery: &[EvaluationSetup],
    config: &AuditConfig,
    jobs: usize,
) -> Result<Vec<SetupResult>, AuditError> {
    let pairs: Vec<(usize, u64)> = battery
        .iter()
        .enumerate()
        .flat_map(|(si, _)| config.seeds.iter().map(move |&seed| (si, seed)))
        .collect();
    let slots: Vec<Mutex<Option<Result<RunOutcome, AuditError>>>> =
        pairs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(pairs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(si, seed)) = pairs.get(i) else { break };
                let outcome = audit::execute_run(dataset, battery[si], config, seed);
                *slots[i].lock().expect("no panics hold this lock") = Some(outcome);
            });
        }
    });

    let mut per_setup: Vec<Vec<RunOutcome>> = battery.iter().map(|_| Vec::new()).collect();
    for (slot, &(si, _)) in slots.iter().zip(&pairs) {
        let outcome = slot
            .lock()
            .expect("no panics hold this lock")
            .take()
            .expect("every slot was filled")?;
        per_setup[si].push(outcome);
    }
    battery
        .iter()
        .zip(per_setup)
        .map(|(&setup, outcomes)| audit::assemble_setup_result(setup, &config.seeds, outcomes))
        .collect()
}

/// `eval`: run a single setup across all seeds and emit its result.
pub fn eval_cmd(flags: &ConfigFlags, out_path: &Path) -> Result<(), CliError> {
    let config = resolve_config(flags)?;
    let setup = config
        .setup
        .ok_or_else(|| CliError::config("eval needs --setup (or `setup` in the config)"))?;

    let mut out = OutDir::create(out_path)?;
    stamp_config_input(flags, &mut out)?;
    let (dataset, _) = obtain_dataset(&config, &mut out)?;

    let mut audit_config = config.audit_config();
    audit_config.battery = Some(vec![setup]);
    let (_, battery, effective) =
        audit::resolve_audit(&dataset, &audit_config).map_err(audit_err)?;
    let results =
        run_battery(&dataset, &battery, &effective, config.jobs).map_err(audit_err)?;

    out.emit_json("setup_result.json", &results[0])?;
    out.finish("eval", &config)
}

/// `audit`: the full battery plus diagnostics and rendered reports.
pub fn audit_cmd(flags: &ConfigFlags, out_path: &Path) -> Result<(), CliError> {
    let config = resolve_config(flags)?;
    let mut out = OutDir::create(out_path)?;
    stamp_config_input(flags, &mut out)?;
    let (dataset, _) = obtain_dataset(&config, &mut out)?;

    let audit_config = config.audit_config();
    let (kind, battery, effective) =
        audit::resolve_audit(&dataset, &audit_config).map_err(audit_err)?;
    let results =
        run_battery(&dataset, &battery, &effective, config.jobs).map_err(audit_err)?;
    let report = audit::assemble_report(&dataset, kind, battery, results, &effective)
        .map_err(audit_err)?;

    for &format in &config.report_formats {
        let name = format!("report.{}", format.extension());
        out.emit_text(&name, &render_report(&report, format))?;
    }
    out.finish("audit", &config)
}

/// `report`: re-render an existing report JSON.
pub fn report_cmd(
    input: &Path,
    format: ReportFormat,
    out_path: Option<&Path>,
) -> Result<(), CliError> {
    let report: tsaudit_core::audit::AuditReport =
        formats::load_json(input).map_err(load_err)?;
    let text = render_report(&report, format);
    match out_path {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| CliError::run(format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
