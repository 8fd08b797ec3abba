//! `tsaudit` — audits subject-grouped time-series datasets and classifiers
//! for subject-identity leakage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsaudit::config::ConfigFlags;
use tsaudit::render::ReportFormat;
use tsaudit::run;

#[derive(Parser)]
#[command(
    name = "tsaudit",
    version,
    about = "Audit subject-grouped time-series datasets for subject-identity leakage",
    long_about = "Materializes leakage-probing evaluation setups (mixed and causal \
subject-dependent splits, subject-exclusive holdouts, per-subject random labels, \
subject discrimination), trains a small MLP across seeds and reports scores plus \
leakage diagnostics."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and write it as dataset files.
    Gen {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Output directory (must not exist).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Also write the per-sample component breakdown sidecar.
        #[arg(long)]
        breakdown: bool,
    },
    /// Build and verify the split a setup would use, without training.
    Split {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Output directory (must not exist).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Seed for the split (default: first entry of `seeds`).
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
    },
    /// Train and score one evaluation setup across all seeds.
    Eval {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Output directory (must not exist).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the full setup battery and report leakage diagnostics.
    Audit {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Output directory (must not exist).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Re-render an existing report JSON.
    Report {
        /// report.json produced by `audit`.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Target format: json or markdown.
        #[arg(long, value_name = "FMT", default_value = "markdown")]
        format: ReportFormat,
        /// Output file; stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { flags, out, breakdown } => run::gen(flags, out, *breakdown),
        Command::Split { flags, out, seed } => run::split_cmd(flags, out, *seed),
        Command::Eval { flags, out } => run::eval_cmd(flags, out),
        Command::Audit { flags, out } => run::audit_cmd(flags, out),
        Command::Report { input, format, out } => {
            run::report_cmd(input, *format, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.status().code() as u8)
        }
    }
}
