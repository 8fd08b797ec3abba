//! Command-line companion to `tsaudit-core`: file formats, report
//! rendering, run configuration and command execution.
//!
//! The core crate is `no_std` and knows nothing about files; everything
//! that touches the filesystem or a terminal lives here.

pub mod config;
pub mod formats;
pub mod render;
pub mod run;

pub use config::{ConfigFlags, RunConfig};
pub use formats::{load_dataset, save_dataset, DataFormat, FormatError};
pub use render::{render_report, ReportFormat};
pub use run::{CliError, ExitStatus};
