//! Rendering of audit reports for machines (JSON) and humans (Markdown).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tsaudit_core::audit::AuditReport;
use tsaudit_core::metrics::MetricSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl core::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}` (expected json or markdown)")),
        }
    }
}

/// Renders a report. JSON is the canonical machine form and round-trips
/// losslessly; Markdown mirrors the usual results-table layout with
/// percent cells (`97.56±0.79`).
pub fn render_report(report: &AuditReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut text =
                serde_json::to_string_pretty(report).expect("report always serializes");
            text.push('\n');
            text
        }
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn cell(summary: &MetricSummary) -> String {
    format!("{}±{}", pct(summary.mean), pct(summary.std))
}

fn render_markdown(report: &AuditReport) -> String {
    let mut md = String::new();
    let d = &report.dataset;
    let _ = writeln!(md, "# Subject-leakage audit — {}", d.name);
    let _ = writeln!(md);
    let _ = writeln!(
        md,
        "- dataset: {} · {} subjects · {} classes · {} samples of {}×{} ({})",
        d.kind, d.n_subjects, d.n_classes, d.n_samples, d.n_timestamps, d.n_channels, d.time_unit
    );
    let _ = writeln!(md, "- seeds: {:?}", report.environment.seeds);
    let _ = writeln!(
        md,
        "- tool: tsaudit v{} · prng: {}",
        report.environment.tool_version, report.environment.prng
    );
    let _ = writeln!(md);

    let _ = writeln!(md, "## Scores");
    let _ = writeln!(md);
    let _ = writeln!(md, "| setup | accuracy | macro-F1 |");
    let _ = writeln!(md, "|---|---|---|");
    for s in &report.setups {
        let _ = writeln!(md, "| {} | {} | {} |", s.setup, cell(&s.accuracy), cell(&s.macro_f1));
    }
    let _ = writeln!(md);
    let _ = writeln!(
        md,
        "Cells are percent, mean±std over {} seeds.",
        report.environment.seeds.len()
    );
    let _ = writeln!(md);

    let _ = writeln!(md, "## Diagnostics");
    let _ = writeln!(md);
    let diag = &report.diagnostics;
    let _ = writeln!(md, "- chance accuracy: {}%", pct(diag.chance_accuracy));
    let _ = writeln!(md, "- chance macro-F1 (Monte-Carlo): {}%", pct(diag.chance_macro_f1));
    if let (Some(ssr), Some(severity)) = (diag.ssr, diag.severity) {
        let _ = writeln!(md, "- subject-shortcut reliance: {ssr:.3} — {severity}");
    }
    if let Some(gap) = diag.generalization_gap {
        let _ = writeln!(md, "- generalization gap: {} points", pct(gap));
    }
    if let Some(ident) = diag.subject_identifiability {
        let _ = writeln!(md, "- subject identifiability: {}%", pct(ident));
    }
    if let Some(sanity) = &diag.rindep_sanity {
        let _ = writeln!(
            md,
            "- random-label subject-independent sanity: delta {} points — {}",
            pct(sanity.delta),
            if sanity.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(md);

    let _ = writeln!(md, "## Conventions");
    let _ = writeln!(md);
    let c = &report.environment.conventions;
    let _ = writeln!(md, "- spread: {}", c.spread);
    let _ = writeln!(md, "- macro-F1: {}", c.macro_f1);
    let _ = writeln!(md, "- chance macro-F1: {}", c.chance_macro_f1);
    let _ = writeln!(md, "- model selection: {}", c.model_selection);
    let mode = match c.relabel_mode {
        tsaudit_core::protocol::RelabelMode::Assign => "assign",
        tsaudit_core::protocol::RelabelMode::Permute => "permute",
    };
    let _ = writeln!(md, "- relabel mode: {mode}");
    md
}
