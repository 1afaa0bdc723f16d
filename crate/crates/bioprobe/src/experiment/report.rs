//! Experiment reports: per-trial records, per-cell aggregates, and CSV/JSON
//! emission.
//!
//! The JSON report is the lossless form; CSV emission writes two files, a
//! long-format `trials.csv` (`task,model,k,trial,auc_macro`) and an
//! `aggregate.csv` with per-cell means and standard deviations. Infeasible
//! cells appear in the aggregate with a reason and no trial rows.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AucAveraging;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse report {path}: {message}")]
    Parse { path: String, message: String },
    #[error("report has no cells")]
    Empty,
}

/// One trial's macro AUC plus the per-class breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub auc_macro: f64,
    pub per_class: BTreeMap<String, f64>,
}

/// Aggregate for one (task, model, k) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub task: String,
    pub model: String,
    pub k: usize,
    pub trials: Vec<TrialRecord>,
    /// Mean of per-trial macro AUCs; absent for infeasible cells.
    pub auc_macro_mean: Option<f64>,
    /// Sample standard deviation over trials (0 for a single trial).
    pub auc_macro_std: Option<f64>,
    pub dropped_classes: Vec<String>,
    /// Why the cell produced no trials, when it did not.
    pub infeasible: Option<String>,
}

impl ReportCell {
    pub fn from_trials(
        task: String,
        model: String,
        k: usize,
        trials: Vec<TrialRecord>,
        dropped_classes: Vec<String>,
        failure: Option<String>,
    ) -> Self {
        let (mean, std) = if trials.is_empty() {
            (None, None)
        } else {
            let values: Vec<f64> = trials.iter().map(|t| t.auc_macro).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let std = if values.len() < 2 {
                0.0
            } else {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (values.len() - 1) as f64;
                var.sqrt()
            };
            (Some(mean), Some(std))
        };
        Self {
            task,
            model,
            k,
            trials,
            auc_macro_mean: mean,
            auc_macro_std: std,
            dropped_classes,
            infeasible: failure,
        }
    }
}

/// Full experiment output, Table-shaped when pivoted: rows are models,
/// columns are (task, k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub auc_averaging: AucAveraging,
    pub cells: Vec<ReportCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the report into `out_dir`: `trials.csv` + `aggregate.csv` for
/// CSV, `report.json` for JSON. Returns the paths written.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ReportError> {
    if report.cells.is_empty() {
        return Err(ReportError::Empty);
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    match format {
        ReportFormat::Csv => {
            let trials_path = out_dir.join("trials.csv");
            let aggregate_path = out_dir.join("aggregate.csv");
            write_trials_csv(report, &trials_path)?;
            write_aggregate_csv(report, &aggregate_path)?;
            Ok(vec![trials_path, aggregate_path])
        }
        ReportFormat::Json => {
            let path = out_dir.join("report.json");
            let text = serde_json::to_string_pretty(report).expect("report serializes");
            std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            Ok(vec![path])
        }
    }
}

fn write_trials_csv(report: &ExperimentReport, path: &Path) -> Result<(), ReportError> {
    let mut out = String::from("task,model,k,trial,auc_macro\n");
    for cell in &report.cells {
        for trial in &cell.trials {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                cell.task, cell.model, cell.k, trial.trial, trial.auc_macro
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

fn write_aggregate_csv(report: &ExperimentReport, path: &Path) -> Result<(), ReportError> {
    let mut out = String::from("task,model,k,trials,auc_macro_mean,auc_macro_std,note\n");
    for cell in &report.cells {
        let note = match (&cell.infeasible, cell.dropped_classes.is_empty()) {
            (Some(reason), _) => format!("infeasible: {reason}"),
            (None, false) => format!("dropped: {}", cell.dropped_classes.join("+")),
            (None, true) => String::new(),
        };
        let (mean, std) = match (cell.auc_macro_mean, cell.auc_macro_std) {
            (Some(m), Some(s)) => (m.to_string(), s.to_string()),
            _ => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cell.task,
            cell.model,
            cell.k,
            cell.trials.len(),
            mean,
            std,
            csv_escape(&note)
        ));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn load_report_json(path: impl AsRef<Path>) -> Result<ExperimentReport, ReportError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Formats the report as a fixed-width table: one row per model, one column
/// per (task, k), mean macro AUC in each cell (`--` where infeasible).
pub fn summary_table(report: &ExperimentReport) -> String {
    let mut columns: Vec<(String, usize)> = Vec::new();
    let mut models: Vec<String> = Vec::new();
    for cell in &report.cells {
        let column = (cell.task.clone(), cell.k);
        if !columns.contains(&column) {
            columns.push(column);
        }
        if !models.contains(&cell.model) {
            models.push(cell.model.clone());
        }
    }
    columns.sort();
    models.sort();

    let by_key: BTreeMap<(&str, &str, usize), &ReportCell> = report
        .cells
        .iter()
        .map(|c| ((c.task.as_str(), c.model.as_str(), c.k), c))
        .collect();

    let headers: Vec<String> = columns
        .iter()
        .map(|(task, k)| format!("{task} k={k}"))
        .collect();
    let model_width = models
        .iter()
        .map(String::len)
        .chain(["model".len()])
        .max()
        .unwrap_or(5);
    let widths: Vec<usize> = headers.iter().map(|h| h.len().max(6)).collect();

    let mut out = format!("{:model_width$}", "model");
    for (header, width) in headers.iter().zip(&widths) {
        out.push_str(&format!("  {header:>width$}"));
    }
    out.push('\n');
    for model in &models {
        out.push_str(&format!("{model:model_width$}"));
        for ((task, k), width) in columns.iter().zip(&widths) {
            let value = by_key
                .get(&(task.as_str(), model.as_str(), *k))
                .and_then(|c| c.auc_macro_mean)
                .map(|m| format!("{m:.3}"))
                .unwrap_or_else(|| "--".to_string());
            out.push_str(&format!("  {value:>width$}"));
        }
        out.push('\n');
    }
    out
}
