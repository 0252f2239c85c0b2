//! Deterministic report writers: JSON for structured reports, CSV for
//! tables and traces meant for external plotting.

use crate::em::FitReport;
use crate::error::{Error, Result};
use crate::eval::ConfusionReport;
use crate::math::fmt_f64;
use crate::model::Dataset;
use crate::selection::SelectionReport;
use crate::sim::SimulationDesign;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Confusion matrix plus agreement score, as written by `evaluate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionReport,
    pub adjusted_rand_index: f64,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Fit report as JSON plus the log-likelihood trace as a two-column CSV.
pub fn write_fit(dir: impl AsRef<Path>, name: &str, fit: &FitReport) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let json_path = dir.join(format!("{name}.json"));
    write_json(&json_path, fit)?;
    let trace_path = dir.join(format!("{name}_loglik_trace.csv"));
    let file = File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "iteration,loglik").map_err(|e| Error::io(&trace_path, e))?;
    for (i, ll) in fit.loglik_trace.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, fmt_f64(*ll)).map_err(|e| Error::io(&trace_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&trace_path, e))?;
    Ok(vec![json_path, trace_path])
}

/// Selection report as JSON plus the criteria table as CSV.
pub fn write_selection(
    dir: impl AsRef<Path>,
    name: &str,
    report: &SelectionReport,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let json_path = dir.join(format!("{name}.json"));
    write_json(&json_path, report)?;
    let csv_path = dir.join(format!("{name}.csv"));
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "g,loglik,k,n,aic,bic,icl,awe,aic3,aicc,aicu,caic")
        .map_err(|e| Error::io(&csv_path, e))?;
    for row in &report.rows {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.g,
            fmt_f64(row.loglik),
            row.k,
            row.n,
            fmt_f64(row.aic),
            fmt_f64(row.bic),
            fmt_f64(row.icl),
            fmt_f64(row.awe),
            fmt_f64(row.aic3),
            opt(row.aicc),
            opt(row.aicu),
            fmt_f64(row.caic),
        )
        .map_err(|e| Error::io(&csv_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(vec![json_path, csv_path])
}

/// Evaluation report as JSON plus the confusion matrix as CSV.
pub fn write_evaluation(
    dir: impl AsRef<Path>,
    name: &str,
    report: &EvaluationReport,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let json_path = dir.join(format!("{name}.json"));
    write_json(&json_path, report)?;
    let csv_path = dir.join(format!("{name}.csv"));
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut out = BufWriter::new(file);
    let g = report.confusion.matrix.len();
    let header: Vec<String> = (1..=g).map(|p| format!("predicted_{p}")).collect();
    writeln!(out, "true_component,{}", header.join(",")).map_err(|e| Error::io(&csv_path, e))?;
    for (t, row) in report.confusion.matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{},{}", t + 1, cells.join(",")).map_err(|e| Error::io(&csv_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(vec![json_path, csv_path])
}

/// Plain-text confusion table for terminal output.
pub fn render_confusion_table(report: &EvaluationReport) -> String {
    let c = &report.confusion;
    let g = c.matrix.len();
    let mut lines = Vec::new();
    let header: Vec<String> = (1..=g).map(|p| format!("{p:>8}")).collect();
    lines.push(format!("{:<12}{}  {:>12}", "true\\pred", header.join(""), "misclass"));
    for (t, row) in c.matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>8}")).collect();
        lines.push(format!(
            "{:<12}{}  {:>11.2}%",
            t + 1,
            cells.join(""),
            100.0 * c.per_class_misclassification[t]
        ));
    }
    lines.push(format!(
        "overall misclassification {:.2}%  accuracy {:.2}%  ARI {:.4}",
        100.0 * c.overall_misclassification,
        100.0 * c.accuracy,
        report.adjusted_rand_index
    ));
    lines.join("\n")
}

/// Dataset CSV plus a JSON sidecar with the generating design.
pub fn write_dataset_with_sidecar(
    dir: impl AsRef<Path>,
    name: &str,
    dataset: &Dataset,
    design: &SimulationDesign,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let csv_path = dir.join(format!("{name}.csv"));
    super::write_dataset_csv(&csv_path, dataset)?;
    let sidecar_path = dir.join(format!("{name}_design.json"));
    write_json(&sidecar_path, design)?;
    Ok(vec![csv_path, sidecar_path])
}
