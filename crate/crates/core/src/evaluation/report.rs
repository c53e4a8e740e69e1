//! Score tables.
//!
//! CSV columns, in order: `model`, `validation`, `test`, then one column per
//! target variable (`temperature`, `crr_intensity`, `asii_turb_trop_prob`,
//! `cma`) holding that variable's share of the test score (of the
//! validation score when there is no test score). Missing entries are empty.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::score::ScoreReport;
use crate::losses::{TargetVariable, NUM_TARGETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
}

/// One table row: a predictor scored on up to two splits.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub validation: Option<ScoreReport>,
    pub test: Option<ScoreReport>,
}

impl ReportRow {
    fn per_variable(&self) -> Option<[f64; NUM_TARGETS]> {
        self.test.as_ref().or(self.validation.as_ref()).map(|r| r.per_variable)
    }
}

pub const REPORT_COLUMNS: [&str; 7] = [
    "model",
    "validation",
    "test",
    "temperature",
    "crr_intensity",
    "asii_turb_trop_prob",
    "cma",
];

const FOOTER: &str = "score: masked weighted squared error of normalized targets (no KL term); lower is better.\n\
mean baseline: per-pixel temporal mean of the training days of each region.\n\
persistence baseline: last observed input frame repeated for all lead times.\n";

fn cells(row: &ReportRow) -> Vec<Option<f64>> {
    let mut out = vec![row.validation.as_ref().map(|r| r.aggregate), row.test.as_ref().map(|r| r.aggregate)];
    match row.per_variable() {
        Some(pv) => out.extend(pv.iter().map(|&v| Some(v))),
        None => out.extend([None; NUM_TARGETS]),
    }
    out
}

fn render_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Validation(format!("csv rendering failed: {e}"));
    w.write_record(REPORT_COLUMNS).map_err(fail)?;
    for row in rows {
        let mut rec = vec![row.model.clone()];
        rec.extend(cells(row).into_iter().map(|c| c.map(|v| format!("{v:e}")).unwrap_or_default()));
        w.write_record(&rec).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv rendering failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn render_text(rows: &[ReportRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut line = vec![row.model.clone()];
            line.extend(cells(row).into_iter().map(|c| c.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())));
            line
        })
        .collect();
    let mut widths: Vec<usize> = REPORT_COLUMNS.iter().map(|h| h.len()).collect();
    for line in &body {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let fmt_line = |out: &mut String, cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    let header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
    fmt_line(&mut out, &header);
    let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    for line in &body {
        fmt_line(&mut out, line);
    }
    if !rows.is_empty() {
        out.push('\n');
        out.push_str(FOOTER);
    }
    out
}

/// Renders rows in the given format; an empty list yields the header only.
pub fn report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => render_csv(rows),
        ReportFormat::Text => Ok(render_text(rows)),
    }
}

/// Per-lead-time table (`lead_time` then one column per row's model) of test
/// scores, falling back to validation scores.
pub fn leadtime_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Validation(format!("csv rendering failed: {e}"));
    let mut header = vec!["lead_time".to_string()];
    header.extend(rows.iter().map(|r| r.model.clone()));
    w.write_record(&header).map_err(fail)?;
    let series: Vec<&[f64]> = rows
        .iter()
        .map(|r| r.test.as_ref().or(r.validation.as_ref()).map(|s| s.per_leadtime.as_slice()).unwrap_or(&[]))
        .collect();
    let lead = series.iter().map(|s| s.len()).max().unwrap_or(0);
    for t in 0..lead {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(series.iter().map(|s| s.get(t).map(|v| format!("{v:e}")).unwrap_or_default()));
        w.write_record(&rec).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv rendering failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Variable names in report column order.
pub fn variable_columns() -> [&'static str; NUM_TARGETS] {
    TargetVariable::ALL.map(|v| v.name())
}
