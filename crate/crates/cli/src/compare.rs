//! Side-by-side comparison of metrics reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use fedpc::evaluation::{MetricsReport, SCHEMA_VERSION};

use crate::output::METRICS_FILE;

pub struct LabeledReport {
    pub label: String,
    pub path: PathBuf,
    pub report: MetricsReport,
}

/// Load a report from a metrics.json file or a run directory holding one.
pub fn load_report(path: &Path) -> Result<MetricsReport> {
    let file = if path.is_dir() {
        path.join(METRICS_FILE)
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| anyhow!("cannot read report {}: {e}", file.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| anyhow!("report {} is not JSON: {e}", file.display()))?;
    match value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
    {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => bail!(
            "report {} has schema_version {v}, expected {SCHEMA_VERSION}",
            file.display()
        ),
        None => bail!("report {} has no schema_version", file.display()),
    }
    serde_json::from_value(value).map_err(|e| {
        anyhow!(
            "report {} does not match the metrics schema: {e}",
            file.display()
        )
    })
}

pub fn load_reports(paths: &[PathBuf]) -> Result<Vec<LabeledReport>> {
    if paths.len() < 2 {
        bail!("compare needs at least two reports");
    }
    let mut out: Vec<LabeledReport> = Vec::with_capacity(paths.len());
    for p in paths {
        let report = load_report(p)?;
        let base = report.algorithm.clone();
        let taken = out.iter().filter(|r| r.report.algorithm == base).count();
        let label = if taken == 0 {
            base
        } else {
            format!("{base}#{}", taken + 1)
        };
        out.push(LabeledReport {
            label,
            path: p.clone(),
            report,
        });
    }
    Ok(out)
}

/// Rows of the combined table: a header, then one row per round with
/// metric (i) and (ii) means, then one row per personalization step.
pub fn table_rows(reports: &[LabeledReport]) -> Vec<Vec<String>> {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let mut header = vec!["section".to_string(), "index".to_string()];
    for r in reports {
        header.push(format!("{}:i", r.label));
        header.push(format!("{}:ii", r.label));
    }
    let mut rows = vec![header];

    let max_rounds = reports
        .iter()
        .map(|r| r.report.rounds.len())
        .max()
        .unwrap_or(0);
    for round in 0..max_rounds {
        let mut row = vec!["round".to_string(), (round + 1).to_string()];
        for r in reports {
            let m = r.report.rounds.get(round);
            row.push(fmt(m.and_then(|m| m.metric_i.mean)));
            row.push(fmt(m.and_then(|m| m.metric_ii.mean)));
        }
        rows.push(row);
    }

    let max_steps = reports
        .iter()
        .map(|r| r.report.metric_iii.mean.len())
        .max()
        .unwrap_or(0);
    for k in 0..max_steps {
        let mut row = vec!["new_client_step".to_string(), k.to_string()];
        for r in reports {
            row.push(fmt(r.report.metric_iii.mean.get(k).copied()));
            row.push(String::new());
        }
        rows.push(row);
    }
    rows
}

pub fn render_text(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn render_csv(rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row)?;
    }
    Ok(w.into_inner()?)
}
