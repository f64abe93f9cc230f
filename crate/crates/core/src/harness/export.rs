//! CSV/JSON result files and whitespace-separated plot series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ErrorTrace, MetricsReport, SplitMetrics, RowStatus, SweepParam, SweepRow, SweepTable, TraceMarker, TraceRow};
use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};

/// `%g`-style rendering with six significant digits.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig6).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_atomic(path, text.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_field(path: &Path, line: usize, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("{}:{line}: `{s}` is not a number", path.display())))
}

pub fn write_sweep_csv(path: &Path, table: &SweepTable) -> Result<()> {
    let mut out = format!("{},rmse_train,rmse_val,status\n", table.parameter.name());
    for r in &table.rows {
        let status = match r.status {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
        };
        writeln!(out, "{},{},{},{status}", r.value, opt(r.rmse_train), opt(r.rmse_val)).expect("string write");
    }
    write_text(path, &out)
}

pub fn read_sweep_csv(path: &Path) -> Result<SweepTable> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let parameter = match header.split(',').next() {
        Some("x") => SweepParam::X,
        Some("dt") => SweepParam::Dt,
        _ => return Err(Error::Format(format!("{}: unexpected sweep header `{header}`", path.display()))),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let [value, train, val, status] = f[..] else {
            return Err(Error::Format(format!("{}:{}: expected 4 fields", path.display(), i + 2)));
        };
        rows.push(SweepRow {
            value: value
                .parse()
                .map_err(|_| Error::Format(format!("{}:{}: bad value `{value}`", path.display(), i + 2)))?,
            rmse_train: parse_field(path, i + 2, train)?,
            rmse_val: parse_field(path, i + 2, val)?,
            status: if status == "infeasible" { RowStatus::Infeasible } else { RowStatus::Ok },
        });
    }
    Ok(SweepTable { parameter, rows })
}

pub fn write_trace_csv(path: &Path, trace: &ErrorTrace) -> Result<()> {
    let mut out = String::from("index,label,prediction,error\n");
    for r in &trace.rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.index,
            format_sig6(r.label),
            format_sig6(r.prediction),
            format_sig6(r.error)
        )
        .expect("string write");
    }
    write_text(path, &out)
}

/// Rows of a trace CSV; the markers and offsets are not stored in the CSV
/// and are recomputed from the rows with `x = dt = 0`.
pub fn read_trace_csv(path: &Path) -> Result<ErrorTrace> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let [index, label, prediction, error] = f[..] else {
            return Err(Error::Format(format!("{}:{}: expected 4 fields", path.display(), i + 1)));
        };
        let num = |s| parse_field(path, i + 1, s)?.ok_or_else(|| Error::Format(format!("{}:{}: empty field", path.display(), i + 1)));
        rows.push(TraceRow {
            index: index
                .parse()
                .map_err(|_| Error::Format(format!("{}:{}: bad index `{index}`", path.display(), i + 1)))?,
            label: num(label)?,
            prediction: num(prediction)?,
            error: num(error)?,
        });
    }
    let marker = |r: &TraceRow| TraceMarker { index: r.index, error: r.error };
    let (Some(max), Some(min)) = (
        rows.iter().max_by(|a, b| a.error.total_cmp(&b.error)).map(marker),
        rows.iter().min_by(|a, b| a.error.total_cmp(&b.error)).map(marker),
    ) else {
        return Err(Error::Format(format!("{}: no trace rows", path.display())));
    };
    Ok(ErrorTrace { x: 0, dt: 0, rows, max, min })
}

/// A JSON result file; `config` echoes the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum ResultDocument {
    Metrics { report: MetricsReport },
    Evaluation { config: serde_json::Value, train: SplitMetrics, val: Option<SplitMetrics> },
    Sweep { config: serde_json::Value, table: SweepTable },
    Trace { config: serde_json::Value, trace: ErrorTrace },
}

pub fn write_json(path: &Path, doc: &ResultDocument) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Whitespace-separated columns under a `#` header line, one row per point.
pub fn write_plot_series(path: &Path, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = format!("# {}\n", columns.join(" "));
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_sig6).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    write_text(path, &out)
}
