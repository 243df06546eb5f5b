//! On-disk formats for run outputs: loss curves, feature tables, CMC
//! curves (CSV), evaluation reports (JSON), and attention heatmaps
//! (CSV + PGM). Floats print in shortest round-trip form, so emitted
//! files are byte-stable and parse back to the exact same values.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{GaitError, Result};
use crate::numerics::Matrix;
use crate::reid::{EvalReport, FeatureRow};
use crate::trainer::LossRecord;

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut out = String::from("epoch,total,reconstruction,alignment\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.epoch, r.total, r.reconstruction, r.alignment);
    }
    out
}

pub fn features_csv(rows: &[FeatureRow]) -> Result<String> {
    let width = rows
        .first()
        .map(|r| r.values.len())
        .ok_or_else(|| GaitError::Data("no feature rows to write".into()))?;
    let mut out = String::from("sequence,step,label");
    for i in 0..width {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    for r in rows {
        if r.values.len() != width {
            return Err(GaitError::Shape("ragged feature rows".into()));
        }
        let _ = write!(out, "{},{},{}", r.sequence, r.step, r.label);
        for v in &r.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_features_csv(text: &str) -> Result<Vec<FeatureRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| GaitError::Data("empty features file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "sequence" || cols[1] != "step" || cols[2] != "label" {
        return Err(GaitError::Data(format!(
            "features header must start with sequence,step,label got '{}'",
            header
        )));
    }
    let width = cols.len() - 3;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(GaitError::Data(format!(
                "features line {}: {} fields where {} expected",
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| {
                GaitError::Data(format!("features line {}: bad {what} '{s}'", lineno + 2))
            })
        };
        let sequence = parse_usize(fields[0], "sequence id")?;
        let step = parse_usize(fields[1], "step")?;
        let label = parse_usize(fields[2], "label")?;
        let mut values = Vec::with_capacity(width);
        for s in &fields[3..] {
            let v: f64 = s.parse().map_err(|_| {
                GaitError::Data(format!("features line {}: bad value '{s}'", lineno + 2))
            })?;
            values.push(v);
        }
        rows.push(FeatureRow { sequence, step, label, values });
    }
    if rows.is_empty() {
        return Err(GaitError::Data("features file has no rows".into()));
    }
    Ok(rows)
}

pub fn cmc_csv(cmc: &[f64]) -> String {
    let mut out = String::from("rank,cmc\n");
    for (i, v) in cmc.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

pub fn report_json(report: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)
        .map_err(|e| GaitError::Data(format!("report serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report_json(text: &str) -> Result<EvalReport> {
    serde_json::from_str(text).map_err(|e| GaitError::Data(format!("report parse: {e}")))
}

/// Rows are decoding steps, columns encoder frames; values print exactly.
pub fn attention_csv(weights: &Matrix) -> String {
    let mut out = String::new();
    for t in 0..weights.rows() {
        let row = weights.row(t);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// ASCII (P2) grayscale heatmap. Values are min-max scaled onto 0..=255
/// (a constant matrix maps to all zeros), so PGMs visualize structure
/// while the CSV stays the canonical numeric record.
pub fn attention_pgm(weights: &Matrix) -> String {
    let data = weights.data();
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P2\n{} {}\n255\n", weights.cols(), weights.rows());
    for t in 0..weights.rows() {
        let row = weights.row(t);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let level = if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u32
            } else {
                0
            };
            let _ = write!(out, "{level}");
        }
        out.push('\n');
    }
    out
}
