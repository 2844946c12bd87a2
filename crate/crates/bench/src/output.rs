//! CSV and JSON writers for experiment results.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::experiments::RobustnessCurve;

pub const FORMAT_VERSION: u32 = 1;

/// First line of every CSV written by this crate.
pub fn header_comment(experiment: &str) -> String {
    format!(
        "# mhpc-bench {} format {FORMAT_VERSION} experiment {experiment}",
        env!("CARGO_PKG_VERSION")
    )
}

pub fn csv_string<T: Serialize>(experiment: &str, rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", header_comment(experiment))?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(buf)?)
}

pub fn write_csv<T: Serialize>(path: &Path, experiment: &str, rows: &[T]) -> Result<()> {
    let text = csv_string(experiment, rows)?;
    write_text(path, &text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &(text + "\n"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// One row per schedule and magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub schedule: String,
    pub full: usize,
    pub simple: usize,
    pub magnitude: f64,
    pub trials: usize,
    pub successes: usize,
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn curve_rows(curves: &[RobustnessCurve]) -> Vec<CurveRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| CurveRow {
                schedule: c.schedule.clone(),
                full: c.full,
                simple: c.simple,
                magnitude: p.magnitude,
                trials: p.trials,
                successes: p.successes,
                probability: p.probability,
                lower: p.lower,
                upper: p.upper,
            })
        })
        .collect()
}

/// Drops comment lines and every column whose name ends in `_ms`, leaving
/// the part of a result file that must repeat exactly under a fixed seed.
pub fn strip_timing_columns(text: &str) -> Result<String> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !headers[i].ends_with("_ms")).collect();
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(keep.iter().map(|&i| &headers[i]))?;
        for rec in reader.records() {
            let rec = rec?;
            w.write_record(keep.iter().map(|&i| &rec[i]))?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(out)?)
}
