//! Result files.
//!
//! - `results.csv`: one row per (pattern, method, snr) with [`RESULTS_HEADER`].
//! - `results_detail.csv`: the same rows with bit counts, error counts,
//!   a low-confidence flag and the perfect-CSI baseline.
//! - `fig5_noise_ber.dat`, `fig6_total_ber.dat`, `fig7_rectangular.dat`:
//!   whitespace-separated columns for gnuplot, one SNR per line.
//!
//! Floats are written in shortest round-trip form, so parsing a file gives
//! back the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::PatternKind;

use super::sweep::{ExperimentResult, ResultRow};

pub const RESULTS_HEADER: &str = "pattern,method,snr_db,ber_total,ber_floor,ber_noise,mse,ci_halfwidth,seeds";
pub const DETAIL_HEADER: &str =
    "pattern,method,snr_db,bits,bit_errors,ber_total,ci_halfwidth,low_confidence,ber_perfect_csi";

pub const RESULTS_FILE: &str = "results.csv";
pub const DETAIL_FILE: &str = "results_detail.csv";
pub const FIG5_FILE: &str = "fig5_noise_ber.dat";
pub const FIG6_FILE: &str = "fig6_total_ber.dat";
pub const FIG7_FILE: &str = "fig7_rectangular.dat";

pub fn results_csv(result: &ExperimentResult) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.pattern, r.method, r.snr_db, r.ber_total, r.ber_floor, r.ber_noise, r.mse, r.ci_halfwidth, r.seeds
        );
    }
    out
}

pub fn detail_csv(result: &ExperimentResult) -> String {
    let mut out = format!("{DETAIL_HEADER}\n");
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.pattern,
            r.method,
            r.snr_db,
            r.bits,
            r.bit_errors,
            r.ber_total,
            r.ci_halfwidth,
            r.low_confidence(),
            r.ber_perfect_csi
        );
    }
    out
}

/// Columns file: `snr_db` followed by one column per series.
fn gnuplot_columns(result: &ExperimentResult, keep: impl Fn(&ResultRow) -> bool, value: fn(&ResultRow) -> f64) -> String {
    let mut series: Vec<(PatternKind, crate::estimator::Method)> = Vec::new();
    let mut snrs: Vec<f64> = Vec::new();
    for r in result.rows.iter().filter(|r| keep(r)) {
        if !series.contains(&(r.pattern, r.method)) {
            series.push((r.pattern, r.method));
        }
        if !snrs.contains(&r.snr_db) {
            snrs.push(r.snr_db);
        }
    }
    let mut out = String::from("# snr_db");
    for (p, m) in &series {
        let _ = write!(out, " {p}/{m}");
    }
    out.push('\n');
    for &snr in &snrs {
        let _ = write!(out, "{snr}");
        for &(p, m) in &series {
            match result.row(p, m, snr) {
                Some(r) => {
                    let _ = write!(out, " {}", value(r));
                }
                None => out.push_str(" NaN"),
            }
        }
        out.push('\n');
    }
    out
}

/// Write every result file into directory `dir`, returning the paths.
pub fn write_results(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let files = [
        (RESULTS_FILE, results_csv(result)),
        (DETAIL_FILE, detail_csv(result)),
        (FIG5_FILE, gnuplot_columns(result, |_| true, |r| r.ber_noise)),
        (FIG6_FILE, gnuplot_columns(result, |_| true, |r| r.ber_total)),
        (FIG7_FILE, gnuplot_columns(result, |r| r.pattern == PatternKind::Rectangular, |r| r.ber_total)),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Row of `results.csv` as parsed back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub pattern: PatternKind,
    pub method: crate::estimator::Method,
    pub snr_db: f64,
    pub ber_total: f64,
    pub ber_floor: f64,
    pub ber_noise: f64,
    pub mse: f64,
    pub ci_halfwidth: f64,
    pub seeds: usize,
}

pub fn parse_results(text: &str) -> Result<Vec<ParsedRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Parse(format!("expected 9 fields: '{l}'")));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{e}: '{s}'")));
            Ok(ParsedRow {
                pattern: f[0].parse()?,
                method: f[1].parse()?,
                snr_db: num(f[2])?,
                ber_total: num(f[3])?,
                ber_floor: num(f[4])?,
                ber_noise: num(f[5])?,
                mse: num(f[6])?,
                ci_halfwidth: num(f[7])?,
                seeds: f[8].trim().parse().map_err(|e| Error::Parse(format!("{e}: '{}'", f[8])))?,
            })
        })
        .collect()
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ParsedRow>> {
    parse_results(&fs::read_to_string(path)?)
}
