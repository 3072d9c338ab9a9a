//! Number formatting and table rendering.

use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;
const SIGNIFICANT: i32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Seven significant digits with trailing zeros dropped.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "Inf".into()
        } else {
            "-Inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        let s = format!("{:.*e}", (SIGNIFICANT - 1) as usize, v);
        let (mant, exp) = s.split_once('e').unwrap();
        return format!("{}e{}", trim(mant), exp);
    }
    let decimals = (SIGNIFICANT - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit, e.g. 9.9999999 -> 10.000000
    trim(&s).to_string()
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Align {
    Left,
    Right,
}

/// Renders rows under a header with columns padded to a common width.
pub fn table(header: &[String], rows: &[Vec<String>], align: &[Align]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(
                |(i, cell)| match align.get(i).copied().unwrap_or(Align::Right) {
                    Align::Left => format!("{cell:<w$}", w = width[i]),
                    Align::Right => format!("{cell:>w$}", w = width[i]),
                },
            )
            .collect();
        out.push_str(cells.join(" ").trim_end());
        out.push('\n');
    }
    out
}

pub fn csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Wraps a payload with the schema version.
#[derive(Serialize)]
pub struct Versioned<T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

pub fn json<T: Serialize>(body: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn json_line<T: Serialize>(body: T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer(
        &mut *out,
        &Versioned {
            schema_version: SCHEMA_VERSION,
            body,
        },
    )?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Full precision for machine-readable output.
pub fn exact(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt_exact(v: Option<f64>) -> String {
    v.map_or_else(String::new, exact)
}
