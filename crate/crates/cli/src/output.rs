//! Rendering of command results as JSON, CSV or an aligned text table.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::{CliError, Format};

pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub enum Rendered {
    Json(Value),
    Tabular { json: Value, table: Table },
}

/// Fixed-point for moderate magnitudes, scientific otherwise.
pub fn num(x: f64) -> String {
    if x == 0.0 || (x.abs() >= 1e-3 && x.abs() < 1e5) {
        format!("{x:.8}")
    } else {
        format!("{x:.4e}")
    }
}

fn csv_text(table: &Table) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(&table.headers).map_err(fail)?;
    for row in &table.rows {
        w.write_record(row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn aligned(table: &Table) -> String {
    let mut widths: Vec<usize> = table.headers.iter().map(|h| h.len()).collect();
    for row in &table.rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(table.headers.clone());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in &table.rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

/// Writes to `path`, or appends to `out` for stdout.
pub fn emit(rendered: Rendered, format: Format, path: Option<&Path>, out: &mut String) -> Result<(), CliError> {
    let text = match (rendered, format) {
        (Rendered::Json(v), Format::Json) | (Rendered::Tabular { json: v, .. }, Format::Json) => {
            serde_json::to_string_pretty(&v).expect("JSON values serialize") + "\n"
        }
        (Rendered::Tabular { table, .. }, Format::Csv) => csv_text(&table)?,
        (Rendered::Tabular { table, .. }, Format::Table) => aligned(&table),
        (Rendered::Json(_), f) => {
            return Err(CliError::Usage(format!("--format {f:?} is only available for tabular commands")))
        }
    };
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.push_str(&text),
    }
    Ok(())
}
