//! Machine-readable result tables with reproducibility headers.
//!
//! Both formats embed the crate version, the SHA-256 digest of the resolved
//! configuration, and the configuration itself, so a result file is enough
//! to rerun the experiment that produced it. Data sections are deterministic
//! byte-for-byte for a given config; timing goes to stderr only.

use crate::error::{RabiError, Result};
use std::io::Write;

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Str(String),
    /// Rendered as an empty CSV field / JSON `null`.
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// A complete result table plus its reproducibility header.
#[derive(Debug, Clone)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Resolved configuration echoed into the header.
    pub config_toml: String,
    /// Hex SHA-256 of `config_toml`.
    pub config_digest: String,
}

impl Report {
    pub fn new(columns: Vec<&'static str>, config_toml: String, config_digest: String) -> Self {
        Report {
            columns,
            rows: Vec::new(),
            config_toml,
            config_digest,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Serialize to the named format (`csv` or `json`).
    pub fn render(&self, format: &str) -> Result<String> {
        match format {
            "csv" => Ok(self.to_csv()),
            "json" => Ok(self.to_json()),
            other => Err(RabiError::Config(format!(
                "unknown output format '{other}' (expected csv or json)"
            ))),
        }
    }

    /// CSV with `#`-prefixed header lines, '.' decimal separator, and
    /// floats at full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# rabicd v{}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("# config sha256: {}\n", self.config_digest));
        out.push_str("# config:\n");
        for line in self.config_toml.lines() {
            out.push_str("#   ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(csv_field).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// JSON object with the same header metadata, columns, and row arrays.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!(
            "  \"tool\": \"rabicd\",\n  \"version\": {},\n",
            json_string(env!("CARGO_PKG_VERSION"))
        ));
        out.push_str(&format!(
            "  \"config_sha256\": {},\n",
            json_string(&self.config_digest)
        ));
        out.push_str("  \"config_toml\": [\n");
        let lines: Vec<String> = self
            .config_toml
            .lines()
            .map(|l| format!("    {}", json_string(l)))
            .collect();
        out.push_str(&lines.join(",\n"));
        out.push_str("\n  ],\n");
        let cols: Vec<String> = self.columns.iter().map(|c| json_string(c)).collect();
        out.push_str(&format!("  \"columns\": [{}],\n", cols.join(", ")));
        out.push_str("  \"rows\": [\n");
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                let cells: Vec<String> = row.iter().map(json_cell).collect();
                format!("    [{}]", cells.join(", "))
            })
            .collect();
        out.push_str(&rows.join(",\n"));
        out.push_str("\n  ]\n}\n");
        out
    }

    /// Write to `path` in `format`; `-` writes to stdout.
    pub fn write(&self, path: &str, format: &str) -> Result<()> {
        let text = self.render(format)?;
        if path == "-" {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| std::io::Error::new(e.kind(), format!("writing stdout: {e}")))?;
        } else {
            std::fs::write(path, text)
                .map_err(|e| std::io::Error::new(e.kind(), format!("writing {path}: {e}")))?;
        }
        Ok(())
    }
}

fn csv_field(cell: &Cell) -> String {
    match cell {
        Cell::Float(v) => format_float(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Str(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

fn json_cell(cell: &Cell) -> String {
    match cell {
        Cell::Float(v) if v.is_finite() => format_float(*v),
        Cell::Float(v) => json_string(&format_float(*v)),
        Cell::Int(v) => v.to_string(),
        Cell::Str(s) => json_string(s),
        Cell::Empty => "null".into(),
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
