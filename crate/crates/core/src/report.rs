//! Tabular report output: CSV for machines, aligned text for people.
//!
//! CSV floats carry 17 significant digits so that values round-trip.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Text(String),
    Int(u64),
    Float(f64),
    Missing,
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format!("{f:.16e}"),
            Value::Missing => String::new(),
        }
    }

    fn display(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) if *f != 0.0 && (f.abs() < 1e-3 || f.abs() >= 1e6) => format!("{f:.4e}"),
            Value::Float(f) => format!("{f:.4}"),
            Value::Missing => "-".into(),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as u64)
    }
}

impl From<u64> for Value {
    fn from(i: u64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(f: f64) -> Self {
        Value::Float(f)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Text(b.to_string())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

/// A report with a fixed header and one row per cell.
pub trait Tabular {
    fn columns(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<Value>>;
}

pub fn write_csv<T: Tabular + ?Sized, W: Write>(table: &T, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    w.write_record(table.columns()).map_err(wrap)?;
    for row in table.rows() {
        w.write_record(row.iter().map(Value::csv)).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_csv_file<T: Tabular + ?Sized>(table: &T, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(table, std::io::BufWriter::new(file))
}

/// Right-aligned text table.
pub fn render_text<T: Tabular + ?Sized>(table: &T) -> String {
    let header: Vec<String> = table.columns().iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = table.rows().iter().map(|r| r.iter().map(Value::display).collect()).collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{}{c}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header);
    for row in &body {
        line(row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct T;
    impl Tabular for T {
        fn columns(&self) -> Vec<&'static str> {
            vec!["method", "n", "kappa"]
        }
        fn rows(&self) -> Vec<Vec<Value>> {
            vec![
                vec!["blb".into(), 100usize.into(), 0.1f64.into()],
                vec!["af".into(), Value::Missing, (1.0f64 / 3.0).into()],
            ]
        }
    }

    #[test]
    fn csv_round_trips_floats() {
        let mut buf = Vec::new();
        write_csv(&T, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("method,n,kappa"));
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row[1], "");
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn text_is_aligned() {
        let text = render_text(&T);
        let widths: Vec<usize> = text.lines().map(|l| l.len()).collect();
        assert!(widths.iter().all(|&w| w == widths[0]), "{text}");
        assert!(text.contains("0.3333"));
    }
}
