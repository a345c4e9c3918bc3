//! Deterministic table and JSON output with atomic file replacement.

use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::config::Format;

/// Column-oriented table.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

/// Seventeen significant digits, round-trip exact.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            columns: &'a [&'static str],
            rows: &'a [Vec<f64>],
        }
        let mut s = serde_json::to_string_pretty(&Out {
            columns: &self.columns,
            rows: &self.rows,
        })
        .expect("tables serialize");
        s.push('\n');
        s
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes a table as `<stem>.csv` or `<stem>.json` and returns the file name.
pub fn write_table(dir: &Path, stem: &str, table: &Table, format: Format) -> std::io::Result<String> {
    let (name, body) = match format {
        Format::Csv => (format!("{stem}.csv"), table.to_csv()),
        Format::Json => (format!("{stem}.json"), table.to_json()),
    };
    write_atomic(&dir.join(&name), &body)?;
    Ok(name)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("summaries serialize");
    s.push('\n');
    write_atomic(&dir.join(name), &s)
}

/// One named check in a summary: the measured value, its threshold, and
/// whether it passed.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `measured ≤ threshold`.
    pub fn at_most(measured: f64, threshold: f64) -> Self {
        Self {
            pass: measured <= threshold,
            measured,
            threshold,
        }
    }
    /// Passes when `measured ≥ threshold`.
    pub fn at_least(measured: f64, threshold: f64) -> Self {
        Self {
            pass: measured >= threshold,
            measured,
            threshold,
        }
    }
    /// Passes when `measured > threshold`.
    pub fn above(measured: f64, threshold: f64) -> Self {
        Self {
            pass: measured > threshold,
            measured,
            threshold,
        }
    }
}

pub type Checks = BTreeMap<&'static str, Check>;
