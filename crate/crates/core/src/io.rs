//! Run directory output: CSV tables with 17 significant digits, a JSON
//! manifest, and a plain-text PASS/FAIL summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// `v` with 17 significant digits, which reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Column-oriented table of numbers.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidParameter(format!("row has {} values for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
        let mut t = Table { columns: header.split(',').map(str::to_string).collect(), rows: Vec::new() };
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line.split(',').map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad CSV value {v:?}")))).collect::<Result<_>>()?;
            t.push(row)?;
        }
        Ok(t)
    }
}

/// One line of `summary.txt`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Status {
    Pass,
    Fail,
    Note,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.into(), status: if pass { Status::Pass } else { Status::Fail }, detail }
    }

    pub fn note(name: &str, detail: String) -> Self {
        Check { name: name.into(), status: Status::Note, detail }
    }

    pub fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Note => "NOTE",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.status != Status::Fail)
}

/// A run directory, created on demand.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let mut f = fs::File::create(self.root.join(name))?;
        f.write_all(text.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write_text(name, &table.to_csv())
    }

    pub fn write_summary(&mut self, checks: &[Check]) -> Result<()> {
        let text: String = checks.iter().map(|c| c.line() + "\n").collect();
        self.write_text("summary.txt", &text)
    }

    /// Writes `manifest.json` listing every file written so far. Contains no
    /// timestamps, so reruns of the same config reproduce it exactly.
    pub fn write_manifest(&mut self, command: &str, config: &crate::config::Config, results: serde_json::Value) -> Result<()> {
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let manifest = serde_json::json!({
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": config.seed,
            "config": config,
            "files": files,
            "results": results,
        });
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        self.write_text("manifest.json", &text)
    }
}
