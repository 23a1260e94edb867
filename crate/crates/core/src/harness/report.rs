//! Roll-up of the `checks.csv` and `summary.csv` files under an output
//! directory.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStatus {
    pub id: String,
    pub checks: usize,
    pub failed_checks: Vec<String>,
    pub failed_rows: usize,
    /// The run stopped on an error.
    pub aborted: bool,
}

impl ScenarioStatus {
    pub fn status(&self) -> &'static str {
        if self.aborted {
            "error"
        } else if self.failed_checks.is_empty() && self.failed_rows == 0 {
            "pass"
        } else {
            "violation"
        }
    }
}

/// Reads every `<dir>/<id>/summary.csv` (with its `checks.csv`), sorted by id.
pub fn collect(dir: &Path) -> Result<Vec<ScenarioStatus>> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("summary.csv").is_file())
        .collect();
    entries.sort();
    let mut out = Vec::new();
    for p in entries {
        let summary = std::fs::read_to_string(p.join("summary.csv"))?;
        let checks = std::fs::read_to_string(p.join("checks.csv")).unwrap_or_default();
        let aborted = summary.lines().any(|l| l.starts_with("# FAILED"));
        let failed_rows = summary
            .lines()
            .skip(1)
            .filter(|l| !l.starts_with('#') && l.ends_with(",false"))
            .count();
        let mut n = 0;
        let mut failed_checks = Vec::new();
        for line in checks.lines().skip(1) {
            n += 1;
            let mut it = line.splitn(3, ',');
            let (name, holds) = (it.next().unwrap_or(""), it.next().unwrap_or(""));
            if holds != "true" {
                failed_checks.push(name.to_string());
            }
        }
        out.push(ScenarioStatus {
            id: p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            checks: n,
            failed_checks,
            failed_rows,
            aborted,
        });
    }
    Ok(out)
}

/// `scenario,status,checks,failed_checks,failed_rows`
pub fn to_csv(rows: &[ScenarioStatus]) -> String {
    let mut out = String::from("scenario,status,checks,failed_checks,failed_rows\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},\"{}\",{}",
            r.id,
            r.status(),
            r.checks,
            r.failed_checks.join(" "),
            r.failed_rows
        );
    }
    out
}
