//! Experiment reports and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smp_core::barrier::BarrierCertificate;

use crate::config::Scenario;
use crate::error::LabError;

/// A numeric table destined for a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write(&self, path: &Path) -> Result<(), LabError> {
        let io = |e: csv::Error| LabError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.flush().map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: Scenario,
    pub pass: bool,
    pub seed: u64,
    pub checks: BTreeMap<String, bool>,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub certificate: Option<BarrierCertificate>,
    /// Unix seconds at the start of the run.
    pub timestamp: u64,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new(experiment: Scenario, seed: u64) -> Self {
        Self {
            experiment,
            pass: true,
            seed,
            checks: BTreeMap::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            certificate: None,
            timestamp: 0,
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, ok: bool) {
        self.checks.insert(name.to_string(), ok);
        self.pass = self.checks.values().all(|&v| v);
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn add_table(&mut self, table: Table) {
        self.artifacts.push(table.file_name());
        self.tables.push(table);
    }
}

/// Writes `report.json` and one CSV per table into `dir`, overwriting.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for table in &report.tables {
        let path = dir.join(table.file_name());
        table.write(&path)?;
        written.push(path);
    }
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(|e| LabError::Io {
        path: path.clone(),
        source: e.into(),
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(|source| LabError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(written)
}
