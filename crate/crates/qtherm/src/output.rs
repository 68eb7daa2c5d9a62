//! CSV tables and the per-run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cache::fmt_f64;
use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_f64(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

/// Builds a row from heterogeneous values.
#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => {
        vec![$($crate::output::Cell::from($v)),*]
    };
}

/// One output file. Column names carry their unit in brackets; `[-]` marks
/// dimensionless quantities and `[W]` energies in units of the bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(|e| RunError::io(&path, e))?;
        Ok(path)
    }
}

/// How the samples of one sweep point were obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub label: String,
    pub k: usize,
    pub gamma: f64,
    pub accepted: usize,
    pub trials: u64,
    pub acceptance_rate: f64,
    pub from_cache: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a ExperimentConfig,
    pub trials: &'a [TrialRecord],
    pub outputs: Vec<String>,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
}

impl Manifest<'_> {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| RunError::Config(format!("manifest serialization: {}", e)))?;
        fs::write(&path, text + "\n").map_err(|e| RunError::io(&path, e))?;
        Ok(path)
    }
}
