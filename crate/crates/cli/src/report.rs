use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Bumped whenever a field of [`Report`] changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// What a command leaves behind in `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    /// CSV files written next to the report, relative to its directory.
    pub tables: Vec<String>,
    pub summary: Map<String, Value>,
    pub passed: bool,
    pub elapsed_seconds: f64,
}

/// Collects checks, tables and summary values for one command.
pub struct ReportBuilder {
    dir: PathBuf,
    command: String,
    started: Instant,
    checks: Vec<Check>,
    tables: Vec<String>,
    summary: Map<String, Value>,
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl ReportBuilder {
    pub fn new(out: &Path, command: &str) -> Result<Self, CliError> {
        let dir = out.join(command);
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(ReportBuilder {
            dir,
            command: command.to_string(),
            started: Instant::now(),
            checks: Vec::new(),
            tables: Vec::new(),
            summary: Map::new(),
        })
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn note<V: Serialize>(&mut self, key: &str, value: V) -> Result<(), CliError> {
        let value = serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.summary.insert(key.to_string(), value);
        Ok(())
    }

    /// Writes `name.csv` with one row per item; headers come from the field names.
    pub fn table<R: Serialize>(
        &mut self,
        name: &str,
        rows: impl IntoIterator<Item = R>,
    ) -> Result<(), CliError> {
        let file = format!("{name}.csv");
        let path = self.dir.join(&file);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        for row in rows {
            writer.serialize(row).map_err(|e| io(&path, e))?;
        }
        writer.flush().map_err(|e| io(&path, e))?;
        self.tables.push(file);
        Ok(())
    }

    pub fn finish(self, config: &RunConfig) -> Result<Report, CliError> {
        let report = Report {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            config: config.clone(),
            passed: self.checks.iter().all(|c| c.passed),
            checks: self.checks,
            tables: self.tables,
            summary: self.summary,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("report.json");
        let text = serde_json::to_string_pretty(&report).map_err(|e| io(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        Ok(report)
    }
}
