use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use calabi_core::checks::CheckReport;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_point: Vec<f64>,
}

impl From<&CheckReport> for ReportJson {
    fn from(r: &CheckReport) -> Self {
        ReportJson {
            name: r.name.clone(),
            max_residual: r.max_residual,
            tolerance: r.tolerance,
            pass: r.pass,
            worst_point: r.worst_point.clone(),
        }
    }
}

/// Top-level JSON document written by every command.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub command: String,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub reports: Vec<ReportJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
}

impl Envelope {
    pub fn new(command: &str, inputs: Vec<String>, seed: u64) -> Envelope {
        Envelope {
            command: command.to_string(),
            inputs,
            seed,
            reports: Vec::new(),
            verdict: None,
            factors: None,
            frame: None,
            outputs: Vec::new(),
        }
    }

    pub fn push_reports<'a>(&mut self, reports: impl IntoIterator<Item = &'a CheckReport>) {
        self.reports.extend(reports.into_iter().map(ReportJson::from));
    }

    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn cloud_csv(samples: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let width = samples.first().map_or(0, Vec::len);
    w.write_record((1..=width).map(|i| format!("x{i}")))?;
    for row in samples {
        w.serialize(row)?;
    }
    Ok(w.into_inner()?)
}
