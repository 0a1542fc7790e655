use anyhow::{Context, Result};
use gaugebeam::checks::{Bound, Measurement};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// One row of the pass/fail manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub stage: String,
    pub check: String,
    pub anchor: String,
    pub value: Option<f64>,
    pub bound: Option<Bound>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Row {
    pub fn measured(stage: &str, anchor: &str, m: Measurement) -> Self {
        Self {
            stage: stage.into(),
            check: m.name.clone(),
            anchor: anchor.into(),
            value: Some(m.value),
            passed: m.passed(),
            bound: Some(m.bound),
            error: None,
        }
    }

    pub fn failed(stage: &str, error: &anyhow::Error) -> Self {
        Self { stage: stage.into(), check: "completed".into(), anchor: "-".into(), value: None, bound: None, passed: false, error: Some(format!("{error:#}")) }
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        match (&self.error, self.value, self.bound) {
            (Some(e), _, _) => format!("{status} {}/{} error: {e}", self.stage, self.check),
            (None, Some(v), Some(b)) => format!("{status} {}/{} [{}] {v:.3e} ({b})", self.stage, self.check, self.anchor),
            _ => format!("{status} {}/{} [{}]", self.stage, self.check, self.anchor),
        }
    }
}

/// Output directory; each file has a single writer.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.record(&path)
    }

    /// Registers a file written into the directory by someone else.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let name = path.strip_prefix(&self.dir).with_context(|| format!("{} is outside {}", path.display(), self.dir.display()))?;
        let name = name.to_string_lossy().into_owned();
        if !self.files.contains(&name) {
            self.files.push(name);
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}
