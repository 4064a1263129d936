//! Result files, check records and the run summary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    /// Measured quantity, when the check has one.
    pub value: Option<f64>,
    /// Threshold the value is compared against.
    pub limit: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(id: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            passed,
            value: None,
            limit: None,
            detail: detail.into(),
        }
    }

    /// `value < limit`.
    pub fn below(id: impl Into<String>, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            passed: value < limit,
            value: Some(value),
            limit: Some(limit),
            detail: detail.into(),
        }
    }

    /// `value > limit`.
    pub fn above(id: impl Into<String>, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            passed: value > limit,
            ..Self::below(id, value, limit, detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: &'a str,
    seed: u64,
    exit_code: i32,
    checks: &'a [Check],
    failure: Option<&'a RunFailure>,
    files: &'a [String],
}

/// Output directory plus the provenance stamped into every file.
pub struct Writer {
    dir: PathBuf,
    pub config_hash: String,
    seed: u64,
    command: &'static str,
    files: Vec<String>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_text().as_bytes()))
}

impl Writer {
    pub fn create(cfg: &RunConfig) -> io::Result<Self> {
        fs::create_dir_all(&cfg.output_dir)?;
        Ok(Self {
            dir: cfg.output_dir.clone(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            command: cfg.command.as_str(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn provenance(&self) -> String {
        format!(
            "# generator=conelab {VERSION}\n# command={}\n# config_sha256={}\n# seed={}\n",
            self.command, self.config_hash, self.seed
        )
    }

    /// Write a CSV; `body` may carry its own `#` header, which follows the provenance lines.
    pub fn csv(&mut self, name: &str, schema: &str, body: &str) -> io::Result<()> {
        // the schema line stays first
        let (schema_line, rest) = match body.split_once('\n') {
            Some((first, rest)) if first.starts_with("# conelab ") => (format!("{first}\n"), rest),
            _ => (format!("# conelab {schema} v1\n"), body),
        };
        let text = schema_line + &self.provenance() + rest;
        self.raw(name, &text)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.raw(name, &text)
    }

    pub fn raw(&mut self, name: &str, text: &str) -> io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn summary(&mut self, checks: &[Check], failure: Option<&RunFailure>, exit_code: i32) -> io::Result<()> {
        let mut files = self.files.clone();
        files.push("summary.json".into());
        let s = Summary {
            command: self.command,
            version: VERSION,
            config_sha256: &self.config_hash,
            seed: self.seed,
            exit_code,
            checks,
            failure,
            files: &files,
        };
        let mut text = serde_json::to_string_pretty(&s).map_err(io::Error::other)?;
        text.push('\n');
        self.raw("summary.json", &text)
    }
}

/// Header and numeric rows of a `#`-annotated CSV.
pub fn read_csv_columns(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.trim().parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}
