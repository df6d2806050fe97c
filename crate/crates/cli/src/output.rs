//! Artifact writing. Every file carries the command, seed and full resolved
//! config; `summary.json` also lists the SHA-256 of every other file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, Command};

/// One pass/fail assertion of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    /// `"p >"`, `"|z| <="` or `"<="`: how `statistic` is compared with `threshold`.
    pub rule: &'static str,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn p_value(name: impl Into<String>, p: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic: p,
            rule: "p >",
            threshold,
            passed: p > threshold,
        }
    }

    pub fn z_score(name: impl Into<String>, z: f64, sigmas: f64) -> Self {
        Self {
            name: name.into(),
            statistic: z,
            rule: "|z| <=",
            threshold: sigmas,
            passed: z.abs() <= sigmas,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            statistic: value,
            rule: "<=",
            threshold: bound,
            passed: value <= bound,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    seed: u64,
    passed: bool,
    checks: &'a [Check],
    violations: &'a [String],
    results: &'a serde_json::Value,
    files: &'a BTreeMap<String, String>,
    config: &'a ExperimentConfig,
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub violations: Vec<String>,
    pub dir: PathBuf,
    /// SHA-256 of `summary.json`, which covers every other file.
    pub digest: String,
}

pub struct Artifacts {
    dir: PathBuf,
    command: Command,
    config: ExperimentConfig,
    config_json: String,
    files: BTreeMap<String, String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Artifacts {
    pub fn create(command: Command, config: &ExperimentConfig) -> Result<Self, CliError> {
        let dir = config.output.clone();
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self {
            dir,
            command,
            config: config.clone(),
            config_json: serde_json::to_string(config).expect("config serializes"),
            files: BTreeMap::new(),
        })
    }

    /// `#` comment lines naming the command, seed and resolved config.
    fn provenance(&self) -> String {
        format!(
            "# palmcox {} seed={}\n# config {}\n",
            self.command, self.config.seed, self.config_json
        )
    }

    fn write(&mut self, name: &str, body: String) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body.as_bytes()).map_err(io_err(&path))?;
        self.files.insert(name.to_owned(), sha256_hex(body.as_bytes()));
        Ok(())
    }

    /// CSV table with the provenance as leading comment lines.
    pub fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut s = self.provenance();
        s.push_str(header);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        self.write(name, s)
    }

    /// A text body whose own header must stay first; provenance is appended.
    pub fn text_trailing(&mut self, name: &str, body: String) -> Result<(), CliError> {
        let s = body + &self.provenance();
        self.write(name, s)
    }

    /// A text body with provenance prepended.
    pub fn text_leading(&mut self, name: &str, body: String) -> Result<(), CliError> {
        let s = self.provenance() + &body;
        self.write(name, s)
    }

    /// SVG document; provenance goes into a `<metadata>` element after the
    /// opening tag.
    pub fn svg(&mut self, name: &str, doc: String) -> Result<(), CliError> {
        let meta = xml_escape(&self.provenance());
        let at = doc.find('>').map_or(0, |i| i + 1);
        let mut s = String::with_capacity(doc.len() + meta.len() + 32);
        s.push_str(&doc[..at]);
        write!(s, "\n<metadata>\n{meta}</metadata>").unwrap();
        s.push_str(&doc[at..]);
        self.write(name, s)
    }

    pub fn finish(
        mut self,
        checks: Vec<Check>,
        violations: Vec<String>,
        results: serde_json::Value,
    ) -> Result<Outcome, CliError> {
        let passed = checks.iter().all(|c| c.passed) && violations.is_empty();
        let summary = Summary {
            command: self.command.name(),
            seed: self.config.seed,
            passed,
            checks: &checks,
            violations: &violations,
            results: &results,
            files: &self.files,
            config: &self.config,
        };
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        let digest = sha256_hex(text.as_bytes());
        let path = self.dir.join("summary.json");
        std::fs::write(&path, text).map_err(io_err(&path))?;
        self.files.insert("summary.json".into(), digest.clone());
        Ok(Outcome {
            passed,
            checks,
            violations,
            dir: self.dir,
            digest,
        })
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
