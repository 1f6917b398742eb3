//! Run manifests: what was run, on which bytes, with which settings.
//!
//! The `digest` covers everything except the timestamps, so two runs with
//! the same command, configuration and input/output bytes share a digest.
//! Timestamps come from `SOURCE_DATE_EPOCH` when it is set.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::failure::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
struct Digested<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: &'a serde_json::Value,
    seed: Option<u64>,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
    pub digest: String,
}

/// Collects inputs while a command runs; [`ManifestBuilder::finish`] hashes
/// the outputs once they exist.
#[derive(Debug)]
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<(String, PathBuf)>,
    started_at: String,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config: serde_json::Value::Null,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: timestamp(),
        }
    }

    pub fn config(&mut self, config: serde_json::Value) {
        self.config = config;
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Hashes an input file, or every file of an input directory.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        self.inputs.extend(digest_path(role, path)?);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) {
        self.outputs.push((role.to_string(), path.to_owned()));
    }

    pub fn finish(self) -> Result<RunManifest, CliError> {
        let mut outputs = Vec::new();
        for (role, path) in &self.outputs {
            outputs.extend(digest_path(role, path)?);
        }
        let tool = "lexlabel";
        let version = env!("CARGO_PKG_VERSION");
        let digested = Digested {
            tool,
            version,
            command: &self.command,
            config: &self.config,
            seed: self.seed,
            inputs: &self.inputs,
            outputs: &outputs,
        };
        let canonical = serde_json::to_vec(&digested).expect("plain struct");
        Ok(RunManifest {
            tool: tool.into(),
            version: version.into(),
            command: self.command,
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs,
            started_at: self.started_at,
            finished_at: timestamp(),
            digest: hex::encode(Sha256::digest(&canonical)),
        })
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut json = serde_json::to_string_pretty(self).expect("plain struct");
        json.push('\n');
        lexlabel::gateway::vecfile::write_atomic(path, json.as_bytes())?;
        Ok(())
    }
}

/// `<out>.manifest.json` next to a file output.
pub fn default_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn digest_path(role: &str, path: &Path) -> Result<Vec<FileDigest>, CliError> {
    let io = |e| lexlabel::Error::Io {
        path: path.to_owned(),
        source: e,
    };
    if path.is_dir() {
        let mut names: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(io)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io)?;
        names.retain(|p| p.is_file());
        names.sort();
        let mut out = Vec::with_capacity(names.len());
        for p in names {
            let name = p.file_name().expect("listed file").to_string_lossy().into_owned();
            out.extend(digest_path(&format!("{role}/{name}"), &p)?);
        }
        return Ok(out);
    }
    let bytes = std::fs::read(path).map_err(io)?;
    Ok(vec![FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    }])
}

fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| OffsetDateTime::from_unix_timestamp(secs).ok())
        .unwrap_or_else(OffsetDateTime::now_utc);
    now.format(&Rfc3339).expect("representable timestamp")
}
