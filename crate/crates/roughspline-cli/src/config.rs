//! On-disk JSON documents the CLI reads. Every document carries a
//! `schema_version` so stale files fail loudly instead of half-parsing, and
//! unknown fields are rejected with their JSON path spelled out.

use crate::CliFailure;
use roughspline::study::StudyConfig;
use roughspline::TargetFunction;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level document for `study run`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub schema_version: u32,
    pub study: StudyConfig,
    /// Default output paths; command-line flags override them.
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

/// Top-level document for `surrogate demo`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub schema_version: u32,
    /// Probed target; must be one-dimensional.
    pub target: TargetFunction,
    /// Assumed data smoothness order.
    pub k: u32,
    /// Seminorm order to measure, at least `k`.
    pub m: u32,
    /// Node separations to probe, strictly decreasing.
    pub q_list: Vec<f64>,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Reads and deserializes a JSON document. Errors name the file and the JSON
/// path of the offending field so it can be found in the document.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliFailure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliFailure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        CliFailure::Config(format!("{}: at {}: {}", path.display(), e.path(), e.inner()))
    })
}

pub fn require_schema(version: u32) -> Result<(), CliFailure> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(CliFailure::Config(format!(
            "schema_version {version} is not supported; this build reads version {SCHEMA_VERSION}"
        )))
    }
}
