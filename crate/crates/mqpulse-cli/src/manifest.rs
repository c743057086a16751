//! Run manifest: the normalized config snapshot plus one record per
//! completed optimization, written as JSON next to the run artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const ARTIFACT_VERSION: &str = "mqpulse-run-1";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    /// "grape" or "group".
    pub mode: String,
    pub basis_size: Option<usize>,
    pub seed: u64,
    pub final_fidelity: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub n_evaluations: usize,
    pub termination: String,
    pub wall_seconds: f64,
    /// Paths relative to the manifest directory.
    pub pulse_file: String,
    pub coefficients_file: Option<String>,
    pub history_file: String,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FailureRecord {
    pub mode: String,
    pub basis_size: Option<usize>,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config: RunConfig,
    pub ensemble_file: String,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<FailureRecord>,
    pub wall_seconds_total: f64,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        // Every referenced artifact must exist before the manifest
        // claims it.
        for rec in &self.runs {
            for file in [Some(&rec.pulse_file), rec.coefficients_file.as_ref(), Some(&rec.history_file)]
                .into_iter()
                .flatten()
            {
                let p = dir.join(file);
                if !p.exists() {
                    return Err(CliError::Format(format!(
                        "manifest references missing file {}",
                        p.display()
                    )));
                }
            }
        }
        if !dir.join(&self.ensemble_file).exists() {
            return Err(CliError::Format(format!(
                "manifest references missing ensemble file {}",
                self.ensemble_file
            )));
        }
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Format(format!("cannot read {}: {e}", path.display())))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if manifest.artifact_version != ARTIFACT_VERSION {
            return Err(CliError::Format(format!(
                "unsupported artifact version {}",
                manifest.artifact_version
            )));
        }
        Ok(manifest)
    }
}
