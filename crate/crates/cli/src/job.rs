//! Job files.

use std::fs;
use std::path::{Path, PathBuf};

use l1h_core::functions::FunctionSpec;
use l1h_core::spaces::SpaceSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Canonical,
    Approximate,
    Verify,
    Sample,
}

/// Output paths; relative ones are taken from the job file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub json: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub function: FunctionSpec,
    pub space: SpaceSpec,
    #[serde(default)]
    pub actions: Vec<Action>,
    #[serde(default = "default_resolution")]
    pub sample_resolution: usize,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub oracle_grid: Option<usize>,
}

fn default_resolution() -> usize {
    1001
}

impl JobSpec {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut spec: JobSpec =
            serde_json::from_str(&text).map_err(|e| format!("invalid job file {}: {e}", path.display()))?;
        if spec.actions.is_empty() {
            return Err(format!("job file {} lists no actions", path.display()));
        }
        if spec.sample_resolution < 2 {
            return Err(format!("sample_resolution must be at least 2, got {}", spec.sample_resolution));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut spec.outputs.json, &mut spec.outputs.csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }
}
