//! TOML run configuration and the JSON manifest written by every command.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use morphcloud::biometrics::AttemptRule;
use morphcloud::mad::SvmParams;
use morphcloud::pipeline::MorphConfig;
use morphcloud::quality::QualityConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub morph: MorphConfig,
    pub quality: QualityConfig,
    pub vuln: VulnConfig,
    pub svm: SvmParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VulnConfig {
    /// Target false-accept rate for the verification threshold.
    pub far: f64,
    pub rule: AttemptRule,
}

impl Default for VulnConfig {
    fn default() -> Self {
        Self {
            far: 0.001,
            rule: AttemptRule::Max,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
    }
}

/// Everything needed to rerun a command: inputs, the resolved
/// configuration, outputs and a summary of what happened.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub config: serde_json::Value,
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: serde_json::to_value(config).expect("configs serialize"),
            summary: serde_json::Value::Null,
        }
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.into(), path.to_path_buf());
        self
    }

    pub fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.into(), path.to_path_buf());
        self
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("manifest {}: {e}", path.display())))
    }

    pub fn required_input(&self, name: &str) -> Result<&Path, Failure> {
        self.inputs
            .get(name)
            .map(PathBuf::as_path)
            .ok_or_else(|| Failure::input(format!("manifest has no '{name}' input")))
    }

    pub fn save(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Failure::input(format!("manifest {}: {e}", path.display())))
    }
}

/// `out.ply` -> `out.manifest.json`.
pub fn default_manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
