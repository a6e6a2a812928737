//! Run configuration read from TOML. Unknown keys are rejected at every
//! level so a misspelled hyperparameter cannot silently fall back to its
//! default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EvalConfig;
use crate::trainer::FitConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Target mesh: an OBJ path or `builtin:NAME`.
    pub mesh: Option<String>,
    pub out: Option<PathBuf>,
    /// Occupancy pool cache directory; defaults to `<out>/occupancy`.
    pub occupancy_cache: Option<PathBuf>,
    /// Uniform occupancy points labelled once per mesh.
    pub pool_size: usize,
    /// Center and scale the mesh into the sampling cube before use.
    pub normalize: bool,
    pub fit: FitConfig,
    pub eval: EvalConfig,
    pub export: ExportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    /// Latitude and longitude bands of the exported sphere tessellation.
    pub resolution: (usize, usize),
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig { resolution: (64, 64) }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: None,
            out: None,
            occupancy_cache: None,
            pool_size: 100_000,
            normalize: true,
            fit: FitConfig::default(),
            eval: EvalConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig {
            fit: FitConfig::desk(),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::usage("pool_size must be at least 1"));
        }
        self.fit.validate()
    }
}
