//! Pipeline configuration file.
//!
//! All numeric knobs live in one JSON document; CLI flags override the
//! values loaded from it. The default path comes from the `SIGSHELL_CONFIG`
//! environment variable when set.

use crate::dataset::SynthConfig;
use crate::metric::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CONFIG_ENV_VAR: &str = "SIGSHELL_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairsSection {
    pub genuine_pairs_per_writer: usize,
    pub forged_pairs_per_writer: usize,
    pub triplets_per_writer: usize,
    pub cross_writer_fraction: f64,
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    /// Assign writers by sorted id (published splits) instead of shuffling.
    pub ordered: bool,
}

impl Default for PairsSection {
    fn default() -> Self {
        Self {
            genuine_pairs_per_writer: 100,
            forged_pairs_per_writer: 100,
            triplets_per_writer: 100,
            cross_writer_fraction: 0.2,
            train_fraction: 2.0 / 3.0,
            valid_fraction: 1.0 / 6.0,
            test_fraction: 1.0 / 6.0,
            ordered: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShellsSection {
    /// Maximum hole area (pixels) filled during pruning.
    pub hole_area: usize,
    /// Also dump ribbon masks as PNGs next to each record.
    pub dump_ribbons: bool,
}

impl Default for ShellsSection {
    fn default() -> Self {
        Self { hole_area: 64, dump_ribbons: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub pairs: PairsSection,
    pub synth: SynthSection,
    pub shells: ShellsSection,
}

/// Serde-friendly mirror of [`SynthConfig`] (which keeps its own seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub writers: usize,
    pub genuine_per_writer: usize,
    pub forged_per_writer: usize,
    pub canvas: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { writers: 8, genuine_per_writer: 12, forged_per_writer: 12, canvas: 512 }
    }
}

impl SynthSection {
    pub fn to_synth_config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            writers: self.writers,
            genuine_per_writer: self.genuine_per_writer,
            forged_per_writer: self.forged_per_writer,
            canvas: self.canvas,
            seed,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    /// Loads the explicit path, else `SIGSHELL_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, String> {
        if let Some(path) = explicit {
            return Self::load(path);
        }
        if let Ok(env_path) = std::env::var(CONFIG_ENV_VAR) {
            return Self::load(Path::new(&env_path));
        }
        Ok(Self::default())
    }
}
