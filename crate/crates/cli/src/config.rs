//! Tool configuration, read from a JSON file given with `--config`.

use std::path::Path;

use adforge_core::pipeline::FieldLimits;
use adforge_core::ranker::LambdaMartConfig;
use adforge_core::trees::{BoostingConfig, ForestConfig};
use adforge_core::{EvalConfig, ExtractConfig, SynthConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AppConfig {
    pub translator: TrainConfig,
    pub generator: TrainConfig,
    pub ranker: LambdaMartConfig,
    pub arousal: BoostingConfig,
    pub valence: ForestConfig,
    pub synth: SynthConfig,
    pub eval: EvalConfig,
    pub limits: FieldLimits,
    pub extract: ExtractConfig,
    pub fetch_timeout_secs: Option<u64>,
}

pub const DEFAULT_FETCH_TIMEOUT_SECS: u64 = 10;

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        serde_json::from_slice(&raw).map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))
    }

    /// Replaces every seed in the configuration.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.translator.seed = seed;
        self.generator.seed = seed;
        self.ranker.seed = seed;
        self.arousal.seed = seed;
        self.valence.seed = seed;
        self.synth.seed = seed;
        self.eval.seed = seed;
        self.eval.ranker.seed = seed;
        self
    }

    pub fn fetch_timeout(&self) -> std::time::Duration {
        std::time::Duration::from_secs(self.fetch_timeout_secs.unwrap_or(DEFAULT_FETCH_TIMEOUT_SECS))
    }
}
