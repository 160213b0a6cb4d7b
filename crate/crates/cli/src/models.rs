//! On-disk layout of trained models.
//!
//! ```text
//! <dir>/translator-MS.bin   translator-MS.vocab.json
//! <dir>/translator-PH.bin   translator-PH.vocab.json
//! <dir>/generator.bin       generator.vocab.json
//! <dir>/ranker.json
//! <dir>/affect.json
//! <dir>/defaults.json
//! ```

use std::path::{Path, PathBuf};

use adforge_core::{AffectModels, Defaults, Domain, GbmRankModel, Models, Seq2Seq};
use anyhow::Context;

use crate::config::AppConfig;

pub const MODELS_DIR_ENV: &str = "ADFORGE_MODELS_DIR";

#[derive(Debug, Clone)]
pub struct ModelDir {
    pub root: PathBuf,
}

impl ModelDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ModelDir { root: root.into() }
    }

    pub fn translator(&self, domain: Domain) -> PathBuf {
        self.root.join(format!("translator-{}.bin", domain.code()))
    }

    pub fn generator(&self) -> PathBuf {
        self.root.join("generator.bin")
    }

    pub fn ranker(&self) -> PathBuf {
        self.root.join("ranker.json")
    }

    pub fn affect(&self) -> PathBuf {
        self.root.join("affect.json")
    }

    pub fn defaults(&self) -> PathBuf {
        self.root.join("defaults.json")
    }

    pub fn ensure(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.root).with_context(|| format!("creating {}", self.root.display()))
    }

    /// Loads whichever models exist; absent files leave their slot empty.
    pub fn load(&self, config: &AppConfig) -> anyhow::Result<Models> {
        let mut models = Models {
            extract: config.extract.clone(),
            ..Models::default()
        };
        for domain in Domain::ALL {
            let path = self.translator(domain);
            if path.exists() {
                let m = Seq2Seq::load(&path).with_context(|| format!("loading {}", path.display()))?;
                models.translators.insert(domain, m);
            }
        }
        if self.generator().exists() {
            models.generator = Some(Seq2Seq::load(self.generator()).context("loading generator")?);
        }
        if self.ranker().exists() {
            models.ranker = Some(GbmRankModel::load(self.ranker()).context("loading ranker")?);
        }
        if self.affect().exists() {
            models.affect = Some(AffectModels::load(self.affect()).context("loading affect models")?);
        }
        if self.defaults().exists() {
            let learned: Defaults = read_json(&self.defaults())?;
            models.defaults = learned.or(&Defaults::default());
        }
        Ok(models)
    }

    pub fn save_defaults(&self, defaults: &Defaults) -> anyhow::Result<()> {
        self.ensure()?;
        write_json(&self.defaults(), defaults)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&raw).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}
