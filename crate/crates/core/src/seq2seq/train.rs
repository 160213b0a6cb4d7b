use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{backward, forward, loss};
use super::optim::{adam_step, clip_global_norm, AdamConfig, AdamState};
use super::params::{Dims, ModelParams};
use super::Seq2SeqError;
use crate::ad::Ad;
use crate::extract::ExtractedContent;
use crate::textproc::Normalizer;

/// Index sequences for one training example, both wrapped in `<sos>`/`<eos>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub query_id: String,
}

/// A normalized (source, target) text pair before vocabulary encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub source: String,
    pub target: String,
    pub query_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub d_emb: usize,
    pub d_hid: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip: f64,
    pub teacher_forcing: f64,
    pub max_len: usize,
    pub min_freq: usize,
    pub init_scale: f64,
    /// Pairs whose gradients are averaged per update.
    pub batch_size: usize,
    /// Stop once an epoch's mean loss is at or below this value.
    pub stop_at_loss: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d_emb: 64,
            d_hid: 128,
            epochs: 20,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip: 5.0,
            teacher_forcing: 1.0,
            max_len: 40,
            min_freq: 2,
            init_scale: 0.08,
            batch_size: 1,
            stop_at_loss: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let bad = |m: &str| Err(Seq2SeqError::InvalidConfig(m.to_string()));
        if self.d_emb == 0 || self.d_hid == 0 {
            return bad("d_emb and d_hid must be positive");
        }
        if !(self.lr > 0.0 && self.eps > 0.0 && self.clip > 0.0 && self.init_scale >= 0.0) {
            return bad("lr, eps and clip must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.teacher_forcing) {
            return bad("teacher_forcing must lie in [0, 1]");
        }
        if self.max_len < 3 {
            return bad("max_len must be at least 3");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Compares click-through rates exactly (cross-multiplied counts).
fn cmp_ctr(a: &Ad, b: &Ad) -> Ordering {
    (a.clicks as u128 * b.impressions as u128).cmp(&(b.clicks as u128 * a.impressions as u128))
}

/// `(low, high)` index pairs: for every query, each ordered pair of its ads
/// whose first member has strictly lower CTR. Queries are visited in sorted
/// order, ads in corpus order.
pub fn translation_pair_indices(ads: &[Ad]) -> Result<Vec<(usize, usize)>, Seq2SeqError> {
    if let Some(ad) = ads.iter().find(|a| a.impressions == 0) {
        return Err(Seq2SeqError::NoImpressions(ad.id.clone()));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, ad) in ads.iter().enumerate() {
        groups.entry(ad.query.as_str()).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for members in groups.values() {
        for &lo in members {
            for &hi in members {
                if cmp_ctr(&ads[lo], &ads[hi]) == Ordering::Less {
                    pairs.push((lo, hi));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Seq2SeqError::NoPairs);
    }
    Ok(pairs)
}

/// Normalized low-CTR → high-CTR text pairs for translator training.
pub fn make_translation_pairs(ads: &[Ad], normalizer: &Normalizer) -> Result<Vec<TextPair>, Seq2SeqError> {
    let indices = translation_pair_indices(ads)?;
    let normalized = ads
        .iter()
        .map(|a| normalizer.normalize(a).map(|n| n.text))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(indices
        .into_iter()
        .map(|(lo, hi)| TextPair {
            source: normalized[lo].clone(),
            target: normalized[hi].clone(),
            query_id: ads[lo].query.clone(),
        })
        .collect())
}

/// Highest-CTR ad; ties go to more impressions, then the smaller id.
pub fn best_ad(ads: &[Ad]) -> Option<&Ad> {
    ads.iter().filter(|a| a.impressions > 0).max_by(|a, b| {
        cmp_ctr(a, b)
            .then(a.impressions.cmp(&b.impressions))
            .then(b.id.cmp(&a.id))
    })
}

/// One (page content → best ad) pair per page. Pages without content or
/// without a shown ad are skipped.
pub fn make_generator_pairs(
    pages: &[(ExtractedContent, Vec<Ad>)],
    normalizer: &Normalizer,
) -> Result<Vec<TextPair>, Seq2SeqError> {
    let mut pairs = Vec::new();
    for (content, ads) in pages {
        let Some(ad) = best_ad(ads) else {
            log::warn!("page {:?} has no ad with impressions; skipped", content.title);
            continue;
        };
        if content.is_empty() {
            log::warn!("page for ad {} has no extracted content; skipped", ad.id);
            continue;
        }
        let source = normalizer.normalize_text(&content.as_paragraph(), &ad.id)?;
        let target = normalizer.normalize(ad)?;
        pairs.push(TextPair {
            source: source.text,
            target: target.text,
            query_id: ad.query.clone(),
        });
    }
    if pairs.is_empty() {
        return Err(Seq2SeqError::NoPairs);
    }
    Ok(pairs)
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    /// Mean training loss of each completed epoch.
    pub losses: Vec<f64>,
}

/// Initial parameters for a configuration (the first draws of the seeded
/// generator).
pub fn init_params(dims: Dims, config: &TrainConfig) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    ModelParams::uniform(dims, config.init_scale, &mut rng)
}

/// Adam training with per-epoch shuffling. Fully determined by the pairs,
/// the dimensions and the config (including its seed).
pub fn train(
    pairs: &[TrainingPair],
    src_vocab: usize,
    tgt_vocab: usize,
    config: &TrainConfig,
) -> Result<TrainOutput, Seq2SeqError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Seq2SeqError::NoPairs);
    }
    let dims = Dims {
        d_emb: config.d_emb,
        d_hid: config.d_hid,
        src_vocab,
        tgt_vocab,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::uniform(dims, config.init_scale, &mut rng);
    let mut adam = AdamState::new(&params);
    let adam_cfg = config.adam();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut acc = params.zeros_like();
            for &i in batch {
                let pair = &pairs[i];
                let tf = rng.gen::<f64>() < config.teacher_forcing;
                let (log_probs, cache) = forward(&params, &pair.source, &pair.target, tf)?;
                total += loss(&log_probs, &pair.target)?;
                acc.add_assign(&backward(&params, &cache, &pair.target)?);
            }
            acc.scale(1.0 / batch.len() as f64);
            clip_global_norm(&mut acc, config.clip)?;
            adam_step(&mut params, &acc, &mut adam, &adam_cfg);
        }
        let mean = total / pairs.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.5}");
        losses.push(mean);
        if config.stop_at_loss.is_some_and(|s| mean <= s) {
            break;
        }
    }
    Ok(TrainOutput { params, losses })
}
