//! Encoder-decoder LSTM with hand-written backpropagation, Adam training and
//! greedy decoding. Used both to rewrite ads (translator) and to produce ads
//! from landing-page content (generator).

mod checkpoint;
mod net;
mod optim;
mod params;
mod train;
mod vocab;

use std::path::Path;

use thiserror::Error;

pub use checkpoint::{read_params, vocab_path, write_params, MAGIC};
pub use net::{backward, forward, greedy_decode, loss, ForwardCache};
pub use optim::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use params::{Dims, Gradients, LstmLayer, Mat, ModelParams, LAYERS};
pub use train::{
    best_ad, init_params, make_generator_pairs, make_translation_pairs, train,
    translation_pair_indices, TextPair, TrainConfig, TrainOutput, TrainingPair,
};
pub use vocab::{Vocab, EOS, PAD, RESERVED, SOS, UNK};

use crate::textproc::{detokenize, split_tokens, TextError};

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("no training pairs could be built")]
    NoPairs,
    #[error("target has no predictable positions")]
    EmptyTarget,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient")]
    NonFinite,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("ad {0} has no impressions")]
    NoImpressions(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained model with its vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2Seq {
    pub params: ModelParams,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
    /// Maximum number of tokens produced by [`Seq2Seq::translate`].
    pub max_len: usize,
}

impl Seq2Seq {
    /// Builds vocabularies from the pairs, encodes them and trains.
    /// Returns the model and its per-epoch loss trace.
    pub fn fit(pairs: &[TextPair], config: &TrainConfig) -> Result<(Seq2Seq, Vec<f64>), Seq2SeqError> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(Seq2SeqError::NoPairs);
        }
        let src_tokens: Vec<Vec<String>> = pairs.iter().map(|p| split_tokens(&p.source)).collect();
        let tgt_tokens: Vec<Vec<String>> = pairs.iter().map(|p| split_tokens(&p.target)).collect();
        let src_vocab = Vocab::build(src_tokens.iter().flatten().map(String::as_str), config.min_freq);
        let tgt_vocab = Vocab::build(tgt_tokens.iter().flatten().map(String::as_str), config.min_freq);
        let encoded: Vec<TrainingPair> = pairs
            .iter()
            .zip(src_tokens.iter().zip(&tgt_tokens))
            .map(|(p, (s, t))| TrainingPair {
                source: src_vocab.encode(s, config.max_len),
                target: tgt_vocab.encode(t, config.max_len),
                query_id: p.query_id.clone(),
            })
            .collect();
        let out = train(&encoded, src_vocab.len(), tgt_vocab.len(), config)?;
        Ok((
            Seq2Seq {
                params: out.params,
                src_vocab,
                tgt_vocab,
                max_len: config.max_len,
            },
            out.losses,
        ))
    }

    /// Greedy rewrite of a normalized text into normalized output text.
    pub fn translate(&self, normalized: &str) -> String {
        translate(&self.params, &self.src_vocab, &self.tgt_vocab, normalized, self.max_len)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Seq2SeqError> {
        checkpoint::save(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Seq2SeqError> {
        checkpoint::load(path.as_ref())
    }
}

/// Encodes `normalized` (unknown tokens become `<unk>`), decodes greedily
/// for at most `max_len` tokens and joins the result.
pub fn translate(
    params: &ModelParams,
    src_vocab: &Vocab,
    tgt_vocab: &Vocab,
    normalized: &str,
    max_len: usize,
) -> String {
    let src = src_vocab.encode(&split_tokens(normalized), max_len.max(2) + 2);
    let ids = greedy_decode(params, &src, max_len);
    detokenize(&tgt_vocab.decode(&ids))
}
