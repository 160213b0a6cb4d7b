//! Shared inputs for the benchmarks.

use adforge_core::eval::{generate_corpus, SynthConfig, SynthCorpus};
use adforge_core::seq2seq::{Seq2Seq, TextPair, TrainConfig};

pub const AD_TEXT: &str = "Dry Cough Relief - Trusted Remedies. Browse available information about dry cough relief. Check here.";

/// A seeded synthetic corpus of `queries` queries with six ads each.
pub fn corpus(queries: usize) -> SynthCorpus {
    generate_corpus(&SynthConfig {
        n_queries: queries,
        seed: 1,
        ..SynthConfig::default()
    })
    .expect("default synth config is valid")
}

/// A small translator trained for a few epochs on translation pairs.
pub fn small_translator(pairs: &[TextPair]) -> Seq2Seq {
    let cfg = TrainConfig {
        d_emb: 32,
        d_hid: 64,
        epochs: 1,
        min_freq: 1,
        seed: 1,
        ..TrainConfig::default()
    };
    Seq2Seq::fit(pairs, &cfg).expect("training pairs are non-empty").0
}
