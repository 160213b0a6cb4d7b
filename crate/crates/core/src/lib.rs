//! Health search-ad generation, translation and ranking.

pub mod ad;
pub mod eval;
pub mod extract;
pub mod features;
pub mod pipeline;
pub mod psych;
pub mod ranker;
pub mod seq2seq;
pub mod text;
pub mod textproc;
pub mod trees;

pub use ad::{concat_text, read_corpus, write_corpus, Ad, AdError, Domain};
pub use eval::{generate_corpus, offline_eval, EvalConfig, EvalError, EvalReport, SynthConfig, SynthCorpus};
pub use extract::{extract_content, parse_html, ExtractConfig, ExtractError, ExtractedContent};
pub use features::{extract_features, FeatureError, FeatureVector, LexiconSet};
pub use pipeline::{
    build_variant_set, format_ad, FieldLimits, FormattedAd, Models, PipelineError, Rewrite, VariantKind, VariantSet,
};
pub use psych::{AffectModels, LabeledAd, PsychError};
pub use ranker::{GbmRankModel, RankError};
pub use seq2seq::{Seq2Seq, Seq2SeqError, TrainConfig};
pub use textproc::{
    normalize, realize, realize_lenient, Defaults, Gazetteer, NormalizedAd, Normalizer, TextError,
};
