//! Psychological annotation of ad text: call-to-action verbs, desire-effect
//! keywords and arousal/valence regressors over bag-of-words features.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::{Lemmatizer, TokenKind};
use crate::trees::{BoostingConfig, ForestConfig, GradientBoosting, RandomForest, TreeError};

pub const AFFECT_MIN: f64 = -2.0;
pub const AFFECT_MAX: f64 = 2.0;
pub const MIN_LABELS: usize = 10;

#[derive(Debug, Error)]
pub enum PsychError {
    #[error("need at least {MIN_LABELS} labeled ads, got {0}")]
    TooFewLabels(usize),
    #[error("label {field}={value} outside [-2, 2] in line {line}")]
    LabelRange { field: &'static str, value: f64, line: usize },
    #[error("population {0:?} is empty")]
    EmptyPopulation(String),
    #[error("zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// CTA verbs

/// Base forms of call-to-action verbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtaLexicon {
    pub verbs: BTreeSet<String>,
}

const CONJUNCTIONS: &[&str] = &["and", "or", "but", "then", "so", "plus", "&"];

impl CtaLexicon {
    /// One verb per line; entries are reduced to their base form.
    pub fn parse(text: &str) -> Self {
        let lem = Lemmatizer::standard();
        CtaLexicon {
            verbs: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|w| lem.lemma_stem(w))
                .collect(),
        }
    }

    pub fn standard() -> &'static CtaLexicon {
        static STD: OnceLock<CtaLexicon> = OnceLock::new();
        STD.get_or_init(|| CtaLexicon::parse(include_str!("../data/cta_verbs.txt")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PsychError> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }
}

/// Lexicon verbs (by base form) that appear in imperative position: at the
/// start of the text or right after punctuation or a conjunction.
pub fn detect_cta_verbs(text: &str, lexicon: &CtaLexicon) -> BTreeSet<String> {
    let tokens = Lemmatizer::standard().tokenize(text);
    let mut found = BTreeSet::new();
    for (i, tok) in tokens.iter().enumerate() {
        if tok.kind != TokenKind::Word || !lexicon.verbs.contains(&tok.base) {
            continue;
        }
        let imperative = match i.checked_sub(1).map(|j| &tokens[j]) {
            None => true,
            Some(prev) => {
                prev.kind == TokenKind::Punct
                    || CONJUNCTIONS.contains(&prev.surface.to_lowercase().as_str())
            }
        };
        if imperative {
            found.insert(tok.base.clone());
        }
    }
    found
}

// ---------------------------------------------------------------------------
// desire effects

/// The keyword written for "a number followed by a percent sign".
pub const PERCENT_KEYWORD: &str = "x%";

fn percent_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+(\.\d+)?%").expect("valid regex"))
}

/// Keyword groups keyed by effect label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesireEffects {
    pub groups: BTreeMap<String, Vec<String>>,
}

impl DesireEffects {
    pub fn standard() -> &'static DesireEffects {
        static STD: OnceLock<DesireEffects> = OnceLock::new();
        STD.get_or_init(|| {
            serde_json::from_str(include_str!("../data/desire_effects.json"))
                .expect("bundled effects parse")
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PsychError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }
}

/// Effect labels with at least one keyword present. Keywords match whole
/// words case-insensitively, by surface or by base form (multi-word
/// keywords match as a contiguous sequence); `x%` matches a number directly
/// followed by `%`.
pub fn desire_effects(text: &str, effects: &DesireEffects) -> BTreeSet<String> {
    let lem = Lemmatizer::standard();
    let tokens = lem.tokenize(text);
    let surfaces: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    let bases: Vec<&str> = tokens.iter().map(|t| t.base.as_str()).collect();
    let has_percent = percent_re().is_match(text);

    let matches_keyword = |kw: &str| -> bool {
        if kw == PERCENT_KEYWORD {
            return has_percent;
        }
        let kw_tokens = lem.tokenize(kw);
        let n = kw_tokens.len();
        if n == 0 || n > tokens.len() {
            return false;
        }
        (0..=tokens.len() - n).any(|s| {
            kw_tokens.iter().enumerate().all(|(k, kt)| {
                surfaces[s + k] == kt.surface.to_lowercase() || bases[s + k] == kt.base
            })
        })
    };
    effects
        .groups
        .iter()
        .filter(|(_, kws)| kws.iter().any(|k| matches_keyword(&k.to_lowercase())))
        .map(|(label, _)| label.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// bag of words

/// Base-form vocabulary, indexed alphabetically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowVocabulary {
    pub words: Vec<String>,
}

fn bow_tokens(text: &str) -> Vec<String> {
    Lemmatizer::standard()
        .tokenize(text)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Punct)
        .map(|t| t.base)
        .collect()
}

impl BowVocabulary {
    /// Every base form seen at least once.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<String> = texts.into_iter().flat_map(bow_tokens).collect();
        BowVocabulary {
            words: words.into_iter().collect(),
        }
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.words.binary_search_by(|w| w.as_str().cmp(word)).ok()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Counts of each vocabulary word in the text (out-of-vocabulary words are
/// dropped).
pub fn bow_featurize(text: &str, vocab: &BowVocabulary) -> Vec<f64> {
    let mut v = vec![0.0; vocab.len()];
    for t in bow_tokens(text) {
        if let Some(i) = vocab.index(&t) {
            v[i] += 1.0;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// labeled data and affect models

/// Crowd-style annotation of one ad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledAd {
    pub text: String,
    pub arousal: f64,
    pub valence: f64,
    #[serde(default)]
    pub cta: Vec<String>,
}

/// Reads LabeledAd JSONL, rejecting scores outside [-2, 2].
pub fn read_labeled(reader: impl BufRead) -> Result<Vec<LabeledAd>, PsychError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ad: LabeledAd =
            serde_json::from_str(&line).map_err(|source| PsychError::Parse { line: i + 1, source })?;
        for (field, value) in [("arousal", ad.arousal), ("valence", ad.valence)] {
            if !(AFFECT_MIN..=AFFECT_MAX).contains(&value) {
                return Err(PsychError::LabelRange {
                    field,
                    value,
                    line: i + 1,
                });
            }
        }
        out.push(ad);
    }
    Ok(out)
}

/// The hand-labeled sample shipped with the crate.
pub fn bundled_labels() -> Vec<LabeledAd> {
    read_labeled(include_str!("../data/labeled_ads.jsonl").as_bytes()).expect("bundled labels parse")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Ensemble {
    Boosted(GradientBoosting),
    Forest(RandomForest),
}

/// A tree ensemble over bag-of-words counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleReg {
    pub vocabulary: BowVocabulary,
    pub ensemble: Ensemble,
}

impl TreeEnsembleReg {
    /// Raw ensemble output clamped to [-2, 2].
    pub fn predict_features(&self, x: &[f64]) -> f64 {
        let raw = match &self.ensemble {
            Ensemble::Boosted(m) => m.predict(x),
            Ensemble::Forest(m) => m.predict(x),
        };
        raw.clamp(AFFECT_MIN, AFFECT_MAX)
    }
}

pub fn predict_affect(model: &TreeEnsembleReg, text: &str) -> f64 {
    model.predict_features(&bow_featurize(text, &model.vocabulary))
}

fn design(labeled: &[LabeledAd]) -> Result<(BowVocabulary, Vec<Vec<f64>>), PsychError> {
    if labeled.len() < MIN_LABELS {
        return Err(PsychError::TooFewLabels(labeled.len()));
    }
    let vocab = BowVocabulary::build(labeled.iter().map(|l| l.text.as_str()));
    let x = labeled.iter().map(|l| bow_featurize(&l.text, &vocab)).collect();
    Ok((vocab, x))
}

/// Gradient-boosted arousal regressor (defaults: 100 trees, rate 0.2).
pub fn train_arousal(labeled: &[LabeledAd], config: &BoostingConfig) -> Result<TreeEnsembleReg, PsychError> {
    let (vocabulary, x) = design(labeled)?;
    let y: Vec<f64> = labeled.iter().map(|l| l.arousal).collect();
    Ok(TreeEnsembleReg {
        vocabulary,
        ensemble: Ensemble::Boosted(GradientBoosting::fit(&x, &y, config)?),
    })
}

/// Random-forest valence regressor (defaults: 500 trees, √p features).
pub fn train_valence(labeled: &[LabeledAd], config: &ForestConfig) -> Result<TreeEnsembleReg, PsychError> {
    let (vocabulary, x) = design(labeled)?;
    let y: Vec<f64> = labeled.iter().map(|l| l.valence).collect();
    Ok(TreeEnsembleReg {
        vocabulary,
        ensemble: Ensemble::Forest(RandomForest::fit(&x, &y, config)?),
    })
}

/// Arousal and valence regressors stored together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectModels {
    pub arousal: TreeEnsembleReg,
    pub valence: TreeEnsembleReg,
}

impl AffectModels {
    pub fn train(labeled: &[LabeledAd], boosting: &BoostingConfig, forest: &ForestConfig) -> Result<Self, PsychError> {
        Ok(AffectModels {
            arousal: train_arousal(labeled, boosting)?,
            valence: train_valence(labeled, forest)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PsychError> {
        if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PsychError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, PsychError> {
    if xs.len() != ys.len() {
        return Err(PsychError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len() as f64;
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if xs.len() < 2 || constant(xs) || constant(ys) {
        return Err(PsychError::ZeroVariance);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(PsychError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

// ---------------------------------------------------------------------------
// population summaries

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub population: String,
    pub n: usize,
    /// Share of ads with at least one CTA verb.
    pub cta_fraction: f64,
    pub mean_arousal: Option<f64>,
    pub mean_valence: Option<f64>,
    pub mean_abs_valence: Option<f64>,
    /// Share of ads matching each desire effect.
    pub effect_fractions: BTreeMap<String, f64>,
}

/// Per-population annotation rates. Affect means are present only when
/// models are given.
pub fn population_summary(
    populations: &BTreeMap<String, Vec<String>>,
    models: Option<&AffectModels>,
    cta: &CtaLexicon,
    effects: &DesireEffects,
) -> Result<Vec<PopulationSummary>, PsychError> {
    let mut out = Vec::with_capacity(populations.len());
    for (name, texts) in populations {
        if texts.is_empty() {
            return Err(PsychError::EmptyPopulation(name.clone()));
        }
        let n = texts.len() as f64;
        let with_cta = texts.iter().filter(|t| !detect_cta_verbs(t, cta).is_empty()).count();
        let mut effect_counts: BTreeMap<String, usize> = effects.labels().map(|l| (l.to_string(), 0)).collect();
        for t in texts {
            for label in desire_effects(t, effects) {
                *effect_counts.entry(label).or_default() += 1;
            }
        }
        let (mean_arousal, mean_valence, mean_abs_valence) = match models {
            Some(m) => {
                let ar: Vec<f64> = texts.iter().map(|t| predict_affect(&m.arousal, t)).collect();
                let va: Vec<f64> = texts.iter().map(|t| predict_affect(&m.valence, t)).collect();
                (
                    Some(ar.iter().sum::<f64>() / n),
                    Some(va.iter().sum::<f64>() / n),
                    Some(va.iter().map(|v| v.abs()).sum::<f64>() / n),
                )
            }
            None => (None, None, None),
        };
        out.push(PopulationSummary {
            population: name.clone(),
            n: texts.len(),
            cta_fraction: with_cta as f64 / n,
            mean_arousal,
            mean_valence,
            mean_abs_valence,
            effect_fractions: effect_counts
                .into_iter()
                .map(|(k, c)| (k, c as f64 / n))
                .collect(),
        });
    }
    Ok(out)
}

/// One CSV row per population; effect columns follow the fixed columns in
/// label order.
pub fn summaries_to_csv(summaries: &[PopulationSummary]) -> Result<String, PsychError> {
    let labels: BTreeSet<&String> = summaries.iter().flat_map(|s| s.effect_fractions.keys()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "population".to_string(),
        "n".into(),
        "cta_fraction".into(),
        "mean_arousal".into(),
        "mean_valence".into(),
        "mean_abs_valence".into(),
    ];
    header.extend(labels.iter().map(|l| l.to_string()));
    w.write_record(&header).map_err(csv_io)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for s in summaries {
        let mut row = vec![
            s.population.clone(),
            s.n.to_string(),
            format!("{:.6}", s.cta_fraction),
            opt(s.mean_arousal),
            opt(s.mean_valence),
            opt(s.mean_abs_valence),
        ];
        row.extend(
            labels
                .iter()
                .map(|l| format!("{:.6}", s.effect_fractions.get(*l).copied().unwrap_or(0.0))),
        );
        w.write_record(&row).map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| PsychError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_io(e: csv::Error) -> PsychError {
    PsychError::Io(std::io::Error::other(e))
}
