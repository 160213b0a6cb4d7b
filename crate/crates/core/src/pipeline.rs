//! Orchestration of the four ad variants (human, generated, translated,
//! generated then translated) and platform field formatting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::{concat_text, Ad, AdError, Domain};
use crate::extract::{extract_content, parse_html, ExtractConfig, ExtractError};
use crate::features::{extract_features, FeatureError, FeatureVector, LexiconSet};
use crate::psych::{desire_effects, detect_cta_verbs, predict_affect, AffectModels, CtaLexicon, DesireEffects};
use crate::ranker::{rank_variants, GbmRankModel, RankError};
use crate::seq2seq::Seq2Seq;
use crate::textproc::{realize, realize_lenient, Defaults, Normalizer, TextError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("page yielded no extractable content")]
    NoContent,
    #[error("no translator model for domain {0}")]
    NoModelForDomain(Domain),
    #[error("no generator model loaded")]
    NoGenerator,
    #[error("nothing to format")]
    EmptyText,
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// The four compared ad sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Human,
    Generated,
    Translated,
    GeneratedTranslated,
}

impl VariantKind {
    pub const ALL: [VariantKind; 4] = [
        VariantKind::Human,
        VariantKind::Generated,
        VariantKind::Translated,
        VariantKind::GeneratedTranslated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::Human => "human",
            VariantKind::Generated => "generated",
            VariantKind::Translated => "translated",
            VariantKind::GeneratedTranslated => "generated_translated",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

/// Everything the pipeline stages read. All fields are immutable once
/// built; missing models simply leave their variants out.
#[derive(Debug, Clone)]
pub struct Models {
    pub normalizer: Normalizer,
    pub extract: ExtractConfig,
    pub lexicons: LexiconSet,
    pub cta: CtaLexicon,
    pub effects: DesireEffects,
    pub defaults: Defaults,
    pub generator: Option<Seq2Seq>,
    pub translators: BTreeMap<Domain, Seq2Seq>,
    pub ranker: Option<GbmRankModel>,
    pub affect: Option<AffectModels>,
}

impl Default for Models {
    fn default() -> Self {
        Models {
            normalizer: Normalizer::default(),
            extract: ExtractConfig::default(),
            lexicons: LexiconSet::standard().clone(),
            cta: CtaLexicon::standard().clone(),
            effects: DesireEffects::standard().clone(),
            defaults: Defaults::default(),
            generator: None,
            translators: BTreeMap::new(),
            ranker: None,
            affect: None,
        }
    }
}

/// Normalized model output plus the surfaces its placeholders came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub text: String,
    pub substitutions: Vec<(String, String)>,
}

impl Rewrite {
    /// Surface text with unresolvable placeholders left in place.
    pub fn realize_lenient(&self, defaults: &Defaults) -> String {
        realize_lenient(&self.text, &self.substitutions, defaults)
    }
}

/// Page HTML → extracted paragraph → normalized text → generator output.
pub fn run_generator(html: &str, models: &Models) -> Result<Rewrite, PipelineError> {
    let generator = models.generator.as_ref().ok_or(PipelineError::NoGenerator)?;
    let content = extract_content(&parse_html(html)?, &models.extract);
    if content.is_empty() {
        return Err(PipelineError::NoContent);
    }
    let normalized = models.normalizer.normalize_text(&content.as_paragraph(), "page")?;
    Ok(Rewrite {
        text: generator.translate(&normalized.text),
        substitutions: normalized.substitutions,
    })
}

/// Rewrites already-normalized text with the model for `domain`.
pub fn translate_normalized(text: &str, domain: Domain, models: &Models) -> Result<String, PipelineError> {
    let model = models
        .translators
        .get(&domain)
        .ok_or(PipelineError::NoModelForDomain(domain))?;
    Ok(model.translate(text))
}

/// Concatenate, normalize and rewrite an ad with its domain's model.
pub fn run_translator(ad: &Ad, models: &Models) -> Result<Rewrite, PipelineError> {
    if !models.translators.contains_key(&ad.domain) {
        return Err(PipelineError::NoModelForDomain(ad.domain));
    }
    let normalized = models.normalizer.normalize(ad)?;
    Ok(Rewrite {
        text: translate_normalized(&normalized.text, ad.domain, models)?,
        substitutions: normalized.substitutions,
    })
}

/// Generator followed by the translator for `domain`. The generated
/// text is already normalized, so it is fed to the translator directly and
/// keeps the page's substitutions.
pub fn run_full(html: &str, domain: Domain, models: &Models) -> Result<Rewrite, PipelineError> {
    let generated = run_generator(html, models)?;
    Ok(Rewrite {
        text: translate_normalized(&generated.text, domain, models)?,
        substitutions: generated.substitutions,
    })
}

// ---------------------------------------------------------------------------
// field formatting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldLimits {
    pub title_chars: usize,
    pub title_fields: usize,
    pub description_chars: usize,
    pub description_fields: usize,
}

impl Default for FieldLimits {
    fn default() -> Self {
        FieldLimits {
            title_chars: 30,
            title_fields: 3,
            description_chars: 90,
            description_fields: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FormatWarning {
    /// Text left over after every field was filled.
    OverflowTruncated { dropped: String },
    /// The whole text fit in the title fields.
    NoDescription,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormattedAd {
    pub titles: Vec<String>,
    pub descriptions: Vec<String>,
    pub warnings: Vec<FormatWarning>,
}

impl FormattedAd {
    pub fn truncated(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, FormatWarning::OverflowTruncated { .. }))
    }

    /// An ad with these fields; counters start at zero.
    pub fn to_ad(&self, id: &str, query: &str, domain: Domain) -> Ad {
        Ad {
            id: id.to_string(),
            query: query.to_string(),
            domain,
            titles: self.titles.clone(),
            descriptions: self.descriptions.clone(),
            impressions: 0,
            clicks: 0,
            url: None,
        }
    }
}

/// Realizes the text strictly, then lays it out with [`format_realized`].
pub fn format_ad(
    normalized: &str,
    substitutions: &[(String, String)],
    defaults: &Defaults,
    limits: &FieldLimits,
) -> Result<FormattedAd, PipelineError> {
    format_realized(&realize(normalized, substitutions, defaults)?, limits)
}

/// Splits the first sentence into the title fields, the rest into the
/// description fields. Words are packed greedily; a word longer than a
/// whole field is cut at the character limit. Words of the first
/// sentence that do not fit the titles spill into the descriptions.
pub fn format_realized(text: &str, limits: &FieldLimits) -> Result<FormattedAd, PipelineError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err(PipelineError::EmptyText);
    }
    let first_len = words
        .iter()
        .position(|w| w.ends_with(['.', '!', '?']))
        .map_or(words.len(), |i| i + 1);

    let mut queue: std::collections::VecDeque<String> = words.iter().map(|w| w.to_string()).collect();
    let mut remaining_first = first_len;
    let titles = pack(&mut queue, Some(&mut remaining_first), limits.title_chars, limits.title_fields);
    let descriptions = pack(&mut queue, None, limits.description_chars, limits.description_fields);

    let mut warnings = Vec::new();
    if descriptions.is_empty() {
        warnings.push(FormatWarning::NoDescription);
    }
    if !queue.is_empty() {
        let dropped = queue.into_iter().collect::<Vec<_>>().join(" ");
        log::warn!("ad text overflowed its fields; dropped {dropped:?}");
        warnings.push(FormatWarning::OverflowTruncated { dropped });
    }
    Ok(FormattedAd {
        titles,
        descriptions,
        warnings,
    })
}

/// Fills up to `fields` fields of at most `width` characters from the front
/// of `queue`. With `budget`, only that many words may be taken (the count
/// is decremented as words are consumed; a partially cut word still counts
/// as pending).
fn pack(
    queue: &mut std::collections::VecDeque<String>,
    mut budget: Option<&mut usize>,
    width: usize,
    fields: usize,
) -> Vec<String> {
    let mut out = Vec::new();
    if width == 0 {
        return out;
    }
    for _ in 0..fields {
        let mut field = String::new();
        while let Some(word) = queue.front_mut() {
            if budget.as_deref() == Some(&0) {
                break;
            }
            let used = field.chars().count();
            let need = word.chars().count() + usize::from(used > 0);
            if used + need <= width {
                if used > 0 {
                    field.push(' ');
                }
                field.push_str(word);
                queue.pop_front();
                if let Some(b) = budget.as_deref_mut() {
                    *b -= 1;
                }
            } else if used == 0 {
                // a word wider than the field: cut it
                let cut: String = word.chars().take(width).collect();
                *word = word.chars().skip(width).collect();
                field = cut;
                break;
            } else {
                break;
            }
        }
        if field.is_empty() {
            break;
        }
        out.push(field);
    }
    out
}

// ---------------------------------------------------------------------------
// variant sets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// The surface text the annotation was computed on.
    pub text: String,
    pub features: FeatureVector,
    pub cta: BTreeSet<String>,
    pub effects: BTreeSet<String>,
    pub arousal: Option<f64>,
    pub valence: Option<f64>,
}

pub fn annotate(text: &str, models: &Models) -> Result<Annotation, PipelineError> {
    let features = extract_features(text, &models.lexicons)?;
    Ok(Annotation {
        text: text.to_string(),
        features,
        cta: detect_cta_verbs(text, &models.cta),
        effects: desire_effects(text, &models.effects),
        arousal: models.affect.as_ref().map(|m| predict_affect(&m.arousal, text)),
        valence: models.affect.as_ref().map(|m| predict_affect(&m.valence, text)),
    })
}

/// One human ad and whatever generated variants could be produced for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSet {
    pub human: Ad,
    pub generated: Option<Rewrite>,
    pub translated: Option<Rewrite>,
    pub generated_translated: Option<Rewrite>,
    /// Present only when a ranker was available.
    pub ranks: Option<BTreeMap<VariantKind, usize>>,
    pub probabilities: Option<BTreeMap<VariantKind, f64>>,
    pub annotations: BTreeMap<VariantKind, Annotation>,
}

impl VariantSet {
    pub fn rewrite(&self, kind: VariantKind) -> Option<&Rewrite> {
        match kind {
            VariantKind::Human => None,
            VariantKind::Generated => self.generated.as_ref(),
            VariantKind::Translated => self.translated.as_ref(),
            VariantKind::GeneratedTranslated => self.generated_translated.as_ref(),
        }
    }

    /// Kinds present, in [`VariantKind::ALL`] order.
    pub fn kinds(&self) -> Vec<VariantKind> {
        self.annotations.keys().copied().collect()
    }
}

fn non_empty(r: Rewrite, kind: VariantKind, id: &str) -> Option<Rewrite> {
    if r.text.trim().is_empty() {
        log::warn!("ad {id}: {kind} output is empty, leaving it out");
        return None;
    }
    Some(r)
}

/// Builds every variant the inputs allow, annotates each and ranks them
/// together when a ranker is loaded. `page_html` is the landing page behind
/// `ad.url`; generator variants need it and a generator model.
pub fn build_variant_set(ad: &Ad, page_html: Option<&str>, models: &Models) -> Result<VariantSet, PipelineError> {
    let translated = if models.translators.contains_key(&ad.domain) {
        non_empty(run_translator(ad, models)?, VariantKind::Translated, &ad.id)
    } else {
        None
    };

    let (mut generated, mut generated_translated) = (None, None);
    if let (Some(html), Some(_)) = (page_html.filter(|_| ad.url.is_some()), &models.generator) {
        match run_generator(html, models) {
            Ok(g) => {
                if let Some(g) = non_empty(g, VariantKind::Generated, &ad.id) {
                    if models.translators.contains_key(&ad.domain) {
                        let text = translate_normalized(&g.text, ad.domain, models)?;
                        let gt = Rewrite {
                            text,
                            substitutions: g.substitutions.clone(),
                        };
                        generated_translated = non_empty(gt, VariantKind::GeneratedTranslated, &ad.id);
                    }
                    generated = Some(g);
                }
            }
            Err(PipelineError::NoContent) => log::warn!("ad {}: landing page has no content", ad.id),
            Err(e) => return Err(e),
        }
    }

    let mut set = VariantSet {
        human: ad.clone(),
        generated,
        translated,
        generated_translated,
        ranks: None,
        probabilities: None,
        annotations: BTreeMap::new(),
    };
    set.annotations
        .insert(VariantKind::Human, annotate(&concat_text(ad)?, models)?);
    for kind in &VariantKind::ALL[1..] {
        if let Some(r) = set.rewrite(*kind) {
            let text = r.realize_lenient(&models.defaults);
            set.annotations.insert(*kind, annotate(&text, models)?);
        }
    }

    if let Some(ranker) = &models.ranker {
        let kinds = set.kinds();
        let rows: Vec<Vec<f64>> = kinds
            .iter()
            .map(|k| set.annotations[k].features.to_array().to_vec())
            .collect();
        let ranked = rank_variants(ranker, &rows);
        set.ranks = Some(kinds.iter().zip(&ranked).map(|(k, r)| (*k, r.rank)).collect());
        set.probabilities = Some(kinds.iter().zip(&ranked).map(|(k, r)| (*k, r.probability)).collect());
    }
    Ok(set)
}
