//! Synthetic corpora with a planted CTR model, and the offline evaluation
//! harness: cross-validated ranker quality, per-variant rank shares, a
//! consensus ordering of the variants and psych summaries.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::{concat_text, Ad, AdError, Domain};
use crate::features::{extract_features, FeatureError, FEATURE_NAMES};
use crate::pipeline::{build_variant_set, Models, PipelineError, VariantKind, VariantSet};
use crate::psych::{population_summary, summaries_to_csv, PopulationSummary, PsychError};
use crate::ranker::{
    cross_validate, kemeny_young, kendall_tau, train_lambdamart, LambdaMartConfig, PreferenceMatrix, RankError,
    RankingDataset,
};

pub const MIN_ADS_PER_QUERY: usize = 5;

pub const TIE_CONVENTION: &str =
    "competition ranking over min-max scaled scores; variants whose probabilities differ by less than 0.1 share a rank";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus has no rankable query groups")]
    EmptyCorpus,
    #[error("pages line {line}: {source}")]
    PageParse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Psych(#[from] PsychError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// synthetic corpus

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_queries: usize,
    pub ads_per_query: usize,
    /// Share of queries in the medical-symptoms domain.
    pub ms_fraction: f64,
    /// Planted logit weights on z-scored features, keyed by feature name.
    pub weights: BTreeMap<String, f64>,
    pub intercept: f64,
    /// Standard deviation of the Gaussian logit noise.
    pub noise_sigma: f64,
    pub min_impressions: u64,
    pub max_impressions: u64,
    /// Emit a landing page per query and set `url` on its ads.
    pub with_pages: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_queries: 50,
            ads_per_query: 6,
            ms_fraction: 0.5,
            weights: BTreeMap::from([("fk_ease".to_string(), 1.0)]),
            intercept: -3.0,
            noise_sigma: 0.25,
            min_impressions: 5_000,
            max_impressions: 20_000,
            with_pages: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.ads_per_query < MIN_ADS_PER_QUERY {
            return bad(format!(
                "ads_per_query must be at least {MIN_ADS_PER_QUERY}, got {}",
                self.ads_per_query
            ));
        }
        if self.n_queries == 0 {
            return bad("n_queries must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.ms_fraction) {
            return bad("ms_fraction must lie in [0, 1]".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative".into());
        }
        if self.min_impressions == 0 || self.min_impressions > self.max_impressions {
            return bad("need 0 < min_impressions <= max_impressions".into());
        }
        if let Some(k) = self.weights.keys().find(|k| !FEATURE_NAMES.contains(&k.as_str())) {
            return bad(format!("unknown feature {k:?} in weights"));
        }
        Ok(())
    }
}

/// Ads plus the landing pages their `url` fields point to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthCorpus {
    pub ads: Vec<Ad>,
    pub pages: BTreeMap<String, String>,
}

const MS_TOPICS: &[&str] = &[
    "dry cough",
    "back pain",
    "migraine",
    "insomnia",
    "acid reflux",
    "eczema",
    "arthritis",
    "sore throat",
    "headache",
    "constipation",
    "asthma",
    "hair loss",
    "tinnitus",
    "sinus infection",
    "snoring",
];

const PH_TOPICS: &[&str] = &[
    "smoking cessation",
    "flu vaccine",
    "birth control",
    "weight loss",
    "high cholesterol",
    "blood sugar",
    "contraception",
    "nicotine patch",
    "sleep apnea",
    "allergies",
];

const MODIFIERS: &[&str] = &["treatment", "relief", "help", "remedy", "symptoms", "clinic", "advice", "options"];

const TITLES: &[&str] = &[
    "{T} Relief",
    "{T} Treatment",
    "Help For {T}",
    "{T} Remedies",
    "Best {T} Care",
    "Understanding {T}",
    "{T} Clinic Near You",
    "Official {T} Guide",
];

const SECOND_TITLES: &[&str] = &["Save {n}% Today", "Official Site", "Free Delivery", "Top Rated"];

/// Description sentences in three readability bands.
const BANDS: [&[&str]; 3] = [
    &[
        "Get help now.",
        "Find fast relief today.",
        "Shop now and save {n}%.",
        "Call us for free advice.",
        "Try it now. It works fast.",
        "Browse our top picks.",
        "Order today. Free delivery.",
    ],
    &[
        "Learn about the causes and treatment of {t}.",
        "Compare trusted products from local pharmacies.",
        "Read reviews from real patients before you buy.",
        "Discover simple tips that may ease your symptoms.",
        "Book a visit with a doctor who knows {t}.",
    ],
    &[
        "Comprehensive information regarding pharmacological management of {t} symptomatology.",
        "Evidence-based therapeutic interventions addressing persistent physiological complications.",
        "Individualized consultations with experienced multidisciplinary healthcare professionals.",
        "Investigate contemporary diagnostic methodologies and supplementary medication alternatives.",
    ],
];

const PAGE_SENTENCES: &[&str] = &[
    "{T} affects many people at some point in their lives.",
    "Doctors recommend rest, fluids and a balanced diet for {t}.",
    "Most cases of {t} improve within a few weeks with simple care.",
    "See a doctor if {t} lasts longer than three weeks or gets worse.",
    "Pharmacies offer several products that can relieve {t}.",
    "Keeping a diary of symptoms helps your doctor understand {t}.",
];

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect::<String>())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn fill(template: &str, topic: &str, n: u32) -> String {
    template
        .replace("{T}", &title_case(topic))
        .replace("{t}", topic)
        .replace("{n}", &n.to_string())
}

fn slug(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("-")
}

fn page_html(topic: &str, rng: &mut ChaCha8Rng) -> String {
    let mut sentences: Vec<&str> = PAGE_SENTENCES.to_vec();
    sentences.shuffle(rng);
    let para = |s: &[&str]| s.iter().map(|t| fill(t, topic, 0)).collect::<Vec<_>>().join(" ");
    format!(
        "<html><head><title>{title} - Health Guide</title></head><body>\n\
         <div class=\"article-content\"><p>{p1}</p><p>{p2}</p></div>\n\
         <div class=\"comments\"><p>Reader comments are moderated before they appear here.</p></div>\n\
         <div id=\"footer\"><p>Copyright Health Guide. All rights reserved worldwide.</p></div>\n\
         </body></html>\n",
        title = title_case(topic),
        p1 = para(&sentences[..3]),
        p2 = para(&sentences[3..]),
    )
}

fn queries(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<(String, String, Domain)> {
    let mut ms: Vec<(&str, &str)> = MS_TOPICS
        .iter()
        .flat_map(|t| MODIFIERS.iter().map(move |m| (*t, *m)))
        .collect();
    let mut ph: Vec<(&str, &str)> = PH_TOPICS
        .iter()
        .flat_map(|t| MODIFIERS.iter().map(move |m| (*t, *m)))
        .collect();
    ms.shuffle(rng);
    ph.shuffle(rng);
    let (mut mi, mut pi) = (0, 0);
    (0..config.n_queries)
        .map(|_| {
            let use_ms = rng.gen_bool(config.ms_fraction);
            let (pool, idx, domain) = if use_ms {
                (&ms, &mut mi, Domain::MedicalSymptoms)
            } else {
                (&ph, &mut pi, Domain::PublicHealth)
            };
            let (topic, modifier) = pool[*idx % pool.len()];
            let round = *idx / pool.len();
            *idx += 1;
            let mut query = format!("{topic} {modifier}");
            if round > 0 {
                query.push_str(&format!(" {}", round + 1));
            }
            (query, topic.to_string(), domain)
        })
        .collect()
}

fn synth_ad(id: String, query: &str, topic: &str, domain: Domain, rng: &mut ChaCha8Rng) -> Ad {
    let n = *[10u32, 15, 20, 25, 30, 50].choose(rng).expect("non-empty");
    let mut titles = vec![fill(TITLES.choose(rng).expect("non-empty"), topic, n)];
    if rng.gen_bool(0.5) {
        titles.push(fill(SECOND_TITLES.choose(rng).expect("non-empty"), topic, n));
    }
    let band = BANDS[rng.gen_range(0..BANDS.len())];
    let k = rng.gen_range(1..=2);
    let descriptions = band
        .choose_multiple(rng, k)
        .map(|s| fill(s, topic, n))
        .collect();
    Ad {
        id,
        query: query.to_string(),
        domain,
        titles,
        descriptions,
        impressions: 0,
        clicks: 0,
        url: None,
    }
}

/// Templated ads whose clicks follow the planted logistic CTR model:
/// `logit = intercept + Σ w·z(feature) + N(0, σ²)`, with features z-scored
/// over the whole corpus.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus, EvalError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lex = crate::features::LexiconSet::standard();

    let mut corpus = SynthCorpus::default();
    for (qi, (query, topic, domain)) in queries(config, &mut rng).into_iter().enumerate() {
        let url = config
            .with_pages
            .then(|| format!("https://health.example/{}", slug(&query)));
        if let Some(url) = &url {
            corpus.pages.insert(url.clone(), page_html(&topic, &mut rng));
        }
        for a in 0..config.ads_per_query {
            let mut ad = synth_ad(format!("q{qi:03}-a{a}"), &query, &topic, domain, &mut rng);
            ad.url = url.clone();
            corpus.ads.push(ad);
        }
    }

    let feats: Vec<[f64; 9]> = corpus
        .ads
        .iter()
        .map(|ad| Ok(extract_features(&concat_text(ad)?, lex)?.to_array()))
        .collect::<Result<_, EvalError>>()?;
    let n = feats.len() as f64;
    let weighted: Vec<(usize, f64, f64, f64)> = config
        .weights
        .iter()
        .map(|(name, w)| {
            let j = FEATURE_NAMES.iter().position(|f| f == name).expect("validated");
            let mean = feats.iter().map(|f| f[j]).sum::<f64>() / n;
            let var = feats.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / n;
            (j, *w, mean, var.sqrt())
        })
        .collect();
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    for (ad, f) in corpus.ads.iter_mut().zip(&feats) {
        let signal: f64 = weighted
            .iter()
            .map(|&(j, w, mean, sd)| if sd > 0.0 { w * (f[j] - mean) / sd } else { 0.0 })
            .sum();
        let logit = config.intercept + signal + noise.sample(&mut rng);
        let ctr = 1.0 / (1.0 + (-logit).exp());
        ad.impressions = rng.gen_range(config.min_impressions..=config.max_impressions);
        ad.clicks = ((ctr * ad.impressions as f64).round() as u64).min(ad.impressions);
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PageRecord {
    url: String,
    html: String,
}

pub fn write_pages(mut writer: impl Write, pages: &BTreeMap<String, String>) -> Result<(), EvalError> {
    for (url, html) in pages {
        serde_json::to_writer(
            &mut writer,
            &PageRecord {
                url: url.clone(),
                html: html.clone(),
            },
        )?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// `{"url", "html"}` JSONL, one page per line.
pub fn read_pages(reader: impl BufRead) -> Result<BTreeMap<String, String>, EvalError> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PageRecord =
            serde_json::from_str(&line).map_err(|source| EvalError::PageParse { line: i + 1, source })?;
        out.insert(rec.url, rec.html);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// offline evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub ranker: LambdaMartConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            seed: 0,
            ranker: LambdaMartConfig::default(),
        }
    }
}

/// Share of variant sets placing a variant at ranks 1 through 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankShare {
    pub n: usize,
    pub shares: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_ads: usize,
    pub n_queries: usize,
    pub folds: usize,
    pub seed: u64,
    pub fold_kt: Vec<f64>,
    pub mean_kt: f64,
    pub fold_random_kt: Vec<f64>,
    pub mean_random_kt: f64,
    pub tie_convention: String,
    pub rank_shares: BTreeMap<VariantKind, RankShare>,
    pub kemeny_order: Vec<VariantKind>,
    pub psych: Vec<PopulationSummary>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Cross-validates the ranker over query groups, then ranks the variants of
/// every held-out ad with the ranker of its fold and aggregates the votes.
/// `models.ranker` is ignored; each fold trains its own.
pub fn offline_eval(
    ads: &[Ad],
    pages: &BTreeMap<String, String>,
    models: &Models,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let data = RankingDataset::from_ads(ads, &models.lexicons)?;
    if data.groups.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let by_id: BTreeMap<&str, &Ad> = ads.iter().map(|a| (a.id.as_str(), a)).collect();

    let mut fold_random = Vec::new();
    let mut fold_runs = Vec::new();
    let cv = cross_validate(data.groups.len(), config.folds, config.seed, |train, test| {
        let model = train_lambdamart(&data.subset(train), &config.ranker)?.model;
        let fold = fold_runs.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(fold + 1));
        let (mut taus, mut random_taus) = (Vec::new(), Vec::new());
        for &g in test {
            let group = &data.groups[g];
            let ctrs = group.ctrs();
            let scores: Vec<f64> = group.items.iter().map(|i| model.predict(&i.features)).collect();
            taus.push(kendall_tau(&scores, &ctrs));
            let random: Vec<f64> = (0..ctrs.len()).map(|_| rng.gen()).collect();
            random_taus.push(kendall_tau(&random, &ctrs));
        }
        fold_random.push(mean(&random_taus));
        fold_runs.push((model, test.to_vec()));
        Ok(mean(&taus))
    })?;

    let mut sets: Vec<VariantSet> = Vec::new();
    let mut fold_models = models.clone();
    for (model, test) in fold_runs {
        fold_models.ranker = Some(model);
        for g in test {
            for item in &data.groups[g].items {
                let ad = by_id[item.id.as_str()];
                let page = ad.url.as_ref().and_then(|u| pages.get(u)).map(String::as_str);
                sets.push(build_variant_set(ad, page, &fold_models)?);
            }
        }
    }
    sets.sort_by(|a, b| a.human.id.cmp(&b.human.id));

    let kinds = present_kinds(&sets);
    let rank_shares = rank_shares(&sets);
    let kemeny_order = consensus_order(&sets)?;

    let populations: BTreeMap<String, Vec<String>> = kinds
        .iter()
        .map(|k| {
            let texts = sets
                .iter()
                .filter_map(|s| s.annotations.get(k).map(|a| a.text.clone()))
                .collect();
            (k.as_str().to_string(), texts)
        })
        .collect();
    let psych = population_summary(&populations, models.affect.as_ref(), &models.cta, &models.effects)?;

    Ok(EvalReport {
        n_ads: sets.len(),
        n_queries: data.groups.len(),
        folds: config.folds,
        seed: config.seed,
        mean_random_kt: mean(&fold_random),
        fold_random_kt: fold_random,
        fold_kt: cv.fold_metrics,
        mean_kt: cv.mean,
        tie_convention: TIE_CONVENTION.to_string(),
        rank_shares,
        kemeny_order,
        psych,
    })
}

/// Variant kinds present in at least one set, in [`VariantKind::ALL`] order.
pub fn present_kinds(sets: &[VariantSet]) -> Vec<VariantKind> {
    VariantKind::ALL
        .into_iter()
        .filter(|k| sets.iter().any(|s| s.annotations.contains_key(k)))
        .collect()
}

/// Per present kind, the share of its ranked appearances at each rank.
pub fn rank_shares(sets: &[VariantSet]) -> BTreeMap<VariantKind, RankShare> {
    let mut out = BTreeMap::new();
    for k in present_kinds(sets) {
        let mut counts = [0usize; 4];
        let mut n = 0;
        for s in sets {
            if let Some(r) = s.ranks.as_ref().and_then(|r| r.get(&k)) {
                counts[r.saturating_sub(1).min(3)] += 1;
                n += 1;
            }
        }
        let shares = counts.map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 });
        out.insert(k, RankShare { n, shares });
    }
    out
}

/// Kemeny-Young order of the ranked kinds, treating every variant set as
/// one voter over the kinds it ranks (ties cast no vote).
pub fn consensus_order(sets: &[VariantSet]) -> Result<Vec<VariantKind>, EvalError> {
    let kinds: Vec<VariantKind> = VariantKind::ALL
        .into_iter()
        .filter(|k| sets.iter().any(|s| s.ranks.as_ref().is_some_and(|r| r.contains_key(k))))
        .collect();
    if kinds.is_empty() {
        return Ok(Vec::new());
    }
    let mut prefs = vec![vec![0u64; kinds.len()]; kinds.len()];
    for ranks in sets.iter().filter_map(|s| s.ranks.as_ref()) {
        for (i, a) in kinds.iter().enumerate() {
            for (j, b) in kinds.iter().enumerate() {
                if let (Some(ra), Some(rb)) = (ranks.get(a), ranks.get(b)) {
                    if ra < rb {
                        prefs[i][j] += 1;
                    }
                }
            }
        }
    }
    Ok(kemeny_young(&PreferenceMatrix::new(prefs)?)?
        .into_iter()
        .map(|i| kinds[i])
        .collect())
}

// ---------------------------------------------------------------------------
// report files

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const RANK_SHARES_CSV: &str = "rank_shares.csv";
pub const PSYCH_CSV: &str = "psych.csv";

/// Flat `(metric, value)` view of the scalar parts of a report.
pub fn report_metrics(report: &EvalReport) -> Vec<(String, String)> {
    let mut out = vec![
        ("n_ads".to_string(), report.n_ads.to_string()),
        ("n_queries".into(), report.n_queries.to_string()),
        ("folds".into(), report.folds.to_string()),
        ("seed".into(), report.seed.to_string()),
        ("mean_kt".into(), report.mean_kt.to_string()),
        ("mean_random_kt".into(), report.mean_random_kt.to_string()),
    ];
    for (i, v) in report.fold_kt.iter().enumerate() {
        out.push((format!("fold_kt.{i}"), v.to_string()));
    }
    for (i, v) in report.fold_random_kt.iter().enumerate() {
        out.push((format!("fold_random_kt.{i}"), v.to_string()));
    }
    for (i, k) in report.kemeny_order.iter().enumerate() {
        out.push((format!("kemeny.{}", i + 1), k.to_string()));
    }
    out
}

/// Writes report.json, report.csv, rank_shares.csv and psych.csv into
/// `dir`, creating it if needed. Returns the written paths.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>, EvalError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join(REPORT_JSON), json)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value"])?;
    for (k, v) in report_metrics(report) {
        w.write_record([k, v])?;
    }
    std::fs::write(dir.join(REPORT_CSV), w.into_inner().map_err(|e| e.into_error())?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "n", "rank_1", "rank_2", "rank_3", "rank_4"])?;
    for (k, s) in &report.rank_shares {
        let mut row = vec![k.to_string(), s.n.to_string()];
        row.extend(s.shares.iter().map(|v| v.to_string()));
        w.write_record(row)?;
    }
    std::fs::write(dir.join(RANK_SHARES_CSV), w.into_inner().map_err(|e| e.into_error())?)?;

    std::fs::write(dir.join(PSYCH_CSV), summaries_to_csv(&report.psych)?)?;
    Ok([REPORT_JSON, REPORT_CSV, RANK_SHARES_CSV, PSYCH_CSV]
        .iter()
        .map(|f| dir.join(f))
        .collect())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport, EvalError> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((rec[0].to_string(), rec[1].to_string()))
        })
        .collect()
}

pub fn read_rank_shares(path: impl AsRef<Path>) -> Result<BTreeMap<VariantKind, RankShare>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = |m: String| EvalError::InvalidConfig(format!("rank_shares.csv: {m}"));
        let kind: VariantKind = rec[0].parse().map_err(bad)?;
        let n = rec[1].parse().map_err(|e| bad(format!("{e}")))?;
        let mut shares = [0.0; 4];
        for (i, s) in shares.iter_mut().enumerate() {
            *s = rec[2 + i].parse().map_err(|e| bad(format!("{e}")))?;
        }
        out.insert(kind, RankShare { n, shares });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_small_groups() {
        let cfg = SynthConfig {
            ads_per_query: 4,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_corpus(&cfg), Err(EvalError::InvalidConfig(_))));
        let cfg = SynthConfig {
            weights: BTreeMap::from([("nope".to_string(), 1.0)]),
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn title_case_words() {
        assert_eq!(title_case("dry cough"), "Dry Cough");
        assert_eq!(fill("Save {n}% on {T}", "back pain", 20), "Save 20% on Back Pain");
    }
}
