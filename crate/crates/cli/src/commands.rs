//! Subcommand definitions and their implementations.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adforge_core::eval::{emit_report, read_pages, write_pages};
use adforge_core::pipeline::{annotate, build_variant_set, run_generator, translate_normalized, Rewrite};
use adforge_core::psych::{bundled_labels, population_summary, read_labeled, summaries_to_csv};
use adforge_core::ranker::{train_lambdamart, RankingDataset};
use adforge_core::seq2seq::{make_generator_pairs, make_translation_pairs};
use adforge_core::{
    concat_text, extract_content, generate_corpus, offline_eval, parse_html, read_corpus, Ad, AffectModels, Defaults,
    Domain, Models, Seq2Seq,
};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::AppConfig;
use crate::models::{ModelDir, MODELS_DIR_ENV};
use crate::server::{fetch_page, serve, AppState};
use crate::store::Store;

pub const DEFAULT_MODELS_DIR: &str = "models";

#[derive(Debug, Parser)]
#[command(name = "adforge", version, about = "Generate, translate and rank search ad copy")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Model directory; falls back to $ADFORGE_MODELS_DIR, then `models`.
    #[arg(long, global = true)]
    pub models_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PageSource {
    /// Local HTML file.
    #[arg(long)]
    pub html: Option<PathBuf>,
    /// Page URL to fetch.
    #[arg(long)]
    pub url: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the main content of a landing page.
    Extract {
        #[command(flatten)]
        source: PageSource,
    },
    /// Train one translator per domain from an ad corpus.
    TrainTranslator {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Train the page-to-ad generator.
    TrainGenerator {
        #[arg(long)]
        corpus: PathBuf,
        /// JSONL of {url, html}; pages are fetched when absent.
        #[arg(long)]
        pages: Option<PathBuf>,
    },
    /// Rewrite ad text with the domain translator.
    Translate {
        #[arg(long)]
        text: String,
        #[arg(long)]
        domain: Domain,
    },
    /// Generate an ad from a landing page, optionally translating it.
    Generate {
        #[command(flatten)]
        source: PageSource,
        #[arg(long)]
        domain: Option<Domain>,
    },
    /// Build ranked variant sets for every ad in a corpus.
    Rank {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        pages: Option<PathBuf>,
        /// Retrain the ranker even if one is saved.
        #[arg(long)]
        retrain: bool,
        /// Output JSONL; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Annotate a text, or summarize a corpus by domain.
    Analyze {
        #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
        text: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Labeled ads for the affect models (bundled labels when absent).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Write a synthetic corpus with a planted CTR signal.
    Synth {
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        ads_per_query: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Cross-validated offline evaluation.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        pages: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Serve the HTTP API and review console.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Store directory holding campaigns.jsonl.
        #[arg(long, default_value = "store")]
        store: PathBuf,
        /// Directory of built UI assets served under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

pub struct RunContext {
    pub config: AppConfig,
    pub models_dir: ModelDir,
}

impl Cli {
    pub fn context(&self) -> anyhow::Result<RunContext> {
        let mut config = match &self.config {
            Some(path) => AppConfig::load(path)?,
            None => AppConfig::default(),
        };
        if let Some(seed) = self.seed {
            config = config.with_seed(seed);
        }
        let root = self
            .models_dir
            .clone()
            .or_else(|| std::env::var_os(MODELS_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_MODELS_DIR));
        Ok(RunContext {
            config,
            models_dir: ModelDir::new(root),
        })
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = cli.context()?;
    match cli.command {
        Command::Extract { source } => cmd_extract(&ctx, &source),
        Command::TrainTranslator { corpus } => cmd_train_translator(&ctx, &corpus),
        Command::TrainGenerator { corpus, pages } => cmd_train_generator(&ctx, &corpus, pages.as_deref()),
        Command::Translate { text, domain } => cmd_translate(&ctx, &text, domain),
        Command::Generate { source, domain } => cmd_generate(&ctx, &source, domain),
        Command::Rank {
            corpus,
            pages,
            retrain,
            out,
        } => cmd_rank(&ctx, &corpus, pages.as_deref(), retrain, out.as_deref()),
        Command::Analyze { text, corpus, labels } => cmd_analyze(&ctx, text.as_deref(), corpus.as_deref(), labels.as_deref()),
        Command::Synth {
            queries,
            ads_per_query,
            out,
        } => cmd_synth(&ctx, queries, ads_per_query, &out),
        Command::Eval { corpus, pages, out } => cmd_eval(&ctx, &corpus, pages.as_deref(), &out),
        Command::Serve { port, store, ui } => cmd_serve(ctx, port, &store, ui),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_corpus(path: &Path) -> anyhow::Result<Vec<Ad>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let ads = read_corpus(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    if ads.is_empty() {
        bail!("{} contains no ads", path.display());
    }
    Ok(ads)
}

fn load_pages(path: Option<&Path>) -> anyhow::Result<BTreeMap<String, String>> {
    match path {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Ok(read_pages(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?)
        }
        None => Ok(BTreeMap::new()),
    }
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn fetch_blocking(urls: &[String], config: &AppConfig) -> anyhow::Result<Vec<anyhow::Result<String>>> {
    let client = reqwest::Client::builder().timeout(config.fetch_timeout()).build()?;
    let rt = runtime()?;
    Ok(rt.block_on(async {
        let mut out = Vec::with_capacity(urls.len());
        for url in urls {
            out.push(fetch_page(&client, url).await.map_err(anyhow::Error::from));
        }
        out
    }))
}

fn read_source(source: &PageSource, config: &AppConfig) -> anyhow::Result<String> {
    match (&source.html, &source.url) {
        (Some(path), _) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())),
        (None, Some(url)) => fetch_blocking(std::slice::from_ref(url), config)?
            .pop()
            .expect("one result per url"),
        (None, None) => bail!("need --html or --url"),
    }
}

fn cmd_extract(ctx: &RunContext, source: &PageSource) -> anyhow::Result<()> {
    let html = read_source(source, &ctx.config)?;
    let root = parse_html(&html)?;
    print_json(&extract_content(&root, &ctx.config.extract))
}

fn cmd_train_translator(ctx: &RunContext, corpus: &Path) -> anyhow::Result<()> {
    let ads = load_corpus(corpus)?;
    let models = ctx.models_dir.load(&ctx.config)?;
    ctx.models_dir.ensure()?;
    let mut trained = 0;
    for domain in Domain::ALL {
        let subset: Vec<Ad> = ads.iter().filter(|a| a.domain == domain).cloned().collect();
        let pairs = match make_translation_pairs(&subset, &models.normalizer) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("no translator for {domain}: {e}");
                continue;
            }
        };
        let (model, losses) = Seq2Seq::fit(&pairs, &ctx.config.translator)?;
        let path = ctx.models_dir.translator(domain);
        model.save(&path)?;
        log::info!(
            "{domain}: {} pairs, {} epochs, final loss {:.4}",
            pairs.len(),
            losses.len(),
            losses.last().copied().unwrap_or(f64::NAN)
        );
        println!("{}", path.display());
        trained += 1;
    }
    if trained == 0 {
        bail!("no domain in {} yielded translation pairs", corpus.display());
    }
    let mut subs = Vec::new();
    for ad in &ads {
        subs.extend(models.normalizer.normalize(ad)?.substitutions);
    }
    ctx.models_dir.save_defaults(&Defaults::most_common(&subs))?;
    Ok(())
}

fn cmd_train_generator(ctx: &RunContext, corpus: &Path, pages: Option<&Path>) -> anyhow::Result<()> {
    let ads = load_corpus(corpus)?;
    let mut pages = load_pages(pages)?;
    let mut by_url: BTreeMap<String, Vec<Ad>> = BTreeMap::new();
    for ad in &ads {
        if let Some(url) = &ad.url {
            by_url.entry(url.clone()).or_default().push(ad.clone());
        }
    }
    if by_url.is_empty() {
        bail!("no ad in {} has a landing page url", corpus.display());
    }
    let missing: Vec<String> = by_url.keys().filter(|u| !pages.contains_key(*u)).cloned().collect();
    if !missing.is_empty() {
        for (url, result) in missing.iter().zip(fetch_blocking(&missing, &ctx.config)?) {
            match result {
                Ok(html) => {
                    pages.insert(url.clone(), html);
                }
                Err(e) => log::warn!("{e:#}"),
            }
        }
    }
    let models = ctx.models_dir.load(&ctx.config)?;
    let mut examples = Vec::new();
    for (url, group) in by_url {
        let Some(html) = pages.get(&url) else { continue };
        let root = match parse_html(html) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{url}: {e}");
                continue;
            }
        };
        examples.push((extract_content(&root, &models.extract), group));
    }
    let pairs = make_generator_pairs(&examples, &models.normalizer)?;
    let (model, losses) = Seq2Seq::fit(&pairs, &ctx.config.generator)?;
    ctx.models_dir.ensure()?;
    model.save(ctx.models_dir.generator())?;
    log::info!(
        "generator: {} pairs, final loss {:.4}",
        pairs.len(),
        losses.last().copied().unwrap_or(f64::NAN)
    );
    println!("{}", ctx.models_dir.generator().display());
    Ok(())
}

#[derive(Serialize)]
struct RewriteOut<'a> {
    text: &'a str,
    substitutions: &'a [(String, String)],
    realized: String,
}

fn rewrite_out<'a>(r: &'a Rewrite, models: &Models) -> RewriteOut<'a> {
    RewriteOut {
        text: &r.text,
        substitutions: &r.substitutions,
        realized: r.realize_lenient(&models.defaults),
    }
}

fn cmd_translate(ctx: &RunContext, text: &str, domain: Domain) -> anyhow::Result<()> {
    let models = ctx.models_dir.load(&ctx.config)?;
    let normalized = models.normalizer.normalize_text(text, "cli")?;
    let r = Rewrite {
        text: translate_normalized(&normalized.text, domain, &models)?,
        substitutions: normalized.substitutions,
    };
    print_json(&rewrite_out(&r, &models))
}

fn cmd_generate(ctx: &RunContext, source: &PageSource, domain: Option<Domain>) -> anyhow::Result<()> {
    let html = read_source(source, &ctx.config)?;
    let models = ctx.models_dir.load(&ctx.config)?;
    let generated = run_generator(&html, &models)?;
    let translated = match domain {
        Some(d) => Some(Rewrite {
            text: translate_normalized(&generated.text, d, &models)?,
            substitutions: generated.substitutions.clone(),
        }),
        None => None,
    };
    #[derive(Serialize)]
    struct Out<'a> {
        generated: RewriteOut<'a>,
        translated: Option<RewriteOut<'a>>,
    }
    print_json(&Out {
        generated: rewrite_out(&generated, &models),
        translated: translated.as_ref().map(|t| rewrite_out(t, &models)),
    })
}

fn cmd_rank(
    ctx: &RunContext,
    corpus: &Path,
    pages: Option<&Path>,
    retrain: bool,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let ads = load_corpus(corpus)?;
    let pages = load_pages(pages)?;
    let mut models = ctx.models_dir.load(&ctx.config)?;
    if retrain || models.ranker.is_none() {
        let data = RankingDataset::from_ads(&ads, &models.lexicons)?;
        let model = train_lambdamart(&data, &ctx.config.ranker)?.model;
        ctx.models_dir.ensure()?;
        model.save(ctx.models_dir.ranker())?;
        log::info!("trained ranker on {} queries", data.groups.len());
        models.ranker = Some(model);
    }
    let writer: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = BufWriter::new(writer);
    for ad in &ads {
        let page = ad.url.as_ref().and_then(|u| pages.get(u)).map(String::as_str);
        let set = build_variant_set(ad, page, &models).with_context(|| format!("ad {}", ad.id))?;
        serde_json::to_writer(&mut writer, &set)?;
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads the affect models, training and saving them from labels when none
/// are saved yet.
fn ensure_affect(ctx: &RunContext, models: &mut Models, labels: Option<&Path>) -> anyhow::Result<()> {
    if models.affect.is_some() && labels.is_none() {
        return Ok(());
    }
    let labeled = match labels {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_labeled(BufReader::new(file))?
        }
        None => bundled_labels(),
    };
    let affect = AffectModels::train(&labeled, &ctx.config.arousal, &ctx.config.valence)?;
    ctx.models_dir.ensure()?;
    affect.save(ctx.models_dir.affect())?;
    models.affect = Some(affect);
    Ok(())
}

fn cmd_analyze(ctx: &RunContext, text: Option<&str>, corpus: Option<&Path>, labels: Option<&Path>) -> anyhow::Result<()> {
    let mut models = ctx.models_dir.load(&ctx.config)?;
    ensure_affect(ctx, &mut models, labels)?;
    if let Some(text) = text {
        return print_json(&annotate(text, &models)?);
    }
    let corpus = corpus.context("need --text or --corpus")?;
    let ads = load_corpus(corpus)?;
    let mut populations: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for ad in &ads {
        populations
            .entry(ad.domain.code().to_string())
            .or_default()
            .push(concat_text(ad)?);
    }
    let summaries = population_summary(&populations, models.affect.as_ref(), &models.cta, &models.effects)?;
    print!("{}", summaries_to_csv(&summaries)?);
    Ok(())
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const PAGES_FILE: &str = "pages.jsonl";

fn cmd_synth(ctx: &RunContext, queries: Option<usize>, ads_per_query: Option<usize>, out: &Path) -> anyhow::Result<()> {
    let mut cfg = ctx.config.synth.clone();
    if let Some(q) = queries {
        cfg.n_queries = q;
    }
    if let Some(a) = ads_per_query {
        cfg.ads_per_query = a;
    }
    let corpus = generate_corpus(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ads_path = out.join(CORPUS_FILE);
    let mut w = BufWriter::new(File::create(&ads_path).with_context(|| format!("creating {}", ads_path.display()))?);
    adforge_core::write_corpus(&mut w, &corpus.ads)?;
    w.flush()?;
    println!("{}", ads_path.display());
    if !corpus.pages.is_empty() {
        let pages_path = out.join(PAGES_FILE);
        let mut w =
            BufWriter::new(File::create(&pages_path).with_context(|| format!("creating {}", pages_path.display()))?);
        write_pages(&mut w, &corpus.pages)?;
        w.flush()?;
        println!("{}", pages_path.display());
    }
    Ok(())
}

fn cmd_eval(ctx: &RunContext, corpus: &Path, pages: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let ads = load_corpus(corpus)?;
    let pages = load_pages(pages)?;
    let models = ctx.models_dir.load(&ctx.config)?;
    let report = offline_eval(&ads, &pages, &models, &ctx.config.eval)?;
    for path in emit_report(&report, out)? {
        println!("{}", path.display());
    }
    log::info!("mean KT {:.4} (random {:.4})", report.mean_kt, report.mean_random_kt);
    Ok(())
}

fn cmd_serve(ctx: RunContext, port: u16, store: &Path, ui: Option<PathBuf>) -> anyhow::Result<()> {
    let models = ctx.models_dir.load(&ctx.config)?;
    let store = Store::open(store)?;
    let mut state = AppState::new(models, store, ctx.config)?.with_model_dir(ctx.models_dir);
    if let Some(dir) = ui {
        state = state.with_ui_dir(dir);
    }
    runtime()?.block_on(serve(Arc::new(state), port))
}
