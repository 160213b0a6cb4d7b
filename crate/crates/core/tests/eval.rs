use std::collections::{BTreeMap, BTreeSet};

use adforge_core::ad::write_corpus;
use adforge_core::eval::*;
use adforge_core::features::{extract_features, LexiconSet};
use adforge_core::pipeline::{annotate, Models, VariantKind, VariantSet};
use adforge_core::psych::pearson;
use adforge_core::ranker::{fold_assignment, LambdaMartConfig};
use adforge_core::{concat_text, Ad, Domain};
use proptest::prelude::*;

fn corpus_bytes(c: &SynthCorpus) -> (Vec<u8>, Vec<u8>) {
    let mut ads = Vec::new();
    write_corpus(&mut ads, &c.ads).unwrap();
    let mut pages = Vec::new();
    write_pages(&mut pages, &c.pages).unwrap();
    (ads, pages)
}

fn small_config(seed: u64) -> SynthConfig {
    SynthConfig {
        n_queries: 20,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn synth_is_deterministic_per_seed() {
    let a = generate_corpus(&small_config(7)).unwrap();
    let b = generate_corpus(&small_config(7)).unwrap();
    assert_eq!(corpus_bytes(&a), corpus_bytes(&b));
    let c = generate_corpus(&small_config(8)).unwrap();
    assert_ne!(corpus_bytes(&a).0, corpus_bytes(&c).0);
}

#[test]
fn synth_shape() {
    let c = generate_corpus(&small_config(1)).unwrap();
    assert_eq!(c.ads.len(), 20 * 6);
    let queries: BTreeSet<&str> = c.ads.iter().map(|a| a.query.as_str()).collect();
    assert_eq!(queries.len(), 20);
    assert_eq!(c.pages.len(), 20);
    for ad in &c.ads {
        ad.validate().unwrap();
        assert!(ad.impressions >= 5_000);
        assert!(c.pages.contains_key(ad.url.as_ref().unwrap()));
    }
    let mut buf = Vec::new();
    write_pages(&mut buf, &c.pages).unwrap();
    assert_eq!(read_pages(buf.as_slice()).unwrap(), c.pages);
}

#[test]
fn planted_weight_gives_positive_correlation() {
    let c = generate_corpus(&SynthConfig::default()).unwrap();
    let lex = LexiconSet::standard();
    let ease: Vec<f64> = c
        .ads
        .iter()
        .map(|a| extract_features(&concat_text(a).unwrap(), lex).unwrap().fk_ease)
        .collect();
    let ctr: Vec<f64> = c.ads.iter().map(|a| a.ctr().unwrap()).collect();
    let r = pearson(&ease, &ctr).unwrap();
    assert!(r > 0.5, "r = {r}");

    let flipped = SynthConfig {
        weights: BTreeMap::from([("fk_ease".to_string(), -1.0)]),
        ..SynthConfig::default()
    };
    let c = generate_corpus(&flipped).unwrap();
    let ctr: Vec<f64> = c.ads.iter().map(|a| a.ctr().unwrap()).collect();
    assert!(pearson(&ease, &ctr).unwrap() < -0.5);
}

fn fast_eval() -> EvalConfig {
    EvalConfig {
        ranker: LambdaMartConfig {
            n_trees: 60,
            ..LambdaMartConfig::default()
        },
        ..EvalConfig::default()
    }
}

#[test]
fn offline_eval_recovers_planted_signal() {
    let c = generate_corpus(&SynthConfig::default()).unwrap();
    let report = offline_eval(&c.ads, &c.pages, &Models::default(), &fast_eval()).unwrap();
    assert_eq!(report.fold_kt.len(), 5);
    assert_eq!(report.n_ads, 300);
    assert!(report.mean_kt >= 0.6, "{report:?}");
    assert!(report.mean_kt > report.mean_random_kt);
    // no translator or generator: only the human variant remains
    assert_eq!(report.rank_shares.keys().copied().collect::<Vec<_>>(), [VariantKind::Human]);
    assert_eq!(report.rank_shares[&VariantKind::Human].shares, [1.0, 0.0, 0.0, 0.0]);
    assert_eq!(report.kemeny_order, [VariantKind::Human]);
    assert_eq!(report.psych.len(), 1);
    assert_eq!(report.psych[0].population, "human");
}

fn set_with_ranks(id: &str, ranks: &[(VariantKind, usize)]) -> VariantSet {
    let models = Models::default();
    let ad = Ad {
        id: id.into(),
        query: "q".into(),
        domain: Domain::MedicalSymptoms,
        titles: vec!["Cough relief".into()],
        descriptions: vec!["Browse now.".into()],
        impressions: 10,
        clicks: 1,
        url: None,
    };
    let annotation = annotate("Cough relief. Browse now.", &models).unwrap();
    VariantSet {
        human: ad,
        generated: None,
        translated: None,
        generated_translated: None,
        ranks: Some(ranks.iter().copied().collect()),
        probabilities: None,
        annotations: ranks.iter().map(|(k, _)| (*k, annotation.clone())).collect(),
    }
}

#[test]
fn unanimous_translator_comes_first() {
    use VariantKind::*;
    let sets = vec![
        set_with_ranks("a", &[(Human, 2), (Translated, 1), (Generated, 3), (GeneratedTranslated, 4)]),
        set_with_ranks("b", &[(Human, 3), (Translated, 1), (Generated, 2), (GeneratedTranslated, 2)]),
        set_with_ranks("c", &[(Human, 2), (Translated, 1)]),
    ];
    let order = consensus_order(&sets).unwrap();
    assert_eq!(order[0], Translated);
    assert_eq!(order.len(), 4);

    let shares = rank_shares(&sets);
    assert_eq!(shares[&Translated].shares, [1.0, 0.0, 0.0, 0.0]);
    assert_eq!(shares[&Human].n, 3);
    for s in shares.values() {
        assert!((s.shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn report_files_round_trip() {
    let c = generate_corpus(&small_config(3)).unwrap();
    let report = offline_eval(&c.ads, &c.pages, &Models::default(), &fast_eval()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&report, dir.path()).unwrap();
    let first: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();

    assert_eq!(read_report(dir.path().join(REPORT_JSON)).unwrap(), report);
    assert_eq!(read_report_csv(dir.path().join(REPORT_CSV)).unwrap(), report_metrics(&report));
    let shares = read_rank_shares(dir.path().join(RANK_SHARES_CSV)).unwrap();
    assert_eq!(shares, report.rank_shares);
    for s in shares.values() {
        assert!((s.shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    emit_report(&report, dir.path()).unwrap();
    let second: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn eval_rejects_empty_corpus() {
    assert!(matches!(
        offline_eval(&[], &BTreeMap::new(), &Models::default(), &fast_eval()),
        Err(EvalError::EmptyCorpus)
    ));
}

proptest! {
    #[test]
    fn folds_partition_groups(n in 2usize..80, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = fold_assignment(n, k, seed).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(folds.iter().all(|f| !f.is_empty()));
    }
}
