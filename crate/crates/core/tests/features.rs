use adforge_core::features::*;
use proptest::prelude::*;

fn lex() -> &'static LexiconSet {
    LexiconSet::standard()
}

const CAT: &str = "The cat sat on the mat.";
const REMEDY: &str = "Discover the best remedy for dry cough. Browse it now!";

#[test]
fn flesch_on_cat_sentence() {
    // 6 words, 1 sentence, 6 syllables
    let ease = flesch_reading_ease(CAT).unwrap();
    assert!((ease - 116.145).abs() < 0.01, "{ease}");
    let grade = flesch_kincaid_grade(CAT).unwrap();
    assert!((grade - (0.39 * 6.0 + 11.8 - 15.59)).abs() < 1e-9);
    assert!((grade + 1.45).abs() < 1e-9);
}

#[test]
fn flesch_on_remedy_ad() {
    // 10 words, 2 sentences; syllables dis-cov-er(3) the best rem-e-dy(3) for
    // dry cough browse it now = 14
    let ease = flesch_reading_ease(REMEDY).unwrap();
    assert!((ease - (206.835 - 1.015 * 5.0 - 84.6 * 1.4)).abs() < 1e-9);
    assert!((ease - 83.32).abs() < 1e-9);
}

#[test]
fn consensus_parts_on_cat_sentence() {
    // every word is on the easy list; 17 letters
    let p = consensus_parts(CAT, lex()).unwrap();
    assert!((p.dale_chall - 0.2976).abs() < 1e-9, "{p:?}");
    assert!((p.linsear_write - 2.0).abs() < 1e-9);
    let cl = 0.0588 * (1700.0 / 6.0) - 0.296 * (100.0 / 6.0) - 15.8;
    assert!((p.coleman_liau - cl).abs() < 1e-9);
    assert!((cl + 4.073333).abs() < 1e-5);
    let consensus = readability_consensus(CAT, lex()).unwrap();
    assert!((consensus - 0.2976).abs() < 1e-9);
}

#[test]
fn consensus_parts_on_remedy_ad() {
    // off the easy list: remedy, browse -> 20% of words
    let p = consensus_parts(REMEDY, lex()).unwrap();
    assert!((p.dale_chall - (0.1579 * 20.0 + 0.0496 * 5.0 + 3.6365)).abs() < 1e-9, "{p:?}");
    assert!((p.dale_chall - 7.0425).abs() < 1e-9);
    // two 3-syllable words: (2*3 + 8) / 2 sentences = 7 -> (7 - 2) / 2
    assert!((p.linsear_write - 2.5).abs() < 1e-9);
    // 43 letters over 10 words
    assert!((p.coleman_liau - (0.0588 * 430.0 - 0.296 * 20.0 - 15.8)).abs() < 1e-9);
    assert!((p.coleman_liau - 3.564).abs() < 1e-9);
    assert!((readability_consensus(REMEDY, lex()).unwrap() - 3.564).abs() < 1e-9);
}

#[test]
fn consensus_is_median() {
    assert_eq!(median3(2.0, 5.0, 9.0), 5.0);
    assert_eq!(median3(9.0, 2.0, 5.0), 5.0);
    let single = readability_consensus("Hello", lex()).unwrap();
    assert!(single.is_finite());
}

#[test]
fn difficult_words() {
    assert_eq!(difficult_word_count("The cat sat on the mat.", lex()), 0);
    assert_eq!(difficult_word_count("understanding understanding", lex()), 2);
    assert_eq!(difficult_word_count("", lex()), 0);
}

#[test]
fn diversity_examples() {
    assert_eq!(lexical_diversity("check here check now").unwrap(), 0.75);
    assert_eq!(lexical_diversity("one two three").unwrap(), 1.0);
    assert!(lexical_diversity("").is_err());
}

#[test]
fn features_compose() {
    let f = extract_features(REMEDY, lex()).unwrap();
    assert_eq!(f.fk_ease, flesch_reading_ease(REMEDY).unwrap());
    assert_eq!(f.fk_grade, flesch_kincaid_grade(REMEDY).unwrap());
    assert_eq!(f.difficult_words as usize, difficult_word_count(REMEDY, lex()));
    assert_eq!(f.consensus_grade, readability_consensus(REMEDY, lex()).unwrap());
    assert_eq!(f.sentiment, sentiment_compound(REMEDY, lex()));
    assert_eq!(f.lexical_diversity, lexical_diversity(REMEDY).unwrap());
    let c = surface_counts(REMEDY, lex());
    assert_eq!(f.punct_count, 2);
    assert_eq!(f.punct_count as usize, c.punct);
    assert_eq!(f.noun_phrase_count as usize, c.noun_phrases);
    assert_eq!(f.adjective_count as usize, c.adjectives);
    assert_eq!(extract_features(REMEDY, lex()).unwrap(), f);
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,12}",
        Just("great".to_string()),
        Just("not".to_string()),
        Just("very".to_string()),
        Just("terrible".to_string()),
        Just("10".to_string()),
    ]
}

fn sentence() -> impl Strategy<Value = String> {
    (proptest::collection::vec(word(), 1..10), prop_oneof![Just("."), Just("!"), Just("?")])
        .prop_map(|(ws, end)| format!("{}{end}", ws.join(" ")))
}

fn text() -> impl Strategy<Value = String> {
    proptest::collection::vec(sentence(), 1..4).prop_map(|s| s.join(" "))
}

proptest! {
    #[test]
    fn duplication_keeps_flesch(t in text()) {
        let doubled = format!("{t} {t}");
        let (a, b) = (flesch_reading_ease(&t).unwrap(), flesch_reading_ease(&doubled).unwrap());
        prop_assert!((a - b).abs() < 1e-9);
        let (a, b) = (flesch_kincaid_grade(&t).unwrap(), flesch_kincaid_grade(&doubled).unwrap());
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(lexical_diversity(&doubled).unwrap() <= lexical_diversity(&t).unwrap());
    }

    #[test]
    fn compound_bounded(t in ".{0,200}") {
        let s = sentiment_compound(&t, lex());
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn compound_zero_without_scored_words(ws in proptest::collection::vec("[bcdfghjklmnpqrstvwxz]{3,8}", 1..10), bangs in 0usize..6) {
        let t = format!("{}{}", ws.join(" "), "!".repeat(bangs));
        prop_assume!(ws.iter().all(|w| !lex().sentiment.contains_key(w)));
        prop_assert_eq!(sentiment_compound(&t, lex()), 0.0);
    }

    #[test]
    fn features_total_on_nonempty_text(t in "[A-Za-z0-9 .,!?;:()'-]{0,120}") {
        match extract_features(&t, lex()) {
            Ok(f) => {
                prop_assert!(f.is_finite());
                prop_assert!(f.lexical_diversity > 0.0 && f.lexical_diversity <= 1.0);
                prop_assert!((-1.0..=1.0).contains(&f.sentiment));
            }
            Err(FeatureError::EmptyText) => prop_assert!(!t.chars().any(|c| c.is_alphanumeric())),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn syllables_at_least_one(w in "[a-z]{1,20}") {
        prop_assert!(count_syllables(&w) >= 1);
    }
}
