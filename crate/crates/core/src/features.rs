//! Ad text features for the CTR ranker: readability formulas, a
//! lexicon-based sentiment score and surface counts.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::{split_tokens, TokenKind};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("text has no words")]
    EmptyText,
    #[error("{file} line {line}: {reason}")]
    Lexicon {
        file: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse part-of-speech classes used for the count features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Adj,
    Verb,
    Det,
    Other,
}

impl std::str::FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "NOUN" => Ok(PosTag::Noun),
            "ADJ" => Ok(PosTag::Adj),
            "VERB" => Ok(PosTag::Verb),
            "DET" => Ok(PosTag::Det),
            "OTHER" => Ok(PosTag::Other),
            other => Err(format!("unknown tag {other:?}")),
        }
    }
}

pub const BOOSTER_INCREMENT: f64 = 0.293;
pub const NEGATION_SCALAR: f64 = -0.74;
pub const EXCLAMATION_INCREMENT: f64 = 0.292;
pub const MAX_EXCLAMATIONS: usize = 4;
const NORMALIZATION_ALPHA: f64 = 15.0;
const NEGATION_WINDOW: usize = 3;

/// Word lists and tables behind the features. All keys are lowercase.
#[derive(Debug, Clone, Default)]
pub struct LexiconSet {
    pub easy_words: HashSet<String>,
    /// Valence in [-4, 4].
    pub sentiment: HashMap<String, f64>,
    /// +0.293 for intensifiers, -0.293 for dampeners.
    pub boosters: HashMap<String, f64>,
    pub negations: HashSet<String>,
    pub pos: HashMap<String, PosTag>,
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

impl LexiconSet {
    /// Builds a set from file contents: `word<TAB>score` sentiment, plain
    /// word lists (boosters may be prefixed with `-` for dampeners) and
    /// `word<TAB>TAG` parts of speech.
    pub fn from_sources(
        easy_words: &str,
        sentiment: &str,
        boosters: &str,
        negations: &str,
        pos: &str,
    ) -> Result<Self, FeatureError> {
        let err = |file: &str, line, reason: String| FeatureError::Lexicon {
            file: file.to_string(),
            line,
            reason,
        };
        let mut lex = LexiconSet {
            easy_words: lines(easy_words).map(|(_, w)| w.to_lowercase()).collect(),
            negations: lines(negations).map(|(_, w)| w.to_lowercase()).collect(),
            ..Default::default()
        };
        for (n, line) in lines(sentiment) {
            let (w, s) = line
                .split_once('\t')
                .ok_or_else(|| err("sentiment", n, "expected word<TAB>score".into()))?;
            let score: f64 = s
                .trim()
                .parse()
                .map_err(|_| err("sentiment", n, format!("bad score {s:?}")))?;
            if !(-4.0..=4.0).contains(&score) {
                return Err(err("sentiment", n, format!("score {score} outside [-4, 4]")));
            }
            lex.sentiment.insert(w.trim().to_lowercase(), score);
        }
        for (_, line) in lines(boosters) {
            match line.strip_prefix('-') {
                Some(w) => lex.boosters.insert(w.trim().to_lowercase(), -BOOSTER_INCREMENT),
                None => lex.boosters.insert(line.to_lowercase(), BOOSTER_INCREMENT),
            };
        }
        for (n, line) in lines(pos) {
            let (w, t) = line
                .split_once('\t')
                .ok_or_else(|| err("pos", n, "expected word<TAB>TAG".into()))?;
            let tag = t.parse().map_err(|e| err("pos", n, e))?;
            lex.pos.insert(w.trim().to_lowercase(), tag);
        }
        if let Some(w) = lex.boosters.keys().find(|w| lex.negations.contains(*w)) {
            return Err(err("boosters", 0, format!("{w:?} is also a negation")));
        }
        Ok(lex)
    }

    /// Loads `easy_words.txt`, `sentiment.tsv`, `boosters.txt`,
    /// `negations.txt` and `pos.tsv` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let read = |name: &str| std::fs::read_to_string(dir.as_ref().join(name));
        Self::from_sources(
            &read("easy_words.txt")?,
            &read("sentiment.tsv")?,
            &read("boosters.txt")?,
            &read("negations.txt")?,
            &read("pos.tsv")?,
        )
    }

    /// The lexicons shipped with the crate.
    pub fn standard() -> &'static LexiconSet {
        static STD: OnceLock<LexiconSet> = OnceLock::new();
        STD.get_or_init(|| {
            LexiconSet::from_sources(
                include_str!("../data/easy_words.txt"),
                include_str!("../data/sentiment.tsv"),
                include_str!("../data/boosters.txt"),
                include_str!("../data/negations.txt"),
                include_str!("../data/pos.tsv"),
            )
            .expect("bundled lexicons parse")
        })
    }

    /// Tag for a token: placeholders are nouns, numbers and punctuation
    /// are OTHER, unlisted words default to NOUN.
    pub fn tag(&self, token: &str) -> PosTag {
        match kind_of(token) {
            TokenKind::Placeholder => PosTag::Noun,
            TokenKind::Number | TokenKind::Punct => PosTag::Other,
            TokenKind::Word => self
                .pos
                .get(&token.to_lowercase())
                .copied()
                .unwrap_or(PosTag::Noun),
        }
    }

    fn is_negation(&self, word: &str) -> bool {
        self.negations.contains(word) || word.ends_with("n't")
    }
}

fn kind_of(token: &str) -> TokenKind {
    if token.starts_with('<') && token.ends_with('>') && token.len() > 2 {
        TokenKind::Placeholder
    } else if !token.chars().any(char::is_alphanumeric) {
        TokenKind::Punct
    } else if token.chars().any(|c| c.is_ascii_digit()) && !token.chars().any(char::is_alphabetic) {
        TokenKind::Number
    } else {
        TokenKind::Word
    }
}

/// Tokenized text with the counts every formula shares.
#[derive(Debug, Clone)]
pub struct TextStats {
    tokens: Vec<String>,
    /// Tokens containing a letter or digit, lowercased.
    pub words: Vec<String>,
    pub sentences: usize,
    pub syllables: usize,
    /// Letters and digits inside words.
    pub letters: usize,
}

impl TextStats {
    pub fn new(text: &str) -> Result<Self, FeatureError> {
        let tokens = split_tokens(text);
        let words: Vec<String> = tokens
            .iter()
            .filter(|t| kind_of(t) != TokenKind::Punct)
            .map(|t| t.to_lowercase())
            .collect();
        if words.is_empty() {
            return Err(FeatureError::EmptyText);
        }
        Ok(TextStats {
            sentences: sentence_count(&tokens),
            syllables: words.iter().map(|w| count_syllables(w)).sum(),
            letters: words
                .iter()
                .map(|w| w.chars().filter(|c| c.is_alphanumeric()).count())
                .sum(),
            words,
            tokens,
        })
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    fn words_per_sentence(&self) -> f64 {
        self.word_count() as f64 / self.sentences as f64
    }

    fn syllables_per_word(&self) -> f64 {
        self.syllables as f64 / self.word_count() as f64
    }
}

/// Runs of `.`, `!` or `?` tokens, at least 1.
fn sentence_count(tokens: &[String]) -> usize {
    let mut runs = 0;
    let mut in_run = false;
    for t in tokens {
        let terminal = matches!(t.as_str(), "." | "!" | "?");
        if terminal && !in_run {
            runs += 1;
        }
        in_run = terminal;
    }
    runs.max(1)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate: maximal runs of a, e, i, o, u, y; a
/// final `e` after a consonant is silent unless the word ends in
/// consonant + `le`; at least 1.
pub fn count_syllables(word: &str) -> usize {
    let w: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect();
    let mut groups: usize = 0;
    let mut prev = false;
    for &c in &w {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    if n >= 2 && w[n - 1] == 'e' && !is_vowel(w[n - 2]) {
        let consonant_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

pub fn flesch_reading_ease(text: &str) -> Result<f64, FeatureError> {
    let s = TextStats::new(text)?;
    Ok(ease_of(&s))
}

pub fn flesch_kincaid_grade(text: &str) -> Result<f64, FeatureError> {
    let s = TextStats::new(text)?;
    Ok(grade_of(&s))
}

fn ease_of(s: &TextStats) -> f64 {
    206.835 - 1.015 * s.words_per_sentence() - 84.6 * s.syllables_per_word()
}

fn grade_of(s: &TextStats) -> f64 {
    0.39 * s.words_per_sentence() + 11.8 * s.syllables_per_word() - 15.59
}

fn has_letter(w: &str) -> bool {
    w.chars().any(char::is_alphabetic) && kind_of(w) == TokenKind::Word
}

/// Words of three or more syllables that are not on the easy list.
pub fn difficult_word_count(text: &str, lex: &LexiconSet) -> usize {
    TextStats::new(text).map_or(0, |s| difficult_of(&s, lex))
}

fn difficult_of(s: &TextStats, lex: &LexiconSet) -> usize {
    s.words
        .iter()
        .filter(|w| has_letter(w) && count_syllables(w) >= 3 && !lex.easy_words.contains(*w))
        .count()
}

/// The three grade estimates combined by [`readability_consensus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParts {
    pub dale_chall: f64,
    pub linsear_write: f64,
    pub coleman_liau: f64,
}

impl ConsensusParts {
    pub fn median(&self) -> f64 {
        median3(self.dale_chall, self.linsear_write, self.coleman_liau)
    }
}

pub fn median3(a: f64, b: f64, c: f64) -> f64 {
    let mut v = [a, b, c];
    v.sort_by(f64::total_cmp);
    v[1]
}

/// Dale-Chall: `0.1579·PDW + 0.0496·ASL`, plus 3.6365 when more than 5% of
/// words are off the easy list (PDW is that percentage). Linsear Write:
/// 1 point per word under three syllables, 3 per longer word, divided by
/// sentences, halved after subtracting 2 unless above 20. Coleman-Liau:
/// `0.0588·L − 0.296·S − 15.8` with letters and sentences per 100 words.
pub fn consensus_parts(text: &str, lex: &LexiconSet) -> Result<ConsensusParts, FeatureError> {
    Ok(parts_of(&TextStats::new(text)?, lex))
}

fn parts_of(s: &TextStats, lex: &LexiconSet) -> ConsensusParts {
    let words = s.word_count() as f64;
    let sentences = s.sentences as f64;

    let off_list = s
        .words
        .iter()
        .filter(|w| has_letter(w) && !lex.easy_words.contains(*w))
        .count() as f64;
    let pdw = 100.0 * off_list / words;
    let mut dale_chall = 0.1579 * pdw + 0.0496 * (words / sentences);
    if pdw > 5.0 {
        dale_chall += 3.6365;
    }

    let points: f64 = s
        .words
        .iter()
        .map(|w| if count_syllables(w) >= 3 { 3.0 } else { 1.0 })
        .sum();
    let r = points / sentences;
    let linsear_write = if r > 20.0 { r / 2.0 } else { (r - 2.0) / 2.0 };

    let l = 100.0 * s.letters as f64 / words;
    let per100 = 100.0 * sentences / words;
    let coleman_liau = 0.0588 * l - 0.296 * per100 - 15.8;

    ConsensusParts {
        dale_chall,
        linsear_write,
        coleman_liau,
    }
}

/// Median of the Dale-Chall, Linsear Write and Coleman-Liau grades.
pub fn readability_consensus(text: &str, lex: &LexiconSet) -> Result<f64, FeatureError> {
    Ok(consensus_parts(text, lex)?.median())
}

/// Compound valence in [-1, 1].
///
/// Each lexicon word contributes its valence, moved by ±0.293 per
/// immediately preceding booster (away from zero for intensifiers, toward
/// zero for dampeners) and multiplied by −0.74 if a negation appears among
/// the three preceding words. Up to four `!` add 0.292 each in the
/// direction of the sum. The sum `s` is mapped to `s / √(s² + 15)`.
pub fn sentiment_compound(text: &str, lex: &LexiconSet) -> f64 {
    let tokens = split_tokens(text);
    compound_of(&tokens, lex)
}

fn compound_of(tokens: &[String], lex: &LexiconSet) -> f64 {
    let words: Vec<String> = tokens
        .iter()
        .filter(|t| kind_of(t) == TokenKind::Word)
        .map(|t| t.to_lowercase())
        .collect();
    let mut sum = 0.0;
    for (i, w) in words.iter().enumerate() {
        let Some(&valence) = lex.sentiment.get(w) else {
            continue;
        };
        if lex.boosters.contains_key(w) {
            continue;
        }
        let mut v = valence;
        let sign = valence.signum();
        for prev in words[..i].iter().rev() {
            match lex.boosters.get(prev) {
                Some(b) => v += b * sign,
                None => break,
            }
        }
        if words[i.saturating_sub(NEGATION_WINDOW)..i]
            .iter()
            .any(|p| lex.is_negation(p))
        {
            v *= NEGATION_SCALAR;
        }
        sum += v;
    }
    let bangs = tokens.iter().filter(|t| t.as_str() == "!").count().min(MAX_EXCLAMATIONS);
    if sum > 0.0 {
        sum += bangs as f64 * EXCLAMATION_INCREMENT;
    } else if sum < 0.0 {
        sum -= bangs as f64 * EXCLAMATION_INCREMENT;
    }
    if sum == 0.0 {
        return 0.0;
    }
    (sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()).clamp(-1.0, 1.0)
}

/// Distinct lowercase words over all words.
pub fn lexical_diversity(text: &str) -> Result<f64, FeatureError> {
    Ok(diversity_of(&TextStats::new(text)?))
}

fn diversity_of(s: &TextStats) -> f64 {
    let distinct: HashSet<&str> = s.words.iter().map(String::as_str).collect();
    distinct.len() as f64 / s.word_count() as f64
}

/// Punctuation tokens counted by [`surface_counts`].
pub fn is_counted_punct(token: &str) -> bool {
    matches!(token, "." | "," | "!" | "?" | ";" | ":" | "(" | ")" | "-")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceCounts {
    pub punct: usize,
    pub noun_phrases: usize,
    pub adjectives: usize,
}

/// Punctuation marks, noun phrases (maximal `DET? ADJ* NOUN+` runs) and
/// adjectives.
pub fn surface_counts(text: &str, lex: &LexiconSet) -> SurfaceCounts {
    counts_of(&split_tokens(text), lex)
}

fn counts_of(tokens: &[String], lex: &LexiconSet) -> SurfaceCounts {
    let tags: Vec<PosTag> = tokens.iter().map(|t| lex.tag(t)).collect();
    let mut noun_phrases = 0;
    let mut i = 0;
    while i < tags.len() {
        let mut j = i;
        if tags[j] == PosTag::Det {
            j += 1;
        }
        while j < tags.len() && tags[j] == PosTag::Adj {
            j += 1;
        }
        let nouns_start = j;
        while j < tags.len() && tags[j] == PosTag::Noun {
            j += 1;
        }
        if j > nouns_start {
            noun_phrases += 1;
            i = j;
        } else {
            i += 1;
        }
    }
    SurfaceCounts {
        punct: tokens.iter().filter(|t| is_counted_punct(t)).count(),
        noun_phrases,
        adjectives: tags.iter().filter(|&&t| t == PosTag::Adj).count(),
    }
}

pub const FEATURE_NAMES: [&str; 9] = [
    "fk_ease",
    "fk_grade",
    "difficult_words",
    "consensus_grade",
    "sentiment",
    "lexical_diversity",
    "punct_count",
    "noun_phrase_count",
    "adjective_count",
];

/// The nine ranker features of one ad text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub fk_ease: f64,
    pub fk_grade: f64,
    pub difficult_words: u32,
    pub consensus_grade: f64,
    pub sentiment: f64,
    pub lexical_diversity: f64,
    pub punct_count: u32,
    pub noun_phrase_count: u32,
    pub adjective_count: u32,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; 9] {
        [
            self.fk_ease,
            self.fk_grade,
            self.difficult_words as f64,
            self.consensus_grade,
            self.sentiment,
            self.lexical_diversity,
            self.punct_count as f64,
            self.noun_phrase_count as f64,
            self.adjective_count as f64,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

pub fn extract_features(text: &str, lex: &LexiconSet) -> Result<FeatureVector, FeatureError> {
    let stats = TextStats::new(text)?;
    let counts = counts_of(&stats.tokens, lex);
    Ok(FeatureVector {
        fk_ease: ease_of(&stats),
        fk_grade: grade_of(&stats),
        difficult_words: difficult_of(&stats, lex) as u32,
        consensus_grade: parts_of(&stats, lex).median(),
        sentiment: compound_of(&stats.tokens, lex),
        lexical_diversity: diversity_of(&stats),
        punct_count: counts.punct as u32,
        noun_phrase_count: counts.noun_phrases as u32,
        adjective_count: counts.adjectives as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> &'static LexiconSet {
        LexiconSet::standard()
    }

    #[test]
    fn syllables() {
        for (w, n) in [
            ("cat", 1),
            ("remedy", 3),
            ("delivery", 4),
            ("the", 1),
            ("table", 2),
            ("make", 1),
            ("free", 1),
            ("understanding", 4),
            ("10", 1),
        ] {
            assert_eq!(count_syllables(w), n, "{w}");
        }
    }

    #[test]
    fn sentences_are_terminal_runs() {
        let count = |t: &str| sentence_count(&split_tokens(t));
        assert_eq!(count("a. b! c?"), 3);
        assert_eq!(count("wait... what?!"), 2);
        assert_eq!(count("no terminal"), 1);
        assert_eq!(count("version 3.5 out"), 1);
    }

    #[test]
    fn empty_text_errors() {
        assert!(matches!(flesch_reading_ease(""), Err(FeatureError::EmptyText)));
        assert!(matches!(extract_features("  \n", lex()), Err(FeatureError::EmptyText)));
        assert!(matches!(lexical_diversity("!!"), Err(FeatureError::EmptyText)));
        assert_eq!(difficult_word_count("", lex()), 0);
    }

    #[test]
    fn sentiment_rules() {
        assert_eq!(sentiment_compound("the mat", lex()), 0.0);
        let great = sentiment_compound("great", lex());
        assert!((great - 3.1 / (3.1f64 * 3.1 + 15.0).sqrt()).abs() < 1e-12);
        assert!(sentiment_compound("not great", lex()) < 0.0);
        assert!(sentiment_compound("very great", lex()) > great);
        assert!(sentiment_compound("great!", lex()) > great);
        assert_eq!(sentiment_compound("!!!", lex()), 0.0);
    }

    #[test]
    fn counts() {
        assert_eq!(
            surface_counts("good remedy", lex()),
            SurfaceCounts { punct: 0, noun_phrases: 1, adjectives: 1 }
        );
        assert_eq!(
            surface_counts("!!!", lex()),
            SurfaceCounts { punct: 3, noun_phrases: 0, adjectives: 0 }
        );
        assert_eq!(
            surface_counts("", lex()),
            SurfaceCounts { punct: 0, noun_phrases: 0, adjectives: 0 }
        );
    }

    #[test]
    fn booster_and_negation_lists_disjoint() {
        let l = lex();
        assert!(l.boosters.keys().all(|b| !l.negations.contains(b)));
        assert_eq!(l.sentiment.get("great"), Some(&3.1));
        assert_eq!(l.boosters.get("slightly"), Some(&-BOOSTER_INCREMENT));
        assert!(LexiconSet::from_sources("", "", "not", "not", "").is_err());
        assert!(LexiconSet::from_sources("", "x\t9", "", "", "").is_err());
        assert!(LexiconSet::from_sources("", "", "", "", "x\tFOO").is_err());
    }

    #[test]
    fn feature_json_has_nine_fields() {
        let f = extract_features("Check the good remedy now!", lex()).unwrap();
        let v = serde_json::to_value(f).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 9);
        for name in FEATURE_NAMES {
            assert!(v.get(name).is_some(), "{name}");
        }
    }
}
