//! Ad text normalization.
//!
//! Entities are found with a gazetteer plus a few surface rules and replaced
//! by placeholder tokens such as `<CONDITION/TREATMENT>` or `<CARDINAL>`; the
//! remaining words are reduced to a lemma/stem base form. [`realize`] maps a
//! normalized text back to presentable copy.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::{concat_text, Ad};
use crate::text::capitalize_sentences;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("ad {0:?} has no word tokens")]
    EmptyAd(String),
    #[error("no default surface for placeholder <{0}>")]
    MissingDefault(String),
    #[error("gazetteer line {line}: {reason}")]
    Gazetteer { line: usize, reason: String },
    #[error("lemma table line {line}: {reason}")]
    Lemmas { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Number,
    Punct,
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Lemma-then-stem form for words; the surface otherwise.
    pub base: String,
    pub kind: TokenKind,
}

/// Characters split off as their own tokens.
pub fn is_punct_char(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | '!' | '?' | '-' | ':' | ';' | '(' | ')' | '"' | '\u{2013}' | '\u{2014}'
            | '\u{2026}' | '\u{201c}' | '\u{201d}' | '[' | ']'
    )
}

fn is_currency(c: char) -> bool {
    matches!(c, '$' | '\u{20ac}' | '\u{a3}' | '\u{a5}')
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<([A-Z][A-Z/_]*)>").expect("valid regex"))
}

fn abbreviation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:[A-Za-z]\.){2,}").expect("valid regex"))
}

fn classify(surface: &str) -> TokenKind {
    if surface.chars().count() == 1 && surface.chars().all(is_punct_char) {
        TokenKind::Punct
    } else if placeholder_re()
        .find(surface)
        .is_some_and(|m| m.as_str() == surface)
    {
        TokenKind::Placeholder
    } else if surface.chars().any(|c| c.is_ascii_digit())
        && surface
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '/' | '%') || is_currency(c))
    {
        TokenKind::Number
    } else {
        TokenKind::Word
    }
}

/// Splits text into surface strings (no lemmatization).
///
/// Whitespace separates chunks; the punctuation marks of [`is_punct_char`]
/// become separate tokens except inside numbers (`3.5`, `1,000`), between
/// letters (`fast-acting`) and in dotted abbreviations (`U.S.`). Forms such as
/// `24/7`, `60%` and `$5` stay whole, as do placeholders like `<ORG>`.
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut cur = String::new();
    let mut i = 0;
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.is_empty() {
            out.push(std::mem::take(cur));
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            let rest: String = chars[i..].iter().collect();
            if let Some(m) = placeholder_re().find(&rest).filter(|m| m.start() == 0) {
                flush(&mut cur, out);
                out.push(m.as_str().to_string());
                i += m.as_str().chars().count();
                continue;
            }
        }
        if cur.is_empty() && c.is_ascii_alphabetic() {
            let rest: String = chars[i..].iter().collect();
            if let Some(m) = abbreviation_re().find(&rest) {
                out.push(m.as_str().to_string());
                i += m.as_str().chars().count();
                continue;
            }
        }
        if is_punct_char(c) {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            let between = |f: fn(&char) -> bool| {
                !cur.is_empty() && prev.as_ref().is_some_and(f) && next.as_ref().is_some_and(f)
            };
            let keep = match c {
                '.' | ',' => between(char::is_ascii_digit),
                '-' => between(|c| c.is_alphanumeric()),
                _ => false,
            };
            if keep {
                cur.push(c);
            } else {
                flush(&mut cur, out);
                out.push(c.to_string());
            }
        } else {
            cur.push(c);
        }
        i += 1;
    }
    flush(&mut cur, out);
}

/// Tokenizes with the bundled lemma table.
pub fn tokenize(text: &str) -> Vec<Token> {
    Lemmatizer::standard().tokenize(text)
}

/// Joins token strings back into text: `. , ! ? : ; )` attach to the
/// preceding token, `(` to the following one, everything else is separated
/// by one space (so a dash stays ` - `).
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = false;
    for tok in tokens {
        let t = tok.as_ref();
        let attach = matches!(t, "." | "," | "!" | "?" | ":" | ";" | ")");
        if !out.is_empty() && !attach && !glue_next {
            out.push(' ');
        }
        out.push_str(t);
        glue_next = t == "(";
    }
    out
}

// ---------------------------------------------------------------------------
// Lemmatization
// ---------------------------------------------------------------------------

const BUNDLED_LEMMAS: &str = include_str!("../data/lemmas.tsv");

/// Exception-table lemmatizer followed by suffix-stripping rules.
#[derive(Debug, Clone, Default)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
}

impl Lemmatizer {
    /// Parses `surface<TAB>lemma` lines; `#` starts a comment.
    pub fn parse(tsv: &str) -> Result<Self, TextError> {
        let mut exceptions = HashMap::new();
        for (i, line) in tsv.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, lemma) = line.split_once('\t').ok_or_else(|| TextError::Lemmas {
                line: i + 1,
                reason: "expected surface<TAB>lemma".into(),
            })?;
            exceptions.insert(word.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(Lemmatizer { exceptions })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn standard() -> &'static Lemmatizer {
        static STD: OnceLock<Lemmatizer> = OnceLock::new();
        STD.get_or_init(|| Lemmatizer::parse(BUNDLED_LEMMAS).expect("bundled lemma table parses"))
    }

    pub fn exceptions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.exceptions.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Lowercased base form. Rules are applied until the form stops
    /// changing, so the result is always a fixed point.
    pub fn lemma_stem(&self, word: &str) -> String {
        let mut w = word.to_lowercase();
        // bounded: every rule either shortens the word or hits the table
        for _ in 0..8 {
            let next = self.step(&w);
            if next == w {
                break;
            }
            w = next;
        }
        w
    }

    fn step(&self, w: &str) -> String {
        if let Some(lemma) = self.exceptions.get(w) {
            return lemma.clone();
        }
        if !w.bytes().all(|b| b.is_ascii_lowercase()) {
            return w.to_string();
        }
        strip_suffix(w)
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        split_tokens(text)
            .into_iter()
            .map(|surface| {
                let kind = classify(&surface);
                let base = match kind {
                    TokenKind::Word => self.lemma_stem(&surface),
                    TokenKind::Number => surface.to_lowercase(),
                    _ => surface.clone(),
                };
                Token {
                    surface,
                    base,
                    kind,
                }
            })
            .collect()
    }
}

/// Lemmatizes with the bundled table.
pub fn lemma_stem(word: &str) -> String {
    Lemmatizer::standard().lemma_stem(word)
}

fn is_vowel_at(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => true,
        b'y' => i > 0 && !is_vowel_at(w, i - 1),
        _ => false,
    }
}

fn has_vowel(w: &str) -> bool {
    let b = w.as_bytes();
    (0..b.len()).any(|i| is_vowel_at(b, i))
}

/// Number of vowel-consonant sequences.
fn measure(w: &str) -> usize {
    let b = w.as_bytes();
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..b.len() {
        let v = is_vowel_at(b, i);
        if prev_vowel && !v {
            m += 1;
        }
        prev_vowel = v;
    }
    m
}

/// Ends consonant-vowel-consonant with the last consonant not w, x or y.
fn ends_cvc(w: &str) -> bool {
    let b = w.as_bytes();
    let n = b.len();
    n >= 3
        && !is_vowel_at(b, n - 3)
        && is_vowel_at(b, n - 2)
        && !is_vowel_at(b, n - 1)
        && !matches!(b[n - 1], b'w' | b'x' | b'y')
}

fn tidy_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !is_vowel_at(b, n - 1) && !matches!(b[n - 1], b'l' | b's' | b'z')
    {
        return stem[..n - 1].to_string();
    }
    if measure(stem) == 1 && ends_cvc(stem) {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn strip_suffix(w: &str) -> String {
    let n = w.len();
    if n > 4 && w.ends_with("ies") {
        return format!("{}y", &w[..n - 3]);
    }
    if w.ends_with("sses") {
        return w[..n - 2].to_string();
    }
    if n > 4 && ["ches", "shes", "xes", "zes"].iter().any(|s| w.ends_with(s)) {
        return w[..n - 2].to_string();
    }
    if n >= 4
        && w.ends_with('s')
        && !["ss", "us", "is"].iter().any(|s| w.ends_with(s))
        && has_vowel(&w[..n - 1])
    {
        return w[..n - 1].to_string();
    }
    if n > 4 && w.ends_with("ied") {
        return format!("{}y", &w[..n - 3]);
    }
    if w.ends_with("eed") {
        return w.to_string();
    }
    if n > 4 && w.ends_with("ed") && has_vowel(&w[..n - 2]) {
        return tidy_stem(&w[..n - 2]);
    }
    if n > 5 && w.ends_with("ing") && has_vowel(&w[..n - 3]) {
        return tidy_stem(&w[..n - 3]);
    }
    w.to_string()
}

// ---------------------------------------------------------------------------
// Entities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityLabel {
    ConditionTreatment,
    Org,
    Person,
    Gpe,
    Money,
    Date,
    Cardinal,
}

impl EntityLabel {
    /// In overlap resolution priority order.
    pub const ALL: [EntityLabel; 7] = [
        EntityLabel::ConditionTreatment,
        EntityLabel::Org,
        EntityLabel::Person,
        EntityLabel::Gpe,
        EntityLabel::Money,
        EntityLabel::Date,
        EntityLabel::Cardinal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityLabel::ConditionTreatment => "CONDITION/TREATMENT",
            EntityLabel::Org => "ORG",
            EntityLabel::Person => "PERSON",
            EntityLabel::Gpe => "GPE",
            EntityLabel::Money => "MONEY",
            EntityLabel::Date => "DATE",
            EntityLabel::Cardinal => "CARDINAL",
        }
    }

    pub fn placeholder(self) -> String {
        format!("<{}>", self.as_str())
    }

    fn priority(self) -> usize {
        Self::ALL.iter().position(|&l| l == self).expect("listed")
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim_start_matches('<').trim_end_matches('>');
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown entity label {s:?}"))
    }
}

impl Serialize for EntityLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub label: EntityLabel,
}

impl EntitySpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

const BUNDLED_GAZETTEER: &str = include_str!("../data/gazetteer.txt");

/// Phrase lists for the entity types that need lookup.
///
/// Text format: `[condition_treatment]`, `[org]`, `[person]` and `[gpe]`
/// section headers, one phrase per line, `#` comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    /// Lowercased token sequences per label.
    phrases: BTreeMap<EntityLabel, Vec<Vec<String>>>,
}

impl Gazetteer {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn standard() -> &'static Gazetteer {
        static STD: OnceLock<Gazetteer> = OnceLock::new();
        STD.get_or_init(|| Gazetteer::parse(BUNDLED_GAZETTEER).expect("bundled gazetteer parses"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut g = Gazetteer::default();
        let mut section = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name.trim() {
                    "condition_treatment" => EntityLabel::ConditionTreatment,
                    "org" => EntityLabel::Org,
                    "person" => EntityLabel::Person,
                    "gpe" => EntityLabel::Gpe,
                    other => {
                        return Err(TextError::Gazetteer {
                            line: i + 1,
                            reason: format!("unknown section [{other}]"),
                        })
                    }
                });
                continue;
            }
            let label = section.ok_or_else(|| TextError::Gazetteer {
                line: i + 1,
                reason: "phrase before any section header".into(),
            })?;
            g.insert(label, line);
        }
        Ok(g)
    }

    pub fn insert(&mut self, label: EntityLabel, phrase: &str) {
        let tokens: Vec<String> = split_tokens(&phrase.to_lowercase());
        if tokens.is_empty() {
            return;
        }
        let list = self.phrases.entry(label).or_default();
        if !list.contains(&tokens) {
            list.push(tokens);
        }
    }

    pub fn with(mut self, label: EntityLabel, phrases: &[&str]) -> Self {
        for p in phrases {
            self.insert(label, p);
        }
        self
    }

    pub fn phrases(&self, label: EntityLabel) -> impl Iterator<Item = String> + '_ {
        self.phrases
            .get(&label)
            .into_iter()
            .flatten()
            .map(|t| detokenize(t))
    }

    pub fn len(&self) -> usize {
        self.phrases.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn candidates(&self, lower: &[String], kinds: &[TokenKind], out: &mut Vec<EntitySpan>) {
        for (&label, phrases) in &self.phrases {
            for phrase in phrases {
                let n = phrase.len();
                if n > lower.len() {
                    continue;
                }
                for start in 0..=lower.len() - n {
                    if kinds[start..start + n].contains(&TokenKind::Placeholder) {
                        continue;
                    }
                    if lower[start..start + n] == phrase[..] {
                        out.push(EntitySpan {
                            start,
                            end: start + n,
                            label,
                        });
                    }
                }
            }
        }
    }
}

const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "june", "july", "august", "september", "october",
    "november", "december",
];
const WEEKDAYS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
];
const TIME_UNITS: &[&str] = &[
    "minute", "minutes", "hour", "hours", "day", "days", "week", "weeks", "month", "months", "year",
    "years",
];
const CURRENCY_WORDS: &[&str] = &["dollar", "dollars", "usd", "euro", "euros", "pounds"];

fn is_integer(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_digit() || c == ',')
}

fn is_decimal(s: &str) -> bool {
    let mut parts = s.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    match parts.next() {
        Some(frac) => is_integer(int) && !frac.is_empty() && frac.chars().all(|c| c.is_ascii_digit()),
        None => is_integer(int),
    }
}

fn is_percent(s: &str) -> bool {
    s.strip_suffix('%').is_some_and(is_decimal)
}

fn is_money(s: &str) -> bool {
    let mut chars = s.chars();
    let first = chars.next();
    let last = s.chars().last();
    match (first, last) {
        (Some(f), _) if is_currency(f) => is_decimal(&s[f.len_utf8()..]),
        (_, Some(l)) if is_currency(l) => is_decimal(&s[..s.len() - l.len_utf8()]),
        _ => false,
    }
}

fn is_date_number(s: &str) -> bool {
    if s == "24/7" {
        return true;
    }
    let parts: Vec<&str> = s.split('/').collect();
    if (2..=3).contains(&parts.len())
        && parts
            .iter()
            .all(|p| !p.is_empty() && p.len() <= 4 && p.chars().all(|c| c.is_ascii_digit()))
    {
        return true;
    }
    s.len() == 4
        && s.chars().all(|c| c.is_ascii_digit())
        && s.parse::<u32>().is_ok_and(|y| (1900..=2099).contains(&y))
}

fn rule_candidates(tokens: &[Token], out: &mut Vec<EntitySpan>) {
    let span = |start: usize, len: usize, label| EntitySpan {
        start,
        end: start + len,
        label,
    };
    for (i, tok) in tokens.iter().enumerate() {
        let s = tok.surface.as_str();
        let lower = s.to_lowercase();
        let next = tokens.get(i + 1).map(|t| t.surface.to_lowercase());
        match tok.kind {
            TokenKind::Number => {
                if is_money(s) {
                    out.push(span(i, 1, EntityLabel::Money));
                }
                if is_date_number(s) {
                    out.push(span(i, 1, EntityLabel::Date));
                }
                if is_decimal(s) || is_percent(s) {
                    out.push(span(i, 1, EntityLabel::Cardinal));
                }
                if is_decimal(s) {
                    match next.as_deref() {
                        Some("percent") => out.push(span(i, 2, EntityLabel::Cardinal)),
                        Some(w) if TIME_UNITS.contains(&w) => out.push(span(i, 2, EntityLabel::Date)),
                        Some(w) if CURRENCY_WORDS.contains(&w) => {
                            out.push(span(i, 2, EntityLabel::Money))
                        }
                        _ => {}
                    }
                }
            }
            TokenKind::Word if MONTHS.contains(&lower.as_str()) || WEEKDAYS.contains(&lower.as_str()) => {
                out.push(span(i, 1, EntityLabel::Date));
            }
            _ => {}
        }
    }
}

/// Finds non-overlapping entity spans, sorted by start.
///
/// Candidates come from the gazetteer (case-insensitive phrase match) and
/// from surface rules for numbers, amounts and dates. Overlaps go to the
/// longer span, then the earlier one, then the higher-priority label.
pub fn recognize_entities(tokens: &[Token], gazetteer: &Gazetteer) -> Vec<EntitySpan> {
    let lower: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    let kinds: Vec<TokenKind> = tokens.iter().map(|t| t.kind).collect();
    let mut candidates = Vec::new();
    gazetteer.candidates(&lower, &kinds, &mut candidates);
    rule_candidates(tokens, &mut candidates);
    candidates.sort_by_key(|s| (std::cmp::Reverse(s.len()), s.start, s.label.priority()));

    let mut chosen: Vec<EntitySpan> = Vec::new();
    for c in candidates {
        if !chosen.iter().any(|s| s.overlaps(&c)) {
            chosen.push(c);
        }
    }
    chosen.sort_by_key(|s| s.start);
    chosen
}

// ---------------------------------------------------------------------------
// Normalization and realization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedAd {
    pub text: String,
    /// (placeholder label, original surface) in text order.
    pub substitutions: Vec<(String, String)>,
    pub source_id: String,
}

impl NormalizedAd {
    pub fn placeholder_count(&self) -> usize {
        placeholder_re().find_iter(&self.text).count()
    }
}

/// Gazetteer and lemma table bundled together.
#[derive(Debug, Clone)]
pub struct Normalizer {
    pub gazetteer: Gazetteer,
    pub lemmatizer: Lemmatizer,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer {
            gazetteer: Gazetteer::standard().clone(),
            lemmatizer: Lemmatizer::standard().clone(),
        }
    }
}

impl Normalizer {
    pub fn new(gazetteer: Gazetteer, lemmatizer: Lemmatizer) -> Self {
        Normalizer {
            gazetteer,
            lemmatizer,
        }
    }

    pub fn normalize(&self, ad: &Ad) -> Result<NormalizedAd, TextError> {
        let text = concat_text(ad).map_err(|_| TextError::EmptyAd(ad.id.clone()))?;
        self.normalize_text(&text, &ad.id)
    }

    /// Tokenize, mask entities, lemmatize, lowercase and re-join.
    pub fn normalize_text(&self, text: &str, source_id: &str) -> Result<NormalizedAd, TextError> {
        let tokens = self.lemmatizer.tokenize(text);
        if tokens.iter().all(|t| t.kind == TokenKind::Punct) {
            return Err(TextError::EmptyAd(source_id.to_string()));
        }
        let spans = recognize_entities(&tokens, &self.gazetteer);

        let mut out: Vec<String> = Vec::with_capacity(tokens.len());
        let mut substitutions = Vec::new();
        let mut spans = spans.into_iter().peekable();
        let mut i = 0;
        while i < tokens.len() {
            if let Some(span) = spans.next_if(|s| s.start == i) {
                let surface: Vec<&str> = tokens[span.start..span.end]
                    .iter()
                    .map(|t| t.surface.as_str())
                    .collect();
                substitutions.push((span.label.as_str().to_string(), detokenize(&surface)));
                out.push(span.label.placeholder());
                i = span.end;
                continue;
            }
            let tok = &tokens[i];
            match tok.kind {
                TokenKind::Placeholder => {
                    let label = tok.surface.trim_matches(['<', '>']).to_string();
                    substitutions.push((label, tok.surface.clone()));
                    out.push(tok.surface.clone());
                }
                TokenKind::Word => out.push(tok.base.clone()),
                _ => out.push(tok.surface.to_lowercase()),
            }
            i += 1;
        }
        Ok(NormalizedAd {
            text: detokenize(&out),
            substitutions,
            source_id: source_id.to_string(),
        })
    }
}

/// Normalizes an ad's concatenated text with the bundled lemma table.
pub fn normalize(ad: &Ad, gazetteer: &Gazetteer) -> Result<NormalizedAd, TextError> {
    Normalizer::new(gazetteer.clone(), Lemmatizer::standard().clone()).normalize(ad)
}

/// Fallback surfaces per placeholder label, e.g. `{"CARDINAL": "10"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Defaults(pub BTreeMap<String, String>);

impl Default for Defaults {
    fn default() -> Self {
        Defaults(BTreeMap::from([("CARDINAL".to_string(), "10".to_string())]))
    }
}

impl Defaults {
    pub fn empty() -> Self {
        Defaults(BTreeMap::new())
    }

    /// Most common surface per label over a set of substitutions (ties go
    /// to the lexicographically smaller surface).
    pub fn most_common<'a>(subs: impl IntoIterator<Item = &'a (String, String)>) -> Self {
        let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for (label, surface) in subs {
            *counts.entry(label).or_default().entry(surface).or_default() += 1;
        }
        Defaults(
            counts
                .into_iter()
                .filter_map(|(label, surfaces)| {
                    let best = surfaces
                        .into_iter()
                        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))?;
                    Some((label.to_string(), best.0.to_string()))
                })
                .collect(),
        )
    }

    pub fn get(&self, label: &str) -> Option<&str> {
        self.0.get(label).map(String::as_str)
    }

    /// Adds entries from `other` where this map has none.
    pub fn or(mut self, other: &Defaults) -> Self {
        for (k, v) in &other.0 {
            self.0.entry(k.clone()).or_insert_with(|| v.clone());
        }
        self
    }
}

/// Labels of the placeholders present in a text, in order.
pub fn placeholders(text: &str) -> Vec<String> {
    placeholder_re()
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .collect()
}

/// Fills placeholders: explicit `fills` per label first, then the recorded
/// substitutions of that label in order, then `defaults`. Unfilled
/// placeholders are left in place when `strict` is false.
fn fill(
    text: &str,
    fills: &BTreeMap<String, String>,
    substitutions: &[(String, String)],
    defaults: &Defaults,
    strict: bool,
) -> Result<String, TextError> {
    let mut queues: HashMap<&str, std::collections::VecDeque<&str>> = HashMap::new();
    for (label, surface) in substitutions {
        queues.entry(label.as_str()).or_default().push_back(surface);
    }
    let mut missing = None;
    let filled = placeholder_re().replace_all(text, |caps: &regex::Captures| {
        let label = &caps[1];
        if let Some(f) = fills.get(label) {
            return f.clone();
        }
        if let Some(s) = queues.get_mut(label).and_then(|q| q.pop_front()) {
            return s.to_string();
        }
        if let Some(d) = defaults.get(label) {
            return d.to_string();
        }
        if missing.is_none() {
            missing = Some(label.to_string());
        }
        caps[0].to_string()
    });
    match missing {
        Some(label) if strict => Err(TextError::MissingDefault(label)),
        _ => Ok(capitalize_sentences(&filled)),
    }
}

/// Normalized text back to surface copy: placeholders are filled from the
/// substitutions (per label, in order), leftovers from `defaults`, then
/// sentence-initial letters are capitalized.
pub fn realize(
    text: &str,
    substitutions: &[(String, String)],
    defaults: &Defaults,
) -> Result<String, TextError> {
    fill(text, &BTreeMap::new(), substitutions, defaults, true)
}

/// Like [`realize`], with caller-provided fills taking precedence. Keys may
/// be given as `CARDINAL` or `<CARDINAL>`.
pub fn realize_with_fills(
    text: &str,
    fills: &BTreeMap<String, String>,
    substitutions: &[(String, String)],
    defaults: &Defaults,
) -> Result<String, TextError> {
    let fills: BTreeMap<String, String> = fills
        .iter()
        .map(|(k, v)| (k.trim_matches(['<', '>']).to_string(), v.clone()))
        .collect();
    fill(text, &fills, substitutions, defaults, true)
}

/// Like [`realize`] but leaves placeholders without a default untouched.
pub fn realize_lenient(text: &str, substitutions: &[(String, String)], defaults: &Defaults) -> String {
    fill(text, &BTreeMap::new(), substitutions, defaults, false).expect("lenient fill never fails")
}
