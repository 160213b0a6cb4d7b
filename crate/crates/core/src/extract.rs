//! Main-content extraction from HTML landing pages.
//!
//! A small, lenient HTML parser builds a [`DomNode`] tree, then every element
//! that is the parent of at least one `<p>` is scored against two lists of
//! attribute substrings: each matching positive entry adds one point, each
//! matching negative entry subtracts two. The page title plus the text of the
//! two best-scoring parents form the extracted content.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_whitespace;

pub const ROOT_TAG: &str = "#document";
pub const TEXT_TAG: &str = "#text";
/// Character data inside `<script>`/`<style>`; kept in the tree, never rendered.
pub const RAW_TEXT_TAG: &str = "#data";

pub const POSITIVE_POINTS: i32 = 1;
pub const NEGATIVE_POINTS: i32 = -2;
pub const DEFAULT_MIN_PARENT_CHARS: usize = 25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("document contains no elements")]
    EmptyDocument,
    #[error("attribute entry {0:?} is both positive and negative")]
    OverlappingAttributes(String),
    #[error("attribute lists are empty")]
    EmptyAttributeLists,
}

/// One node of the parsed document.
///
/// Elements carry a lowercase `tag` and attributes; text nodes use the tag
/// [`TEXT_TAG`] (or [`RAW_TEXT_TAG`] under script/style) and store their
/// character data in `text`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DomNode {
    pub tag: String,
    pub attrs: BTreeMap<String, String>,
    pub children: Vec<DomNode>,
    pub text: String,
}

impl DomNode {
    fn element(tag: &str, attrs: BTreeMap<String, String>) -> Self {
        DomNode {
            tag: tag.to_string(),
            attrs,
            ..Default::default()
        }
    }

    fn text_node(tag: &str, text: String) -> Self {
        DomNode {
            tag: tag.to_string(),
            text,
            ..Default::default()
        }
    }

    pub fn is_element(&self) -> bool {
        !self.tag.starts_with('#')
    }

    /// Attribute lookup; names are matched case-insensitively.
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .get(&name.to_ascii_lowercase())
            .map(String::as_str)
    }

    /// Child elements, skipping text nodes.
    pub fn child_elements(&self) -> impl Iterator<Item = &DomNode> {
        self.children.iter().filter(|c| c.is_element())
    }

    /// Visible text of this subtree with whitespace collapsed.
    pub fn text_content(&self) -> String {
        let mut buf = String::new();
        self.collect_text(&mut buf);
        normalize_whitespace(&buf)
    }

    fn collect_text(&self, buf: &mut String) {
        match self.tag.as_str() {
            TEXT_TAG => {
                buf.push_str(&self.text);
                buf.push(' ');
            }
            RAW_TEXT_TAG | "script" | "style" | "noscript" | "template" => {}
            _ => {
                if matches!(self.tag.as_str(), "br" | "hr") {
                    buf.push(' ');
                }
                for c in &self.children {
                    c.collect_text(buf);
                }
            }
        }
    }

    /// First element in document order with the given tag.
    pub fn find_first(&self, tag: &str) -> Option<&DomNode> {
        if self.tag == tag {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find_first(tag))
    }

    /// Follows a child-index path from this node.
    pub fn at_path(&self, path: &[usize]) -> Option<&DomNode> {
        path.iter()
            .try_fold(self, |node, &i| node.children.get(i))
    }

    /// Short CSS-like description: `tag#id.class1.class2`.
    pub fn selector(&self) -> String {
        let mut s = self.tag.clone();
        if let Some(id) = self.attr("id").filter(|v| !v.trim().is_empty()) {
            s.push('#');
            s.push_str(id.trim());
        }
        if let Some(class) = self.attr("class") {
            for c in class.split_whitespace() {
                s.push('.');
                s.push_str(c);
            }
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

/// Elements that may sit between an open `<p>` and a new block without
/// preventing the implicit close of that `<p>`.
const PHRASING_TAGS: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "em", "font", "i", "kbd", "label", "mark", "q",
    "s", "samp", "small", "span", "strong", "sub", "sup", "time", "u", "var",
];

const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset", "figcaption",
    "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "menu",
    "nav", "ol", "p", "pre", "section", "table", "ul",
];

/// Parses a byte buffer, replacing invalid UTF-8 sequences.
pub fn parse_html_bytes(raw: &[u8]) -> Result<DomNode, ExtractError> {
    parse_html(&String::from_utf8_lossy(raw))
}

/// Parses HTML leniently: unclosed tags are closed implicitly, stray end tags
/// are ignored and unknown tags are kept as ordinary elements.
pub fn parse_html(raw: &str) -> Result<DomNode, ExtractError> {
    let mut parser = Parser {
        src: raw,
        pos: 0,
        stack: vec![DomNode::element(ROOT_TAG, BTreeMap::new())],
        text: String::new(),
        saw_element: false,
    };
    parser.run();
    if !parser.saw_element {
        return Err(ExtractError::EmptyDocument);
    }
    Ok(parser.finish())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    stack: Vec<DomNode>,
    text: String,
    saw_element: bool,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn run(&mut self) {
        while self.pos < self.src.len() {
            let rest = self.rest();
            let Some(lt) = rest.find('<') else {
                self.text.push_str(rest);
                self.pos = self.src.len();
                break;
            };
            self.text.push_str(&rest[..lt]);
            self.pos += lt;
            self.markup();
        }
        self.flush_text();
    }

    fn markup(&mut self) {
        let rest = self.rest();
        if let Some(body) = rest.strip_prefix("<!--") {
            self.pos += 4 + body.find("-->").map_or(body.len(), |i| i + 3);
            return;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            self.pos += rest.find('>').map_or(rest.len(), |i| i + 1);
            return;
        }
        let bytes = rest.as_bytes();
        if bytes.len() > 2 && bytes[1] == b'/' && bytes[2].is_ascii_alphabetic() {
            let end = rest.find('>').map_or(rest.len(), |i| i + 1);
            let name = tag_name(&rest[2..end]);
            self.pos += end;
            self.flush_text();
            self.close(&name);
            return;
        }
        if bytes.len() > 1 && bytes[1].is_ascii_alphabetic() {
            let end = find_tag_end(rest);
            let inner = rest[1..end].trim_end_matches('>');
            self.pos += end;
            self.flush_text();
            self.open(inner);
            return;
        }
        // a literal '<'
        self.text.push('<');
        self.pos += 1;
    }

    fn open(&mut self, inner: &str) {
        let self_closing = inner.trim_end().ends_with('/');
        let inner = inner.trim_end().trim_end_matches('/');
        let name = tag_name(inner);
        let attrs = parse_attrs(&inner[name.len().min(inner.len())..]);
        self.saw_element = true;
        self.implicit_close(&name);

        if RAW_TEXT_ELEMENTS.contains(&name.as_str()) && !self_closing {
            let mut node = DomNode::element(&name, attrs);
            let rest = self.rest();
            let close = find_ci(rest, &format!("</{name}")).unwrap_or(rest.len());
            if close > 0 {
                node.children
                    .push(DomNode::text_node(RAW_TEXT_TAG, rest[..close].to_string()));
            }
            self.pos += close;
            let rest = self.rest();
            self.pos += rest.find('>').map_or(rest.len(), |i| i + 1);
            self.top().children.push(node);
            return;
        }

        let node = DomNode::element(&name, attrs);
        if self_closing || VOID_TAGS.contains(&name.as_str()) {
            self.top().children.push(node);
        } else {
            self.stack.push(node);
        }
    }

    fn implicit_close(&mut self, name: &str) {
        if CLOSES_P.contains(&name) {
            // close an open <p> reachable through phrasing elements only
            for i in (1..self.stack.len()).rev() {
                let tag = self.stack[i].tag.as_str();
                if tag == "p" {
                    self.pop_to(i);
                    break;
                }
                if !PHRASING_TAGS.contains(&tag) {
                    break;
                }
            }
        }
        let siblings: &[&str] = match name {
            "li" => &["li"],
            "dt" | "dd" => &["dt", "dd"],
            "tr" => &["tr", "td", "th"],
            "td" | "th" => &["td", "th"],
            "option" => &["option"],
            _ => &[],
        };
        if !siblings.is_empty() {
            let boundary: &[&str] = match name {
                "li" => &["ul", "ol", "menu"],
                "dt" | "dd" => &["dl"],
                "option" => &["select", "datalist"],
                _ => &["table", "tbody", "thead", "tfoot"],
            };
            for i in (1..self.stack.len()).rev() {
                let tag = self.stack[i].tag.as_str();
                if siblings.contains(&tag) {
                    self.pop_to(i);
                    break;
                }
                if boundary.contains(&tag) {
                    break;
                }
            }
        }
    }

    fn close(&mut self, name: &str) {
        if let Some(i) = (1..self.stack.len()).rev().find(|&i| self.stack[i].tag == name) {
            self.pop_to(i);
        }
    }

    /// Pops every open element down to and including `stack[index]`.
    fn pop_to(&mut self, index: usize) {
        while self.stack.len() > index {
            let node = self.stack.pop().expect("stack non-empty");
            self.top().children.push(node);
        }
    }

    fn top(&mut self) -> &mut DomNode {
        self.stack.last_mut().expect("root is never popped")
    }

    fn flush_text(&mut self) {
        if self.text.is_empty() {
            return;
        }
        let decoded = decode_entities(&std::mem::take(&mut self.text));
        let top = self.top();
        match top.children.last_mut() {
            Some(last) if last.tag == TEXT_TAG => last.text.push_str(&decoded),
            _ => top.children.push(DomNode::text_node(TEXT_TAG, decoded)),
        }
    }

    fn finish(mut self) -> DomNode {
        self.pop_to(1);
        self.stack.pop().expect("root")
    }
}

fn tag_name(s: &str) -> String {
    s.chars()
        .take_while(|c| !c.is_whitespace() && *c != '>' && *c != '/')
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Byte offset just past the `>` closing a start tag, honouring quotes.
fn find_tag_end(s: &str) -> usize {
    let mut quote = None;
    for (i, c) in s.char_indices().skip(1) {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '>') => return i + 1,
            _ => {}
        }
    }
    s.len()
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let lower = haystack.to_ascii_lowercase();
    lower.find(&needle.to_ascii_lowercase())
}

fn parse_attrs(s: &str) -> BTreeMap<String, String> {
    let mut attrs = BTreeMap::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && (chars[i].is_whitespace() || chars[i] == '/') {
            i += 1;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '=' && chars[i] != '/' {
            i += 1;
        }
        if start == i {
            i += 1;
            continue;
        }
        let name: String = chars[start..i].iter().collect::<String>().to_ascii_lowercase();
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < chars.len() && chars[i] == '=' {
            i += 1;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if i < chars.len() && (chars[i] == '"' || chars[i] == '\'') {
                let q = chars[i];
                i += 1;
                while i < chars.len() && chars[i] != q {
                    value.push(chars[i]);
                    i += 1;
                }
                i += 1;
            } else {
                while i < chars.len() && !chars[i].is_whitespace() {
                    value.push(chars[i]);
                    i += 1;
                }
            }
        }
        attrs.entry(name).or_insert_with(|| decode_entities(&value));
    }
    attrs
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let semi = rest[..rest.len().min(12)].find(';');
        let decoded = semi.and_then(|end| decode_entity(&rest[1..end]).map(|c| (c, end)));
        match decoded {
            Some((c, end)) => {
                out.push(c);
                rest = &rest[end + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "mdash" => '\u{2014}',
        "ndash" => '\u{2013}',
        "lsquo" => '\u{2018}',
        "rsquo" => '\u{2019}',
        "ldquo" => '\u{201c}',
        "rdquo" => '\u{201d}',
        "hellip" => '\u{2026}',
        "copy" => '\u{a9}',
        "reg" => '\u{ae}',
        "trade" => '\u{2122}',
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Positive and negative `id`/`class` substrings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeLists {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

impl AttributeLists {
    pub fn new<I, J, S, T>(positive: I, negative: J) -> Result<Self, ExtractError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let clean = |s: &str| s.trim().to_lowercase();
        let positive: BTreeSet<String> = positive
            .into_iter()
            .map(|s| clean(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        let negative: BTreeSet<String> = negative
            .into_iter()
            .map(|s| clean(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        if positive.is_empty() && negative.is_empty() {
            return Err(ExtractError::EmptyAttributeLists);
        }
        if let Some(dup) = positive.intersection(&negative).next() {
            return Err(ExtractError::OverlappingAttributes(dup.clone()));
        }
        Ok(AttributeLists { positive, negative })
    }

    pub fn positive(&self) -> impl Iterator<Item = &str> {
        self.positive.iter().map(String::as_str)
    }

    pub fn negative(&self) -> impl Iterator<Item = &str> {
        self.negative.iter().map(String::as_str)
    }

    /// Points for one element: +1 per positive entry and -2 per negative
    /// entry contained in its `id` or `class` value. An entry matching both
    /// attributes still counts once.
    pub fn points_for(&self, node: &DomNode) -> i32 {
        let values: Vec<String> = ["id", "class"]
            .iter()
            .filter_map(|a| node.attr(a))
            .map(str::to_lowercase)
            .collect();
        let hits = |set: &BTreeSet<String>| {
            set.iter()
                .filter(|entry| values.iter().any(|v| v.contains(entry.as_str())))
                .count() as i32
        };
        hits(&self.positive) * POSITIVE_POINTS + hits(&self.negative) * NEGATIVE_POINTS
    }
}

impl Default for AttributeLists {
    fn default() -> Self {
        AttributeLists::new(
            [
                "content",
                "text",
                "title",
                "body",
                "article",
                "page",
                "description",
            ],
            ["footer", "copyright", "location", "style", "comment", "meta"],
        )
        .expect("default lists are disjoint")
    }
}

impl<'de> Deserialize<'de> for AttributeLists {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            positive: Vec<String>,
            negative: Vec<String>,
        }
        let raw = Raw::deserialize(d)?;
        AttributeLists::new(raw.positive, raw.negative).map_err(serde::de::Error::custom)
    }
}

/// Extraction settings, loadable from
/// `{ "positive": [...], "negative": [...], "min_parent_chars": 25 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    #[serde(flatten)]
    pub lists: AttributeLists,
    #[serde(default = "default_min_chars")]
    pub min_parent_chars: usize,
}

fn default_min_chars() -> usize {
    DEFAULT_MIN_PARENT_CHARS
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            lists: AttributeLists::default(),
            min_parent_chars: DEFAULT_MIN_PARENT_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentScore {
    pub selector: String,
    pub points: i32,
    /// Position at which the parent was first reached while walking the
    /// document's `<p>` elements.
    #[serde(skip)]
    pub order: usize,
    /// Child-index path from the root to the parent.
    #[serde(skip)]
    pub path: Vec<usize>,
}

/// Scores every distinct parent of a `<p>` element, in first-visit order.
pub fn score_parents(root: &DomNode, lists: &AttributeLists) -> Vec<ParentScore> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    visit_parents(root, &mut path, &mut |node, path| {
        if out.iter().any(|s: &ParentScore| s.path == path) {
            return;
        }
        out.push(ParentScore {
            selector: node.selector(),
            points: lists.points_for(node),
            order: out.len(),
            path: path.to_vec(),
        });
    });
    out
}

fn visit_parents<'a>(
    node: &'a DomNode,
    path: &mut Vec<usize>,
    f: &mut impl FnMut(&'a DomNode, &[usize]),
) {
    for (i, child) in node.children.iter().enumerate() {
        if child.tag == "p" {
            f(node, path);
        }
        if child.is_element() {
            path.push(i);
            visit_parents(child, path, f);
            path.pop();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractedContent {
    pub title: String,
    pub blocks: Vec<String>,
    #[serde(rename = "scores")]
    pub source_scores: Vec<ParentScore>,
}

impl ExtractedContent {
    /// Title and blocks as one paragraph, the generator's input text.
    pub fn as_paragraph(&self) -> String {
        let parts = std::iter::once(self.title.as_str()).chain(self.blocks.iter().map(String::as_str));
        crate::text::join_sentences(parts)
    }

    pub fn is_empty(&self) -> bool {
        self.title.is_empty() && self.blocks.is_empty()
    }
}

/// Title plus the text of the two highest-scoring `<p>` parents.
///
/// Ties go to the parent reached first. Parents whose visible text is shorter
/// than `min_parent_chars` characters are skipped.
pub fn extract_content(root: &DomNode, config: &ExtractConfig) -> ExtractedContent {
    let title = ["title", "h1"]
        .iter()
        .filter_map(|t| root.find_first(t))
        .map(DomNode::text_content)
        .find(|t| !t.is_empty())
        .unwrap_or_default();

    let scores = score_parents(root, &config.lists);
    let mut ranked: Vec<&ParentScore> = scores.iter().collect();
    ranked.sort_by(|a, b| b.points.cmp(&a.points).then(a.order.cmp(&b.order)));

    let blocks = ranked
        .into_iter()
        .filter_map(|s| {
            let parent = root.at_path(&s.path)?;
            if parent.text_content().chars().count() < config.min_parent_chars {
                return None;
            }
            let text = parent
                .child_elements()
                .filter(|c| c.tag == "p")
                .map(DomNode::text_content)
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            (!text.is_empty()).then_some(text)
        })
        .take(2)
        .collect();

    ExtractedContent {
        title,
        blocks,
        source_scores: scores,
    }
}
