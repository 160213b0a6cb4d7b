//! Small string helpers shared across modules.

/// Collapses whitespace runs to a single space and trims both ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Joins text fragments into one paragraph, inserting ". " between
/// fragments unless the previous one already ends a sentence.
/// Empty fragments are skipped.
pub fn join_sentences<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for part in parts {
        let part = normalize_whitespace(part);
        if part.is_empty() {
            continue;
        }
        if !out.is_empty() {
            if !out.ends_with(['.', '!', '?']) {
                out.push('.');
            }
            out.push(' ');
        }
        out.push_str(&part);
    }
    out
}

/// Upper-cases the first letter of the text and of every sentence that
/// follows `.`, `!` or `?` plus whitespace.
pub fn capitalize_sentences(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut at_start = true;
    let mut after_terminal = false;
    for c in s.chars() {
        if at_start && c.is_alphabetic() {
            out.extend(c.to_uppercase());
            at_start = false;
            after_terminal = false;
            continue;
        }
        if c.is_alphanumeric() {
            at_start = false;
        }
        if matches!(c, '.' | '!' | '?') {
            after_terminal = true;
        } else if c.is_whitespace() {
            if after_terminal {
                at_start = true;
            }
        } else if !at_start {
            after_terminal = false;
        }
        out.push(c);
    }
    out
}
