//! Rule-based sentence splitting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::Span;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../assets/abbreviations.txt");

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub paragraph_id: String,
    pub span: Span,
    pub text: String,
}

/// Tokens such as `e.g.` or `et al.` whose period never ends a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abbreviations {
    // lowercased chars of each entry, period included
    entries: Vec<Vec<char>>,
}

impl Default for Abbreviations {
    fn default() -> Self {
        Self::parse(DEFAULT_ABBREVIATIONS)
    }
}

impl Abbreviations {
    /// One entry per line; blank lines and `#` comments are skipped.
    pub fn parse(list: &str) -> Self {
        let entries = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase().chars().collect())
            .collect();
        Self { entries }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether the period at `chars[dot]` closes a listed abbreviation.
    fn ends_at(&self, chars: &[char], dot: usize) -> bool {
        self.entries.iter().any(|entry| {
            let n = entry.len();
            if n == 0 || n > dot + 1 {
                return false;
            }
            let start = dot + 1 - n;
            let matches = chars[start..=dot]
                .iter()
                .zip(entry)
                .all(|(c, e)| c.to_lowercase().eq(std::iter::once(*e)));
            matches && (start == 0 || !chars[start - 1].is_alphanumeric())
        })
    }
}

/// Splits `text` into sentences covering every non-whitespace character.
///
/// A boundary is a `.`, `!` or `?` (plus any closing quotes or brackets) that
/// is followed by whitespace and then an uppercase letter or digit, possibly
/// behind an opening quote or bracket. Periods of listed abbreviations and
/// periods between two digits never split. Semicolons never split.
pub fn segment_sentences(paragraph_id: &str, text: &str, abbreviations: &Abbreviations) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if start.is_none() {
            if !c.is_whitespace() {
                start = Some(i);
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
        }
        if matches!(c, '.' | '!' | '?') && is_boundary(&chars, i, abbreviations) {
            let mut end = i + 1;
            while end < n && CLOSERS.contains(&chars[end]) {
                end += 1;
            }
            spans.push(Span::new(start.take().expect("sentence open"), end));
            i = end;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let end = chars.iter().rposition(|c| !c.is_whitespace()).map_or(n, |p| p + 1);
        spans.push(Span::new(s, end));
    }
    spans
        .into_iter()
        .enumerate()
        .map(|(k, span)| Sentence {
            id: format!("{paragraph_id}.s{k}"),
            paragraph_id: paragraph_id.to_string(),
            span,
            text: chars[span.start..span.end].iter().collect(),
        })
        .collect()
}

fn is_boundary(chars: &[char], i: usize, abbreviations: &Abbreviations) -> bool {
    let n = chars.len();
    if chars[i] == '.' {
        let digit_before = i > 0 && chars[i - 1].is_ascii_digit();
        let digit_after = i + 1 < n && chars[i + 1].is_ascii_digit();
        if digit_before && digit_after {
            return false;
        }
        if abbreviations.ends_at(chars, i) {
            return false;
        }
    }
    let mut j = i + 1;
    while j < n && CLOSERS.contains(&chars[j]) {
        j += 1;
    }
    if j < n && !chars[j].is_whitespace() {
        return false;
    }
    while j < n && chars[j].is_whitespace() {
        j += 1;
    }
    if j == n {
        return true;
    }
    while j < n && OPENERS.contains(&chars[j]) {
        j += 1;
    }
    j < n && (chars[j].is_uppercase() || chars[j].is_ascii_digit())
}
