use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::{validate_mention_spans, Candidate, Mention, MentionSource, MentionType};
use crate::document::Table;
use crate::pairing::find_table_references;
use crate::quantity::scan_numbers;
use crate::segment::Sentence;
use crate::text::{CharMap, Span};

const DEFAULT_CUES: &str = include_str!("../../assets/cues.txt");

const EDGE_PUNCT: &[char] = &[
    ',', ';', ':', '.', '!', '?', '(', ')', '[', ']', '"', '\'', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}',
];

static STRUCTURAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        \b(?:the\s+)?
        (?:
            (?:first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|last)
            (?:\s+(?:two|three|four|five|2|3|4|5))?
            \s+(?:rows?|columns?)
          | (?:row|column)\s+\d+
        )\b",
    )
    .expect("static regex")
});

// Numbers that label other document parts rather than quantities.
static OTHER_REFERENCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?:\b(?:fig(?:ure)?s?|sec(?:tion|t)?s?|eq(?:uation)?s?|appendix|ref|line|step)\.?|§)\s*\(?\d+(?:\.\d+)*[a-z]?\)?",
    )
    .expect("static regex")
});

/// Comparison phrases such as "improves by" or "outperforms".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueLexicon {
    cues: Vec<Vec<String>>,
}

impl Default for CueLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_CUES)
    }
}

impl CueLexicon {
    pub fn parse(list: &str) -> Self {
        let cues = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(str::to_lowercase).collect())
            .collect();
        Self { cues }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Token {
    span: Span,
    lower: String,
}

fn tokenize(text: &str) -> Vec<Token> {
    let map = CharMap::new(text);
    let mut out = Vec::new();
    let mut byte = 0;
    for piece in text.split_whitespace() {
        let at = byte + text[byte..].find(piece).expect("piece from same text");
        byte = at + piece.len();
        let core = piece.trim_matches(EDGE_PUNCT);
        if core.is_empty() {
            continue;
        }
        let lead = piece.len() - piece.trim_start_matches(EDGE_PUNCT).len();
        let start = at + lead;
        out.push(Token { span: map.span_from_bytes(start, start + core.len()), lower: core.to_lowercase() });
    }
    out
}

/// Normalized token set used for entity matching: lowercase, surrounding
/// punctuation stripped, trailing plural `s` removed, sorted and deduplicated.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let mut toks: Vec<String> = text
        .split_whitespace()
        .map(|t| t.trim_matches(EDGE_PUNCT).to_lowercase())
        .filter(|t| !t.is_empty())
        .map(|t| {
            if t.chars().count() >= 4 && t.ends_with('s') {
                t[..t.len() - 1].to_string()
            } else {
                t
            }
        })
        .collect();
    toks.sort();
    toks.dedup();
    toks
}

/// Rule-based mention detector.
#[derive(Debug, Clone)]
pub struct Detector {
    pub cues: CueLexicon,
    /// Longest n-gram tried for entity matches.
    pub max_ngram: usize,
    /// Maximum token distance between a cue and a derived value.
    pub cue_window: usize,
}

impl Default for Detector {
    fn default() -> Self {
        Self { cues: CueLexicon::default(), max_ngram: 6, cue_window: 4 }
    }
}

impl Detector {
    /// Detects named entities, raw and derived values, and structural phrases.
    ///
    /// Entity matches are greedy longest-first n-grams against header, stub
    /// and spanning-label cells. Numbers within `cue_window` tokens after a
    /// cue, or carrying an explicit sign, are derived values; other numbers
    /// are raw values. Numbers inside entity or structural matches, inside
    /// hyphenated names such as `GPT-3`, and after `Table`/`Fig.`/`Section`
    /// labels are skipped.
    pub fn detect(&self, sentence: &Sentence, table: &Table) -> Vec<Mention> {
        let text = &sentence.text;
        let map = CharMap::new(text);
        let chars: Vec<char> = text.chars().collect();
        let mut candidates = Vec::new();
        let mut taken: Vec<Span> = Vec::new();

        for m in STRUCTURAL.find_iter(text) {
            let span = map.span_from_bytes(m.start(), m.end());
            candidates.push(Candidate::new(m.as_str(), Some(span), MentionType::Structural));
            taken.push(span);
        }

        let tokens = tokenize(text);
        let vocabulary = entity_vocabulary(table);
        let mut i = 0;
        while i < tokens.len() {
            let longest = self.max_ngram.min(tokens.len() - i);
            let hit = (1..=longest).rev().find_map(|len| {
                let span = Span::new(tokens[i].span.start, tokens[i + len - 1].span.end);
                if taken.iter().any(|t| t.overlaps(&span)) {
                    return None;
                }
                let surface: String = chars[span.start..span.end].iter().collect();
                vocabulary.contains(&normalize_tokens(&surface)).then_some((len, span, surface))
            });
            match hit {
                Some((len, span, surface)) => {
                    candidates.push(Candidate::new(surface, Some(span), MentionType::NamedEntity));
                    taken.push(span);
                    i += len;
                }
                None => i += 1,
            }
        }

        let mut excluded: Vec<Span> = find_table_references(text).into_iter().map(|r| r.span).collect();
        excluded.extend(OTHER_REFERENCE.find_iter(text).map(|m| map.span_from_bytes(m.start(), m.end())));
        let cue_ends = self.cue_positions(&tokens);

        for tok in scan_numbers(text) {
            let span = map.span_from_bytes(tok.range.start, tok.range.end);
            if taken.iter().chain(&excluded).any(|t| t.overlaps(&span)) || inside_word(&chars, span, tok.value.signed) {
                continue;
            }
            let idx = tokens.iter().position(|t| t.span.overlaps(&span));
            let after_cue = idx.is_some_and(|t| cue_ends.iter().any(|&e| t > e && t - e <= self.cue_window));
            let mtype = if tok.value.signed || after_cue { MentionType::DerivedValue } else { MentionType::RawValue };
            let surface: String = chars[span.start..span.end].iter().collect();
            candidates.push(Candidate::new(surface, Some(span), mtype));
        }

        validate_mention_spans(sentence, &candidates, MentionSource::Deterministic)
    }

    /// Token index of the last word of each cue occurrence.
    fn cue_positions(&self, tokens: &[Token]) -> Vec<usize> {
        let mut ends = Vec::new();
        for cue in &self.cues.cues {
            if cue.is_empty() || cue.len() > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - cue.len() {
                if cue.iter().enumerate().all(|(k, w)| tokens[start + k].lower == *w) {
                    ends.push(start + cue.len() - 1);
                }
            }
        }
        ends.sort_unstable();
        ends.dedup();
        ends
    }
}

/// True for digits glued to a word: `T5`, `GPT-3`, `1-2`.
fn inside_word(chars: &[char], span: Span, signed: bool) -> bool {
    let Some(before) = span.start.checked_sub(1).map(|i| chars[i]) else { return false };
    if before.is_alphabetic() || before.is_ascii_digit() || before == '.' {
        return true;
    }
    if signed {
        return before.is_alphanumeric();
    }
    if before == '-' {
        return span.start >= 2 && chars[span.start - 2].is_alphanumeric();
    }
    false
}

/// Normalized token sets of header, stub and spanning-label cells.
fn entity_vocabulary(table: &Table) -> HashSet<Vec<String>> {
    let stub = table.stub_col();
    table
        .cells
        .iter()
        .filter(|c| c.numeric.is_none() && !c.text.trim().is_empty())
        .filter(|c| table.is_header_row(c.row) || c.col == stub || c.col_span > 1)
        .map(|c| normalize_tokens(&c.text))
        .filter(|t| !t.is_empty())
        .collect()
}
