//! Character spans and offset conversion.
//!
//! Every span exposed by this crate counts Unicode scalar values, not bytes.
//! Regex matches and `str` slicing work in bytes, so conversions go through
//! [`CharMap`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open interval `[start, end)` over the characters of some text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted span {start}..{end}");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersection_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn shift(&self, by: isize) -> Span {
        Span::new(
            (self.start as isize + by) as usize,
            (self.end as isize + by) as usize,
        )
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span { start: v[0], end: v[1] }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Byte offsets of every character boundary in a string.
#[derive(Debug, Clone)]
pub struct CharMap {
    // offsets[i] = byte offset of char i; last entry = text.len()
    offsets: Vec<usize>,
}

impl CharMap {
    pub fn new(text: &str) -> Self {
        let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        offsets.push(text.len());
        Self { offsets }
    }

    pub fn char_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Char index of a byte offset that lies on a char boundary.
    pub fn to_char(&self, byte: usize) -> usize {
        match self.offsets.binary_search(&byte) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn to_byte(&self, ch: usize) -> usize {
        self.offsets[ch.min(self.char_len())]
    }

    pub fn span_from_bytes(&self, start: usize, end: usize) -> Span {
        Span::new(self.to_char(start), self.to_char(end))
    }
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring at a char span, or `None` when the span is out of bounds.
pub fn slice(text: &str, span: Span) -> Option<&str> {
    if span.start > span.end {
        return None;
    }
    let map = CharMap::new(text);
    if span.end > map.char_len() {
        return None;
    }
    Some(&text[map.to_byte(span.start)..map.to_byte(span.end)])
}

/// Char spans of every occurrence of `needle` in `haystack`.
pub fn find_all(haystack: &str, needle: &str) -> Vec<Span> {
    if needle.is_empty() {
        return Vec::new();
    }
    let map = CharMap::new(haystack);
    let n = char_len(needle);
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let b = from + pos;
        let start = map.to_char(b);
        out.push(Span::new(start, start + n));
        // advance one char so overlapping occurrences are counted
        from = b + haystack[b..].chars().next().map_or(1, |c| c.len_utf8());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_by_chars() {
        let t = "αβ 12.5%";
        assert_eq!(slice(t, Span::new(3, 8)), Some("12.5%"));
        assert_eq!(slice(t, Span::new(3, 9)), None);
    }

    #[test]
    fn span_serializes_as_pair() {
        let s = Span::new(2, 7);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[2,7]");
        let back: Span = serde_json::from_str("[2,7]").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn finds_overlapping_occurrences() {
        assert_eq!(find_all("aaa", "aa"), vec![Span::new(0, 2), Span::new(1, 3)]);
        assert_eq!(find_all("ü x ü", "ü"), vec![Span::new(0, 1), Span::new(4, 5)]);
    }
}
