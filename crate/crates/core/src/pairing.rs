//! Paragraph reconstruction and paragraph–table pairing.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::document::{Fragment, Paragraph, Table};
use crate::text::{char_len, CharMap, Span};
use crate::Warning;

/// A citation of one table number inside a paragraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableReference {
    pub number: u32,
    /// Span of the whole citation, e.g. `Tables 2 and 3` for both numbers.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphTablePair {
    pub paragraph_id: String,
    pub table_id: String,
    pub table_number: u32,
    pub reference_spans: Vec<Span>,
}

// Longest ranges we expand; "Tables 1-400" is almost certainly noise.
const MAX_RANGE: u32 = 50;

static REFERENCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        \b(?:
            (?P<plural>tables|tabs\.)\s*
                (?P<list>\d+(?:\s*(?:,\s*and|,|and|&|to|[-\u{2013}\u{2014}])\s*\d+)*)
          | (?:table|tab\.)\s*(?P<single>\d+)
        )\b",
    )
    .expect("static regex")
});

static LIST_ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(\d+)|(to|[-\u{2013}\u{2014}])").expect("static regex")
});

/// Finds table citations. Numbers repeated inside one citation are reported
/// once, in order of first occurrence.
pub fn find_table_references(text: &str) -> Vec<TableReference> {
    let map = CharMap::new(text);
    let mut out = Vec::new();
    for caps in REFERENCE.captures_iter(text) {
        let whole = caps.get(0).expect("group 0");
        let span = map.span_from_bytes(whole.start(), whole.end());
        let mut numbers: Vec<u32> = Vec::new();
        if let Some(single) = caps.name("single") {
            if let Ok(n) = single.as_str().parse() {
                numbers.push(n);
            }
        } else if let Some(list) = caps.name("list") {
            let mut pending_range = false;
            for item in LIST_ITEM.captures_iter(list.as_str()) {
                if item.get(2).is_some() {
                    pending_range = true;
                    continue;
                }
                let Ok(n) = item[1].parse::<u32>() else { continue };
                match (pending_range, numbers.last().copied()) {
                    (true, Some(prev)) if n > prev && n - prev <= MAX_RANGE => numbers.extend(prev + 1..=n),
                    _ => numbers.push(n),
                }
                pending_range = false;
            }
        }
        let mut seen = Vec::new();
        for n in numbers {
            if !seen.contains(&n) {
                seen.push(n);
                out.push(TableReference { number: n, span });
            }
        }
    }
    out
}

fn ends_with_terminal(text: &str) -> bool {
    let trimmed = text.trim_end().trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    trimmed.ends_with(['.', '!', '?'])
}

fn starts_as_continuation(text: &str) -> bool {
    text.trim_start().chars().next().is_some_and(|c| c.is_lowercase() || c.is_ascii_digit())
}

/// Merges layout blocks split by column or page breaks back into paragraphs.
///
/// A block joins its predecessor when the predecessor has no terminal
/// punctuation and the block starts lowercase or with a digit. A trailing
/// hyphen before a lowercase continuation is removed instead of inserting a
/// space.
pub fn merge_text_chunks(blocks: &[Paragraph]) -> Vec<Paragraph> {
    let mut out: Vec<Paragraph> = Vec::new();
    for block in blocks {
        let Some(last) = out.last_mut() else {
            out.push(block.clone());
            continue;
        };
        if ends_with_terminal(&last.text) || !starts_as_continuation(&block.text) {
            out.push(block.clone());
            continue;
        }
        let head = last.text.trim_end();
        let tail = block.text.trim_start();
        let dehyphenate = head.ends_with('-')
            && head.chars().rev().nth(1).is_some_and(|c| c.is_alphabetic())
            && tail.chars().next().is_some_and(|c| c.is_lowercase());
        let (joined_head, sep) = if dehyphenate { (&head[..head.len() - 1], "") } else { (head, " ") };
        let head_len = char_len(joined_head);
        // fragments of the earlier text may have been trimmed
        for frag in last.fragments.iter_mut() {
            frag.span.start = frag.span.start.min(head_len);
            frag.span.end = frag.span.end.min(head_len);
        }
        let offset = head_len + sep.len();
        let lead_trim = char_len(&block.text) - char_len(tail);
        let tail_len = char_len(tail);
        for frag in &block.fragments {
            let start = frag.span.start.saturating_sub(lead_trim).min(tail_len);
            let end = frag.span.end.saturating_sub(lead_trim).min(tail_len);
            last.fragments.push(Fragment { span: Span::new(start + offset, end + offset), ..frag.clone() });
        }
        last.text = format!("{joined_head}{sep}{tail}");
    }
    out
}

/// Pairs every citing paragraph with each table it references.
///
/// References to table numbers absent from `tables` yield a warning instead
/// of a pair.
pub fn build_pairs(paragraphs: &[Paragraph], tables: &[Table]) -> (Vec<ParagraphTablePair>, Vec<Warning>) {
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for p in paragraphs {
        let refs = find_table_references(&p.text);
        let mut order: Vec<u32> = Vec::new();
        for r in &refs {
            if !order.contains(&r.number) {
                order.push(r.number);
            }
        }
        for number in order {
            let spans: Vec<Span> = refs.iter().filter(|r| r.number == number).map(|r| r.span).collect();
            match tables.iter().find(|t| t.number == number) {
                Some(t) => pairs.push(ParagraphTablePair {
                    paragraph_id: p.id.clone(),
                    table_id: t.id.clone(),
                    table_number: number,
                    reference_spans: spans,
                }),
                None => warnings.push(Warning::new(
                    "pairing",
                    format!("paragraph {} cites Table {number}, which is not in the document", p.id),
                )),
            }
        }
    }
    (pairs, warnings)
}
