//! Typed mentions: character spans in a sentence that point into a table.

mod detect;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use detect::{normalize_tokens, CueLexicon, Detector};

use crate::segment::Sentence;
use crate::text::{find_all, slice, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionType {
    NamedEntity,
    ReferentialEntity,
    InferredEntity,
    RawValue,
    DerivedValue,
    Structural,
}

impl MentionType {
    pub const ALL: [MentionType; 6] = [
        MentionType::NamedEntity,
        MentionType::ReferentialEntity,
        MentionType::InferredEntity,
        MentionType::RawValue,
        MentionType::DerivedValue,
        MentionType::Structural,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MentionType::NamedEntity => "named_entity",
            MentionType::ReferentialEntity => "referential_entity",
            MentionType::InferredEntity => "inferred_entity",
            MentionType::RawValue => "raw_value",
            MentionType::DerivedValue => "derived_value",
            MentionType::Structural => "structural",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn is_entity(&self) -> bool {
        matches!(self, MentionType::NamedEntity | MentionType::ReferentialEntity | MentionType::InferredEntity)
    }

    pub fn is_value(&self) -> bool {
        matches!(self, MentionType::RawValue | MentionType::DerivedValue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    Deterministic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub sentence_id: String,
    pub text: String,
    pub span: Span,
    #[serde(rename = "type")]
    pub mtype: MentionType,
    pub source: MentionSource,
}

/// An unvalidated mention proposal, as produced by a detector backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub text: String,
    pub span: Option<Span>,
    pub mtype: MentionType,
}

impl Candidate {
    pub fn new(text: impl Into<String>, span: Option<Span>, mtype: MentionType) -> Self {
        Self { text: text.into(), span, mtype }
    }
}

/// Keeps only candidates whose span selects exactly their text.
///
/// A candidate without a span is repaired when its text occurs exactly once
/// in the sentence. Candidates with the same span and type are reported once.
/// Output is ordered by span; ids are assigned in that order.
pub fn validate_mention_spans(sentence: &Sentence, candidates: &[Candidate], source: MentionSource) -> Vec<Mention> {
    let mut kept: Vec<Mention> = Vec::new();
    for cand in candidates {
        if cand.text.is_empty() {
            continue;
        }
        let span = match cand.span {
            Some(span) if slice(&sentence.text, span) == Some(cand.text.as_str()) => span,
            Some(_) => continue,
            None => match find_all(&sentence.text, &cand.text).as_slice() {
                [only] => *only,
                _ => continue,
            },
        };
        if kept.iter().any(|m| m.span == span && m.mtype == cand.mtype) {
            continue;
        }
        kept.push(Mention {
            id: String::new(),
            sentence_id: sentence.id.clone(),
            text: cand.text.clone(),
            span,
            mtype: cand.mtype,
            source,
        });
    }
    assign_ids(&sentence.id, &mut kept);
    kept
}

fn mention_order(a: &Mention, b: &Mention) -> Ordering {
    (a.span.start, a.span.end, a.mtype, a.source).cmp(&(b.span.start, b.span.end, b.mtype, b.source))
}

/// Sorts mentions by position and numbers them `{sentence_id}.m{k}`.
pub fn assign_ids(sentence_id: &str, mentions: &mut [Mention]) {
    mentions.sort_by(mention_order);
    for (k, m) in mentions.iter_mut().enumerate() {
        m.id = format!("{sentence_id}.m{k}");
    }
}

/// Combines deterministic and remote mentions for one sentence.
///
/// Remote mentions that overlap a deterministic one replace it only when
/// their type differs; otherwise the deterministic mention stays. Remote
/// mentions overlapping nothing are added.
pub fn merge_backends(sentence_id: &str, deterministic: Vec<Mention>, remote: Vec<Mention>) -> Vec<Mention> {
    let mut out = deterministic;
    for r in remote {
        let overlapping: Vec<usize> = (0..out.len()).filter(|&i| out[i].span.overlaps(&r.span)).collect();
        if overlapping.is_empty() {
            out.push(r);
            continue;
        }
        let conflicts_in_type = overlapping.iter().all(|&i| out[i].mtype != r.mtype);
        let only_deterministic = overlapping.iter().all(|&i| out[i].source == MentionSource::Deterministic);
        if conflicts_in_type && only_deterministic {
            for &i in overlapping.iter().rev() {
                out.remove(i);
            }
            out.push(r);
        }
    }
    assign_ids(sentence_id, &mut out);
    out
}
