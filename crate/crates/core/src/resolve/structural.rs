use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AlignmentTarget, Evidence, GridRect, Mechanism, MentionAlignment};
use crate::document::Table;
use crate::mention::{Mention, MentionType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Row,
    Column,
}

/// A parsed positional phrase. `position` is 0-based from the start, or
/// `None` for "last".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ordinal {
    pub axis: Axis,
    pub position: Option<usize>,
    pub count: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum StructuralError {
    #[error("{phrase:?} asks for {axis:?} {requested} but only {available} exist")]
    OutOfRange { phrase: String, axis: Axis, requested: usize, available: usize },
}

static ORDINAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        ^(?:the\s+)?
        (?:
            (?P<ord>first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|last)
            (?:\s+(?P<count>two|three|four|five|\d+))?
            \s+(?P<axis>rows?|columns?)
          | (?P<axis2>row|column)\s+(?P<num>\d+)
        )$",
    )
    .expect("static regex")
});

fn word_number(w: &str) -> Option<usize> {
    let words = ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];
    let counts = ["one", "two", "three", "four", "five"];
    let w = w.to_lowercase();
    words
        .iter()
        .position(|x| *x == w)
        .or_else(|| counts.iter().position(|x| *x == w).map(|i| i + 1))
        .or_else(|| w.parse().ok())
}

fn axis_of(word: &str) -> Axis {
    if word.to_lowercase().starts_with("row") {
        Axis::Row
    } else {
        Axis::Column
    }
}

/// Parses "the first row", "the last two columns", "row 3" and the like.
/// Explicit numbers are 1-based.
pub fn parse_ordinal(text: &str) -> Option<Ordinal> {
    let caps = ORDINAL.captures(text.trim())?;
    if let Some(num) = caps.name("num") {
        let n: usize = num.as_str().parse().ok()?;
        return Some(Ordinal { axis: axis_of(&caps["axis2"]), position: Some(n.checked_sub(1)?), count: 1 });
    }
    let ord = &caps["ord"];
    let position = if ord.eq_ignore_ascii_case("last") { None } else { Some(word_number(ord)?) };
    let count = caps.name("count").map_or(Some(1), |c| word_number(c.as_str()))?;
    Some(Ordinal { axis: axis_of(&caps["axis"]), position, count })
}

/// Grounds a positional phrase. Rows count data rows only; columns count
/// every column. Several lines give a region across the other axis.
pub fn resolve_structural(mention: &Mention, table: &Table) -> Result<Option<MentionAlignment>, StructuralError> {
    if mention.mtype != MentionType::Structural {
        return Ok(None);
    }
    let Some(ord) = parse_ordinal(&mention.text) else { return Ok(None) };
    let (offset, available) = match ord.axis {
        Axis::Row => (table.header_rows, table.n_rows - table.header_rows),
        Axis::Column => (0, table.n_cols),
    };
    let out_of_range = |requested| StructuralError::OutOfRange {
        phrase: mention.text.clone(),
        axis: ord.axis,
        requested,
        available,
    };
    let first = match ord.position {
        Some(p) if p + ord.count <= available && ord.count > 0 => p,
        Some(p) => return Err(out_of_range(p + ord.count)),
        None if ord.count <= available && ord.count > 0 => available - ord.count,
        None => return Err(out_of_range(ord.count)),
    };
    let start = offset + first;
    let end = start + ord.count - 1;
    let target = match (ord.axis, ord.count) {
        (Axis::Row, 1) => AlignmentTarget::Row { row: start },
        (Axis::Column, 1) => AlignmentTarget::Column { col: start },
        (Axis::Row, _) => AlignmentTarget::Region { rect: GridRect::new(start, end, 0, table.n_cols - 1) },
        (Axis::Column, _) => AlignmentTarget::Region { rect: GridRect::new(0, table.n_rows - 1, start, end) },
    };
    Ok(Some(MentionAlignment {
        mention_id: mention.id.clone(),
        target,
        mechanism: Mechanism::Structural,
        evidence: Evidence::Ordinal { axis: ord.axis, index: start, count: ord.count },
        rank: 1,
        alternatives: Vec::new(),
    }))
}
