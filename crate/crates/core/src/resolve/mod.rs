//! Grounding mentions to table targets.
//!
//! Entities resolve lexically, values numerically (lookup or arithmetic over
//! two cells) and positional phrases structurally. [`resolve_sentence`]
//! orders the work so that entity targets can disambiguate values.

mod entity;
mod oracle;
mod structural;
mod value;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use entity::{resolve_entity, EntityRole};
pub use oracle::{derived_value_oracle, pair_key, DerivedCandidate, DerivedOp, Scope};
pub use structural::{parse_ordinal, resolve_structural, Axis, Ordinal, StructuralError};
pub use value::{resolve_derived_value, resolve_raw_value, MatchTier};

use crate::document::{CellId, Table};
use crate::inference::{table_context, InferenceClient};
use crate::mention::{Mention, MentionType};
use crate::Warning;

/// Inclusive rectangle of grid positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridRect {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl GridRect {
    pub fn new(row0: usize, row1: usize, col0: usize, col1: usize) -> Self {
        Self { row0, row1, col0, col1 }
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..=self.row1).contains(&row) && (self.col0..=self.col1).contains(&col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "granularity", rename_all = "snake_case")]
pub enum AlignmentTarget {
    Cell { cells: Vec<CellId> },
    Row { row: usize },
    Column { col: usize },
    Region { rect: GridRect },
}

#[derive(Debug, Error, PartialEq)]
pub enum TargetError {
    #[error("cell target is empty")]
    EmptyCells,
    #[error("cell {0} is not a cell anchor in this table")]
    UnknownCell(CellId),
    #[error("row {0} out of range")]
    Row(usize),
    #[error("column {0} out of range")]
    Column(usize),
    #[error("region {0:?} is empty or out of range")]
    Region(GridRect),
}

impl AlignmentTarget {
    pub fn cells(mut ids: Vec<CellId>) -> Self {
        ids.sort();
        ids.dedup();
        AlignmentTarget::Cell { cells: ids }
    }

    pub fn validate(&self, table: &Table) -> Result<(), TargetError> {
        match self {
            AlignmentTarget::Cell { cells } => {
                if cells.is_empty() {
                    return Err(TargetError::EmptyCells);
                }
                for id in cells {
                    if table.cell(*id).is_none() {
                        return Err(TargetError::UnknownCell(*id));
                    }
                }
                Ok(())
            }
            AlignmentTarget::Row { row } if *row >= table.n_rows => Err(TargetError::Row(*row)),
            AlignmentTarget::Column { col } if *col >= table.n_cols => Err(TargetError::Column(*col)),
            AlignmentTarget::Region { rect } => {
                if rect.row0 > rect.row1 || rect.col0 > rect.col1 || rect.row1 >= table.n_rows || rect.col1 >= table.n_cols {
                    Err(TargetError::Region(*rect))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// The grid rectangle spanned by a line or region; `None` for cell sets.
    pub fn rect(&self, table: &Table) -> Option<GridRect> {
        let last_row = table.n_rows.saturating_sub(1);
        let last_col = table.n_cols.saturating_sub(1);
        match self {
            AlignmentTarget::Cell { .. } => None,
            AlignmentTarget::Row { row } => Some(GridRect::new(*row, *row, 0, last_col)),
            AlignmentTarget::Column { col } => Some(GridRect::new(0, last_row, *col, *col)),
            AlignmentTarget::Region { rect } => Some(*rect),
        }
    }

    /// Anchor ids of every cell the target touches. Columns include header
    /// rows; merged cells count once.
    pub fn covered_cells(&self, table: &Table) -> BTreeSet<CellId> {
        match self {
            AlignmentTarget::Cell { cells } => cells.iter().copied().filter(|id| table.cell(*id).is_some()).collect(),
            _ => {
                let Some(r) = self.rect(table) else { return BTreeSet::new() };
                if r.row1 >= table.n_rows || r.col1 >= table.n_cols {
                    return BTreeSet::new();
                }
                table.cells_in_rect(r.row0, r.row1, r.col0, r.col1).into_iter().map(|i| table.cells[i].id).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Semantic,
    Numeric,
    Structural,
}

/// Why a target was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Lexical { cell: CellId, cell_text: String, role: EntityRole },
    Lookup { tier: MatchTier, cells: Vec<CellId>, ambiguous: bool },
    Arithmetic { op: DerivedOp, operands: [CellId; 2], computed: f64, scope: Scope },
    Ordinal { axis: Axis, index: usize, count: usize },
    Remote,
}

/// A lower-ranked target kept for inspection; only rank 1 is rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub rank: usize,
    pub target: AlignmentTarget,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionAlignment {
    pub mention_id: String,
    pub target: AlignmentTarget,
    pub mechanism: Mechanism,
    pub evidence: Evidence,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<Alternative>,
}

/// Tunables for numeric resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveSettings {
    /// Relative tolerance of the approximate tier.
    pub approx_tolerance: f64,
    /// Lower-ranked candidates recorded per mention.
    pub max_alternatives: usize,
    /// Look a derived value up directly when no arithmetic explains it.
    pub derived_lookup_fallback: bool,
}

impl Default for ResolveSettings {
    fn default() -> Self {
        Self { approx_tolerance: 0.02, max_alternatives: 4, derived_lookup_fallback: true }
    }
}

/// Resolves every mention of one sentence against `table`.
///
/// Entities and structural phrases go first; their targets then rank value
/// candidates. Referential and inferred entities need `client`; when it is
/// missing or fails they stay unresolved and the failure is reported as a
/// warning. Unresolved mentions are left out of the result.
pub fn resolve_sentence(
    sentence: &str,
    mentions: &[Mention],
    table: &Table,
    client: Option<&InferenceClient>,
    settings: &ResolveSettings,
) -> (Vec<MentionAlignment>, Vec<Warning>) {
    let mut out: Vec<MentionAlignment> = Vec::new();
    let mut warnings = Vec::new();
    let mut remote_down = false;
    let context = client.map(|_| table_context(table));

    for m in mentions.iter().filter(|m| !m.mtype.is_value()) {
        let found = match m.mtype {
            MentionType::NamedEntity => resolve_entity(m, table),
            MentionType::Structural => match resolve_structural(m, table) {
                Ok(a) => a,
                Err(e) => {
                    warnings.push(Warning::new("resolution", format!("mention {}: {e}", m.id)));
                    None
                }
            },
            _ => match (client, &context) {
                (Some(c), Some(ctx)) if !remote_down => match c.resolve(sentence, m, ctx) {
                    Ok(Some(target)) => match target.validate(table) {
                        Ok(()) => Some(MentionAlignment {
                            mention_id: m.id.clone(),
                            target,
                            mechanism: Mechanism::Semantic,
                            evidence: Evidence::Remote,
                            rank: 1,
                            alternatives: Vec::new(),
                        }),
                        Err(e) => {
                            warnings.push(Warning::new("resolution", format!("mention {}: remote target rejected: {e}", m.id)));
                            None
                        }
                    },
                    Ok(None) => None,
                    Err(e) => {
                        tracing::warn!(error = %e, "remote resolution failed, continuing deterministically");
                        warnings.push(Warning::new("resolution", format!("remote backend failed: {e}")));
                        remote_down = true;
                        None
                    }
                },
                _ => None,
            },
        };
        out.extend(found);
    }

    let context_targets: Vec<AlignmentTarget> = out.iter().map(|a| a.target.clone()).collect();
    for m in mentions.iter().filter(|m| m.mtype.is_value()) {
        let found = match m.mtype {
            MentionType::RawValue => resolve_raw_value(m, table, &context_targets, settings),
            _ => resolve_derived_value(m, table, &context_targets, settings)
                .or_else(|| settings.derived_lookup_fallback.then(|| resolve_raw_value(m, table, &context_targets, settings)).flatten()),
        };
        out.extend(found);
    }

    let order: Vec<&str> = mentions.iter().map(|m| m.id.as_str()).collect();
    out.sort_by_key(|a| order.iter().position(|id| *id == a.mention_id));
    (out, warnings)
}

/// Rows and columns a context target draws attention to, used to rank value
/// candidates. Returns whether `cell` falls inside it.
pub(crate) fn in_context(target: &AlignmentTarget, table: &Table, row: usize, col: usize) -> bool {
    match target {
        AlignmentTarget::Row { row: r } => *r == row,
        AlignmentTarget::Column { col: c } => *c == col,
        AlignmentTarget::Region { rect } => rect.contains(row, col),
        AlignmentTarget::Cell { cells } => cells.iter().any(|id| {
            table.cell(*id).is_some_and(|c| c.rows().contains(&row))
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_table_grid;
    use crate::geometry::Rect;
    use crate::mention::MentionSource;
    use crate::text::Span;

    fn table() -> Table {
        let grid = parse_table_grid(
            "<table><tr><th>Model</th><th>Acc</th><th>F1</th></tr>\
             <tr><td>A</td><td>85.1</td><td>70.0</td></tr>\
             <tr><td>B</td><td>85.1</td><td>71.0</td></tr></table>",
        )
        .unwrap();
        Table::from_grid("T1", 1, "", 0, Rect::new(0.0, 0.0, 30.0, 30.0), 1, grid)
    }

    fn mention(id: &str, text: &str, start: usize, mtype: MentionType) -> Mention {
        Mention {
            id: id.into(),
            sentence_id: "s".into(),
            text: text.into(),
            span: Span::new(start, start + text.chars().count()),
            mtype,
            source: MentionSource::Deterministic,
        }
    }

    #[test]
    fn target_serialization_shape() {
        let t = AlignmentTarget::Region { rect: GridRect::new(1, 2, 0, 3) };
        assert_eq!(
            serde_json::to_string(&t).unwrap(),
            r#"{"granularity":"region","rect":{"row0":1,"row1":2,"col0":0,"col1":3}}"#
        );
        let c = AlignmentTarget::cells(vec![CellId::new(2, 1), CellId::new(1, 1)]);
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"granularity":"cell","cells":["r1c1","r2c1"]}"#);
        let back: AlignmentTarget = serde_json::from_str(r#"{"granularity":"column","col":2}"#).unwrap();
        assert_eq!(back, AlignmentTarget::Column { col: 2 });
    }

    #[test]
    fn validation_and_coverage() {
        let t = table();
        assert!(AlignmentTarget::Row { row: 3 }.validate(&t).is_err());
        assert!(AlignmentTarget::cells(vec![CellId::new(9, 0)]).validate(&t).is_err());
        assert!(AlignmentTarget::Region { rect: GridRect::new(2, 1, 0, 0) }.validate(&t).is_err());
        assert_eq!(AlignmentTarget::Column { col: 1 }.covered_cells(&t).len(), 3);
        assert_eq!(AlignmentTarget::Row { row: 1 }.covered_cells(&t).len(), 3);
    }

    #[test]
    fn entity_row_disambiguates_duplicate_value() {
        let t = table();
        let text = "B reaches 85.1 and 0.99.";
        let mentions = [
            mention("s.m0", "B", 0, MentionType::NamedEntity),
            mention("s.m1", "85.1", 10, MentionType::RawValue),
            mention("s.m2", "0.99", 19, MentionType::RawValue),
        ];
        let (out, warnings) = resolve_sentence(text, &mentions, &t, None, &ResolveSettings::default());
        assert!(warnings.is_empty());
        assert_eq!(out.len(), 2, "unmatched 0.99 is dropped");
        assert_eq!(out[0].target, AlignmentTarget::Row { row: 2 });
        assert_eq!(out[1].target, AlignmentTarget::cells(vec![CellId::new(2, 1)]));
    }

    #[test]
    fn all_resolvable_gives_one_alignment_each() {
        let t = table();
        let mentions = [
            mention("s.m0", "A", 0, MentionType::NamedEntity),
            mention("s.m1", "the last row", 5, MentionType::Structural),
            mention("s.m2", "71.0", 20, MentionType::RawValue),
        ];
        let (out, _) = resolve_sentence("", &mentions, &t, None, &ResolveSettings::default());
        assert_eq!(out.len(), mentions.len());
    }

    #[test]
    fn referential_without_backend_is_unresolved() {
        let t = table();
        let mentions = [mention("s.m0", "the former", 0, MentionType::ReferentialEntity)];
        assert!(resolve_sentence("the former", &mentions, &t, None, &ResolveSettings::default()).0.is_empty());
    }
}
