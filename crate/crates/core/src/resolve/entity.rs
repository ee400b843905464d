use serde::{Deserialize, Serialize};

use super::{AlignmentTarget, Evidence, GridRect, Mechanism, MentionAlignment};
use crate::document::{Cell, Table};
use crate::mention::{normalize_tokens, Mention, MentionType};

/// Where in the table an entity's matching cell sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRole {
    /// Leading label column of a data row.
    Stub,
    /// A data-row cell spanning several columns, such as a group label.
    Label,
    Header,
    Interior,
}

fn role_of(cell: &Cell, table: &Table, stub: usize) -> EntityRole {
    if table.is_header_row(cell.row) {
        EntityRole::Header
    } else if cell.col_span > 1 {
        EntityRole::Label
    } else if cell.col == stub {
        EntityRole::Stub
    } else {
        EntityRole::Interior
    }
}

/// Lexical grounding of a named entity.
///
/// Stub and label matches yield the cell's row, header matches its column
/// (a region over the data rows when the header spans several columns) and
/// other matches the cell itself. Stub matches beat labels, labels beat
/// headers, headers beat interior cells; ties go to the earliest cell.
pub fn resolve_entity(mention: &Mention, table: &Table) -> Option<MentionAlignment> {
    if mention.mtype != MentionType::NamedEntity {
        return None;
    }
    let wanted = normalize_tokens(&mention.text);
    if wanted.is_empty() {
        return None;
    }
    let stub = table.stub_col();
    let (role, cell) = table
        .cells
        .iter()
        .filter(|c| c.numeric.is_none() && normalize_tokens(&c.text) == wanted)
        .map(|c| (role_of(c, table, stub), c))
        .min_by_key(|(role, c)| (*role, c.row, c.col))?;

    let last_col = table.n_cols - 1;
    let target = match role {
        EntityRole::Stub | EntityRole::Label if cell.row_span > 1 => {
            AlignmentTarget::Region { rect: GridRect::new(cell.row, cell.row + cell.row_span - 1, 0, last_col) }
        }
        EntityRole::Stub | EntityRole::Label => AlignmentTarget::Row { row: cell.row },
        EntityRole::Header if cell.col_span > 1 => AlignmentTarget::Region {
            rect: GridRect::new(table.header_rows, table.n_rows - 1, cell.col, cell.col + cell.col_span - 1),
        },
        EntityRole::Header => AlignmentTarget::Column { col: cell.col },
        EntityRole::Interior => AlignmentTarget::cells(vec![cell.id]),
    };
    Some(MentionAlignment {
        mention_id: mention.id.clone(),
        target,
        mechanism: Mechanism::Semantic,
        evidence: Evidence::Lexical { cell: cell.id, cell_text: cell.text.clone(), role },
        rank: 1,
        alternatives: Vec::new(),
    })
}
