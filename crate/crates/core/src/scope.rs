//! Sentence-level highlight regions built from mention targets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::document::{CellId, Table};
use crate::resolve::{AlignmentTarget, GridRect, MentionAlignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceAlignment {
    pub sentence_id: String,
    pub regions: Vec<AlignmentTarget>,
}

/// Default share of a row's (or column's) cells that must be covered before
/// the whole line is highlighted.
pub const DEFAULT_PROMOTION: f64 = 0.5;

const MAX_PASSES: usize = 16;

/// Merges the targets of one sentence's mentions.
pub fn merge_alignments(sentence_id: &str, alignments: &[MentionAlignment], table: &Table, threshold: f64) -> SentenceAlignment {
    let targets: Vec<AlignmentTarget> = alignments.iter().map(|a| a.target.clone()).collect();
    SentenceAlignment { sentence_id: sentence_id.to_string(), regions: merge_targets(&targets, table, threshold) }
}

/// Merges mention targets into a small set of rows, columns, regions and
/// cells that covers every input cell.
///
/// Data rows with at least `threshold` of their cells covered become whole
/// rows; adjacent rows collapse into one region. Columns are then promoted
/// the same way over the cells outside promoted rows. Remaining cells that
/// form a filled rectangle become a region; the rest share one cell target.
/// Merging repeats until the output is stable, so merging a result again
/// returns it unchanged. Output is sorted by top-left corner.
pub fn merge_targets(targets: &[AlignmentTarget], table: &Table, threshold: f64) -> Vec<AlignmentTarget> {
    let mut current = merge_once(targets, table, threshold);
    for _ in 0..MAX_PASSES {
        let next = merge_once(&current, table, threshold);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Input size as counted for the region budget: one per line or region
/// target, one per cell of a cell target.
pub fn target_units(targets: &[AlignmentTarget]) -> usize {
    targets
        .iter()
        .map(|t| match t {
            AlignmentTarget::Cell { cells } => cells.len(),
            _ => 1,
        })
        .sum()
}

fn ids_of(table: &Table, idx: Vec<usize>) -> BTreeSet<CellId> {
    idx.into_iter().map(|i| table.cells[i].id).collect()
}

fn runs(lines: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &l in lines {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == l => *end = l,
            _ => out.push((l, l)),
        }
    }
    out
}

fn merge_once(targets: &[AlignmentTarget], table: &Table, threshold: f64) -> Vec<AlignmentTarget> {
    let valid: Vec<&AlignmentTarget> = targets.iter().filter(|t| t.validate(table).is_ok()).collect();
    if valid.is_empty() || table.n_rows == 0 || table.n_cols == 0 {
        return Vec::new();
    }
    let last_row = table.n_rows - 1;
    let last_col = table.n_cols - 1;

    let mut covered = BTreeSet::new();
    let mut row_cov = BTreeSet::new();
    let mut col_cov = BTreeSet::new();
    let mut rows = BTreeSet::new();
    let mut cols = BTreeSet::new();
    for t in &valid {
        let cells = t.covered_cells(table);
        let (full_width, full_height) = match t.rect(table) {
            Some(r) => (r.col0 == 0 && r.col1 == last_col, r.row0 == 0 && r.row1 == last_row),
            None => (false, false),
        };
        if full_width {
            let r = t.rect(table).expect("line target");
            rows.extend(r.row0..=r.row1);
        }
        if full_height && !full_width {
            let r = t.rect(table).expect("line target");
            cols.extend(r.col0..=r.col1);
        }
        if !full_height {
            row_cov.extend(cells.iter().copied());
        }
        if !full_width {
            col_cov.extend(cells.iter().copied());
        }
        covered.extend(cells);
    }

    for r in table.data_rows() {
        let line = ids_of(table, table.cells_in_row(r));
        let hit = line.iter().filter(|id| row_cov.contains(id)).count();
        if !line.is_empty() && hit as f64 >= threshold * line.len() as f64 {
            rows.insert(r);
        }
    }
    let mut absorbed = BTreeSet::new();
    for &r in &rows {
        absorbed.extend(ids_of(table, table.cells_in_row(r)));
    }

    for c in 0..table.n_cols {
        if cols.contains(&c) {
            continue;
        }
        let mut line = BTreeSet::new();
        for r in table.data_rows().filter(|r| !rows.contains(r)) {
            if let Some(cell) = table.cell_at(r, c) {
                line.insert(cell.id);
            }
        }
        let hit = line.iter().filter(|id| col_cov.contains(id)).count();
        if !line.is_empty() && hit as f64 >= threshold * line.len() as f64 {
            cols.insert(c);
        }
    }
    for &c in &cols {
        absorbed.extend(ids_of(table, table.cells_in_col(c)));
    }

    let mut out = Vec::new();
    for (a, b) in runs(&rows) {
        out.push(if a == b {
            AlignmentTarget::Row { row: a }
        } else {
            AlignmentTarget::Region { rect: GridRect::new(a, b, 0, last_col) }
        });
    }
    for (a, b) in runs(&cols) {
        out.push(if a == b {
            AlignmentTarget::Column { col: a }
        } else {
            AlignmentTarget::Region { rect: GridRect::new(0, last_row, a, b) }
        });
    }

    let residual: Vec<CellId> = covered.difference(&absorbed).copied().collect();
    let pieces = residual_pieces(&residual, table);
    // Fragments left between lines stay together as one cell target.
    if !out.is_empty() && pieces.len() > 1 {
        out.push(AlignmentTarget::cells(residual));
    } else {
        out.extend(pieces);
    }
    out.sort_by_key(|t| (top_left(t, table), t.clone()));
    out.dedup();
    out
}

/// Residual cells: filled rectangles of two or more cells become regions,
/// all other cells share a single cell target.
fn residual_pieces(residual: &[CellId], table: &Table) -> Vec<AlignmentTarget> {
    let mut parent: BTreeMap<CellId, CellId> = residual.iter().map(|&id| (id, id)).collect();
    fn find(parent: &mut BTreeMap<CellId, CellId>, id: CellId) -> CellId {
        let p = parent[&id];
        if p == id {
            return id;
        }
        let root = find(parent, p);
        parent.insert(id, root);
        root
    }
    for (i, &a) in residual.iter().enumerate() {
        for &b in &residual[i + 1..] {
            if touching(table, a, b) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent.insert(ra.max(rb), ra.min(rb));
                }
            }
        }
    }
    let mut components: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
    for &id in residual {
        let root = find(&mut parent, id);
        components.entry(root).or_default().push(id);
    }

    let mut out = Vec::new();
    let mut loose = Vec::new();
    for (_, comp) in components {
        if comp.len() >= 2 {
            if let Some(rect) = filled_rect(&comp, table) {
                out.push(AlignmentTarget::Region { rect });
                continue;
            }
        }
        loose.extend(comp);
    }
    if !loose.is_empty() {
        out.push(AlignmentTarget::cells(loose));
    }
    out
}

fn touching(table: &Table, a: CellId, b: CellId) -> bool {
    let (Some(ca), Some(cb)) = (table.cell(a), table.cell(b)) else { return false };
    let overlap = |x: std::ops::Range<usize>, y: std::ops::Range<usize>| x.start < y.end && y.start < x.end;
    let abut = |x: std::ops::Range<usize>, y: std::ops::Range<usize>| x.end == y.start || y.end == x.start;
    (overlap(ca.rows(), cb.rows()) && abut(ca.cols(), cb.cols())) || (overlap(ca.cols(), cb.cols()) && abut(ca.rows(), cb.rows()))
}

fn filled_rect(comp: &[CellId], table: &Table) -> Option<GridRect> {
    let cells: Vec<_> = comp.iter().filter_map(|id| table.cell(*id)).collect();
    let row0 = cells.iter().map(|c| c.row).min()?;
    let row1 = cells.iter().map(|c| c.row + c.row_span - 1).max()?;
    let col0 = cells.iter().map(|c| c.col).min()?;
    let col1 = cells.iter().map(|c| c.col + c.col_span - 1).max()?;
    let inside = ids_of(table, table.cells_in_rect(row0, row1, col0, col1));
    let wanted: BTreeSet<CellId> = comp.iter().copied().collect();
    (inside == wanted).then_some(GridRect::new(row0, row1, col0, col1))
}

fn top_left(t: &AlignmentTarget, table: &Table) -> (usize, usize) {
    match t {
        AlignmentTarget::Cell { cells } => cells.iter().map(|c| (c.row, c.col)).min().unwrap_or((0, 0)),
        other => other.rect(table).map_or((0, 0), |r| (r.row0, r.col0)),
    }
}

/// Every cell covered by any of `targets`.
pub fn coverage(targets: &[AlignmentTarget], table: &Table) -> BTreeSet<CellId> {
    targets.iter().flat_map(|t| t.covered_cells(table)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_table_grid;
    use crate::geometry::Rect;

    fn table(data_rows: usize, cols: usize) -> Table {
        let mut html = String::from("<table>");
        for r in 0..=data_rows {
            html.push_str("<tr>");
            for c in 0..cols {
                html.push_str(&format!("<td>{r}.{c}</td>"));
            }
            html.push_str("</tr>");
        }
        html.push_str("</table>");
        Table::from_grid("T", 1, "", 0, Rect::new(0.0, 0.0, 10.0, 10.0), 1, parse_table_grid(&html).unwrap())
    }

    fn cells(ids: &[(usize, usize)]) -> AlignmentTarget {
        AlignmentTarget::cells(ids.iter().map(|&(r, c)| CellId::new(r, c)).collect())
    }

    #[test]
    fn adjacent_rows_collapse_and_separate_row_stays() {
        // three entity rows, two derived-value cell pairs inside them
        let t = table(8, 5);
        let targets = vec![
            AlignmentTarget::Row { row: 2 },
            AlignmentTarget::Row { row: 3 },
            AlignmentTarget::Row { row: 8 },
            cells(&[(8, 4), (2, 4)]),
            cells(&[(8, 4), (3, 4)]),
        ];
        let out = merge_targets(&targets, &t, DEFAULT_PROMOTION);
        assert_eq!(
            out,
            vec![AlignmentTarget::Region { rect: GridRect::new(2, 3, 0, 4) }, AlignmentTarget::Row { row: 8 }]
        );
    }

    #[test]
    fn single_cell_unchanged() {
        let t = table(4, 5);
        assert_eq!(merge_targets(&[cells(&[(2, 3)])], &t, DEFAULT_PROMOTION), vec![cells(&[(2, 3)])]);
    }

    #[test]
    fn non_adjacent_rows_stay_apart() {
        let t = table(6, 3);
        let out = merge_targets(&[AlignmentTarget::Row { row: 1 }, AlignmentTarget::Row { row: 5 }], &t, DEFAULT_PROMOTION);
        assert_eq!(out, vec![AlignmentTarget::Row { row: 1 }, AlignmentTarget::Row { row: 5 }]);
    }

    #[test]
    fn half_covered_row_is_promoted() {
        let t = table(3, 4);
        let out = merge_targets(&[cells(&[(2, 0), (2, 1)])], &t, DEFAULT_PROMOTION);
        assert_eq!(out, vec![AlignmentTarget::Row { row: 2 }]);
    }

    #[test]
    fn filled_block_becomes_region() {
        let t = table(6, 6);
        let out = merge_targets(&[cells(&[(1, 1), (2, 1)]), cells(&[(1, 2), (2, 2)]), cells(&[(5, 5)])], &t, DEFAULT_PROMOTION);
        assert_eq!(out, vec![AlignmentTarget::Region { rect: GridRect::new(1, 2, 1, 2) }, cells(&[(5, 5)])]);
    }

    #[test]
    fn shared_promotion_can_add_a_line() {
        // Row 2 reaches the threshold only through both regions together.
        let t = table(3, 5);
        let targets = [
            AlignmentTarget::Region { rect: GridRect::new(1, 2, 3, 3) },
            AlignmentTarget::Region { rect: GridRect::new(2, 3, 0, 1) },
        ];
        let out = merge_targets(&targets, &t, DEFAULT_PROMOTION);
        assert_eq!(
            out,
            vec![
                AlignmentTarget::Region { rect: GridRect::new(0, 3, 0, 1) },
                AlignmentTarget::Column { col: 3 },
                AlignmentTarget::Row { row: 2 },
            ]
        );
        assert_eq!(merge_targets(&out, &t, DEFAULT_PROMOTION), out);
    }

    #[test]
    fn row_splitting_a_region_leaves_one_cell_target() {
        let t = table(8, 6);
        let targets = [AlignmentTarget::Region { rect: GridRect::new(2, 4, 1, 2) }, AlignmentTarget::Row { row: 3 }];
        let out = merge_targets(&targets, &t, DEFAULT_PROMOTION);
        assert_eq!(out, vec![cells(&[(2, 1), (2, 2), (4, 1), (4, 2)]), AlignmentTarget::Row { row: 3 }]);
    }

    #[test]
    fn whole_table_region_is_one_target() {
        let t = table(3, 3);
        let out = merge_targets(&[AlignmentTarget::Region { rect: GridRect::new(0, 3, 0, 2) }], &t, DEFAULT_PROMOTION);
        assert_eq!(out, vec![AlignmentTarget::Region { rect: GridRect::new(0, 3, 0, 2) }]);
    }

    #[test]
    fn column_target_does_not_promote_rows() {
        let t = table(4, 2);
        let out = merge_targets(&[AlignmentTarget::Column { col: 1 }], &t, DEFAULT_PROMOTION);
        assert_eq!(out, vec![AlignmentTarget::Column { col: 1 }]);
    }

    #[test]
    fn result_is_a_fixpoint() {
        let t = table(6, 6);
        let targets = vec![cells(&[(1, 1), (3, 4)]), AlignmentTarget::Column { col: 2 }, AlignmentTarget::Row { row: 4 }];
        let once = merge_targets(&targets, &t, DEFAULT_PROMOTION);
        assert_eq!(merge_targets(&once, &t, DEFAULT_PROMOTION), once);
        assert!(coverage(&once, &t).is_superset(&coverage(&targets, &t)));
    }
}
