//! Numeric grounding: direct lookup and two-cell arithmetic.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::oracle::{numeric_cells, pair_key, DerivedCandidate, DerivedOp, Scope};
use super::{in_context, AlignmentTarget, Alternative, Evidence, Mechanism, MentionAlignment, ResolveSettings};
use crate::document::{CellId, Table};
use crate::mention::Mention;
use crate::quantity::{parse_quantity, relative_difference, rounds_to, same_magnitude, NumericValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchTier {
    Exact,
    Rounding,
    Approximate,
}

fn tier(cell: &NumericValue, mention: &NumericValue, tolerance: f64) -> Option<MatchTier> {
    if same_magnitude(cell.magnitude, mention.magnitude) {
        Some(MatchTier::Exact)
    } else if rounds_to(cell.magnitude, mention) {
        Some(MatchTier::Rounding)
    } else if cell.scaled && mention.scaled && relative_difference(cell.magnitude, mention.magnitude) <= tolerance {
        Some(MatchTier::Approximate)
    } else {
        None
    }
}

fn context_hits(context: &[AlignmentTarget], table: &Table, id: CellId) -> usize {
    context.iter().filter(|t| in_context(t, table, id.row, id.col)).count()
}

fn context_distance(context: &[AlignmentTarget], table: &Table, id: CellId) -> usize {
    context
        .iter()
        .flat_map(|t| t.covered_cells(table))
        .map(|c| c.row.abs_diff(id.row) + c.col.abs_diff(id.col))
        .min()
        .unwrap_or(0)
}

/// Looks a value up among the numeric data cells.
///
/// Cells match exactly, after half-up rounding to the mention's precision,
/// or (when both sides carry a scale suffix or exponent) within the relative
/// tolerance. Candidates rank by tier, then by how many sentence context
/// targets contain them, then by distance to those targets. All cells tied
/// at the top form the target; the evidence flags such ties as ambiguous.
pub fn resolve_raw_value(
    mention: &Mention,
    table: &Table,
    context: &[AlignmentTarget],
    settings: &ResolveSettings,
) -> Option<MentionAlignment> {
    let value = parse_quantity(&mention.text).ok()?;
    let mut scored: Vec<((MatchTier, Reverse<usize>, usize), CellId)> = table
        .cells
        .iter()
        .filter(|c| !table.is_header_row(c.row))
        .filter_map(|c| {
            let t = tier(c.numeric.as_ref()?, &value, settings.approx_tolerance)?;
            Some(((t, Reverse(context_hits(context, table, c.id)), context_distance(context, table, c.id)), c.id))
        })
        .collect();
    if scored.is_empty() {
        return None;
    }
    scored.sort();

    let mut groups: Vec<(MatchTier, Vec<CellId>)> = Vec::new();
    let mut last_key = None;
    for (key, id) in scored {
        if last_key == Some(key) {
            groups.last_mut().expect("group open").1.push(id);
        } else {
            groups.push((key.0, vec![id]));
            last_key = Some(key);
        }
    }
    let lookup = |(tier, cells): &(MatchTier, Vec<CellId>)| Evidence::Lookup { tier: *tier, cells: cells.clone(), ambiguous: cells.len() > 1 };
    let alternatives = groups
        .iter()
        .enumerate()
        .skip(1)
        .take(settings.max_alternatives)
        .map(|(i, g)| Alternative { rank: i + 1, target: AlignmentTarget::cells(g.1.clone()), evidence: lookup(g) })
        .collect();
    Some(MentionAlignment {
        mention_id: mention.id.clone(),
        target: AlignmentTarget::cells(groups[0].1.clone()),
        mechanism: Mechanism::Numeric,
        evidence: lookup(&groups[0]),
        rank: 1,
        alternatives,
    })
}

/// Operation stages tried in order. Percent values are read as a
/// percentage-point difference before a relative change.
fn op_stages(value: &NumericValue) -> Vec<Vec<DerivedOp>> {
    use DerivedOp::*;
    if value.is_percent {
        vec![vec![Difference, AbsDifference], vec![PercentChange], vec![Ratio]]
    } else {
        vec![vec![Difference, AbsDifference], vec![PercentChange, Ratio]]
    }
}

/// Explains a value as arithmetic over two numeric data cells.
///
/// Scopes widen from the same column to the same row to the whole table and
/// stop at the first scope with a hit. Within a scope, operation stages are
/// tried in order. Candidates rank by how many sentence context targets
/// contain their operands, then by [`pair_key`]. The rank-1 pair becomes a
/// two-cell target.
///
/// The search sorts each scope's values and binary-searches the operand
/// interval each operation admits, so it does not share code with
/// [`super::derived_value_oracle`], which serves as its reference.
pub fn resolve_derived_value(
    mention: &Mention,
    table: &Table,
    context: &[AlignmentTarget],
    settings: &ResolveSettings,
) -> Option<MentionAlignment> {
    let value = parse_quantity(&mention.text).ok()?;
    let cells = numeric_cells(table);
    if cells.len() < 2 {
        return None;
    }
    for scope in [Scope::SameColumn, Scope::SameRow, Scope::WholeTable] {
        for ops in op_stages(&value) {
            let mut found = indexed_search(&value, &cells, scope, &ops);
            if found.is_empty() {
                continue;
            }
            found.sort_by_key(|c| {
                let hits = context_hits(context, table, c.a) + context_hits(context, table, c.b);
                (Reverse(hits), pair_key(c.a, c.b, c.op))
            });
            let arithmetic = |c: &DerivedCandidate| Evidence::Arithmetic { op: c.op, operands: [c.a, c.b], computed: c.computed, scope };
            let best = found[0];
            let mut seen = vec![(best.a.min(best.b), best.a.max(best.b))];
            let mut alternatives = Vec::new();
            for c in &found[1..] {
                let pair = (c.a.min(c.b), c.a.max(c.b));
                if seen.contains(&pair) {
                    continue;
                }
                if alternatives.len() == settings.max_alternatives {
                    break;
                }
                seen.push(pair);
                alternatives.push(Alternative {
                    rank: alternatives.len() + 2,
                    target: AlignmentTarget::cells(vec![c.a, c.b]),
                    evidence: arithmetic(c),
                });
            }
            return Some(MentionAlignment {
                mention_id: mention.id.clone(),
                target: AlignmentTarget::cells(vec![best.a, best.b]),
                mechanism: Mechanism::Numeric,
                evidence: arithmetic(&best),
                rank: 1,
                alternatives,
            });
        }
    }
    None
}

/// Interval of op results that can round to `value`, slightly widened;
/// every hit is re-checked exactly.
fn result_window(value: &NumericValue) -> (f64, f64) {
    let half = 0.5 * 10f64.powi(-(value.display_precision as i32));
    let slack = half * 1e-6 + value.magnitude.abs() * 1e-9;
    (value.magnitude - half - slack, value.magnitude + half + slack)
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    let m = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    (lo - m, hi + m)
}

fn indexed_search(value: &NumericValue, cells: &[(CellId, f64)], scope: Scope, ops: &[DerivedOp]) -> Vec<DerivedCandidate> {
    let mut groups: Vec<Vec<(f64, CellId)>> = Vec::new();
    match scope {
        Scope::WholeTable => groups.push(cells.iter().map(|&(id, v)| (v, id)).collect()),
        Scope::SameColumn | Scope::SameRow => {
            let mut keyed: Vec<(usize, f64, CellId)> = cells
                .iter()
                .map(|&(id, v)| (if scope == Scope::SameColumn { id.col } else { id.row }, v, id))
                .collect();
            keyed.sort_by(|x, y| x.0.cmp(&y.0).then(x.2.cmp(&y.2)));
            for (k, v, id) in keyed {
                match groups.last_mut() {
                    Some(g) if g.first().is_some_and(|&(_, first)| (if scope == Scope::SameColumn { first.col } else { first.row }) == k) => {
                        g.push((v, id))
                    }
                    _ => groups.push(vec![(v, id)]),
                }
            }
        }
    }

    let (lo, hi) = result_window(value);
    let mut out = Vec::new();
    for mut group in groups {
        group.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let values: Vec<f64> = group.iter().map(|g| g.0).collect();
        let in_range = |blo: f64, bhi: f64| {
            let (blo, bhi) = widen(blo, bhi);
            let start = values.partition_point(|v| *v < blo);
            let end = values.partition_point(|v| *v <= bhi);
            start..end.max(start)
        };
        for &(va, a) in &group {
            for &op in ops {
                let ranges = match op {
                    DerivedOp::Difference => vec![in_range(va - hi, va - lo)],
                    DerivedOp::AbsDifference => {
                        if hi < 0.0 {
                            continue;
                        }
                        let l = lo.max(0.0);
                        vec![in_range(va - hi, va - l), in_range(va + l, va + hi)]
                    }
                    DerivedOp::Ratio | DerivedOp::PercentChange => {
                        let (rlo, rhi) = if op == DerivedOp::Ratio { (lo, hi) } else { (1.0 + lo / 100.0, 1.0 + hi / 100.0) };
                        if va == 0.0 || (rlo <= 0.0 && rhi >= 0.0) {
                            vec![0..values.len()]
                        } else {
                            let (b1, b2) = (va / rlo, va / rhi);
                            vec![in_range(b1.min(b2), b1.max(b2))]
                        }
                    }
                };
                let mut seen_b: Vec<CellId> = Vec::new();
                for range in ranges {
                    for &(vb, b) in &group[range] {
                        if b == a || seen_b.contains(&b) {
                            continue;
                        }
                        if let Some(computed) = op.apply(va, vb) {
                            if rounds_to(computed, value) {
                                seen_b.push(b);
                                out.push(DerivedCandidate { op, a, b, computed });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
