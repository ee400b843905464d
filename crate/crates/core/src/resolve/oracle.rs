//! Brute-force enumeration of two-cell arithmetic explaining a value.

use serde::{Deserialize, Serialize};

use crate::document::{CellId, Table};
use crate::quantity::{rounds_to, NumericValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivedOp {
    Difference,
    AbsDifference,
    PercentChange,
    Ratio,
}

impl DerivedOp {
    pub const ALL: [DerivedOp; 4] = [DerivedOp::Difference, DerivedOp::AbsDifference, DerivedOp::PercentChange, DerivedOp::Ratio];

    /// `a - b`, `|a - b|`, `100 (a - b) / b` or `a / b`; `None` when undefined.
    pub fn apply(self, a: f64, b: f64) -> Option<f64> {
        let v = match self {
            DerivedOp::Difference => a - b,
            DerivedOp::AbsDifference => (a - b).abs(),
            DerivedOp::PercentChange if b != 0.0 => 100.0 * (a - b) / b,
            DerivedOp::Ratio if b != 0.0 => a / b,
            _ => return None,
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    SameColumn,
    SameRow,
    WholeTable,
}

impl Scope {
    pub fn admits(self, a: CellId, b: CellId) -> bool {
        match self {
            Scope::SameColumn => a.col == b.col,
            Scope::SameRow => a.row == b.row,
            Scope::WholeTable => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedCandidate {
    pub op: DerivedOp,
    pub a: CellId,
    pub b: CellId,
    pub computed: f64,
}

/// Sort key shared by the oracle and the resolver: same-column pairs, then
/// same-row pairs, then the rest; then grid distance; then the unordered
/// pair of cell ids; then the operation; then operand order.
pub type PairKey = (u8, usize, CellId, CellId, DerivedOp, CellId);

pub fn pair_key(a: CellId, b: CellId, op: DerivedOp) -> PairKey {
    let class = if a.col == b.col {
        0
    } else if a.row == b.row {
        1
    } else {
        2
    };
    let dist = a.row.abs_diff(b.row) + a.col.abs_diff(b.col);
    (class, dist, a.min(b), a.max(b), op, a)
}

/// Numeric data cells, by anchor id, in row-major order.
pub(crate) fn numeric_cells(table: &Table) -> Vec<(CellId, f64)> {
    table
        .cells
        .iter()
        .filter(|c| !table.is_header_row(c.row))
        .filter_map(|c| c.numeric.as_ref().map(|n| (c.id, n.magnitude)))
        .collect()
}

/// Every ordered pair of distinct numeric data cells within `scope` and every
/// operation in `ops` whose result rounds to `value`, sorted by [`pair_key`].
pub fn derived_value_oracle(value: &NumericValue, table: &Table, scope: Scope, ops: &[DerivedOp]) -> Vec<DerivedCandidate> {
    let cells = numeric_cells(table);
    let mut out = Vec::new();
    for &(a, va) in &cells {
        for &(b, vb) in &cells {
            if a == b || !scope.admits(a, b) {
                continue;
            }
            for &op in ops {
                if let Some(computed) = op.apply(va, vb) {
                    if rounds_to(computed, value) {
                        out.push(DerivedCandidate { op, a, b, computed });
                    }
                }
            }
        }
    }
    out.sort_by_key(|c| pair_key(c.a, c.b, c.op));
    out
}
