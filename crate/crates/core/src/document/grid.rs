//! Table markup to an addressable cell grid.

use std::collections::HashSet;

use scraper::{ElementRef, Html, Selector};
use thiserror::Error;

use crate::geometry::Rect;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("markup contains no <table> element")]
    NoTable,
    #[error("table has no rows")]
    Empty,
    #[error("invalid {attr} value {value:?} on cell in row {row}")]
    BadSpan { attr: &'static str, value: String, row: usize },
    #[error("cell anchored at r{row}c{col} overlaps an earlier spanning cell")]
    Overlap { row: usize, col: usize },
    #[error("cell anchored at r{row}c{col} spans past the last row")]
    RowSpanOverflow { row: usize, col: usize },
    #[error("invalid data-bbox {0:?}")]
    BadBox(String),
}

/// One cell of a parsed grid, positioned at its top-left anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    pub row_span: usize,
    pub col_span: usize,
    pub text: String,
    pub header: bool,
    /// Cell box from a `data-bbox="x y w h"` attribute, if the markup has one.
    pub bbox: Option<Rect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Cells in row-major anchor order.
    pub cells: Vec<GridCell>,
}

/// Parses the first `<table>` in `markup` into a fully covered grid.
///
/// Merged cells keep a single entry at their anchor with `row_span` /
/// `col_span` set. Rows shorter than the widest row are padded on the right
/// with empty cells.
pub fn parse_table_grid(markup: &str) -> Result<Grid, GridError> {
    let doc = Html::parse_fragment(markup);
    let table_sel = Selector::parse("table").expect("static selector");
    let table = doc.select(&table_sel).next().ok_or(GridError::NoTable)?;

    let rows: Vec<ElementRef> = own_rows(table);
    if rows.is_empty() {
        return Err(GridError::Empty);
    }
    let n_rows = rows.len();

    let mut occupied: HashSet<(usize, usize)> = HashSet::new();
    let mut cells = Vec::new();
    let mut n_cols = 0;

    for (r, tr) in rows.iter().enumerate() {
        let mut c = 0;
        for td in tr.children().filter_map(ElementRef::wrap) {
            let name = td.value().name();
            if name != "td" && name != "th" {
                continue;
            }
            while occupied.contains(&(r, c)) {
                c += 1;
            }
            let row_span = span_attr(&td, "rowspan", r)?;
            let col_span = span_attr(&td, "colspan", r)?;
            if r + row_span > n_rows {
                return Err(GridError::RowSpanOverflow { row: r, col: c });
            }
            for dr in 0..row_span {
                for dc in 0..col_span {
                    if !occupied.insert((r + dr, c + dc)) {
                        return Err(GridError::Overlap { row: r, col: c });
                    }
                }
            }
            let bbox = match td.value().attr("data-bbox") {
                Some(raw) => Some(parse_bbox(raw)?),
                None => None,
            };
            cells.push(GridCell {
                row: r,
                col: c,
                row_span,
                col_span,
                text: collapse_ws(&td.text().collect::<String>()),
                header: name == "th",
                bbox,
            });
            c += col_span;
            n_cols = n_cols.max(c);
        }
    }
    for &(_, c) in &occupied {
        n_cols = n_cols.max(c + 1);
    }
    if n_cols == 0 {
        return Err(GridError::Empty);
    }

    // Ragged rows: pad every uncovered position with an empty 1x1 cell.
    for r in 0..n_rows {
        for c in 0..n_cols {
            if !occupied.contains(&(r, c)) {
                occupied.insert((r, c));
                cells.push(GridCell {
                    row: r,
                    col: c,
                    row_span: 1,
                    col_span: 1,
                    text: String::new(),
                    header: false,
                    bbox: None,
                });
            }
        }
    }
    cells.sort_by_key(|cell| (cell.row, cell.col));
    Ok(Grid { n_rows, n_cols, cells })
}

/// `<tr>` elements belonging to `table` itself, skipping nested tables.
fn own_rows(table: ElementRef<'_>) -> Vec<ElementRef<'_>> {
    table
        .descendants()
        .filter_map(ElementRef::wrap)
        .filter(|el| el.value().name() == "tr")
        .filter(|tr| {
            tr.ancestors()
                .filter_map(ElementRef::wrap)
                .find(|a| a.value().name() == "table")
                .is_some_and(|t| t.id() == table.id())
        })
        .collect()
}

fn span_attr(td: &ElementRef, attr: &'static str, row: usize) -> Result<usize, GridError> {
    match td.value().attr(attr) {
        None => Ok(1),
        Some(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(GridError::BadSpan { attr, value: raw.to_string(), row }),
        },
    }
}

fn parse_bbox(raw: &str) -> Result<Rect, GridError> {
    let vals: Vec<f64> = raw
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| GridError::BadBox(raw.to_string()))?;
    match vals.as_slice() {
        [x, y, w, h] if Rect::new(*x, *y, *w, *h).is_valid() => Ok(Rect::new(*x, *y, *w, *h)),
        _ => Err(GridError::BadBox(raw.to_string())),
    }
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
