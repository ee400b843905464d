//! Parsed-document model and bundle ingestion.
//!
//! A bundle is a single UTF-8 JSON object produced by an upstream PDF parser:
//!
//! ```json
//! {"doc_id": "...",
//!  "pages": [{"index": 0, "width": 612, "height": 792}],
//!  "paragraphs": [{"id": "p1", "page": 0, "box": [x, y, w, h], "text": "..."}],
//!  "tables": [{"id": "T1", "number": 2, "caption": "...", "page": 0,
//!              "box": [x, y, w, h], "header_rows": 1, "html": "<table>...</table>"}]}
//! ```
//!
//! Paragraph entries are layout blocks in reading order; reconstructing full
//! paragraphs from them happens in [`crate::pairing::merge_text_chunks`].

mod grid;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use grid::{parse_table_grid, Grid, GridCell, GridError};

use crate::geometry::Rect;
use crate::quantity::{parse_cell_quantity, NumericValue};
use crate::text::{char_len, Span};

/// Boxes may overhang their page by this fraction of the page size; anything
/// larger is rejected at ingestion. Residual overhang is clamped when boxes are
/// normalized.
const PAGE_OVERHANG: f64 = 0.01;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("bundle is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: missing required field `{field}`")]
    MissingField { context: String, field: &'static str },
    #[error("validation failed: {0}")]
    Invalid(String),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("table {table_id}: {source}")]
    Table {
        table_id: String,
        #[source]
        source: GridError,
    },
}

impl DocumentError {
    fn missing(context: impl Into<String>, field: &'static str) -> Self {
        DocumentError::MissingField { context: context.into(), field }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageInfo {
    pub index: usize,
    pub width: f64,
    pub height: f64,
}

/// A stretch of paragraph text laid out inside one layout block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fragment {
    pub block_id: String,
    pub page: usize,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Paragraph {
    pub id: String,
    pub page: usize,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub text: String,
    /// Layout blocks that make up the text; a single entry unless merged.
    pub fragments: Vec<Fragment>,
}

impl Paragraph {
    pub fn new(id: impl Into<String>, page: usize, bbox: Rect, text: impl Into<String>) -> Self {
        let id = id.into();
        let text = text.into();
        let fragments = vec![Fragment {
            block_id: id.clone(),
            page,
            bbox,
            span: Span::new(0, char_len(&text)),
        }];
        Self { id, page, bbox, text, fragments }
    }
}

/// Grid address of a cell anchor, formatted `r{row}c{col}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub row: usize,
    pub col: usize,
}

impl CellId {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}c{}", self.row, self.col)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("malformed cell id {0:?}")]
pub struct CellIdError(pub String);

impl FromStr for CellId {
    type Err = CellIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CellIdError(s.to_string());
        let rest = s.strip_prefix('r').ok_or_else(err)?;
        let (row, col) = rest.split_once('c').ok_or_else(err)?;
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()) && (t == "0" || !t.starts_with('0'));
        if !digits(row) || !digits(col) {
            return Err(err());
        }
        Ok(CellId::new(row.parse().map_err(|_| err())?, col.parse().map_err(|_| err())?))
    }
}

impl Serialize for CellId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub id: CellId,
    pub row: usize,
    pub col: usize,
    pub row_span: usize,
    pub col_span: usize,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric: Option<NumericValue>,
    #[serde(rename = "box")]
    pub bbox: Rect,
}

impl Cell {
    pub fn rows(&self) -> std::ops::Range<usize> {
        self.row..self.row + self.row_span
    }

    pub fn cols(&self) -> std::ops::Range<usize> {
        self.col..self.col + self.col_span
    }

    pub fn covers(&self, row: usize, col: usize) -> bool {
        self.rows().contains(&row) && self.cols().contains(&col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityBucket {
    Simple,
    Standard,
    Complex,
}

impl ComplexityBucket {
    pub const ALL: [ComplexityBucket; 3] =
        [ComplexityBucket::Simple, ComplexityBucket::Standard, ComplexityBucket::Complex];

    /// Area thresholds are closed on the upper end: 48 is simple, 90 standard.
    pub fn from_area(area: usize) -> Self {
        match area {
            0..=48 => ComplexityBucket::Simple,
            49..=90 => ComplexityBucket::Standard,
            _ => ComplexityBucket::Complex,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ComplexityBucket::Simple => "simple",
            ComplexityBucket::Standard => "standard",
            ComplexityBucket::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub id: String,
    pub number: u32,
    pub caption: String,
    pub page: usize,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub n_rows: usize,
    pub n_cols: usize,
    pub header_rows: usize,
    pub cells: Vec<Cell>,
    /// `slots[r * n_cols + c]` = index into `cells` of the cell covering (r, c).
    #[serde(skip)]
    slots: Vec<usize>,
}

impl Table {
    /// Builds a table from a parsed grid. Cells without explicit boxes get
    /// a uniform subdivision of the table box.
    pub fn from_grid(
        id: impl Into<String>,
        number: u32,
        caption: impl Into<String>,
        page: usize,
        bbox: Rect,
        header_rows: usize,
        grid: Grid,
    ) -> Self {
        let cw = bbox.w / grid.n_cols as f64;
        let rh = bbox.h / grid.n_rows as f64;
        let cells: Vec<Cell> = grid
            .cells
            .into_iter()
            .map(|g| {
                let cell_box = g.bbox.unwrap_or_else(|| {
                    Rect::new(
                        bbox.x + g.col as f64 * cw,
                        bbox.y + g.row as f64 * rh,
                        g.col_span as f64 * cw,
                        g.row_span as f64 * rh,
                    )
                });
                Cell {
                    id: CellId::new(g.row, g.col),
                    row: g.row,
                    col: g.col,
                    row_span: g.row_span,
                    col_span: g.col_span,
                    numeric: parse_cell_quantity(&g.text),
                    text: g.text,
                    bbox: cell_box,
                }
            })
            .collect();
        let mut slots = vec![usize::MAX; grid.n_rows * grid.n_cols];
        for (i, cell) in cells.iter().enumerate() {
            for r in cell.rows() {
                for c in cell.cols() {
                    slots[r * grid.n_cols + c] = i;
                }
            }
        }
        Table {
            id: id.into(),
            number,
            caption: caption.into(),
            page,
            bbox,
            n_rows: grid.n_rows,
            n_cols: grid.n_cols,
            header_rows,
            cells,
            slots,
        }
    }

    pub fn area(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn data_rows(&self) -> std::ops::Range<usize> {
        self.header_rows..self.n_rows
    }

    pub fn is_header_row(&self, row: usize) -> bool {
        row < self.header_rows
    }

    /// Index into `cells` of the cell covering grid position (row, col).
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        if row < self.n_rows && col < self.n_cols {
            Some(self.slots[row * self.n_cols + col])
        } else {
            None
        }
    }

    pub fn cell_at(&self, row: usize, col: usize) -> Option<&Cell> {
        self.slot(row, col).map(|i| &self.cells[i])
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.cell_at(id.row, id.col).filter(|c| c.id == id)
    }

    /// Distinct cells intersecting a rectangle of grid positions (inclusive).
    pub fn cells_in_rect(&self, row0: usize, row1: usize, col0: usize, col1: usize) -> Vec<usize> {
        let mut seen = Vec::new();
        for r in row0..=row1.min(self.n_rows.saturating_sub(1)) {
            for c in col0..=col1.min(self.n_cols.saturating_sub(1)) {
                let i = self.slots[r * self.n_cols + c];
                if !seen.contains(&i) {
                    seen.push(i);
                }
            }
        }
        seen.sort_unstable();
        seen
    }

    pub fn cells_in_row(&self, row: usize) -> Vec<usize> {
        self.cells_in_rect(row, row, 0, self.n_cols - 1)
    }

    pub fn cells_in_col(&self, col: usize) -> Vec<usize> {
        self.cells_in_rect(0, self.n_rows - 1, col, col)
    }

    /// The leading label column of the data rows: the first column whose data
    /// cells are mostly non-numeric. Falls back to column 0.
    pub fn stub_col(&self) -> usize {
        (0..self.n_cols)
            .find(|&c| {
                let mut text = 0;
                let mut numeric = 0;
                for r in self.data_rows() {
                    let Some(cell) = self.cell_at(r, c) else { continue };
                    if cell.col != c || cell.col_span == self.n_cols || cell.text.is_empty() {
                        continue;
                    }
                    if cell.numeric.is_some() {
                        numeric += 1;
                    } else {
                        text += 1;
                    }
                }
                text > 0 && text >= numeric
            })
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsedDocument {
    pub doc_id: String,
    pub pages: Vec<PageInfo>,
    pub paragraphs: Vec<Paragraph>,
    pub tables: Vec<Table>,
    /// SHA-256 (hex) of the canonical bundle bytes.
    pub content_hash: String,
}

impl ParsedDocument {
    pub fn page(&self, index: usize) -> Option<&PageInfo> {
        self.pages.get(index)
    }

    pub fn table(&self, id: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.id == id)
    }

    pub fn paragraph(&self, id: &str) -> Option<&Paragraph> {
        self.paragraphs.iter().find(|p| p.id == id)
    }
}

pub fn classify_table_complexity(table: &Table) -> ComplexityBucket {
    ComplexityBucket::from_area(table.area())
}

#[derive(Deserialize)]
struct RawBundle {
    doc_id: Option<String>,
    pages: Option<Vec<RawPage>>,
    #[serde(default)]
    paragraphs: Vec<RawParagraph>,
    #[serde(default)]
    tables: Vec<RawTable>,
}

#[derive(Deserialize)]
struct RawPage {
    index: Option<usize>,
    width: Option<f64>,
    height: Option<f64>,
}

#[derive(Deserialize)]
struct RawParagraph {
    id: Option<String>,
    page: Option<usize>,
    #[serde(rename = "box")]
    bbox: Option<Rect>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct RawTable {
    id: Option<String>,
    number: Option<u32>,
    #[serde(default)]
    caption: String,
    page: Option<usize>,
    #[serde(rename = "box")]
    bbox: Option<Rect>,
    header_rows: Option<usize>,
    html: Option<String>,
}

/// Parses and validates a canonical document bundle.
pub fn ingest_document(bundle: &[u8]) -> Result<ParsedDocument, DocumentError> {
    let value: serde_json::Value = serde_json::from_slice(bundle)?;
    let content_hash = content_hash(&value);
    let raw: RawBundle = serde_json::from_value(value)?;

    let doc_id = raw.doc_id.ok_or_else(|| DocumentError::missing("bundle", "doc_id"))?;
    if doc_id.trim().is_empty() {
        return Err(DocumentError::Invalid("doc_id is empty".into()));
    }

    let raw_pages = raw.pages.ok_or_else(|| DocumentError::missing("bundle", "pages"))?;
    if raw_pages.is_empty() {
        return Err(DocumentError::Invalid("bundle has no pages".into()));
    }
    let mut pages = Vec::with_capacity(raw_pages.len());
    for (i, p) in raw_pages.into_iter().enumerate() {
        let ctx = format!("pages[{i}]");
        let index = p.index.ok_or_else(|| DocumentError::missing(&ctx, "index"))?;
        let width = p.width.ok_or_else(|| DocumentError::missing(&ctx, "width"))?;
        let height = p.height.ok_or_else(|| DocumentError::missing(&ctx, "height"))?;
        if index != i {
            return Err(DocumentError::Invalid(format!("{ctx}: page indices must be contiguous from 0, found {index}")));
        }
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(DocumentError::Invalid(format!("{ctx}: non-positive page size {width}x{height}")));
        }
        pages.push(PageInfo { index, width, height });
    }

    let mut seen = HashSet::new();
    let mut paragraphs = Vec::with_capacity(raw.paragraphs.len());
    for (i, p) in raw.paragraphs.into_iter().enumerate() {
        let ctx = format!("paragraphs[{i}]");
        let id = p.id.ok_or_else(|| DocumentError::missing(&ctx, "id"))?;
        let page = p.page.ok_or_else(|| DocumentError::missing(&ctx, "page"))?;
        let bbox = p.bbox.ok_or_else(|| DocumentError::missing(&ctx, "box"))?;
        let text = p.text.ok_or_else(|| DocumentError::missing(&ctx, "text"))?;
        if !seen.insert(id.clone()) {
            return Err(DocumentError::DuplicateId { kind: "paragraph", id });
        }
        if text.trim().is_empty() {
            return Err(DocumentError::Invalid(format!("paragraph {id}: empty text")));
        }
        check_placement(&format!("paragraph {id}"), page, &bbox, &pages)?;
        paragraphs.push(Paragraph::new(id, page, bbox, text));
    }

    let mut seen = HashSet::new();
    let mut tables = Vec::with_capacity(raw.tables.len());
    for (i, t) in raw.tables.into_iter().enumerate() {
        let ctx = format!("tables[{i}]");
        let id = t.id.ok_or_else(|| DocumentError::missing(&ctx, "id"))?;
        let number = t.number.ok_or_else(|| DocumentError::missing(&ctx, "number"))?;
        let page = t.page.ok_or_else(|| DocumentError::missing(&ctx, "page"))?;
        let bbox = t.bbox.ok_or_else(|| DocumentError::missing(&ctx, "box"))?;
        let html = t.html.ok_or_else(|| DocumentError::missing(&ctx, "html"))?;
        if !seen.insert(id.clone()) {
            return Err(DocumentError::DuplicateId { kind: "table", id });
        }
        check_placement(&format!("table {id}"), page, &bbox, &pages)?;
        let grid = parse_table_grid(&html).map_err(|source| DocumentError::Table { table_id: id.clone(), source })?;
        let header_rows = t.header_rows.unwrap_or(1);
        if header_rows >= grid.n_rows {
            return Err(DocumentError::Invalid(format!(
                "table {id}: header_rows {header_rows} leaves no data rows in a {}-row table",
                grid.n_rows
            )));
        }
        for cell in grid.cells.iter().filter_map(|c| c.bbox.as_ref()) {
            check_placement(&format!("table {id} cell box"), page, cell, &pages)?;
        }
        tables.push(Table::from_grid(id, number, t.caption, page, bbox, header_rows, grid));
    }

    Ok(ParsedDocument { doc_id, pages, paragraphs, tables, content_hash })
}

fn check_placement(what: &str, page: usize, bbox: &Rect, pages: &[PageInfo]) -> Result<(), DocumentError> {
    let info = pages
        .get(page)
        .ok_or_else(|| DocumentError::Invalid(format!("{what}: page {page} out of range ({} pages)", pages.len())))?;
    if !bbox.is_valid() {
        return Err(DocumentError::Invalid(format!("{what}: invalid box {bbox:?}")));
    }
    let dx = info.width * PAGE_OVERHANG;
    let dy = info.height * PAGE_OVERHANG;
    if bbox.x < -dx || bbox.y < -dy || bbox.right() > info.width + dx || bbox.bottom() > info.height + dy {
        return Err(DocumentError::Invalid(format!(
            "{what}: box {bbox:?} lies outside page {page} ({}x{})",
            info.width, info.height
        )));
    }
    Ok(())
}

/// SHA-256 over the bundle re-serialized with sorted keys and no whitespace,
/// so formatting differences do not change the hash.
pub fn content_hash(value: &serde_json::Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    hex::encode(Sha256::digest(out.as_bytes()))
}

fn write_canonical(value: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push('{');
            for (i, (k, v)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push(':');
                write_canonical(v, out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn bundle() -> serde_json::Value {
        json!({
            "doc_id": "d1",
            "pages": [{"index": 0, "width": 612, "height": 792}],
            "paragraphs": [
                {"id": "p1", "page": 0, "box": [50, 50, 500, 60], "text": "Table 1 lists results."},
                {"id": "p2", "page": 0, "box": [50, 120, 500, 60], "text": "Unrelated prose."}
            ],
            "tables": [{
                "id": "T1", "number": 1, "caption": "Results", "page": 0,
                "box": [50, 300, 400, 100],
                "html": "<table><tr><th>Model</th><th>Acc</th></tr><tr><td>A</td><td>85.1</td></tr></table>"
            }]
        })
    }

    fn ingest(v: &serde_json::Value) -> Result<ParsedDocument, DocumentError> {
        ingest_document(v.to_string().as_bytes())
    }

    #[test]
    fn counts_paragraphs_and_tables() {
        let doc = ingest(&bundle()).unwrap();
        assert_eq!((doc.paragraphs.len(), doc.tables.len()), (2, 1));
        let t = &doc.tables[0];
        assert_eq!(t.header_rows, 1);
        assert_eq!(t.cell(CellId::new(1, 1)).unwrap().numeric.as_ref().unwrap().magnitude, 85.1);
        // uniform subdivision of the 400x100 table box
        assert_eq!(t.cell(CellId::new(1, 1)).unwrap().bbox, Rect::new(250.0, 350.0, 200.0, 50.0));
    }

    #[test]
    fn missing_page_height_is_a_validation_error() {
        let mut b = bundle();
        b["pages"][0].as_object_mut().unwrap().remove("height");
        match ingest(&b) {
            Err(DocumentError::MissingField { field: "height", .. }) => {}
            other => panic!("expected missing height, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_table_ids_are_rejected() {
        let mut b = bundle();
        let t = b["tables"][0].clone();
        b["tables"].as_array_mut().unwrap().push(t);
        assert!(matches!(ingest(&b), Err(DocumentError::DuplicateId { kind: "table", .. })));
    }

    #[test]
    fn duplicate_paragraph_ids_and_bad_pages_are_rejected() {
        let mut b = bundle();
        b["paragraphs"][1]["id"] = json!("p1");
        assert!(matches!(ingest(&b), Err(DocumentError::DuplicateId { kind: "paragraph", .. })));

        let mut b = bundle();
        b["paragraphs"][0]["page"] = json!(4);
        assert!(matches!(ingest(&b), Err(DocumentError::Invalid(_))));

        let mut b = bundle();
        b["pages"][0]["index"] = json!(1);
        assert!(matches!(ingest(&b), Err(DocumentError::Invalid(_))));
    }

    #[test]
    fn header_rows_must_leave_data_rows() {
        let mut b = bundle();
        b["tables"][0]["header_rows"] = json!(2);
        assert!(matches!(ingest(&b), Err(DocumentError::Invalid(_))));
    }

    #[test]
    fn bad_table_markup_surfaces_grid_error() {
        let mut b = bundle();
        b["tables"][0]["html"] = json!("<table><tr><td rowspan=5>x</td></tr></table>");
        assert!(matches!(ingest(&b), Err(DocumentError::Table { .. })));
    }

    #[test]
    fn content_hash_ignores_formatting_and_key_order() {
        let b = bundle();
        let pretty = serde_json::to_string_pretty(&b).unwrap();
        let a = ingest_document(pretty.as_bytes()).unwrap();
        let c = ingest(&b).unwrap();
        assert_eq!(a.content_hash, c.content_hash);
        let mut changed = b.clone();
        changed["doc_id"] = json!("d2");
        assert_ne!(ingest(&changed).unwrap().content_hash, c.content_hash);
    }

    #[test]
    fn cell_id_round_trip_and_rejects() {
        assert_eq!("r12c3".parse::<CellId>().unwrap(), CellId::new(12, 3));
        assert_eq!(CellId::new(1, 3).to_string(), "r1c3");
        for bad in ["", "r1", "c1", "r01c1", "rxc1", "r1c", "R1C1", "r1c2x"] {
            assert!(bad.parse::<CellId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn complexity_thresholds() {
        assert_eq!(ComplexityBucket::from_area(6 * 8), ComplexityBucket::Simple);
        assert_eq!(ComplexityBucket::from_area(49), ComplexityBucket::Standard);
        assert_eq!(ComplexityBucket::from_area(90), ComplexityBucket::Standard);
        assert_eq!(ComplexityBucket::from_area(91), ComplexityBucket::Complex);
    }

    #[test]
    fn stub_column_skips_numeric_leading_column() {
        let grid = parse_table_grid(
            "<table><tr><th>Year</th><th>Model</th><th>Params</th></tr>\
             <tr><td>2019</td><td>BERT</td><td>3.4E+08</td></tr>\
             <tr><td>2020</td><td>GPT-3</td><td>1.75E+11</td></tr></table>",
        )
        .unwrap();
        let t = Table::from_grid("T", 1, "", 0, Rect::new(0.0, 0.0, 30.0, 30.0), 1, grid);
        assert_eq!(t.stub_col(), 1);
    }
}
