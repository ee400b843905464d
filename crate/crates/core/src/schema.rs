//! The serialized linking schema and its page-relative geometry.
//!
//! Layout (field order is fixed, fractions carry exactly 6 decimals):
//!
//! ```text
//! {"version":"1","doc_id","content_hash","pairs":[
//!   {"paragraph_id","table_id","table_number","reference_spans","paragraph_boxes","table_box",
//!    "sentences":[{"id","span","text","sentence_boxes",
//!                  "regions":[{"granularity",...,"boxes"}],
//!                  "mentions":[{"id","span","text","type","source","mechanism","evidence","target","boxes"}]}]}],
//!  "warnings":[...]}
//! ```
//!
//! Gold annotation files use the same layout with `"gold": true`; boxes may
//! be omitted there.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{CellId, PageInfo, ParsedDocument, Table};
use crate::geometry::{normalize_box, GeometryError, NormalizedBox, Rect};
use crate::mention::{MentionSource, MentionType};
use crate::resolve::{AlignmentTarget, Alternative, Evidence, Mechanism};
use crate::text::{char_len, slice, Span};
use crate::Warning;

pub const SCHEMA_VERSION: &str = "1";

/// A fraction written with exactly six decimals.
pub struct Fixed6(pub f64);

impl Serialize for Fixed6 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let v = crate::geometry::quantize6(self.0);
        let raw = serde_json::value::RawValue::from_string(format!("{v:.6}")).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema has no version field")]
    MissingVersion,
    #[error("unsupported schema version {0:?}")]
    UnknownVersion(String),
    #[error("schema refers to unknown {kind} {id:?}")]
    UnknownId { kind: &'static str, id: String },
    #[error("{0}")]
    Inconsistent(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingSchema {
    pub version: String,
    pub doc_id: String,
    pub content_hash: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub gold: bool,
    pub pairs: Vec<PairEntry>,
    #[serde(default)]
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub paragraph_id: String,
    pub table_id: String,
    pub table_number: u32,
    pub reference_spans: Vec<Span>,
    #[serde(default)]
    pub paragraph_boxes: Vec<NormalizedBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_box: Option<NormalizedBox>,
    pub sentences: Vec<SentenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEntry {
    pub id: String,
    /// Character span within the paragraph text.
    pub span: Span,
    pub text: String,
    #[serde(default)]
    pub sentence_boxes: Vec<NormalizedBox>,
    #[serde(default)]
    pub regions: Vec<RegionEntry>,
    pub mentions: Vec<MentionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    #[serde(flatten)]
    pub target: AlignmentTarget,
    #[serde(default)]
    pub boxes: Vec<NormalizedBox>,
}

/// A detected mention and, when it was grounded, its alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionEntry {
    pub id: String,
    /// Character span within the sentence text.
    pub span: Span,
    pub text: String,
    #[serde(rename = "type")]
    pub mtype: MentionType,
    #[serde(default = "default_source")]
    pub source: MentionSource,
    #[serde(default)]
    pub mechanism: Option<Mechanism>,
    #[serde(default)]
    pub evidence: Option<Evidence>,
    #[serde(default)]
    pub target: Option<AlignmentTarget>,
    #[serde(default)]
    pub boxes: Vec<NormalizedBox>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<Alternative>,
}

fn default_source() -> MentionSource {
    MentionSource::Deterministic
}

impl LinkingSchema {
    /// Canonical compact JSON bytes.
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("schema serializes")
    }

    pub fn encode_pretty(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("schema serializes")
    }

    /// Parses schema bytes, rejecting unknown versions.
    pub fn decode(bytes: &[u8]) -> Result<Self, SchemaError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)?;
        match value.get("version") {
            None => return Err(SchemaError::MissingVersion),
            Some(serde_json::Value::String(v)) if v == SCHEMA_VERSION => {}
            Some(other) => return Err(SchemaError::UnknownVersion(other.as_str().unwrap_or(&other.to_string()).to_string())),
        }
        Ok(serde_json::from_value(value)?)
    }

    /// Decodes and checks every id, span and target against `doc`.
    pub fn decode_checked(bytes: &[u8], doc: &ParsedDocument, paragraphs: &[crate::document::Paragraph]) -> Result<Self, SchemaError> {
        let schema = Self::decode(bytes)?;
        schema.validate_against(doc, paragraphs)?;
        Ok(schema)
    }

    /// Referential integrity against the source document. `paragraphs` are
    /// the merged paragraphs the schema was built from.
    pub fn validate_against(&self, doc: &ParsedDocument, paragraphs: &[crate::document::Paragraph]) -> Result<(), SchemaError> {
        if self.doc_id != doc.doc_id {
            return Err(SchemaError::UnknownId { kind: "document", id: self.doc_id.clone() });
        }
        for pair in &self.pairs {
            let para = paragraphs
                .iter()
                .find(|p| p.id == pair.paragraph_id)
                .ok_or_else(|| SchemaError::UnknownId { kind: "paragraph", id: pair.paragraph_id.clone() })?;
            let table = doc
                .table(&pair.table_id)
                .ok_or_else(|| SchemaError::UnknownId { kind: "table", id: pair.table_id.clone() })?;
            for s in &pair.sentences {
                if slice(&para.text, s.span) != Some(s.text.as_str()) {
                    return Err(SchemaError::Inconsistent(format!("sentence {} does not match its paragraph span", s.id)));
                }
                for m in &s.mentions {
                    if slice(&s.text, m.span) != Some(m.text.as_str()) {
                        return Err(SchemaError::Inconsistent(format!("mention {} does not match its sentence span", m.id)));
                    }
                    if let Some(t) = &m.target {
                        t.validate(table).map_err(|e| SchemaError::Inconsistent(format!("mention {}: {e}", m.id)))?;
                    }
                }
                for r in &s.regions {
                    r.target.validate(table).map_err(|e| SchemaError::Inconsistent(format!("sentence {}: {e}", s.id)))?;
                }
            }
        }
        Ok(())
    }

    pub fn mention_count(&self) -> usize {
        self.pairs.iter().flat_map(|p| &p.sentences).map(|s| s.mentions.len()).sum()
    }
}

/// Page boxes for a target: one union box for rows, columns and regions,
/// one box per cell for cell sets.
pub fn target_to_boxes(target: &AlignmentTarget, table: &Table, page: &PageInfo) -> Result<Vec<NormalizedBox>, GeometryError> {
    let cells = target.covered_cells(table);
    let rects: Vec<Rect> = cells.iter().filter_map(|id| table.cell(*id)).map(|c| c.bbox).collect();
    match target {
        AlignmentTarget::Cell { .. } => rects.iter().map(|r| normalize_box(r, page).map(|b| b.quantized())).collect(),
        _ => match Rect::union_all(&rects) {
            Some(u) => Ok(vec![normalize_box(&u, page)?.quantized()]),
            None => Ok(Vec::new()),
        },
    }
}

/// Approximate boxes for a character span of a paragraph: each layout
/// fragment the span touches contributes a full-width horizontal band
/// proportional to the share of the fragment's characters it covers.
pub fn span_boxes(paragraph: &crate::document::Paragraph, span: Span, pages: &[PageInfo]) -> Result<Vec<NormalizedBox>, GeometryError> {
    let mut out = Vec::new();
    for frag in &paragraph.fragments {
        let overlap = frag.span.intersection_len(&span);
        let len = frag.span.len();
        if overlap == 0 || len == 0 {
            continue;
        }
        let Some(page) = pages.get(frag.page) else { continue };
        let start = span.start.max(frag.span.start) - frag.span.start;
        let end = start + overlap;
        let b = frag.bbox;
        let band = Rect::new(b.x, b.y + b.h * start as f64 / len as f64, b.w, b.h * (end - start) as f64 / len as f64);
        out.push(normalize_box(&band, page)?.quantized());
    }
    Ok(out)
}

/// Box of a whole paragraph per layout fragment.
pub fn paragraph_boxes(paragraph: &crate::document::Paragraph, pages: &[PageInfo]) -> Result<Vec<NormalizedBox>, GeometryError> {
    span_boxes(paragraph, Span::new(0, char_len(&paragraph.text)), pages)
}

/// Table grid with page-relative boxes, as served to the reader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableView {
    pub id: String,
    pub number: u32,
    pub caption: String,
    pub page: usize,
    #[serde(rename = "box")]
    pub bbox: NormalizedBox,
    pub n_rows: usize,
    pub n_cols: usize,
    pub header_rows: usize,
    pub cells: Vec<CellView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellView {
    pub id: CellId,
    pub row: usize,
    pub col: usize,
    pub row_span: usize,
    pub col_span: usize,
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: NormalizedBox,
}

pub fn table_view(table: &Table, page: &PageInfo) -> Result<TableView, GeometryError> {
    let cells = table
        .cells
        .iter()
        .map(|c| {
            Ok(CellView {
                id: c.id,
                row: c.row,
                col: c.col,
                row_span: c.row_span,
                col_span: c.col_span,
                text: c.text.clone(),
                bbox: normalize_box(&c.bbox, page)?.quantized(),
            })
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    Ok(TableView {
        id: table.id.clone(),
        number: table.number,
        caption: table.caption.clone(),
        page: table.page,
        bbox: normalize_box(&table.bbox, page)?.quantized(),
        n_rows: table.n_rows,
        n_cols: table.n_cols,
        header_rows: table.header_rows,
        cells,
    })
}
