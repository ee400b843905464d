//! Text-to-table linking for scientific papers.
//!
//! The crate turns a pre-parsed document bundle (pages, paragraphs and tables
//! with page geometry) into a document-level linking schema:
//!
//! ```text
//! Document -> ParagraphTablePair -> Sentence -> Mention -> table target
//! ```
//!
//! The stages are exposed individually so they can be tested and reused:
//!
//! - [`document`]: bundle ingestion, table grids with addressable cells.
//! - [`pairing`]: paragraph reconstruction and table-reference detection.
//! - [`segment`]: rule-based sentence splitting with exact spans.
//! - [`mention`]: typed mention detection (deterministic and remote).
//! - [`resolve`]: grounding mentions to cells, rows, columns and regions.
//! - [`scope`]: merging mention targets into sentence-level highlights.
//! - [`schema`] / [`geometry`]: the serialized schema with page-relative boxes.
//! - [`eval`]: span and alignment scoring against gold annotations.

pub mod document;
pub mod eval;
pub mod geometry;
pub mod inference;
pub mod mention;
pub mod pairing;
pub mod pipeline;
pub mod quantity;
pub mod resolve;
pub mod schema;
pub mod scope;
pub mod segment;
pub mod text;

pub use document::{ingest_document, CellId, ComplexityBucket, ParsedDocument, Table};
pub use pipeline::{build_schema, PipelineOptions, Settings};
pub use schema::LinkingSchema;
pub use text::Span;

use serde::{Deserialize, Serialize};

/// A non-fatal condition recorded while building a schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub stage: String,
    pub message: String,
}

impl Warning {
    pub fn new(stage: &str, message: impl Into<String>) -> Self {
        Self {
            stage: stage.to_string(),
            message: message.into(),
        }
    }
}
