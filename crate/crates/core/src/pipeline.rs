//! End-to-end schema construction.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::document::{ingest_document, DocumentError, Paragraph, ParsedDocument};
use crate::geometry::{normalize_box, GeometryError};
use crate::inference::{detect_mentions_remote, InferenceClient};
use crate::mention::{merge_backends, CueLexicon, Detector};
use crate::pairing::{build_pairs, merge_text_chunks};
use crate::resolve::{resolve_sentence, ResolveSettings};
use crate::schema::{paragraph_boxes, span_boxes, target_to_boxes, LinkingSchema, MentionEntry, PairEntry, RegionEntry, SentenceEntry, SCHEMA_VERSION};
use crate::scope::merge_alignments;
use crate::segment::{segment_sentences, Abbreviations};
use crate::Warning;

/// Tolerances and lexicons. Loadable from a config file; defaults use the
/// bundled lexicon assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Relative tolerance of the approximate numeric tier.
    pub approx_tolerance: f64,
    /// Covered share at which a row or column is promoted to a full line.
    pub promotion_threshold: f64,
    /// Tokens after a comparison cue within which a number is derived.
    pub cue_window: usize,
    /// Longest n-gram tried when matching entities.
    pub max_ngram: usize,
    /// Ranked alternatives kept per mention.
    pub max_alternatives: usize,
    /// Look derived values up directly when no two-cell arithmetic fits.
    pub derived_lookup_fallback: bool,
    /// Protected abbreviations, one entry per item.
    pub abbreviations: Vec<String>,
    /// Comparison cues, one phrase per item.
    pub cues: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        let lines = |s: &str| {
            s.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect()
        };
        Self {
            approx_tolerance: 0.02,
            promotion_threshold: crate::scope::DEFAULT_PROMOTION,
            cue_window: 4,
            max_ngram: 6,
            max_alternatives: 4,
            derived_lookup_fallback: true,
            abbreviations: lines(include_str!("../assets/abbreviations.txt")),
            cues: lines(include_str!("../assets/cues.txt")),
        }
    }
}

impl Settings {
    pub fn abbreviations(&self) -> Abbreviations {
        Abbreviations::parse(&self.abbreviations.join("\n"))
    }

    pub fn detector(&self) -> Detector {
        Detector { cues: CueLexicon::parse(&self.cues.join("\n")), max_ngram: self.max_ngram, cue_window: self.cue_window }
    }

    pub fn resolve(&self) -> ResolveSettings {
        ResolveSettings {
            approx_tolerance: self.approx_tolerance,
            max_alternatives: self.max_alternatives,
            derived_lookup_fallback: self.derived_lookup_fallback,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub settings: Settings,
    /// Optional remote backend; deterministic detection always runs.
    pub client: Option<InferenceClient>,
}

impl PipelineOptions {
    /// Hash of everything that can change the output for a given bundle.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.settings).expect("settings serialize"));
        h.update(if self.client.is_some() { b"remote".as_slice() } else { b"local".as_slice() });
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ingests bundle bytes and builds their schema.
pub fn link_bundle(bundle: &[u8], options: &PipelineOptions) -> Result<(ParsedDocument, LinkingSchema), PipelineError> {
    let doc = ingest_document(bundle)?;
    let schema = build_schema(&doc, options)?;
    Ok((doc, schema))
}

/// Paragraphs of `doc` after merging split layout blocks.
pub fn document_paragraphs(doc: &ParsedDocument) -> Vec<Paragraph> {
    merge_text_chunks(&doc.paragraphs)
}

/// Runs pairing, segmentation, detection, resolution and scope merging.
///
/// A failing remote backend is used for no further calls; the schema records
/// a warning and continues with deterministic results.
pub fn build_schema(doc: &ParsedDocument, options: &PipelineOptions) -> Result<LinkingSchema, PipelineError> {
    let settings = &options.settings;
    let abbreviations = settings.abbreviations();
    let detector = settings.detector();
    let resolve_settings = settings.resolve();
    let paragraphs = document_paragraphs(doc);
    let (pairs, mut warnings) = build_pairs(&paragraphs, &doc.tables);
    let mut client = options.client.as_ref();

    let mut entries = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let para = paragraphs.iter().find(|p| p.id == pair.paragraph_id).expect("pair from these paragraphs");
        let table = doc.table(&pair.table_id).expect("pair from these tables");
        let table_page = &doc.pages[table.page];

        let mut sentences = Vec::new();
        for sentence in segment_sentences(&para.id, &para.text, &abbreviations) {
            let mut mentions = detector.detect(&sentence, table);
            if let Some(c) = client {
                match detect_mentions_remote(&sentence, Some(&para.text), table, c) {
                    Ok(remote) => mentions = merge_backends(&sentence.id, mentions, remote),
                    Err(e) => {
                        tracing::warn!(error = %e, "remote detection failed, continuing deterministically");
                        warnings.push(Warning::new("detection", format!("remote backend disabled: {e}")));
                        client = None;
                    }
                }
            }
            let (alignments, resolve_warnings) = resolve_sentence(&sentence.text, &mentions, table, client, &resolve_settings);
            if resolve_warnings.iter().any(|w| w.message.starts_with("remote backend failed")) {
                client = None;
            }
            warnings.extend(resolve_warnings);
            let merged = merge_alignments(&sentence.id, &alignments, table, settings.promotion_threshold);

            let mut mention_entries = Vec::with_capacity(mentions.len());
            for m in &mentions {
                let a = alignments.iter().find(|a| a.mention_id == m.id);
                let boxes = match a {
                    Some(a) => target_to_boxes(&a.target, table, table_page)?,
                    None => Vec::new(),
                };
                mention_entries.push(MentionEntry {
                    id: m.id.clone(),
                    span: m.span,
                    text: m.text.clone(),
                    mtype: m.mtype,
                    source: m.source,
                    mechanism: a.map(|a| a.mechanism),
                    evidence: a.map(|a| a.evidence.clone()),
                    target: a.map(|a| a.target.clone()),
                    boxes,
                    alternatives: a.map(|a| a.alternatives.clone()).unwrap_or_default(),
                });
            }
            let regions = merged
                .regions
                .into_iter()
                .map(|target| Ok(RegionEntry { boxes: target_to_boxes(&target, table, table_page)?, target }))
                .collect::<Result<Vec<_>, GeometryError>>()?;
            sentences.push(SentenceEntry {
                id: sentence.id.clone(),
                span: sentence.span,
                sentence_boxes: span_boxes(para, sentence.span, &doc.pages)?,
                text: sentence.text,
                regions,
                mentions: mention_entries,
            });
        }

        entries.push(PairEntry {
            paragraph_id: pair.paragraph_id,
            table_id: pair.table_id,
            table_number: pair.table_number,
            reference_spans: pair.reference_spans,
            paragraph_boxes: paragraph_boxes(para, &doc.pages)?,
            table_box: Some(normalize_box(&table.bbox, table_page)?.quantized()),
            sentences,
        });
    }

    Ok(LinkingSchema {
        version: SCHEMA_VERSION.to_string(),
        doc_id: doc.doc_id.clone(),
        content_hash: doc.content_hash.clone(),
        gold: false,
        pairs: entries,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn bundle(paragraph: &str) -> Vec<u8> {
        json!({
            "doc_id": "d",
            "pages": [{"index": 0, "width": 600, "height": 800}],
            "paragraphs": [{"id": "p1", "page": 0, "box": [50, 50, 500, 100], "text": paragraph}],
            "tables": [{
                "id": "T1", "number": 1, "caption": "", "page": 0, "box": [50, 300, 300, 90],
                "html": "<table><tr><th>Model</th><th>Acc</th></tr><tr><td>Ours</td><td>85.1</td></tr><tr><td>Base</td><td>80.0</td></tr></table>"
            }]
        })
        .to_string()
        .into_bytes()
    }

    #[test]
    fn no_references_means_no_pairs() {
        let (_, schema) = link_bundle(&bundle("Nothing cites anything."), &PipelineOptions::default()).unwrap();
        assert!(schema.pairs.is_empty());
        assert_eq!(schema.version, "1");
    }

    #[test]
    fn builds_are_byte_identical() {
        let b = bundle("Table 1 shows Ours reaches 85.1, beating Base by 5.1 points.");
        let (_, a) = link_bundle(&b, &PipelineOptions::default()).unwrap();
        let (_, c) = link_bundle(&b, &PipelineOptions::default()).unwrap();
        assert_eq!(a.encode(), c.encode());
        let s = &a.pairs[0].sentences[0];
        assert!(s.mentions.iter().any(|m| m.text == "5.1" && m.target.is_some()));
    }

    #[test]
    fn fingerprint_tracks_settings() {
        let a = PipelineOptions::default();
        let mut b = PipelineOptions::default();
        b.settings.approx_tolerance = 0.05;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), PipelineOptions::default().fingerprint());
    }
}
