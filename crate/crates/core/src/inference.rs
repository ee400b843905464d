//! Remote inference backend contract.
//!
//! The wire format is plain JSON. Transports are pluggable so the pipeline
//! can be tested without a network; the HTTP transport lives in the service
//! crate.
//!
//! Detect request: `{"sentence", "table_context", "task": "detect"}` plus an
//! optional `"paragraph"` when paragraph context is enabled. Detect response:
//! `{"mentions": [{"text", "start", "end", "type"}]}`.
//!
//! Resolve request: `{"sentence", "mention": {"text", "start", "end", "type"},
//! "table_context", "task": "resolve"}`. Resolve response:
//! `{"target": {"granularity", ...}}` or `{"target": null}`.

use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::document::Table;
use crate::mention::{validate_mention_spans, Candidate, Mention, MentionSource, MentionType};
use crate::resolve::AlignmentTarget;
use crate::segment::Sentence;
use crate::text::Span;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("inference backend unavailable after {attempts} attempts: {last}")]
    Unavailable { attempts: u32, last: TransportError },
    #[error("malformed inference response: {message}")]
    Protocol { message: String, raw: String },
}

/// Sends one JSON request body and returns the response body.
pub trait InferenceTransport: Send + Sync {
    fn post(&self, body: &str) -> Result<String, TransportError>;
}

impl<F> InferenceTransport for F
where
    F: Fn(&str) -> Result<String, TransportError> + Send + Sync,
{
    fn post(&self, body: &str) -> Result<String, TransportError> {
        self(body)
    }
}

#[derive(Clone)]
pub struct InferenceClient {
    transport: Arc<dyn InferenceTransport>,
    /// Retries after the first failed attempt.
    pub max_retries: u32,
    pub retry_delay: Duration,
    /// Send the whole paragraph alongside the sentence.
    pub paragraph_context: bool,
}

impl std::fmt::Debug for InferenceClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InferenceClient")
            .field("max_retries", &self.max_retries)
            .field("paragraph_context", &self.paragraph_context)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct WireMention {
    text: String,
    start: Option<usize>,
    end: Option<usize>,
    #[serde(rename = "type")]
    mtype: String,
}

#[derive(Deserialize)]
struct DetectResponse {
    mentions: Vec<WireMention>,
}

#[derive(Deserialize)]
struct ResolveResponse {
    target: Option<AlignmentTarget>,
}

impl InferenceClient {
    pub fn new(transport: Arc<dyn InferenceTransport>) -> Self {
        Self { transport, max_retries: 2, retry_delay: Duration::from_millis(200), paragraph_context: true }
    }

    fn call(&self, body: &Value) -> Result<String, InferenceError> {
        let body = body.to_string();
        let attempts = self.max_retries + 1;
        let mut last = TransportError::Timeout;
        for attempt in 0..attempts {
            match self.transport.post(&body) {
                Ok(resp) => return Ok(resp),
                Err(e) => {
                    tracing::debug!(attempt, error = %e, "inference call failed");
                    last = e;
                    if attempt + 1 < attempts && !self.retry_delay.is_zero() {
                        std::thread::sleep(self.retry_delay);
                    }
                }
            }
        }
        Err(InferenceError::Unavailable { attempts, last })
    }

    /// Raw mention candidates for one sentence; not yet span-validated.
    pub fn detect(&self, sentence: &str, paragraph: Option<&str>, table_context: &Value) -> Result<Vec<Candidate>, InferenceError> {
        let mut body = json!({"sentence": sentence, "table_context": table_context, "task": "detect"});
        if self.paragraph_context {
            if let Some(p) = paragraph {
                body["paragraph"] = json!(p);
                body["paragraph_context"] = json!(true);
            }
        }
        let raw = self.call(&body)?;
        let parsed: DetectResponse = serde_json::from_str(&raw)
            .map_err(|e| InferenceError::Protocol { message: e.to_string(), raw: raw.clone() })?;
        Ok(parsed
            .mentions
            .into_iter()
            .filter_map(|m| {
                let Some(mtype) = MentionType::from_wire(&m.mtype) else {
                    tracing::debug!(mtype = %m.mtype, "dropping candidate of unknown type");
                    return None;
                };
                let span = match (m.start, m.end) {
                    (Some(s), Some(e)) if s <= e => Some(Span::new(s, e)),
                    _ => None,
                };
                Some(Candidate::new(m.text, span, mtype))
            })
            .collect())
    }

    /// Remote grounding of one mention. `Ok(None)` means the backend declined.
    pub fn resolve(&self, sentence: &str, mention: &Mention, table_context: &Value) -> Result<Option<AlignmentTarget>, InferenceError> {
        let body = json!({
            "sentence": sentence,
            "mention": {
                "text": mention.text,
                "start": mention.span.start,
                "end": mention.span.end,
                "type": mention.mtype.as_str(),
            },
            "table_context": table_context,
            "task": "resolve",
        });
        let raw = self.call(&body)?;
        let parsed: ResolveResponse = serde_json::from_str(&raw)
            .map_err(|e| InferenceError::Protocol { message: e.to_string(), raw: raw.clone() })?;
        Ok(parsed.target)
    }
}

/// Serialized table handed to the backend: grid size, header rows and every
/// cell with its id, spans and text.
pub fn table_context(table: &Table) -> Value {
    let cells: Vec<Value> = table
        .cells
        .iter()
        .map(|c| json!({"id": c.id.to_string(), "row_span": c.row_span, "col_span": c.col_span, "text": c.text}))
        .collect();
    json!({
        "id": table.id,
        "number": table.number,
        "caption": table.caption,
        "n_rows": table.n_rows,
        "n_cols": table.n_cols,
        "header_rows": table.header_rows,
        "cells": cells,
    })
}

/// Remote detection for one sentence, with every candidate span-validated.
pub fn detect_mentions_remote(
    sentence: &Sentence,
    paragraph: Option<&str>,
    table: &Table,
    client: &InferenceClient,
) -> Result<Vec<Mention>, InferenceError> {
    let candidates = client.detect(&sentence.text, paragraph, &table_context(table))?;
    Ok(validate_mention_spans(sentence, &candidates, MentionSource::Remote))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn sentence(text: &str) -> Sentence {
        Sentence { id: "p.s0".into(), paragraph_id: "p".into(), span: Span::new(0, text.chars().count()), text: text.into() }
    }

    fn table() -> Table {
        let grid = crate::document::parse_table_grid("<table><tr><th>M</th></tr><tr><td>a</td></tr></table>").unwrap();
        Table::from_grid("T1", 1, "", 0, crate::geometry::Rect::new(0.0, 0.0, 1.0, 1.0), 1, grid)
    }

    fn client(f: impl Fn(&str) -> Result<String, TransportError> + Send + Sync + 'static) -> InferenceClient {
        let mut c = InferenceClient::new(Arc::new(f));
        c.retry_delay = Duration::ZERO;
        c
    }

    #[test]
    fn keeps_valid_remote_candidate() {
        let c = client(|body| {
            let req: Value = serde_json::from_str(body).unwrap();
            assert_eq!(req["task"], "detect");
            Ok(r#"{"mentions":[{"text":"the strongest baseline","start":14,"end":36,"type":"inferred_entity"},
                               {"text":"13%","start":0,"end":3,"type":"raw_value"},
                               {"text":"ours","type":"mystery"}]}"#
                .into())
        });
        let s = sentence("Compared with the strongest baseline, ours wins.");
        let out = detect_mentions_remote(&s, None, &table(), &c).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].mtype, MentionType::InferredEntity);
        assert_eq!(out[0].source, MentionSource::Remote);
    }

    #[test]
    fn malformed_body_is_protocol_error_with_payload() {
        let c = client(|_| Ok("<html>oops</html>".into()));
        match detect_mentions_remote(&sentence("x"), None, &table(), &c) {
            Err(InferenceError::Protocol { raw, .. }) => assert_eq!(raw, "<html>oops</html>"),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }

    #[test]
    fn retries_then_gives_up() {
        let calls = Arc::new(AtomicU32::new(0));
        let seen = calls.clone();
        let c = client(move |_| {
            seen.fetch_add(1, Ordering::SeqCst);
            Err(TransportError::Connect("refused".into()))
        });
        let err = detect_mentions_remote(&sentence("x"), None, &table(), &c).unwrap_err();
        assert!(matches!(err, InferenceError::Unavailable { attempts: 3, .. }));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn recovers_after_transient_failure() {
        let calls = Arc::new(AtomicU32::new(0));
        let seen = calls.clone();
        let c = client(move |_| {
            if seen.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(TransportError::Timeout)
            } else {
                Ok(r#"{"mentions":[]}"#.into())
            }
        });
        assert!(detect_mentions_remote(&sentence("x"), None, &table(), &c).unwrap().is_empty());
    }

    #[test]
    fn paragraph_context_flagged() {
        let c = client(|body| {
            let req: Value = serde_json::from_str(body).unwrap();
            assert_eq!(req["paragraph"], "Full paragraph. x");
            assert_eq!(req["paragraph_context"], true);
            Ok(r#"{"mentions":[]}"#.into())
        });
        detect_mentions_remote(&sentence("x"), Some("Full paragraph. x"), &table(), &c).unwrap();
    }
}
