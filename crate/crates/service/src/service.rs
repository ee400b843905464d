use std::collections::HashMap;
use std::io;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use tablelink_core::document::DocumentError;
use tablelink_core::schema::{table_view, TableView};
use tablelink_core::{build_schema, ingest_document, ParsedDocument, PipelineOptions};
use thiserror::Error;

use crate::jobs::{JobRecord, JobRegistry, JobState, Registration};
use crate::store::SchemaStore;

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("invalid bundle: {0}")]
    Invalid(#[from] DocumentError),
}

/// Result of a schema fetch.
#[derive(Debug, Clone, PartialEq)]
pub enum Fetch {
    Ready { bytes: Vec<u8>, etag: String },
    InProgress(JobRecord),
    Failed(JobRecord),
    NotFound,
}

/// Cache key for a bundle under given options.
pub fn cache_key(content_hash: &str, fingerprint: &str) -> String {
    let mut h = Sha256::new();
    h.update(content_hash.as_bytes());
    h.update(b":");
    h.update(fingerprint.as_bytes());
    hex::encode(h.finalize())
}

/// Builds, caches and serves schemas. Builds run on background threads; at
/// most one build runs per cache key.
pub struct Service {
    options: PipelineOptions,
    fingerprint: String,
    store: SchemaStore,
    jobs: JobRegistry,
    docs: RwLock<HashMap<String, Arc<ParsedDocument>>>,
}

impl Service {
    pub fn new(options: PipelineOptions, data_dir: impl Into<PathBuf>) -> io::Result<Arc<Self>> {
        let data_dir = data_dir.into();
        Ok(Arc::new(Self {
            fingerprint: options.fingerprint(),
            options,
            store: SchemaStore::open(data_dir.join("schemas"))?,
            jobs: JobRegistry::new(),
            docs: RwLock::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &SchemaStore {
        &self.store
    }

    /// Validates a bundle and starts its build unless the schema is cached
    /// or already being built.
    pub fn submit(self: &Arc<Self>, bundle: &[u8]) -> Result<JobRecord, SubmitError> {
        let doc = Arc::new(ingest_document(bundle)?);
        let key = cache_key(&doc.content_hash, &self.fingerprint);
        self.docs.write().expect("docs lock").insert(doc.doc_id.clone(), doc.clone());
        match self.jobs.register(&key, &doc.doc_id, self.store.contains(&key)) {
            Registration::Existing(job) => Ok(job),
            Registration::Started(job) => {
                let this = Arc::clone(self);
                let job_id = job.job_id.clone();
                std::thread::spawn(move || this.build(&job_id, &doc, &key));
                Ok(job)
            }
        }
    }

    fn build(&self, job_id: &str, doc: &ParsedDocument, key: &str) {
        if let Err(e) = self.jobs.advance(job_id, JobState::Running, None, None) {
            tracing::error!(error = %e, "job vanished before its build");
            return;
        }
        let outcome = build_schema(doc, &self.options)
            .map_err(|e| e.to_string())
            .and_then(|schema| self.store.put(key, &schema.encode()).map_err(|e| format!("cannot store schema: {e}")));
        let result = match outcome {
            Ok(()) => {
                tracing::info!(doc = %doc.doc_id, key, "schema published");
                self.jobs.advance(job_id, JobState::Done, Some(key.to_string()), None)
            }
            Err(message) => {
                tracing::warn!(doc = %doc.doc_id, error = %message, "build failed");
                self.jobs.advance(job_id, JobState::Failed, None, Some(message))
            }
        };
        if let Err(e) = result {
            tracing::error!(error = %e, "job transition rejected");
        }
    }

    pub fn job(&self, job_id: &str) -> Option<JobRecord> {
        self.jobs.get(job_id)
    }

    pub fn status(&self, doc_id: &str) -> Option<JobRecord> {
        self.jobs.for_doc(doc_id)
    }

    /// Polls a job until it finishes or `timeout` passes.
    pub fn wait(&self, job_id: &str, timeout: Duration) -> Option<JobRecord> {
        let deadline = Instant::now() + timeout;
        loop {
            let job = self.jobs.get(job_id)?;
            if job.state.is_terminal() || Instant::now() >= deadline {
                return Some(job);
            }
            std::thread::sleep(Duration::from_millis(2));
        }
    }

    pub fn fetch_schema(&self, doc_id: &str) -> io::Result<Fetch> {
        let Some(job) = self.jobs.for_doc(doc_id) else { return Ok(Fetch::NotFound) };
        Ok(match job.state {
            JobState::Pending | JobState::Running => Fetch::InProgress(job),
            JobState::Failed => Fetch::Failed(job),
            JobState::Done => {
                let key = job.schema_id.clone().unwrap_or_default();
                match self.store.get(&key)? {
                    Some(bytes) => Fetch::Ready { bytes, etag: format!("\"{key}\"") },
                    None => Fetch::NotFound,
                }
            }
        })
    }

    /// Grid and boxes of one table of a submitted document.
    pub fn table(&self, doc_id: &str, table_id: &str) -> Option<TableView> {
        let doc = self.docs.read().expect("docs lock").get(doc_id)?.clone();
        let table = doc.table(table_id)?;
        table_view(table, doc.page(table.page)?).ok()
    }
}
