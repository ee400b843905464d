use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// Pending -> Running -> Done | Failed. A cache hit may go straight to
    /// Done.
    pub fn can_advance_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Pending, JobState::Running)
                | (JobState::Pending, JobState::Done)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub doc_id: String,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum JobError {
    #[error("unknown job {0}")]
    Unknown(String),
    #[error("job {job_id} cannot move from {from:?} to {to:?}")]
    Backward { job_id: String, from: JobState, to: JobState },
}

/// Outcome of registering a build.
#[derive(Debug, Clone, PartialEq)]
pub enum Registration {
    /// A new job the caller must build.
    Started(JobRecord),
    /// An existing job for the same key, possibly still running.
    Existing(JobRecord),
}

#[derive(Debug, Default)]
struct Inner {
    next_id: u64,
    jobs: HashMap<String, JobRecord>,
    by_key: HashMap<String, String>,
    by_doc: HashMap<String, String>,
}

/// Job table. Every transition happens under one lock.
#[derive(Debug, Default)]
pub struct JobRegistry {
    inner: Mutex<Inner>,
}

impl JobRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the live or finished job for `key` unless it failed, else
    /// creates one: `Done` when `cached`, `Pending` otherwise.
    pub fn register(&self, key: &str, doc_id: &str, cached: bool) -> Registration {
        let mut inner = self.inner.lock().expect("registry lock");
        if let Some(job) = inner.by_key.get(key).and_then(|id| inner.jobs.get(id)).cloned() {
            if job.state != JobState::Failed && (job.state != JobState::Done || cached) {
                inner.by_doc.insert(doc_id.to_string(), job.job_id.clone());
                return Registration::Existing(job);
            }
        }
        inner.next_id += 1;
        let job = JobRecord {
            job_id: format!("job-{}", inner.next_id),
            doc_id: doc_id.to_string(),
            state: if cached { JobState::Done } else { JobState::Pending },
            schema_id: cached.then(|| key.to_string()),
            error: None,
        };
        inner.jobs.insert(job.job_id.clone(), job.clone());
        inner.by_key.insert(key.to_string(), job.job_id.clone());
        inner.by_doc.insert(doc_id.to_string(), job.job_id.clone());
        if cached {
            Registration::Existing(job)
        } else {
            Registration::Started(job)
        }
    }

    pub fn advance(&self, job_id: &str, next: JobState, schema_id: Option<String>, error: Option<String>) -> Result<JobRecord, JobError> {
        let mut inner = self.inner.lock().expect("registry lock");
        let job = inner.jobs.get_mut(job_id).ok_or_else(|| JobError::Unknown(job_id.to_string()))?;
        if !job.state.can_advance_to(next) {
            return Err(JobError::Backward { job_id: job_id.to_string(), from: job.state, to: next });
        }
        job.state = next;
        if schema_id.is_some() {
            job.schema_id = schema_id;
        }
        if error.is_some() {
            job.error = error;
        }
        Ok(job.clone())
    }

    pub fn get(&self, job_id: &str) -> Option<JobRecord> {
        self.inner.lock().expect("registry lock").jobs.get(job_id).cloned()
    }

    /// Latest job submitted for `doc_id`.
    pub fn for_doc(&self, doc_id: &str) -> Option<JobRecord> {
        let inner = self.inner.lock().expect("registry lock");
        inner.by_doc.get(doc_id).and_then(|id| inner.jobs.get(id)).cloned()
    }
}
