//! Command-line tool and HTTP service around `tablelink-core`.
//!
//! Schemas are cached as files keyed by the bundle's content hash and the
//! pipeline options fingerprint.

pub mod config;
pub mod http;
pub mod jobs;
pub mod service;
pub mod store;
pub mod transport;

pub use config::Config;
pub use service::{cache_key, Fetch, Service};
