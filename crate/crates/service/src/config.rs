use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tablelink_core::inference::InferenceClient;
use tablelink_core::{PipelineOptions, Settings};
use thiserror::Error;

use crate::transport::HttpTransport;

pub const ENV_INFERENCE_URL: &str = "TABLELINK_INFERENCE_URL";
pub const ENV_INFERENCE_TOKEN: &str = "TABLELINK_INFERENCE_TOKEN";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

/// Remote backend settings. Without a URL the pipeline is fully local.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub url: Option<String>,
    pub token: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_delay_ms: u64,
    pub paragraph_context: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { url: None, token: None, timeout_secs: 30, max_retries: 2, retry_delay_ms: 200, paragraph_context: true }
    }
}

/// Config file layout:
///
/// ```toml
/// [pipeline]
/// approx_tolerance = 0.02
///
/// [inference]
/// timeout_secs = 30
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pipeline: Settings,
    pub inference: InferenceConfig,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_string(), source })
    }

    /// Reads `path`, or returns defaults when it is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: origin.clone(), source })?;
        Self::parse(&text, &origin)
    }

    /// Non-empty `url`/`token` values replace the file's.
    pub fn override_inference(&mut self, url: Option<String>, token: Option<String>) {
        if let Some(url) = url.filter(|u| !u.is_empty()) {
            self.inference.url = Some(url);
        }
        if let Some(token) = token.filter(|t| !t.is_empty()) {
            self.inference.token = Some(token);
        }
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        let client = self.inference.url.as_ref().map(|url| {
            let transport = HttpTransport::new(url, self.inference.token.clone(), Duration::from_secs(self.inference.timeout_secs));
            let mut client = InferenceClient::new(Arc::new(transport));
            client.max_retries = self.inference.max_retries;
            client.retry_delay = Duration::from_millis(self.inference.retry_delay_ms);
            client.paragraph_context = self.inference.paragraph_context;
            client
        });
        PipelineOptions { settings: self.pipeline.clone(), client }
    }
}
