use std::time::Duration;

use tablelink_core::inference::{InferenceTransport, TransportError};
use ureq::Agent;

/// JSON-over-HTTP transport for the remote inference backend.
pub struct HttpTransport {
    agent: Agent,
    url: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(url: &str, token: Option<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self { agent, url: url.to_string(), token }
    }
}

impl InferenceTransport for HttpTransport {
    fn post(&self, body: &str) -> Result<String, TransportError> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Connect(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| TransportError::Connect(e.to_string()))?;
        if (200..300).contains(&status) {
            Ok(text)
        } else {
            Err(TransportError::Status { status, body: text })
        }
    }
}
