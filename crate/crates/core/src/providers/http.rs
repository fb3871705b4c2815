//! Minimal JSON-over-HTTP transport used by the remote backend.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

/// A POST request with a JSON body.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub bearer: Option<String>,
    pub body: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: Vec<u8>,
}

/// `Err` means no HTTP status was obtained (DNS, connect, timeout, ...).
pub trait Transport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> Result<HttpReply, String>;
}

static REQUESTS_SENT: AtomicU64 = AtomicU64::new(0);

/// Requests attempted by [`UreqTransport`] in this process.
pub fn requests_sent() -> u64 {
    REQUESTS_SENT.load(Ordering::SeqCst)
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpReply, String> {
        REQUESTS_SENT.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.post(&request.url).header("Content-Type", "application/json");
        if let Some(token) = &request.bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let body = serde_json::to_vec(&request.body).map_err(|e| e.to_string())?;
        let mut resp = req.send(&body[..]).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

/// Refuses every request. Used where a run must stay offline.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenyAllTransport;

impl Transport for DenyAllTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpReply, String> {
        Err(format!("network access denied: {}", request.url))
    }
}
