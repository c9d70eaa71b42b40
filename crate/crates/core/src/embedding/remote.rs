//! Client for an embedding service.
//!
//! Request: `POST {location}/embed` with a JSON body
//! `{"text": ..., "model_id": ..., "max_tokens": <int or omitted>}`.
//!
//! Response, on 2xx: either a PHDE file (`application/octet-stream`) or JSON
//! `{"n": <int>, "d": <int>, "data": "<base64 of the n·d little-endian f32 payload>"}`.
//! Anything else is [`EmbeddingError::RemoteUnavailable`].

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::cloud::TokenEmbeddingMatrix;

use super::format::{decode_payload, read_embedding_file, MAGIC};
use super::{EmbeddingError, EmbeddingProvider};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct EmbedRequest {
    pub text: String,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedJsonResponse {
    pub n: usize,
    pub d: usize,
    pub data: String,
}

impl EmbedJsonResponse {
    pub fn from_matrix(m: &TokenEmbeddingMatrix) -> Result<Self, EmbeddingError> {
        let mut payload = Vec::with_capacity(4 * m.n() * m.d());
        super::format::encode_payload_into(m, &mut payload)?;
        Ok(Self { n: m.n(), d: m.d(), data: base64::engine::general_purpose::STANDARD.encode(payload) })
    }

    pub fn into_matrix(self) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
        let payload = base64::engine::general_purpose::STANDARD
            .decode(self.data.as_bytes())
            .map_err(|e| EmbeddingError::RemoteMalformed(format!("base64: {e}")))?;
        decode_payload(self.n, self.d, &payload).map_err(|e| EmbeddingError::RemoteMalformed(e.to_string()))
    }
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    free: Mutex<usize>,
    ready: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self { free: Mutex::new(limit.max(1)), ready: Condvar::new() }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.ready.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.ready.notify_one();
    }
}

pub struct RemoteProvider {
    endpoint: String,
    model_id: String,
    max_tokens: Option<usize>,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl RemoteProvider {
    pub fn new(
        location: &str,
        model_id: &str,
        max_tokens: Option<usize>,
        max_in_flight: usize,
        timeout: Duration,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: format!("{}/embed", location.trim_end_matches('/')),
            model_id: model_id.to_owned(),
            max_tokens,
            agent,
            in_flight: InFlight::new(max_in_flight),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// Interprets a 2xx response body.
pub fn parse_response(content_type: Option<&str>, body: &[u8]) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
    let mime = content_type.map(|c| c.split(';').next().unwrap_or("").trim().to_ascii_lowercase());
    let is_json = match mime.as_deref() {
        Some("application/json") => true,
        Some("application/octet-stream") => false,
        // Unlabelled bodies are sniffed.
        _ => !body.starts_with(&MAGIC),
    };
    if is_json {
        let parsed: EmbedJsonResponse =
            serde_json::from_slice(body).map_err(|e| EmbeddingError::RemoteMalformed(format!("json: {e}")))?;
        parsed.into_matrix()
    } else {
        read_embedding_file(body).map_err(|e| EmbeddingError::RemoteMalformed(e.to_string()))
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn max_tokens(&self) -> Option<usize> {
        self.max_tokens
    }

    fn embed(&self, text: &str) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
        let request = EmbedRequest {
            text: text.to_owned(),
            model_id: self.model_id.clone(),
            max_tokens: self.max_tokens,
        };
        let body = serde_json::to_vec(&request).expect("request serializes");

        let _slot = self.in_flight.acquire();
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json")
            .send(&body[..])
            .map_err(|e| EmbeddingError::RemoteUnavailable(format!("{}: {e}", self.endpoint)))?;
        let status = response.status();
        if !status.is_success() {
            return Err(EmbeddingError::RemoteUnavailable(format!("{}: HTTP {status}", self.endpoint)));
        }
        let content_type = response
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        let bytes = response
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(|e| EmbeddingError::RemoteUnavailable(format!("reading body: {e}")))?;
        parse_response(content_type.as_deref(), &bytes)
    }
}
