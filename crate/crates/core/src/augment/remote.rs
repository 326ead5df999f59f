//! Client side of the generation wire protocol.
//!
//! `POST {endpoint}/v1/variations` with a JSON body
//! `{"image_b64", "prompt", "seed", "count", "strength", "guidance_scale", "width", "height"}`
//! answered by `{"images_b64": [..], "seeds": [..]}`, or an HTTP error status
//! with `{"error": ".."}`.

use std::fs;
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AugmentError, GenerationRequest, GeneratorBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationWireRequest {
    pub image_b64: String,
    pub prompt: String,
    pub seed: u64,
    pub count: u32,
    pub strength: f64,
    pub guidance_scale: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationWireResponse {
    pub images_b64: Vec<String>,
    pub seeds: Vec<u64>,
}

impl VariationWireResponse {
    /// Validates a response body against the protocol schema.
    pub fn parse(body: &str) -> Result<Self, AugmentError> {
        let value: Value =
            serde_json::from_str(body).map_err(|e| AugmentError::ProtocolError(format!("invalid JSON: {e}")))?;
        let images = value
            .get("images_b64")
            .and_then(Value::as_array)
            .ok_or_else(|| AugmentError::ProtocolError("missing `images_b64` array".into()))?;
        let images_b64 = images
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| AugmentError::ProtocolError("`images_b64` must hold strings".into()))?;
        let seeds = match value.get("seeds") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(Value::as_u64)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| AugmentError::ProtocolError("`seeds` must hold unsigned integers".into()))?,
            Some(_) => return Err(AugmentError::ProtocolError("`seeds` must be an array".into())),
        };
        Ok(Self { images_b64, seeds })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub retries: u32,
    /// Delay before the first retry; doubles on each subsequent retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

enum Attempt {
    Done(Vec<u8>),
    Retry(String),
    Fail(AugmentError),
}

/// Requests one variation and returns the first image of the response.
///
/// Connection failures, timeouts, 429 and 5xx responses are retried with
/// exponential backoff and end in `BackendUnavailable`; other error statuses
/// return `RemoteError` at once.
pub fn remote_generate(
    req: &GenerationRequest,
    endpoint: &str,
    timeout: Duration,
    retry: &RetryPolicy,
) -> Result<Vec<u8>, AugmentError> {
    let image = fs::read(&req.init_image_path).map_err(|source| AugmentError::Io {
        path: req.init_image_path.clone(),
        source,
    })?;
    let body = VariationWireRequest {
        image_b64: B64.encode(image),
        prompt: req.prompt_text.clone(),
        seed: req.seed,
        count: 1,
        strength: req.strength,
        guidance_scale: req.guidance_scale,
        width: req.output_size.0,
        height: req.output_size.1,
    };
    let url = format!("{}/v1/variations", endpoint.trim_end_matches('/'));
    let agent = agent(timeout);

    let mut last = String::new();
    for attempt in 0..=retry.retries {
        if attempt > 0 {
            thread::sleep(retry.base_delay * 2u32.saturating_pow(attempt - 1));
        }
        match post_once(&agent, &url, &body) {
            Attempt::Done(bytes) => return Ok(bytes),
            Attempt::Fail(e) => return Err(e),
            Attempt::Retry(reason) => {
                log::debug!("{url}: attempt {} failed: {reason}", attempt + 1);
                last = reason;
            }
        }
    }
    Err(AugmentError::BackendUnavailable(format!(
        "{url} after {} attempts: {last}",
        retry.retries + 1
    )))
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post_once(agent: &ureq::Agent, url: &str, body: &VariationWireRequest) -> Attempt {
    let mut response = match agent.post(url).send_json(body) {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    let status = response.status().as_u16();
    let text = match response.body_mut().read_to_string() {
        Ok(t) => t,
        Err(e) => return Attempt::Retry(format!("reading body: {e}")),
    };
    if status == 429 || status >= 500 {
        return Attempt::Retry(format!("status {status}: {}", error_message(&text)));
    }
    if status != 200 {
        return Attempt::Fail(AugmentError::RemoteError {
            status,
            message: error_message(&text),
        });
    }
    let parsed = match VariationWireResponse::parse(&text) {
        Ok(p) => p,
        Err(e) => return Attempt::Fail(e),
    };
    let Some(first) = parsed.images_b64.first() else {
        return Attempt::Fail(AugmentError::ProtocolError("`images_b64` is empty".into()));
    };
    match B64.decode(first) {
        Ok(bytes) => Attempt::Done(bytes),
        Err(e) => Attempt::Fail(AugmentError::ProtocolError(format!("bad base64 image: {e}"))),
    }
}

fn error_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.get("error").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_else(|| body.chars().take(200).collect())
}

/// Backend that talks to the generation sidecar.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    pub endpoint: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout,
            retry,
        }
    }
}

impl GeneratorBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    /// Any HTTP answer from `GET /v1/health` counts as reachable.
    fn probe(&self) -> Result<(), AugmentError> {
        let url = format!("{}/v1/health", self.endpoint.trim_end_matches('/'));
        agent(self.timeout)
            .get(&url)
            .call()
            .map(|_| ())
            .map_err(|e| AugmentError::BackendUnavailable(format!("{url}: {e}")))
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<u8>, AugmentError> {
        remote_generate(request, &self.endpoint, self.timeout, &self.retry)
    }
}
