//! Generic JSON-over-HTTP adapter.
//!
//! Requests are posted to `{base_url}/{kind}` as
//! `{"model_id", "kind", "payload", "seed", "inputs": [base64…]}`; the response
//! body is taken verbatim as the artifact bytes. Vendor-specific schemas belong
//! in their own adapters behind the same [`Backend`] trait.

use std::io::Read;

use base64::Engine as _;
use serde_json::json;

use super::{Backend, BackendError, BackendOutput, GenRequest, ModelEndpoint};

/// Responses above this size are rejected rather than buffered.
const MAX_BODY: u64 = 512 * 1024 * 1024;

#[derive(Debug, Default, Clone)]
pub struct HttpBackend;

impl HttpBackend {
    fn secret(endpoint: &ModelEndpoint) -> Option<String> {
        endpoint.auth_ref.as_deref().and_then(|name| std::env::var(name).ok())
    }
}

impl Backend for HttpBackend {
    fn call(
        &self,
        endpoint: &ModelEndpoint,
        request: &GenRequest,
        inputs: &[Vec<u8>],
    ) -> Result<BackendOutput, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/{}", endpoint.base_url.trim_end_matches('/'), request.kind.as_str());
        let b64 = base64::engine::general_purpose::STANDARD;
        let body = json!({
            "model_id": endpoint.model_id,
            "kind": request.kind,
            "payload": request.payload,
            "seed": request.seed,
            "inputs": inputs.iter().map(|i| b64.encode(i)).collect::<Vec<_>>(),
        });
        let mut req = agent.post(&url);
        if let Some(token) = Self::secret(endpoint) {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            other => BackendError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("application/octet-stream")
            .to_string();
        let mut bytes = Vec::new();
        resp.body_mut()
            .as_reader()
            .take(MAX_BODY)
            .read_to_end(&mut bytes)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status, body: String::from_utf8_lossy(&bytes).into_owned() });
        }
        Ok(BackendOutput { bytes, metadata: json!({ "status": status, "content_type": content_type }) })
    }
}
