use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::Embedder;
use crate::error::{Error, Result};

/// Client for a JSON embedding endpoint.
///
/// Sends `POST {base_url}/embed` with `{"model": ..., "texts": [...]}` and
/// expects `{"vectors": [[...], ...]}` in input order. Transport failures,
/// timeouts, 429 and 5xx map to [`Error::ServiceUnreachable`] and are retried
/// by the gateway; other statuses map to [`Error::ServiceRejected`].
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    agent: ureq::Agent,
    url: String,
    model: String,
    auth_token: Option<String>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, timeout: Duration, auth_token: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpEmbedder {
            agent,
            url: format!("{}/embed", base_url.trim_end_matches('/')),
            model: model.to_string(),
            auth_token,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Embedder for HttpEmbedder {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let mut req = self.agent.post(&self.url);
        if let Some(token) = &self.auth_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(EmbedRequest {
                model: &self.model,
                texts,
            })
            .map_err(|e| Error::ServiceUnreachable(format!("{}: {e}", self.url)))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Error::ServiceUnreachable(format!(
                "{} returned status {status}",
                self.url
            )));
        }
        if !(200..300).contains(&status) {
            let message = resp
                .body_mut()
                .read_to_string()
                .unwrap_or_default()
                .chars()
                .take(200)
                .collect();
            return Err(Error::ServiceRejected { status, message });
        }
        let body: EmbedResponse = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_json()
            .map_err(|e| Error::MalformedResponse(e.to_string()))?;
        if body.vectors.len() != texts.len() {
            return Err(Error::MalformedResponse(format!(
                "sent {} texts, received {} vectors",
                texts.len(),
                body.vectors.len()
            )));
        }
        Ok(body.vectors)
    }
}
