//! HTTP client for a remote logits server.
//!
//! Protocol (UTF-8 JSON, one object per request and response):
//!
//! * `POST /v1/next` `{"context", "top_k"}` -> `{"entries": [{"token", "p"}, ...]}`
//! * `POST /v1/rollout` `{"context", "max_tokens", "stop"}` -> `{"text", "stopped"}`
//! * `GET /v1/info` -> `{"model", "deterministic"}`

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, LmError, ModelInfo, Rollout, TokenDistribution, TokenProb};

pub struct RemoteLm {
    base_url: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct NextRequest<'a> {
    context: &'a str,
    top_k: usize,
}

#[derive(Deserialize)]
struct NextResponse {
    entries: Vec<TokenProb>,
}

#[derive(Serialize)]
struct RolloutRequest<'a> {
    context: &'a str,
    max_tokens: usize,
    stop: &'a str,
}

impl RemoteLm {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<T: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &T) -> Result<R, LmError> {
        let resp = self
            .agent
            .post(&format!("{}{path}", self.base_url))
            .send_json(body)
            .map_err(map_ureq)?;
        resp.into_json()
            .map_err(|e| LmError::Protocol(format!("{path}: {e}")))
    }

    pub fn fetch_info(&self) -> Result<ModelInfo, LmError> {
        let resp = self
            .agent
            .get(&format!("{}/v1/info", self.base_url))
            .call()
            .map_err(map_ureq)?;
        resp.into_json()
            .map_err(|e| LmError::Protocol(format!("/v1/info: {e}")))
    }
}

fn map_ureq(e: ureq::Error) -> LmError {
    match e {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            LmError::Protocol(format!("HTTP {code}: {body}"))
        }
        ureq::Error::Transport(t) => LmError::Transport(t.to_string()),
    }
}

impl LanguageModel for RemoteLm {
    fn next_distribution(&self, context: &str, top_k: usize) -> Result<TokenDistribution, LmError> {
        if top_k == 0 {
            return Err(LmError::Precondition("top_k must be at least 1".into()));
        }
        let resp: NextResponse = self.post("/v1/next", &NextRequest { context, top_k })?;
        if resp
            .entries
            .windows(2)
            .any(|w| w[0].prob < w[1].prob)
        {
            return Err(LmError::Protocol("entries not sorted by p descending".into()));
        }
        Ok(TokenDistribution::new(resp.entries)?.truncate(top_k))
    }

    fn rollout_greedy(&self, context: &str, max_tokens: usize, stop: &str) -> Result<Rollout, LmError> {
        if max_tokens == 0 {
            return Err(LmError::Precondition("max_tokens must be at least 1".into()));
        }
        self.post(
            "/v1/rollout",
            &RolloutRequest {
                context,
                max_tokens,
                stop,
            },
        )
    }

    fn info(&self) -> ModelInfo {
        self.fetch_info().unwrap_or_else(|e| {
            log::warn!("cannot fetch model info: {e}");
            ModelInfo {
                model: self.base_url.clone(),
                deterministic: false,
            }
        })
    }
}
