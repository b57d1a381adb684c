//! Chat-completion client.
//!
//! Wire format: `POST <endpoint>` with `{"model", "messages": [{"role", "content"}], "temperature": 0}`;
//! the answer is read from `choices[0].message.content`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Processor, ProcessorError, ProcessorRequest, ProcessorResponse, Reply, ReplySource, RequestKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_retries() -> u32 {
    2
}

fn default_backoff_ms() -> u64 {
    250
}

impl RemoteConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.endpoint.trim().is_empty() {
            v.push("processor.remote.endpoint must not be empty".into());
        } else if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            v.push(format!(
                "processor.remote.endpoint {:?} is not an http(s) URL",
                self.endpoint
            ));
        }
        if self.model.trim().is_empty() {
            v.push("processor.remote.model must not be empty".into());
        }
        if self.timeout_ms == 0 {
            v.push("processor.remote.timeout_ms must be positive".into());
        }
        v
    }

    /// Upper bound on how long a single request may take, retries included.
    pub fn deadline(&self) -> Duration {
        Duration::from_millis(self.timeout_ms.saturating_mul(u64::from(self.max_retries) + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout(String),
    Network(String),
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Timeout(m) => write!(f, "timeout: {m}"),
            TransportError::Network(m) => write!(f, "network: {m}"),
        }
    }
}

/// The HTTP layer, split out so tests can stand in for the network.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError>;
}

#[derive(Debug, Clone, Default)]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_owned());
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        Ok(HttpReply { status, body })
    }
}

pub struct RemoteProcessor {
    config: RemoteConfig,
    api_key: Option<String>,
    transport: Box<dyn Transport>,
}

impl std::fmt::Debug for RemoteProcessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProcessor")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteProcessor {
    /// Builds a client over HTTP, reading the API key from the configured variable.
    pub fn from_config(config: RemoteConfig) -> Result<Self, ProcessorError> {
        let problems = config.violations();
        if !problems.is_empty() {
            return Err(ProcessorError::Config(problems.join("; ")));
        }
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| ProcessorError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        Ok(Self::with_transport(
            config,
            api_key,
            Box::new(ReqwestTransport::default()),
        ))
    }

    pub fn with_transport(config: RemoteConfig, api_key: Option<String>, transport: Box<dyn Transport>) -> Self {
        RemoteProcessor {
            config,
            api_key,
            transport,
        }
    }

    pub fn request_body(&self, req: &ProcessorRequest) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": instructions(req.kind)},
                {"role": "user", "content": req.payload},
            ],
            "temperature": 0,
        })
    }

    fn complete(&self, req: &ProcessorRequest) -> Result<String, ProcessorError> {
        let body = self.request_body(req).to_string();
        let started = Instant::now();
        let deadline = self.config.deadline();
        let per_attempt = Duration::from_millis(self.config.timeout_ms);
        let attempts = self.config.max_retries + 1;
        let mut last = String::from("no attempt made");

        for attempt in 0..attempts {
            let remaining = deadline.saturating_sub(started.elapsed());
            if remaining.is_zero() {
                return Err(ProcessorError::Unavailable {
                    attempts: attempt,
                    last: format!("deadline exceeded; last error: {last}"),
                });
            }
            match self.transport.post_json(
                &self.config.endpoint,
                self.api_key.as_deref(),
                &body,
                per_attempt.min(remaining),
            ) {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    return extract_content(&reply.body).ok_or_else(|| ProcessorError::MalformedResponse {
                        kind: req.kind,
                        text: reply.body.clone(),
                    });
                }
                Ok(reply) if reply.status == 429 || reply.status >= 500 => {
                    last = format!("HTTP {}", reply.status);
                }
                Ok(reply) => {
                    return Err(ProcessorError::Unavailable {
                        attempts: attempt + 1,
                        last: format!("HTTP {} (not retried)", reply.status),
                    });
                }
                Err(e) => last = e.to_string(),
            }
            tracing::warn!(key = %req.key, attempt, error = %last, "completion request failed");
            if attempt + 1 < attempts {
                let backoff = Duration::from_millis(self.config.backoff_ms.saturating_mul(1 << attempt.min(16)));
                std::thread::sleep(backoff.min(deadline.saturating_sub(started.elapsed())));
            }
        }
        Err(ProcessorError::Unavailable { attempts, last })
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    v.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_owned)
}

fn instructions(kind: RequestKind) -> &'static str {
    match kind {
        RequestKind::RateSalience => "Rate how salient this observation is to the agent's likely future cognition. Answer with a single integer from 1 to 10.",
        RequestKind::RateImportance => "Rate the importance of this memory for the agent. Answer with a single integer from 1 to 10.",
        RequestKind::RateRelevance => "The first line is a memory, the second the agent's current situation. Rate the memory's relevance to the situation. Answer with a single integer from 1 to 10.",
        RequestKind::Reflect => "These are the agent's recent beliefs, one per line. Pose questions about how to generalize from them and answer them. Output only the answers, one new belief per line.",
        RequestKind::GeneralizeDesires => "These are the agent's desires, one per line. Generalize new desires from them. Output only the new desires, one per line.",
        RequestKind::Plan => "These are the agent's current beliefs, desires and plans, one per line. Output a single plan, or a more detailed version of an existing plan, on one line.",
        RequestKind::ChooseAction => "This is the agent's plan. Output the single next action the agent should take, on one line.",
        RequestKind::JudgeContradiction => "Do these two statements contradict each other? Answer yes or no.",
        RequestKind::AcceptPercept => "Should this observation be stored in the agent's long-term beliefs? Answer yes or no.",
    }
}

/// Reads a leading number on a 1-10 scale and normalizes it to `[0, 1]`.
pub fn parse_rating(text: &str) -> Option<f64> {
    let t = text.trim_start();
    let end = t
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || *c == '.'))
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let n: f64 = t[..end].trim_end_matches('.').parse().ok()?;
    n.is_finite().then(|| (n / 10.0).clamp(0.0, 1.0))
}

/// Reads a leading yes/no (or true/false).
pub fn parse_judgment(text: &str) -> Option<bool> {
    let word: String = text
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

impl Processor for RemoteProcessor {
    fn respond(&self, req: &ProcessorRequest) -> Result<Reply, ProcessorError> {
        let started = Instant::now();
        let text = self.complete(req)?;
        let malformed = || ProcessorError::MalformedResponse {
            kind: req.kind,
            text: text.clone(),
        };
        let response = if req.kind.is_rating() {
            ProcessorResponse::rating(parse_rating(&text).ok_or_else(malformed)?)
        } else if req.kind.is_judgment() {
            ProcessorResponse::judgment(parse_judgment(&text).ok_or_else(malformed)?)
        } else {
            ProcessorResponse::text(text.trim())
        };
        Ok(Reply {
            response,
            source: ReplySource::Remote,
            latency_ms: Some(started.elapsed().as_millis() as u64),
        })
    }

    fn is_scripted(&self) -> bool {
        false
    }
}
