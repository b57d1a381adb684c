//! The information-processing backend: every judgment the architecture
//! delegates (salience, importance, relevance, reflection, planning, action
//! choice, contradiction and acceptance) goes through a [`Processor`].
//!
//! Two implementations ship: [`ScriptedProcessor`], a deterministic fixture
//! lookup used for tests and replayable experiments, and [`RemoteProcessor`],
//! a chat-completion client.

mod remote;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{
    parse_judgment, parse_rating, HttpReply, RemoteConfig, RemoteProcessor, ReqwestTransport, Transport, TransportError,
};
pub use scripted::{Fixture, ScriptedProcessor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    RateSalience,
    RateImportance,
    RateRelevance,
    Reflect,
    GeneralizeDesires,
    Plan,
    ChooseAction,
    JudgeContradiction,
    AcceptPercept,
}

impl RequestKind {
    pub const ALL: [RequestKind; 9] = [
        RequestKind::RateSalience,
        RequestKind::RateImportance,
        RequestKind::RateRelevance,
        RequestKind::Reflect,
        RequestKind::GeneralizeDesires,
        RequestKind::Plan,
        RequestKind::ChooseAction,
        RequestKind::JudgeContradiction,
        RequestKind::AcceptPercept,
    ];

    /// Prefix used in request keys.
    pub fn tag(self) -> &'static str {
        match self {
            RequestKind::RateSalience => "salience",
            RequestKind::RateImportance => "importance",
            RequestKind::RateRelevance => "relevance",
            RequestKind::Reflect => "reflect",
            RequestKind::GeneralizeDesires => "generalize",
            RequestKind::Plan => "plan",
            RequestKind::ChooseAction => "choose_action",
            RequestKind::JudgeContradiction => "contradiction",
            RequestKind::AcceptPercept => "accept_percept",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        RequestKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn is_rating(self) -> bool {
        matches!(
            self,
            RequestKind::RateSalience | RequestKind::RateImportance | RequestKind::RateRelevance
        )
    }

    pub fn is_judgment(self) -> bool {
        matches!(self, RequestKind::JudgeContradiction | RequestKind::AcceptPercept)
    }
}

/// Lowercases, collapses runs of whitespace and joins non-empty lines with `" | "`.
pub fn normalize_payload(payload: &str) -> String {
    payload
        .lines()
        .map(|line| {
            line.split_whitespace()
                .map(str::to_lowercase)
                .collect::<Vec<_>>()
                .join(" ")
        })
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join(" | ")
}

/// A uniform envelope for a delegated judgment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessorRequest {
    pub kind: RequestKind,
    pub payload: String,
    /// `<tag>:<normalized payload>`; a pure function of kind and payload.
    pub key: String,
    /// Rating used by the scripted processor when the fixture has no entry.
    /// Never part of the key and ignored by remote backends.
    pub prior: Option<f64>,
}

impl ProcessorRequest {
    pub fn new(kind: RequestKind, payload: impl Into<String>) -> Self {
        let payload = payload.into();
        let key = format!("{}:{}", kind.tag(), normalize_payload(&payload));
        ProcessorRequest {
            kind,
            payload,
            key,
            prior: None,
        }
    }

    /// A request over an unordered collection of texts: lines are sorted so
    /// the key does not depend on the order items were gathered in.
    pub fn over_set<'a>(kind: RequestKind, items: impl IntoIterator<Item = &'a str>) -> Self {
        let mut lines: Vec<&str> = items.into_iter().collect();
        lines.sort_by_key(|s| normalize_payload(s));
        ProcessorRequest::new(kind, lines.join("\n"))
    }

    pub fn with_prior(mut self, prior: f64) -> Self {
        self.prior = Some(prior.clamp(0.0, 1.0));
        self
    }

    pub fn salience(observation: &str) -> Self {
        ProcessorRequest::new(RequestKind::RateSalience, observation)
    }

    pub fn importance(content: &str) -> Self {
        ProcessorRequest::new(RequestKind::RateImportance, content)
    }

    pub fn relevance(content: &str, situation: &str) -> Self {
        ProcessorRequest::new(RequestKind::RateRelevance, format!("{content}\n{situation}"))
    }

    pub fn choose_action(plan: &str) -> Self {
        ProcessorRequest::new(RequestKind::ChooseAction, plan)
    }

    pub fn accept_percept(content: &str) -> Self {
        ProcessorRequest::new(RequestKind::AcceptPercept, content)
    }

    pub fn contradiction(a: &str, b: &str) -> Self {
        ProcessorRequest::over_set(RequestKind::JudgeContradiction, [a, b])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessorResponse {
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
}

impl ProcessorResponse {
    pub fn rating(r: f64) -> Self {
        ProcessorResponse {
            rating: Some(r),
            ..Default::default()
        }
    }

    pub fn text(t: impl Into<String>) -> Self {
        ProcessorResponse {
            text: t.into(),
            ..Default::default()
        }
    }

    pub fn judgment(accepted: bool) -> Self {
        ProcessorResponse {
            accepted: Some(accepted),
            ..Default::default()
        }
    }

    /// Non-empty trimmed lines of the text, in order.
    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.text.lines().map(str::trim).filter(|l| !l.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplySource {
    Fixture,
    Default,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub response: ProcessorResponse,
    pub source: ReplySource,
    /// Wall-clock latency; only reported by remote backends.
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessorError {
    #[error("processor unavailable after {attempts} attempt(s): {last}")]
    Unavailable { attempts: u32, last: String },

    #[error("malformed {kind:?} response: {text:?}")]
    MalformedResponse { kind: RequestKind, text: String },

    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },

    #[error("processor configuration: {0}")]
    Config(String),
}

pub trait Processor: Send + Sync {
    fn respond(&self, req: &ProcessorRequest) -> Result<Reply, ProcessorError>;

    /// Scripted processors are bit-deterministic and may be replayed.
    fn is_scripted(&self) -> bool;
}

/// One processor round-trip as it appears in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ReplySource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ProcessorResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

/// Processor traffic and warnings collected by one stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CallLog {
    pub calls: Vec<CallRecord>,
    pub warnings: Vec<String>,
}

impl CallLog {
    pub fn ask(
        &mut self,
        processor: &dyn Processor,
        req: &ProcessorRequest,
    ) -> Result<ProcessorResponse, ProcessorError> {
        match processor.respond(req) {
            Ok(reply) => {
                self.calls.push(CallRecord {
                    key: req.key.clone(),
                    source: Some(reply.source),
                    response: Some(reply.response.clone()),
                    error: None,
                    latency_ms: reply.latency_ms,
                });
                Ok(reply.response)
            }
            Err(e) => {
                self.calls.push(CallRecord {
                    key: req.key.clone(),
                    source: None,
                    response: None,
                    error: Some(e.to_string()),
                    latency_ms: None,
                });
                Err(e)
            }
        }
    }

    /// Asks for a rating and applies the caller's fallback on any failure.
    pub fn rate_or(&mut self, processor: &dyn Processor, req: &ProcessorRequest, fallback: f64) -> f64 {
        match self.ask(processor, req) {
            Ok(ProcessorResponse { rating: Some(r), .. }) => r.clamp(0.0, 1.0),
            Ok(_) => {
                self.warn(format!("{}: response carried no rating; using {fallback}", req.key));
                fallback
            }
            Err(e) => {
                self.warn(format!("{}: {e}; using {fallback}", req.key));
                fallback
            }
        }
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn absorb(&mut self, other: CallLog) {
        self.calls.extend(other.calls);
        self.warnings.extend(other.warnings);
    }
}
