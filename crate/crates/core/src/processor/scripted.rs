use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use super::{
    normalize_payload, Processor, ProcessorError, ProcessorRequest, ProcessorResponse, Reply, ReplySource, RequestKind,
};

/// Request key → canned response.
///
/// On disk a fixture is a JSON object with a single `responses` member whose
/// keys are request keys (`<tag>:<normalized payload>`). A value may be a
/// full response object (`{"text": .., "rating": .., "accepted": ..}`) or a
/// shorthand: a number for rating kinds, a string for text kinds and a boolean
/// for judgment kinds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fixture {
    entries: BTreeMap<String, ProcessorResponse>,
}

impl Fixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, response: ProcessorResponse) -> &mut Self {
        self.entries.insert(key.into(), response);
        self
    }

    pub fn with(mut self, key: impl Into<String>, response: ProcessorResponse) -> Self {
        self.insert(key, response);
        self
    }

    pub fn get(&self, key: &str) -> Option<&ProcessorResponse> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, ProcessorError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProcessorError::Fixture {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ProcessorError> {
        let root: Value = serde_json::from_str(text).map_err(|e| ProcessorError::Fixture {
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_value(&root, Some(text))
    }

    /// Builds a fixture from an already-parsed document. `source` is used only
    /// to attribute validation errors to line numbers.
    pub fn from_value(root: &Value, source: Option<&str>) -> Result<Self, ProcessorError> {
        let line_of = |key: &str| -> usize {
            let Some(src) = source else { return 0 };
            let quoted = serde_json::to_string(key).unwrap_or_default();
            src.lines()
                .position(|l| l.contains(&quoted))
                .map(|i| i + 1)
                .unwrap_or(0)
        };
        let fail = |line: usize, message: String| ProcessorError::Fixture { line, message };

        let responses = root
            .get("responses")
            .and_then(Value::as_object)
            .ok_or_else(|| fail(1, "expected an object with a \"responses\" member".into()))?;

        let mut entries = BTreeMap::new();
        for (key, value) in responses {
            let line = line_of(key);
            let (tag, payload) = key
                .split_once(':')
                .ok_or_else(|| fail(line, format!("key {key:?} has no '<kind>:' prefix")))?;
            let kind = RequestKind::from_tag(tag)
                .ok_or_else(|| fail(line, format!("key {key:?}: unknown request kind {tag:?}")))?;
            if normalize_payload(payload) != payload {
                return Err(fail(
                    line,
                    format!(
                        "key {key:?} is not canonical; expected {:?}",
                        format!("{tag}:{}", normalize_payload(payload))
                    ),
                ));
            }
            let response = parse_value(kind, value).map_err(|m| fail(line, format!("{key:?}: {m}")))?;
            entries.insert(key.clone(), response);
        }
        Ok(Fixture { entries })
    }
}

fn parse_value(kind: RequestKind, value: &Value) -> Result<ProcessorResponse, String> {
    let response = match value {
        Value::Number(n) => ProcessorResponse::rating(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => ProcessorResponse::text(s.clone()),
        Value::Bool(b) => ProcessorResponse::judgment(*b),
        Value::Object(_) => serde_json::from_value::<ProcessorResponse>(value.clone())
            .map_err(|e| format!("invalid response object: {e}"))?,
        other => return Err(format!("unsupported response value {other}")),
    };
    if kind.is_rating() {
        match response.rating {
            Some(r) if (0.0..=1.0).contains(&r) => {}
            Some(r) => return Err(format!("rating {r} outside [0,1]")),
            None => return Err("rating kinds need a rating".into()),
        }
    } else if response.rating.is_some() {
        return Err(format!("{kind:?} responses cannot carry a rating"));
    }
    if kind.is_judgment() && response.accepted.is_none() {
        return Err("judgment kinds need an accepted flag".into());
    }
    Ok(response)
}

/// Deterministic processor backed by a [`Fixture`].
///
/// Exact-match lookup on the request key. Misses fall back to kind-level
/// defaults: ratings use the request's prior or 0.5, text kinds answer with
/// empty text, percept acceptance defaults to true and contradiction
/// judgments to false.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProcessor {
    fixture: Fixture,
}

impl ScriptedProcessor {
    pub fn new(fixture: Fixture) -> Self {
        ScriptedProcessor { fixture }
    }

    pub fn fixture(&self) -> &Fixture {
        &self.fixture
    }

    pub fn default_response(req: &ProcessorRequest) -> ProcessorResponse {
        match req.kind {
            k if k.is_rating() => ProcessorResponse::rating(req.prior.unwrap_or(0.5)),
            RequestKind::AcceptPercept => ProcessorResponse::judgment(true),
            RequestKind::JudgeContradiction => ProcessorResponse::judgment(false),
            _ => ProcessorResponse::default(),
        }
    }
}

impl Processor for ScriptedProcessor {
    fn respond(&self, req: &ProcessorRequest) -> Result<Reply, ProcessorError> {
        match self.fixture.get(&req.key) {
            Some(r) => Ok(Reply {
                response: r.clone(),
                source: ReplySource::Fixture,
                latency_ms: None,
            }),
            None => {
                tracing::debug!(key = %req.key, "fixture miss");
                Ok(Reply {
                    response: Self::default_response(req),
                    source: ReplySource::Default,
                    latency_ms: None,
                })
            }
        }
    }

    fn is_scripted(&self) -> bool {
        true
    }
}
