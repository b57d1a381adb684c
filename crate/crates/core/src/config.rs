//! Run configuration as read from a JSON file.
//!
//! Relative paths inside a configuration resolve against the directory of
//! the file they appear in.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environment::StimulusScript;
use crate::error::{Error, Result};
use crate::modules::ModuleConfig;
use crate::processor::{Fixture, Processor, RemoteConfig, RemoteProcessor, ScriptedProcessor};
use crate::types::{AttentionConfig, ModuleId, Polarity};
use crate::workspace::BROADCAST_RECEIVERS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessorSpec {
    Scripted {
        /// Fixture file.
        #[serde(default)]
        fixture: Option<PathBuf>,
        /// Inline fixture, in the same shape as a fixture file's `responses`.
        #[serde(default)]
        responses: Option<serde_json::Map<String, serde_json::Value>>,
    },
    Remote {
        remote: RemoteConfig,
    },
}

impl Default for ProcessorSpec {
    fn default() -> Self {
        ProcessorSpec::Scripted {
            fixture: None,
            responses: Some(Default::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSpec {
    File(PathBuf),
    Inline(StimulusScript),
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec::Inline(StimulusScript::default())
    }
}

/// A belief, desire or plan the agent starts with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedItem {
    Text(String),
    Detailed {
        content: String,
        #[serde(default = "half")]
        importance: f64,
        #[serde(default)]
        key: Option<String>,
        #[serde(default)]
        polarity: Polarity,
    },
}

fn half() -> f64 {
    0.5
}

impl SeedItem {
    pub fn parts(&self) -> (&str, f64, Option<String>, Polarity) {
        match self {
            SeedItem::Text(t) => (t, 0.5, None, Polarity::Pos),
            SeedItem::Detailed {
                content,
                importance,
                key,
                polarity,
            } => (content, *importance, key.clone(), *polarity),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSeed {
    /// The circumstance relevance is judged against.
    pub situation: String,
    pub beliefs: Vec<SeedItem>,
    pub desires: Vec<SeedItem>,
    pub plans: Vec<SeedItem>,
}

fn default_ticks() -> u64 {
    100
}

fn default_targets() -> BTreeSet<ModuleId> {
    BROADCAST_RECEIVERS.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ticks")]
    pub ticks: u64,
    #[serde(default)]
    pub attention: AttentionConfig,
    #[serde(default)]
    pub modules: ModuleConfig,
    pub processor: ProcessorSpec,
    #[serde(default)]
    pub environment: EnvironmentSpec,
    #[serde(default = "default_targets")]
    pub broadcast_targets: BTreeSet<ModuleId>,
    /// Run the three module sub-steps on separate threads.
    #[serde(default)]
    pub parallel_modules: bool,
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub agent: AgentSeed,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            ticks: default_ticks(),
            attention: AttentionConfig::default(),
            modules: ModuleConfig::default(),
            processor: ProcessorSpec::default(),
            environment: EnvironmentSpec::default(),
            broadcast_targets: default_targets(),
            parallel_modules: false,
            trace_path: None,
            agent: AgentSeed::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path.display().to_string(), source),
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::json("run configuration", e))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every violated invariant, empty when the configuration is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.attention.violations();
        v.extend(self.modules.violations());
        for t in &self.broadcast_targets {
            if !BROADCAST_RECEIVERS.contains(t) {
                v.push(format!("broadcast target {t} cannot receive broadcasts"));
            }
        }
        match &self.processor {
            ProcessorSpec::Scripted { fixture, responses } => match (fixture, responses) {
                (Some(_), Some(_)) => {
                    v.push("processor: give either a fixture file or inline responses, not both".into())
                }
                (None, None) => v.push("processor: scripted mode needs a fixture file or inline responses".into()),
                _ => {}
            },
            ProcessorSpec::Remote { remote } => v.extend(remote.violations()),
        }
        if let EnvironmentSpec::Inline(script) = &self.environment {
            v.extend(script.violations().into_iter().map(|m| format!("environment: {m}")));
        }
        for (what, items) in [
            ("beliefs", &self.agent.beliefs),
            ("desires", &self.agent.desires),
            ("plans", &self.agent.plans),
        ] {
            for (i, item) in items.iter().enumerate() {
                let (content, importance, _, _) = item.parts();
                if content.trim().is_empty() {
                    v.push(format!("agent.{what}[{i}]: empty content"));
                }
                if !(0.0..=1.0).contains(&importance) {
                    v.push(format!("agent.{what}[{i}]: importance {importance} outside [0,1]"));
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    pub fn is_scripted(&self) -> bool {
        matches!(self.processor, ProcessorSpec::Scripted { .. })
    }

    pub fn build_processor(&self) -> Result<Box<dyn Processor>> {
        match &self.processor {
            ProcessorSpec::Scripted { fixture, responses } => {
                let fx = match (fixture, responses) {
                    (Some(p), _) => Fixture::load(&self.resolve(p))?,
                    (None, Some(map)) => {
                        let root = serde_json::json!({ "responses": map });
                        Fixture::from_value(&root, None)?
                    }
                    (None, None) => return Err(Error::InvalidConfig(vec!["processor: no fixture".into()])),
                };
                Ok(Box::new(ScriptedProcessor::new(fx)))
            }
            ProcessorSpec::Remote { remote } => Ok(Box::new(RemoteProcessor::from_config(remote.clone())?)),
        }
    }

    pub fn load_environment(&self) -> Result<StimulusScript> {
        match &self.environment {
            EnvironmentSpec::File(p) => StimulusScript::load(&self.resolve(p)),
            EnvironmentSpec::Inline(s) => Ok(s.clone()),
        }
    }
}
