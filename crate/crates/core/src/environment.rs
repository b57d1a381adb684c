//! A small text world: scheduled stimuli on named channels, a fact table
//! the agent can change through actions, and exogenous events.
//!
//! Every change to the fact table is tagged with its cause so the agent can
//! tell the effects of its own actions apart from everything else.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Kind, Polarity, RepId, Representation, Tick};

/// One line of text reaching the perception module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub channel: String,
    /// Salience prior in `[0,1]`.
    pub priority: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposition_key: Option<String>,
    #[serde(default)]
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledStimulus {
    pub tick: Tick,
    pub channel: String,
    pub text: String,
    #[serde(default = "half")]
    pub priority: f64,
    #[serde(default)]
    pub key: Option<String>,
    #[serde(default)]
    pub polarity: Polarity,
}

fn half() -> f64 {
    0.5
}

/// A fact change the agent did not cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExogenousEvent {
    pub tick: Tick,
    pub key: String,
    pub value: String,
    /// How the change is described to the agent; defaults to `key: old→new`.
    #[serde(default)]
    pub text: Option<String>,
}

/// Action text containing `pattern` (case-insensitive) sets `key` to `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub pattern: String,
    pub key: String,
    pub value: String,
}

fn world_channel() -> String {
    "world".to_string()
}

/// Stimulus schedule, initial facts, exogenous events and the action transition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusScript {
    #[serde(default)]
    pub channels: BTreeSet<String>,
    #[serde(default)]
    pub schedule: Vec<ScheduledStimulus>,
    #[serde(default)]
    pub facts: BTreeMap<String, String>,
    #[serde(default)]
    pub events: Vec<ExogenousEvent>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    /// Channel on which fact changes are observed.
    #[serde(default = "world_channel")]
    pub fact_channel: String,
    #[serde(default = "half")]
    pub fact_priority: f64,
}

impl Default for StimulusScript {
    fn default() -> Self {
        StimulusScript {
            channels: BTreeSet::new(),
            schedule: Vec::new(),
            facts: BTreeMap::new(),
            events: Vec::new(),
            transitions: Vec::new(),
            fact_channel: world_channel(),
            fact_priority: 0.5,
        }
    }
}

impl StimulusScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script: StimulusScript =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        script.validate()?;
        Ok(script)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut last: BTreeMap<&str, Tick> = BTreeMap::new();
        for (i, s) in self.schedule.iter().enumerate() {
            if !self.channels.is_empty() && !self.channels.contains(&s.channel) {
                v.push(format!("schedule[{i}]: undeclared channel {:?}", s.channel));
            }
            if let Some(prev) = last.insert(&s.channel, s.tick) {
                if s.tick < prev {
                    v.push(format!(
                        "schedule[{i}]: tick {} precedes tick {prev} on channel {:?}",
                        s.tick, s.channel
                    ));
                }
            }
            if !(0.0..=1.0).contains(&s.priority) {
                v.push(format!("schedule[{i}]: priority {} outside [0,1]", s.priority));
            }
            if s.text.trim().is_empty() {
                v.push(format!("schedule[{i}]: empty observation text"));
            }
        }
        if !(0.0..=1.0).contains(&self.fact_priority) {
            v.push(format!("fact_priority {} outside [0,1]", self.fact_priority));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if t.pattern.trim().is_empty() {
                v.push(format!("transitions[{i}]: empty pattern"));
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

    /// Channels that actually carry scheduled stimuli.
    pub fn active_channels(&self) -> BTreeSet<&str> {
        self.schedule.iter().map(|s| s.channel.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case")]
pub enum Cause {
    Agent { action: RepId },
    Exogenous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDelta {
    pub tick: Tick,
    pub key: String,
    pub old: Option<String>,
    pub new: String,
    pub caused_by: Cause,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl WorldDelta {
    pub fn describe(&self) -> String {
        if let Some(t) = &self.text {
            return t.clone();
        }
        match &self.old {
            Some(old) => format!("{}: {}→{}", self.key, old, self.new),
            None => format!("{}: {}", self.key, self.new),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldState {
    pub facts: BTreeMap<String, String>,
    /// Changes not yet observed by the agent.
    pub pending: Vec<WorldDelta>,
}

impl WorldState {
    pub fn from_script(script: &StimulusScript) -> Self {
        WorldState {
            facts: script.facts.clone(),
            pending: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, value: &str, cause: Cause, text: Option<String>, tick: Tick) -> Option<WorldDelta> {
        let old = self.facts.get(key).cloned();
        if old.as_deref() == Some(value) {
            return None;
        }
        self.facts.insert(key.to_owned(), value.to_owned());
        let delta = WorldDelta {
            tick,
            key: key.to_owned(),
            old,
            new: value.to_owned(),
            caused_by: cause,
            text,
        };
        self.pending.push(delta.clone());
        Some(delta)
    }

    /// Applies the exogenous events scheduled for `now`.
    pub fn apply_events(&mut self, script: &StimulusScript, now: Tick) -> Vec<WorldDelta> {
        script
            .events
            .iter()
            .filter(|e| e.tick == now)
            .filter_map(|e| self.set(&e.key, &e.value, Cause::Exogenous, e.text.clone(), now))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionEffect {
    pub world: WorldState,
    pub deltas: Vec<WorldDelta>,
    /// False when no transition matched the action text.
    pub recognized: bool,
}

/// Applies an action through the transition table; the first matching rule wins.
/// Unknown actions are inert.
pub fn apply_action(
    world: &WorldState,
    transitions: &[Transition],
    action: &Representation,
    now: Tick,
) -> Result<ActionEffect> {
    if action.kind != Kind::Action {
        return Err(Error::Precondition(format!(
            "apply_action: {} is a {:?}, not an action",
            action.id, action.kind
        )));
    }
    let text = action.content.to_lowercase();
    let mut next = world.clone();
    let rule = transitions.iter().find(|t| text.contains(&t.pattern.to_lowercase()));
    let deltas = match rule {
        Some(t) => next
            .set(&t.key, &t.value, Cause::Agent { action: action.id }, None, now)
            .into_iter()
            .collect(),
        None => Vec::new(),
    };
    Ok(ActionEffect {
        world: next,
        deltas,
        recognized: rule.is_some(),
    })
}

/// Scheduled stimuli for `now` in script order, followed by the world's
/// pending changes observed on the fact channel. Clears the pending list.
pub fn emit_observations(script: &StimulusScript, world: &mut WorldState, now: Tick) -> Vec<Observation> {
    let mut out: Vec<Observation> = script
        .schedule
        .iter()
        .filter(|s| s.tick == now)
        .map(|s| Observation {
            text: s.text.clone(),
            channel: s.channel.clone(),
            priority: s.priority,
            proposition_key: s.key.clone(),
            polarity: s.polarity,
        })
        .collect();
    for d in world.pending.drain(..) {
        out.push(Observation {
            text: d.describe(),
            channel: script.fact_channel.clone(),
            priority: script.fact_priority,
            proposition_key: Some(d.key.clone()),
            polarity: Polarity::Pos,
        });
    }
    out
}
