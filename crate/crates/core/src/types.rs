//! Domain types shared by every stage of the agent.
//!
//! All of these are plain values. A [`Representation`] is never mutated once
//! it has been created; stages that "change" one produce a new value with a
//! fresh id.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tick index. Tick 0 is the initial state; a run executes ticks `1..=n`.
pub type Tick = u64;

/// Identity of a representation. Ids strictly increase in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RepId(pub u64);

impl fmt::Display for RepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Percept,
    Belief,
    Desire,
    Plan,
    Action,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    Pos,
    Neg,
}

impl Polarity {
    pub fn opposite(self) -> Self {
        match self {
            Polarity::Pos => Polarity::Neg,
            Polarity::Neg => Polarity::Pos,
        }
    }
}

/// The architecture's processing units. `Workspace` is the source of
/// representations created inside the serial pipeline (plans, actions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleId {
    Perception,
    Belief,
    DesireAndPlan,
    Workspace,
}

impl ModuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            ModuleId::Perception => "perception",
            ModuleId::Belief => "belief",
            ModuleId::DesireAndPlan => "desire_and_plan",
            ModuleId::Workspace => "workspace",
        }
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One unit of content: the thing that competes, is processed and is broadcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub id: RepId,
    pub kind: Kind,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposition_key: Option<String>,
    #[serde(default)]
    pub polarity: Polarity,
    pub created_at: Tick,
    pub importance: f64,
    /// Only meaningful for percepts; zero elsewhere.
    #[serde(default)]
    pub salience: f64,
    pub source: ModuleId,
    /// What this item was derived from: the plan a plan refines or an action
    /// executes, or the percept or action a belief records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<RepId>,
}

impl Representation {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.importance) {
            problems.push(format!("{}: importance {} outside [0,1]", self.id, self.importance));
        }
        if !(0.0..=1.0).contains(&self.salience) {
            problems.push(format!("{}: salience {} outside [0,1]", self.id, self.salience));
        }
        if self.kind == Kind::Percept && self.source != ModuleId::Perception {
            problems.push(format!("{}: percept sourced from {}", self.id, self.source));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(problems.join("; ")))
        }
    }

    /// True when the two items express the same proposition with opposite polarity.
    pub fn contradicts(&self, other: &Representation) -> bool {
        match (&self.proposition_key, &other.proposition_key) {
            (Some(a), Some(b)) => a == b && self.polarity != other.polarity,
            _ => false,
        }
    }
}

/// A representation before an id has been assigned.
///
/// Module sub-steps produce drafts so that id assignment can happen after
/// they join, in a fixed order, independent of how the sub-steps were scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct Draft {
    pub kind: Kind,
    pub content: String,
    pub proposition_key: Option<String>,
    pub polarity: Polarity,
    pub created_at: Tick,
    pub importance: f64,
    pub salience: f64,
    pub source: ModuleId,
    pub parent: Option<RepId>,
}

impl Draft {
    pub fn new(kind: Kind, content: impl Into<String>, source: ModuleId, created_at: Tick) -> Self {
        Draft {
            kind,
            content: content.into(),
            proposition_key: None,
            polarity: Polarity::Pos,
            created_at,
            importance: 0.0,
            salience: 0.0,
            source,
            parent: None,
        }
    }

    pub fn importance(mut self, importance: f64) -> Self {
        self.importance = importance.clamp(0.0, 1.0);
        self
    }

    pub fn salience(mut self, salience: f64) -> Self {
        self.salience = salience.clamp(0.0, 1.0);
        self
    }

    pub fn proposition(mut self, key: Option<String>, polarity: Polarity) -> Self {
        self.proposition_key = key;
        self.polarity = polarity;
        self
    }

    pub fn parent(mut self, parent: Option<RepId>) -> Self {
        self.parent = parent;
        self
    }

    pub fn finish(self, id: RepId) -> Representation {
        Representation {
            id,
            kind: self.kind,
            content: self.content,
            proposition_key: self.proposition_key,
            polarity: self.polarity,
            created_at: self.created_at,
            importance: self.importance,
            salience: self.salience,
            source: self.source,
            parent: self.parent,
        }
    }
}

/// Hands out strictly increasing ids for a run.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn starting_at(next: u64) -> Self {
        IdAllocator { next }
    }

    pub fn assign(&mut self, draft: Draft) -> Representation {
        let id = RepId(self.next);
        self.next += 1;
        draft.finish(id)
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshMode {
    /// Drop workspace items scoring strictly below the median incoming score.
    #[default]
    MedianThreshold,
    /// Rank workspace and incoming together and keep the top `capacity`.
    BoundedCapacity,
}

/// Weights, capacities and decay constants governing competition and refresh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    pub capacity: usize,
    pub percept_slots: usize,
    pub w_importance: f64,
    pub w_relevance: f64,
    pub w_recency: f64,
    pub recency_half_life: f64,
    pub refresh_mode: RefreshMode,
    pub habituation_factor: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            capacity: 50,
            percept_slots: 10,
            w_importance: 1.0,
            w_relevance: 1.0,
            w_recency: 1.0,
            recency_half_life: 10.0,
            refresh_mode: RefreshMode::MedianThreshold,
            habituation_factor: 0.5,
        }
    }
}

impl AttentionConfig {
    /// Returns every violated invariant, empty when the config is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.capacity == 0 {
            v.push("attention.capacity must be positive".to_string());
        }
        if self.percept_slots > self.capacity {
            v.push(format!(
                "attention.percept_slots ({}) exceeds capacity ({})",
                self.percept_slots, self.capacity
            ));
        }
        let weights = [
            ("w_importance", self.w_importance),
            ("w_relevance", self.w_relevance),
            ("w_recency", self.w_recency),
        ];
        for (name, w) in weights {
            if !w.is_finite() || w < 0.0 {
                v.push(format!("attention.{name} must be a non-negative real, got {w}"));
            }
        }
        if weights.iter().all(|(_, w)| *w <= 0.0) {
            v.push("attention: at least one weight must be strictly positive".to_string());
        }
        if !(self.recency_half_life.is_finite() && self.recency_half_life > 0.0) {
            v.push(format!(
                "attention.recency_half_life must be positive, got {}",
                self.recency_half_life
            ));
        }
        if !(0.0..1.0).contains(&self.habituation_factor) {
            v.push(format!(
                "attention.habituation_factor must lie in [0,1), got {}",
                self.habituation_factor
            ));
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

    /// Workspace capacity implied by the refresh mode.
    pub fn workspace_capacity(&self) -> Option<usize> {
        match self.refresh_mode {
            RefreshMode::MedianThreshold => None,
            RefreshMode::BoundedCapacity => Some(self.capacity),
        }
    }
}

/// The agent's current circumstance, against which relevance is judged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Context {
    pub now: Tick,
    pub situation: String,
    /// Relevance judgments obtained from a remote processor, keyed by item.
    /// Items without an entry fall back to the bag-of-words measure.
    pub relevance_overrides: std::collections::BTreeMap<RepId, f64>,
}

impl Context {
    pub fn new(now: Tick, situation: impl Into<String>) -> Self {
        Context {
            now,
            situation: situation.into(),
            relevance_overrides: Default::default(),
        }
    }
}
