//! The three parallel input modules: perception, belief and desire-and-plan.
//!
//! Each module owns one store and does its own per-tick processing. The
//! sub-steps of [`module_step`] share no data, so they may run in any order
//! or concurrently; new items are numbered only after all three have joined.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::environment::{Cause, Observation, WorldDelta};
use crate::error::{Error, Result};
use crate::processor::{CallLog, Processor, ProcessorRequest, RequestKind};
use crate::types::{AttentionConfig, Draft, IdAllocator, Kind, ModuleId, RepId, Representation, Tick};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModuleConfig {
    /// New beliefs reflection may add per tick.
    pub reflect_budget: usize,
    /// New desires generalization may add per tick.
    pub generalize_budget: usize,
    /// How many of the top beliefs (or desires) a reflection looks at.
    pub reflection_window: usize,
    /// Salience given to a percept when the processor fails.
    pub default_salience: f64,
    /// Percepts at or below this importance are never stored as beliefs.
    pub accept_threshold: f64,
    /// Optional cap on belief and desire-and-plan stores.
    pub store_cap: Option<usize>,
}

impl Default for ModuleConfig {
    fn default() -> Self {
        ModuleConfig {
            reflect_budget: 1,
            generalize_budget: 1,
            reflection_window: 5,
            default_salience: 0.5,
            accept_threshold: 0.2,
            store_cap: None,
        }
    }
}

impl ModuleConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.default_salience) {
            v.push(format!(
                "modules.default_salience {} outside [0,1]",
                self.default_salience
            ));
        }
        if !(0.0..=1.0).contains(&self.accept_threshold) {
            v.push(format!(
                "modules.accept_threshold {} outside [0,1]",
                self.accept_threshold
            ));
        }
        if self.store_cap == Some(0) {
            v.push("modules.store_cap must be positive when set".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleStore {
    pub module_id: ModuleId,
    pub kind_filter: BTreeSet<Kind>,
    pub items: BTreeMap<RepId, Representation>,
    pub cap: Option<usize>,
}

impl ModuleStore {
    pub fn new(module_id: ModuleId, kinds: &[Kind]) -> Self {
        ModuleStore {
            module_id,
            kind_filter: kinds.iter().copied().collect(),
            items: BTreeMap::new(),
            cap: None,
        }
    }

    pub fn perception() -> Self {
        Self::new(ModuleId::Perception, &[Kind::Percept])
    }

    pub fn belief() -> Self {
        Self::new(ModuleId::Belief, &[Kind::Belief])
    }

    pub fn desire_and_plan() -> Self {
        Self::new(ModuleId::DesireAndPlan, &[Kind::Desire, Kind::Plan])
    }

    pub fn with_cap(mut self, cap: Option<usize>) -> Self {
        self.cap = cap;
        self
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &Representation> {
        self.items.values()
    }

    pub fn to_vec(&self) -> Vec<Representation> {
        self.items.values().cloned().collect()
    }

    pub fn of_kind(&self, kind: Kind) -> impl Iterator<Item = &Representation> {
        self.items.values().filter(move |r| r.kind == kind)
    }

    pub fn has_content(&self, content: &str) -> bool {
        let c = content.trim().to_lowercase();
        self.items.values().any(|r| r.content.trim().to_lowercase() == c)
    }

    /// Inserts an item, enforcing the kind filter. When a cap is set the
    /// least important items (oldest first among equals) are evicted.
    pub fn insert(&mut self, item: Representation) -> Result<Vec<RepId>> {
        if !self.kind_filter.contains(&item.kind) {
            return Err(Error::Precondition(format!(
                "{} store does not accept {:?} ({})",
                self.module_id, item.kind, item.id
            )));
        }
        self.items.insert(item.id, item);
        let mut evicted = Vec::new();
        if let Some(cap) = self.cap {
            while self.items.len() > cap {
                let victim = self
                    .items
                    .values()
                    .min_by(|a, b| {
                        a.importance
                            .total_cmp(&b.importance)
                            .then(a.created_at.cmp(&b.created_at))
                            .then(a.id.cmp(&b.id))
                    })
                    .map(|r| r.id)
                    .expect("non-empty store");
                self.items.remove(&victim);
                evicted.push(victim);
            }
        }
        Ok(evicted)
    }

    pub fn remove(&mut self, id: RepId) -> Option<Representation> {
        self.items.remove(&id)
    }
}

/// Per-content record of consecutive observation, for habituation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HabituationMemory {
    seen: BTreeMap<String, (Tick, u32)>,
}

impl HabituationMemory {
    /// Number of immediately preceding consecutive ticks on which `content` was observed.
    pub fn repeat_count(&self, content: &str, now: Tick) -> u32 {
        match self.seen.get(content) {
            Some(&(last, count)) if last == now => count,
            Some(&(last, count)) if last + 1 == now => count + 1,
            _ => 0,
        }
    }

    fn observe(&mut self, content: &str, now: Tick) {
        let count = self.repeat_count(content, now);
        self.seen.insert(content.to_owned(), (now, count));
    }
}

/// Geometric fading of a repeated, unchanging stimulus: `base · factor^repeats`.
pub fn habituate(base_salience: f64, repeat_count: u32, factor: f64) -> f64 {
    if repeat_count == 0 {
        return base_salience;
    }
    base_salience * factor.powi(repeat_count.min(i32::MAX as u32) as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptDraft {
    pub draft: Draft,
    pub channel: String,
    pub repeat_count: u32,
}

/// Rates each observation's salience (the stimulus priority is the prior),
/// then applies habituation. A percept's importance is its salience.
pub fn perceive(
    observations: &[Observation],
    now: Tick,
    processor: &dyn Processor,
    memory: &HabituationMemory,
    cfg: &AttentionConfig,
    mcfg: &ModuleConfig,
    log: &mut CallLog,
) -> (Vec<PerceptDraft>, HabituationMemory) {
    let mut next_memory = memory.clone();
    let mut out = Vec::with_capacity(observations.len());
    for obs in observations {
        let content = obs.text.trim();
        if content.is_empty() {
            log.warn("empty observation ignored");
            continue;
        }
        let req = ProcessorRequest::salience(content).with_prior(obs.priority);
        let rated = log.rate_or(processor, &req, mcfg.default_salience);
        let repeats = memory.repeat_count(content, now);
        let salience = habituate(rated, repeats, cfg.habituation_factor).clamp(0.0, 1.0);
        next_memory.observe(content, now);
        out.push(PerceptDraft {
            draft: Draft::new(Kind::Percept, content, ModuleId::Perception, now)
                .salience(salience)
                .importance(salience)
                .proposition(obs.proposition_key.clone(), obs.polarity),
            channel: obs.channel.clone(),
            repeat_count: repeats,
        });
    }
    (out, next_memory)
}

fn top_by_importance<'a>(items: impl Iterator<Item = &'a Representation>, n: usize) -> Vec<&'a Representation> {
    let mut v: Vec<&Representation> = items.collect();
    v.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then(b.created_at.cmp(&a.created_at))
            .then(a.id.cmp(&b.id))
    });
    v.truncate(n);
    v
}

#[allow(clippy::too_many_arguments)]
fn generalize(
    store: &ModuleStore,
    source_kind: Kind,
    request_kind: RequestKind,
    processor: &dyn Processor,
    now: Tick,
    budget: usize,
    window: usize,
    log: &mut CallLog,
) -> Vec<Draft> {
    if budget == 0 {
        return Vec::new();
    }
    let sources = top_by_importance(store.of_kind(source_kind), window);
    if sources.is_empty() {
        return Vec::new();
    }
    let req = ProcessorRequest::over_set(request_kind, sources.iter().map(|r| r.content.as_str()));
    let response = match log.ask(processor, &req) {
        Ok(r) => r,
        Err(e) => {
            log.warn(format!("{}: {e}; nothing generalized", req.key));
            return Vec::new();
        }
    };
    let mut fresh: Vec<String> = Vec::new();
    for line in response.lines() {
        if fresh.len() == budget {
            break;
        }
        if store.has_content(line) || fresh.iter().any(|f| f.eq_ignore_ascii_case(line)) {
            continue;
        }
        fresh.push(line.to_owned());
    }
    fresh
        .into_iter()
        .map(|text| {
            let importance = log.rate_or(processor, &ProcessorRequest::importance(&text), 0.5);
            Draft::new(source_kind, text, store.module_id, now).importance(importance)
        })
        .collect()
}

/// Generalizes new beliefs from the most important recent ones.
pub fn reflect(
    beliefs: &ModuleStore,
    processor: &dyn Processor,
    now: Tick,
    budget: usize,
    window: usize,
    log: &mut CallLog,
) -> Vec<Draft> {
    generalize(
        beliefs,
        Kind::Belief,
        RequestKind::Reflect,
        processor,
        now,
        budget,
        window,
        log,
    )
}

/// Desire-side analogue of reflection. Plans in the store are ignored.
pub fn generalize_desires(
    desires: &ModuleStore,
    processor: &dyn Processor,
    now: Tick,
    budget: usize,
    window: usize,
    log: &mut CallLog,
) -> Vec<Draft> {
    generalize(
        desires,
        Kind::Desire,
        RequestKind::GeneralizeDesires,
        processor,
        now,
        budget,
        window,
        log,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleStores {
    pub perception: ModuleStore,
    pub belief: ModuleStore,
    pub desire_and_plan: ModuleStore,
    pub habituation: HabituationMemory,
}

impl Default for ModuleStores {
    fn default() -> Self {
        ModuleStores {
            perception: ModuleStore::perception(),
            belief: ModuleStore::belief(),
            desire_and_plan: ModuleStore::desire_and_plan(),
            habituation: HabituationMemory::default(),
        }
    }
}

impl ModuleStores {
    pub fn with_cap(cap: Option<usize>) -> Self {
        ModuleStores {
            belief: ModuleStore::belief().with_cap(cap),
            desire_and_plan: ModuleStore::desire_and_plan().with_cap(cap),
            ..Default::default()
        }
    }

    /// Total representations held across the three modules.
    pub fn total(&self) -> usize {
        self.perception.len() + self.belief.len() + self.desire_and_plan.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStep {
    Perceive,
    Reflect,
    Generalize,
}

impl SubStep {
    pub const CANONICAL: [SubStep; 3] = [SubStep::Perceive, SubStep::Reflect, SubStep::Generalize];
}

/// How [`module_step`] schedules its three sub-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential([SubStep; 3]),
    Threads,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleStepOutcome {
    pub stores: ModuleStores,
    pub percepts: Vec<(Representation, String, u32)>,
    pub new_beliefs: Vec<Representation>,
    pub new_desires: Vec<Representation>,
    pub evicted: Vec<(ModuleId, RepId)>,
    pub log: CallLog,
}

#[derive(Default)]
struct Partial {
    percepts: Option<(Vec<PerceptDraft>, HabituationMemory, CallLog)>,
    beliefs: Option<(Vec<Draft>, CallLog)>,
    desires: Option<(Vec<Draft>, CallLog)>,
}

/// One tick of parallel module processing.
///
/// The perception store is a sensory buffer: it holds exactly this tick's
/// percepts. Belief and desire-and-plan stores only grow here.
#[allow(clippy::too_many_arguments)]
pub fn module_step(
    stores: &ModuleStores,
    observations: &[Observation],
    processor: &dyn Processor,
    now: Tick,
    cfg: &AttentionConfig,
    mcfg: &ModuleConfig,
    ids: &mut IdAllocator,
    schedule: Schedule,
) -> ModuleStepOutcome {
    let run_perceive = || {
        let mut log = CallLog::default();
        let (drafts, mem) = perceive(observations, now, processor, &stores.habituation, cfg, mcfg, &mut log);
        (drafts, mem, log)
    };
    let run_reflect = || {
        let mut log = CallLog::default();
        let d = reflect(
            &stores.belief,
            processor,
            now,
            mcfg.reflect_budget,
            mcfg.reflection_window,
            &mut log,
        );
        (d, log)
    };
    let run_generalize = || {
        let mut log = CallLog::default();
        let d = generalize_desires(
            &stores.desire_and_plan,
            processor,
            now,
            mcfg.generalize_budget,
            mcfg.reflection_window,
            &mut log,
        );
        (d, log)
    };

    let mut partial = Partial::default();
    match schedule {
        Schedule::Sequential(order) => {
            for step in order {
                match step {
                    SubStep::Perceive => partial.percepts = Some(run_perceive()),
                    SubStep::Reflect => partial.beliefs = Some(run_reflect()),
                    SubStep::Generalize => partial.desires = Some(run_generalize()),
                }
            }
        }
        Schedule::Threads => std::thread::scope(|s| {
            let p = s.spawn(run_perceive);
            let b = s.spawn(run_reflect);
            let d = s.spawn(run_generalize);
            partial.percepts = Some(p.join().expect("perception worker panicked"));
            partial.beliefs = Some(b.join().expect("belief worker panicked"));
            partial.desires = Some(d.join().expect("desire worker panicked"));
        }),
    }
    // A sub-step left out of a sequential order simply contributes nothing.
    let (percept_drafts, habituation, plog) = partial
        .percepts
        .unwrap_or_else(|| (Vec::new(), stores.habituation.clone(), CallLog::default()));
    let (belief_drafts, blog) = partial.beliefs.unwrap_or_default();
    let (desire_drafts, dlog) = partial.desires.unwrap_or_default();

    let mut next = stores.clone();
    next.habituation = habituation;
    next.perception.items.clear();
    let mut log = CallLog::default();
    log.absorb(plog);
    log.absorb(blog);
    log.absorb(dlog);

    let mut percepts = Vec::new();
    for pd in percept_drafts {
        let rep = ids.assign(pd.draft);
        next.perception.items.insert(rep.id, rep.clone());
        percepts.push((rep, pd.channel, pd.repeat_count));
    }
    let mut evicted = Vec::new();
    let mut new_beliefs = Vec::new();
    for d in belief_drafts {
        let rep = ids.assign(d);
        evicted.extend(
            next.belief
                .insert(rep.clone())
                .expect("belief kind")
                .into_iter()
                .map(|id| (ModuleId::Belief, id)),
        );
        new_beliefs.push(rep);
    }
    let mut new_desires = Vec::new();
    for d in desire_drafts {
        let rep = ids.assign(d);
        evicted.extend(
            next.desire_and_plan
                .insert(rep.clone())
                .expect("desire kind")
                .into_iter()
                .map(|id| (ModuleId::DesireAndPlan, id)),
        );
        new_desires.push(rep);
    }
    ModuleStepOutcome {
        stores: next,
        percepts,
        new_beliefs,
        new_desires,
        evicted,
        log,
    }
}

/// What the belief module makes of a broadcast.
///
/// Percepts become beliefs when the processor accepts them and their
/// importance exceeds the acceptance threshold; content already believed is
/// not stored twice. Actions are recorded as beliefs about what the agent did.
pub fn belief_intake(
    store: &ModuleStore,
    delivered: &[Representation],
    processor: &dyn Processor,
    now: Tick,
    mcfg: &ModuleConfig,
    log: &mut CallLog,
) -> Vec<Draft> {
    let mut out: Vec<Draft> = Vec::new();
    for item in delivered {
        match item.kind {
            Kind::Percept => {
                let taken = |c: &str| store.has_content(c) || out.iter().any(|d| d.content.eq_ignore_ascii_case(c));
                if taken(&item.content) || item.importance <= mcfg.accept_threshold {
                    continue;
                }
                let req = ProcessorRequest::accept_percept(&item.content);
                let accepted = match log.ask(processor, &req) {
                    Ok(r) => r.accepted.unwrap_or(true),
                    Err(e) => {
                        log.warn(format!("{}: {e}; percept not stored", req.key));
                        false
                    }
                };
                if !accepted {
                    continue;
                }
                let importance = log.rate_or(processor, &ProcessorRequest::importance(&item.content), item.importance);
                out.push(
                    Draft::new(Kind::Belief, item.content.clone(), ModuleId::Belief, now)
                        .importance(importance)
                        .proposition(item.proposition_key.clone(), item.polarity)
                        .parent(Some(item.id)),
                );
            }
            Kind::Action => {
                let recorded =
                    store.values().any(|b| b.parent == Some(item.id)) || out.iter().any(|d| d.parent == Some(item.id));
                if !recorded {
                    out.push(
                        Draft::new(Kind::Belief, format!("I did: {}", item.content), ModuleId::Belief, now)
                            .importance(item.importance)
                            .parent(Some(item.id)),
                    );
                }
            }
            _ => {}
        }
    }
    out
}

/// Applies a broadcast to the desire-and-plan store: new desires and plans
/// are stored, a refined plan replaces its parent, and an executed plan is
/// retired. Returns `(stored, removed)`; an item may appear in both.
pub fn desire_plan_intake(store: &mut ModuleStore, delivered: &[Representation]) -> (Vec<Representation>, Vec<RepId>) {
    let mut stored = Vec::new();
    let mut removed = Vec::new();
    for item in delivered {
        match item.kind {
            Kind::Desire | Kind::Plan => {
                if store.items.contains_key(&item.id) {
                    continue;
                }
                if let Some(parent) = item.parent {
                    if store.remove(parent).is_some() {
                        removed.push(parent);
                    }
                }
                removed.extend(store.insert(item.clone()).expect("desire or plan"));
                stored.push(item.clone());
            }
            Kind::Action => {
                if let Some(plan) = item.parent {
                    if store.remove(plan).is_some() {
                        removed.push(plan);
                    }
                }
            }
            _ => {}
        }
    }
    (stored, removed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReafferenceEntry {
    pub tick: Tick,
    pub action: RepId,
    pub delta: String,
}

/// Changes in the environment brought about by the agent's own actions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReafferenceLedger {
    pub entries: Vec<ReafferenceEntry>,
}

impl ReafferenceLedger {
    /// Records `delta` if `action` caused it. Returns whether an entry was added.
    pub fn record(&mut self, action: &Representation, delta: &WorldDelta, now: Tick) -> Result<bool> {
        if action.kind != Kind::Action {
            return Err(Error::Precondition(format!(
                "reafference: {} is a {:?}, not an action",
                action.id, action.kind
            )));
        }
        if let Some(last) = self.entries.last() {
            if now < last.tick {
                return Err(Error::Precondition(format!(
                    "reafference: tick {now} precedes last entry at {}",
                    last.tick
                )));
            }
        }
        if delta.caused_by != (Cause::Agent { action: action.id }) {
            return Ok(false);
        }
        self.entries.push(ReafferenceEntry {
            tick: now,
            action: action.id,
            delta: delta.describe(),
        });
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processor::{Fixture, ProcessorResponse, ScriptedProcessor};
    use crate::types::Polarity;

    fn obs(text: &str, priority: f64) -> Observation {
        Observation {
            text: text.into(),
            channel: "main".into(),
            priority,
            proposition_key: None,
            polarity: Polarity::Pos,
        }
    }

    fn sam_fixture() -> ScriptedProcessor {
        ScriptedProcessor::new(
            Fixture::new()
                .with("salience:a fire alarm rings", ProcessorResponse::rating(0.9))
                .with(
                    "reflect:ate breakfast with sam | walked with sam",
                    ProcessorResponse::text("Sam is a friend"),
                )
                .with("importance:sam is a friend", ProcessorResponse::rating(0.7))
                .with(
                    "generalize:drink coffee | drink tea",
                    ProcessorResponse::text("enjoy warm drinks"),
                )
                .with("importance:enjoy warm drinks", ProcessorResponse::rating(0.6)),
        )
    }

    #[test]
    fn habituation_examples() {
        assert_eq!(habituate(0.8, 0, 0.5), 0.8);
        assert_eq!(habituate(0.8, 2, 0.5), 0.2);
        assert_eq!(habituate(0.8, 1, 0.0), 0.0);
        assert_eq!(habituate(0.8, 7, 0.0), 0.0);
    }

    #[test]
    fn fixture_salience_is_used() {
        let p = sam_fixture();
        let mut log = CallLog::default();
        let (out, _) = perceive(
            &[obs("a fire alarm rings", 0.3)],
            1,
            &p,
            &HabituationMemory::default(),
            &AttentionConfig::default(),
            &ModuleConfig::default(),
            &mut log,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].draft.salience, 0.9);
        assert_eq!(out[0].draft.kind, Kind::Percept);
    }

    #[test]
    fn priority_passes_through_without_fixture_entry() {
        let p = ScriptedProcessor::default();
        let mut log = CallLog::default();
        let (out, _) = perceive(
            &[obs("a siren wails", 0.95)],
            1,
            &p,
            &HabituationMemory::default(),
            &AttentionConfig::default(),
            &ModuleConfig::default(),
            &mut log,
        );
        assert_eq!(out[0].draft.salience, 0.95);
    }

    #[test]
    fn empty_observations_give_no_percepts() {
        let mut log = CallLog::default();
        let (out, _) = perceive(
            &[],
            1,
            &ScriptedProcessor::default(),
            &HabituationMemory::default(),
            &AttentionConfig::default(),
            &ModuleConfig::default(),
            &mut log,
        );
        assert!(out.is_empty());
    }

    #[test]
    fn repeated_observation_habituates() {
        let p = ScriptedProcessor::default();
        let cfg = AttentionConfig::default();
        let mut mem = HabituationMemory::default();
        let mut saliences = Vec::new();
        for t in 1..=3 {
            let mut log = CallLog::default();
            let (out, m) = perceive(
                &[obs("a clock ticks", 0.8)],
                t,
                &p,
                &mem,
                &cfg,
                &ModuleConfig::default(),
                &mut log,
            );
            mem = m;
            saliences.push(out[0].draft.salience);
        }
        assert_eq!(saliences, vec![0.8, 0.4, 0.2]);
        // A gap resets the count.
        let mut log = CallLog::default();
        let (out, _) = perceive(
            &[obs("a clock ticks", 0.8)],
            5,
            &p,
            &mem,
            &cfg,
            &ModuleConfig::default(),
            &mut log,
        );
        assert_eq!(out[0].draft.salience, 0.8);
    }

    fn store_with(module: ModuleStore, items: &[(Kind, &str, f64)], ids: &mut IdAllocator) -> ModuleStore {
        let mut s = module;
        for (k, c, imp) in items {
            s.insert(ids.assign(Draft::new(*k, *c, s.module_id, 0).importance(*imp)))
                .unwrap();
        }
        s
    }

    #[test]
    fn reflection_generalizes_from_beliefs() {
        let mut ids = IdAllocator::default();
        let beliefs = store_with(
            ModuleStore::belief(),
            &[
                (Kind::Belief, "ate breakfast with Sam", 0.4),
                (Kind::Belief, "walked with Sam", 0.3),
            ],
            &mut ids,
        );
        let mut log = CallLog::default();
        let out = reflect(&beliefs, &sam_fixture(), 1, 1, 5, &mut log);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].content, "Sam is a friend");
        assert_eq!(out[0].importance, 0.7);
        assert_eq!(out[0].kind, Kind::Belief);
        assert!(reflect(&beliefs, &sam_fixture(), 1, 0, 5, &mut log).is_empty());
        assert!(reflect(&ModuleStore::belief(), &sam_fixture(), 1, 1, 5, &mut log).is_empty());
    }

    #[test]
    fn reflection_does_not_repeat_itself() {
        let mut ids = IdAllocator::default();
        let beliefs = store_with(
            ModuleStore::belief(),
            &[
                (Kind::Belief, "ate breakfast with Sam", 0.4),
                (Kind::Belief, "walked with Sam", 0.3),
                (Kind::Belief, "Sam is a friend", 0.1),
            ],
            &mut ids,
        );
        let f = ScriptedProcessor::new(Fixture::new().with(
            "reflect:ate breakfast with sam | sam is a friend | walked with sam",
            ProcessorResponse::text("Sam is a friend"),
        ));
        let mut log = CallLog::default();
        assert!(reflect(&beliefs, &f, 2, 1, 5, &mut log).is_empty());
    }

    #[test]
    fn desires_generalize_and_plans_are_ignored() {
        let mut ids = IdAllocator::default();
        let desires = store_with(
            ModuleStore::desire_and_plan(),
            &[
                (Kind::Desire, "drink coffee", 0.5),
                (Kind::Desire, "drink tea", 0.5),
                (Kind::Plan, "boil water", 0.9),
            ],
            &mut ids,
        );
        let mut log = CallLog::default();
        let out = generalize_desires(&desires, &sam_fixture(), 1, 1, 5, &mut log);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].content, "enjoy warm drinks");
        assert_eq!(out[0].importance, 0.6);
        assert_eq!(out[0].kind, Kind::Desire);
        assert!(generalize_desires(&desires, &sam_fixture(), 1, 0, 5, &mut log).is_empty());
        let plans_only = store_with(
            ModuleStore::desire_and_plan(),
            &[(Kind::Plan, "boil water", 0.9)],
            &mut ids,
        );
        assert!(generalize_desires(&plans_only, &sam_fixture(), 1, 1, 5, &mut log).is_empty());
    }

    #[test]
    fn kind_filter_is_enforced() {
        let mut ids = IdAllocator::default();
        let mut s = ModuleStore::belief();
        let p = ids.assign(Draft::new(Kind::Plan, "x", ModuleId::DesireAndPlan, 0));
        assert!(s.insert(p).is_err());
    }

    #[test]
    fn capped_store_evicts_least_important() {
        let mut ids = IdAllocator::default();
        let mut s = ModuleStore::belief().with_cap(Some(2));
        let a = ids.assign(Draft::new(Kind::Belief, "a", ModuleId::Belief, 0).importance(0.9));
        let b = ids.assign(Draft::new(Kind::Belief, "b", ModuleId::Belief, 0).importance(0.1));
        let c = ids.assign(Draft::new(Kind::Belief, "c", ModuleId::Belief, 1).importance(0.5));
        s.insert(a).unwrap();
        s.insert(b.clone()).unwrap();
        assert_eq!(s.insert(c).unwrap(), vec![b.id]);
    }

    #[test]
    fn empty_step_is_a_fixpoint() {
        let stores = ModuleStores::default();
        let mut ids = IdAllocator::default();
        let out = module_step(
            &stores,
            &[],
            &ScriptedProcessor::default(),
            1,
            &AttentionConfig::default(),
            &ModuleConfig::default(),
            &mut ids,
            Schedule::Sequential(SubStep::CANONICAL),
        );
        assert_eq!(out.stores, stores);
        assert!(out.log.calls.is_empty());
    }

    #[test]
    fn threaded_and_sequential_schedules_agree() {
        let mut ids = IdAllocator::default();
        let belief = store_with(
            ModuleStore::belief(),
            &[
                (Kind::Belief, "ate breakfast with Sam", 0.4),
                (Kind::Belief, "walked with Sam", 0.3),
            ],
            &mut ids,
        );
        let desire_and_plan = store_with(
            ModuleStore::desire_and_plan(),
            &[(Kind::Desire, "drink coffee", 0.5), (Kind::Desire, "drink tea", 0.5)],
            &mut ids,
        );
        let stores = ModuleStores {
            belief,
            desire_and_plan,
            ..Default::default()
        };
        let observations = [obs("a fire alarm rings", 0.2), obs("a cat meows", 0.4)];
        let run = |schedule| {
            let mut ids = ids.clone();
            module_step(
                &stores,
                &observations,
                &sam_fixture(),
                1,
                &AttentionConfig::default(),
                &ModuleConfig::default(),
                &mut ids,
                schedule,
            )
        };
        let seq = run(Schedule::Sequential(SubStep::CANONICAL));
        let thr = run(Schedule::Threads);
        assert_eq!(seq, thr);
        assert_eq!(seq.stores.perception.len(), 2);
        assert_eq!(seq.new_beliefs.len(), 1);
        assert_eq!(seq.new_desires.len(), 1);
    }

    #[test]
    fn accepted_percepts_become_beliefs_once() {
        let mut ids = IdAllocator::default();
        let p = ids.assign(
            Draft::new(Kind::Percept, "the kettle whistles", ModuleId::Perception, 1)
                .salience(0.6)
                .importance(0.6),
        );
        let faint = ids.assign(
            Draft::new(Kind::Percept, "a faint hum", ModuleId::Perception, 1)
                .salience(0.1)
                .importance(0.1),
        );
        let rejected = ids.assign(
            Draft::new(Kind::Percept, "a fly buzzes", ModuleId::Perception, 1)
                .salience(0.9)
                .importance(0.9),
        );
        let f = ScriptedProcessor::new(
            Fixture::new().with("accept_percept:a fly buzzes", ProcessorResponse::judgment(false)),
        );
        let mut log = CallLog::default();
        let store = ModuleStore::belief();
        let out = belief_intake(
            &store,
            &[p.clone(), p.clone(), faint, rejected],
            &f,
            1,
            &ModuleConfig::default(),
            &mut log,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].content, "the kettle whistles");
        assert_eq!(out[0].parent, Some(p.id));
    }

    #[test]
    fn refined_plan_replaces_parent_in_store() {
        let mut ids = IdAllocator::default();
        let mut store = ModuleStore::desire_and_plan();
        let parent = ids.assign(Draft::new(Kind::Plan, "go to café at 8", ModuleId::Workspace, 1));
        store.insert(parent.clone()).unwrap();
        let child = ids.assign(
            Draft::new(Kind::Plan, "go to café at 8; order espresso", ModuleId::Workspace, 2).parent(Some(parent.id)),
        );
        let (stored, removed) = desire_plan_intake(&mut store, std::slice::from_ref(&child));
        assert_eq!(stored, vec![child.clone()]);
        assert_eq!(removed, vec![parent.id]);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn reafference_records_only_self_caused_changes() {
        let mut ids = IdAllocator::default();
        let act = ids.assign(Draft::new(Kind::Action, "open door", ModuleId::Workspace, 3));
        let mut ledger = ReafferenceLedger::default();
        let own = WorldDelta {
            tick: 3,
            key: "door".into(),
            old: Some("closed".into()),
            new: "open".into(),
            caused_by: Cause::Agent { action: act.id },
            text: None,
        };
        let rain = WorldDelta {
            tick: 3,
            key: "weather".into(),
            old: None,
            new: "rain".into(),
            caused_by: Cause::Exogenous,
            text: Some("rain starts".into()),
        };
        assert!(ledger.record(&act, &own, 3).unwrap());
        assert!(!ledger.record(&act, &rain, 3).unwrap());
        assert_eq!(ledger.entries.len(), 1);
        assert_eq!(ledger.entries[0].delta, "door: closed→open");
        let belief = ids.assign(Draft::new(Kind::Belief, "x", ModuleId::Belief, 3));
        assert!(ledger.record(&belief, &own, 3).is_err());
        assert!(ReafferenceLedger::default().entries.is_empty());
    }
}
