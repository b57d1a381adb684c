//! The tick loop.
//!
//! Each tick runs, in order: environment emission, the parallel module step,
//! competition, refresh, coherence, plan formation, action selection,
//! broadcast and action application. Everything the loop does is written to
//! the trace.

use std::collections::BTreeMap;
use std::path::Path;

use crate::attention::{compete, refresh, supersede_percepts};
use crate::config::RunConfig;
use crate::environment::{apply_action, emit_observations, StimulusScript, WorldState};
use crate::error::{Error, Result};
use crate::modules::{
    belief_intake, desire_plan_intake, module_step, ModuleStores, ReafferenceLedger, Schedule, SubStep,
};
use crate::processor::{CallLog, Processor, ProcessorRequest};
use crate::trace::{to_jsonl, DiscardReason, Event, TraceEvent, TraceSink};
use crate::types::{Context, Draft, IdAllocator, Kind, ModuleId, RepId, Representation, Tick};
use crate::workspace::{broadcast, choose_action, coherence_pass, coherence_pass_judged, plan_step, WorkspaceState};

/// Points in the tick at which an observer sees the workspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Refresh,
    Coherence,
    Plan,
    Action,
    Broadcast,
}

/// Called after each workspace-changing stage.
pub trait Observer {
    fn after(&mut self, tick: Tick, stage: Stage, workspace: &WorkspaceState);
}

impl<F: FnMut(Tick, Stage, &WorkspaceState)> Observer for F {
    fn after(&mut self, tick: Tick, stage: Stage, workspace: &WorkspaceState) {
        self(tick, stage, workspace)
    }
}

struct Quiet;

impl Observer for Quiet {
    fn after(&mut self, _: Tick, _: Stage, _: &WorkspaceState) {}
}

/// A running agent: processor, world, module stores and workspace.
pub struct Agent {
    pub config: RunConfig,
    processor: Box<dyn Processor>,
    pub script: StimulusScript,
    pub world: WorldState,
    pub stores: ModuleStores,
    pub workspace: WorkspaceState,
    pub ledger: ReafferenceLedger,
    ids: IdAllocator,
    trace: TraceSink,
    relevance_cache: BTreeMap<String, f64>,
    tick: Tick,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("tick", &self.tick)
            .field("workspace", &self.workspace.len())
            .field("stored", &self.stores.total())
            .finish()
    }
}

impl Agent {
    /// Builds an agent from a configuration, loading its processor and environment.
    pub fn from_config(config: RunConfig) -> Result<Self> {
        let processor = config.build_processor()?;
        let script = config.load_environment()?;
        Self::new(config, processor, script)
    }

    pub fn new(config: RunConfig, processor: Box<dyn Processor>, script: StimulusScript) -> Result<Self> {
        config.validate()?;
        script.validate()?;
        let cap = config.modules.store_cap;
        let mut agent = Agent {
            world: WorldState::from_script(&script),
            script,
            processor,
            stores: ModuleStores::with_cap(cap),
            workspace: WorkspaceState::new(config.attention.workspace_capacity()),
            ledger: ReafferenceLedger::default(),
            ids: IdAllocator::default(),
            trace: TraceSink::default(),
            relevance_cache: BTreeMap::new(),
            tick: 0,
            config,
        };
        agent.emit(Event::Header {
            seed: agent.config.seed,
            ticks: agent.config.ticks,
            scripted: agent.processor.is_scripted(),
        })?;
        agent.seed_stores()?;
        Ok(agent)
    }

    /// Streams trace lines to `out` as they are produced, in addition to
    /// keeping them in memory. Events already emitted are written first.
    pub fn stream_trace_to(&mut self, mut out: Box<dyn std::io::Write + Send>) -> Result<()> {
        out.write_all(to_jsonl(self.trace.events()).as_bytes())
            .map_err(|e| Error::io("trace", e))?;
        let mut sink = TraceSink::streaming(out);
        for ev in std::mem::take(&mut self.trace).into_events() {
            sink.push_existing(ev);
        }
        self.trace = sink;
        Ok(())
    }

    fn seed_stores(&mut self) -> Result<()> {
        let seed = self.config.agent.clone();
        let groups = [
            (Kind::Belief, ModuleId::Belief, &seed.beliefs),
            (Kind::Desire, ModuleId::DesireAndPlan, &seed.desires),
            (Kind::Plan, ModuleId::DesireAndPlan, &seed.plans),
        ];
        for (kind, module, items) in groups {
            for item in items {
                let (content, importance, key, polarity) = item.parts();
                let rep = self.ids.assign(
                    Draft::new(kind, content, module, 0)
                        .importance(importance)
                        .proposition(key, polarity),
                );
                self.store(module, rep)?;
            }
        }
        Ok(())
    }

    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn processor(&self) -> &dyn Processor {
        self.processor.as_ref()
    }

    /// The allocator that will number the next tick's new items.
    pub fn ids(&self) -> &IdAllocator {
        &self.ids
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.events()
    }

    pub fn into_trace(self) -> Vec<TraceEvent> {
        self.trace.into_events()
    }

    fn emit(&mut self, event: Event) -> Result<()> {
        self.trace.emit(self.tick, event)
    }

    fn emit_log(&mut self, log: CallLog) -> Result<()> {
        for call in log.calls {
            self.emit(Event::ProcessorCall { call })?;
        }
        for message in log.warnings {
            tracing::warn!(tick = self.tick, "{message}");
            self.emit(Event::Warning { message })?;
        }
        Ok(())
    }

    fn store(&mut self, module: ModuleId, item: Representation) -> Result<()> {
        let target = match module {
            ModuleId::Belief => &mut self.stores.belief,
            ModuleId::DesireAndPlan => &mut self.stores.desire_and_plan,
            other => return Err(Error::Precondition(format!("cannot store into {other}"))),
        };
        let evicted = target.insert(item.clone())?;
        self.emit(Event::Stored { module, item })?;
        for id in evicted {
            self.emit(Event::Removed { module, id })?;
        }
        Ok(())
    }

    /// Relevance judgments for remote runs, cached per content.
    fn remote_relevance(&mut self, pool: &[&Representation], context: &mut Context, log: &mut CallLog) {
        if self.processor.is_scripted() {
            return;
        }
        for item in pool {
            let r = match self.relevance_cache.get(&item.content) {
                Some(r) => *r,
                None => {
                    let req = ProcessorRequest::relevance(&item.content, &context.situation);
                    let fallback = crate::scoring::bag_of_words_cosine(&item.content, &context.situation);
                    let r = log.rate_or(self.processor.as_ref(), &req, fallback);
                    self.relevance_cache.insert(item.content.clone(), r);
                    r
                }
            };
            context.relevance_overrides.insert(item.id, r);
        }
    }

    fn diff_workspace(&mut self, before: &WorkspaceState, after: &WorkspaceState, reason: DiscardReason) -> Result<()> {
        let gone: Vec<RepId> = before
            .items
            .keys()
            .filter(|id| !after.contains(**id))
            .copied()
            .collect();
        let new: Vec<Representation> = after
            .items
            .values()
            .filter(|r| !before.contains(r.id))
            .cloned()
            .collect();
        for id in gone {
            self.emit(Event::Discarded { id, reason })?;
        }
        for r in new {
            self.emit(Event::Admitted {
                id: r.id,
                kind: r.kind,
                content: r.content,
            })?;
        }
        Ok(())
    }

    /// Runs one tick.
    pub fn step(&mut self, observer: &mut dyn Observer) -> Result<()> {
        self.tick += 1;
        let now = self.tick;
        let cfg = self.config.attention.clone();
        let mcfg = self.config.modules.clone();
        let mut context = Context::new(now, self.config.agent.situation.clone());

        for delta in self.world.apply_events(&self.script, now) {
            self.emit(Event::WorldChanged { delta })?;
        }
        let observations = emit_observations(&self.script, &mut self.world, now);
        for o in &observations {
            self.emit(Event::Observed {
                channel: o.channel.clone(),
                text: o.text.clone(),
                priority: o.priority,
            })?;
        }

        let schedule = if self.config.parallel_modules {
            Schedule::Threads
        } else {
            Schedule::Sequential(SubStep::CANONICAL)
        };
        let outcome = module_step(
            &self.stores,
            &observations,
            self.processor.as_ref(),
            now,
            &cfg,
            &mcfg,
            &mut self.ids,
            schedule,
        );
        self.stores = outcome.stores;
        self.emit_log(outcome.log)?;
        for (item, channel, repeat_count) in &outcome.percepts {
            self.emit(Event::PerceptCreated {
                item: item.clone(),
                channel: channel.clone(),
                repeat_count: *repeat_count,
            })?;
        }
        for item in outcome.new_beliefs {
            self.emit(Event::Stored {
                module: ModuleId::Belief,
                item,
            })?;
        }
        for item in outcome.new_desires {
            self.emit(Event::Stored {
                module: ModuleId::DesireAndPlan,
                item,
            })?;
        }
        for (module, id) in outcome.evicted {
            self.emit(Event::Removed { module, id })?;
        }

        // Competition.
        let percepts = self.stores.perception.to_vec();
        let beliefs = self.stores.belief.to_vec();
        let desires_plans = self.stores.desire_and_plan.to_vec();
        let mut log = CallLog::default();
        {
            let pool: Vec<&Representation> = beliefs.iter().chain(&desires_plans).chain(&percepts).collect();
            self.remote_relevance(&pool, &mut context, &mut log);
        }
        self.emit_log(std::mem::take(&mut log))?;
        let competition = compete(&percepts, &beliefs, &desires_plans, &context, &cfg);
        self.emit(Event::Competed {
            selected: competition.ids(),
            scores: competition.scores.iter().map(|(k, v)| (*k, *v)).collect(),
            percept_count: competition.percept_count,
            pool_size: percepts.len() + beliefs.len() + desires_plans.len(),
        })?;

        // Refresh.
        let (fresh, superseded) = supersede_percepts(&self.workspace, &percepts);
        for id in superseded {
            self.emit(Event::Discarded {
                id,
                reason: DiscardReason::Superseded,
            })?;
        }
        let refreshed = refresh(&fresh, &competition, &context, &cfg);
        self.diff_workspace(&fresh, &refreshed, DiscardReason::Refresh)?;
        self.workspace = refreshed;
        self.emit(Event::Refreshed {
            items: self.workspace.items.keys().copied().collect(),
        })?;
        observer.after(now, Stage::Refresh, &self.workspace);

        // Coherence.
        let (coherent, evictions) = if self.processor.is_scripted() {
            coherence_pass(&self.workspace, &context, &cfg)
        } else {
            coherence_pass_judged(&self.workspace, &context, &cfg, self.processor.as_ref(), &mut log)
        };
        self.emit_log(std::mem::take(&mut log))?;
        for e in evictions {
            self.emit(Event::CoherenceEvicted {
                id: e.evicted,
                by: e.by,
            })?;
        }
        self.workspace = coherent;
        observer.after(now, Stage::Coherence, &self.workspace);

        // Planning.
        let plan = plan_step(
            &self.workspace,
            self.processor.as_ref(),
            &context,
            &cfg,
            &mut self.ids,
            &mut log,
        );
        self.emit_log(std::mem::take(&mut log))?;
        // Plans and actions enter the workspace directly; their formation
        // events double as admission records.
        if let Some(item) = plan.formed.clone() {
            if let Some(id) = plan.replaced {
                self.emit(Event::Discarded {
                    id,
                    reason: DiscardReason::Refined,
                })?;
            }
            self.emit(Event::PlanFormed {
                item: item.clone(),
                replaced: plan.replaced,
            })?;
            for id in plan.evicted {
                self.emit(Event::Discarded {
                    id,
                    reason: DiscardReason::Capacity,
                })?;
            }
        }
        self.workspace = plan.state;
        observer.after(now, Stage::Plan, &self.workspace);

        // Action selection.
        let action = choose_action(
            &self.workspace,
            self.processor.as_ref(),
            &context,
            &cfg,
            &mut self.ids,
            &mut log,
        );
        self.emit_log(std::mem::take(&mut log))?;
        if let Some(a) = &action {
            self.emit(Event::ActionChosen { item: a.clone() })?;
            let evicted = self.workspace.admit_internal(a.clone(), &context, &cfg);
            for id in evicted {
                self.emit(Event::Discarded {
                    id,
                    reason: DiscardReason::Capacity,
                })?;
            }
        }
        observer.after(now, Stage::Action, &self.workspace);

        // Broadcast.
        let record = broadcast(&self.workspace, &self.config.broadcast_targets);
        self.emit(Event::Broadcast {
            deliveries: record
                .deliveries
                .iter()
                .map(|(m, items)| (*m, items.iter().map(|r| r.id).collect()))
                .collect(),
        })?;
        let drafts = belief_intake(
            &self.stores.belief,
            record.delivered_to(ModuleId::Belief),
            self.processor.as_ref(),
            now,
            &mcfg,
            &mut log,
        );
        self.emit_log(std::mem::take(&mut log))?;
        for d in drafts {
            let rep = self.ids.assign(d);
            self.store(ModuleId::Belief, rep)?;
        }
        let (stored, removed) = desire_plan_intake(
            &mut self.stores.desire_and_plan,
            record.delivered_to(ModuleId::DesireAndPlan),
        );
        for item in stored {
            self.emit(Event::Stored {
                module: ModuleId::DesireAndPlan,
                item,
            })?;
        }
        for id in removed {
            self.emit(Event::Removed {
                module: ModuleId::DesireAndPlan,
                id,
            })?;
        }
        observer.after(now, Stage::Broadcast, &self.workspace);

        // Acting on the world.
        if let Some(a) = action {
            let effect = apply_action(&self.world, &self.script.transitions, &a, now)?;
            if !effect.recognized {
                self.emit(Event::Warning {
                    message: format!("action {:?} has no effect on the world", a.content),
                })?;
            }
            self.world = effect.world;
            for delta in effect.deltas {
                if self.ledger.record(&a, &delta, now)? {
                    let entry = self.ledger.entries.last().cloned().expect("just recorded");
                    self.emit(Event::Reafference { entry })?;
                }
                self.emit(Event::WorldChanged { delta })?;
            }
        }
        self.trace.flush()
    }

    /// Runs the configured number of ticks.
    pub fn run(&mut self) -> Result<()> {
        self.run_observed(&mut Quiet)
    }

    pub fn run_observed(&mut self, observer: &mut dyn Observer) -> Result<()> {
        while self.tick < self.config.ticks {
            self.step(observer)?;
        }
        Ok(())
    }
}

/// Runs a configuration to completion and returns its trace.
pub fn run(config: RunConfig) -> Result<Vec<TraceEvent>> {
    let mut agent = Agent::from_config(config)?;
    agent.run()?;
    Ok(agent.into_trace())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Zero-based line index of the first difference.
    pub line: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

/// Re-runs a scripted configuration and compares its trace, byte for byte,
/// with a recorded one. Returns the first divergent line, if any.
///
/// Tick count and seed are taken from the recorded header when it parses,
/// so runs made with command-line overrides replay as they were made.
pub fn replay(recorded: &str, mut config: RunConfig) -> Result<Option<Divergence>> {
    if !config.is_scripted() {
        return Err(Error::Precondition(
            "replay needs a scripted processor; remote runs are not reproducible".into(),
        ));
    }
    let header = recorded
        .lines()
        .next()
        .and_then(|l| serde_json::from_str::<TraceEvent>(l).ok());
    if let Some(TraceEvent {
        event: Event::Header { seed, ticks, .. },
        ..
    }) = header
    {
        config.seed = seed;
        config.ticks = ticks;
    }
    let fresh = to_jsonl(&run(config)?);
    let mut a = recorded.lines();
    let mut b = fresh.lines();
    let mut line = 0;
    loop {
        match (a.next(), b.next()) {
            (None, None) => return Ok(None),
            (x, y) if x == y => line += 1,
            (x, y) => {
                return Ok(Some(Divergence {
                    line,
                    expected: x.map(str::to_owned),
                    actual: y.map(str::to_owned),
                }))
            }
        }
    }
}

pub fn replay_file(trace: &Path, config: RunConfig) -> Result<Option<Divergence>> {
    let recorded = std::fs::read_to_string(trace).map_err(|e| Error::io(trace, e))?;
    replay(&recorded, config)
}
