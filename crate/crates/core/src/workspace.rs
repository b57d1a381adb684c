//! The serial central workspace: coherence enforcement, plan formation,
//! action selection and broadcast back to the input modules.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processor::{CallLog, Processor, ProcessorRequest, RequestKind};
use crate::scoring::rank;
use crate::types::{AttentionConfig, Context, Draft, IdAllocator, Kind, ModuleId, RepId, Representation, Tick};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkspaceState {
    pub items: BTreeMap<RepId, Representation>,
    pub tick: Tick,
    pub capacity: Option<usize>,
}

impl WorkspaceState {
    pub fn new(capacity: Option<usize>) -> Self {
        WorkspaceState {
            items: BTreeMap::new(),
            tick: 0,
            capacity,
        }
    }

    pub fn from_items(items: impl IntoIterator<Item = Representation>, tick: Tick, capacity: Option<usize>) -> Self {
        WorkspaceState {
            items: items.into_iter().map(|r| (r.id, r)).collect(),
            tick,
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: RepId) -> bool {
        self.items.contains_key(&id)
    }

    pub fn of_kind(&self, kind: Kind) -> impl Iterator<Item = &Representation> {
        self.items.values().filter(move |r| r.kind == kind)
    }

    /// Pairs of items that express the same proposition with opposite polarity.
    pub fn contradictory_pairs(&self) -> Vec<(RepId, RepId)> {
        let items: Vec<&Representation> = self.items.values().collect();
        let mut pairs = Vec::new();
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                if a.contradicts(b) {
                    pairs.push((a.id, b.id));
                }
            }
        }
        pairs
    }

    /// Adds an item created inside the pipeline, evicting the lowest-ranked
    /// other items if that would exceed the capacity. Returns the evicted ids.
    pub fn admit_internal(&mut self, item: Representation, context: &Context, cfg: &AttentionConfig) -> Vec<RepId> {
        let new_id = item.id;
        self.items.insert(new_id, item);
        let Some(cap) = self.capacity else {
            return Vec::new();
        };
        let mut evicted = Vec::new();
        while self.items.len() > cap {
            let victim = rank(self.items.values().filter(|r| r.id != new_id), context, cfg)
                .last()
                .map(|(_, r)| r.id);
            match victim {
                Some(id) => {
                    self.items.remove(&id);
                    evicted.push(id);
                }
                None => break,
            }
        }
        evicted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eviction {
    pub evicted: RepId,
    /// The surviving item it contradicted.
    pub by: RepId,
}

/// Removes contradictions: walking items in rank order, an item is evicted
/// when a higher-ranked survivor expresses the same proposition with the
/// opposite polarity.
pub fn coherence_pass(
    state: &WorkspaceState,
    context: &Context,
    cfg: &AttentionConfig,
) -> (WorkspaceState, Vec<Eviction>) {
    coherence_impl(state, context, cfg, None)
}

/// As [`coherence_pass`], additionally asking the processor to judge pairs of
/// items that carry no proposition key. Used in remote mode.
pub fn coherence_pass_judged(
    state: &WorkspaceState,
    context: &Context,
    cfg: &AttentionConfig,
    processor: &dyn Processor,
    log: &mut CallLog,
) -> (WorkspaceState, Vec<Eviction>) {
    coherence_impl(state, context, cfg, Some((processor, log)))
}

fn coherence_impl(
    state: &WorkspaceState,
    context: &Context,
    cfg: &AttentionConfig,
    mut judge: Option<(&dyn Processor, &mut CallLog)>,
) -> (WorkspaceState, Vec<Eviction>) {
    let mut kept: Vec<&Representation> = Vec::new();
    let mut evictions = Vec::new();
    for (_, item) in rank(state.items.values(), context, cfg) {
        let mut rival = kept.iter().find(|k| k.contradicts(item)).map(|k| k.id);
        if rival.is_none() && item.proposition_key.is_none() {
            if let Some((processor, log)) = judge.as_mut() {
                for k in kept.iter().filter(|k| k.proposition_key.is_none()) {
                    let req = ProcessorRequest::contradiction(&k.content, &item.content);
                    match log.ask(*processor, &req) {
                        Ok(r) if r.accepted == Some(true) => {
                            rival = Some(k.id);
                            break;
                        }
                        Ok(_) => {}
                        Err(e) => log.warn(format!("{}: {e}; treated as consistent", req.key)),
                    }
                }
            }
        }
        match rival {
            Some(by) => evictions.push(Eviction { evicted: item.id, by }),
            None => kept.push(item),
        }
    }
    let mut next = state.clone();
    for e in &evictions {
        next.items.remove(&e.evicted);
    }
    (next, evictions)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanOutcome {
    pub state: WorkspaceState,
    pub formed: Option<Representation>,
    /// The plan the new one refines, removed from the state.
    pub replaced: Option<RepId>,
    /// Items displaced to keep the workspace within capacity.
    pub evicted: Vec<RepId>,
}

/// Forms at most one new or refined plan from the workspace's desires and beliefs.
///
/// A response whose text extends an existing plan's text is a refinement: it
/// replaces that plan and records it as its parent.
pub fn plan_step(
    state: &WorkspaceState,
    processor: &dyn Processor,
    context: &Context,
    cfg: &AttentionConfig,
    ids: &mut IdAllocator,
    log: &mut CallLog,
) -> PlanOutcome {
    let unchanged = PlanOutcome {
        state: state.clone(),
        ..Default::default()
    };
    if state.of_kind(Kind::Desire).next().is_none() || state.of_kind(Kind::Belief).next().is_none() {
        return unchanged;
    }
    let inputs = state
        .items
        .values()
        .filter(|r| matches!(r.kind, Kind::Desire | Kind::Belief | Kind::Plan))
        .map(|r| r.content.as_str());
    let req = ProcessorRequest::over_set(RequestKind::Plan, inputs);
    let text = match log.ask(processor, &req) {
        Ok(r) => r.lines().next().map(str::to_owned),
        Err(e) => {
            log.warn(format!("{}: {e}; no plan this tick", req.key));
            return unchanged;
        }
    };
    let Some(text) = text else {
        return unchanged;
    };
    let plans = rank(state.of_kind(Kind::Plan), context, cfg);
    if plans.iter().any(|(_, p)| same_text(&p.content, &text)) {
        return unchanged;
    }
    let parent = plans.iter().find(|(_, p)| extends(&text, &p.content)).map(|(_, p)| *p);
    let fallback = parent.map(|p| p.importance).unwrap_or(0.5);
    let importance = log.rate_or(processor, &ProcessorRequest::importance(&text), fallback);
    let (key, polarity) = parent
        .map(|p| (p.proposition_key.clone(), p.polarity))
        .unwrap_or_default();
    let plan = ids.assign(
        Draft::new(Kind::Plan, text, ModuleId::Workspace, context.now)
            .importance(importance)
            .proposition(key, polarity)
            .parent(parent.map(|p| p.id)),
    );
    let replaced = parent.map(|p| p.id);
    let mut next = state.clone();
    if let Some(id) = replaced {
        next.items.remove(&id);
    }
    let evicted = next.admit_internal(plan.clone(), context, cfg);
    PlanOutcome {
        state: next,
        formed: Some(plan),
        replaced,
        evicted,
    }
}

fn same_text(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// `detailed` adds detail to `base`: it starts with it and is strictly longer.
fn extends(detailed: &str, base: &str) -> bool {
    let d = detailed.trim().to_lowercase();
    let b = base.trim().to_lowercase();
    !b.is_empty() && d.len() > b.len() && d.starts_with(&b)
}

/// Picks at most one action, derived from the highest-ranked plan that is not
/// already being acted on (an action naming it as parent is in the state).
///
/// Returns `None` when there is no plan, or when the top two plans tie on
/// score and contradict each other: conflicting goals inhibit one another.
pub fn choose_action(
    state: &WorkspaceState,
    processor: &dyn Processor,
    context: &Context,
    cfg: &AttentionConfig,
    ids: &mut IdAllocator,
    log: &mut CallLog,
) -> Option<Representation> {
    let acting: BTreeSet<RepId> = state.of_kind(Kind::Action).filter_map(|a| a.parent).collect();
    let plans: Vec<(f64, &Representation)> = rank(state.of_kind(Kind::Plan), context, cfg)
        .into_iter()
        .filter(|(_, p)| !acting.contains(&p.id))
        .collect();
    let (top_score, top) = *plans.first()?;
    if let Some((second_score, second)) = plans.get(1) {
        if top_score == *second_score && top.contradicts(second) {
            log.warn(format!("action inhibited: {} and {} conflict", top.id, second.id));
            return None;
        }
    }
    let req = ProcessorRequest::choose_action(&top.content);
    let text = match log.ask(processor, &req) {
        Ok(r) => r.lines().next()?.to_owned(),
        Err(e) => {
            log.warn(format!("{}: {e}; no action this tick", req.key));
            return None;
        }
    };
    Some(
        ids.assign(
            Draft::new(Kind::Action, text, ModuleId::Workspace, context.now)
                .importance(top.importance)
                .proposition(top.proposition_key.clone(), top.polarity)
                .parent(Some(top.id)),
        ),
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    pub tick: Tick,
    pub deliveries: BTreeMap<ModuleId, Vec<Representation>>,
}

impl BroadcastRecord {
    pub fn delivered_to(&self, module: ModuleId) -> &[Representation] {
        self.deliveries.get(&module).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total(&self) -> usize {
        self.deliveries.values().map(Vec::len).sum()
    }
}

/// Modules the workspace may broadcast to. Perception only feeds the workspace.
pub const BROADCAST_RECEIVERS: [ModuleId; 2] = [ModuleId::Belief, ModuleId::DesireAndPlan];

pub fn validate_targets(targets: &BTreeSet<ModuleId>) -> Result<()> {
    let bad: Vec<String> = targets
        .iter()
        .filter(|t| !BROADCAST_RECEIVERS.contains(t))
        .map(|t| format!("broadcast target {t} cannot receive broadcasts"))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(bad))
    }
}

/// Routes workspace contents to modules: percepts to the belief module,
/// desires and plans to the desire-and-plan module, actions to both.
/// Beliefs came from the belief module and are not sent back.
pub fn broadcast(state: &WorkspaceState, targets: &BTreeSet<ModuleId>) -> BroadcastRecord {
    let mut record = BroadcastRecord {
        tick: state.tick,
        deliveries: targets
            .iter()
            .filter(|t| BROADCAST_RECEIVERS.contains(t))
            .map(|t| (*t, Vec::new()))
            .collect(),
    };
    for item in state.items.values() {
        let receivers: &[ModuleId] = match item.kind {
            Kind::Percept => &[ModuleId::Belief],
            Kind::Desire | Kind::Plan => &[ModuleId::DesireAndPlan],
            Kind::Action => &[ModuleId::Belief, ModuleId::DesireAndPlan],
            Kind::Belief => &[],
        };
        for r in receivers {
            if let Some(list) = record.deliveries.get_mut(r) {
                list.push(item.clone());
            }
        }
    }
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processor::{Fixture, ProcessorResponse, ScriptedProcessor};
    use crate::types::Polarity;

    fn importance_only() -> AttentionConfig {
        AttentionConfig {
            w_relevance: 0.0,
            w_recency: 0.0,
            ..Default::default()
        }
    }

    fn keyed(
        ids: &mut IdAllocator,
        kind: Kind,
        content: &str,
        key: &str,
        pol: Polarity,
        imp: f64,
        t: Tick,
    ) -> Representation {
        let source = match kind {
            Kind::Percept => ModuleId::Perception,
            Kind::Belief => ModuleId::Belief,
            _ => ModuleId::DesireAndPlan,
        };
        ids.assign(
            Draft::new(kind, content, source, t)
                .importance(imp)
                .salience(if kind == Kind::Percept { imp } else { 0.0 })
                .proposition(Some(key.into()), pol),
        )
    }

    fn plain(ids: &mut IdAllocator, kind: Kind, content: &str, imp: f64) -> Representation {
        let source = match kind {
            Kind::Percept => ModuleId::Perception,
            Kind::Belief => ModuleId::Belief,
            Kind::Action => ModuleId::Workspace,
            _ => ModuleId::DesireAndPlan,
        };
        ids.assign(Draft::new(kind, content, source, 0).importance(imp))
    }

    #[test]
    fn lower_scored_contradiction_is_evicted() {
        let mut ids = IdAllocator::default();
        let pos = keyed(&mut ids, Kind::Belief, "door is open", "door", Polarity::Pos, 0.8, 0);
        let neg = keyed(&mut ids, Kind::Belief, "door is open", "door", Polarity::Neg, 0.3, 0);
        let state = WorkspaceState::from_items([pos.clone(), neg.clone()], 0, None);
        let (next, ev) = coherence_pass(&state, &Context::new(0, ""), &importance_only());
        assert_eq!(
            ev,
            vec![Eviction {
                evicted: neg.id,
                by: pos.id
            }]
        );
        assert!(next.contains(pos.id) && !next.contains(neg.id));
        assert!(next.contradictory_pairs().is_empty());
    }

    #[test]
    fn consistent_state_is_unchanged() {
        let mut ids = IdAllocator::default();
        let a = keyed(&mut ids, Kind::Belief, "a", "k1", Polarity::Pos, 0.8, 0);
        let b = keyed(&mut ids, Kind::Belief, "b", "k2", Polarity::Neg, 0.3, 0);
        let c = plain(&mut ids, Kind::Belief, "c", 0.1);
        let state = WorkspaceState::from_items([a, b, c], 0, None);
        let (next, ev) = coherence_pass(&state, &Context::new(0, ""), &AttentionConfig::default());
        assert!(ev.is_empty());
        assert_eq!(next, state);
    }

    #[test]
    fn equal_scores_evict_the_older_item() {
        let mut ids = IdAllocator::default();
        let old = keyed(&mut ids, Kind::Belief, "x", "k", Polarity::Pos, 0.5, 1);
        let new = keyed(&mut ids, Kind::Belief, "x", "k", Polarity::Neg, 0.5, 2);
        let state = WorkspaceState::from_items([old.clone(), new.clone()], 2, None);
        let (_, ev) = coherence_pass(&state, &Context::new(2, ""), &importance_only());
        assert_eq!(
            ev,
            vec![Eviction {
                evicted: old.id,
                by: new.id
            }]
        );
    }

    #[test]
    fn same_polarity_survivors_are_kept() {
        // Pos 0.9 wins; Neg 0.5 is evicted; Pos 0.2 contradicts nothing that survives.
        let mut ids = IdAllocator::default();
        let hi = keyed(&mut ids, Kind::Belief, "hi", "k", Polarity::Pos, 0.9, 0);
        let mid = keyed(&mut ids, Kind::Belief, "mid", "k", Polarity::Neg, 0.5, 0);
        let lo = keyed(&mut ids, Kind::Belief, "lo", "k", Polarity::Pos, 0.2, 0);
        let state = WorkspaceState::from_items([hi.clone(), mid.clone(), lo.clone()], 0, None);
        let (next, _) = coherence_pass(&state, &Context::new(0, ""), &importance_only());
        assert_eq!(next.items.keys().copied().collect::<Vec<_>>(), vec![hi.id, lo.id]);
    }

    #[test]
    fn judged_coherence_uses_processor_for_unkeyed_pairs() {
        let mut ids = IdAllocator::default();
        let a = plain(&mut ids, Kind::Belief, "it is raining", 0.9);
        let b = plain(&mut ids, Kind::Belief, "the sky is clear", 0.4);
        let fixture = Fixture::new().with(
            ProcessorRequest::contradiction("it is raining", "the sky is clear").key,
            ProcessorResponse::judgment(true),
        );
        let p = ScriptedProcessor::new(fixture);
        let mut log = CallLog::default();
        let state = WorkspaceState::from_items([a.clone(), b.clone()], 0, None);
        let (next, ev) = coherence_pass_judged(&state, &Context::new(0, ""), &importance_only(), &p, &mut log);
        assert_eq!(
            ev,
            vec![Eviction {
                evicted: b.id,
                by: a.id
            }]
        );
        assert_eq!(next.len(), 1);
        assert_eq!(log.calls.len(), 1);
    }

    fn cafe_fixture() -> ScriptedProcessor {
        let fixture = Fixture::new()
            .with(
                ProcessorRequest::over_set(RequestKind::Plan, ["drink coffee", "café open at 8"]).key,
                ProcessorResponse::text("go to café at 8"),
            )
            .with(
                ProcessorRequest::over_set(RequestKind::Plan, ["drink coffee", "café open at 8", "go to café at 8"])
                    .key,
                ProcessorResponse::text("go to café at 8; order espresso"),
            )
            .with(
                ProcessorRequest::choose_action("go to café at 8").key,
                ProcessorResponse::text("go to café"),
            );
        ScriptedProcessor::new(fixture)
    }

    #[test]
    fn no_desire_no_plan() {
        let mut ids = IdAllocator::default();
        let b = plain(&mut ids, Kind::Belief, "café open at 8", 0.5);
        let state = WorkspaceState::from_items([b], 8, None);
        let mut log = CallLog::default();
        let out = plan_step(
            &state,
            &cafe_fixture(),
            &Context::new(8, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log,
        );
        assert_eq!(out.state, state);
        assert!(out.formed.is_none());
        assert!(log.calls.is_empty());
    }

    #[test]
    fn desire_and_belief_form_a_plan() {
        let mut ids = IdAllocator::default();
        let d = plain(&mut ids, Kind::Desire, "drink coffee", 0.6);
        let b = plain(&mut ids, Kind::Belief, "café open at 8", 0.5);
        let state = WorkspaceState::from_items([d, b], 8, None);
        let mut log = CallLog::default();
        let out = plan_step(
            &state,
            &cafe_fixture(),
            &Context::new(8, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log,
        );
        let plan = out.formed.expect("plan");
        assert_eq!(plan.kind, Kind::Plan);
        assert_eq!(plan.content, "go to café at 8");
        assert_eq!(plan.source, ModuleId::Workspace);
        assert!(out.replaced.is_none());
        assert!(out.state.contains(plan.id));
    }

    #[test]
    fn refined_plan_replaces_its_parent() {
        let mut ids = IdAllocator::default();
        let d = plain(&mut ids, Kind::Desire, "drink coffee", 0.6);
        let b = plain(&mut ids, Kind::Belief, "café open at 8", 0.5);
        let p = ids.assign(Draft::new(Kind::Plan, "go to café at 8", ModuleId::Workspace, 7).importance(0.5));
        let state = WorkspaceState::from_items([d, b, p.clone()], 8, None);
        let mut log = CallLog::default();
        let out = plan_step(
            &state,
            &cafe_fixture(),
            &Context::new(8, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log,
        );
        let refined = out.formed.expect("refined plan");
        assert_eq!(refined.content, "go to café at 8; order espresso");
        assert_eq!(refined.parent, Some(p.id));
        assert_eq!(out.replaced, Some(p.id));
        assert!(!out.state.contains(p.id));
        assert_eq!(out.state.of_kind(Kind::Plan).count(), 1);
    }

    #[test]
    fn plan_respects_capacity() {
        let mut ids = IdAllocator::default();
        let d = plain(&mut ids, Kind::Desire, "drink coffee", 0.6);
        let b = plain(&mut ids, Kind::Belief, "café open at 8", 0.5);
        let state = WorkspaceState::from_items([d, b], 8, Some(2));
        let mut log = CallLog::default();
        let out = plan_step(
            &state,
            &cafe_fixture(),
            &Context::new(8, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log,
        );
        assert_eq!(out.state.len(), 2);
        assert_eq!(out.evicted.len(), 1);
    }

    #[test]
    fn empty_workspace_no_action() {
        let mut ids = IdAllocator::default();
        let mut log = CallLog::default();
        let a = choose_action(
            &WorkspaceState::new(None),
            &cafe_fixture(),
            &Context::new(0, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log,
        );
        assert!(a.is_none());
    }

    #[test]
    fn single_plan_yields_its_action() {
        let mut ids = IdAllocator::default();
        let p = ids.assign(Draft::new(Kind::Plan, "go to café at 8", ModuleId::Workspace, 7).importance(0.5));
        let state = WorkspaceState::from_items([p.clone()], 8, None);
        let mut log = CallLog::default();
        let a = choose_action(
            &state,
            &cafe_fixture(),
            &Context::new(8, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log,
        )
        .expect("action");
        assert_eq!(a.kind, Kind::Action);
        assert_eq!(a.content, "go to café");
        assert_eq!(a.parent, Some(p.id));
        // Once the action is in the workspace the plan is not acted on again.
        let mut state2 = state.clone();
        state2.items.insert(a.id, a);
        assert!(choose_action(
            &state2,
            &cafe_fixture(),
            &Context::new(9, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log
        )
        .is_none());
    }

    #[test]
    fn tied_conflicting_plans_inhibit_action() {
        let mut ids = IdAllocator::default();
        let stay = keyed(&mut ids, Kind::Plan, "leave now", "leave", Polarity::Pos, 0.5, 3);
        let go = keyed(&mut ids, Kind::Plan, "leave now", "leave", Polarity::Neg, 0.5, 3);
        let state = WorkspaceState::from_items([stay, go], 3, None);
        let mut log = CallLog::default();
        let a = choose_action(
            &state,
            &cafe_fixture(),
            &Context::new(3, ""),
            &AttentionConfig::default(),
            &mut ids,
            &mut log,
        );
        assert!(a.is_none());
        assert_eq!(log.warnings.len(), 1);
    }

    #[test]
    fn broadcast_follows_flow_paths() {
        let mut ids = IdAllocator::default();
        let p = plain(&mut ids, Kind::Percept, "a bell rings", 0.5);
        let plan = plain(&mut ids, Kind::Plan, "go", 0.5);
        let belief = plain(&mut ids, Kind::Belief, "b", 0.5);
        let state = WorkspaceState::from_items([p.clone(), plan.clone(), belief], 1, None);
        let targets: BTreeSet<_> = BROADCAST_RECEIVERS.into_iter().collect();
        let rec = broadcast(&state, &targets);
        assert_eq!(rec.delivered_to(ModuleId::Belief), &[p]);
        assert_eq!(rec.delivered_to(ModuleId::DesireAndPlan), &[plan]);
        assert!(rec.delivered_to(ModuleId::Perception).is_empty());
    }

    #[test]
    fn actions_reach_both_receivers() {
        let mut ids = IdAllocator::default();
        let a = plain(&mut ids, Kind::Action, "open door", 0.5);
        let state = WorkspaceState::from_items([a.clone()], 1, None);
        let targets: BTreeSet<_> = BROADCAST_RECEIVERS.into_iter().collect();
        let rec = broadcast(&state, &targets);
        assert_eq!(rec.delivered_to(ModuleId::Belief), std::slice::from_ref(&a));
        assert_eq!(rec.delivered_to(ModuleId::DesireAndPlan), &[a]);
    }

    #[test]
    fn empty_workspace_broadcasts_nothing() {
        let targets: BTreeSet<_> = BROADCAST_RECEIVERS.into_iter().collect();
        assert_eq!(broadcast(&WorkspaceState::new(None), &targets).total(), 0);
    }

    #[test]
    fn perception_is_not_a_valid_target() {
        let targets: BTreeSet<_> = [ModuleId::Belief, ModuleId::Perception].into_iter().collect();
        assert!(validate_targets(&targets).is_err());
    }
}
