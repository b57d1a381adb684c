//! The competition function (the bottleneck into the workspace) and the
//! refresh function (active maintenance of what is already there).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::scoring::{rank_cmp, score};
use crate::types::{AttentionConfig, Context, RefreshMode, RepId, Representation};
use crate::workspace::WorkspaceState;

/// Output of one competition round: the representations that may enter the workspace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompetitionResult {
    /// Slot winners first (by salience), then ranked winners (by score).
    pub selected: Vec<Representation>,
    pub scores: BTreeMap<RepId, f64>,
    pub percept_count: usize,
}

impl CompetitionResult {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn ids(&self) -> Vec<RepId> {
        self.selected.iter().map(|r| r.id).collect()
    }
}

/// Salience order used for percept slots: salience descending, then newer, then lower id.
pub fn salience_cmp(a: &Representation, b: &Representation) -> Ordering {
    b.salience
        .total_cmp(&a.salience)
        .then_with(|| b.created_at.cmp(&a.created_at))
        .then_with(|| a.id.cmp(&b.id))
}

/// Selects at most `cfg.capacity` representations from the three input modules.
///
/// The `percept_slots` most salient percepts always get in (bottom-up); the
/// remaining capacity is filled by ranking beliefs, desires and plans under
/// [`score`] (top-down, through relevance to the situation). Unused percept
/// slots fall through to the ranked pool.
pub fn compete(
    percepts: &[Representation],
    beliefs: &[Representation],
    desires_plans: &[Representation],
    context: &Context,
    cfg: &AttentionConfig,
) -> CompetitionResult {
    let mut by_salience: Vec<&Representation> = percepts.iter().collect();
    by_salience.sort_by(|a, b| salience_cmp(a, b));
    let slot_winners: Vec<&Representation> = by_salience
        .into_iter()
        .take(cfg.percept_slots.min(cfg.capacity))
        .collect();

    let mut ranked: Vec<(f64, &Representation)> = beliefs
        .iter()
        .chain(desires_plans)
        .map(|r| (score(r, context, cfg), r))
        .collect();
    ranked.sort_by(|(sa, a), (sb, b)| rank_cmp(*sa, a, *sb, b));
    let remaining = cfg.capacity - slot_winners.len();

    let mut result = CompetitionResult {
        percept_count: slot_winners.len(),
        ..Default::default()
    };
    for p in slot_winners {
        // Slot winners carry the same kind of score as everything else so the
        // refresh median is taken over one scale.
        result.scores.insert(p.id, score(p, context, cfg));
        result.selected.push(p.clone());
    }
    for (s, r) in ranked.into_iter().take(remaining) {
        result.scores.insert(r.id, s);
        result.selected.push(r.clone());
    }
    result
}

/// Median of the incoming scores; the mean of the two central values for even
/// counts and negative infinity for an empty round.
pub fn median(scores: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = scores.into_iter().collect();
    if v.is_empty() {
        return f64::NEG_INFINITY;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Combines the current workspace with a competition round.
///
/// `MedianThreshold` discards current items scoring strictly below the median
/// of the round's scores and admits every incoming item. `BoundedCapacity`
/// ranks current and incoming items together and keeps the top `capacity`.
pub fn refresh(
    workspace: &WorkspaceState,
    incoming: &CompetitionResult,
    context: &Context,
    cfg: &AttentionConfig,
) -> WorkspaceState {
    let mut next = WorkspaceState {
        items: BTreeMap::new(),
        tick: context.now,
        capacity: workspace.capacity,
    };
    match cfg.refresh_mode {
        RefreshMode::MedianThreshold => {
            let threshold = median(incoming.scores.values().copied());
            for item in workspace.items.values() {
                if score(item, context, cfg) >= threshold {
                    next.items.insert(item.id, item.clone());
                }
            }
            for item in &incoming.selected {
                next.items.insert(item.id, item.clone());
            }
        }
        RefreshMode::BoundedCapacity => {
            let mut pool: BTreeMap<RepId, &Representation> = workspace.items.values().map(|r| (r.id, r)).collect();
            for item in &incoming.selected {
                pool.insert(item.id, item);
            }
            let mut ranked: Vec<(f64, &Representation)> =
                pool.into_values().map(|r| (score(r, context, cfg), r)).collect();
            ranked.sort_by(|(sa, a), (sb, b)| rank_cmp(*sa, a, *sb, b));
            let keep = workspace.capacity.unwrap_or(cfg.capacity).min(cfg.capacity);
            for (_, r) in ranked.into_iter().take(keep) {
                next.items.insert(r.id, r.clone());
            }
        }
    }
    next
}

/// Retires workspace percepts whose content was observed again this tick.
///
/// A workspace holds the latest observation of a stimulus, never a stale copy:
/// the fresh percept has to win its own way in through the competition. This
/// is what lets habituated stimuli drop out of the workspace.
pub fn supersede_percepts(workspace: &WorkspaceState, fresh: &[Representation]) -> (WorkspaceState, Vec<RepId>) {
    let fresh_ids: BTreeSet<RepId> = fresh.iter().map(|p| p.id).collect();
    let fresh_content: BTreeSet<&str> = fresh.iter().map(|p| p.content.as_str()).collect();
    let mut next = workspace.clone();
    let retired: Vec<RepId> = workspace
        .items
        .values()
        .filter(|r| {
            r.kind == crate::types::Kind::Percept
                && !fresh_ids.contains(&r.id)
                && fresh_content.contains(r.content.as_str())
        })
        .map(|r| r.id)
        .collect();
    for id in &retired {
        next.items.remove(id);
    }
    (next, retired)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Draft, IdAllocator, Kind, ModuleId, Tick};

    fn percept(ids: &mut IdAllocator, content: &str, salience: f64, t: Tick) -> Representation {
        ids.assign(
            Draft::new(Kind::Percept, content, ModuleId::Perception, t)
                .salience(salience)
                .importance(salience),
        )
    }

    fn belief(ids: &mut IdAllocator, content: &str, importance: f64, t: Tick) -> Representation {
        ids.assign(Draft::new(Kind::Belief, content, ModuleId::Belief, t).importance(importance))
    }

    #[test]
    fn default_capacities_fifty_ten_forty() {
        let mut ids = IdAllocator::default();
        let cfg = AttentionConfig::default();
        let percepts: Vec<_> = (0..10)
            .map(|i| percept(&mut ids, &format!("p{i}"), 0.1 * i as f64, 5))
            .collect();
        let beliefs: Vec<_> = (0..200)
            .map(|i| belief(&mut ids, &format!("b{i}"), (i % 97) as f64 / 97.0, (i % 6) as Tick))
            .collect();
        let out = compete(&percepts, &beliefs, &[], &Context::new(5, "x"), &cfg);
        assert_eq!(out.selected.len(), 50);
        assert_eq!(out.percept_count, 10);
        for p in &percepts {
            assert!(out.scores.contains_key(&p.id));
        }
        assert_eq!(out.scores.len(), 50);
    }

    #[test]
    fn empty_modules_give_empty_selection() {
        let out = compete(&[], &[], &[], &Context::new(0, ""), &AttentionConfig::default());
        assert!(out.is_empty());
        assert_eq!(out.percept_count, 0);
    }

    #[test]
    fn hand_scored_selection() {
        // Weights (1,1,1), half-life 10, now = 10, situation "garden".
        // b0: importance 0.2, relevance 1 ("garden"), age 0  -> 0.2 + 1 + 1    = 2.2
        // b1: importance 0.9, relevance 0,            age 10 -> 0.9 + 0 + 0.5  = 1.4
        // b2: importance 0.6, relevance 0,            age 0  -> 0.6 + 0 + 1    = 1.6
        // Ranked: b0, b2, b1. With capacity 4 and 2 slots: p0, p1, b0, b2.
        let mut ids = IdAllocator::default();
        let p0 = percept(&mut ids, "bright flash", 0.9, 10);
        let p1 = percept(&mut ids, "soft hum", 0.5, 10);
        let p2 = percept(&mut ids, "faint smell", 0.1, 10);
        let b0 = belief(&mut ids, "garden", 0.2, 10);
        let b1 = belief(&mut ids, "tax forms due", 0.9, 0);
        let b2 = belief(&mut ids, "kettle is on", 0.6, 10);
        let cfg = AttentionConfig {
            capacity: 4,
            percept_slots: 2,
            ..Default::default()
        };
        let out = compete(
            &[p2.clone(), p0.clone(), p1.clone()],
            &[b1.clone(), b0.clone()],
            std::slice::from_ref(&b2),
            &Context::new(10, "garden"),
            &cfg,
        );
        assert_eq!(out.ids(), vec![p0.id, p1.id, b0.id, b2.id]);
        assert!((out.scores[&b0.id] - 2.2).abs() < 1e-12);
        assert!((out.scores[&b2.id] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn unused_percept_slots_fall_through() {
        let mut ids = IdAllocator::default();
        let p = percept(&mut ids, "p", 0.5, 0);
        let beliefs: Vec<_> = (0..10).map(|i| belief(&mut ids, &format!("b{i}"), 0.5, 0)).collect();
        let cfg = AttentionConfig {
            capacity: 5,
            percept_slots: 3,
            ..Default::default()
        };
        let out = compete(&[p], &beliefs, &[], &Context::new(0, ""), &cfg);
        assert_eq!(out.selected.len(), 5);
        assert_eq!(out.percept_count, 1);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median([]), f64::NEG_INFINITY);
        assert_eq!(median([0.5]), 0.5);
        assert!((median([0.7, 0.5]) - 0.6).abs() < 1e-15);
        assert_eq!(median([3.0, 1.0, 2.0]), 2.0);
    }

    fn ws(items: &[&Representation], capacity: Option<usize>, tick: Tick) -> WorkspaceState {
        WorkspaceState {
            items: items.iter().map(|r| (r.id, (*r).clone())).collect(),
            tick,
            capacity,
        }
    }

    #[test]
    fn median_threshold_discards_below_median() {
        // Only importance counts, so scores equal importances.
        let cfg = AttentionConfig {
            w_relevance: 0.0,
            w_recency: 0.0,
            ..Default::default()
        };
        let mut ids = IdAllocator::default();
        let low = belief(&mut ids, "low", 0.2, 0);
        let high = belief(&mut ids, "high", 0.9, 0);
        let in1 = belief(&mut ids, "in1", 0.5, 1);
        let in2 = belief(&mut ids, "in2", 0.7, 1);
        let incoming = compete(&[], &[in1.clone(), in2.clone()], &[], &Context::new(1, ""), &cfg);
        let next = refresh(&ws(&[&low, &high], None, 0), &incoming, &Context::new(1, ""), &cfg);
        let kept: Vec<_> = next.items.keys().copied().collect();
        assert_eq!(kept, vec![high.id, in1.id, in2.id]);
    }

    #[test]
    fn empty_round_discards_nothing() {
        let mut ids = IdAllocator::default();
        let a = belief(&mut ids, "a", 0.0, 0);
        let cfg = AttentionConfig::default();
        let next = refresh(
            &ws(&[&a], None, 0),
            &CompetitionResult::default(),
            &Context::new(50, ""),
            &cfg,
        );
        assert!(next.items.contains_key(&a.id));
    }

    #[test]
    fn empty_workspace_takes_incoming() {
        let mut ids = IdAllocator::default();
        let b: Vec<_> = (0..4)
            .map(|i| belief(&mut ids, &format!("b{i}"), 0.1 * i as f64, 0))
            .collect();
        for mode in [RefreshMode::MedianThreshold, RefreshMode::BoundedCapacity] {
            let cfg = AttentionConfig {
                refresh_mode: mode,
                ..Default::default()
            };
            let incoming = compete(&[], &b, &[], &Context::new(0, ""), &cfg);
            let next = refresh(
                &WorkspaceState::new(cfg.workspace_capacity()),
                &incoming,
                &Context::new(0, ""),
                &cfg,
            );
            let got: BTreeSet<_> = next.items.keys().copied().collect();
            let want: BTreeSet<_> = incoming.ids().into_iter().collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn bounded_refresh_keeps_top_fifty_of_hundred() {
        let mut ids = IdAllocator::default();
        let cfg = AttentionConfig {
            refresh_mode: RefreshMode::BoundedCapacity,
            percept_slots: 0,
            w_relevance: 0.0,
            w_recency: 0.0,
            ..Default::default()
        };
        // Current items take the even hundredths, incoming the odd ones.
        let current: Vec<_> = (0..50)
            .map(|i| belief(&mut ids, "c", (2 * i) as f64 / 100.0, 0))
            .collect();
        let fresh: Vec<_> = (0..50)
            .map(|i| belief(&mut ids, "n", (2 * i + 1) as f64 / 100.0, 1))
            .collect();
        let refs: Vec<_> = current.iter().collect();
        let ctx = Context::new(1, "");
        let incoming = compete(&[], &fresh, &[], &ctx, &cfg);
        assert_eq!(incoming.selected.len(), 50);
        let next = refresh(&ws(&refs, Some(50), 0), &incoming, &ctx, &cfg);
        assert_eq!(next.items.len(), 50);
        let min_kept = next.items.values().map(|r| r.importance).fold(f64::INFINITY, f64::min);
        assert!((min_kept - 0.50).abs() < 1e-12, "lowest kept {min_kept}");
    }

    #[test]
    fn supersession_retires_stale_copies_only() {
        let mut ids = IdAllocator::default();
        let old = percept(&mut ids, "a bell rings", 0.9, 1);
        let other = percept(&mut ids, "a dog barks", 0.4, 1);
        let fresh = percept(&mut ids, "a bell rings", 0.45, 2);
        let (next, retired) = supersede_percepts(&ws(&[&old, &other], None, 1), &[fresh]);
        assert_eq!(retired, vec![old.id]);
        assert!(next.items.contains_key(&other.id));
    }
}
