//! Retrieval-style scoring: a weighted sum of importance, relevance and recency.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{AttentionConfig, Context, Representation, Tick};

/// Exponential half-life decay: `2^(-(now - created_at) / half_life)`.
pub fn recency(created_at: Tick, now: Tick, half_life: f64) -> Result<f64> {
    if now < created_at {
        return Err(Error::Precondition(format!(
            "recency: now ({now}) precedes created_at ({created_at})"
        )));
    }
    if half_life.is_nan() || half_life <= 0.0 {
        return Err(Error::Precondition(format!(
            "recency: half_life must be positive, got {half_life}"
        )));
    }
    let age = (now - created_at) as f64;
    Ok((-age / half_life).exp2())
}

/// Lowercased alphanumeric tokens with multiplicities.
pub fn token_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        *counts.entry(token.to_lowercase()).or_insert(0) += 1;
    }
    counts
}

/// Cosine similarity between the token multisets of two texts.
pub fn bag_of_words_cosine(a: &str, b: &str) -> f64 {
    let ta = token_counts(a);
    let tb = token_counts(b);
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let dot: u64 = ta
        .iter()
        .filter_map(|(tok, &n)| tb.get(tok).map(|&m| u64::from(n) * u64::from(m)))
        .sum();
    if dot == 0 {
        return 0.0;
    }
    let sq = |t: &BTreeMap<String, u32>| -> u64 { t.values().map(|&n| u64::from(n) * u64::from(n)).sum() };
    // One square root of the integer product keeps identical texts at exactly 1.
    (dot as f64 / ((sq(&ta) * sq(&tb)) as f64).sqrt()).clamp(0.0, 1.0)
}

/// Relevance of an item to the current situation, in `[0, 1]`.
///
/// Uses a processor-supplied judgment when the context carries one for this
/// item, otherwise the bag-of-words cosine.
pub fn relevance(item: &Representation, context: &Context) -> f64 {
    match context.relevance_overrides.get(&item.id) {
        Some(r) => r.clamp(0.0, 1.0),
        None => bag_of_words_cosine(&item.content, &context.situation),
    }
}

pub fn score(item: &Representation, context: &Context, cfg: &AttentionConfig) -> f64 {
    // Items created "in the future" relative to the context are treated as fresh.
    let rec = recency(item.created_at.min(context.now), context.now, cfg.recency_half_life).unwrap_or(1.0);
    cfg.w_importance * item.importance + cfg.w_relevance * relevance(item, context) + cfg.w_recency * rec
}

/// Total order used everywhere an attention decision ranks items:
/// score descending, then newer first, then lower id first.
pub fn rank_cmp(a_score: f64, a: &Representation, b_score: f64, b: &Representation) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then_with(|| b.created_at.cmp(&a.created_at))
        .then_with(|| a.id.cmp(&b.id))
}

/// Scores every item and returns them in rank order.
pub fn rank<'a>(
    items: impl IntoIterator<Item = &'a Representation>,
    context: &Context,
    cfg: &AttentionConfig,
) -> Vec<(f64, &'a Representation)> {
    let mut scored: Vec<_> = items
        .into_iter()
        .map(|item| (score(item, context, cfg), item))
        .collect();
    scored.sort_by(|(sa, a), (sb, b)| rank_cmp(*sa, a, *sb, b));
    scored
}
