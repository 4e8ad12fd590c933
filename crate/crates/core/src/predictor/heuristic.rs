use std::collections::{BTreeMap, BTreeSet};

use super::{cap_candidates, canonical_goal, renormalize, GoalDistribution, PredictError, PredictionContext, PredictorBackend, RawCandidate};

/// Recency-weighted frequency over item categories: an interaction at
/// timestep t contributes `gamma^(t_n - t)` to its item's category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicBackend {
    pub gamma: f64,
}

impl Default for HeuristicBackend {
    fn default() -> Self {
        HeuristicBackend { gamma: 0.5 }
    }
}

struct CategoryScore {
    score: f64,
    /// (latest timestep, item id) of the item that instantiates the template.
    representative: (u32, String),
}

impl HeuristicBackend {
    pub fn new(gamma: f64) -> Self {
        HeuristicBackend { gamma }
    }

    /// Category scores for the events in `ctx.history`. Items missing from
    /// the latest snapshot are skipped.
    pub fn category_scores(&self, ctx: &PredictionContext<'_>) -> BTreeMap<String, f64> {
        self.scores(ctx).into_iter().map(|(c, s)| (c, s.score)).collect()
    }

    fn scores(&self, ctx: &PredictionContext<'_>) -> BTreeMap<String, CategoryScore> {
        let horizon = ctx.history.horizon;
        let mut out: BTreeMap<String, CategoryScore> = BTreeMap::new();
        for (t, item_id) in &ctx.history.item_events {
            let Some(item) = ctx.scene.item(item_id) else { continue };
            let w = self.gamma.powi(horizon.saturating_sub(*t) as i32);
            let entry = out.entry(item.category.clone()).or_insert_with(|| CategoryScore {
                score: 0.0,
                representative: (*t, item_id.clone()),
            });
            entry.score += w;
            let (rt, rid) = &entry.representative;
            if *t > *rt || (*t == *rt && item_id < rid) {
                entry.representative = (*t, item_id.clone());
            }
        }
        out
    }

    fn instantiate(&self, ctx: &PredictionContext<'_>, category: &str, item_id: &str) -> Option<BTreeSet<crate::logic::Literal>> {
        let room = ctx.scene.location_of(item_id).unwrap_or(&ctx.human.parent_room);
        ctx.templates.instantiate(category, &ctx.human.id, item_id, room)
    }

    fn fallback(&self, ctx: &PredictionContext<'_>) -> Vec<RawCandidate> {
        ctx.scene
            .items
            .iter()
            .filter(|i| i.parent_room == ctx.human.parent_room && i.accessible)
            .filter_map(|i| self.instantiate(ctx, &i.category, &i.id))
            .map(|goal| RawCandidate {
                goal,
                weight: 1.0,
                rationale: Some("no observed interactions; uniform over nearby items".into()),
            })
            .collect()
    }
}

impl PredictorBackend for HeuristicBackend {
    fn name(&self) -> &'static str {
        "heuristic"
    }

    fn predict(&self, ctx: &PredictionContext<'_>) -> Result<GoalDistribution, PredictError> {
        let mut raw: Vec<RawCandidate> = self
            .scores(ctx)
            .into_iter()
            .filter_map(|(category, s)| {
                let goal = self.instantiate(ctx, &category, &s.representative.1)?;
                Some(RawCandidate {
                    goal,
                    weight: s.score,
                    rationale: Some(format!("{category}: recency-weighted score {:.6}", s.score)),
                })
            })
            .collect();
        if raw.is_empty() {
            raw = self.fallback(ctx);
        }
        if raw.is_empty() {
            return Err(PredictError::NoCandidates(ctx.human.id.clone()));
        }
        raw.sort_by(|a, b| {
            b.weight
                .total_cmp(&a.weight)
                .then_with(|| canonical_goal(&a.goal).cmp(&canonical_goal(&b.goal)))
        });
        let raw = cap_candidates(raw, ctx.max_candidates);
        let mut dist = renormalize(&ctx.human.id, raw)?;
        dist.mark_coverage(ctx.domain);
        Ok(dist)
    }
}
