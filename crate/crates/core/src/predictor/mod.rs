//! Next-activity prediction: each backend turns a human's interaction
//! history into a distribution over candidate goal states. Only the
//! argmax candidate enters the planning problem.

mod heuristic;
mod llm_backend;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::GoalTemplates;
use crate::llm::{LlmError, LlmGateway};
use crate::logic::{ActionSchema, DomainElements, DomainError, Literal, PredicateSignature};
use crate::scene_graph::{AgentNode, InteractionHistory, SceneGraph};

pub use heuristic::HeuristicBackend;
pub use llm_backend::LlmBackend;

/// Probabilities this close are treated as tied.
pub const TIE_EPSILON: f64 = 1e-12;
pub const DEFAULT_MAX_CANDIDATES: usize = 5;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("weights must be non-negative with a positive sum")]
    DegenerateWeights,
    #[error("goal of `{human}` uses undeclared predicate(s) {predicates:?} and backend `{backend}` cannot synthesize")]
    UncoveredGoalWithoutSynthesis {
        human: String,
        backend: String,
        predicates: Vec<String>,
    },
    #[error("synthesized elements failed validation: {0}")]
    SynthesisInvalid(String),
    #[error("no goal candidates for `{0}`: no interacted or nearby item has a goal template")]
    NoCandidates(String),
    #[error("unknown predictor backend `{0}`")]
    UnknownBackend(String),
    #[error("prediction reply rejected: {0}")]
    InvalidPrediction(String),
    #[error(transparent)]
    Gateway(LlmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalCandidate {
    pub human_id: String,
    pub goal: BTreeSet<Literal>,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    /// Some goal literal names a predicate the domain does not declare.
    #[serde(default)]
    pub uncovered: bool,
}

impl GoalCandidate {
    /// Sorted literal texts joined by spaces; used for tie-breaking.
    pub fn canonical(&self) -> String {
        canonical_goal(&self.goal)
    }
}

pub fn canonical_goal(goal: &BTreeSet<Literal>) -> String {
    let mut parts: Vec<String> = goal.iter().map(|l| l.to_string()).collect();
    parts.sort();
    parts.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalDistribution {
    pub human_id: String,
    pub candidates: Vec<GoalCandidate>,
}

impl GoalDistribution {
    pub fn total(&self) -> f64 {
        self.candidates.iter().map(|c| c.probability).sum()
    }

    pub fn has_uncovered(&self) -> bool {
        self.candidates.iter().any(|c| c.uncovered)
    }

    /// Recomputes `uncovered` flags against `domain`.
    pub fn mark_coverage(&mut self, domain: &DomainElements) {
        for c in &mut self.candidates {
            c.uncovered = c.goal.iter().any(|l| !domain.predicates.contains_key(&l.atom.predicate));
        }
    }

    pub fn uncovered_literals(&self) -> BTreeSet<Literal> {
        self.candidates
            .iter()
            .filter(|c| c.uncovered)
            .flat_map(|c| c.goal.iter().cloned())
            .collect()
    }
}

/// One unnormalized backend output.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCandidate {
    pub goal: BTreeSet<Literal>,
    pub weight: f64,
    pub rationale: Option<String>,
}

/// Divides weights by their sum, keeping order. Candidates with identical
/// goal sets are merged into the first occurrence.
pub fn renormalize(human_id: &str, raw: Vec<RawCandidate>) -> Result<GoalDistribution, PredictError> {
    if raw.iter().any(|r| r.weight.is_nan() || r.weight < 0.0 || !r.weight.is_finite()) {
        return Err(PredictError::DegenerateWeights);
    }
    let mut merged: Vec<RawCandidate> = Vec::with_capacity(raw.len());
    for r in raw {
        match merged.iter_mut().find(|m| m.goal == r.goal) {
            Some(m) => m.weight += r.weight,
            None => merged.push(r),
        }
    }
    let sum: f64 = merged.iter().map(|r| r.weight).sum();
    if merged.is_empty() || sum.is_nan() || sum <= 0.0 || merged.iter().any(|r| r.goal.is_empty()) {
        return Err(PredictError::DegenerateWeights);
    }
    Ok(GoalDistribution {
        human_id: human_id.to_string(),
        candidates: merged
            .into_iter()
            .map(|r| GoalCandidate {
                human_id: human_id.to_string(),
                goal: r.goal,
                probability: r.weight / sum,
                rationale: r.rationale,
                uncovered: false,
            })
            .collect(),
    })
}

/// Highest-probability candidate; ties go to the lexicographically
/// smallest canonical goal text.
pub fn select_goal(dist: &GoalDistribution) -> &GoalCandidate {
    let mut best = &dist.candidates[0];
    for c in &dist.candidates[1..] {
        let diff = c.probability - best.probability;
        if diff > TIE_EPSILON || (diff.abs() <= TIE_EPSILON && c.canonical() < best.canonical()) {
            best = c;
        }
    }
    best
}

/// Keeps the `cap` heaviest candidates (stable for equal weights).
pub(crate) fn cap_candidates(mut raw: Vec<RawCandidate>, cap: usize) -> Vec<RawCandidate> {
    if raw.len() > cap {
        let mut idx: Vec<usize> = (0..raw.len()).collect();
        idx.sort_by(|&a, &b| raw[b].weight.total_cmp(&raw[a].weight).then(a.cmp(&b)));
        let keep: BTreeSet<usize> = idx.into_iter().take(cap.max(1)).collect();
        let mut k = 0;
        raw.retain(|_| {
            let keep_it = keep.contains(&k);
            k += 1;
            keep_it
        });
    }
    raw
}

/// Inputs of one prediction.
pub struct PredictionContext<'a> {
    pub human: &'a AgentNode,
    pub history: &'a InteractionHistory,
    /// The latest snapshot.
    pub scene: &'a SceneGraph,
    pub domain: &'a DomainElements,
    pub templates: &'a GoalTemplates,
    pub max_candidates: usize,
}

/// New predicates and actions that make uncovered goals expressible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub predicates: Vec<PredicateSignature>,
    pub actions: Vec<ActionSchema>,
}

impl Synthesis {
    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty() && self.actions.is_empty()
    }
}

pub trait PredictorBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn predict(&self, ctx: &PredictionContext<'_>) -> Result<GoalDistribution, PredictError>;

    /// Proposes elements for the uncovered candidates of `dist`. Backends
    /// that cannot invent domain elements return
    /// `UncoveredGoalWithoutSynthesis`.
    fn synthesize(&self, dist: &GoalDistribution, domain: &DomainElements) -> Result<Synthesis, PredictError> {
        let predicates: BTreeSet<String> = dist
            .uncovered_literals()
            .into_iter()
            .map(|l| l.atom.predicate)
            .filter(|p| !domain.predicates.contains_key(p))
            .collect();
        Err(PredictError::UncoveredGoalWithoutSynthesis {
            human: dist.human_id.clone(),
            backend: self.name().to_string(),
            predicates: predicates.into_iter().collect(),
        })
    }
}

/// Whether `synthesis` added to `domain` validates and lets some action
/// add every literal in `needed`. Returns the extended domain.
pub fn check_synthesis(
    domain: &DomainElements,
    synthesis: &Synthesis,
    needed: &BTreeSet<Literal>,
) -> Result<DomainElements, String> {
    if synthesis.actions.is_empty() && synthesis.predicates.is_empty() {
        return Err("no predicates or actions proposed".into());
    }
    let mut extended = domain.clone();
    extended
        .extend(&synthesis.predicates, &synthesis.actions)
        .map_err(|e: DomainError| e.to_string())?;
    for lit in needed {
        let sig = extended
            .predicates
            .get(&lit.atom.predicate)
            .ok_or_else(|| format!("{lit} is still undeclared"))?;
        if sig.params.len() != lit.atom.args.len() {
            return Err(format!("{lit} has {} arguments, predicate takes {}", lit.atom.args.len(), sig.params.len()));
        }
        let achievable = extended.actions.values().any(|a| {
            let effects = if lit.negated { &a.del } else { &a.add };
            effects.iter().any(|e| e.predicate == lit.atom.predicate)
        });
        if !achievable {
            return Err(format!("no action achieves {lit}"));
        }
    }
    Ok(extended)
}

/// Runs the backend's synthesis when `dist` has uncovered candidates and
/// checks the result; an empty synthesis otherwise.
pub fn synthesize_missing_elements(
    dist: &GoalDistribution,
    domain: &DomainElements,
    backend: &dyn PredictorBackend,
) -> Result<Synthesis, PredictError> {
    if !dist.has_uncovered() {
        return Ok(Synthesis::default());
    }
    let synthesis = backend.synthesize(dist, domain)?;
    check_synthesis(domain, &synthesis, &dist.uncovered_literals()).map_err(PredictError::SynthesisInvalid)?;
    Ok(synthesis)
}

#[derive(Default)]
pub struct BackendRegistry {
    entries: BTreeMap<&'static str, Box<dyn PredictorBackend>>,
}

impl BackendRegistry {
    /// `heuristic` with the given discount, plus `llm` when a gateway is
    /// supplied.
    pub fn with_defaults(gamma: f64, gateway: Option<Arc<LlmGateway>>) -> Self {
        let mut r = BackendRegistry::default();
        r.register(Box::new(HeuristicBackend::new(gamma)));
        if let Some(gw) = gateway {
            r.register(Box::new(LlmBackend::new(gw)));
        }
        r
    }

    pub fn register(&mut self, backend: Box<dyn PredictorBackend>) {
        self.entries.insert(backend.name(), backend);
    }

    pub fn get(&self, name: &str) -> Result<&dyn PredictorBackend, PredictError> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| PredictError::UnknownBackend(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goal(s: &str) -> BTreeSet<Literal> {
        [s.parse().unwrap()].into()
    }

    fn raw(items: &[(&str, f64)]) -> Vec<RawCandidate> {
        items
            .iter()
            .map(|(g, w)| RawCandidate {
                goal: goal(g),
                weight: *w,
                rationale: None,
            })
            .collect()
    }

    #[test]
    fn renormalize_divides_by_sum() {
        let d = renormalize("h1", raw(&[("(cooking h1 stove)", 1.5), ("(eating h1 fridge)", 0.25)])).unwrap();
        assert!((d.candidates[0].probability - 6.0 / 7.0).abs() < 1e-12);
        assert!((d.candidates[1].probability - 1.0 / 7.0).abs() < 1e-12);
        let single = renormalize("h1", raw(&[("(p a)", 2.0)])).unwrap();
        assert_eq!(single.candidates[0].probability, 1.0);
    }

    #[test]
    fn degenerate_weights() {
        assert!(matches!(renormalize("h", raw(&[("(p a)", 0.0), ("(q a)", 0.0)])), Err(PredictError::DegenerateWeights)));
        assert!(matches!(renormalize("h", raw(&[("(p a)", 1.0), ("(q a)", -0.1)])), Err(PredictError::DegenerateWeights)));
        assert!(matches!(renormalize("h", vec![]), Err(PredictError::DegenerateWeights)));
        assert!(matches!(renormalize("h", raw(&[("(p a)", f64::NAN)])), Err(PredictError::DegenerateWeights)));
    }

    #[test]
    fn duplicate_goals_merge() {
        let d = renormalize("h", raw(&[("(p a)", 1.0), ("(q a)", 1.0), ("(p a)", 2.0)])).unwrap();
        assert_eq!(d.candidates.len(), 2);
        assert!((d.candidates[0].probability - 0.75).abs() < 1e-12);
    }

    #[test]
    fn select_argmax_and_ties() {
        let d = renormalize("h1", raw(&[("(eat m)", 1.0), ("(cooking h1 stove)", 6.0)])).unwrap();
        assert_eq!(select_goal(&d).canonical(), "(cooking h1 stove)");
        let tie = renormalize("h1", raw(&[("(cooked m)", 1.0), ("(clean t)", 1.0)])).unwrap();
        assert_eq!(select_goal(&tie).canonical(), "(clean t)");
        let one = renormalize("h1", raw(&[("(cooked m)", 3.0)])).unwrap();
        assert_eq!(select_goal(&one).canonical(), "(cooked m)");
    }

    #[test]
    fn cap_keeps_heaviest_in_order() {
        let kept = cap_candidates(raw(&[("(a x)", 1.0), ("(b x)", 3.0), ("(c x)", 2.0)]), 2);
        let names: Vec<String> = kept.iter().map(|r| canonical_goal(&r.goal)).collect();
        assert_eq!(names, ["(b x)", "(c x)"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sums_to_one_and_argmax_is_scale_invariant(
                weights in proptest::collection::vec(0.0f64..100.0, 1..8),
                scale in 1e-6f64..1e6,
            ) {
                prop_assume!(weights.iter().any(|w| *w > 0.0));
                let mk = |k: f64| -> Vec<RawCandidate> {
                    weights.iter().enumerate().map(|(i, w)| RawCandidate {
                        goal: goal(&format!("(g{i} x)")), weight: w * k, rationale: None,
                    }).collect()
                };
                let a = renormalize("h", mk(1.0)).unwrap();
                let b = renormalize("h", mk(scale)).unwrap();
                prop_assert!((a.total() - 1.0).abs() <= 1e-9);
                prop_assert!((b.total() - 1.0).abs() <= 1e-9);
                prop_assert_eq!(select_goal(&a).canonical(), select_goal(&b).canonical());
            }
        }
    }
}
