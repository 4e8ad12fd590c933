use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Deserialize;

use super::{
    cap_candidates, check_synthesis, renormalize, GoalDistribution, PredictError, PredictionContext, PredictorBackend,
    RawCandidate, Synthesis,
};
use crate::llm::{prompts, CompletionRequest, LlmError, LlmGateway};
use crate::logic::{DomainElements, Literal};
use crate::scene_graph::SceneGraph;

/// Asks the model for weighted goal candidates and, when needed, for the
/// domain elements that make them expressible.
pub struct LlmBackend {
    gateway: Arc<LlmGateway>,
    pub max_retries: u32,
}

#[derive(Deserialize)]
struct Reply {
    candidates: Vec<ReplyCandidate>,
}

#[derive(Deserialize)]
struct ReplyCandidate {
    goal: Vec<String>,
    weight: f64,
    #[serde(default)]
    rationale: Option<String>,
}

fn describe_scene(sg: &SceneGraph) -> String {
    let mut lines = Vec::new();
    for r in &sg.rooms {
        let n: Vec<&str> = r.neighbors.iter().map(String::as_str).collect();
        lines.push(format!("room {} (neighbors: {})", r.id, n.join(", ")));
    }
    for i in &sg.items {
        let mut line = format!("item {} category {} in {}", i.id, i.category, i.parent_room);
        if !i.accessible {
            line.push_str(" (inaccessible)");
        }
        for (k, v) in &i.states {
            line.push_str(&format!(" {k}={v}"));
        }
        lines.push(line);
    }
    for a in &sg.agents {
        let kind = match a.kind {
            crate::scene_graph::AgentKind::Robot => "robot",
            crate::scene_graph::AgentKind::Human => "human",
        };
        lines.push(format!("{kind} {} in {}", a.id, a.parent_room));
    }
    lines.join("\n")
}

fn describe_predicates(domain: &DomainElements) -> String {
    domain
        .predicates
        .values()
        .map(|p| {
            let params: Vec<String> = p.params.iter().map(|x| x.to_string()).collect();
            format!("({} {})", p.name, params.join(" ")).replace(" )", ")")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn gateway_error(e: LlmError, invalid: fn(String) -> PredictError) -> PredictError {
    match e {
        LlmError::Rejected { reason, .. } | LlmError::SchemaViolation { reason, .. } => invalid(reason),
        other => PredictError::Gateway(other),
    }
}

impl LlmBackend {
    pub fn new(gateway: Arc<LlmGateway>) -> Self {
        LlmBackend { gateway, max_retries: 2 }
    }

    pub fn prediction_prompt(ctx: &PredictionContext<'_>) -> String {
        let history: Vec<String> = ctx
            .history
            .edge_events
            .iter()
            .map(|(t, e)| format!("{t}: {} -{}-> {}", e.source, e.relation, e.target))
            .collect();
        let history = if history.is_empty() { "(none)".to_string() } else { history.join("\n") };
        prompts::render(
            prompts::PREDICT_GOALS,
            &[
                ("human", &ctx.human.id),
                ("room", &ctx.human.parent_room),
                ("current_action", ctx.human.current_action.as_deref().unwrap_or("nothing")),
                ("scene", &describe_scene(ctx.scene)),
                ("history", &history),
                ("predicates", &describe_predicates(ctx.domain)),
                ("max_candidates", &ctx.max_candidates.to_string()),
            ],
        )
    }

    pub fn synthesis_prompt(dist: &GoalDistribution, domain: &DomainElements) -> String {
        let uncovered: Vec<String> = dist.uncovered_literals().iter().map(|l| l.to_string()).collect();
        let types: Vec<String> = domain.types.parents().iter().map(|(t, p)| format!("{t}: {p}")).collect();
        let actions: Vec<String> = domain
            .actions
            .values()
            .map(|a| serde_json::to_string(a).expect("action schemas serialize"))
            .collect();
        prompts::render(
            prompts::SYNTHESIZE,
            &[
                ("uncovered", &uncovered.join("\n")),
                ("types", &types.join("\n")),
                ("predicates", &describe_predicates(domain)),
                ("actions", &actions.join("\n")),
            ],
        )
    }

    fn parse_candidates(value: &serde_json::Value, human: &str, cap: usize) -> Result<GoalDistribution, String> {
        let reply: Reply = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
        let mut raw = Vec::with_capacity(reply.candidates.len());
        for (k, c) in reply.candidates.into_iter().enumerate() {
            let mut goal = BTreeSet::new();
            for text in &c.goal {
                let lit: Literal = text.parse().map_err(|e| format!("candidate {k}: {e}"))?;
                if !lit.atom.is_ground() {
                    return Err(format!("candidate {k}: literal {lit} is not ground"));
                }
                goal.insert(lit);
            }
            raw.push(RawCandidate {
                goal,
                weight: c.weight,
                rationale: c.rationale,
            });
        }
        renormalize(human, cap_candidates(raw, cap)).map_err(|e| e.to_string())
    }
}

impl PredictorBackend for LlmBackend {
    fn name(&self) -> &'static str {
        "llm"
    }

    fn predict(&self, ctx: &PredictionContext<'_>) -> Result<GoalDistribution, PredictError> {
        let mut req = CompletionRequest::new(LlmBackend::prediction_prompt(ctx), prompts::prediction_schema());
        req.max_retries = self.max_retries;
        let mut dist = self
            .gateway
            .complete_validated(&req, |v| LlmBackend::parse_candidates(v, &ctx.human.id, ctx.max_candidates))
            .map_err(|e| gateway_error(e, PredictError::InvalidPrediction))?;
        dist.mark_coverage(ctx.domain);
        Ok(dist)
    }

    fn synthesize(&self, dist: &GoalDistribution, domain: &DomainElements) -> Result<Synthesis, PredictError> {
        let needed = dist.uncovered_literals();
        let mut req = CompletionRequest::new(LlmBackend::synthesis_prompt(dist, domain), prompts::synthesis_schema());
        req.max_retries = self.max_retries;
        self.gateway
            .complete_validated(&req, |v| {
                let s: Synthesis = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
                check_synthesis(domain, &s, &needed)?;
                Ok(s)
            })
            .map_err(|e| gateway_error(e, PredictError::SynthesisInvalid))
    }
}
