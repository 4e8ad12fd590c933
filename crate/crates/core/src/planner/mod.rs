//! Grounding of a joint problem into a propositional task, best-first
//! search over it, and independent plan validation.

mod ground;
mod search;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::GroundingError;

pub use ground::{ground_task, GroundAction, GroundedTask, State, DEFAULT_ACTION_CAP};
pub use search::{
    goal_count, h_add, plan, AstarGoalCount, GbfsAdditive, SearchConfig, SearchOutcome, SearchStrategy,
    StrategyRegistry, UniformCost,
};
pub use validate::{occupancy_conflicts, optimal_plan_bfs, trajectory, validate_plan, Verdict, DEFAULT_ORACLE_CAP};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("problem does not type-check: {0}")]
    Spec(GroundingError),
    #[error("more than {cap} ground actions")]
    ExplosionGuard { cap: usize },
    #[error("unsolvable: {0}")]
    Unsolvable(String),
    #[error("expansion limit reached after {expansions} expansions")]
    ResourceLimit { expansions: u64 },
    #[error("unknown search strategy `{0}`")]
    UnknownStrategy(String),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step}: {action} is not a ground action of the task")]
    UnknownAction { step: usize, action: String },
    #[error("reference search exceeded {cap} states")]
    OracleCapExceeded { cap: usize },
    #[error("malformed plan file: {0}")]
    PlanFile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub agent: String,
    pub action: String,
    pub args: Vec<String>,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.action)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One `(action args)` per line.
    pub fn to_classical(&self) -> String {
        self.steps.iter().map(|s| format!("{s}\n")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanMetadata {
    pub strategy: String,
    pub expansions: u64,
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub steps: Vec<PlanStep>,
    pub metadata: PlanMetadata,
}

impl PlanFile {
    pub fn new(outcome: &SearchOutcome, runtime_ms: Option<u64>) -> Self {
        PlanFile {
            steps: outcome.plan.steps.clone(),
            metadata: PlanMetadata {
                strategy: outcome.strategy.to_string(),
                expansions: outcome.expansions,
                length: outcome.plan.len(),
                runtime_ms,
            },
        }
    }

    pub fn plan(&self) -> Plan {
        Plan {
            steps: self.steps.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan files serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let f: PlanFile = serde_json::from_str(text).map_err(|e| PlanError::PlanFile(e.to_string()))?;
        if f.metadata.length != f.steps.len() {
            return Err(PlanError::PlanFile(format!(
                "metadata length {} but {} steps",
                f.metadata.length,
                f.steps.len()
            )));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::pddl::{parse_domain, parse_problem};
    use crate::grounding::{DomainSpec, ProblemSpec};

    const DOMAIN: &str = "(define (domain fetch)
  (:requirements :strips :typing :negative-preconditions)
  (:types agent room item - object)
  (:predicates (at-agent ?a - agent ?r - room) (at ?i - item ?r - room)
               (holding ?a - agent ?i - item) (connected ?x ?y - room) (busy ?r - room))
  (:action goto :parameters (?a - agent ?from ?to - room)
    :precondition (and (at-agent ?a ?from) (connected ?from ?to) (not (busy ?to)))
    :effect (and (at-agent ?a ?to) (not (at-agent ?a ?from))))
  (:action pick :parameters (?a - agent ?i - item ?r - room)
    :precondition (and (at-agent ?a ?r) (at ?i ?r))
    :effect (and (holding ?a ?i) (not (at ?i ?r))))
  (:action drop :parameters (?a - agent ?i - item ?r - room)
    :precondition (and (at-agent ?a ?r) (holding ?a ?i))
    :effect (and (at ?i ?r) (not (holding ?a ?i)))))";

    fn fetch(extra: &str, goal: &str) -> (DomainSpec, ProblemSpec) {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(&format!(
            "(define (problem p) (:domain fetch)
              (:objects r1 - agent room_a room_b {extra} - room x - item)
              (:init (at-agent r1 room_b) (at x room_a) (connected room_a room_b) (connected room_b room_a))
              (:goal (and {goal})))"
        ))
        .unwrap();
        (d, p)
    }

    fn task(extra: &str, goal: &str) -> GroundedTask {
        let (d, p) = fetch(extra, goal);
        ground_task(&d, &p, DEFAULT_ACTION_CAP).unwrap()
    }

    fn names(t: &GroundedTask, schema: &str) -> Vec<String> {
        t.actions.iter().filter(|a| a.schema == schema).map(|a| a.to_string()).collect()
    }

    #[test]
    fn grounding_counts() {
        let t = task("", "(at x room_b)");
        assert_eq!(names(&t, "goto"), ["(goto r1 room_a room_b)", "(goto r1 room_b room_a)"]);
        assert_eq!(names(&t, "pick").len(), 2);
        assert_eq!(names(&t, "drop").len(), 2);
        let t = task("room_c", "(at x room_b)");
        assert!(names(&t, "goto").iter().all(|n| !n.contains("room_c")));
    }

    #[test]
    fn fetch_plan_shape() {
        let t = task("", "(at x room_b)");
        let registry = StrategyRegistry::with_defaults();
        for name in ["ucs", "astar", "gbfs"] {
            let out = plan(&t, registry.get(name).unwrap(), &SearchConfig::default()).unwrap();
            assert_eq!(
                out.plan.to_classical(),
                "(goto r1 room_b room_a)\n(pick r1 x room_a)\n(goto r1 room_a room_b)\n(drop r1 x room_b)\n"
            );
            assert_eq!(validate_plan(&t, &out.plan).unwrap(), Verdict::Valid);
        }
        assert_eq!(optimal_plan_bfs(&t, DEFAULT_ORACLE_CAP).unwrap().len(), 4);
    }

    #[test]
    fn trivial_and_unsolvable() {
        let t = task("", "(at x room_a)");
        let out = plan(&t, &UniformCost, &SearchConfig::default()).unwrap();
        assert!(out.plan.is_empty());
        assert_eq!(validate_plan(&t, &out.plan).unwrap(), Verdict::Valid);
        assert_eq!(optimal_plan_bfs(&t, 10).unwrap().len(), 0);

        let t = task("room_c", "(at x room_c)");
        assert!(matches!(plan(&t, &UniformCost, &SearchConfig::default()), Err(PlanError::Unsolvable(_))));
        assert!(matches!(optimal_plan_bfs(&t, 10), Err(PlanError::Unsolvable(_))));
    }

    #[test]
    fn validator_reports_first_failure() {
        let t = task("", "(at x room_b)");
        let step = |a: &str, args: &[&str]| PlanStep {
            agent: "r1".into(),
            action: a.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        };
        let bad = Plan {
            steps: vec![step("pick", &["r1", "x", "room_a"])],
        };
        assert_eq!(
            validate_plan(&t, &bad).unwrap(),
            Verdict::Invalid {
                step: 0,
                missing: "(at-agent r1 room_a)".into()
            }
        );
        let short = Plan {
            steps: vec![step("goto", &["r1", "room_b", "room_a"])],
        };
        assert_eq!(
            validate_plan(&t, &short).unwrap(),
            Verdict::GoalUnmet {
                atoms: vec!["(at x room_b)".into()]
            }
        );
        let unknown = Plan {
            steps: vec![step("fly", &["r1"])],
        };
        assert!(matches!(validate_plan(&t, &unknown), Err(PlanError::UnknownAction { step: 0, .. })));
    }

    #[test]
    fn expansion_limit_and_strategy_lookup() {
        let t = task("", "(at x room_b)");
        let cfg = SearchConfig {
            max_expansions: 1,
            ..Default::default()
        };
        assert!(matches!(plan(&t, &UniformCost, &cfg), Err(PlanError::ResourceLimit { .. })));
        let r = StrategyRegistry::with_defaults();
        assert_eq!(r.get("uniform_cost").unwrap().name(), "uniform_cost");
        assert!(matches!(r.get("dfs"), Err(PlanError::UnknownStrategy(_))));
    }

    #[test]
    fn explosion_guard() {
        let (d, p) = fetch("", "(at x room_b)");
        assert!(matches!(ground_task(&d, &p, 3), Err(PlanError::ExplosionGuard { cap: 3 })));
    }

    #[test]
    fn negative_precondition_blocks_room() {
        let (d, mut p) = fetch("", "(at x room_b)");
        p.init.insert("(busy room_a)".parse().unwrap());
        let t = ground_task(&d, &p, DEFAULT_ACTION_CAP).unwrap();
        assert!(matches!(plan(&t, &UniformCost, &SearchConfig::default()), Err(PlanError::Unsolvable(_))));
    }

    #[test]
    fn seeded_search_is_reproducible() {
        let t = task("", "(at x room_b)");
        let cfg = SearchConfig {
            seed: 7,
            ..Default::default()
        };
        let a = plan(&t, &UniformCost, &cfg).unwrap();
        let b = plan(&t, &UniformCost, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.plan.len(), 4);
    }

    #[test]
    fn plan_file_round_trip() {
        let t = task("", "(at x room_b)");
        let out = plan(&t, &UniformCost, &SearchConfig::default()).unwrap();
        let f = PlanFile::new(&out, None);
        let text = f.to_json();
        assert!(!text.contains("runtime_ms"));
        assert_eq!(PlanFile::from_json(&text).unwrap(), f);
        assert!(PlanFile::new(&out, Some(3)).to_json().contains("\"runtime_ms\": 3"));
    }
}
