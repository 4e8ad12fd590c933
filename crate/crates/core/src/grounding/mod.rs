//! Planning specifications built from scene graphs and predictions, and
//! their PDDL text form.

mod builder;
pub mod pddl;
mod transform;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, DomainElements, DomainError, Literal};
use crate::sexpr::SexprError;

pub use builder::{activity_literals, held_items, item_object_type, ProblemBuilder};
pub use transform::{transform, HumanReport, Stage, TransformError, TransformFailure, TransformOptions, TransformReport};

#[derive(Debug, Error)]
pub enum GroundingError {
    #[error("object `{0}` is already declared")]
    DuplicateObject(String),
    #[error("item `{item}` is in room `{room}`, which is not an object")]
    UnknownRoom { item: String, room: String },
    #[error("state `{key}: {value}` of `{item}` needs predicate `{predicate}`, which the domain does not declare")]
    UndeclaredStatePredicate {
        item: String,
        key: String,
        value: String,
        predicate: String,
    },
    #[error("ill-typed goal for `{agent}`: {reason}")]
    IllTypedGoal { agent: String, reason: String },
    #[error("current action `{action}` of `{human}` cannot be bound to an item and room")]
    UnboundActivity { human: String, action: String },
    #[error("`{0}` is not a valid identifier (lowercase letters, digits, '-' and '_', starting with a letter)")]
    InvalidIdentifier(String),
    #[error("unsupported PDDL feature `{feature}` at {line}:{column}")]
    UnsupportedFeature {
        feature: String,
        line: usize,
        column: usize,
    },
    #[error(transparent)]
    Syntax(#[from] SexprError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub name: String,
    pub elements: DomainElements,
}

impl DomainSpec {
    pub fn new(name: impl Into<String>, elements: DomainElements) -> Self {
        DomainSpec {
            name: name.into(),
            elements,
        }
    }

    /// `:strips` and `:typing`, plus `:negative-preconditions` when some
    /// action uses one.
    pub fn requirements(&self) -> Vec<&'static str> {
        let mut r = vec![":strips", ":typing"];
        if self.elements.actions.values().any(|a| a.pre.iter().any(|l| l.negated)) {
            r.push(":negative-preconditions");
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Robot,
    Human,
}

/// The joint goal: one robot partition and one partition per human.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSpec {
    /// Robot id; empty when the goal carried no partition annotations.
    pub robot: String,
    pub robot_goal: BTreeSet<Literal>,
    pub humans: BTreeMap<String, BTreeSet<Literal>>,
}

impl GoalSpec {
    pub fn partition_count(&self) -> usize {
        1 + self.humans.len()
    }

    pub fn partitions(&self) -> impl Iterator<Item = (Role, &str, &BTreeSet<Literal>)> {
        std::iter::once((Role::Robot, self.robot.as_str(), &self.robot_goal))
            .chain(self.humans.iter().map(|(h, g)| (Role::Human, h.as_str(), g)))
    }

    pub fn all_literals(&self) -> BTreeSet<Literal> {
        self.partitions().flat_map(|(_, _, g)| g.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub domain_name: String,
    /// Object id to type.
    pub objects: BTreeMap<String, String>,
    /// Closed world: everything absent is false.
    pub init: BTreeSet<Atom>,
    pub goal: GoalSpec,
}

impl ProblemSpec {
    /// Type-checks objects, init and goal against `domain`.
    pub fn validate(&self, domain: &DomainSpec) -> Result<(), GroundingError> {
        let d = &domain.elements;
        for (obj, ty) in &self.objects {
            if !d.types.contains(ty) {
                return Err(DomainError::UnknownType {
                    context: format!("object `{obj}`"),
                    ty: ty.clone(),
                }
                .into());
            }
        }
        for atom in &self.init {
            d.check_ground_atom("init", atom, &self.objects)?;
        }
        for (role, agent, goal) in self.goal.partitions() {
            if role == Role::Human && !self.objects.contains_key(agent) {
                return Err(GroundingError::InvalidProblem(format!("goal partition for unknown agent `{agent}`")));
            }
            for lit in goal {
                d.check_ground_atom("goal", &lit.atom, &self.objects)
                    .map_err(|e| GroundingError::IllTypedGoal {
                        agent: agent.to_string(),
                        reason: e.to_string(),
                    })?;
            }
        }
        Ok(())
    }

    pub fn agents<'a>(&'a self, domain: &'a DomainSpec) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(|(_, ty)| domain.elements.types.is_subtype(ty, crate::logic::AGENT))
            .map(|(o, _)| o.as_str())
    }
}
