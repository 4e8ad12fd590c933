//! Domain knowledge: types, predicates and action schemas in structured
//! form, plus natural-language passages for LLM extraction.

mod extract;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{
    ActionSchema, DomainElements, DomainError, Literal, PredicateSignature, TypeHierarchy,
};

pub use extract::{ElementExtractor, ExtractError, ExtractorRegistry, LlmExtractor, Passthrough};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("goal template for `{category}`: {message}")]
    Template { category: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t],
            OneOrMany::Many(v) => v,
        }
    }
}

/// The `types`/`predicates`/`actions` triple as it appears in documents and
/// in LLM replies.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct ElementsDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub predicates: Vec<PredicateSignature>,
    #[serde(default)]
    pub actions: Vec<ActionSchema>,
}

impl ElementsDocument {
    pub fn into_elements(self) -> Result<DomainElements, DomainError> {
        let types = match self.types {
            Some(map) => TypeHierarchy::new(map)?,
            None => TypeHierarchy::base(),
        };
        DomainElements::from_parts(types, self.predicates, self.actions)
    }

    #[cfg(test)]
    pub fn from_elements(d: &DomainElements) -> Self {
        ElementsDocument {
            types: Some(d.types.parents().clone()),
            predicates: d.predicates.values().cloned().collect(),
            actions: d.actions.values().cloned().collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnowledgeDocument {
    domain: String,
    #[serde(default)]
    types: Option<BTreeMap<String, String>>,
    #[serde(default)]
    predicates: Option<Vec<PredicateSignature>>,
    #[serde(default)]
    actions: Option<Vec<ActionSchema>>,
    #[serde(default)]
    goal_templates: BTreeMap<String, OneOrMany<Literal>>,
    #[serde(default)]
    activity_relations: BTreeMap<String, String>,
    #[serde(default)]
    narrative: BTreeMap<String, OneOrMany<String>>,
}

/// Item category to the goal literals a human pursues with such an item.
/// Templates may use `?human`, `?item` and `?room`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalTemplates(pub BTreeMap<String, Vec<Literal>>);

pub const TEMPLATE_VARS: [&str; 3] = ["?human", "?item", "?room"];

impl GoalTemplates {
    pub fn get(&self, category: &str) -> Option<&[Literal]> {
        self.0.get(category).map(Vec::as_slice)
    }

    pub fn instantiate(
        &self,
        category: &str,
        human: &str,
        item: &str,
        room: &str,
    ) -> Option<BTreeSet<Literal>> {
        let binding: BTreeMap<String, String> = TEMPLATE_VARS
            .iter()
            .zip([human, item, room])
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        self.get(category).map(|lits| {
            lits.iter()
                .map(|l| Literal {
                    negated: l.negated,
                    atom: l.atom.substitute(&binding),
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub domain: String,
    pub structured: Option<DomainElements>,
    pub narrative: BTreeMap<String, Vec<String>>,
    pub goal_templates: GoalTemplates,
    /// Activity (schema name) to the edge relation it shows up as in
    /// observed snapshots. Activities without an entry use their own name.
    pub activity_relations: BTreeMap<String, String>,
}

/// What `get_knowledge` hands to an extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBundle {
    pub domain: String,
    pub structured: Option<DomainElements>,
    pub narrative: BTreeMap<String, Vec<String>>,
}

impl KnowledgeBase {
    pub fn from_json(text: &str) -> Result<Self, KnowledgeError> {
        let doc: KnowledgeDocument =
            serde_json::from_str(text).map_err(|e| KnowledgeError::Schema(e.to_string()))?;
        let has_structure = doc.types.is_some() || doc.predicates.is_some() || doc.actions.is_some();
        let structured = if has_structure {
            let elements = ElementsDocument {
                types: doc.types,
                predicates: doc.predicates.unwrap_or_default(),
                actions: doc.actions.unwrap_or_default(),
            };
            Some(elements.into_elements()?)
        } else {
            None
        };
        let mut templates = BTreeMap::new();
        for (category, lits) in doc.goal_templates {
            let lits = lits.into_vec();
            if lits.is_empty() {
                return Err(KnowledgeError::Template {
                    category,
                    message: "empty template".into(),
                });
            }
            for l in &lits {
                if let Some(v) = l.atom.args.iter().find(|a| a.starts_with('?') && !TEMPLATE_VARS.contains(&a.as_str())) {
                    return Err(KnowledgeError::Template {
                        category,
                        message: format!("unknown variable `{v}`"),
                    });
                }
            }
            templates.insert(category, lits);
        }
        Ok(KnowledgeBase {
            domain: doc.domain,
            structured,
            narrative: doc
                .narrative
                .into_iter()
                .map(|(k, v)| (k, v.into_vec()))
                .collect(),
            goal_templates: GoalTemplates(templates),
            activity_relations: doc.activity_relations,
        })
    }

    pub fn get_knowledge(&self, domain_name: &str) -> Result<KnowledgeBundle, KnowledgeError> {
        if domain_name != self.domain {
            return Err(KnowledgeError::UnknownDomain(domain_name.to_string()));
        }
        Ok(KnowledgeBundle {
            domain: self.domain.clone(),
            structured: self.structured.clone(),
            narrative: self.narrative.clone(),
        })
    }

    pub fn relation_for(&self, activity: &str) -> String {
        self.activity_relations
            .get(activity)
            .cloned()
            .unwrap_or_else(|| activity.to_string())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const BASIC: &str = r#"{
      "domain": "household",
      "types": {"agent": "object", "room": "object", "item": "object"},
      "predicates": [
        {"name": "at-agent", "params": ["?a - agent", "?r - room"]},
        {"name": "at", "params": ["?i - item", "?r - room"]},
        {"name": "holding", "params": ["?a - agent", "?i - item"]},
        {"name": "connected", "params": ["?from - room", "?to - room"]}
      ],
      "actions": [
        {"name": "goto", "params": ["?a - agent", "?from - room", "?to - room"],
         "pre": ["(at-agent ?a ?from)", "(connected ?from ?to)"],
         "add": ["(at-agent ?a ?to)"], "del": ["(at-agent ?a ?from)"]},
        {"name": "pick", "params": ["?a - agent", "?i - item", "?r - room"],
         "pre": ["(at-agent ?a ?r)", "(at ?i ?r)"],
         "add": ["(holding ?a ?i)"], "del": ["(at ?i ?r)"]},
        {"name": "drop", "params": ["?a - agent", "?i - item", "?r - room"],
         "pre": ["(at-agent ?a ?r)", "(holding ?a ?i)"],
         "add": ["(at ?i ?r)"], "del": ["(holding ?a ?i)"]}
      ],
      "narrative": {"robot": "The robot can carry one item at a time between connected rooms."}
    }"#;

    #[test]
    fn basic_household_loads() {
        let kb = KnowledgeBase::from_json(BASIC).unwrap();
        let bundle = kb.get_knowledge("household").unwrap();
        assert_eq!(bundle.structured.unwrap().actions.len(), 3);
    }

    #[test]
    fn undeclared_predicate_rejected() {
        let doc = BASIC.replace("\"add\": [\"(holding ?a ?i)\"]", "\"add\": [\"(grasped ?a ?i)\"]");
        match KnowledgeBase::from_json(&doc) {
            Err(KnowledgeError::Domain(DomainError::UndeclaredPredicate { predicate, .. })) => {
                assert_eq!(predicate, "grasped")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_cycle_rejected() {
        let doc = BASIC.replace(
            r#"{"agent": "object", "room": "object", "item": "object"}"#,
            r#"{"agent": "item", "room": "object", "item": "agent"}"#,
        );
        assert!(matches!(
            KnowledgeBase::from_json(&doc),
            Err(KnowledgeError::Domain(DomainError::TypeCycle(_)))
        ));
    }

    #[test]
    fn unknown_domain() {
        let kb = KnowledgeBase::from_json(BASIC).unwrap();
        assert!(matches!(kb.get_knowledge("office"), Err(KnowledgeError::UnknownDomain(_))));
    }

    #[test]
    fn narrative_only() {
        let kb = KnowledgeBase::from_json(r#"{"domain":"d","narrative":{"a":["x","y"]}}"#).unwrap();
        let b = kb.get_knowledge("d").unwrap();
        assert!(b.structured.is_none());
        assert_eq!(b.narrative["a"].len(), 2);
    }

    #[test]
    fn templates_instantiate() {
        let kb = KnowledgeBase::from_json(
            r#"{"domain":"d","goal_templates":{"stove":"(cooking ?human ?item)"}}"#,
        )
        .unwrap();
        let g = kb.goal_templates.instantiate("stove", "h1", "stove1", "kitchen").unwrap();
        assert_eq!(g.iter().next().unwrap().to_string(), "(cooking h1 stove1)");
        assert!(KnowledgeBase::from_json(r#"{"domain":"d","goal_templates":{"stove":"(p ?meal)"}}"#).is_err());
    }
}
