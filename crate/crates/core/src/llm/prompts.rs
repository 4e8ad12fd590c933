//! Versioned prompt templates and the reply schemas that go with them.
//! Changing a template changes request fingerprints, so recorded fixtures
//! must be re-recorded.

use serde_json::{json, Value};

pub const EXTRACT_DOMAIN: &str = include_str!("../../prompts/extract_domain.v1.txt");
pub const PREDICT_GOALS: &str = include_str!("../../prompts/predict_goals.v1.txt");
pub const SYNTHESIZE: &str = include_str!("../../prompts/synthesize.v1.txt");

/// Replaces every `{{key}}` with its value.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

fn params_schema() -> Value {
    json!({"type": "array", "items": {"type": "string"}})
}

fn predicates_schema() -> Value {
    json!({"type": "array", "items": {
        "type": "object", "required": ["name", "params"],
        "properties": {"name": {"type": "string"}, "params": params_schema()}
    }})
}

fn actions_schema() -> Value {
    let lits = json!({"type": "array", "items": {"type": "string"}});
    json!({"type": "array", "items": {
        "type": "object", "required": ["name", "params", "pre", "add", "del"],
        "properties": {"name": {"type": "string"}, "params": params_schema(),
                       "pre": lits, "add": lits, "del": lits}
    }})
}

pub fn domain_schema() -> Value {
    json!({
        "type": "object",
        "required": ["types", "predicates", "actions"],
        "properties": {
            "types": {"type": "object"},
            "predicates": predicates_schema(),
            "actions": actions_schema()
        }
    })
}

pub fn prediction_schema() -> Value {
    json!({
        "type": "object",
        "required": ["candidates"],
        "properties": {"candidates": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["goal", "weight"],
            "properties": {
                "goal": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                "weight": {"type": "number"},
                "rationale": {"type": "string"}
            }
        }}}
    })
}

pub fn synthesis_schema() -> Value {
    json!({
        "type": "object",
        "required": ["predicates", "actions"],
        "properties": {"predicates": predicates_schema(), "actions": actions_schema()}
    })
}
