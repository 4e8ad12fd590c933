//! Records the replay fixtures under `data/fixtures/llm` by running the
//! plant pipeline in record mode against a scripted model.
//!
//! `cargo run -p awareplan --example record_fixtures -- <data dir>`

use std::path::PathBuf;
use std::sync::Arc;

use awareplan::llm::{ChatRequest, LlmConfig, LlmError, LlmGateway, Mode, ReplayStore, Transport};
use awareplan::pipeline::{run_with, Engines, PipelineConfig};
use serde_json::{json, Value};

struct Scripted {
    elements: Value,
}

impl Transport for Scripted {
    fn send(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let prompt = &request.messages.last().expect("user message").content;
        let reply = if prompt.starts_with("# extract-domain") {
            self.elements.clone()
        } else if prompt.starts_with("# predict-goals") {
            json!({"candidates": [
                {"goal": ["(watered plant1)"], "weight": 3,
                 "rationale": "h1 returned to the plant twice and has no other recent interest"},
                {"goal": ["(resting h1 sofa1)"], "weight": 1,
                 "rationale": "h1 sat on the sofa once"}
            ]})
        } else if prompt.starts_with("# synthesize-elements") {
            json!({
                "predicates": [{"name": "watered", "params": ["?p - plant"]}],
                "actions": [{"name": "water", "params": ["?a - agent", "?p - plant", "?r - room"],
                             "pre": ["(is-human ?a)", "(at-agent ?a ?r)", "(at ?p ?r)", "(not (engaged ?a))"],
                             "add": ["(watered ?p)"], "del": []}]
            })
        } else {
            return Err(LlmError::Transport(format!("no scripted reply for: {}", prompt.lines().next().unwrap_or(""))));
        };
        Ok(reply.to_string())
    }
}

fn main() {
    let data = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    let kb: Value = serde_json::from_str(&std::fs::read_to_string(data.join("household.kb.json")).expect("knowledge file"))
        .expect("knowledge json");
    let elements = json!({"types": kb["types"], "predicates": kb["predicates"], "actions": kb["actions"]});
    let fixtures = data.join("fixtures/llm");
    let gateway = LlmGateway::new(Mode::Record, "scripted", ReplayStore::open(&fixtures), Some(Box::new(Scripted { elements })));

    let mut cfg = PipelineConfig::new(data.join("plant.scene.json"), data.join("household.kb.json"), std::env::temp_dir().join("awareplan-record"));
    cfg.task = Some(data.join("plant.task.json"));
    cfg.backend = "llm".into();
    cfg.extractor = "llm".into();
    cfg.llm = LlmConfig {
        mode: Mode::Record,
        fixtures_path: fixtures.clone(),
        ..LlmConfig::default()
    };
    let engines = Engines::new(cfg.gamma, Some(Arc::new(gateway))).expect("engines");
    let summary = run_with(&cfg, &engines).expect("pipeline in record mode");
    println!("recorded fixtures in {}; plan has {} steps", fixtures.display(), summary.plan.metadata.length);
}
