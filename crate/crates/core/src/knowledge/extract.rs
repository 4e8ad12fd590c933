use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::{ElementsDocument, KnowledgeBundle};
use crate::llm::{prompts, CompletionRequest, LlmError, LlmGateway};
use crate::logic::DomainElements;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("nothing to extract from: {0}")]
    EmptySource(&'static str),
    #[error("extracted domain failed validation: {0}")]
    ExtractionInvalid(String),
    #[error("unknown extractor `{0}`")]
    UnknownExtractor(String),
    #[error(transparent)]
    Gateway(LlmError),
}

/// Turns a knowledge bundle into validated domain elements.
pub trait ElementExtractor: Send + Sync {
    fn name(&self) -> &'static str;
    fn extract(&self, bundle: &KnowledgeBundle) -> Result<DomainElements, ExtractError>;
}

/// Uses the structured section of the knowledge base unchanged.
pub struct Passthrough;

impl ElementExtractor for Passthrough {
    fn name(&self) -> &'static str {
        "passthrough"
    }

    fn extract(&self, bundle: &KnowledgeBundle) -> Result<DomainElements, ExtractError> {
        let elements = bundle
            .structured
            .clone()
            .ok_or(ExtractError::EmptySource("knowledge base has no structured section"))?;
        elements
            .validate()
            .map_err(|e| ExtractError::ExtractionInvalid(e.to_string()))?;
        Ok(elements)
    }
}

/// Asks the model to formalize the narrative section.
pub struct LlmExtractor {
    gateway: Arc<LlmGateway>,
    max_retries: u32,
}

impl LlmExtractor {
    pub fn new(gateway: Arc<LlmGateway>) -> Self {
        LlmExtractor {
            gateway,
            max_retries: 2,
        }
    }

    pub fn prompt(bundle: &KnowledgeBundle) -> String {
        let narrative: Vec<String> = bundle
            .narrative
            .iter()
            .flat_map(|(topic, passages)| passages.iter().map(move |p| format!("[{topic}] {p}")))
            .collect();
        prompts::render(
            prompts::EXTRACT_DOMAIN,
            &[("domain", &bundle.domain), ("narrative", &narrative.join("\n"))],
        )
    }
}

impl ElementExtractor for LlmExtractor {
    fn name(&self) -> &'static str {
        "llm"
    }

    fn extract(&self, bundle: &KnowledgeBundle) -> Result<DomainElements, ExtractError> {
        if bundle.narrative.values().all(|v| v.is_empty()) {
            return Err(ExtractError::EmptySource("knowledge base has no narrative section"));
        }
        let mut req = CompletionRequest::new(LlmExtractor::prompt(bundle), prompts::domain_schema());
        req.max_retries = self.max_retries;
        self.gateway
            .complete_validated(&req, |v| {
                let doc: ElementsDocument = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
                doc.into_elements().map_err(|e| e.to_string())
            })
            .map_err(|e| match e {
                LlmError::Rejected { reason, .. } | LlmError::SchemaViolation { reason, .. } => {
                    ExtractError::ExtractionInvalid(reason)
                }
                other => ExtractError::Gateway(other),
            })
    }
}

#[derive(Default)]
pub struct ExtractorRegistry {
    entries: BTreeMap<&'static str, Box<dyn ElementExtractor>>,
}

impl ExtractorRegistry {
    /// `passthrough`, plus `llm` when a gateway is supplied.
    pub fn with_defaults(gateway: Option<Arc<LlmGateway>>) -> Self {
        let mut r = ExtractorRegistry::default();
        r.register(Box::new(Passthrough));
        if let Some(gw) = gateway {
            r.register(Box::new(LlmExtractor::new(gw)));
        }
        r
    }

    pub fn register(&mut self, extractor: Box<dyn ElementExtractor>) {
        self.entries.insert(extractor.name(), extractor);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ElementExtractor, ExtractError> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| ExtractError::UnknownExtractor(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
