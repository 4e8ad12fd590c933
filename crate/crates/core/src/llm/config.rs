use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    #[default]
    Replay,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown llm mode `{other}` (live|record|replay)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Record => "record",
            Mode::Replay => "replay",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub base_url: Option<String>,
    pub model: String,
    pub api_key: Option<String>,
    pub mode: Mode,
    pub fixtures_path: PathBuf,
    pub temperature: f64,
    pub max_retries: u32,
    pub budget_tokens: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            base_url: None,
            model: "default".into(),
            api_key: None,
            mode: Mode::Replay,
            fixtures_path: PathBuf::from("fixtures/llm"),
            temperature: 0.0,
            max_retries: 2,
            budget_tokens: 32_000,
        }
    }
}

impl LlmConfig {
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))
    }

    /// `LLM_BASE_URL`, `LLM_MODEL`, `LLM_API_KEY`, `LLM_MODE`, `LLM_FIXTURES_PATH`.
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), LlmError> {
        if let Some(v) = lookup("LLM_BASE_URL") {
            self.base_url = Some(v);
        }
        if let Some(v) = lookup("LLM_MODEL") {
            self.model = v;
        }
        if let Some(v) = lookup("LLM_API_KEY") {
            self.api_key = Some(v);
        }
        if let Some(v) = lookup("LLM_MODE") {
            self.mode = v.parse().map_err(LlmError::Config)?;
        }
        if let Some(v) = lookup("LLM_FIXTURES_PATH") {
            self.fixtures_path = PathBuf::from(v);
        }
        Ok(())
    }

    /// Config file (if any) with environment overrides applied.
    pub fn load(path: Option<&Path>) -> Result<Self, LlmError> {
        let mut cfg = match path {
            Some(p) => LlmConfig::from_file(p)?,
            None => LlmConfig::default(),
        };
        cfg.apply_overrides(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn env_overrides_file_values() {
        let mut cfg: LlmConfig = serde_json::from_str(r#"{"model":"m1","mode":"live"}"#).unwrap();
        let env: HashMap<&str, &str> = [("LLM_MODEL", "m2"), ("LLM_MODE", "replay")].into();
        cfg.apply_overrides(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.model, "m2");
        assert_eq!(cfg.mode, Mode::Replay);
        assert_eq!(cfg.temperature, 0.0);
    }

    #[test]
    fn bad_mode() {
        let mut cfg = LlmConfig::default();
        assert!(cfg.apply_overrides(|_| Some("sometimes".into())).is_err());
    }
}
