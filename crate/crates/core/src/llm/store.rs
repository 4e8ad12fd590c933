use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::LlmError;

/// JSON text with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let ordered: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, sorted(v))).collect();
                Value::Object(ordered.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Value::Array(items) => Value::Array(items.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(v)).expect("json value serializes")
}

/// Hex SHA-256 over the prompt and the canonical schema text.
pub fn fingerprint(prompt: &str, schema: &Value) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.update([0u8]);
    h.update(canonical_json(schema).as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub fingerprint: String,
    pub prompt: String,
    pub response_schema: Value,
    pub reply: String,
}

/// Recorded replies keyed by request fingerprint, one JSON file each.
#[derive(Debug, Default)]
pub struct ReplayStore {
    dir: Option<PathBuf>,
    cache: RwLock<BTreeMap<String, String>>,
    writes: Mutex<()>,
}

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        ReplayStore {
            dir: Some(dir.into()),
            ..Default::default()
        }
    }

    pub fn in_memory() -> Self {
        ReplayStore::default()
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(&self, fp: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{fp}.json")))
    }

    pub fn lookup(&self, fp: &str) -> Result<Option<String>, LlmError> {
        if let Some(reply) = self.cache.read().expect("store lock").get(fp) {
            return Ok(Some(reply.clone()));
        }
        let Some(path) = self.path_for(fp) else {
            return Ok(None);
        };
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        let entry: FixtureEntry =
            serde_json::from_str(&text).map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        self.cache
            .write()
            .expect("store lock")
            .insert(fp.to_string(), entry.reply.clone());
        Ok(Some(entry.reply))
    }

    /// Stores a reply unless one already exists for this fingerprint.
    pub fn record(&self, prompt: &str, schema: &Value, reply: &str) -> Result<(), LlmError> {
        let fp = fingerprint(prompt, schema);
        let _guard = self.writes.lock().expect("store lock");
        if self.lookup(&fp)?.is_some() {
            return Ok(());
        }
        if let Some(path) = self.path_for(&fp) {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| LlmError::Store(e.to_string()))?;
            }
            let entry = FixtureEntry {
                fingerprint: fp.clone(),
                prompt: prompt.to_string(),
                response_schema: schema.clone(),
                reply: reply.to_string(),
            };
            let mut text = serde_json::to_string_pretty(&entry).expect("fixture serializes");
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        }
        self.cache
            .write()
            .expect("store lock")
            .insert(fp, reply.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        let mut n = self.cache.read().expect("store lock").len();
        if let Some(dir) = &self.dir {
            if let Ok(entries) = std::fs::read_dir(dir) {
                let cache = self.cache.read().expect("store lock");
                n += entries
                    .filter_map(Result::ok)
                    .filter_map(|e| e.file_name().into_string().ok())
                    .filter_map(|n| n.strip_suffix(".json").map(String::from))
                    .filter(|fp| !cache.contains_key(fp))
                    .count();
            }
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn fingerprint_ignores_key_order() {
        let a = json!({"type": "object", "required": ["x"], "properties": {"x": {"type": "string"}, "y": {"type": "number"}}});
        let b: Value = serde_json::from_str(
            r#"{"properties": {"y": {"type": "number"}, "x": {"type": "string"}}, "required": ["x"], "type": "object"}"#,
        )
        .unwrap();
        assert_eq!(fingerprint("p", &a), fingerprint("p", &b));
        assert_ne!(fingerprint("p", &a), fingerprint("q", &a));
    }

    #[test]
    fn record_writes_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReplayStore::open(dir.path());
        let schema = json!({"type": "object"});
        store.record("p", &schema, "{\"a\":1}").unwrap();
        store.record("p", &schema, "{\"a\":2}").unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let fresh = ReplayStore::open(dir.path());
        assert_eq!(fresh.lookup(&fingerprint("p", &schema)).unwrap().unwrap(), "{\"a\":1}");
        assert_eq!(fresh.len(), 1);
    }
}
