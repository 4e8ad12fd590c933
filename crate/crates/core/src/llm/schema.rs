//! Structural check of a JSON value against a small JSON-Schema subset:
//! `type`, `properties`, `required`, `items`, `minItems`, `enum`.

use serde_json::Value;

pub fn check(value: &Value, schema: &Value) -> Result<(), String> {
    check_at("$", value, schema)
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => true,
    }
}

fn check_at(path: &str, v: &Value, schema: &Value) -> Result<(), String> {
    let Some(s) = schema.as_object() else {
        return Ok(());
    };
    match s.get("type") {
        Some(Value::String(ty)) if !type_matches(ty, v) => {
            return Err(format!("{path}: expected {ty}"));
        }
        Some(Value::Array(tys)) if !tys.iter().filter_map(Value::as_str).any(|t| type_matches(t, v)) => {
            return Err(format!("{path}: value matches none of the allowed types"));
        }
        _ => {}
    }
    if let Some(Value::Array(options)) = s.get("enum") {
        if !options.contains(v) {
            return Err(format!("{path}: value not in enum"));
        }
    }
    if let Some(obj) = v.as_object() {
        if let Some(Value::Array(req)) = s.get("required") {
            for key in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required field `{key}`"));
                }
            }
        }
        if let Some(Value::Object(props)) = s.get("properties") {
            for (k, sub) in props {
                if let Some(child) = obj.get(k) {
                    check_at(&format!("{path}.{k}"), child, sub)?;
                }
            }
        }
    }
    if let Some(items) = v.as_array() {
        if let Some(min) = s.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                return Err(format!("{path}: expected at least {min} items"));
            }
        }
        if let Some(sub) = s.get("items") {
            for (i, child) in items.iter().enumerate() {
                check_at(&format!("{path}[{i}]"), child, sub)?;
            }
        }
    }
    Ok(())
}
