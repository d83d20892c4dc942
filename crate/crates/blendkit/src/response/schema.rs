//! Validation of parsed trees against the supported schema subset.
//!
//! The supported keywords are `type`, `properties`, `required`, and
//! `items`. Anything else in a schema document is a loud
//! [`SchemaError::UnsupportedKeyword`], never silently ignored.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// One place where the tree does not conform to the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    /// Location in the validated tree (or of the absent value). `$` is the
    /// root; list elements render as `key[index]`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unsupported schema keyword {keyword:?} at {path}")]
    UnsupportedKeyword { path: String, keyword: String },
    #[error("invalid schema at {path}: {message}")]
    Invalid { path: String, message: String },
}

const TYPE_TOKENS: [&str; 7] = [
    "string", "integer", "number", "boolean", "object", "array", "null",
];

/// Structural check of a schema document: only supported keywords, with
/// well-formed payloads. Run at description load time so a bad schema is a
/// description error, not a runtime surprise.
pub fn check_schema(schema: &Value) -> Result<(), SchemaError> {
    check_schema_at(schema, "$")
}

fn check_schema_at(schema: &Value, path: &str) -> Result<(), SchemaError> {
    let map = schema.as_object().ok_or_else(|| SchemaError::Invalid {
        path: path.to_owned(),
        message: "schema must be an object".to_owned(),
    })?;
    for (keyword, payload) in map {
        match keyword.as_str() {
            "type" => {
                let token = payload.as_str().ok_or_else(|| SchemaError::Invalid {
                    path: path.to_owned(),
                    message: "\"type\" must be a string".to_owned(),
                })?;
                if !TYPE_TOKENS.contains(&token) {
                    return Err(SchemaError::Invalid {
                        path: path.to_owned(),
                        message: format!("unknown type token {token:?}"),
                    });
                }
            }
            "properties" => {
                let properties =
                    payload.as_object().ok_or_else(|| SchemaError::Invalid {
                        path: path.to_owned(),
                        message: "\"properties\" must be an object".to_owned(),
                    })?;
                for (name, subschema) in properties {
                    check_schema_at(subschema, &format!("{path}.{name}"))?;
                }
            }
            "required" => {
                let names = payload.as_array().ok_or_else(|| SchemaError::Invalid {
                    path: path.to_owned(),
                    message: "\"required\" must be an array of strings".to_owned(),
                })?;
                if names.iter().any(|n| !n.is_string()) {
                    return Err(SchemaError::Invalid {
                        path: path.to_owned(),
                        message: "\"required\" must be an array of strings".to_owned(),
                    });
                }
            }
            "items" => check_schema_at(payload, &format!("{path}[]"))?,
            other => {
                return Err(SchemaError::UnsupportedKeyword {
                    path: path.to_owned(),
                    keyword: other.to_owned(),
                })
            }
        }
    }
    Ok(())
}

/// Validate `tree` against `schema`. The empty list means the tree
/// conforms. Violations carry the offending path; they are values, not
/// errors; only a malformed schema is an `Err`.
pub fn validate(tree: &Value, schema: &Value) -> Result<Vec<SchemaViolation>, SchemaError> {
    check_schema(schema)?;
    let mut violations = Vec::new();
    walk(tree, schema, &Location::root(), &mut violations);
    Ok(violations)
}

#[derive(Clone)]
struct Location {
    rendered: String,
}

impl Location {
    fn root() -> Self {
        Location {
            rendered: String::new(),
        }
    }

    fn key(&self, name: &str) -> Self {
        let rendered = if self.rendered.is_empty() {
            name.to_owned()
        } else {
            format!("{}.{}", self.rendered, name)
        };
        Location { rendered }
    }

    fn index(&self, i: usize) -> Self {
        let rendered = if self.rendered.is_empty() {
            format!("$[{i}]")
        } else {
            format!("{}[{i}]", self.rendered)
        };
        Location { rendered }
    }

    fn render(&self) -> String {
        if self.rendered.is_empty() {
            "$".to_owned()
        } else {
            self.rendered.clone()
        }
    }
}

fn walk(value: &Value, schema: &Value, at: &Location, out: &mut Vec<SchemaViolation>) {
    let map = schema.as_object().expect("schema checked before walking");

    if let Some(token) = map.get("type").and_then(Value::as_str) {
        if !type_matches(value, token) {
            out.push(SchemaViolation {
                path: at.render(),
                message: format!("expected type {token}, found {}", kind_of(value)),
            });
        }
    }
    if let (Some(required), Value::Object(fields)) = (map.get("required"), value) {
        for name in required.as_array().expect("checked").iter() {
            let name = name.as_str().expect("checked");
            if !fields.contains_key(name) {
                out.push(SchemaViolation {
                    path: at.key(name).render(),
                    message: "required property is missing".to_owned(),
                });
            }
        }
    }
    if let (Some(properties), Value::Object(fields)) = (map.get("properties"), value) {
        for (name, subschema) in properties.as_object().expect("checked") {
            if let Some(present) = fields.get(name) {
                walk(present, subschema, &at.key(name), out);
            }
        }
    }
    if let (Some(items), Value::Array(elements)) = (map.get("items"), value) {
        for (i, element) in elements.iter().enumerate() {
            walk(element, items, &at.index(i), out);
        }
    }
}

fn type_matches(value: &Value, token: &str) -> bool {
    match token {
        "string" => value.is_string(),
        "integer" => value.is_i64() || value.is_u64(),
        "number" => value.is_number(),
        "boolean" => value.is_boolean(),
        "object" => value.is_object(),
        "array" => value.is_array(),
        "null" => value.is_null(),
        _ => unreachable!("type tokens checked before walking"),
    }
}

fn kind_of(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_i64() || n.is_u64() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
