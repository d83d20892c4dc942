//! Turning raw response bodies into validated, unified records.
//!
//! The pipeline runs in fixed order: deserialize the body into a parsed
//! tree, compare the status code against the interaction's expectation,
//! validate the tree against the declared schema, then extract the mapped
//! paths into one flat record. Each stage reports its own failure type;
//! none of them aborts the stages that can still run.

pub mod paths;
pub mod schema;
mod xml;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use paths::{dot_get, dot_set, DotPath, PathConflict};

/// Wire format a response body is declared to arrive in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SerializationFormat {
    Json,
    Xml,
}

impl SerializationFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            SerializationFormat::Json => "json",
            SerializationFormat::Xml => "xml",
        }
    }
}

/// A body that could not be parsed in its declared format.
///
/// `line` and `column` are 1-based when the underlying parser reports a
/// position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed {format} body: {message}")]
pub struct DeserializeError {
    pub format: &'static str,
    pub line: Option<u64>,
    pub column: Option<u64>,
    pub message: String,
}

/// Parse `body` according to the declared format into a tree of values.
pub fn deserialize(body: &str, format: SerializationFormat) -> Result<Value, DeserializeError> {
    match format {
        SerializationFormat::Json => serde_json::from_str(body).map_err(|err| {
            DeserializeError {
                format: "json",
                line: (err.line() > 0).then_some(err.line() as u64),
                column: (err.column() > 0).then_some(err.column() as u64),
                message: err.to_string(),
            }
        }),
        SerializationFormat::Xml => xml::xml_to_tree(body),
    }
}

/// The response arrived with a status other than the declared one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("expected status {expected}, got {actual}")]
pub struct StatusMismatch {
    pub expected: u16,
    pub actual: u16,
}

pub fn check_status(expected: u16, actual: u16) -> Result<(), StatusMismatch> {
    if expected == actual {
        Ok(())
    } else {
        Err(StatusMismatch { expected, actual })
    }
}

/// Result of mapping source paths out of a parsed tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    /// Object built by writing each present source value at its target path.
    pub record: Value,
    /// Source paths that addressed nothing in the tree. Absence is data,
    /// not an error.
    pub missing: Vec<DotPath>,
}

/// Build a unified record from `tree` by copying each mapping entry's
/// source value to its target path in a fresh object.
///
/// Conflicts are impossible for mappings whose targets were checked to be
/// pairwise prefix-free when the description was loaded; the error is
/// surfaced rather than masked for hand-built mappings that skip that
/// check.
pub fn extract(
    tree: &Value,
    mapping: &[(DotPath, DotPath)],
) -> Result<Extraction, PathConflict> {
    let mut record = Value::Object(serde_json::Map::new());
    let mut missing = Vec::new();
    for (source, target) in mapping {
        match dot_get(tree, source) {
            Some(found) => dot_set(&mut record, target, found.clone())?,
            None => missing.push(source.clone()),
        }
    }
    Ok(Extraction { record, missing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn path(text: &str) -> DotPath {
        DotPath::parse(text).unwrap()
    }

    #[test]
    fn deserializes_json_bodies() {
        let tree = deserialize(r#"{"a": [1, 2]}"#, SerializationFormat::Json).unwrap();
        assert_eq!(tree, json!({"a": [1, 2]}));
    }

    #[test]
    fn json_errors_carry_position() {
        let err = deserialize("{\n  \"a\": }", SerializationFormat::Json).unwrap_err();
        assert_eq!(err.format, "json");
        assert_eq!(err.line, Some(2));
        assert!(err.column.is_some());
    }

    #[test]
    fn xml_errors_carry_position() {
        let err = deserialize("<a><b></a>", SerializationFormat::Xml).unwrap_err();
        assert_eq!(err.format, "xml");
        assert!(err.line.is_some());
    }

    #[test]
    fn status_check_is_exact_match() {
        assert!(check_status(200, 200).is_ok());
        let err = check_status(200, 404).unwrap_err();
        assert_eq!((err.expected, err.actual), (200, 404));
    }

    #[test]
    fn extract_builds_record_and_reports_missing() {
        let tree = json!({"post": {"content": "hi", "id": 7}});
        let mapping = vec![
            (path("post.content"), path("post_data.text")),
            (path("post.id"), path("post_data.id")),
            (path("post.author"), path("post_data.author")),
        ];
        let extraction = extract(&tree, &mapping).unwrap();
        assert_eq!(
            extraction.record,
            json!({"post_data": {"text": "hi", "id": 7}})
        );
        assert_eq!(extraction.missing, vec![path("post.author")]);
    }

    #[test]
    fn extract_of_empty_mapping_is_an_empty_record() {
        let extraction = extract(&json!({"a": 1}), &[]).unwrap();
        assert_eq!(extraction.record, json!({}));
        assert!(extraction.missing.is_empty());
    }

    #[test]
    fn extract_surfaces_target_conflicts() {
        let tree = json!({"a": 1, "b": 2});
        let mapping = vec![
            (path("a"), path("out")),
            (path("b"), path("out.inner")),
        ];
        assert!(extract(&tree, &mapping).is_err());
    }
}
