//! Dot-separated key paths addressing locations in a parsed tree.
//!
//! Paths address map keys only; list indexing is deliberately not part of
//! the syntax. A value that is a list or subtree is read or written
//! wholesale.

use serde_json::Value;
use thiserror::Error;

/// A validated `"."`-separated key path, e.g. `post_data.text`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DotPath {
    text: String,
    segments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("dot-path is empty")]
    Empty,
    #[error("dot-path {0:?} contains an empty segment")]
    EmptySegment(String),
}

impl DotPath {
    /// Parse and validate a path: non-empty, `"."`-separated, every segment
    /// non-empty.
    pub fn parse(text: &str) -> Result<DotPath, PathError> {
        if text.is_empty() {
            return Err(PathError::Empty);
        }
        let segments: Vec<String> = text.split('.').map(str::to_owned).collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(PathError::EmptySegment(text.to_owned()));
        }
        Ok(DotPath {
            text: text.to_owned(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    /// The final segment.
    pub fn last(&self) -> &str {
        self.segments.last().expect("path has at least one segment")
    }

    /// True when `self` is a strict prefix of `other` (`a.b` of `a.b.c`).
    pub fn is_strict_prefix_of(&self, other: &DotPath) -> bool {
        self.segments.len() < other.segments.len()
            && self.segments == other.segments[..self.segments.len()]
    }
}

impl std::fmt::Display for DotPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}

/// Descend map keys segment by segment. Any non-map encountered before the
/// last segment, or an absent key, yields `None`.
pub fn dot_get<'a>(tree: &'a Value, path: &DotPath) -> Option<&'a Value> {
    let mut current = tree;
    for segment in path.segments() {
        current = current.as_object()?.get(segment)?;
    }
    Some(current)
}

/// An intermediate segment of a write path was occupied by a non-map value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dot-path {path:?} conflicts with a non-map value at {occupied:?}")]
pub struct PathConflict {
    pub path: String,
    pub occupied: String,
}

/// Write `value` at `path`, creating intermediate maps as needed. The final
/// segment overwrites whatever was there, so `dot_get` after `dot_set`
/// returns the written value.
pub fn dot_set(tree: &mut Value, path: &DotPath, value: Value) -> Result<(), PathConflict> {
    let segments = path.segments();
    let mut current = tree;
    for (index, segment) in segments.iter().enumerate() {
        let map = match current {
            Value::Object(map) => map,
            _ => {
                return Err(PathConflict {
                    path: path.as_str().to_owned(),
                    occupied: segments[..index].join("."),
                })
            }
        };
        if index == segments.len() - 1 {
            map.insert(segment.clone(), value);
            return Ok(());
        }
        current = map
            .entry(segment.clone())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    unreachable!("DotPath always has at least one segment")
}
