//! The description data model: servers, authentication, policy,
//! interactions, and extraction mappings.
//!
//! Values of these types come out of [`super::parse_server_spec`] with
//! every default applied, satisfy their invariants by construction, and
//! are immutable afterwards.

use std::fmt;

use indexmap::IndexMap;
use serde_json::Value;
use thiserror::Error;

use crate::response::paths::DotPath;
use crate::response::SerializationFormat;

/// HTTP method of a request template. The closed set is part of the
/// description contract; anything else is rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Put,
    Post,
    Delete,
}

impl Method {
    pub fn from_token(token: &str) -> Option<Method> {
        match token {
            "GET" => Some(Method::Get),
            "PUT" => Some(Method::Put),
            "POST" => Some(Method::Post),
            "DELETE" => Some(Method::Delete),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Put => "PUT",
            Method::Post => "POST",
            Method::Delete => "DELETE",
        }
    }

    /// Whether requests with this method may carry `raw_content`.
    pub fn allows_body(self) -> bool {
        matches!(self, Method::Put | Method::Post)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// URL scheme for a server. Descriptions omit it for plain HTTP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Http,
    Https,
}

impl Scheme {
    pub fn from_token(token: &str) -> Option<Scheme> {
        match token {
            "http" => Some(Scheme::Http),
            "https" => Some(Scheme::Https),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Http => "http",
            Scheme::Https => "https",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Declared type of a URL parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    String,
    Integer,
    Number,
    Boolean,
}

impl ValueType {
    pub fn from_token(token: &str) -> Option<ValueType> {
        match token {
            "string" => Some(ValueType::String),
            "integer" => Some(ValueType::Integer),
            "number" => Some(ValueType::Number),
            "boolean" => Some(ValueType::Boolean),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::String => "string",
            ValueType::Integer => "integer",
            ValueType::Number => "number",
            ValueType::Boolean => "boolean",
        }
    }

    /// Whether `value` already has this type, with no coercion.
    pub fn admits(self, value: &Value) -> bool {
        match self {
            ValueType::String => value.is_string(),
            ValueType::Integer => value.is_i64() || value.is_u64(),
            ValueType::Number => value.is_number(),
            ValueType::Boolean => value.is_boolean(),
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One URL parameter, declared in the source document as the 4-element
/// array `[key, type, optional, default]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpec {
    pub key: String,
    pub value_type: ValueType,
    pub optional: bool,
    /// `None` when the document's default slot holds null.
    pub default: Option<Value>,
}

/// The request half of an interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestTemplate {
    pub root_path: String,
    pub method: Method,
    pub raw_content: Option<String>,
    pub url_parameters: Vec<ParameterSpec>,
}

impl RequestTemplate {
    pub fn parameter(&self, key: &str) -> Option<&ParameterSpec> {
        self.url_parameters.iter().find(|p| p.key == key)
    }
}

/// One `target: source` entry of an integration mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionEntry {
    /// Path in the unified record being built.
    pub target: DotPath,
    /// Path looked up in the parsed response tree.
    pub source: DotPath,
}

/// Mapping from unified-model paths to response paths, entries kept
/// sorted by target path so equal mappings serialize identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionMapping {
    entries: Vec<ExtractionEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("duplicate target path {path:?}")]
    DuplicateTarget { path: String },
    #[error("target path {prefix:?} is a strict prefix of {longer:?} and would be overwritten")]
    PrefixOverlap { prefix: String, longer: String },
}

impl ExtractionMapping {
    /// Build a mapping, rejecting duplicate targets and targets that are
    /// strict prefixes of one another (the longer write would clobber the
    /// shorter one's value).
    pub fn new(mut entries: Vec<ExtractionEntry>) -> Result<ExtractionMapping, MappingError> {
        entries.sort_by(|a, b| a.target.as_str().cmp(b.target.as_str()));
        for (i, entry) in entries.iter().enumerate() {
            for other in &entries[i + 1..] {
                if entry.target == other.target {
                    return Err(MappingError::DuplicateTarget {
                        path: entry.target.as_str().to_owned(),
                    });
                }
                let (short, long) = if entry.target.segments().len() <= other.target.segments().len()
                {
                    (&entry.target, &other.target)
                } else {
                    (&other.target, &entry.target)
                };
                if short.is_strict_prefix_of(long) {
                    return Err(MappingError::PrefixOverlap {
                        prefix: short.as_str().to_owned(),
                        longer: long.as_str().to_owned(),
                    });
                }
            }
        }
        Ok(ExtractionMapping { entries })
    }

    pub fn entries(&self) -> &[ExtractionEntry] {
        &self.entries
    }

    /// Entry list in the `(source, target)` order that
    /// [`crate::response::extract`] consumes.
    pub fn source_target_pairs(&self) -> Vec<(DotPath, DotPath)> {
        self.entries
            .iter()
            .map(|e| (e.source.clone(), e.target.clone()))
            .collect()
    }
}

/// The response half of an interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSpec {
    pub expected_status_code: u16,
    pub serialization_format: SerializationFormat,
    /// Schema document over the supported keyword subset, checked at
    /// parse time, stored verbatim.
    pub expected_schema: Option<Value>,
    pub integration: Option<ExtractionMapping>,
}

/// A named class of requests sharing a root path plus the expected
/// response contract.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    pub name: String,
    pub description: Option<String>,
    pub request: RequestTemplate,
    pub response: ResponseSpec,
}

/// How to obtain credentials for a server.
#[derive(Debug, Clone, PartialEq)]
pub enum AuthSpec {
    /// One GET to a token endpoint with fixed parameters; the token is
    /// read out of the response at `token_path`.
    Simple {
        request_token_url: String,
        url_parameters: IndexMap<String, Value>,
        token_path: DotPath,
    },
    /// Three-legged authorization-code grant.
    OAuth2 {
        consumer_key: String,
        consumer_secret: String,
        request_token_url: String,
        access_token_url: String,
        authorize_url: String,
    },
}

/// Per-server usage rules: hourly budget and too-many-calls detection.
/// The default has no limits: everything is admitted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicySpec {
    pub requests_per_hour: Option<u32>,
    pub too_many_calls_response_code: Option<u16>,
    pub too_many_calls_waiting_seconds: Option<u64>,
}

/// One described server and everything needed to talk to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerSpec {
    pub name: String,
    pub host: String,
    pub port: u16,
    pub scheme: Scheme,
    pub authentication: Option<AuthSpec>,
    pub policy: Option<PolicySpec>,
    pub interactions: Vec<InteractionSpec>,
}

impl ServerSpec {
    pub fn interaction(&self, name: &str) -> Option<&InteractionSpec> {
        self.interactions.iter().find(|i| i.name == name)
    }

    /// Copy of this spec pointing at a different host and port. Tests use
    /// this to aim bundled descriptions at a local stand-in server.
    pub fn with_endpoint(&self, host: &str, port: u16) -> ServerSpec {
        let mut spec = self.clone();
        spec.host = host.to_owned();
        spec.port = port;
        spec.scheme = Scheme::Http;
        spec
    }
}
