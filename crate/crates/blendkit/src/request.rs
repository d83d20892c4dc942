//! Turning an interaction template plus supplied parameters into a
//! concrete outbound HTTP message.
//!
//! Parameter resolution follows the description's defaulting rules: a
//! supplied value wins, an explicit null omits the parameter even when a
//! default exists, an absent parameter falls back to its default, and a
//! required parameter with neither is an error.

use indexmap::IndexMap;
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde_json::Value;
use thiserror::Error;

use crate::description::{InteractionSpec, Method, RequestTemplate, Scheme, ServerSpec, ValueType};
use crate::response::SerializationFormat;

/// Parameters supplied for one blend. `Value::Null` marks the explicit
/// null override that omits a defaulted parameter.
pub type SuppliedParameters = IndexMap<String, Value>;

/// Query pairs in template declaration order, values rendered to their
/// canonical text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResolvedParameters {
    pairs: Vec<(String, String)>,
}

impl ResolvedParameters {
    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown parameter {key:?}")]
    UnknownParameter { key: String },
    #[error("missing required parameter {key:?}")]
    MissingRequiredParameter { key: String },
    #[error("parameter {key:?} expects {expected}, got {supplied}")]
    TypeMismatch {
        key: String,
        expected: ValueType,
        supplied: String,
    },
}

/// Resolve supplied parameters against a template, applying defaults and
/// the explicit-null omission rule.
pub fn resolve_parameters(
    template: &RequestTemplate,
    supplied: &SuppliedParameters,
) -> Result<ResolvedParameters, ResolveError> {
    for key in supplied.keys() {
        if template.parameter(key).is_none() {
            return Err(ResolveError::UnknownParameter { key: key.clone() });
        }
    }
    let mut pairs = Vec::new();
    for parameter in &template.url_parameters {
        match supplied.get(&parameter.key) {
            Some(Value::Null) => continue,
            Some(value) => {
                let rendered = coerce(value, parameter.value_type).ok_or_else(|| {
                    ResolveError::TypeMismatch {
                        key: parameter.key.clone(),
                        expected: parameter.value_type,
                        supplied: value.to_string(),
                    }
                })?;
                pairs.push((parameter.key.clone(), rendered));
            }
            None => match &parameter.default {
                Some(default) => pairs.push((parameter.key.clone(), render_scalar(default))),
                None if parameter.optional => continue,
                None => {
                    return Err(ResolveError::MissingRequiredParameter {
                        key: parameter.key.clone(),
                    })
                }
            },
        }
    }
    Ok(ResolvedParameters { pairs })
}

/// Canonical text of a scalar already known to match its declared type.
fn render_scalar(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

/// Coerce a supplied value to the declared type, returning its canonical
/// text. Strings are parsed for the non-string types because CLI
/// parameters arrive untyped.
fn coerce(value: &Value, value_type: ValueType) -> Option<String> {
    match value_type {
        ValueType::String => match value {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            Value::Bool(b) => Some(b.to_string()),
            _ => None,
        },
        ValueType::Integer => match value {
            Value::Number(n) => n
                .as_i64()
                .map(|i| i.to_string())
                .or_else(|| n.as_u64().map(|u| u.to_string())),
            Value::String(s) => s.trim().parse::<i64>().ok().map(|i| i.to_string()),
            _ => None,
        },
        ValueType::Number => match value {
            Value::Number(n) => Some(n.to_string()),
            Value::String(s) => s.trim().parse::<f64>().ok().map(|f| {
                if f == f.trunc() && f.abs() < 1e15 {
                    format!("{f:.0}")
                } else {
                    f.to_string()
                }
            }),
            _ => None,
        },
        ValueType::Boolean => match value {
            Value::Bool(b) => Some(b.to_string()),
            Value::String(s) => match s.as_str() {
                "true" => Some("true".to_owned()),
                "false" => Some("false".to_owned()),
                _ => None,
            },
            _ => None,
        },
    }
}

/// RFC 3986: everything except unreserved characters is percent-encoded.
const QUERY_COMPONENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

/// `k=v` pairs joined by `&` in declaration order, both sides
/// percent-encoded per RFC 3986 (uppercase hex, space as `%20`).
pub fn encode_query(params: &ResolvedParameters) -> String {
    encode_pairs(&params.pairs)
}

/// [`encode_query`] over bare pairs, for query strings built outside
/// parameter resolution (auth token requests, token replay).
pub fn encode_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{}={}", encode_component(k), encode_component(v)))
        .collect::<Vec<_>>()
        .join("&")
}

/// Percent-encode one query component per RFC 3986.
pub fn encode_component(text: &str) -> String {
    utf8_percent_encode(text, QUERY_COMPONENT).to_string()
}

/// Inverse of [`encode_query`], used for round-trip checks and by the
/// test server to read captured queries.
pub fn decode_query(query: &str) -> Vec<(String, String)> {
    if query.is_empty() {
        return Vec::new();
    }
    query
        .split('&')
        .map(|pair| {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            (
                percent_decode_str(k).decode_utf8_lossy().into_owned(),
                percent_decode_str(v).decode_utf8_lossy().into_owned(),
            )
        })
        .collect()
}

/// A concrete outbound HTTP message, ready for the transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    pub server_name: String,
    pub interaction_name: String,
}

/// Compose the full request from server, interaction, and resolved
/// parameters. The `:80` suffix is omitted for plain HTTP; any other port
/// is explicit.
pub fn build_request(
    server: &ServerSpec,
    interaction: &InteractionSpec,
    params: &ResolvedParameters,
) -> PreparedRequest {
    let authority = if server.scheme == Scheme::Http && server.port == 80 {
        server.host.clone()
    } else {
        format!("{}:{}", server.host, server.port)
    };
    let mut url = format!(
        "{}://{}{}",
        server.scheme,
        authority,
        interaction.request.root_path
    );
    let query = encode_query(params);
    if !query.is_empty() {
        url.push('?');
        url.push_str(&query);
    }
    let accept = match interaction.response.serialization_format {
        SerializationFormat::Json => "application/json",
        SerializationFormat::Xml => "application/xml",
    };
    let body = match (&interaction.request.raw_content, interaction.request.method) {
        (Some(content), Method::Put | Method::Post) => content.as_bytes().to_vec(),
        _ => Vec::new(),
    };
    PreparedRequest {
        method: interaction.request.method,
        url,
        headers: vec![("Accept".to_owned(), accept.to_owned())],
        body,
        server_name: server.name.clone(),
        interaction_name: interaction.name.clone(),
    }
}
