//! Parsing and validation of server description documents.
//!
//! Validation is exhaustive: every violation in the document is reported
//! with its path, not just the first. A document either yields a spec
//! satisfying all model invariants with defaults applied, or a non-empty
//! error list, never a partially valid spec.

use indexmap::IndexMap;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::response::paths::DotPath;
use crate::response::{schema, SerializationFormat};

use super::types::{
    AuthSpec, ExtractionEntry, ExtractionMapping, InteractionSpec, Method, ParameterSpec,
    PolicySpec, RequestTemplate, ResponseSpec, Scheme, ServerSpec, ValueType,
};

/// One violation in a description document. `path` names the offending
/// location, e.g. `interactions[0].request.method`; the document root is
/// `$`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct SpecError {
    pub path: String,
    pub message: String,
}

impl SpecError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> SpecError {
        SpecError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parse one server description. On success every default is applied
/// (port 80, scheme http, expected_status_code 200, token_path
/// "access_token"); on failure ALL violations found are returned.
pub fn parse_server_spec(document: &str) -> Result<ServerSpec, Vec<SpecError>> {
    let root: Value = match serde_json::from_str(document) {
        Ok(value) => value,
        Err(err) => {
            return Err(vec![SpecError::new(
                "$",
                format!("malformed document: {err}"),
            )])
        }
    };
    let mut errors = Vec::new();
    let spec = parse_server(&root, &mut errors);
    if errors.is_empty() {
        Ok(spec.expect("no errors implies a complete spec"))
    } else {
        Err(errors)
    }
}

fn field(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

fn as_object<'a>(
    value: &'a Value,
    path: &str,
    what: &str,
    errors: &mut Vec<SpecError>,
) -> Option<&'a Map<String, Value>> {
    match value.as_object() {
        Some(map) => Some(map),
        None => {
            errors.push(SpecError::new(path, format!("{what} must be an object")));
            None
        }
    }
}

fn check_unknown_keys(
    map: &Map<String, Value>,
    allowed: &[&str],
    path: &str,
    errors: &mut Vec<SpecError>,
) {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            errors.push(SpecError::new(
                field(path, key),
                format!("unknown field {key:?}"),
            ));
        }
    }
}

fn require_string(
    map: &Map<String, Value>,
    key: &str,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<String> {
    let at = field(path, key);
    match map.get(key) {
        None => {
            errors.push(SpecError::new(at, format!("missing required field {key:?}")));
            None
        }
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        Some(Value::String(_)) => {
            errors.push(SpecError::new(at, format!("{key:?} must be non-empty")));
            None
        }
        Some(_) => {
            errors.push(SpecError::new(at, format!("{key:?} must be a string")));
            None
        }
    }
}

fn optional_string(
    map: &Map<String, Value>,
    key: &str,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<Option<String>> {
    match map.get(key) {
        None => Some(None),
        Some(Value::String(s)) => Some(Some(s.clone())),
        Some(_) => {
            errors.push(SpecError::new(
                field(path, key),
                format!("{key:?} must be a string"),
            ));
            None
        }
    }
}

fn optional_integer(
    map: &Map<String, Value>,
    key: &str,
    path: &str,
    min: i64,
    max: i64,
    errors: &mut Vec<SpecError>,
) -> Option<Option<i64>> {
    let at = field(path, key);
    match map.get(key) {
        None => Some(None),
        Some(value) => match value.as_i64() {
            Some(n) if (min..=max).contains(&n) => Some(Some(n)),
            Some(n) => {
                errors.push(SpecError::new(
                    at,
                    format!("{key:?} must be between {min} and {max}, got {n}"),
                ));
                None
            }
            None => {
                errors.push(SpecError::new(at, format!("{key:?} must be an integer")));
                None
            }
        },
    }
}

fn check_absolute_uri(uri: &str, path: &str, errors: &mut Vec<SpecError>) {
    let rest = uri
        .strip_prefix("http://")
        .or_else(|| uri.strip_prefix("https://"));
    if !matches!(rest, Some(r) if !r.is_empty()) {
        errors.push(SpecError::new(
            path,
            format!("must be an absolute http(s) URI, got {uri:?}"),
        ));
    }
}

fn parse_server(root: &Value, errors: &mut Vec<SpecError>) -> Option<ServerSpec> {
    let map = as_object(root, "$", "document", errors)?;
    check_unknown_keys(
        map,
        &[
            "name",
            "host",
            "port",
            "scheme",
            "authentication",
            "policy",
            "interactions",
        ],
        "",
        errors,
    );

    let name = require_string(map, "name", "", errors);
    let host = require_string(map, "host", "", errors);
    let port = optional_integer(map, "port", "", 1, 65535, errors)
        .map(|n| n.map(|n| n as u16).unwrap_or(80));
    let scheme = parse_scheme(map, errors);
    let authentication = match map.get("authentication") {
        None => Some(None),
        Some(value) => parse_auth(value, "authentication", errors).map(Some),
    };
    let policy = match map.get("policy") {
        None => Some(None),
        Some(value) => parse_policy(value, "policy", errors).map(Some),
    };
    let interactions = parse_interactions(map.get("interactions"), errors);

    Some(ServerSpec {
        name: name?,
        host: host?,
        port: port?,
        scheme: scheme?,
        authentication: authentication?,
        policy: policy?,
        interactions: interactions?,
    })
}

fn parse_scheme(map: &Map<String, Value>, errors: &mut Vec<SpecError>) -> Option<Scheme> {
    match map.get("scheme") {
        None => Some(Scheme::Http),
        Some(Value::String(s)) => match Scheme::from_token(s) {
            Some(scheme) => Some(scheme),
            None => {
                errors.push(SpecError::new(
                    "scheme",
                    format!("unknown scheme {s:?} (must be \"http\" or \"https\")"),
                ));
                None
            }
        },
        Some(_) => {
            errors.push(SpecError::new("scheme", "\"scheme\" must be a string"));
            None
        }
    }
}

fn parse_auth(value: &Value, path: &str, errors: &mut Vec<SpecError>) -> Option<AuthSpec> {
    let map = as_object(value, path, "\"authentication\"", errors)?;
    if map.contains_key("consumer_key") {
        check_unknown_keys(
            map,
            &[
                "consumer_key",
                "consumer_secret",
                "request_token_url",
                "access_token_url",
                "authorize_url",
            ],
            path,
            errors,
        );
        let consumer_key = require_string(map, "consumer_key", path, errors);
        let consumer_secret = require_string(map, "consumer_secret", path, errors);
        let mut uri_field = |key: &str| {
            let uri = require_string(map, key, path, errors)?;
            check_absolute_uri(&uri, &field(path, key), errors);
            Some(uri)
        };
        let request_token_url = uri_field("request_token_url");
        let access_token_url = uri_field("access_token_url");
        let authorize_url = uri_field("authorize_url");
        Some(AuthSpec::OAuth2 {
            consumer_key: consumer_key?,
            consumer_secret: consumer_secret?,
            request_token_url: request_token_url?,
            access_token_url: access_token_url?,
            authorize_url: authorize_url?,
        })
    } else {
        check_unknown_keys(
            map,
            &["request_token_url", "url_parameters", "token_path"],
            path,
            errors,
        );
        let request_token_url = require_string(map, "request_token_url", path, errors);
        if let Some(uri) = &request_token_url {
            check_absolute_uri(uri, &field(path, "request_token_url"), errors);
        }
        let url_parameters = parse_auth_parameters(map.get("url_parameters"), path, errors);
        let token_path = match optional_string(map, "token_path", path, errors)? {
            None => DotPath::parse("access_token").ok(),
            Some(text) => match DotPath::parse(&text) {
                Ok(parsed) => Some(parsed),
                Err(err) => {
                    errors.push(SpecError::new(
                        field(path, "token_path"),
                        format!("bad dot-path {text:?}: {err}"),
                    ));
                    None
                }
            },
        };
        Some(AuthSpec::Simple {
            request_token_url: request_token_url?,
            url_parameters: url_parameters?,
            token_path: token_path?,
        })
    }
}

fn parse_auth_parameters(
    value: Option<&Value>,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<IndexMap<String, Value>> {
    let at = field(path, "url_parameters");
    let Some(value) = value else {
        errors.push(SpecError::new(
            at,
            "missing required field \"url_parameters\"",
        ));
        return None;
    };
    let map = as_object(value, &at, "\"url_parameters\"", errors)?;
    let mut parameters = IndexMap::new();
    let mut ok = true;
    for (key, param) in map {
        match param {
            Value::String(_) | Value::Number(_) | Value::Bool(_) => {
                parameters.insert(key.clone(), param.clone());
            }
            _ => {
                errors.push(SpecError::new(
                    format!("{at}.{key}"),
                    "parameter value must be a scalar",
                ));
                ok = false;
            }
        }
    }
    ok.then_some(parameters)
}

fn parse_policy(value: &Value, path: &str, errors: &mut Vec<SpecError>) -> Option<PolicySpec> {
    let map = as_object(value, path, "\"policy\"", errors)?;
    check_unknown_keys(
        map,
        &[
            "requests_per_hour",
            "too_many_calls_response_code",
            "too_many_calls_waiting_seconds",
        ],
        path,
        errors,
    );
    let requests_per_hour =
        optional_integer(map, "requests_per_hour", path, 1, u32::MAX as i64, errors);
    let code = optional_integer(map, "too_many_calls_response_code", path, 100, 599, errors);
    let waiting = optional_integer(
        map,
        "too_many_calls_waiting_seconds",
        path,
        0,
        i64::MAX,
        errors,
    );
    if let (Some(Some(_)), Some(None)) = (&code, &waiting) {
        errors.push(SpecError::new(
            field(path, "too_many_calls_waiting_seconds"),
            "required when too_many_calls_response_code is present",
        ));
        return None;
    }
    Some(PolicySpec {
        requests_per_hour: requests_per_hour?.map(|n| n as u32),
        too_many_calls_response_code: code?.map(|n| n as u16),
        too_many_calls_waiting_seconds: waiting?.map(|n| n as u64),
    })
}

fn parse_interactions(
    value: Option<&Value>,
    errors: &mut Vec<SpecError>,
) -> Option<Vec<InteractionSpec>> {
    let Some(value) = value else {
        errors.push(SpecError::new(
            "interactions",
            "missing required field \"interactions\"",
        ));
        return None;
    };
    let Some(list) = value.as_array() else {
        errors.push(SpecError::new(
            "interactions",
            "\"interactions\" must be an array",
        ));
        return None;
    };
    let mut interactions = Vec::new();
    let mut ok = true;
    for (i, item) in list.iter().enumerate() {
        let path = format!("interactions[{i}]");
        match parse_interaction(item, &path, errors) {
            Some(interaction) => {
                if interactions
                    .iter()
                    .any(|prior: &InteractionSpec| prior.name == interaction.name)
                {
                    errors.push(SpecError::new(
                        field(&path, "name"),
                        format!("duplicate interaction name {:?}", interaction.name),
                    ));
                    ok = false;
                } else {
                    interactions.push(interaction);
                }
            }
            None => ok = false,
        }
    }
    ok.then_some(interactions)
}

fn parse_interaction(
    value: &Value,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<InteractionSpec> {
    let map = as_object(value, path, "interaction", errors)?;
    check_unknown_keys(
        map,
        &["name", "description", "request", "response"],
        path,
        errors,
    );
    let name = require_string(map, "name", path, errors);
    let description = optional_string(map, "description", path, errors);
    let request = match map.get("request") {
        Some(value) => parse_request(value, &field(path, "request"), errors),
        None => {
            errors.push(SpecError::new(
                field(path, "request"),
                "missing required field \"request\"",
            ));
            None
        }
    };
    let response = match map.get("response") {
        Some(value) => parse_response(value, &field(path, "response"), errors),
        None => {
            errors.push(SpecError::new(
                field(path, "response"),
                "missing required field \"response\"",
            ));
            None
        }
    };
    Some(InteractionSpec {
        name: name?,
        description: description?,
        request: request?,
        response: response?,
    })
}

fn parse_request(
    value: &Value,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<RequestTemplate> {
    let map = as_object(value, path, "\"request\"", errors)?;
    check_unknown_keys(
        map,
        &["root_path", "method", "raw_content", "url_parameters"],
        path,
        errors,
    );
    let root_path = require_string(map, "root_path", path, errors).and_then(|p| {
        if p.starts_with('/') {
            Some(p)
        } else {
            errors.push(SpecError::new(
                field(path, "root_path"),
                format!("\"root_path\" must start with \"/\", got {p:?}"),
            ));
            None
        }
    });
    let method = require_string(map, "method", path, errors).and_then(|m| {
        match Method::from_token(&m) {
            Some(method) => Some(method),
            None => {
                errors.push(SpecError::new(
                    field(path, "method"),
                    format!("unknown method {m:?} (must be GET, PUT, POST, or DELETE)"),
                ));
                None
            }
        }
    });
    let raw_content = optional_string(map, "raw_content", path, errors);
    if let (Some(Some(_)), Some(method)) = (&raw_content, &method) {
        if !method.allows_body() {
            errors.push(SpecError::new(
                field(path, "raw_content"),
                format!("raw_content is not allowed with method {method}"),
            ));
            return None;
        }
    }
    let url_parameters = parse_parameters(map.get("url_parameters"), path, errors);
    Some(RequestTemplate {
        root_path: root_path?,
        method: method?,
        raw_content: raw_content?,
        url_parameters: url_parameters?,
    })
}

fn parse_parameters(
    value: Option<&Value>,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<Vec<ParameterSpec>> {
    let at = field(path, "url_parameters");
    let Some(value) = value else {
        errors.push(SpecError::new(
            at,
            "missing required field \"url_parameters\"",
        ));
        return None;
    };
    let Some(list) = value.as_array() else {
        errors.push(SpecError::new(at, "\"url_parameters\" must be an array"));
        return None;
    };
    let mut parameters: Vec<ParameterSpec> = Vec::new();
    let mut ok = true;
    for (i, item) in list.iter().enumerate() {
        let at = format!("{at}[{i}]");
        match parse_parameter(item, &at, errors) {
            Some(parameter) => {
                if parameters.iter().any(|prior| prior.key == parameter.key) {
                    errors.push(SpecError::new(
                        at,
                        format!("duplicate parameter key {:?}", parameter.key),
                    ));
                    ok = false;
                } else {
                    parameters.push(parameter);
                }
            }
            None => ok = false,
        }
    }
    ok.then_some(parameters)
}

fn parse_parameter(
    value: &Value,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<ParameterSpec> {
    let Some(items) = value.as_array() else {
        errors.push(SpecError::new(
            path,
            "parameter must be a 4-element array [key, type, optional, default]",
        ));
        return None;
    };
    if items.len() != 4 {
        errors.push(SpecError::new(
            path,
            format!(
                "parameter must be a 4-element array [key, type, optional, default], got {} elements",
                items.len()
            ),
        ));
        return None;
    }
    let key = match &items[0] {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        _ => {
            errors.push(SpecError::new(path, "parameter key must be a non-empty string"));
            None
        }
    };
    let value_type = match &items[1] {
        Value::String(token) => match ValueType::from_token(token) {
            Some(t) => Some(t),
            None => {
                errors.push(SpecError::new(
                    path,
                    format!(
                        "unknown parameter type {token:?} (must be string, integer, number, or boolean)"
                    ),
                ));
                None
            }
        },
        _ => {
            errors.push(SpecError::new(path, "parameter type must be a string"));
            None
        }
    };
    let optional = match &items[2] {
        Value::Bool(b) => Some(*b),
        _ => {
            errors.push(SpecError::new(path, "parameter optional flag must be a boolean"));
            None
        }
    };
    let default = match (&items[3], value_type) {
        (Value::Null, _) => Some(None),
        (value, Some(t)) if t.admits(value) => Some(Some(value.clone())),
        (value, Some(t)) => {
            errors.push(SpecError::new(
                path,
                format!("default {value} is not type-consistent with {t}"),
            ));
            None
        }
        (_, None) => None,
    };
    Some(ParameterSpec {
        key: key?,
        value_type: value_type?,
        optional: optional?,
        default: default?,
    })
}

fn parse_response(
    value: &Value,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<ResponseSpec> {
    let map = as_object(value, path, "\"response\"", errors)?;
    check_unknown_keys(
        map,
        &[
            "expected_status_code",
            "serialization_format",
            "expected_schema",
            "integration",
        ],
        path,
        errors,
    );
    let expected_status_code = optional_integer(map, "expected_status_code", path, 100, 599, errors)
        .map(|n| n.map(|n| n as u16).unwrap_or(200));
    let serialization_format =
        require_string(map, "serialization_format", path, errors).and_then(|token| {
            match token.as_str() {
                "json" => Some(SerializationFormat::Json),
                "xml" => Some(SerializationFormat::Xml),
                other => {
                    errors.push(SpecError::new(
                        field(path, "serialization_format"),
                        format!("unknown format {other:?} (must be \"json\" or \"xml\")"),
                    ));
                    None
                }
            }
        });
    let expected_schema = match map.get("expected_schema") {
        None => Some(None),
        Some(schema_doc) => match schema::check_schema(schema_doc) {
            Ok(()) => Some(Some(schema_doc.clone())),
            Err(err) => {
                errors.push(SpecError::new(field(path, "expected_schema"), err.to_string()));
                None
            }
        },
    };
    let integration = match map.get("integration") {
        None => Some(None),
        Some(value) => parse_integration(value, &field(path, "integration"), errors).map(Some),
    };
    Some(ResponseSpec {
        expected_status_code: expected_status_code?,
        serialization_format: serialization_format?,
        expected_schema: expected_schema?,
        integration: integration?,
    })
}

fn parse_integration(
    value: &Value,
    path: &str,
    errors: &mut Vec<SpecError>,
) -> Option<ExtractionMapping> {
    let map = as_object(value, path, "\"integration\"", errors)?;
    let mut entries = Vec::new();
    let mut ok = true;
    for (target_text, source) in map {
        let target = match DotPath::parse(target_text) {
            Ok(target) => Some(target),
            Err(err) => {
                errors.push(SpecError::new(
                    path,
                    format!("bad target path {target_text:?}: {err}"),
                ));
                ok = false;
                None
            }
        };
        let source = match source {
            Value::String(source_text) => match DotPath::parse(source_text) {
                Ok(source) => Some(source),
                Err(err) => {
                    errors.push(SpecError::new(
                        path,
                        format!("bad source path {source_text:?}: {err}"),
                    ));
                    ok = false;
                    None
                }
            },
            _ => {
                errors.push(SpecError::new(
                    path,
                    format!("source for target {target_text:?} must be a dot-path string"),
                ));
                ok = false;
                None
            }
        };
        if let (Some(target), Some(source)) = (target, source) {
            entries.push(ExtractionEntry { target, source });
        }
    }
    if !ok {
        return None;
    }
    match ExtractionMapping::new(entries) {
        Ok(mapping) => Some(mapping),
        Err(err) => {
            errors.push(SpecError::new(path, err.to_string()));
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(doc: &Value) -> Result<ServerSpec, Vec<SpecError>> {
        parse_server_spec(&doc.to_string())
    }

    fn paths(errors: &[SpecError]) -> Vec<&str> {
        errors.iter().map(|e| e.path.as_str()).collect()
    }

    fn valid_doc() -> Value {
        json!({
            "name": "s",
            "host": "h.example.test",
            "interactions": [{
                "name": "search",
                "request": {
                    "root_path": "/search",
                    "method": "GET",
                    "url_parameters": [["q", "string", false, null], ["rpp", "integer", true, 100]]
                },
                "response": {"serialization_format": "json"}
            }]
        })
    }

    #[test]
    fn minimal_document_gets_all_defaults() {
        let spec = parse(&json!({"name": "s", "host": "h", "interactions": []})).unwrap();
        assert_eq!(spec.port, 80);
        assert_eq!(spec.scheme, Scheme::Http);
        assert!(spec.authentication.is_none());
        assert!(spec.policy.is_none());
        assert!(spec.interactions.is_empty());
    }

    #[test]
    fn expected_status_code_defaults_to_200() {
        let spec = parse(&valid_doc()).unwrap();
        assert_eq!(spec.interactions[0].response.expected_status_code, 200);
    }

    #[test]
    fn unknown_method_names_its_path() {
        let mut doc = valid_doc();
        doc["interactions"][0]["request"]["method"] = json!("PATCH");
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"interactions[0].request.method"));
    }

    #[test]
    fn raw_content_on_get_is_rejected() {
        let mut doc = valid_doc();
        doc["interactions"][0]["request"]["raw_content"] = json!("x=1");
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"interactions[0].request.raw_content"));
    }

    #[test]
    fn raw_content_on_post_is_accepted() {
        let mut doc = valid_doc();
        doc["interactions"][0]["request"]["method"] = json!("POST");
        doc["interactions"][0]["request"]["raw_content"] = json!("x=1");
        let spec = parse(&doc).unwrap();
        assert_eq!(spec.interactions[0].request.raw_content.as_deref(), Some("x=1"));
    }

    #[test]
    fn all_violations_are_collected_not_just_the_first() {
        let mut doc = valid_doc();
        doc["interactions"][0]["request"]["method"] = json!("PATCH");
        doc.as_object_mut().unwrap().remove("host");
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"host"));
        assert!(paths(&errors).contains(&"interactions[0].request.method"));
    }

    #[test]
    fn unknown_fields_are_errors() {
        let mut doc = valid_doc();
        doc["flavor"] = json!("grape");
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"flavor"));
    }

    #[test]
    fn malformed_document_is_a_single_root_error() {
        let errors = parse_server_spec("{not json").unwrap_err();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].path, "$");
    }

    #[test]
    fn parameter_array_must_have_four_elements() {
        let mut doc = valid_doc();
        doc["interactions"][0]["request"]["url_parameters"] = json!([["q", "string", false]]);
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"interactions[0].request.url_parameters[0]"));
    }

    #[test]
    fn default_must_match_declared_type() {
        let mut doc = valid_doc();
        doc["interactions"][0]["request"]["url_parameters"] = json!([["rpp", "integer", true, "many"]]);
        let errors = parse(&doc).unwrap_err();
        assert!(errors[0].message.contains("not type-consistent"));
    }

    #[test]
    fn duplicate_parameter_keys_are_rejected() {
        let mut doc = valid_doc();
        doc["interactions"][0]["request"]["url_parameters"] =
            json!([["q", "string", false, null], ["q", "string", true, null]]);
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"interactions[0].request.url_parameters[1]"));
    }

    #[test]
    fn duplicate_interaction_names_are_rejected() {
        let mut doc = valid_doc();
        let copy = doc["interactions"][0].clone();
        doc["interactions"].as_array_mut().unwrap().push(copy);
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"interactions[1].name"));
    }

    #[test]
    fn policy_code_without_waiting_is_rejected() {
        let mut doc = valid_doc();
        doc["policy"] = json!({"too_many_calls_response_code": 420});
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"policy.too_many_calls_waiting_seconds"));
    }

    #[test]
    fn simple_auth_fills_token_path_default() {
        let mut doc = valid_doc();
        doc["authentication"] = json!({
            "request_token_url": "http://auth.example.test/token",
            "url_parameters": {"api_key": "k1"}
        });
        let spec = parse(&doc).unwrap();
        match spec.authentication.unwrap() {
            AuthSpec::Simple { token_path, .. } => assert_eq!(token_path.as_str(), "access_token"),
            other => panic!("expected simple auth, got {other:?}"),
        }
    }

    #[test]
    fn oauth2_auth_is_detected_by_consumer_key() {
        let mut doc = valid_doc();
        doc["authentication"] = json!({
            "consumer_key": "K",
            "consumer_secret": "S",
            "request_token_url": "https://a.example.test/request",
            "access_token_url": "https://a.example.test/access",
            "authorize_url": "https://a.example.test/authorize"
        });
        let spec = parse(&doc).unwrap();
        assert!(matches!(spec.authentication, Some(AuthSpec::OAuth2 { .. })));
    }

    #[test]
    fn relative_auth_uri_is_rejected() {
        let mut doc = valid_doc();
        doc["authentication"] = json!({
            "request_token_url": "/token",
            "url_parameters": {}
        });
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"authentication.request_token_url"));
    }

    #[test]
    fn integration_target_prefix_overlap_is_rejected() {
        let mut doc = valid_doc();
        doc["interactions"][0]["response"]["integration"] =
            json!({"post": "a", "post.content": "b"});
        let errors = parse(&doc).unwrap_err();
        assert!(errors[0].message.contains("strict prefix"));
    }

    #[test]
    fn schema_with_unsupported_keyword_is_a_spec_error() {
        let mut doc = valid_doc();
        doc["interactions"][0]["response"]["expected_schema"] = json!({"oneOf": []});
        let errors = parse(&doc).unwrap_err();
        assert!(paths(&errors).contains(&"interactions[0].response.expected_schema"));
    }

    #[test]
    fn port_out_of_range_is_rejected() {
        let mut doc = valid_doc();
        doc["port"] = json!(0);
        assert!(paths(&parse(&doc).unwrap_err()).contains(&"port"));
        doc["port"] = json!(65536);
        assert!(paths(&parse(&doc).unwrap_err()).contains(&"port"));
    }

    #[test]
    fn wrong_typed_host_is_rejected() {
        let mut doc = valid_doc();
        doc["host"] = json!(5);
        assert!(paths(&parse(&doc).unwrap_err()).contains(&"host"));
    }
}
