//! Canonical serialization of server specs.
//!
//! The canonical form is deterministic: alphabetical key order, 2-space
//! indentation, defaults materialized (port, scheme, expected_status_code,
//! token_path). Structurally equal specs serialize to byte-identical text,
//! and parsing the output yields a spec equal to the input.

use serde_json::{Map, Value};

use super::types::{AuthSpec, InteractionSpec, ParameterSpec, ResponseSpec, ServerSpec};

pub fn serialize_server_spec(spec: &ServerSpec) -> String {
    let mut text =
        serde_json::to_string_pretty(&server_to_value(spec)).expect("spec serializes in memory");
    text.push('\n');
    text
}

fn server_to_value(spec: &ServerSpec) -> Value {
    let mut map = Map::new();
    if let Some(auth) = &spec.authentication {
        map.insert("authentication".to_owned(), auth_to_value(auth));
    }
    map.insert("host".to_owned(), Value::String(spec.host.clone()));
    map.insert(
        "interactions".to_owned(),
        Value::Array(spec.interactions.iter().map(interaction_to_value).collect()),
    );
    map.insert("name".to_owned(), Value::String(spec.name.clone()));
    if let Some(policy) = &spec.policy {
        let mut p = Map::new();
        if let Some(n) = policy.requests_per_hour {
            p.insert("requests_per_hour".to_owned(), n.into());
        }
        if let Some(code) = policy.too_many_calls_response_code {
            p.insert("too_many_calls_response_code".to_owned(), code.into());
        }
        if let Some(seconds) = policy.too_many_calls_waiting_seconds {
            p.insert("too_many_calls_waiting_seconds".to_owned(), seconds.into());
        }
        map.insert("policy".to_owned(), Value::Object(p));
    }
    map.insert("port".to_owned(), spec.port.into());
    map.insert("scheme".to_owned(), Value::String(spec.scheme.as_str().to_owned()));
    Value::Object(map)
}

fn auth_to_value(auth: &AuthSpec) -> Value {
    let mut map = Map::new();
    match auth {
        AuthSpec::Simple {
            request_token_url,
            url_parameters,
            token_path,
        } => {
            map.insert(
                "request_token_url".to_owned(),
                Value::String(request_token_url.clone()),
            );
            map.insert(
                "token_path".to_owned(),
                Value::String(token_path.as_str().to_owned()),
            );
            let mut keys: Vec<&String> = url_parameters.keys().collect();
            keys.sort();
            let mut params = Map::new();
            for key in keys {
                params.insert(key.clone(), url_parameters[key].clone());
            }
            map.insert("url_parameters".to_owned(), Value::Object(params));
        }
        AuthSpec::OAuth2 {
            consumer_key,
            consumer_secret,
            request_token_url,
            access_token_url,
            authorize_url,
        } => {
            map.insert(
                "access_token_url".to_owned(),
                Value::String(access_token_url.clone()),
            );
            map.insert("authorize_url".to_owned(), Value::String(authorize_url.clone()));
            map.insert("consumer_key".to_owned(), Value::String(consumer_key.clone()));
            map.insert(
                "consumer_secret".to_owned(),
                Value::String(consumer_secret.clone()),
            );
            map.insert(
                "request_token_url".to_owned(),
                Value::String(request_token_url.clone()),
            );
        }
    }
    Value::Object(map)
}

fn interaction_to_value(interaction: &InteractionSpec) -> Value {
    let mut map = Map::new();
    if let Some(description) = &interaction.description {
        map.insert("description".to_owned(), Value::String(description.clone()));
    }
    map.insert("name".to_owned(), Value::String(interaction.name.clone()));

    let request = &interaction.request;
    let mut r = Map::new();
    r.insert(
        "method".to_owned(),
        Value::String(request.method.as_str().to_owned()),
    );
    if let Some(raw) = &request.raw_content {
        r.insert("raw_content".to_owned(), Value::String(raw.clone()));
    }
    r.insert("root_path".to_owned(), Value::String(request.root_path.clone()));
    r.insert(
        "url_parameters".to_owned(),
        Value::Array(request.url_parameters.iter().map(parameter_to_value).collect()),
    );
    map.insert("request".to_owned(), Value::Object(r));

    map.insert(
        "response".to_owned(),
        response_to_value(&interaction.response),
    );
    Value::Object(map)
}

fn parameter_to_value(parameter: &ParameterSpec) -> Value {
    Value::Array(vec![
        Value::String(parameter.key.clone()),
        Value::String(parameter.value_type.as_str().to_owned()),
        Value::Bool(parameter.optional),
        parameter.default.clone().unwrap_or(Value::Null),
    ])
}

fn response_to_value(response: &ResponseSpec) -> Value {
    let mut map = Map::new();
    if let Some(schema) = &response.expected_schema {
        map.insert("expected_schema".to_owned(), sort_keys(schema));
    }
    map.insert(
        "expected_status_code".to_owned(),
        response.expected_status_code.into(),
    );
    if let Some(mapping) = &response.integration {
        let mut entries = Map::new();
        for entry in mapping.entries() {
            entries.insert(
                entry.target.as_str().to_owned(),
                Value::String(entry.source.as_str().to_owned()),
            );
        }
        map.insert("integration".to_owned(), Value::Object(entries));
    }
    map.insert(
        "serialization_format".to_owned(),
        Value::String(response.serialization_format.as_str().to_owned()),
    );
    Value::Object(map)
}

fn sort_keys(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let mut sorted = Map::new();
            for key in keys {
                sorted.insert(key.clone(), sort_keys(&map[key]));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}
