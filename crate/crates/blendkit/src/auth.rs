//! Authentication: the single-URL token exchange, the three-legged
//! authorization-code grant, credential application, and the on-disk
//! token cache.
//!
//! Tokens are [`Secret`]s: they render as `***` in Debug output and never
//! appear in envelopes or log lines. The cache file is the one place they
//! are written in the clear, and it is created with owner-only
//! permissions.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::clock::Clock;
use crate::description::AuthSpec;
use crate::request::{encode_component, encode_pairs, PreparedRequest};
use crate::response::paths::{dot_get, DotPath};
use crate::transport::{HttpTransport, TransportError};

/// A credential string that must not leak into output.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Secret {
        Secret(value.into())
    }

    /// The actual credential, for the wire and the cache file only.
    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("***")
    }
}

/// Credentials established for one server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuthState {
    None,
    /// Token replayed as an extra query parameter on every request.
    QueryToken { param_name: String, token: Secret },
    /// Token replayed in an `Authorization: Bearer` header.
    Bearer {
        token: Secret,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expires_at: Option<u64>,
    },
}

impl AuthState {
    /// Whether these credentials are past their expiry at `unix_now`.
    pub fn is_expired(&self, unix_now: u64) -> bool {
        matches!(self, AuthState::Bearer { expires_at: Some(at), .. } if *at <= unix_now)
    }
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("authentication rejected with status {status}")]
    Rejected { status: u16 },
    #[error("token not found at {path:?} in the authentication response")]
    TokenNotFound { path: String },
    #[error("server uses {needed} authentication")]
    SpecMismatch { needed: &'static str },
}

fn scalar_text(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Perform the single-URL exchange: GET the token endpoint with the
/// declared parameters and read the token out of the JSON body at the
/// spec's token path. The replay parameter name defaults to the token
/// path's last segment; `param_override` replaces it.
pub fn simple_authenticate(
    spec: &AuthSpec,
    transport: &dyn HttpTransport,
    param_override: Option<&str>,
) -> Result<AuthState, AuthError> {
    let AuthSpec::Simple {
        request_token_url,
        url_parameters,
        token_path,
    } = spec
    else {
        return Err(AuthError::SpecMismatch { needed: "OAuth2" });
    };
    let pairs: Vec<(String, String)> = url_parameters
        .iter()
        .map(|(k, v)| (k.clone(), scalar_text(v)))
        .collect();
    let mut url = request_token_url.clone();
    let query = encode_pairs(&pairs);
    if !query.is_empty() {
        url.push(if url.contains('?') { '&' } else { '?' });
        url.push_str(&query);
    }
    let request = PreparedRequest {
        method: crate::description::Method::Get,
        url,
        headers: vec![("Accept".to_owned(), "application/json".to_owned())],
        body: Vec::new(),
        server_name: String::new(),
        interaction_name: String::new(),
    };
    let response = transport.send(&request)?;
    if !(200..300).contains(&response.status) {
        return Err(AuthError::Rejected {
            status: response.status,
        });
    }
    let token = read_token(&response.body, token_path)?;
    Ok(AuthState::QueryToken {
        param_name: param_override.unwrap_or(token_path.last()).to_owned(),
        token: Secret::new(token),
    })
}

fn read_token(body: &[u8], path: &DotPath) -> Result<String, AuthError> {
    let not_found = || AuthError::TokenNotFound {
        path: path.as_str().to_owned(),
    };
    let tree: Value = serde_json::from_slice(body).map_err(|_| not_found())?;
    let found = dot_get(&tree, path).ok_or_else(not_found)?;
    match found {
        Value::String(s) if !s.is_empty() => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(not_found()),
    }
}

/// The URL the operator must visit to obtain an authorization code.
pub fn oauth2_authorize_url(spec: &AuthSpec, redirect_uri: &str, state: &str) -> Result<String, AuthError> {
    let AuthSpec::OAuth2 {
        consumer_key,
        authorize_url,
        ..
    } = spec
    else {
        return Err(AuthError::SpecMismatch { needed: "simple" });
    };
    let separator = if authorize_url.contains('?') { '&' } else { '?' };
    Ok(format!(
        "{authorize_url}{separator}response_type=code&client_id={}&redirect_uri={}&state={}",
        encode_component(consumer_key),
        encode_component(redirect_uri),
        encode_component(state)
    ))
}

/// Exchange an authorization code for a bearer token at the access token
/// endpoint. The consumer secret travels only in the POST form body.
pub fn oauth2_exchange_code(
    spec: &AuthSpec,
    code: &str,
    redirect_uri: &str,
    transport: &dyn HttpTransport,
    clock: &dyn Clock,
) -> Result<AuthState, AuthError> {
    let AuthSpec::OAuth2 {
        consumer_key,
        consumer_secret,
        access_token_url,
        ..
    } = spec
    else {
        return Err(AuthError::SpecMismatch { needed: "simple" });
    };
    let form = encode_pairs(&[
        ("grant_type".to_owned(), "authorization_code".to_owned()),
        ("code".to_owned(), code.to_owned()),
        ("redirect_uri".to_owned(), redirect_uri.to_owned()),
        ("client_id".to_owned(), consumer_key.clone()),
        ("client_secret".to_owned(), consumer_secret.clone()),
    ]);
    let request = PreparedRequest {
        method: crate::description::Method::Post,
        url: access_token_url.clone(),
        headers: vec![
            ("Accept".to_owned(), "application/json".to_owned()),
            (
                "Content-Type".to_owned(),
                "application/x-www-form-urlencoded".to_owned(),
            ),
        ],
        body: form.into_bytes(),
        server_name: String::new(),
        interaction_name: String::new(),
    };
    let response = transport.send(&request)?;
    if !(200..300).contains(&response.status) {
        return Err(AuthError::Rejected {
            status: response.status,
        });
    }
    let token_field = DotPath::parse("access_token").expect("static path");
    let token = read_token(&response.body, &token_field)?;
    let tree: Value = serde_json::from_slice(&response.body).expect("read_token parsed it");
    let expires_at = tree
        .get("expires_in")
        .and_then(Value::as_u64)
        .map(|seconds| clock.unix_now() + seconds);
    Ok(AuthState::Bearer {
        token: Secret::new(token),
        expires_at,
    })
}

/// Attach credentials to a built request. Method, path, and existing
/// parameters are never touched; applying the same state twice changes
/// nothing.
pub fn apply_auth(request: &PreparedRequest, state: &AuthState) -> PreparedRequest {
    let mut request = request.clone();
    match state {
        AuthState::None => {}
        AuthState::QueryToken { param_name, token } => {
            let addition = format!(
                "{}={}",
                encode_component(param_name),
                encode_component(token.expose())
            );
            let already = request
                .url
                .split_once('?')
                .is_some_and(|(_, q)| q.split('&').any(|pair| pair == addition));
            if !already {
                request
                    .url
                    .push(if request.url.contains('?') { '&' } else { '?' });
                request.url.push_str(&addition);
            }
        }
        AuthState::Bearer { token, .. } => {
            let value = format!("Bearer {}", token.expose());
            let already = request
                .headers
                .iter()
                .any(|(name, v)| name == "Authorization" && *v == value);
            if !already {
                request.headers.push(("Authorization".to_owned(), value));
            }
        }
    }
    request
}

/// On-disk credentials, one entry per server name. Reads are lazy and
/// forgiving (a missing or unreadable file is an empty cache); writes
/// go to a file with owner-only permissions.
pub struct TokenCache {
    path: PathBuf,
    states: Mutex<HashMap<String, AuthState>>,
}

impl TokenCache {
    pub fn open(path: &Path) -> TokenCache {
        let states = fs::read_to_string(path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default();
        TokenCache {
            path: path.to_owned(),
            states: Mutex::new(states),
        }
    }

    pub fn get(&self, server_name: &str) -> Option<AuthState> {
        self.states
            .lock()
            .expect("token cache")
            .get(server_name)
            .cloned()
    }

    pub fn store(&self, server_name: &str, state: AuthState) -> io::Result<()> {
        let mut states = self.states.lock().expect("token cache");
        states.insert(server_name.to_owned(), state);
        self.persist(&states)
    }

    pub fn invalidate(&self, server_name: &str) -> io::Result<()> {
        let mut states = self.states.lock().expect("token cache");
        if states.remove(server_name).is_none() {
            return Ok(());
        }
        self.persist(&states)
    }

    fn persist(&self, states: &HashMap<String, AuthState>) -> io::Result<()> {
        if let Some(parent) = self.path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let ordered: std::collections::BTreeMap<&String, &AuthState> = states.iter().collect();
        let text = serde_json::to_string_pretty(&ordered).expect("states serialize");
        write_private(&self.path, text.as_bytes())
    }
}

#[cfg(unix)]
fn write_private(path: &Path, contents: &[u8]) -> io::Result<()> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut file = fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)?;
    file.write_all(contents)
}

#[cfg(not(unix))]
fn write_private(path: &Path, contents: &[u8]) -> io::Result<()> {
    fs::write(path, contents)
}
