//! The blending session: the stateful load_server / load_interaction /
//! set_parameters / blend lifecycle, wiring catalog, authentication,
//! policy, transport, and the response pipeline together.
//!
//! Remote-side problems never abort a blend; they are captured in the
//! returned envelope's `error` field. Only lifecycle misuse (no server
//! loaded, unknown interaction, bad parameters) is an immediate error.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::auth::{apply_auth, simple_authenticate, AuthError, AuthState, TokenCache};
use crate::clock::Clock;
use crate::config::GeneralConfig;
use crate::description::{AuthSpec, Catalog, InteractionSpec, ServerSpec};
use crate::policy::{await_admission, await_and_retry, AwaitError, PolicyRegistry};
use crate::request::{
    build_request, resolve_parameters, PreparedRequest, ResolveError, SuppliedParameters,
};
use crate::response::schema::{validate, SchemaViolation};
use crate::response::{check_status, deserialize, extract};
use crate::transport::HttpTransport;

/// Shared root owning everything sessions need: the catalog, runtime
/// settings, per-server policy gates, the token cache, and the
/// transport. All shared state is internally synchronized; sessions are
/// cheap handles.
pub struct Blender {
    catalog: Catalog,
    config: GeneralConfig,
    policies: PolicyRegistry,
    tokens: TokenCache,
    transport: Box<dyn HttpTransport>,
    clock: Arc<dyn Clock>,
    auth_flights: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Blender {
    pub fn new(
        catalog: Catalog,
        config: GeneralConfig,
        transport: Box<dyn HttpTransport>,
        clock: Arc<dyn Clock>,
    ) -> Blender {
        let tokens = TokenCache::open(&config.credentials_file);
        Blender {
            catalog,
            config,
            policies: PolicyRegistry::new(),
            tokens,
            transport,
            clock,
            auth_flights: Mutex::new(HashMap::new()),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn config(&self) -> &GeneralConfig {
        &self.config
    }

    /// Open a fresh session against this blender.
    pub fn session(self: &Arc<Self>) -> Session {
        Session {
            blender: Arc::clone(self),
            current_server: None,
            current_interaction: None,
            pending_parameters: SuppliedParameters::new(),
        }
    }

    fn flight_lock(&self, server_name: &str) -> Arc<Mutex<()>> {
        let mut flights = self.auth_flights.lock().expect("auth flights");
        Arc::clone(flights.entry(server_name.to_owned()).or_default())
    }

    /// Current credentials for a server; runs the single-URL exchange on
    /// demand for simple-auth servers. Returns the state and whether it
    /// came from the cache. At most one authentication per server runs
    /// at a time; concurrent callers get the first one's result.
    fn ensure_auth(&self, server: &ServerSpec) -> Result<(AuthState, bool), BlendError> {
        let Some(auth) = &server.authentication else {
            return Ok((AuthState::None, false));
        };
        let flight = self.flight_lock(&server.name);
        let _guard = flight.lock().expect("auth flight");
        if let Some(state) = self.tokens.get(&server.name) {
            if !state.is_expired(self.clock.unix_now()) {
                return Ok((state, true));
            }
            let _ = self.tokens.invalidate(&server.name);
        }
        match auth {
            AuthSpec::Simple { .. } => {
                let state = self.run_simple_auth(server, auth)?;
                Ok((state, false))
            }
            AuthSpec::OAuth2 { .. } => Err(BlendError::AuthRequired {
                message: format!(
                    "server {} needs an operator-driven authorization; run the auth command first",
                    server.name
                ),
            }),
        }
    }

    fn run_simple_auth(&self, server: &ServerSpec, auth: &AuthSpec) -> Result<AuthState, BlendError> {
        let policy = server.policy.clone().unwrap_or_default();
        let gate = self.policies.gate(&server.name);
        await_admission(&gate, &policy, self.clock.as_ref());
        let param = self
            .config
            .query_token_params
            .get(&server.name)
            .map(String::as_str);
        let state =
            simple_authenticate(auth, self.transport.as_ref(), param).map_err(BlendError::from)?;
        let _ = self.tokens.store(&server.name, state.clone());
        Ok(state)
    }

    /// Run the simple exchange for a server and cache the token.
    pub fn auth_simple(&self, server_name: &str) -> Result<(), SessionError> {
        let server = self.server(server_name)?;
        let Some(auth) = &server.authentication else {
            return Err(SessionError::NoAuthConfigured {
                server: server_name.to_owned(),
            });
        };
        self.run_simple_auth(server, auth)
            .map(|_| ())
            .map_err(|err| SessionError::AuthFlow {
                message: err.to_string(),
            })
    }

    /// The URL an operator must visit to authorize an OAuth2 server.
    pub fn oauth2_begin(
        &self,
        server_name: &str,
        redirect_uri: &str,
        state: &str,
    ) -> Result<String, SessionError> {
        let server = self.server(server_name)?;
        let Some(auth) = &server.authentication else {
            return Err(SessionError::NoAuthConfigured {
                server: server_name.to_owned(),
            });
        };
        crate::auth::oauth2_authorize_url(auth, redirect_uri, state).map_err(|err| {
            SessionError::AuthFlow {
                message: err.to_string(),
            }
        })
    }

    /// Exchange an authorization code and cache the bearer token.
    pub fn oauth2_complete(
        &self,
        server_name: &str,
        code: &str,
        redirect_uri: &str,
    ) -> Result<(), SessionError> {
        let server = self.server(server_name)?;
        let Some(auth) = &server.authentication else {
            return Err(SessionError::NoAuthConfigured {
                server: server_name.to_owned(),
            });
        };
        let policy = server.policy.clone().unwrap_or_default();
        let gate = self.policies.gate(&server.name);
        await_admission(&gate, &policy, self.clock.as_ref());
        let state = crate::auth::oauth2_exchange_code(
            auth,
            code,
            redirect_uri,
            self.transport.as_ref(),
            self.clock.as_ref(),
        )
        .map_err(|err| SessionError::AuthFlow {
            message: err.to_string(),
        })?;
        let _ = self.tokens.store(&server.name, state);
        Ok(())
    }

    fn server(&self, name: &str) -> Result<&ServerSpec, SessionError> {
        self.catalog.get(name).ok_or_else(|| SessionError::UnknownServer {
            name: name.to_owned(),
        })
    }
}

/// Lifecycle misuse and client-side failures that abort a call
/// immediately instead of producing an envelope.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown server {name:?}")]
    UnknownServer { name: String },
    #[error("no server loaded")]
    NoServerLoaded,
    #[error("server {server:?} has no interaction {name:?}")]
    UnknownInteraction { server: String, name: String },
    #[error("no interaction loaded")]
    NoInteractionLoaded,
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("server {server:?} has no authentication configured")]
    NoAuthConfigured { server: String },
    #[error("authentication failed: {message}")]
    AuthFlow { message: String },
}

/// What went wrong during a blend, captured in the envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlendError {
    #[error("authentication required: {message}")]
    AuthRequired { message: String },
    #[error("authentication failed: {message}")]
    Auth { message: String },
    #[error("transport failure: {message}")]
    Transport { message: String },
    #[error("gave up after {probes} too-many-calls responses")]
    PolicyExhausted { probes: u32 },
    #[error("expected status {expected}, got {actual}")]
    StatusMismatch { expected: u16, actual: u16 },
    #[error("{message}")]
    Deserialize { message: String },
    #[error("schema error: {message}")]
    Schema { message: String },
    #[error("extraction failed: {message}")]
    Extraction { message: String },
}

impl From<AuthError> for BlendError {
    fn from(err: AuthError) -> BlendError {
        match err {
            AuthError::Transport(inner) => BlendError::Transport {
                message: inner.message,
            },
            other => BlendError::Auth {
                message: other.to_string(),
            },
        }
    }
}

/// The request as issued, with credentials redacted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub method: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    /// Unix seconds when the blend started.
    pub started_at: u64,
    /// Wall-clock (or scripted) milliseconds the blend took, snoozes
    /// included.
    pub elapsed_ms: u64,
}

/// The outcome envelope of one blend. Serialized as-is on the CLI's
/// stdout; field names are a stable contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendResult {
    pub server_name: String,
    pub interaction_name: String,
    pub request_summary: RequestSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_code: Option<u16>,
    pub headers: Vec<(String, String)>,
    pub raw_content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed_content: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prepared_content: Option<Value>,
    pub schema_violations: Vec<SchemaViolation>,
    pub missing_extraction_paths: Vec<String>,
    pub timing: Timing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<BlendError>,
}

impl BlendResult {
    pub fn is_success(&self) -> bool {
        self.error.is_none()
    }
}

/// One client's view of the blender: a current server, a current
/// interaction, and parameters pending for the next blend.
pub struct Session {
    blender: Arc<Blender>,
    current_server: Option<String>,
    current_interaction: Option<String>,
    pending_parameters: SuppliedParameters,
}

impl Session {
    pub fn load_server(&mut self, name: &str) -> Result<(), SessionError> {
        if self.blender.catalog.get(name).is_none() {
            return Err(SessionError::UnknownServer {
                name: name.to_owned(),
            });
        }
        self.current_server = Some(name.to_owned());
        self.current_interaction = None;
        self.pending_parameters.clear();
        Ok(())
    }

    pub fn load_interaction(&mut self, name: &str) -> Result<(), SessionError> {
        let server_name = self.current_server.clone().ok_or(SessionError::NoServerLoaded)?;
        let server = self.blender.catalog.get(&server_name).expect("loaded server");
        if server.interaction(name).is_none() {
            return Err(SessionError::UnknownInteraction {
                server: server_name,
                name: name.to_owned(),
            });
        }
        self.current_interaction = Some(name.to_owned());
        self.pending_parameters.clear();
        Ok(())
    }

    pub fn set_parameters(&mut self, params: SuppliedParameters) -> Result<(), SessionError> {
        if self.current_interaction.is_none() {
            return Err(SessionError::NoInteractionLoaded);
        }
        self.pending_parameters = params;
        Ok(())
    }

    /// Run the full pipeline for the loaded interaction. Pending
    /// parameters are consumed whether or not the blend succeeds.
    pub fn blend(&mut self) -> Result<BlendResult, SessionError> {
        let interaction_name = self
            .current_interaction
            .clone()
            .ok_or(SessionError::NoInteractionLoaded)?;
        let server_name = self.current_server.clone().expect("server behind interaction");
        let params = std::mem::take(&mut self.pending_parameters);

        let blender = Arc::clone(&self.blender);
        let server = blender.catalog.get(&server_name).expect("loaded server");
        let interaction = server.interaction(&interaction_name).expect("loaded interaction");

        let resolved = resolve_parameters(&interaction.request, &params)?;
        Ok(run_blend(&blender, server, interaction, &resolved))
    }
}

fn summary_of(request: &PreparedRequest, state: &AuthState) -> RequestSummary {
    let url = match state {
        AuthState::QueryToken { param_name, .. } => {
            let mut url = request.url.clone();
            url.push(if url.contains('?') { '&' } else { '?' });
            url.push_str(&crate::request::encode_component(param_name));
            url.push_str("=***");
            url
        }
        AuthState::None | AuthState::Bearer { .. } => request.url.clone(),
    };
    RequestSummary {
        method: request.method.as_str().to_owned(),
        url,
    }
}

fn run_blend(
    blender: &Blender,
    server: &ServerSpec,
    interaction: &InteractionSpec,
    resolved: &crate::request::ResolvedParameters,
) -> BlendResult {
    let clock = blender.clock.as_ref();
    let started_at = clock.unix_now();
    let start = clock.now();
    let base_request = build_request(server, interaction, resolved);

    let mut result = BlendResult {
        server_name: server.name.clone(),
        interaction_name: interaction.name.clone(),
        request_summary: summary_of(&base_request, &AuthState::None),
        status_code: None,
        headers: Vec::new(),
        raw_content: String::new(),
        parsed_content: None,
        prepared_content: None,
        schema_violations: Vec::new(),
        missing_extraction_paths: Vec::new(),
        timing: Timing {
            started_at,
            elapsed_ms: 0,
        },
        error: None,
    };
    let finish = |mut result: BlendResult| {
        result.timing.elapsed_ms = (clock.now() - start).as_millis() as u64;
        result
    };

    let (auth_state, from_cache) = match blender.ensure_auth(server) {
        Ok(state) => state,
        Err(err) => {
            result.error = Some(err);
            return finish(result);
        }
    };
    result.request_summary = summary_of(&base_request, &auth_state);

    let policy = server.policy.clone().unwrap_or_default();
    let gate = blender.policies.gate(&server.name);
    let send = |state: &AuthState| {
        let request = apply_auth(&base_request, state);
        await_and_retry(&gate, &policy, clock, blender.config.max_probes, || {
            blender.transport.send(&request)
        })
    };

    let mut response = match send(&auth_state) {
        Ok(response) => response,
        Err(err) => {
            result.error = Some(match err {
                AwaitError::Transport(inner) => BlendError::Transport {
                    message: inner.message,
                },
                AwaitError::Exhausted { probes, .. } => BlendError::PolicyExhausted { probes },
            });
            return finish(result);
        }
    };

    // A 401 against cached simple-auth credentials means the token went
    // stale server-side: re-authenticate once and replay.
    let simple_auth = matches!(server.authentication, Some(AuthSpec::Simple { .. }));
    if response.status == 401 && from_cache && simple_auth {
        let _ = blender.tokens.invalidate(&server.name);
        match blender.ensure_auth(server) {
            Ok((fresh_state, _)) => {
                result.request_summary = summary_of(&base_request, &fresh_state);
                match send(&fresh_state) {
                    Ok(second) => response = second,
                    Err(err) => {
                        result.error = Some(match err {
                            AwaitError::Transport(inner) => BlendError::Transport {
                                message: inner.message,
                            },
                            AwaitError::Exhausted { probes, .. } => {
                                BlendError::PolicyExhausted { probes }
                            }
                        });
                        return finish(result);
                    }
                }
            }
            Err(err) => {
                result.error = Some(err);
                return finish(result);
            }
        }
    }

    result.status_code = Some(response.status);
    result.headers = response.headers.clone();
    result.raw_content = String::from_utf8_lossy(&response.body).into_owned();

    if let Err(mismatch) = check_status(interaction.response.expected_status_code, response.status)
    {
        result.error = Some(BlendError::StatusMismatch {
            expected: mismatch.expected,
            actual: mismatch.actual,
        });
        return finish(result);
    }

    let tree = match deserialize(&result.raw_content, interaction.response.serialization_format) {
        Ok(tree) => tree,
        Err(err) => {
            result.error = Some(BlendError::Deserialize {
                message: err.to_string(),
            });
            return finish(result);
        }
    };
    result.parsed_content = Some(tree.clone());

    if let Some(schema) = &interaction.response.expected_schema {
        match validate(&tree, schema) {
            Ok(violations) => result.schema_violations = violations,
            Err(err) => {
                result.error = Some(BlendError::Schema {
                    message: err.to_string(),
                });
                return finish(result);
            }
        }
    }

    match &interaction.response.integration {
        Some(mapping) => match extract(&tree, &mapping.source_target_pairs()) {
            Ok(extraction) => {
                result.prepared_content = Some(extraction.record);
                result.missing_extraction_paths = extraction
                    .missing
                    .iter()
                    .map(|path| path.as_str().to_owned())
                    .collect();
            }
            Err(conflict) => {
                result.error = Some(BlendError::Extraction {
                    message: conflict.to_string(),
                });
                return finish(result);
            }
        },
        None => result.prepared_content = result.parsed_content.clone(),
    }

    finish(result)
}
