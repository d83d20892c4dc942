//! A local scripted HTTP server for end-to-end tests.
//!
//! The server stands in for the remote platforms: it serves fixture-driven
//! responses, captures every request it sees, and can simulate a rate
//! limit. Responses carry no implicit Date or Server headers, so replays
//! are byte-deterministic. Requests are served sequentially, which is
//! sufficient for the sequential clients this crate builds.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::request::decode_query;

/// Fixture describing what the server serves.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockFixture {
    pub routes: Vec<MockRoute>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_sim: Option<LimitSim>,
}

/// One route: method, exact path, optional query constraints, and the
/// responses it replays in order (the last repeats forever).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRoute {
    pub method: String,
    pub path: String,
    /// Query constraints: value `"*"` accepts any value for that key.
    /// Keys absent from the matcher are unconstrained.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub param_matcher: IndexMap<String, String>,
    pub responses: Vec<MockResponse>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockResponse {
    pub status: u16,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headers: Vec<(String, String)>,
    /// Fixture files may give the body inline as JSON; it is served as
    /// its compact serialization.
    #[serde(default, deserialize_with = "body_text")]
    pub body: String,
}

fn body_text<'de, D>(deserializer: D) -> Result<String, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let value = serde_json::Value::deserialize(deserializer)?;
    Ok(match value {
        serde_json::Value::String(text) => text,
        other => other.to_string(),
    })
}

/// Rate-limit simulation: after `allowed` served requests every further
/// request gets `limited_status`, until `reset_after_seconds` have passed
/// since the first limited response.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LimitSim {
    pub allowed: u32,
    pub limited_status: u16,
    pub reset_after_seconds: u64,
}

impl MockFixture {
    pub fn from_file(path: &Path) -> Result<MockFixture, MockError> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| MockError::InvalidFixture(format!("{}: {err}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|err| MockError::InvalidFixture(format!("{}: {err}", path.display())))
    }
}

/// One request as the server saw it, in arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapturedRequest {
    pub method: String,
    pub path: String,
    pub query: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    pub order: usize,
}

#[derive(Debug, Error)]
pub enum MockError {
    #[error("could not bind a local port: {0}")]
    Bind(String),
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
}

struct MockState {
    cursors: Vec<usize>,
    served: u32,
    limit_started: Option<Duration>,
    log: Vec<CapturedRequest>,
}

/// Running server handle. Dropping it shuts the server down.
pub struct MockHandle {
    addr: SocketAddr,
    state: Arc<Mutex<MockState>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

/// Start the server on a free local port with the real clock.
pub fn start_mock(fixture: MockFixture) -> Result<MockHandle, MockError> {
    start_mock_with_clock(fixture, Arc::new(SystemClock::new()))
}

/// Start the server with an injected clock, so rate-limit resets follow
/// the test's virtual time.
pub fn start_mock_with_clock(
    fixture: MockFixture,
    clock: Arc<dyn Clock>,
) -> Result<MockHandle, MockError> {
    for (i, route) in fixture.routes.iter().enumerate() {
        if route.responses.is_empty() {
            return Err(MockError::InvalidFixture(format!(
                "route {i} ({} {}) has no responses",
                route.method, route.path
            )));
        }
    }
    let listener =
        TcpListener::bind("127.0.0.1:0").map_err(|err| MockError::Bind(err.to_string()))?;
    let addr = listener.local_addr().map_err(|err| MockError::Bind(err.to_string()))?;
    let state = Arc::new(Mutex::new(MockState {
        cursors: vec![0; fixture.routes.len()],
        served: 0,
        limit_started: None,
        log: Vec::new(),
    }));
    let stop = Arc::new(AtomicBool::new(false));

    let thread = {
        let state = Arc::clone(&state);
        let stop = Arc::clone(&stop);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let _ = serve_connection(stream, &fixture, &state, clock.as_ref());
            }
        })
    };

    Ok(MockHandle {
        addr,
        state,
        stop,
        thread: Some(thread),
    })
}

impl MockHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn host(&self) -> String {
        self.addr.ip().to_string()
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Snapshot of every request captured so far.
    pub fn log(&self) -> Vec<CapturedRequest> {
        self.state.lock().expect("mock state").log.clone()
    }

    pub fn request_count(&self) -> usize {
        self.state.lock().expect("mock state").log.len()
    }

    pub fn shutdown(&mut self) {
        if self.thread.is_none() {
            return;
        }
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for MockHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_connection(
    mut stream: TcpStream,
    fixture: &MockFixture,
    state: &Mutex<MockState>,
    clock: &dyn Clock,
) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let Some(request) = read_request(&mut stream)? else {
        return Ok(());
    };

    let mut state = state.lock().expect("mock state");
    let order = state.log.len();
    state.log.push(CapturedRequest {
        method: request.method.clone(),
        path: request.path.clone(),
        query: request.query.clone(),
        headers: request.headers.clone(),
        body: request.body.clone(),
        order,
    });

    if let Some(limit) = &fixture.limit_sim {
        let now = clock.now();
        if let Some(started) = state.limit_started {
            if now >= started + Duration::from_secs(limit.reset_after_seconds) {
                state.served = 0;
                state.limit_started = None;
            }
        }
        if state.limit_started.is_none() && state.served >= limit.allowed {
            state.limit_started = Some(now);
        }
        if state.limit_started.is_some() {
            let body = "{\"error\":\"rate limited\"}";
            return write_response(&mut stream, limit.limited_status, &[], body.as_bytes());
        }
        state.served += 1;
    }

    for (i, route) in fixture.routes.iter().enumerate() {
        if route_matches(route, &request) {
            let cursor = state.cursors[i].min(route.responses.len() - 1);
            state.cursors[i] += 1;
            let response = route.responses[cursor].clone();
            drop(state);
            return write_response(
                &mut stream,
                response.status,
                &response.headers,
                response.body.as_bytes(),
            );
        }
    }

    let body = format!(
        "{{\"error\":\"no route for {} {}\"}}",
        request.method, request.path
    );
    write_response(&mut stream, 404, &[], body.as_bytes())
}

fn route_matches(route: &MockRoute, request: &RawRequest) -> bool {
    if !route.method.eq_ignore_ascii_case(&request.method) || route.path != request.path {
        return false;
    }
    route.param_matcher.iter().all(|(key, expected)| {
        request
            .query
            .iter()
            .any(|(k, v)| k == key && (expected == "*" || v == expected))
    })
}

struct RawRequest {
    method: String,
    path: String,
    query: Vec<(String, String)>,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

fn read_request(stream: &mut TcpStream) -> std::io::Result<Option<RawRequest>> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let head_end = loop {
        if let Some(pos) = find_blank_line(&buf) {
            break pos;
        }
        match stream.read(&mut chunk) {
            Ok(0) => return Ok(None),
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(err) => return Err(err),
        }
    };

    let head = String::from_utf8_lossy(&buf[..head_end]).into_owned();
    let mut lines = head.split("\r\n");
    let request_line = lines.next().unwrap_or("");
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_owned();
    let target = parts.next().unwrap_or("");
    let (path, query_text) = match target.split_once('?') {
        Some((p, q)) => (p.to_owned(), q.to_owned()),
        None => (target.to_owned(), String::new()),
    };

    let mut headers = Vec::new();
    let mut content_length = 0usize;
    for line in lines {
        if let Some((name, value)) = line.split_once(':') {
            let name = name.trim().to_owned();
            let value = value.trim().to_owned();
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.parse().unwrap_or(0);
            }
            headers.push((name, value));
        }
    }

    let mut body = buf[head_end + 4..].to_vec();
    while body.len() < content_length {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => body.extend_from_slice(&chunk[..n]),
            Err(err) => return Err(err),
        }
    }
    body.truncate(content_length);

    Ok(Some(RawRequest {
        method,
        path,
        query: decode_query(&query_text),
        headers,
        body,
    }))
}

fn find_blank_line(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn write_response(
    stream: &mut TcpStream,
    status: u16,
    headers: &[(String, String)],
    body: &[u8],
) -> std::io::Result<()> {
    let mut response = format!("HTTP/1.1 {} {}\r\n", status, reason(status));
    for (name, value) in headers {
        response.push_str(&format!("{name}: {value}\r\n"));
    }
    response.push_str(&format!("Content-Length: {}\r\n", body.len()));
    response.push_str("Connection: close\r\n\r\n");
    stream.write_all(response.as_bytes())?;
    stream.write_all(body)?;
    stream.flush()
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        201 => "Created",
        204 => "No Content",
        400 => "Bad Request",
        401 => "Unauthorized",
        403 => "Forbidden",
        404 => "Not Found",
        420 => "Enhance Your Calm",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        _ => "Status",
    }
}
