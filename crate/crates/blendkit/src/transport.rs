//! The HTTP transport boundary.
//!
//! Everything above this trait works with [`PreparedRequest`] and
//! [`TransportResponse`] values, so tests can swap in scripted transports
//! and the rest of the pipeline never touches sockets directly.

use std::time::Duration;

use thiserror::Error;

use crate::description::Method;
use crate::request::PreparedRequest;

/// A response as it came off the wire: status, headers in arrival order,
/// raw body bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

/// The request never produced a response: connection refused, timeout,
/// protocol failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transport failure: {message}")]
pub struct TransportError {
    pub message: String,
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &PreparedRequest) -> Result<TransportResponse, TransportError>;
}

/// Production transport backed by a blocking HTTP client.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration, user_agent: &str) -> Result<ReqwestTransport, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(user_agent)
            .build()
            .map_err(|err| TransportError {
                message: err.to_string(),
            })?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn send(&self, request: &PreparedRequest) -> Result<TransportResponse, TransportError> {
        let method = match request.method {
            Method::Get => reqwest::Method::GET,
            Method::Put => reqwest::Method::PUT,
            Method::Post => reqwest::Method::POST,
            Method::Delete => reqwest::Method::DELETE,
        };
        let mut builder = self.client.request(method, &request.url);
        for (name, value) in &request.headers {
            builder = builder.header(name, value);
        }
        if !request.body.is_empty() {
            builder = builder.body(request.body.clone());
        }
        let response = builder.send().map_err(|err| TransportError {
            message: err.to_string(),
        })?;
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .map(|(name, value)| {
                (
                    name.as_str().to_owned(),
                    String::from_utf8_lossy(value.as_bytes()).into_owned(),
                )
            })
            .collect();
        let body = response
            .bytes()
            .map_err(|err| TransportError {
                message: err.to_string(),
            })?
            .to_vec();
        Ok(TransportResponse {
            status,
            headers,
            body,
        })
    }
}
