//! Declarative multi-API HTTP client toolkit.

pub mod auth;
pub mod chain;
pub mod cli;
pub mod clock;
pub mod config;
pub mod description;
pub mod mock;
pub mod policy;
pub mod request;
pub mod response;
pub mod session;
pub mod transport;
