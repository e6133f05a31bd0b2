//! Certificate validation server: repository, clock, admission checks,
//! per-target path processing and the HTTP endpoint.

pub mod config;
pub mod http;
pub mod repo;
pub mod serial;
pub mod service;

pub use config::{Clock, Overrides, Settings, ValidationPolicy};
pub use http::{router, serve, RunningServer};
pub use service::{Identity, Outcome, Rejection, ServerError, Service};
