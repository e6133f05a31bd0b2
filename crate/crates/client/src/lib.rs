//! Relying-party side of delegated certificate validation.

pub mod client;
pub mod profile;
pub mod transport;

pub use client::{Client, ClientError, Invocation, Outcome, Target};
pub use profile::{ClientProfile, ProfileError, ProfileSettings, ServerCertCheck, SigningConfig};
pub use transport::{corrupt, Fault, Faulty, HttpTransport, Transport, TransportError};
