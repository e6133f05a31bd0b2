//! Core of the certificate validation service: DER codec, certificate model,
//! path construction and validation, policy processing, revocation status and
//! the request/response protocol shared by server and client.

pub mod anchors;
pub mod crypto;
pub mod csm;
pub mod der;
pub mod pcm;
pub mod ppm;
pub mod pvm;
pub mod time;
pub mod vpm;
pub mod x509;

pub use der::{DerValue, Oid};
pub use time::GeneralizedTime;
pub use x509::{Certificate, Crl, Fingerprint, Name};
