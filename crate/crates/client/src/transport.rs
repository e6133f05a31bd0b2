use std::time::Duration;

use certval_core::vpm::{ServerMessage, DVCS_CONTENT_TYPE};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("{url}: {message}")]
    Failed { url: String, message: String },
    #[error("{url}: HTTP status {status}")]
    Status { url: String, status: u16 },
}

/// Carries one DVCS request body to the server and returns the response body.
pub trait Transport {
    fn post(&self, url: &str, body: &[u8]) -> Result<Vec<u8>, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for HttpTransport {
    fn post(&self, url: &str, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        let failed = |e: ureq::Error| TransportError::Failed {
            url: url.to_owned(),
            message: e.to_string(),
        };
        let mut resp = self
            .agent
            .post(url)
            .header("content-type", DVCS_CONTENT_TYPE)
            .send(body)
            .map_err(failed)?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(TransportError::Status {
                url: url.to_owned(),
                status,
            });
        }
        resp.body_mut().read_to_vec().map_err(failed)
    }
}

/// Ways a misbehaving server or network can corrupt a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Echo carries a different nonce; the signature is left as it was.
    WrongNonce,
    /// Echo carries a different request time, same nonce.
    AlteredEcho,
    /// Signature removed.
    Unsigned,
    /// One bit of the signature value flipped.
    TamperedSignature,
    /// One byte of the response body after signing flipped.
    TamperedBody,
}

/// Wraps a transport and corrupts every response it returns.
pub struct Faulty<T> {
    pub inner: T,
    pub fault: Fault,
}

impl<T: Transport> Transport for Faulty<T> {
    fn post(&self, url: &str, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        let bytes = self.inner.post(url, body)?;
        Ok(corrupt(&bytes, self.fault).unwrap_or(bytes))
    }
}

/// The corrupted response, or `None` when the fault does not apply to this message.
pub fn corrupt(bytes: &[u8], fault: Fault) -> Option<Vec<u8>> {
    let mut msg = ServerMessage::from_der(bytes).ok()?;
    let (echo, signature) = match &mut msg {
        ServerMessage::Dvc { info, signature } => (Some(&mut info.request_info), signature),
        ServerMessage::Error { info, signature } => (info.request_info.as_mut(), signature),
    };
    match fault {
        Fault::WrongNonce => echo?.nonce ^= 1,
        Fault::AlteredEcho => {
            let echo = echo?;
            echo.request_time = echo.request_time.plus_secs(1);
        }
        Fault::Unsigned => *signature = None,
        Fault::TamperedSignature => signature.as_mut()?.signature[0] ^= 1,
        Fault::TamperedBody => {
            let ServerMessage::Dvc { info, .. } = &mut msg else {
                return None;
            };
            info.serial += 1;
        }
    }
    msg.to_der().ok()
}
