use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use certval_core::crypto::KeyPair;
use certval_core::csm::{StatusReply, StatusValue};
use certval_core::pvm::{FailureReason, VerdictStatus};
use certval_core::vpm::{
    build_request, parse_and_verify_response, sanitize, self_signed_signer, AcceptAnySigner,
    ErrorCode, PinnedSigner, RequestOptions, ResponseTrust, ServerMessage, SignerCheck,
    TargetResult, ValidationRequest, VpmError,
};
use certval_core::x509::parse_certificate;
use certval_core::{Certificate, GeneralizedTime, Name};

use crate::profile::{ClientProfile, ServerCertCheck};
use crate::transport::{Transport, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("could not build the request: {0}")]
    Request(VpmError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("response rejected ({0:?}): {0}")]
    Response(VpmError),
    #[error("server answered with an error notice: {code}: {message}")]
    Notice { code: ErrorCode, message: String },
    #[error("response evidence does not hold up: {0}")]
    Evidence(String),
    #[error("{path}: cannot store evidence: {source}")]
    Store {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Notice { code, .. } => Some(*code),
            _ => None,
        }
    }
}

/// A certificate to validate and the name it is reported under.
#[derive(Debug, Clone)]
pub struct Target {
    pub label: String,
    pub cert: Certificate,
}

impl Target {
    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let input = |message: String| ClientError::Input {
            path: path.to_owned(),
            message,
        };
        let bytes = fs::read(path).map_err(|e| input(e.to_string()))?;
        let cert = parse_certificate(&bytes).map_err(|e| input(e.to_string()))?;
        let label = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self { label, cert })
    }
}

/// Per-invocation values the caller controls.
#[derive(Debug, Clone, Copy)]
pub struct Invocation {
    pub nonce: u64,
    pub request_time: GeneralizedTime,
}

impl Invocation {
    pub fn now() -> Self {
        Self {
            nonce: rand::random(),
            request_time: GeneralizedTime::now(),
        }
    }
}

pub struct Client<'a> {
    pub profile: &'a ClientProfile,
    pub transport: &'a dyn Transport,
    /// Certificates sent along as candidate chain material.
    pub supplied: Vec<Certificate>,
}

/// A verified DVC and what was asked.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub targets: Vec<Target>,
    pub request: ValidationRequest,
    pub response: Vec<u8>,
    pub message: ServerMessage,
}

impl<'a> Client<'a> {
    pub fn new(profile: &'a ClientProfile, transport: &'a dyn Transport) -> Self {
        Self {
            profile,
            transport,
            supplied: Vec::new(),
        }
    }

    pub fn request(
        &self,
        targets: &[Target],
        at: Invocation,
    ) -> Result<ValidationRequest, ClientError> {
        let p = self.profile;
        let opts = RequestOptions {
            cpr: p.cpr.clone(),
            request_policy: p.request_policy.clone(),
            dvcs_name: p.server_name.clone(),
            requester: p.requester.clone(),
            want_backs: p.want_backs,
            validation_time: p.validation_time,
            supplied: self.supplied.clone(),
        };
        let certs = targets.iter().map(|t| t.cert.clone()).collect();
        let mut req =
            build_request(&opts, certs, at.nonce, at.request_time).map_err(ClientError::Request)?;
        if let Some(signing) = &p.signing {
            let input = |path: &Path, message: String| ClientError::Input {
                path: path.to_owned(),
                message,
            };
            let bytes = fs::read(&signing.key).map_err(|e| input(&signing.key, e.to_string()))?;
            let key =
                KeyPair::from_key_file(&bytes).map_err(|e| input(&signing.key, e.to_string()))?;
            let cert = match &signing.cert {
                Some(path) => {
                    let bytes = fs::read(path).map_err(|e| input(path, e.to_string()))?;
                    parse_certificate(&bytes).map_err(|e| input(path, e.to_string()))?
                }
                None => {
                    let name = p
                        .requester
                        .clone()
                        .unwrap_or_else(|| "CN=rp-client".parse().expect("static name"));
                    self_signed_signer(&name, &key, at.request_time)
                }
            };
            req.sign(&cert, &key).map_err(ClientError::Request)?;
        }
        Ok(req)
    }

    pub fn validate(&self, targets: Vec<Target>, at: Invocation) -> Result<Outcome, ClientError> {
        let request = self.request(&targets, at)?;
        let der = request.to_der().map_err(ClientError::Request)?;
        let response = self.transport.post(&self.profile.server_url, &der)?;

        let online;
        let signer: &dyn SignerCheck = match (&self.profile.server_cert_check, self.profile.thin) {
            (ServerCertCheck::Pinned(fp), _) => &PinnedSigner(*fp),
            (ServerCertCheck::Online { validator }, false) => {
                online = OnlineSignerCheck {
                    client: self,
                    url: validator.as_deref().unwrap_or(&self.profile.server_url),
                    at,
                };
                &online
            }
            (ServerCertCheck::Online { .. }, true) | (ServerCertCheck::None, _) => &AcceptAnySigner,
        };
        let trust = ResponseTrust {
            trust_unsigned: self.profile.trust_unsigned,
            signer,
        };
        let message = parse_and_verify_response(&response, &request.info, &trust)
            .map_err(ClientError::Response)?;

        if let Some(dir) = &self.profile.store_evidence {
            store(dir, &der, &response, &message)?;
        }
        let outcome = match message {
            ServerMessage::Error { info, .. } => {
                return Err(ClientError::Notice {
                    code: info.code,
                    message: info.message,
                });
            }
            message => Outcome {
                targets,
                request,
                response,
                message,
            },
        };
        let results = outcome.results();
        if results.len() != outcome.targets.len() {
            return Err(ClientError::Evidence(format!(
                "{} results for {} targets",
                results.len(),
                outcome.targets.len()
            )));
        }
        for (t, r) in outcome.targets.iter().zip(results) {
            if r.target != t.cert.fingerprint() {
                return Err(ClientError::Evidence(format!(
                    "result for {} is out of order",
                    t.label
                )));
            }
            if !self.profile.thin {
                check_evidence(&t.cert, r)
                    .map_err(|e| ClientError::Evidence(format!("{}: {e}", t.label)))?;
            }
        }
        Ok(outcome)
    }
}

/// Accepts the server's signing certificate only when a validator reports it valid.
/// The validator's own answer is checked for signature, not for signer.
struct OnlineSignerCheck<'c, 'a> {
    client: &'c Client<'a>,
    url: &'c str,
    at: Invocation,
}

impl SignerCheck for OnlineSignerCheck<'_, '_> {
    fn check(&self, signer: &Certificate) -> Result<(), String> {
        let nonce = self.at.nonce.wrapping_add(1);
        let req = build_request(
            &RequestOptions::default(),
            vec![signer.clone()],
            nonce,
            self.at.request_time,
        )
        .map_err(|e| e.to_string())?;
        let body = req.to_der().map_err(|e| e.to_string())?;
        let bytes = self
            .client
            .transport
            .post(self.url, &body)
            .map_err(|e| e.to_string())?;
        let trust = ResponseTrust {
            trust_unsigned: false,
            signer: &AcceptAnySigner,
        };
        match parse_and_verify_response(&bytes, &req.info, &trust).map_err(|e| e.to_string())? {
            ServerMessage::Dvc { info, .. } => match info.results[0].status {
                VerdictStatus::Valid => Ok(()),
                other => Err(format!("validator says the signing certificate is {other}")),
            },
            ServerMessage::Error { info, .. } => {
                Err(format!("validator error {}: {}", info.code, info.message))
            }
        }
    }
}

/// Local re-checks of whatever evidence came back.
fn check_evidence(target: &Certificate, r: &TargetResult) -> Result<(), String> {
    if let Some(chain) = &r.chain {
        if chain.last() != Some(target) {
            return Err("returned chain does not end at the target".into());
        }
        // An invalid verdict for a broken link may return the broken chain, but only broken where it says.
        let excused = match r.status {
            VerdictStatus::Invalid {
                reason: FailureReason::BadSignature | FailureReason::NameChaining,
                failing_index,
            } => usize::try_from(failing_index).ok(),
            _ => None,
        };
        for (k, pair) in chain.windows(2).enumerate() {
            if Some(k) == excused {
                continue;
            }
            if pair[1].issuer() != pair[0].subject()
                || !pair[1]
                    .check_signature(pair[0].public_key())
                    .unwrap_or(false)
            {
                return Err(format!("returned chain breaks at {}", pair[1].subject()));
            }
        }
        for crl in r.crls.iter().flatten() {
            let ok = chain
                .iter()
                .filter(|c| c.subject() == crl.issuer())
                .any(|c| crl.check_signature(c.public_key()).unwrap_or(false));
            if !ok {
                return Err(format!(
                    "crl from {} does not verify under the chain",
                    crl.issuer()
                ));
            }
        }
    }
    for bytes in r.online_replies.iter().flatten() {
        StatusReply::from_der(bytes).map_err(|e| format!("online reply: {e}"))?;
    }
    if matches!(r.status, VerdictStatus::Valid) {
        if let Some(rev) = &r.revocation {
            if !matches!(rev.value, StatusValue::Good) {
                return Err("valid verdict with non-good revocation status".into());
            }
        }
    }
    Ok(())
}

fn store(
    dir: &Path,
    request: &[u8],
    response: &[u8],
    message: &ServerMessage,
) -> Result<(), ClientError> {
    let write = |name: String, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| ClientError::Store { path, source })
    };
    fs::create_dir_all(dir).map_err(|source| ClientError::Store {
        path: dir.to_owned(),
        source,
    })?;
    match message {
        ServerMessage::Dvc { info, .. } => {
            let stem = format!("dvc-{}", info.serial);
            write(format!("{stem}.request.der"), request)?;
            write(format!("{stem}.der"), response)?;
            for (i, r) in info.results.iter().enumerate() {
                for (j, crl) in r.crls.iter().flatten().enumerate() {
                    let der = crl
                        .to_der()
                        .map_err(|e| ClientError::Evidence(e.to_string()))?;
                    write(format!("{stem}.target{i}.crl{j}.crl"), &der)?;
                }
                for (j, reply) in r.online_replies.iter().flatten().enumerate() {
                    write(format!("{stem}.target{i}.reply{j}.der"), reply)?;
                }
            }
        }
        ServerMessage::Error { info, .. } => {
            let stem = format!(
                "error-{}",
                info.request_info
                    .as_ref()
                    .map(|i| i.nonce)
                    .unwrap_or_default()
            );
            write(format!("{stem}.request.der"), request)?;
            write(format!("{stem}.der"), response)?;
        }
    }
    Ok(())
}

impl Outcome {
    pub fn results(&self) -> &[TargetResult] {
        match &self.message {
            ServerMessage::Dvc { info, .. } => &info.results,
            ServerMessage::Error { .. } => &[],
        }
    }

    /// 0 when every target is valid, 2 when any is invalid, otherwise 3.
    pub fn exit_code(&self) -> i32 {
        let results = self.results();
        if results
            .iter()
            .any(|r| matches!(r.status, VerdictStatus::Invalid { .. }))
        {
            2
        } else if results.iter().all(|r| r.status.is_valid()) {
            0
        } else {
            3
        }
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let ServerMessage::Dvc { info, signature } = &self.message else {
            return out;
        };
        let signer = match signature {
            Some(s) => format!("signed by {}", name(s.signer.subject())),
            None => "UNSIGNED".to_owned(),
        };
        let _ = writeln!(
            out,
            "response {} produced {} {signer}",
            info.serial, info.produced_at
        );
        for (t, r) in self.targets.iter().zip(&info.results) {
            let _ = writeln!(out);
            let _ = writeln!(out, "{}: {}", sanitize(&t.label), headline(&r.status));
            let _ = writeln!(out, "  subject: {}", name(t.cert.subject()));
            let _ = writeln!(out, "  fingerprint: {}", r.target);
            let policies: Vec<String> = r
                .authorized_policies
                .iter()
                .map(ToString::to_string)
                .collect();
            let policies = if policies.is_empty() {
                "none".to_owned()
            } else {
                policies.join(", ")
            };
            let _ = writeln!(out, "  authorized policies: {policies}");
            let mappings: Vec<String> = r
                .mappings_applied
                .iter()
                .map(|m| format!("{} -> {}", m.issuer_domain, m.subject_domain))
                .collect();
            let mappings = if mappings.is_empty() {
                "none".to_owned()
            } else {
                mappings.join(", ")
            };
            let _ = writeln!(out, "  mappings applied: {mappings}");
            match &r.chain {
                Some(chain) => {
                    let names: Vec<String> = chain.iter().map(|c| name(c.subject())).collect();
                    let _ = writeln!(out, "  chain: {}", names.join(" > "));
                }
                None => {
                    let _ = writeln!(out, "  chain: not returned");
                }
            }
            if let Some(t) = r.validation_time {
                let _ = writeln!(out, "  validation time: {t}");
            }
            if let Some(rev) = &r.revocation {
                match &rev.value {
                    StatusValue::Revoked { date, reason } => {
                        let _ = writeln!(
                            out,
                            "  revoked: certificate {} on {date}, reason {reason}",
                            rev.index
                        );
                        render_crl_entries(&mut out, &t.cert, r, rev.index, *date);
                    }
                    StatusValue::Undetermined(cause) => {
                        let _ = writeln!(
                            out,
                            "  revocation status undetermined: {}",
                            sanitize(&cause.to_string())
                        );
                    }
                    StatusValue::Good => {}
                }
            }
        }
        out
    }
}

fn headline(status: &VerdictStatus) -> String {
    match status {
        VerdictStatus::Valid => "VALID".to_owned(),
        VerdictStatus::Invalid {
            reason,
            failing_index: -1,
        } => format!("INVALID {reason} (whole path)"),
        VerdictStatus::Invalid {
            reason,
            failing_index,
        } => format!("INVALID {reason} (certificate {failing_index})"),
        VerdictStatus::Unknown => "UNKNOWN no path to a trust anchor".to_owned(),
    }
}

fn name(n: &Name) -> String {
    sanitize(&n.to_string())
}

/// The CRL entry behind a revoked verdict, as the CRL states it. The revoked
/// certificate is taken from the returned chain; without one, the target's own
/// entry is used if present, otherwise entries are matched by date.
fn render_crl_entries(
    out: &mut String,
    target: &Certificate,
    r: &TargetResult,
    index: u64,
    date: GeneralizedTime,
) {
    let listed = |c: &Certificate| {
        r.crls.iter().flatten().any(|crl| {
            crl.issuer() == c.issuer() && crl.entry(c.serial()).is_some_and(|e| e.date == date)
        })
    };
    let revoked = match &r.chain {
        Some(chain) => chain.get(index as usize + 1),
        None => Some(target).filter(|t| listed(t)),
    };
    for crl in r.crls.iter().flatten() {
        let entries = crl.tbs.revoked.iter().filter(|e| match revoked {
            Some(c) => crl.issuer() == c.issuer() && e.serial == c.serial(),
            None => e.date == date,
        });
        for e in entries {
            let _ = writeln!(
                out,
                "  crl {} (this update {}, next update {})",
                name(crl.issuer()),
                crl.tbs.this_update,
                crl.tbs.next_update
            );
            let _ = writeln!(
                out,
                "    serial {}  revocation date {}  reason {}",
                e.serial, e.date, e.reason
            );
        }
    }
}
