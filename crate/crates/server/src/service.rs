//! Request admission and per-target processing. Transport-independent: the
//! HTTP layer hands over request bytes and sends back whatever comes out.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use certval_core::crypto::{generate, AlgorithmId, KeyPair};
use certval_core::csm::{CrlResponder, OnlineResponder, StatusSources, StatusTransport};
use certval_core::pcm::{supplied_chain, CertGraph};
use certval_core::ppm::{effective_requirement, CprMode, PpmError};
use certval_core::pvm::{validate_path, validate_target, ValidationInputs, Verdict};
use certval_core::vpm::{
    build_error, build_response, parse_request, self_signed_signer, DvcInfo, ErrorCode, ErrorInfo,
    RequestInformation, TargetResult, ValidationRequest, VpmError, PROTOCOL_VERSION, SERVICE_VPKC,
    STATUS_CONTENT_TYPE,
};
use certval_core::x509::parse_certificate;
use certval_core::{Certificate, Fingerprint, GeneralizedTime, Name};

use crate::config::{AnchorSelection, Clock, Settings, ValidationPolicy};
use crate::repo::{RepoError, Repository, Snapshot};
use crate::serial::{SerialCounter, SerialError};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Serial(#[from] SerialError),
    #[error("{path}: {message}")]
    Identity { path: String, message: String },
    #[error("{0}")]
    Config(String),
}

/// The server's signing certificate and key.
#[derive(Debug, Clone)]
pub struct Identity {
    pub cert: Certificate,
    pub key: KeyPair,
}

impl Identity {
    /// Self-signed signing certificate valid for ten years from `now`.
    pub fn self_signed(name: &Name, key: KeyPair, now: GeneralizedTime) -> Self {
        Self {
            cert: self_signed_signer(name, &key, now),
            key,
        }
    }

    /// Loads the key and certificate, creating whichever file is missing.
    /// Without paths the identity is ephemeral.
    pub fn load_or_create(
        cert_path: Option<&Path>,
        key_path: Option<&Path>,
        name: &Name,
        now: GeneralizedTime,
    ) -> Result<Self, ServerError> {
        let err = |p: &Path, m: String| ServerError::Identity {
            path: p.display().to_string(),
            message: m,
        };
        let key = match key_path {
            Some(p) if p.exists() => {
                let bytes = fs::read(p).map_err(|e| err(p, e.to_string()))?;
                KeyPair::from_key_file(&bytes).map_err(|e| err(p, e.to_string()))?
            }
            Some(p) => {
                let key =
                    generate(&AlgorithmId::ed25519(), None).map_err(|e| err(p, e.to_string()))?;
                fs::write(p, key.to_key_file()).map_err(|e| err(p, e.to_string()))?;
                key
            }
            None => generate(&AlgorithmId::ed25519(), None)
                .map_err(|e| ServerError::Config(e.to_string()))?,
        };
        match cert_path {
            Some(p) if p.exists() => {
                let bytes = fs::read(p).map_err(|e| err(p, e.to_string()))?;
                let cert = parse_certificate(&bytes).map_err(|e| err(p, e.to_string()))?;
                if cert.public_key().key != key.public_key {
                    return Err(err(p, "certificate does not match the signing key".into()));
                }
                Ok(Self { cert, key })
            }
            Some(p) => {
                let id = Self::self_signed(name, key, now);
                fs::write(p, id.cert.to_der().expect("own certificate encodes"))
                    .map_err(|e| err(p, e.to_string()))?;
                Ok(id)
            }
            None => Ok(Self::self_signed(name, key, now)),
        }
    }
}

/// The built-in online status responder, answering from the repository CRLs.
pub struct BuiltinResponder {
    repo: Arc<Repository>,
    key: KeyPair,
    clock: Clock,
}

impl BuiltinResponder {
    pub fn respond(&self, query: &[u8]) -> Result<Vec<u8>, String> {
        let responder =
            CrlResponder::new(self.key.clone(), self.repo.snapshot().crls.iter().cloned());
        responder
            .respond(query, self.clock.now())
            .map_err(|e| e.to_string())
    }
}

impl StatusTransport for BuiltinResponder {
    fn exchange(&self, query: &[u8]) -> Result<Vec<u8>, String> {
        self.respond(query)
    }
}

/// Online status over HTTP (`POST <url>`).
pub struct HttpStatusTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpStatusTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            agent,
        }
    }
}

impl StatusTransport for HttpStatusTransport {
    fn exchange(&self, query: &[u8]) -> Result<Vec<u8>, String> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", STATUS_CONTENT_TYPE)
            .send(query)
            .map_err(|e| e.to_string())?;
        resp.body_mut().read_to_vec().map_err(|e| e.to_string())
    }
}

/// Why a request was turned away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub code: ErrorCode,
    pub message: String,
}

fn reject(code: ErrorCode, message: impl Into<String>) -> Rejection {
    Rejection {
        code,
        message: message.into(),
    }
}

fn malformed(e: impl ToString) -> Rejection {
    reject(ErrorCode::MalformedRequest, e.to_string())
}

/// What happened to one request, for the transaction log.
#[derive(Debug, Clone, Default)]
pub struct Transaction {
    pub nonce: Option<u64>,
    pub targets: usize,
    pub verdicts: Vec<String>,
    pub serial: Option<u64>,
    pub error: Option<ErrorCode>,
}

pub struct Outcome {
    pub body: Vec<u8>,
    pub log: Transaction,
}

pub struct Service {
    settings: Settings,
    identity: Identity,
    repo: Arc<Repository>,
    serials: SerialCounter,
    responder: Arc<BuiltinResponder>,
    online: OnlineResponder,
}

impl Service {
    pub fn new(settings: Settings) -> Result<Self, ServerError> {
        let now = settings.clock.now();
        let identity = Identity::load_or_create(
            settings.cert.as_deref(),
            settings.key.as_deref(),
            &settings.name,
            now,
        )?;
        Self::with_identity(settings, identity)
    }

    pub fn with_identity(settings: Settings, identity: Identity) -> Result<Self, ServerError> {
        let repo = Arc::new(Repository::open(&settings.repository)?);
        check_anchor_labels(&settings, &repo.snapshot())?;
        let serials = match &settings.serial_file {
            Some(p) => SerialCounter::open(p)?,
            None => SerialCounter::in_memory(),
        };
        let responder = Arc::new(BuiltinResponder {
            repo: repo.clone(),
            key: identity.key.clone(),
            clock: settings.clock,
        });
        let online = match &settings.online {
            Some(o) => {
                let p = &o.responder_cert;
                let bytes = fs::read(p).map_err(|e| ServerError::Identity {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                let cert = parse_certificate(&bytes).map_err(|e| ServerError::Identity {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                OnlineResponder {
                    transport: Arc::new(HttpStatusTransport::new(
                        &o.url,
                        Duration::from_millis(o.timeout_ms),
                    )),
                    key: cert.public_key().clone(),
                }
            }
            None => OnlineResponder {
                transport: responder.clone(),
                key: identity.cert.public_key().clone(),
            },
        };
        Ok(Self {
            settings,
            identity,
            repo,
            serials,
            responder,
            online,
        })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn signing_certificate(&self) -> &Certificate {
        &self.identity.cert
    }

    pub fn repository(&self) -> &Repository {
        &self.repo
    }

    /// Reloads the repository; requests in flight keep the snapshot they started with.
    pub fn reload(&self) -> Result<(), ServerError> {
        let snap = self.repo.reload()?;
        check_anchor_labels(&self.settings, &snap)?;
        Ok(())
    }

    /// Answers an online status query from the repository CRLs.
    pub fn handle_status(&self, query: &[u8]) -> Result<Vec<u8>, String> {
        self.responder.respond(query)
    }

    /// Processes one DVCS request. Always yields a response body: failures
    /// become signed error notices.
    pub fn handle_dvcs(&self, body: &[u8]) -> Outcome {
        let now = self.settings.clock.now();
        match catch_unwind(AssertUnwindSafe(|| self.process(body, now))) {
            Ok(outcome) => outcome,
            Err(_) => self.error(
                None,
                reject(ErrorCode::InternalError, "internal error"),
                now,
                Transaction::default(),
            ),
        }
    }

    fn process(&self, body: &[u8], now: GeneralizedTime) -> Outcome {
        let req = match parse_request(body) {
            Ok(r) => r,
            Err(e) => return self.error(None, malformed(e), now, Transaction::default()),
        };
        let mut log = Transaction {
            nonce: Some(req.info.nonce),
            targets: req.targets.len(),
            ..Transaction::default()
        };
        let policy = match self.admit(&req, now) {
            Ok(p) => p,
            Err(r) => return self.error(Some(req.info), r, now, log),
        };
        let results = match self.validate(&req, policy, now) {
            Ok(r) => r,
            Err(r) => return self.error(Some(req.info), r, now, log),
        };
        log.verdicts = results.iter().map(|r| r.status.to_string()).collect();
        let serial = match self.serials.next() {
            Ok(s) => s,
            Err(e) => {
                return self.error(
                    Some(req.info),
                    reject(ErrorCode::InternalError, e.to_string()),
                    now,
                    log,
                )
            }
        };
        log.serial = Some(serial);
        let info = DvcInfo {
            version: PROTOCOL_VERSION,
            serial,
            produced_at: now,
            request_info: req.info.clone(),
            results,
        };
        match build_response(info, Some((&self.identity.cert, &self.identity.key))) {
            Ok(body) => Outcome { body, log },
            Err(e) => self.error(
                Some(req.info),
                reject(ErrorCode::InternalError, e.to_string()),
                now,
                log,
            ),
        }
    }

    fn error(
        &self,
        echo: Option<RequestInformation>,
        r: Rejection,
        now: GeneralizedTime,
        mut log: Transaction,
    ) -> Outcome {
        log.error = Some(r.code);
        let info = ErrorInfo {
            request_info: echo,
            code: r.code,
            message: r.message,
            produced_at: now,
        };
        let body = build_error(info, Some((&self.identity.cert, &self.identity.key)))
            .expect("error notices encode");
        Outcome { body, log }
    }

    /// Request-level checks, in order: time, server name, service, request
    /// policy, then well-formedness. Returns the selected validation policy.
    pub fn admit(
        &self,
        req: &ValidationRequest,
        now: GeneralizedTime,
    ) -> Result<&ValidationPolicy, Rejection> {
        let info = &req.info;
        let selected = match &info.request_policy {
            Some(oid) => self.settings.policy(oid),
            None => Some(self.settings.default_policy()),
        };
        let skew = selected
            .unwrap_or(self.settings.default_policy())
            .clock_skew;
        let drift = (info.request_time.unix() - now.unix()).abs();
        if drift > skew {
            return Err(reject(
                ErrorCode::BadTime,
                format!("request time is {drift} s from server time (allowed {skew} s)"),
            ));
        }
        if let Some(name) = &info.dvcs_name {
            if name != &self.settings.name {
                return Err(reject(
                    ErrorCode::WrongServer,
                    format!("request is addressed to {name}"),
                ));
            }
        }
        if info.service != SERVICE_VPKC {
            return Err(reject(
                ErrorCode::UnsupportedService,
                format!("service {} is not supported", info.service),
            ));
        }
        let Some(policy) = selected else {
            let oid = info
                .request_policy
                .as_ref()
                .expect("unselected only when named");
            return Err(reject(
                ErrorCode::UnknownRequestPolicy,
                format!("no validation policy {oid}"),
            ));
        };
        if info.version != PROTOCOL_VERSION {
            return Err(malformed(format!(
                "unsupported protocol version {}",
                info.version
            )));
        }
        if let Some(oid) = info.unknown_critical().first() {
            return Err(malformed(format!("unsupported critical extension {oid}")));
        }
        req.requirement().map_err(malformed)?;
        info.want_backs().map_err(malformed)?;
        info.validation_time_override().map_err(malformed)?;
        info.supplied_chains().map_err(malformed)?;
        match req.signature_ok() {
            Some(false) => return Err(malformed(VpmError::BadRequestSignature)),
            None if policy.require_signed_requests => {
                return Err(malformed("this policy requires signed requests"))
            }
            _ => {}
        }
        Ok(policy)
    }

    /// Validates every target in request order.
    pub fn validate(
        &self,
        req: &ValidationRequest,
        policy: &ValidationPolicy,
        now: GeneralizedTime,
    ) -> Result<Vec<TargetResult>, Rejection> {
        let requirement = req.requirement().map_err(malformed)?;
        let cpr = effective_requirement(&requirement, &policy.usages).map_err(|e| match e {
            PpmError::UnknownUsage(u) => reject(
                ErrorCode::UnknownUsage,
                format!("intended usage {u:?} is not configured"),
            ),
            other => malformed(other),
        })?;
        let usage = match requirement.mode {
            CprMode::Weak => requirement.intended_usage.clone(),
            CprMode::Strict => None,
        };
        let snapshot = self.repo.snapshot();
        let graph =
            snapshot
                .graph
                .with_anchors(&policy_anchors(policy, &snapshot, usage.as_deref()));
        let at = req
            .info
            .validation_time_override()
            .map_err(malformed)?
            .unwrap_or(now);
        let want = req
            .info
            .want_backs()
            .map_err(malformed)?
            .unwrap_or(policy.default_want_backs);
        let supplied = if policy.allow_supplied_chains {
            req.info.supplied_chains().map_err(malformed)?
        } else {
            Vec::new()
        };
        let status = StatusSources {
            regime: policy.revocation,
            crls: &snapshot.crls,
            online: Some(&self.online),
        };
        let inputs = ValidationInputs {
            at,
            cpr: &cpr,
            status: &status,
        };

        Ok(req
            .targets
            .iter()
            .map(|target| {
                let verdict =
                    validate_one(&graph, &supplied, target, policy.max_chain_length, &inputs);
                TargetResult::from_verdict(target.fingerprint(), &verdict, want)
            })
            .collect())
    }
}

/// Supplied chain first; when it is unusable or invalid, discovery over the
/// repository plus the supplied certificates.
fn validate_one(
    graph: &CertGraph,
    supplied: &[Certificate],
    target: &Certificate,
    max_length: usize,
    inputs: &ValidationInputs,
) -> Verdict {
    if supplied.is_empty() {
        return validate_target(graph, target, max_length, inputs);
    }
    if let Ok(chain) = supplied_chain(graph, supplied, target, max_length) {
        let verdict = validate_path(&chain, inputs);
        if verdict.status.is_valid() {
            return verdict;
        }
    }
    validate_target(&graph.with_extra(supplied), target, max_length, inputs)
}

/// Anchors of the policy that are trusted for `usage` (all of them for strict requirements).
fn policy_anchors(
    policy: &ValidationPolicy,
    snap: &Snapshot,
    usage: Option<&str>,
) -> BTreeSet<Fingerprint> {
    snap.anchors
        .iter()
        .filter(|a| match &policy.anchors {
            AnchorSelection::All => true,
            AnchorSelection::Labels(l) => l.contains(&a.label),
        })
        .filter(|a| usage.is_none_or(|u| a.trusts(u)))
        .map(|a| a.fingerprint)
        .collect()
}

fn check_anchor_labels(settings: &Settings, snap: &Snapshot) -> Result<(), ServerError> {
    for p in &settings.policies {
        if let AnchorSelection::Labels(labels) = &p.anchors {
            for l in labels {
                if !snap.anchors.iter().any(|a| &a.label == l) {
                    return Err(ServerError::Config(format!(
                        "policy {}: anchor {l:?} is not in anchors.txt",
                        p.oid
                    )));
                }
            }
        }
    }
    Ok(())
}
