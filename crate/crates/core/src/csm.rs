//! Certificate status: CRL checking and the online status protocol (client,
//! wire format and a CRL-backed responder).
//!
//! Wire format of the online protocol:
//!
//! ```text
//! StatusQuery ::= SEQUENCE { issuerNameDigest OCTET STRING, serial INTEGER, nonce INTEGER }
//! StatusReply ::= SEQUENCE { query StatusQuery, status SingleStatus, producedAt GeneralizedTime,
//!                            signatureAlgorithm SEQUENCE { OID }, signature BIT STRING }
//! SingleStatus ::= SEQUENCE { code INTEGER (0 good, 1 revoked, 2 unknown),
//!                             [0] EXPLICIT GeneralizedTime thisUpdate OPTIONAL,
//!                             [1] EXPLICIT GeneralizedTime nextUpdate OPTIONAL,
//!                             [2] EXPLICIT GeneralizedTime revocationDate OPTIONAL,
//!                             [3] EXPLICIT INTEGER reason OPTIONAL }
//! ```
//!
//! The signature covers the DER of `SEQUENCE { query, status, producedAt, signatureAlgorithm }`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::crypto::{self, AlgorithmId, KeyPair};
use crate::der::{self, mismatch, BitString, DerValue, Fields, Mismatch};
use crate::time::GeneralizedTime;
use crate::x509::{Certificate, Crl, ReasonCode, SubjectPublicKey};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CsmError {
    #[error("CRL issuer does not match certificate issuer")]
    IssuerMismatch,
    #[error("status transport failed: {0}")]
    Transport(String),
    #[error("status reply signature does not verify")]
    BadResponderSignature,
    #[error("status reply nonce does not match the query")]
    NonceMismatch,
    #[error("status reply does not echo the query")]
    EchoMismatch,
    #[error("malformed status message: {0}")]
    Malformed(String),
}

impl From<Mismatch> for CsmError {
    fn from(e: Mismatch) -> Self {
        CsmError::Malformed(e.0)
    }
}

impl From<der::DerError> for CsmError {
    fn from(e: der::DerError) -> Self {
        CsmError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UndeterminedCause {
    /// Validation time is after the CRL's nextUpdate.
    StaleCrl,
    /// Validation time is before the CRL's thisUpdate.
    CrlNotYetValid,
    /// No CRL with a valid signature from the issuer is available.
    NoCrl,
    /// The responder does not know the certificate.
    UnknownToResponder,
    /// The online check failed (transport, signature, nonce).
    Responder(String),
    /// Online checking was requested but no responder is configured.
    NoResponder,
}

impl fmt::Display for UndeterminedCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UndeterminedCause::StaleCrl => f.write_str("staleCrl"),
            UndeterminedCause::CrlNotYetValid => f.write_str("crlNotYetValid"),
            UndeterminedCause::NoCrl => f.write_str("noCrl"),
            UndeterminedCause::UnknownToResponder => f.write_str("unknownToResponder"),
            UndeterminedCause::Responder(e) => write!(f, "responder: {e}"),
            UndeterminedCause::NoResponder => f.write_str("noResponder"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatusValue {
    Good,
    Revoked {
        date: GeneralizedTime,
        reason: ReasonCode,
    },
    Undetermined(UndeterminedCause),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusSource {
    Crl,
    Online,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evidence {
    Crl(Arc<Crl>),
    /// DER of the signed status reply.
    Online(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertStatus {
    pub value: StatusValue,
    pub source: StatusSource,
    pub evidence: Option<Evidence>,
}

impl CertStatus {
    fn undetermined(source: StatusSource, cause: UndeterminedCause) -> Self {
        Self {
            value: StatusValue::Undetermined(cause),
            source,
            evidence: None,
        }
    }
}

/// Classifies a revocation entry and freshness window against the validation time.
fn classify(
    entry: Option<(GeneralizedTime, ReasonCode)>,
    this_update: GeneralizedTime,
    next_update: GeneralizedTime,
    at: GeneralizedTime,
) -> StatusValue {
    match entry {
        Some((date, reason)) if date <= at => StatusValue::Revoked { date, reason },
        _ if at > next_update => StatusValue::Undetermined(UndeterminedCause::StaleCrl),
        _ if at < this_update => StatusValue::Undetermined(UndeterminedCause::CrlNotYetValid),
        _ => StatusValue::Good,
    }
}

/// Status of `cert` according to `crl`. The caller has already verified the
/// CRL signature against the issuing CA's key.
pub fn check_crl(
    cert: &Certificate,
    crl: &Arc<Crl>,
    at: GeneralizedTime,
) -> Result<CertStatus, CsmError> {
    if crl.issuer() != cert.issuer() {
        return Err(CsmError::IssuerMismatch);
    }
    let entry = crl.entry(cert.serial()).map(|e| (e.date, e.reason));
    let value = classify(entry, crl.tbs.this_update, crl.tbs.next_update, at);
    let evidence = match value {
        StatusValue::Undetermined(_) => None,
        _ => Some(Evidence::Crl(crl.clone())),
    };
    Ok(CertStatus {
        value,
        source: StatusSource::Crl,
        evidence,
    })
}

/// Picks the most recent CRL from `cert`'s issuer whose signature verifies
/// under `issuer_key`.
pub fn select_crl<'a>(
    crls: impl IntoIterator<Item = &'a Arc<Crl>>,
    cert: &Certificate,
    issuer_key: &SubjectPublicKey,
) -> Option<Arc<Crl>> {
    crls.into_iter()
        .filter(|c| c.issuer() == cert.issuer())
        .filter(|c| c.check_signature(issuer_key).unwrap_or(false))
        .max_by_key(|c| c.tbs.this_update)
        .cloned()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusQuery {
    pub issuer_name_digest: [u8; 32],
    pub serial: u64,
    pub nonce: u64,
}

impl StatusQuery {
    pub fn for_cert(cert: &Certificate, nonce: u64) -> Self {
        Self {
            issuer_name_digest: crypto::sha256(&cert.issuer().to_der_bytes()),
            serial: cert.serial(),
            nonce,
        }
    }

    pub fn to_der_value(&self) -> DerValue {
        DerValue::Sequence(vec![
            DerValue::OctetString(self.issuer_name_digest.to_vec()),
            DerValue::uint(self.serial),
            DerValue::uint(self.nonce),
        ])
    }

    pub fn to_der(&self) -> Vec<u8> {
        der::encode(&self.to_der_value()).expect("status query always encodes")
    }

    pub fn from_der_value(value: &DerValue) -> Result<Self, CsmError> {
        let mut f = Fields::of(value, "StatusQuery")?;
        let digest = f.octets("issuerNameDigest")?;
        let issuer_name_digest: [u8; 32] = digest
            .try_into()
            .map_err(|_| mismatch("issuerNameDigest must be 32 octets"))?;
        let serial = f.u64("serial")?;
        let nonce = f.u64("nonce")?;
        f.finish()?;
        Ok(Self {
            issuer_name_digest,
            serial,
            nonce,
        })
    }

    pub fn from_der(bytes: &[u8]) -> Result<Self, CsmError> {
        Self::from_der_value(&der::decode_all(bytes)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplyStatus {
    Good {
        this_update: GeneralizedTime,
        next_update: GeneralizedTime,
    },
    Revoked {
        this_update: GeneralizedTime,
        next_update: GeneralizedTime,
        date: GeneralizedTime,
        reason: ReasonCode,
    },
    Unknown,
}

impl ReplyStatus {
    fn to_der_value(&self) -> DerValue {
        let t = |n, v: GeneralizedTime| DerValue::explicit(n, DerValue::GeneralizedTime(v));
        DerValue::Sequence(match *self {
            ReplyStatus::Good {
                this_update,
                next_update,
            } => {
                vec![DerValue::int(0), t(0, this_update), t(1, next_update)]
            }
            ReplyStatus::Revoked {
                this_update,
                next_update,
                date,
                reason,
            } => vec![
                DerValue::int(1),
                t(0, this_update),
                t(1, next_update),
                t(2, date),
                DerValue::explicit(3, DerValue::int(reason.code())),
            ],
            ReplyStatus::Unknown => vec![DerValue::int(2)],
        })
    }

    fn from_der_value(value: &DerValue) -> Result<Self, CsmError> {
        let mut f = Fields::of(value, "SingleStatus")?;
        let code = f.i64("code")?;
        let time = |v: Option<&DerValue>, what: &str| -> Result<GeneralizedTime, CsmError> {
            v.and_then(DerValue::as_time)
                .ok_or_else(|| CsmError::Malformed(format!("SingleStatus: missing {what}")))
        };
        let status = match code {
            0 => ReplyStatus::Good {
                this_update: time(f.explicit(0), "thisUpdate")?,
                next_update: time(f.explicit(1), "nextUpdate")?,
            },
            1 => {
                let this_update = time(f.explicit(0), "thisUpdate")?;
                let next_update = time(f.explicit(1), "nextUpdate")?;
                let date = time(f.explicit(2), "revocationDate")?;
                let reason = f
                    .explicit(3)
                    .and_then(DerValue::as_i64)
                    .and_then(ReasonCode::from_code)
                    .ok_or_else(|| {
                        CsmError::Malformed("SingleStatus: missing or unknown reason".into())
                    })?;
                ReplyStatus::Revoked {
                    this_update,
                    next_update,
                    date,
                    reason,
                }
            }
            2 => ReplyStatus::Unknown,
            other => return Err(CsmError::Malformed(format!("unknown status code {other}"))),
        };
        f.finish()?;
        Ok(status)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusReply {
    pub query: StatusQuery,
    pub status: ReplyStatus,
    pub produced_at: GeneralizedTime,
    pub signature_alg: AlgorithmId,
    pub signature: Vec<u8>,
}

impl StatusReply {
    fn signed_part(
        query: &StatusQuery,
        status: &ReplyStatus,
        produced_at: GeneralizedTime,
        alg: &AlgorithmId,
    ) -> Vec<u8> {
        der::encode(&DerValue::Sequence(vec![
            query.to_der_value(),
            status.to_der_value(),
            DerValue::GeneralizedTime(produced_at),
            alg.to_der(),
        ]))
        .expect("status reply always encodes")
    }

    pub fn sign(
        query: StatusQuery,
        status: ReplyStatus,
        produced_at: GeneralizedTime,
        key: &KeyPair,
    ) -> Result<Self, CsmError> {
        let tbs = Self::signed_part(&query, &status, produced_at, &key.algorithm);
        let signature = crypto::sign(key, &tbs).map_err(|e| CsmError::Malformed(e.to_string()))?;
        Ok(Self {
            query,
            status,
            produced_at,
            signature_alg: key.algorithm.clone(),
            signature,
        })
    }

    pub fn to_der(&self) -> Vec<u8> {
        der::encode(&DerValue::Sequence(vec![
            self.query.to_der_value(),
            self.status.to_der_value(),
            DerValue::GeneralizedTime(self.produced_at),
            self.signature_alg.to_der(),
            DerValue::BitString(BitString::from_bytes(self.signature.clone())),
        ]))
        .expect("status reply always encodes")
    }

    pub fn from_der(bytes: &[u8]) -> Result<Self, CsmError> {
        let value = der::decode_all(bytes)?;
        let mut f = Fields::of(&value, "StatusReply")?;
        let query = StatusQuery::from_der_value(f.next("query")?)?;
        let status = ReplyStatus::from_der_value(f.next("status")?)?;
        let produced_at = f.time("producedAt")?;
        let alg_oid = AlgorithmId::parse_oid(f.next("signatureAlgorithm")?)?;
        let signature_alg =
            AlgorithmId::resolve(&alg_oid).map_err(|e| CsmError::Malformed(e.to_string()))?;
        let sig = f
            .next("signature")?
            .as_bit_string()
            .filter(|b| b.unused_bits == 0)
            .ok_or_else(|| mismatch("StatusReply: signature must be a whole-octet BIT STRING"))?;
        f.finish()?;
        Ok(Self {
            query,
            status,
            produced_at,
            signature_alg,
            signature: sig.bytes.clone(),
        })
    }

    pub fn verify_signature(&self, responder_key: &SubjectPublicKey) -> bool {
        if responder_key.algorithm != self.signature_alg.oid {
            return false;
        }
        let tbs = Self::signed_part(
            &self.query,
            &self.status,
            self.produced_at,
            &self.signature_alg,
        );
        crypto::verify(
            &responder_key.key,
            &self.signature_alg,
            &tbs,
            &self.signature,
        )
        .unwrap_or(false)
    }

    /// Status value at validation time `at`, using the same rules as a CRL check.
    pub fn value_at(&self, at: GeneralizedTime) -> StatusValue {
        match self.status {
            ReplyStatus::Good {
                this_update,
                next_update,
            } => classify(None, this_update, next_update, at),
            ReplyStatus::Revoked {
                this_update,
                next_update,
                date,
                reason,
            } => classify(Some((date, reason)), this_update, next_update, at),
            ReplyStatus::Unknown => {
                StatusValue::Undetermined(UndeterminedCause::UnknownToResponder)
            }
        }
    }
}

/// Carries a DER status query to a responder and returns the DER reply.
pub trait StatusTransport: Send + Sync {
    fn exchange(&self, query: &[u8]) -> Result<Vec<u8>, String>;
}

/// Queries a responder for `cert` and checks the reply's signature, echo and nonce.
pub fn check_online(
    cert: &Certificate,
    transport: &dyn StatusTransport,
    responder_key: &SubjectPublicKey,
    nonce: u64,
    at: GeneralizedTime,
) -> Result<CertStatus, CsmError> {
    let query = StatusQuery::for_cert(cert, nonce);
    let reply_der = transport
        .exchange(&query.to_der())
        .map_err(CsmError::Transport)?;
    let reply = StatusReply::from_der(&reply_der)?;
    if !reply.verify_signature(responder_key) {
        return Err(CsmError::BadResponderSignature);
    }
    if reply.query.nonce != query.nonce {
        return Err(CsmError::NonceMismatch);
    }
    if reply.query.to_der() != query.to_der() {
        return Err(CsmError::EchoMismatch);
    }
    let value = reply.value_at(at);
    let evidence = match value {
        StatusValue::Undetermined(_) => None,
        _ => Some(Evidence::Online(reply_der)),
    };
    Ok(CertStatus {
        value,
        source: StatusSource::Online,
        evidence,
    })
}

/// Answers status queries from a set of CRLs. Signature checks on the CRLs are
/// the loader's responsibility.
pub struct CrlResponder {
    key: KeyPair,
    crls: Vec<([u8; 32], Arc<Crl>)>,
}

impl CrlResponder {
    pub fn new(key: KeyPair, crls: impl IntoIterator<Item = Arc<Crl>>) -> Self {
        let crls = crls
            .into_iter()
            .map(|c| (crypto::sha256(&c.issuer().to_der_bytes()), c))
            .collect();
        Self { key, crls }
    }

    pub fn public_key(&self) -> SubjectPublicKey {
        SubjectPublicKey {
            algorithm: self.key.algorithm.oid.clone(),
            key: self.key.public_key.clone(),
        }
    }

    pub fn reply(
        &self,
        query: &StatusQuery,
        now: GeneralizedTime,
    ) -> Result<StatusReply, CsmError> {
        let crl = self
            .crls
            .iter()
            .filter(|(d, _)| *d == query.issuer_name_digest)
            .map(|(_, c)| c)
            .max_by_key(|c| c.tbs.this_update);
        let status = match crl {
            None => ReplyStatus::Unknown,
            Some(crl) => {
                let (this_update, next_update) = (crl.tbs.this_update, crl.tbs.next_update);
                match crl.entry(query.serial) {
                    Some(e) => ReplyStatus::Revoked {
                        this_update,
                        next_update,
                        date: e.date,
                        reason: e.reason,
                    },
                    None => ReplyStatus::Good {
                        this_update,
                        next_update,
                    },
                }
            }
        };
        StatusReply::sign(query.clone(), status, now, &self.key)
    }

    /// Handles a raw DER query.
    pub fn respond(&self, query: &[u8], now: GeneralizedTime) -> Result<Vec<u8>, CsmError> {
        Ok(self.reply(&StatusQuery::from_der(query)?, now)?.to_der())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RevocationRegime {
    #[default]
    Crl,
    Online,
    CrlThenOnline,
    None,
}

impl FromStr for RevocationRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "crl" => Ok(Self::Crl),
            "online" => Ok(Self::Online),
            "crl-then-online" => Ok(Self::CrlThenOnline),
            "none" => Ok(Self::None),
            other => Err(format!("unknown revocation regime {other:?}")),
        }
    }
}

impl fmt::Display for RevocationRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Crl => "crl",
            Self::Online => "online",
            Self::CrlThenOnline => "crl-then-online",
            Self::None => "none",
        })
    }
}

/// A configured online responder.
pub struct OnlineResponder {
    pub transport: Arc<dyn StatusTransport>,
    pub key: SubjectPublicKey,
}

/// Everything needed to determine revocation status during validation.
pub struct StatusSources<'a> {
    pub regime: RevocationRegime,
    pub crls: &'a [Arc<Crl>],
    pub online: Option<&'a OnlineResponder>,
}

impl StatusSources<'_> {
    /// Status of `cert` whose issuer key is `issuer_key`; `None` under the `none` regime.
    pub fn status(
        &self,
        cert: &Certificate,
        issuer_key: &SubjectPublicKey,
        at: GeneralizedTime,
    ) -> Option<CertStatus> {
        let by_crl = || match select_crl(self.crls, cert, issuer_key) {
            Some(crl) => {
                check_crl(cert, &crl, at).expect("selected CRL has the certificate's issuer")
            }
            None => CertStatus::undetermined(StatusSource::Crl, UndeterminedCause::NoCrl),
        };
        let by_online = || match self.online {
            None => CertStatus::undetermined(StatusSource::Online, UndeterminedCause::NoResponder),
            Some(r) => check_online(
                cert,
                r.transport.as_ref(),
                &r.key,
                rand::random::<u64>() >> 1,
                at,
            )
            .unwrap_or_else(|e| {
                CertStatus::undetermined(
                    StatusSource::Online,
                    UndeterminedCause::Responder(e.to_string()),
                )
            }),
        };
        match self.regime {
            RevocationRegime::None => None,
            RevocationRegime::Crl => Some(by_crl()),
            RevocationRegime::Online => Some(by_online()),
            RevocationRegime::CrlThenOnline => {
                let s = by_crl();
                Some(if matches!(s.value, StatusValue::Undetermined(_)) {
                    by_online()
                } else {
                    s
                })
            }
        }
    }
}
