//! Validation protocol messages: request, DVC response and error notice, their
//! signing envelope, verification on the client side, and text rendering.
//!
//! The byte-level grammar is documented in `docs/wire.md`.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::crypto::{self, AlgorithmId, KeyPair};
use crate::csm::{Evidence, StatusReply, StatusSource, StatusValue, UndeterminedCause};
use crate::der::{self, BitString, DerError, DerValue, Fields, Mismatch, Oid};
use crate::ppm::{CprMode, CprRequirement};
use crate::pvm::{FailureReason, Verdict, VerdictStatus};
use crate::time::GeneralizedTime;
use crate::x509::{Certificate, Crl, Fingerprint, Name, PolicyMapping, ReasonCode, X509Error};

pub const PROTOCOL_VERSION: u64 = 1;
/// Service number for certificate validation (validate public key certificate).
pub const SERVICE_VPKC: u64 = 3;

pub const DVCS_CONTENT_TYPE: &str = "application/savacert-dvcs";
pub const STATUS_CONTENT_TYPE: &str = "application/savacert-status";

pub mod ext_oids {
    use crate::der::Oid;

    fn arc(n: u64) -> Oid {
        Oid::from_arcs(&[1, 3, 6, 1, 4, 1, 57264, 2, n])
    }
    pub fn intended_usage() -> Oid {
        arc(1)
    }
    pub fn supplied_chains() -> Oid {
        arc(2)
    }
    pub fn want_backs() -> Oid {
        arc(3)
    }
    pub fn validation_time_override() -> Oid {
        arc(4)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VpmError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("response does not echo the request information")]
    EchoMismatch,
    #[error("response nonce does not match the request")]
    NonceMismatch,
    #[error("response signature does not verify")]
    BadServerSignature,
    #[error("server signing certificate rejected: {0}")]
    SignerRejected(String),
    #[error("unsigned response rejected")]
    UnsignedRejected,
    #[error("request signature does not verify")]
    BadRequestSignature,
}

impl From<DerError> for VpmError {
    fn from(e: DerError) -> Self {
        VpmError::Malformed(e.to_string())
    }
}

impl From<Mismatch> for VpmError {
    fn from(e: Mismatch) -> Self {
        VpmError::Malformed(e.0)
    }
}

impl From<X509Error> for VpmError {
    fn from(e: X509Error) -> Self {
        VpmError::Malformed(e.to_string())
    }
}

fn malformed(msg: impl Into<String>) -> VpmError {
    VpmError::Malformed(msg.into())
}

// ---------------------------------------------------------------------------
// Request information and extensions

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestExtension {
    pub oid: Oid,
    pub critical: bool,
    /// DER of the extension value.
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WantBacks(pub u16);

impl WantBacks {
    pub const CHAIN: u16 = 1 << 0;
    pub const CRLS: u16 = 1 << 1;
    pub const ONLINE_REPLIES: u16 = 1 << 2;
    pub const VALIDATION_TIME: u16 = 1 << 3;
    const NAMES: [(&'static str, u16); 4] = [
        ("chain", Self::CHAIN),
        ("crls", Self::CRLS),
        ("online-replies", Self::ONLINE_REPLIES),
        ("time", Self::VALIDATION_TIME),
    ];

    pub fn contains(self, bit: u16) -> bool {
        self.0 & bit != 0
    }

    /// Parses a comma-separated list such as `chain,crls,time`.
    pub fn parse_list(s: &str) -> Result<Self, String> {
        let mut bits = 0;
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let item = item.to_ascii_lowercase();
            let bit = match item.as_str() {
                "validation-time" => Self::VALIDATION_TIME,
                "online" | "onlinereplies" => Self::ONLINE_REPLIES,
                "none" => 0,
                _ => Self::NAMES
                    .iter()
                    .find(|(n, _)| *n == item)
                    .map(|(_, b)| *b)
                    .ok_or_else(|| format!("unknown want-back {item:?}"))?,
            };
            bits |= bit;
        }
        Ok(Self(bits))
    }
}

impl fmt::Display for WantBacks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Self::NAMES
            .iter()
            .filter(|(_, b)| self.contains(*b))
            .map(|(n, _)| *n)
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestInformation {
    pub version: u64,
    pub service: u64,
    pub nonce: u64,
    pub request_time: GeneralizedTime,
    pub requester: Option<Name>,
    pub request_policy: Option<Oid>,
    pub dvcs_name: Option<Name>,
    pub extensions: Vec<RequestExtension>,
}

impl RequestInformation {
    pub fn new(nonce: u64, request_time: GeneralizedTime) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            service: SERVICE_VPKC,
            nonce,
            request_time,
            requester: None,
            request_policy: None,
            dvcs_name: None,
            extensions: Vec::new(),
        }
    }

    pub fn to_der_value(&self) -> DerValue {
        let mut items = vec![
            DerValue::uint(self.version),
            DerValue::uint(self.service),
            DerValue::uint(self.nonce),
            DerValue::GeneralizedTime(self.request_time),
        ];
        if let Some(n) = &self.requester {
            items.push(DerValue::explicit(0, n.to_der()));
        }
        if let Some(p) = &self.request_policy {
            items.push(DerValue::explicit(1, DerValue::Oid(p.clone())));
        }
        if let Some(n) = &self.dvcs_name {
            items.push(DerValue::explicit(2, n.to_der()));
        }
        if !self.extensions.is_empty() {
            let exts = self
                .extensions
                .iter()
                .map(|e| {
                    let mut v = vec![DerValue::Oid(e.oid.clone())];
                    if e.critical {
                        v.push(DerValue::Boolean(true));
                    }
                    v.push(DerValue::OctetString(e.value.clone()));
                    DerValue::Sequence(v)
                })
                .collect();
            items.push(DerValue::explicit(3, DerValue::Sequence(exts)));
        }
        DerValue::Sequence(items)
    }

    pub fn to_der(&self) -> Vec<u8> {
        der::encode(&self.to_der_value()).expect("request information always encodes")
    }

    pub fn from_der_value(value: &DerValue) -> Result<Self, VpmError> {
        let mut f = Fields::of(value, "RequestInformation")?;
        let version = f.u64("version")?;
        let service = f.u64("service")?;
        let nonce = f.u64("nonce")?;
        let request_time = f.time("requestTime")?;
        let requester = f.explicit(0).map(Name::from_der).transpose()?;
        let request_policy = f
            .explicit(1)
            .map(|v| {
                v.as_oid()
                    .cloned()
                    .ok_or_else(|| malformed("requestPolicy must be an OID"))
            })
            .transpose()?;
        let dvcs_name = f.explicit(2).map(Name::from_der).transpose()?;
        let mut extensions = Vec::new();
        if let Some(exts) = f.explicit(3) {
            let items = exts
                .as_sequence()
                .ok_or_else(|| malformed("extensions must be a SEQUENCE"))?;
            if items.is_empty() {
                return Err(malformed("empty extensions must be omitted"));
            }
            for item in items {
                let mut e = Fields::of(item, "Extension")?;
                let oid = e.oid("extnID")?.clone();
                let critical = e.default_false("critical")?;
                let value = e.octets("extnValue")?.to_vec();
                e.finish()?;
                if extensions.iter().any(|x: &RequestExtension| x.oid == oid) {
                    return Err(malformed(format!("duplicate extension {oid}")));
                }
                extensions.push(RequestExtension {
                    oid,
                    critical,
                    value,
                });
            }
        }
        f.finish()?;
        Ok(Self {
            version,
            service,
            nonce,
            request_time,
            requester,
            request_policy,
            dvcs_name,
            extensions,
        })
    }

    pub fn from_der(bytes: &[u8]) -> Result<Self, VpmError> {
        Self::from_der_value(&der::decode_all(bytes)?)
    }

    fn extension(&self, oid: &Oid) -> Option<&RequestExtension> {
        self.extensions.iter().find(|e| &e.oid == oid)
    }

    fn extension_value(&self, oid: &Oid) -> Result<Option<DerValue>, VpmError> {
        self.extension(oid)
            .map(|e| der::decode_all(&e.value).map_err(VpmError::from))
            .transpose()
    }

    pub fn set_extension(&mut self, oid: Oid, critical: bool, value: &DerValue) {
        self.extensions.retain(|e| e.oid != oid);
        let value = der::encode(value).expect("extension value encodes");
        self.extensions.push(RequestExtension {
            oid,
            critical,
            value,
        });
    }

    pub fn intended_usage(&self) -> Result<Option<String>, VpmError> {
        self.extension_value(&ext_oids::intended_usage())?
            .map(|v| {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| malformed("intendedUsage must be a UTF8String"))
            })
            .transpose()
    }

    pub fn supplied_chains(&self) -> Result<Vec<Certificate>, VpmError> {
        match self.extension_value(&ext_oids::supplied_chains())? {
            None => Ok(Vec::new()),
            Some(v) => v
                .as_sequence()
                .ok_or_else(|| malformed("suppliedChains must be a SEQUENCE OF Certificate"))?
                .iter()
                .map(|c| Certificate::from_der_value(c).map_err(VpmError::from))
                .collect(),
        }
    }

    pub fn want_backs(&self) -> Result<Option<WantBacks>, VpmError> {
        self.extension_value(&ext_oids::want_backs())?
            .map(|v| {
                v.as_bit_string()
                    .map(|b| WantBacks(b.to_flags()))
                    .ok_or_else(|| malformed("wantBacks must be a BIT STRING"))
            })
            .transpose()
    }

    pub fn validation_time_override(&self) -> Result<Option<GeneralizedTime>, VpmError> {
        self.extension_value(&ext_oids::validation_time_override())?
            .map(|v| {
                v.as_time()
                    .ok_or_else(|| malformed("validationTimeOverride must be GeneralizedTime"))
            })
            .transpose()
    }

    /// Critical extensions outside the known set.
    pub fn unknown_critical(&self) -> Vec<&Oid> {
        let known = [
            ext_oids::intended_usage(),
            ext_oids::supplied_chains(),
            ext_oids::want_backs(),
            ext_oids::validation_time_override(),
        ];
        self.extensions
            .iter()
            .filter(|e| e.critical && !known.contains(&e.oid))
            .map(|e| &e.oid)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Signatures

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureBlock {
    pub signer: Certificate,
    pub algorithm: Oid,
    pub signature: Vec<u8>,
}

impl SignatureBlock {
    pub fn create(message: &[u8], signer: &Certificate, key: &KeyPair) -> Result<Self, VpmError> {
        let signature = crypto::sign(key, message).map_err(|e| malformed(e.to_string()))?;
        Ok(Self {
            signer: signer.clone(),
            algorithm: key.algorithm.oid.clone(),
            signature,
        })
    }

    fn to_der_value(&self) -> Result<DerValue, VpmError> {
        Ok(DerValue::Sequence(vec![
            self.signer.to_der_value()?,
            DerValue::Sequence(vec![DerValue::Oid(self.algorithm.clone())]),
            DerValue::BitString(BitString::from_bytes(self.signature.clone())),
        ]))
    }

    fn from_der_value(value: &DerValue) -> Result<Self, VpmError> {
        let mut f = Fields::of(value, "SignatureBlock")?;
        let signer = Certificate::from_der_value(f.next("signerCert")?)?;
        let algorithm = AlgorithmId::parse_oid(f.next("signatureAlgorithm")?)?;
        let sig = f
            .next("signature")?
            .as_bit_string()
            .filter(|b| b.unused_bits == 0)
            .ok_or_else(|| malformed("signature must be a whole-octet BIT STRING"))?;
        f.finish()?;
        Ok(Self {
            signer,
            algorithm,
            signature: sig.bytes.clone(),
        })
    }

    /// True iff the signature verifies under the signer certificate's key.
    pub fn verifies(&self, message: &[u8]) -> bool {
        let key = self.signer.public_key();
        if key.algorithm != self.algorithm {
            return false;
        }
        AlgorithmId::resolve(&self.algorithm)
            .map(|alg| crypto::verify(&key.key, &alg, message, &self.signature).unwrap_or(false))
            .unwrap_or(false)
    }
}

// ---------------------------------------------------------------------------
// Request

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CprFields {
    pub acceptable_set: Vec<Oid>,
    pub explicit_policy_required: bool,
    pub inhibit_policy_mapping: bool,
}

impl CprFields {
    fn to_der_value(&self) -> DerValue {
        let mut v = vec![DerValue::Sequence(
            self.acceptable_set
                .iter()
                .cloned()
                .map(DerValue::Oid)
                .collect(),
        )];
        if self.explicit_policy_required {
            v.push(DerValue::Boolean(true));
        }
        if self.inhibit_policy_mapping {
            v.push(DerValue::explicit(0, DerValue::Boolean(true)));
        }
        DerValue::Sequence(v)
    }

    fn from_der_value(value: &DerValue) -> Result<Self, VpmError> {
        let mut f = Fields::of(value, "CprFields")?;
        let acceptable_set = f
            .sequence("acceptableSet")?
            .iter()
            .map(|o| {
                o.as_oid()
                    .cloned()
                    .ok_or_else(|| malformed("acceptableSet entries must be OIDs"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let explicit_policy_required = f.default_false("explicitPolicyRequired")?;
        let inhibit_policy_mapping = match f.explicit(0) {
            Some(DerValue::Boolean(true)) => true,
            Some(_) => return Err(malformed("inhibitPolicyMapping must be TRUE when present")),
            None => false,
        };
        f.finish()?;
        let distinct: BTreeSet<&Oid> = acceptable_set.iter().collect();
        if distinct.len() != acceptable_set.len() {
            return Err(malformed("acceptableSet has duplicate entries"));
        }
        Ok(Self {
            acceptable_set,
            explicit_policy_required,
            inhibit_policy_mapping,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationRequest {
    pub info: RequestInformation,
    pub targets: Vec<Certificate>,
    pub cpr: CprFields,
    pub signature: Option<SignatureBlock>,
}

impl ValidationRequest {
    fn tbs_value(&self) -> Result<DerValue, VpmError> {
        let targets = self
            .targets
            .iter()
            .map(Certificate::to_der_value)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DerValue::Sequence(vec![
            self.info.to_der_value(),
            DerValue::Sequence(targets),
            self.cpr.to_der_value(),
        ]))
    }

    pub fn tbs_der(&self) -> Result<Vec<u8>, VpmError> {
        Ok(der::encode(&self.tbs_value()?)?)
    }

    pub fn sign(&mut self, signer: &Certificate, key: &KeyPair) -> Result<(), VpmError> {
        self.signature = Some(SignatureBlock::create(&self.tbs_der()?, signer, key)?);
        Ok(())
    }

    /// `None` when unsigned, otherwise whether the signature verifies.
    pub fn signature_ok(&self) -> Option<bool> {
        let sig = self.signature.as_ref()?;
        Some(
            self.tbs_der()
                .map(|tbs| sig.verifies(&tbs))
                .unwrap_or(false),
        )
    }

    pub fn to_der(&self) -> Result<Vec<u8>, VpmError> {
        let mut v = vec![self.tbs_value()?];
        if let Some(sig) = &self.signature {
            v.push(DerValue::explicit(0, sig.to_der_value()?));
        }
        Ok(der::encode(&DerValue::Sequence(v))?)
    }

    pub fn from_der(bytes: &[u8]) -> Result<Self, VpmError> {
        let value = der::decode_all(bytes)?;
        let mut f = Fields::of(&value, "ValidationRequest")?;
        let mut tbs = Fields::of(f.next("tbsRequest")?, "TbsRequest")?;
        let info = RequestInformation::from_der_value(tbs.next("requestInformation")?)?;
        let targets = tbs
            .sequence("targets")?
            .iter()
            .map(|c| Certificate::from_der_value(c).map_err(VpmError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let cpr = CprFields::from_der_value(tbs.next("cpr")?)?;
        tbs.finish()?;
        let signature = f
            .explicit(0)
            .map(SignatureBlock::from_der_value)
            .transpose()?;
        f.finish()?;
        if targets.is_empty() {
            return Err(malformed("request has no targets"));
        }
        Ok(Self {
            info,
            targets,
            cpr,
            signature,
        })
    }

    /// The client's policy requirement. Weak and strict forms are mutually exclusive.
    pub fn requirement(&self) -> Result<CprRequirement, VpmError> {
        let usage = self.info.intended_usage()?;
        let strict_fields = !self.cpr.acceptable_set.is_empty()
            || self.cpr.explicit_policy_required
            || self.cpr.inhibit_policy_mapping;
        match usage {
            Some(_) if strict_fields => Err(malformed(
                "weak and strict policy requirements are mutually exclusive",
            )),
            Some(u) if u.trim().is_empty() => Err(malformed("intendedUsage is empty")),
            Some(u) => Ok(CprRequirement::weak(u)),
            None => Ok(CprRequirement::strict(
                self.cpr.acceptable_set.iter().cloned().collect(),
                self.cpr.explicit_policy_required,
                self.cpr.inhibit_policy_mapping,
            )),
        }
    }
}

/// Everything a client needs to assemble a request.
#[derive(Debug, Clone, Default)]
pub struct RequestOptions {
    pub cpr: Option<CprRequirement>,
    pub request_policy: Option<Oid>,
    pub dvcs_name: Option<Name>,
    pub requester: Option<Name>,
    pub want_backs: Option<WantBacks>,
    pub validation_time: Option<GeneralizedTime>,
    pub supplied: Vec<Certificate>,
}

/// Places strict requirements in the dedicated fields and weak ones in the
/// intendedUsage extension; the any-policy default leaves both blank.
pub fn build_request(
    opts: &RequestOptions,
    targets: Vec<Certificate>,
    nonce: u64,
    now: GeneralizedTime,
) -> Result<ValidationRequest, VpmError> {
    if targets.is_empty() {
        return Err(malformed("at least one target is required"));
    }
    let mut info = RequestInformation::new(nonce, now);
    info.requester = opts.requester.clone();
    info.request_policy = opts.request_policy.clone();
    info.dvcs_name = opts.dvcs_name.clone();
    let mut cpr = CprFields {
        acceptable_set: Vec::new(),
        explicit_policy_required: false,
        inhibit_policy_mapping: false,
    };
    if let Some(req) = &opts.cpr {
        req.validate().map_err(|e| malformed(e.to_string()))?;
        match req.mode {
            CprMode::Weak => {
                let usage = req.intended_usage.clone().unwrap_or_default();
                info.set_extension(ext_oids::intended_usage(), false, &DerValue::utf8(usage));
            }
            CprMode::Strict => {
                cpr.acceptable_set = req.acceptable_set.iter().cloned().collect();
                cpr.explicit_policy_required = req.explicit_policy_required;
                cpr.inhibit_policy_mapping = req.inhibit_policy_mapping;
            }
        }
    }
    if !opts.supplied.is_empty() {
        let certs = opts
            .supplied
            .iter()
            .map(Certificate::to_der_value)
            .collect::<Result<Vec<_>, _>>()?;
        info.set_extension(
            ext_oids::supplied_chains(),
            false,
            &DerValue::Sequence(certs),
        );
    }
    if let Some(w) = opts.want_backs {
        info.set_extension(
            ext_oids::want_backs(),
            false,
            &DerValue::BitString(BitString::from_flags(w.0)),
        );
    }
    if let Some(t) = opts.validation_time {
        info.set_extension(
            ext_oids::validation_time_override(),
            false,
            &DerValue::GeneralizedTime(t),
        );
    }
    Ok(ValidationRequest {
        info,
        targets,
        cpr,
        signature: None,
    })
}

pub fn parse_request(bytes: &[u8]) -> Result<ValidationRequest, VpmError> {
    ValidationRequest::from_der(bytes)
}

// ---------------------------------------------------------------------------
// Results

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationInfo {
    /// Chain index of the certificate the status is about.
    pub index: u64,
    pub source: StatusSource,
    pub value: StatusValue,
}

impl RevocationInfo {
    fn to_der_value(&self) -> DerValue {
        let source = match self.source {
            StatusSource::Crl => 0,
            StatusSource::Online => 1,
        };
        let mut v = vec![DerValue::uint(self.index), DerValue::int(source)];
        match &self.value {
            StatusValue::Good => v.push(DerValue::int(0)),
            StatusValue::Revoked { date, reason } => {
                v.push(DerValue::int(1));
                v.push(DerValue::explicit(0, DerValue::GeneralizedTime(*date)));
                v.push(DerValue::explicit(1, DerValue::int(reason.code())));
            }
            StatusValue::Undetermined(cause) => {
                v.push(DerValue::int(2));
                v.push(DerValue::explicit(2, DerValue::utf8(cause.to_string())));
            }
        }
        DerValue::Sequence(v)
    }

    fn from_der_value(value: &DerValue) -> Result<Self, VpmError> {
        let mut f = Fields::of(value, "RevocationInfo")?;
        let index = f.u64("certIndex")?;
        let source = match f.i64("source")? {
            0 => StatusSource::Crl,
            1 => StatusSource::Online,
            s => return Err(malformed(format!("unknown status source {s}"))),
        };
        let value = match f.i64("status")? {
            0 => StatusValue::Good,
            1 => {
                let date = f
                    .explicit(0)
                    .and_then(DerValue::as_time)
                    .ok_or_else(|| malformed("missing revocationDate"))?;
                let reason = f
                    .explicit(1)
                    .and_then(DerValue::as_i64)
                    .and_then(ReasonCode::from_code)
                    .ok_or_else(|| malformed("missing or unknown revocation reason"))?;
                StatusValue::Revoked { date, reason }
            }
            2 => {
                let cause = f
                    .explicit(2)
                    .and_then(DerValue::as_str)
                    .ok_or_else(|| malformed("missing cause"))?;
                StatusValue::Undetermined(parse_cause(cause))
            }
            s => return Err(malformed(format!("unknown revocation status {s}"))),
        };
        f.finish()?;
        Ok(Self {
            index,
            source,
            value,
        })
    }
}

fn parse_cause(s: &str) -> UndeterminedCause {
    match s {
        "staleCrl" => UndeterminedCause::StaleCrl,
        "crlNotYetValid" => UndeterminedCause::CrlNotYetValid,
        "noCrl" => UndeterminedCause::NoCrl,
        "unknownToResponder" => UndeterminedCause::UnknownToResponder,
        "noResponder" => UndeterminedCause::NoResponder,
        other => UndeterminedCause::Responder(
            other
                .strip_prefix("responder: ")
                .unwrap_or(other)
                .to_owned(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetResult {
    pub target: Fingerprint,
    pub status: VerdictStatus,
    pub authorized_policies: BTreeSet<Oid>,
    pub mappings_applied: Vec<PolicyMapping>,
    pub revocation: Option<RevocationInfo>,
    /// Anchor first, target last.
    pub chain: Option<Vec<Certificate>>,
    pub crls: Option<Vec<Crl>>,
    /// DER status replies.
    pub online_replies: Option<Vec<Vec<u8>>>,
    pub validation_time: Option<GeneralizedTime>,
}

impl TargetResult {
    /// Builds the result for one target. Revocation evidence backing an
    /// `invalid(revoked)` verdict is always included.
    pub fn from_verdict(target: Fingerprint, verdict: &Verdict, want: WantBacks) -> Self {
        let revocation = verdict.revocation().map(|s| {
            let index = match verdict.status {
                VerdictStatus::Invalid { failing_index, .. } => failing_index.max(0) as u64,
                _ => 0,
            };
            RevocationInfo {
                index,
                source: s.source,
                value: s.value.clone(),
            }
        });
        let revoked = matches!(
            verdict.status,
            VerdictStatus::Invalid {
                reason: FailureReason::Revoked,
                ..
            }
        );
        let decisive = verdict.revocation().and_then(|s| s.evidence.clone());

        let mut crls: Vec<Crl> = Vec::new();
        let mut replies: Vec<Vec<u8>> = Vec::new();
        let mut add = |e: &Evidence| match e {
            Evidence::Crl(c) => {
                if !crls.iter().any(|x| x == c.as_ref()) {
                    crls.push(c.as_ref().clone());
                }
            }
            Evidence::Online(r) => {
                if !replies.contains(r) {
                    replies.push(r.clone());
                }
            }
        };
        for (_, s) in &verdict.statuses {
            if let Some(e) = &s.evidence {
                let wanted = match e {
                    Evidence::Crl(_) => want.contains(WantBacks::CRLS),
                    Evidence::Online(_) => want.contains(WantBacks::ONLINE_REPLIES),
                };
                if wanted {
                    add(e);
                }
            }
        }
        if revoked {
            if let Some(e) = &decisive {
                add(e);
            }
        }
        let has_crls = want.contains(WantBacks::CRLS)
            || matches!((revoked, &decisive), (true, Some(Evidence::Crl(_))));
        let has_replies = want.contains(WantBacks::ONLINE_REPLIES)
            || matches!((revoked, &decisive), (true, Some(Evidence::Online(_))));

        let chain = want
            .contains(WantBacks::CHAIN)
            .then_some(verdict.chain.as_ref())
            .flatten()
            .map(|c| {
                std::iter::once(&c.anchor)
                    .chain(&c.certs)
                    .map(|a| a.as_ref().clone())
                    .collect()
            });

        Self {
            target,
            status: verdict.status,
            authorized_policies: verdict.authorized_policies.clone(),
            mappings_applied: verdict.mappings_applied.clone(),
            revocation,
            chain,
            crls: has_crls.then_some(crls),
            online_replies: has_replies.then_some(replies),
            validation_time: want
                .contains(WantBacks::VALIDATION_TIME)
                .then_some(verdict.validation_time),
        }
    }

    fn to_der_value(&self) -> Result<DerValue, VpmError> {
        let status = match self.status {
            VerdictStatus::Valid => vec![DerValue::int(0)],
            VerdictStatus::Invalid {
                reason,
                failing_index,
            } => {
                vec![
                    DerValue::int(1),
                    DerValue::int(reason.code()),
                    DerValue::int(failing_index as i64),
                ]
            }
            VerdictStatus::Unknown => vec![DerValue::int(2)],
        };
        let mut v = vec![
            DerValue::OctetString(self.target.0.to_vec()),
            DerValue::Sequence(status),
            DerValue::Sequence(
                self.authorized_policies
                    .iter()
                    .cloned()
                    .map(DerValue::Oid)
                    .collect(),
            ),
            DerValue::Sequence(
                self.mappings_applied
                    .iter()
                    .map(|m| {
                        DerValue::Sequence(vec![
                            DerValue::Oid(m.issuer_domain.clone()),
                            DerValue::Oid(m.subject_domain.clone()),
                        ])
                    })
                    .collect(),
            ),
        ];
        if let Some(r) = &self.revocation {
            v.push(DerValue::explicit(0, r.to_der_value()));
        }
        if let Some(chain) = &self.chain {
            let certs = chain
                .iter()
                .map(Certificate::to_der_value)
                .collect::<Result<Vec<_>, _>>()?;
            v.push(DerValue::explicit(1, DerValue::Sequence(certs)));
        }
        if let Some(crls) = &self.crls {
            let list = crls
                .iter()
                .map(Crl::to_der_value)
                .collect::<Result<Vec<_>, _>>()?;
            v.push(DerValue::explicit(2, DerValue::Sequence(list)));
        }
        if let Some(replies) = &self.online_replies {
            let list = replies
                .iter()
                .map(|r| der::decode_all(r))
                .collect::<Result<Vec<_>, _>>()?;
            v.push(DerValue::explicit(3, DerValue::Sequence(list)));
        }
        if let Some(t) = self.validation_time {
            v.push(DerValue::explicit(4, DerValue::GeneralizedTime(t)));
        }
        Ok(DerValue::Sequence(v))
    }

    fn from_der_value(value: &DerValue) -> Result<Self, VpmError> {
        let mut f = Fields::of(value, "TargetResult")?;
        let target = Fingerprint::from_slice(f.octets("targetFingerprint")?)
            .ok_or_else(|| malformed("targetFingerprint must be 32 octets"))?;
        let mut s = Fields::of(f.next("status")?, "VerdictStatus")?;
        let status = match s.i64("code")? {
            0 => VerdictStatus::Valid,
            1 => {
                let reason = FailureReason::from_code(s.i64("reason")?)
                    .ok_or_else(|| malformed("unknown reason code"))?;
                let failing_index = i32::try_from(s.i64("failingIndex")?)
                    .ok()
                    .filter(|i| *i >= -1)
                    .ok_or_else(|| malformed("failingIndex out of range"))?;
                VerdictStatus::Invalid {
                    reason,
                    failing_index,
                }
            }
            2 => VerdictStatus::Unknown,
            c => return Err(malformed(format!("unknown verdict code {c}"))),
        };
        s.finish()?;
        let authorized_policies = f
            .sequence("authorizedPolicies")?
            .iter()
            .map(|o| {
                o.as_oid()
                    .cloned()
                    .ok_or_else(|| malformed("authorizedPolicies entries must be OIDs"))
            })
            .collect::<Result<BTreeSet<_>, _>>()?;
        let mappings_applied = f
            .sequence("mappingsApplied")?
            .iter()
            .map(|m| {
                let mut mf = Fields::of(m, "PolicyMapping")?;
                let issuer_domain = mf.oid("issuerDomainPolicy")?.clone();
                let subject_domain = mf.oid("subjectDomainPolicy")?.clone();
                mf.finish()?;
                Ok(PolicyMapping {
                    issuer_domain,
                    subject_domain,
                })
            })
            .collect::<Result<Vec<_>, VpmError>>()?;
        let revocation = f
            .explicit(0)
            .map(RevocationInfo::from_der_value)
            .transpose()?;
        let seq = |v: &DerValue, what: &str| -> Result<Vec<DerValue>, VpmError> {
            v.as_sequence()
                .map(<[DerValue]>::to_vec)
                .ok_or_else(|| malformed(format!("{what} must be a SEQUENCE")))
        };
        let chain = f
            .explicit(1)
            .map(|v| {
                seq(v, "chain")?
                    .iter()
                    .map(|c| Certificate::from_der_value(c).map_err(VpmError::from))
                    .collect()
            })
            .transpose()?;
        let crls = f
            .explicit(2)
            .map(|v| {
                seq(v, "crls")?
                    .iter()
                    .map(|c| Crl::from_der_value(c).map_err(VpmError::from))
                    .collect()
            })
            .transpose()?;
        let online_replies = f
            .explicit(3)
            .map(|v| {
                seq(v, "onlineReplies")?
                    .iter()
                    .map(|r| {
                        let bytes = der::encode(r)?;
                        StatusReply::from_der(&bytes).map_err(|e| malformed(e.to_string()))?;
                        Ok(bytes)
                    })
                    .collect::<Result<Vec<_>, VpmError>>()
            })
            .transpose()?;
        let validation_time = f
            .explicit(4)
            .map(|v| {
                v.as_time()
                    .ok_or_else(|| malformed("validationTime must be GeneralizedTime"))
            })
            .transpose()?;
        f.finish()?;
        Ok(Self {
            target,
            status,
            authorized_policies,
            mappings_applied,
            revocation,
            chain,
            crls,
            online_replies,
            validation_time,
        })
    }
}

// ---------------------------------------------------------------------------
// Responses

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DvcInfo {
    pub version: u64,
    pub serial: u64,
    pub produced_at: GeneralizedTime,
    pub request_info: RequestInformation,
    pub results: Vec<TargetResult>,
}

impl DvcInfo {
    fn to_der_value(&self) -> Result<DerValue, VpmError> {
        let results = self
            .results
            .iter()
            .map(TargetResult::to_der_value)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DerValue::Sequence(vec![
            DerValue::uint(self.version),
            DerValue::uint(self.serial),
            DerValue::GeneralizedTime(self.produced_at),
            self.request_info.to_der_value(),
            DerValue::Sequence(results),
        ]))
    }

    fn from_der_value(value: &DerValue) -> Result<Self, VpmError> {
        let mut f = Fields::of(value, "DvcInfo")?;
        let version = f.u64("version")?;
        let serial = f.u64("serialNumber")?;
        let produced_at = f.time("producedAt")?;
        let request_info = RequestInformation::from_der_value(f.next("requestInformation")?)?;
        let results = f
            .sequence("results")?
            .iter()
            .map(TargetResult::from_der_value)
            .collect::<Result<Vec<_>, _>>()?;
        f.finish()?;
        Ok(Self {
            version,
            serial,
            produced_at,
            request_info,
            results,
        })
    }

    pub fn to_der(&self) -> Result<Vec<u8>, VpmError> {
        Ok(der::encode(&self.to_der_value()?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    BadTime,
    WrongServer,
    UnsupportedService,
    MalformedRequest,
    UnknownRequestPolicy,
    UnknownUsage,
    InternalError,
}

impl ErrorCode {
    const ALL: [ErrorCode; 7] = [
        Self::BadTime,
        Self::WrongServer,
        Self::UnsupportedService,
        Self::MalformedRequest,
        Self::UnknownRequestPolicy,
        Self::UnknownUsage,
        Self::InternalError,
    ];

    pub fn code(self) -> i64 {
        Self::ALL.iter().position(|c| *c == self).expect("listed") as i64
    }

    pub fn from_code(code: i64) -> Option<Self> {
        usize::try_from(code)
            .ok()
            .and_then(|i| Self::ALL.get(i))
            .copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::BadTime => "badTime",
            Self::WrongServer => "wrongServer",
            Self::UnsupportedService => "unsupportedService",
            Self::MalformedRequest => "malformedRequest",
            Self::UnknownRequestPolicy => "unknownRequestPolicy",
            Self::UnknownUsage => "unknownUsage",
            Self::InternalError => "internalError",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorInfo {
    pub request_info: Option<RequestInformation>,
    pub code: ErrorCode,
    pub message: String,
    pub produced_at: GeneralizedTime,
}

impl ErrorInfo {
    fn to_der_value(&self) -> DerValue {
        let mut v = Vec::new();
        if let Some(ri) = &self.request_info {
            v.push(DerValue::explicit(0, ri.to_der_value()));
        }
        v.push(DerValue::int(self.code.code()));
        v.push(DerValue::utf8(self.message.clone()));
        v.push(DerValue::GeneralizedTime(self.produced_at));
        DerValue::Sequence(v)
    }

    fn from_der_value(value: &DerValue) -> Result<Self, VpmError> {
        let mut f = Fields::of(value, "ErrorInfo")?;
        let request_info = f
            .explicit(0)
            .map(RequestInformation::from_der_value)
            .transpose()?;
        let code =
            ErrorCode::from_code(f.i64("code")?).ok_or_else(|| malformed("unknown error code"))?;
        let message = f
            .next("message")?
            .as_str()
            .ok_or_else(|| malformed("message must be a string"))?
            .to_owned();
        let produced_at = f.time("producedAt")?;
        f.finish()?;
        Ok(Self {
            request_info,
            code,
            message,
            produced_at,
        })
    }

    pub fn to_der(&self) -> Vec<u8> {
        der::encode(&self.to_der_value()).expect("error info always encodes")
    }
}

/// A server message: DVC or error notice, each optionally signed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerMessage {
    Dvc {
        info: DvcInfo,
        signature: Option<SignatureBlock>,
    },
    Error {
        info: ErrorInfo,
        signature: Option<SignatureBlock>,
    },
}

impl ServerMessage {
    /// DER of the signed part.
    pub fn signed_der(&self) -> Result<Vec<u8>, VpmError> {
        match self {
            ServerMessage::Dvc { info, .. } => info.to_der(),
            ServerMessage::Error { info, .. } => Ok(info.to_der()),
        }
    }

    pub fn signature(&self) -> Option<&SignatureBlock> {
        match self {
            ServerMessage::Dvc { signature, .. } | ServerMessage::Error { signature, .. } => {
                signature.as_ref()
            }
        }
    }

    pub fn request_info(&self) -> Option<&RequestInformation> {
        match self {
            ServerMessage::Dvc { info, .. } => Some(&info.request_info),
            ServerMessage::Error { info, .. } => info.request_info.as_ref(),
        }
    }

    pub fn to_der(&self) -> Result<Vec<u8>, VpmError> {
        let (tag, body) = match self {
            ServerMessage::Dvc { info, .. } => (0, info.to_der_value()?),
            ServerMessage::Error { info, .. } => (1, info.to_der_value()),
        };
        let mut v = vec![body];
        if let Some(sig) = self.signature() {
            v.push(DerValue::explicit(0, sig.to_der_value()?));
        }
        Ok(der::encode(&DerValue::explicit(
            tag,
            DerValue::Sequence(v),
        ))?)
    }

    pub fn from_der(bytes: &[u8]) -> Result<Self, VpmError> {
        let value = der::decode_all(bytes)?;
        let DerValue::Tagged {
            number,
            explicit: true,
            inner,
        } = &value
        else {
            return Err(malformed(
                "response must be [0] DvcResponse or [1] ErrorNotice",
            ));
        };
        let mut f = Fields::of(inner, "ServerMessage")?;
        let body = f.next("body")?;
        let signature = f
            .explicit(0)
            .map(SignatureBlock::from_der_value)
            .transpose()?;
        f.finish()?;
        match number {
            0 => Ok(ServerMessage::Dvc {
                info: DvcInfo::from_der_value(body)?,
                signature,
            }),
            1 => Ok(ServerMessage::Error {
                info: ErrorInfo::from_der_value(body)?,
                signature,
            }),
            n => Err(malformed(format!("unknown response choice [{n}]"))),
        }
    }
}

/// Signs a DVC with the server key.
pub fn build_response(
    info: DvcInfo,
    signer: Option<(&Certificate, &KeyPair)>,
) -> Result<Vec<u8>, VpmError> {
    let signature = signer
        .map(|(c, k)| SignatureBlock::create(&info.to_der()?, c, k))
        .transpose()?;
    ServerMessage::Dvc { info, signature }.to_der()
}

pub fn build_error(
    info: ErrorInfo,
    signer: Option<(&Certificate, &KeyPair)>,
) -> Result<Vec<u8>, VpmError> {
    let signature = signer
        .map(|(c, k)| SignatureBlock::create(&info.to_der(), c, k))
        .transpose()?;
    ServerMessage::Error { info, signature }.to_der()
}

/// Self-signed certificate for a message signer: serial 1, valid from a day
/// before `now` for ten years, keyUsage digitalSignature.
pub fn self_signed_signer(name: &Name, key: &KeyPair, now: GeneralizedTime) -> Certificate {
    use crate::x509::{
        Extension, ExtensionValue, Extensions, KeyUsage, SubjectPublicKey, TbsCertificate, Validity,
    };
    let tbs = TbsCertificate {
        serial: 1,
        signature_alg: key.algorithm.oid.clone(),
        issuer: name.clone(),
        validity: Validity {
            not_before: now.plus_days(-1),
            not_after: now.plus_years(10),
        },
        subject: name.clone(),
        public_key: SubjectPublicKey {
            algorithm: key.algorithm.oid.clone(),
            key: key.public_key.clone(),
        },
        extensions: Extensions(vec![Extension::new(
            true,
            ExtensionValue::KeyUsage(KeyUsage(KeyUsage::DIGITAL_SIGNATURE)),
        )]),
    };
    Certificate::sign(tbs, key).expect("ed25519 signing does not fail")
}

/// Decides whether the server's signing certificate is acceptable.
pub trait SignerCheck {
    fn check(&self, signer: &Certificate) -> Result<(), String>;
}

pub struct AcceptAnySigner;

impl SignerCheck for AcceptAnySigner {
    fn check(&self, _: &Certificate) -> Result<(), String> {
        Ok(())
    }
}

pub struct PinnedSigner(pub Fingerprint);

impl SignerCheck for PinnedSigner {
    fn check(&self, signer: &Certificate) -> Result<(), String> {
        let fp = signer.fingerprint();
        if fp == self.0 {
            Ok(())
        } else {
            Err(format!(
                "signer fingerprint {fp} is not the pinned {}",
                self.0
            ))
        }
    }
}

pub struct ResponseTrust<'a> {
    pub trust_unsigned: bool,
    pub signer: &'a dyn SignerCheck,
}

/// Checks nonce, echo, signature and signer, in that order.
pub fn parse_and_verify_response(
    bytes: &[u8],
    expected: &RequestInformation,
    trust: &ResponseTrust,
) -> Result<ServerMessage, VpmError> {
    let msg = ServerMessage::from_der(bytes)?;
    match msg.request_info() {
        Some(echo) => {
            if echo.nonce != expected.nonce {
                return Err(VpmError::NonceMismatch);
            }
            if echo.to_der() != expected.to_der() {
                return Err(VpmError::EchoMismatch);
            }
        }
        None if matches!(msg, ServerMessage::Dvc { .. }) => return Err(VpmError::EchoMismatch),
        None => {}
    }
    match msg.signature() {
        Some(sig) => {
            if !sig.verifies(&msg.signed_der()?) {
                return Err(VpmError::BadServerSignature);
            }
            trust
                .signer
                .check(&sig.signer)
                .map_err(VpmError::SignerRejected)?;
        }
        None if trust.trust_unsigned => {}
        None => return Err(VpmError::UnsignedRejected),
    }
    if let ServerMessage::Dvc { info, .. } = &msg {
        if info.results.is_empty() {
            return Err(malformed("DVC carries no results"));
        }
    }
    Ok(msg)
}

// ---------------------------------------------------------------------------
// Rendering

/// Replaces control characters so rendered text is always printable.
pub fn sanitize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_control() {
            let _ = write!(out, "\\u{{{:x}}}", c as u32);
        } else {
            out.push(c);
        }
    }
    out
}

fn name(n: &Name) -> String {
    sanitize(&n.to_string())
}

pub fn render_certificate(cert: &Certificate) -> String {
    let mut out = String::new();
    let t = &cert.tbs;
    let _ = writeln!(out, "certificate");
    let _ = writeln!(out, "  fingerprint: {}", cert.fingerprint());
    let _ = writeln!(out, "  serial: {}", t.serial);
    let _ = writeln!(out, "  issuer: {}", name(&t.issuer));
    let _ = writeln!(out, "  subject: {}", name(&t.subject));
    let _ = writeln!(out, "  not before: {}", t.validity.not_before);
    let _ = writeln!(out, "  not after: {}", t.validity.not_after);
    let _ = writeln!(
        out,
        "  public key: {} {}",
        t.public_key.algorithm,
        hex::encode(&t.public_key.key)
    );
    let ext = &t.extensions;
    if let Some(bc) = ext.basic_constraints() {
        let len = bc
            .path_len
            .map(|l| format!(", pathLen {l}"))
            .unwrap_or_default();
        let _ = writeln!(out, "  basic constraints: ca {}{len}", bc.is_ca);
    }
    if let Some(ku) = ext.key_usage() {
        let _ = writeln!(out, "  key usage: {:#06x}", ku.0);
    }
    if ext.certificate_policies().is_some() {
        let ps: Vec<String> = ext.policy_oids().iter().map(Oid::to_string).collect();
        let _ = writeln!(out, "  policies: {}", ps.join(", "));
    }
    for m in ext.policy_mappings() {
        let _ = writeln!(
            out,
            "  policy mapping: {} -> {}",
            m.issuer_domain, m.subject_domain
        );
    }
    if let Some(pc) = ext.policy_constraints() {
        let _ = writeln!(
            out,
            "  policy constraints: requireExplicit {:?}, inhibitMapping {:?}",
            pc.require_explicit_policy, pc.inhibit_policy_mapping
        );
    }
    if let Some(nc) = ext.name_constraints() {
        for p in &nc.permitted {
            let _ = writeln!(out, "  permitted subtree: {}", name(p));
        }
        for e in &nc.excluded {
            let _ = writeln!(out, "  excluded subtree: {}", name(e));
        }
    }
    if let Some(dp) = ext.crl_distribution_point() {
        let _ = writeln!(out, "  crl distribution point: {}", sanitize(dp));
    }
    for e in &ext.0 {
        if let crate::x509::ExtensionValue::Unknown { oid, .. } = &e.value {
            let _ = writeln!(
                out,
                "  unknown extension: {oid}{}",
                if e.critical { " (critical)" } else { "" }
            );
        }
    }
    out
}

pub fn render_crl(crl: &Crl) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "crl");
    let _ = writeln!(out, "  issuer: {}", name(crl.issuer()));
    let _ = writeln!(out, "  this update: {}", crl.tbs.this_update);
    let _ = writeln!(out, "  next update: {}", crl.tbs.next_update);
    let _ = writeln!(out, "  entries: {}", crl.tbs.revoked.len());
    for e in &crl.tbs.revoked {
        let _ = writeln!(
            out,
            "    serial {} revoked {} reason {}",
            e.serial, e.date, e.reason
        );
    }
    out
}

pub fn render_status_reply(reply: &StatusReply) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status reply");
    let _ = writeln!(
        out,
        "  issuer name digest: {}",
        hex::encode(reply.query.issuer_name_digest)
    );
    let _ = writeln!(out, "  serial: {}", reply.query.serial);
    let _ = writeln!(out, "  nonce: {}", reply.query.nonce);
    let _ = writeln!(out, "  produced at: {}", reply.produced_at);
    match &reply.status {
        crate::csm::ReplyStatus::Good {
            this_update,
            next_update,
        } => {
            let _ = writeln!(
                out,
                "  status: good (this update {this_update}, next update {next_update})"
            );
        }
        crate::csm::ReplyStatus::Revoked { date, reason, .. } => {
            let _ = writeln!(out, "  status: revoked {date} reason {reason}");
        }
        crate::csm::ReplyStatus::Unknown => {
            let _ = writeln!(out, "  status: unknown");
        }
    }
    out
}

fn render_info(out: &mut String, info: &RequestInformation, indent: &str) {
    let _ = writeln!(out, "{indent}version: {}", info.version);
    let _ = writeln!(out, "{indent}service: {}", info.service);
    let _ = writeln!(out, "{indent}nonce: {}", info.nonce);
    let _ = writeln!(out, "{indent}request time: {}", info.request_time);
    if let Some(n) = &info.requester {
        let _ = writeln!(out, "{indent}requester: {}", name(n));
    }
    if let Some(p) = &info.request_policy {
        let _ = writeln!(out, "{indent}request policy: {p}");
    }
    if let Some(n) = &info.dvcs_name {
        let _ = writeln!(out, "{indent}server name: {}", name(n));
    }
    for e in &info.extensions {
        let critical = if e.critical { " (critical)" } else { "" };
        let detail = if e.oid == ext_oids::intended_usage() {
            info.intended_usage()
                .ok()
                .flatten()
                .map(|u| format!("intended usage {}", sanitize(&u)))
        } else if e.oid == ext_oids::want_backs() {
            info.want_backs()
                .ok()
                .flatten()
                .map(|w| format!("want-backs {w}"))
        } else if e.oid == ext_oids::validation_time_override() {
            info.validation_time_override()
                .ok()
                .flatten()
                .map(|t| format!("validation time {t}"))
        } else if e.oid == ext_oids::supplied_chains() {
            info.supplied_chains().ok().map(|c| {
                let fps: Vec<String> = c.iter().map(|c| c.fingerprint().to_hex()).collect();
                format!("supplied certificates [{}]", fps.join(", "))
            })
        } else {
            None
        };
        let detail = detail.unwrap_or_else(|| format!("{} octets", e.value.len()));
        let _ = writeln!(out, "{indent}extension {}{critical}: {detail}", e.oid);
    }
}

pub fn render_request(req: &ValidationRequest) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "validation request");
    render_info(&mut out, &req.info, "  ");
    if req.cpr.acceptable_set.is_empty() {
        let _ = writeln!(out, "  acceptable policies: (none given)");
    } else {
        let ps: Vec<String> = req.cpr.acceptable_set.iter().map(Oid::to_string).collect();
        let _ = writeln!(out, "  acceptable policies: {}", ps.join(", "));
    }
    let _ = writeln!(
        out,
        "  explicit policy required: {}",
        req.cpr.explicit_policy_required
    );
    let _ = writeln!(
        out,
        "  inhibit policy mapping: {}",
        req.cpr.inhibit_policy_mapping
    );
    for (i, t) in req.targets.iter().enumerate() {
        let _ = writeln!(
            out,
            "  target {i}: {} {}",
            t.fingerprint(),
            name(t.subject())
        );
    }
    match &req.signature {
        Some(s) => {
            let _ = writeln!(out, "  signed by: {}", name(s.signer.subject()));
        }
        None => {
            let _ = writeln!(out, "  unsigned");
        }
    }
    out
}

fn render_revocation_entry(out: &mut String, result: &TargetResult) {
    let Some(r) = &result.revocation else { return };
    let source = match r.source {
        StatusSource::Crl => "crl",
        StatusSource::Online => "online",
    };
    match &r.value {
        StatusValue::Revoked { date, reason } => {
            let _ = writeln!(
                out,
                "    revocation: certificate {} revoked {date} reason {reason} ({source})",
                r.index
            );
        }
        StatusValue::Undetermined(cause) => {
            let _ = writeln!(
                out,
                "    revocation: certificate {} undetermined: {} ({source})",
                r.index,
                sanitize(&cause.to_string())
            );
        }
        StatusValue::Good => {
            let _ = writeln!(
                out,
                "    revocation: certificate {} good ({source})",
                r.index
            );
        }
    }
}

pub fn render_result(result: &TargetResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "  target {}", result.target);
    let _ = writeln!(out, "    status: {}", result.status);
    if !result.authorized_policies.is_empty() {
        let ps: Vec<String> = result
            .authorized_policies
            .iter()
            .map(Oid::to_string)
            .collect();
        let _ = writeln!(out, "    authorized policies: {}", ps.join(", "));
    }
    for m in &result.mappings_applied {
        let _ = writeln!(
            out,
            "    mapping applied: {} -> {}",
            m.issuer_domain, m.subject_domain
        );
    }
    render_revocation_entry(&mut out, result);
    if let Some(chain) = &result.chain {
        for (i, c) in chain.iter().enumerate() {
            let role = if i == 0 { "anchor" } else { "cert" };
            let _ = writeln!(
                out,
                "    chain {role}: {} {}",
                c.fingerprint(),
                name(c.subject())
            );
        }
    }
    for crl in result.crls.iter().flatten() {
        let _ = writeln!(
            out,
            "    crl from {} (this update {})",
            name(crl.issuer()),
            crl.tbs.this_update
        );
        if let Some(serial) = revoked_serial(result, crl) {
            if let Some(e) = crl.entry(serial) {
                let _ = writeln!(
                    out,
                    "      entry: serial {} revoked {} reason {}",
                    e.serial, e.date, e.reason
                );
            }
        }
    }
    for r in result.online_replies.iter().flatten() {
        if let Ok(reply) = StatusReply::from_der(r) {
            let _ = writeln!(
                out,
                "    online reply: serial {} produced {}",
                reply.query.serial, reply.produced_at
            );
        }
    }
    if let Some(t) = result.validation_time {
        let _ = writeln!(out, "    validation time: {t}");
    }
    out
}

/// Serial of the revoked certificate when the CRL is the one that revoked it.
fn revoked_serial(result: &TargetResult, crl: &Crl) -> Option<u64> {
    let r = result.revocation.as_ref()?;
    let StatusValue::Revoked { date, .. } = r.value else {
        return None;
    };
    crl.tbs
        .revoked
        .iter()
        .find(|e| e.date == date)
        .map(|e| e.serial)
}

pub fn render_response(msg: &ServerMessage) -> String {
    let mut out = String::new();
    match msg {
        ServerMessage::Dvc { info, .. } => {
            let _ = writeln!(out, "dvc response");
            let _ = writeln!(out, "  version: {}", info.version);
            let _ = writeln!(out, "  serial: {}", info.serial);
            let _ = writeln!(out, "  produced at: {}", info.produced_at);
            let _ = writeln!(out, "  request information:");
            render_info(&mut out, &info.request_info, "    ");
            let _ = writeln!(out, "  results: {}", info.results.len());
            for r in &info.results {
                out.push_str(&render_result(r));
            }
        }
        ServerMessage::Error { info, .. } => {
            let _ = writeln!(out, "error notice");
            let _ = writeln!(out, "  code: {}", info.code);
            let _ = writeln!(out, "  message: {}", sanitize(&info.message));
            let _ = writeln!(out, "  produced at: {}", info.produced_at);
            if let Some(ri) = &info.request_info {
                let _ = writeln!(out, "  request information:");
                render_info(&mut out, ri, "    ");
            }
        }
    }
    match msg.signature() {
        Some(s) => {
            let _ = writeln!(
                out,
                "  signed by: {} ({})",
                name(s.signer.subject()),
                s.signer.fingerprint()
            );
        }
        None => {
            let _ = writeln!(out, "  unsigned");
        }
    }
    out
}

/// Best-effort rendering of any supported DER file.
pub fn render_any(bytes: &[u8]) -> Result<String, VpmError> {
    if let Ok(m) = ServerMessage::from_der(bytes) {
        return Ok(render_response(&m));
    }
    if let Ok(r) = ValidationRequest::from_der(bytes) {
        return Ok(render_request(&r));
    }
    if let Ok(c) = Certificate::from_der(bytes) {
        return Ok(render_certificate(&c));
    }
    if let Ok(c) = Crl::from_der(bytes) {
        return Ok(render_crl(&c));
    }
    if let Ok(r) = StatusReply::from_der(bytes) {
        return Ok(render_status_reply(&r));
    }
    der::decode_all(bytes)?;
    Err(malformed(
        "well-formed DER but not a known message, certificate or CRL",
    ))
}
