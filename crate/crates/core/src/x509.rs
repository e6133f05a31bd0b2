//! Certificate and CRL model with the extension vocabulary used by path validation.
//!
//! Encodings follow the X.509 v3 layout with a few simplifications: validity
//! times are always GeneralizedTime, name constraints carry plain names as
//! prefixes, and the CRL distribution point is a single URI string.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::crypto::{self, AlgorithmId, CryptoError, KeyPair};
use crate::der::{self, mismatch, BitString, DerError, DerValue, Fields, Mismatch, Oid};
use crate::time::GeneralizedTime;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum X509Error {
    #[error(transparent)]
    Der(#[from] DerError),
    #[error("{0}")]
    StructureMismatch(String),
    #[error("unsupported certificate version marker {0}")]
    UnsupportedVersion(i64),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

impl From<Mismatch> for X509Error {
    fn from(m: Mismatch) -> Self {
        X509Error::StructureMismatch(m.0)
    }
}

pub mod oids {
    use crate::der::Oid;

    pub fn any_policy() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 32, 0])
    }
    pub fn basic_constraints() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 19])
    }
    pub fn key_usage() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 15])
    }
    pub fn certificate_policies() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 32])
    }
    pub fn policy_mappings() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 33])
    }
    pub fn policy_constraints() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 36])
    }
    pub fn name_constraints() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 30])
    }
    pub fn crl_distribution_points() -> Oid {
        Oid::from_arcs(&[2, 5, 29, 31])
    }
}

// ---------------------------------------------------------------------------
// Names

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttributeKind {
    Country,
    Organization,
    OrganizationalUnit,
    CommonName,
}

impl AttributeKind {
    pub fn oid(self) -> Oid {
        let last = match self {
            AttributeKind::Country => 6,
            AttributeKind::Organization => 10,
            AttributeKind::OrganizationalUnit => 11,
            AttributeKind::CommonName => 3,
        };
        Oid::from_arcs(&[2, 5, 4, last])
    }

    fn from_oid(oid: &Oid) -> Option<Self> {
        match oid.arcs() {
            [2, 5, 4, 6] => Some(AttributeKind::Country),
            [2, 5, 4, 10] => Some(AttributeKind::Organization),
            [2, 5, 4, 11] => Some(AttributeKind::OrganizationalUnit),
            [2, 5, 4, 3] => Some(AttributeKind::CommonName),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AttributeKind::Country => "C",
            AttributeKind::Organization => "O",
            AttributeKind::OrganizationalUnit => "OU",
            AttributeKind::CommonName => "CN",
        }
    }

    fn from_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_uppercase().as_str() {
            "C" => Some(AttributeKind::Country),
            "O" => Some(AttributeKind::Organization),
            "OU" => Some(AttributeKind::OrganizationalUnit),
            "CN" => Some(AttributeKind::CommonName),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Attribute {
    pub kind: AttributeKind,
    pub value: String,
    /// Encoded as PrintableString rather than UTF8String.
    pub printable: bool,
}

impl Attribute {
    fn folded(&self) -> String {
        self.value.trim().to_ascii_lowercase()
    }

    fn matches(&self, other: &Attribute) -> bool {
        self.kind == other.kind && self.folded() == other.folded()
    }
}

/// Distinguished name: an ordered list of single-attribute RDNs.
///
/// Equality folds ASCII case and trims surrounding whitespace in values.
#[derive(Debug, Clone, Default)]
pub struct Name {
    attrs: Vec<Attribute>,
}

impl Name {
    pub fn new(attrs: Vec<Attribute>) -> Self {
        Self { attrs }
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attrs
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn common_name(&self) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.kind == AttributeKind::CommonName)
            .map(|a| a.value.as_str())
    }

    /// True when `self` is a leading subsequence of `other`.
    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.attrs.len() <= other.attrs.len()
            && self
                .attrs
                .iter()
                .zip(&other.attrs)
                .all(|(a, b)| a.matches(b))
    }

    pub fn to_der(&self) -> DerValue {
        DerValue::Sequence(
            self.attrs
                .iter()
                .map(|a| {
                    let value = if a.printable {
                        DerValue::PrintableString(a.value.clone())
                    } else {
                        DerValue::Utf8String(a.value.clone())
                    };
                    DerValue::Set(vec![DerValue::Sequence(vec![
                        DerValue::Oid(a.kind.oid()),
                        value,
                    ])])
                })
                .collect(),
        )
    }

    pub fn from_der(value: &DerValue) -> Result<Self, Mismatch> {
        let rdns = value
            .as_sequence()
            .ok_or_else(|| mismatch("Name: expected SEQUENCE"))?;
        let mut attrs = Vec::with_capacity(rdns.len());
        for rdn in rdns {
            let set = rdn
                .as_set()
                .ok_or_else(|| mismatch("Name: RDN must be a SET"))?;
            let [atv] = set else {
                return Err(mismatch("Name: multi-valued RDNs are not supported"));
            };
            let mut f = Fields::of(atv, "AttributeTypeAndValue")?;
            let oid = f.oid("type")?;
            let kind = AttributeKind::from_oid(oid)
                .ok_or_else(|| mismatch(format!("Name: unsupported attribute {oid}")))?;
            let (value, printable) = match f.next("value")? {
                DerValue::PrintableString(s) => (s.clone(), true),
                DerValue::Utf8String(s) => (s.clone(), false),
                _ => return Err(mismatch("Name: attribute value must be a string")),
            };
            f.finish()?;
            attrs.push(Attribute {
                kind,
                value,
                printable,
            });
        }
        Ok(Self { attrs })
    }

    pub fn to_der_bytes(&self) -> Vec<u8> {
        der::encode(&self.to_der()).expect("names are always encodable")
    }
}

impl PartialEq for Name {
    fn eq(&self, other: &Self) -> bool {
        self.attrs.len() == other.attrs.len() && self.is_prefix_of(other)
    }
}

impl Eq for Name {}

impl Hash for Name {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for a in &self.attrs {
            a.kind.hash(state);
            a.folded().hash(state);
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.attrs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}={}", a.kind.label(), a.value)?;
        }
        Ok(())
    }
}

impl FromStr for Name {
    type Err = X509Error;

    /// Parses `C=IT,O=Example,CN=Root`. Values cannot contain commas.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Name::default());
        }
        let attrs = s
            .split(',')
            .map(|part| {
                let (k, v) = part.split_once('=').ok_or_else(|| {
                    X509Error::InvalidValue(format!("name component {part:?} lacks '='"))
                })?;
                let kind = AttributeKind::from_label(k).ok_or_else(|| {
                    X509Error::InvalidValue(format!("unsupported name attribute {k:?}"))
                })?;
                let value = v.trim().to_string();
                let printable = kind == AttributeKind::Country && der::is_printable(&value);
                Ok(Attribute {
                    kind,
                    value,
                    printable,
                })
            })
            .collect::<Result<Vec<_>, X509Error>>()?;
        Ok(Name { attrs })
    }
}

// ---------------------------------------------------------------------------
// Extensions

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicConstraints {
    pub is_ca: bool,
    pub path_len: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyUsage(pub u16);

impl KeyUsage {
    pub const DIGITAL_SIGNATURE: u16 = 1 << 0;
    pub const KEY_CERT_SIGN: u16 = 1 << 5;
    pub const CRL_SIGN: u16 = 1 << 6;

    pub fn contains(self, bit: u16) -> bool {
        self.0 & bit != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyInformation {
    pub policy: Oid,
    /// Qualifiers are carried opaquely and never interpreted.
    pub qualifiers: Option<DerValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PolicyMapping {
    pub issuer_domain: Oid,
    pub subject_domain: Oid,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyConstraints {
    pub require_explicit_policy: Option<u64>,
    pub inhibit_policy_mapping: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameConstraints {
    pub permitted: Vec<Name>,
    pub excluded: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtensionValue {
    BasicConstraints(BasicConstraints),
    KeyUsage(KeyUsage),
    CertificatePolicies(Vec<PolicyInformation>),
    PolicyMappings(Vec<PolicyMapping>),
    PolicyConstraints(PolicyConstraints),
    NameConstraints(NameConstraints),
    CrlDistributionPoint(String),
    /// Unrecognized extension, preserved byte-for-byte.
    Unknown {
        oid: Oid,
        value: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub critical: bool,
    pub value: ExtensionValue,
}

impl Extension {
    pub fn new(critical: bool, value: ExtensionValue) -> Self {
        Self { critical, value }
    }

    pub fn oid(&self) -> Oid {
        match &self.value {
            ExtensionValue::BasicConstraints(_) => oids::basic_constraints(),
            ExtensionValue::KeyUsage(_) => oids::key_usage(),
            ExtensionValue::CertificatePolicies(_) => oids::certificate_policies(),
            ExtensionValue::PolicyMappings(_) => oids::policy_mappings(),
            ExtensionValue::PolicyConstraints(_) => oids::policy_constraints(),
            ExtensionValue::NameConstraints(_) => oids::name_constraints(),
            ExtensionValue::CrlDistributionPoint(_) => oids::crl_distribution_points(),
            ExtensionValue::Unknown { oid, .. } => oid.clone(),
        }
    }

    fn value_der(&self) -> Result<Vec<u8>, X509Error> {
        let names = |list: &[Name]| DerValue::Sequence(list.iter().map(Name::to_der).collect());
        let v = match &self.value {
            ExtensionValue::BasicConstraints(bc) => {
                let mut items = Vec::new();
                if bc.is_ca {
                    items.push(DerValue::Boolean(true));
                }
                if let Some(n) = bc.path_len {
                    items.push(DerValue::uint(n));
                }
                DerValue::Sequence(items)
            }
            ExtensionValue::KeyUsage(ku) => DerValue::BitString(BitString::from_flags(ku.0)),
            ExtensionValue::CertificatePolicies(list) => DerValue::Sequence(
                list.iter()
                    .map(|p| {
                        let mut items = vec![DerValue::Oid(p.policy.clone())];
                        items.extend(p.qualifiers.clone());
                        DerValue::Sequence(items)
                    })
                    .collect(),
            ),
            ExtensionValue::PolicyMappings(list) => {
                let any = oids::any_policy();
                if list
                    .iter()
                    .any(|m| m.issuer_domain == any || m.subject_domain == any)
                {
                    return Err(X509Error::InvalidValue("anyPolicy cannot be mapped".into()));
                }
                DerValue::Sequence(
                    list.iter()
                        .map(|m| {
                            DerValue::Sequence(vec![
                                DerValue::Oid(m.issuer_domain.clone()),
                                DerValue::Oid(m.subject_domain.clone()),
                            ])
                        })
                        .collect(),
                )
            }
            ExtensionValue::PolicyConstraints(pc) => {
                let mut items = Vec::new();
                if let Some(n) = pc.require_explicit_policy {
                    items.push(DerValue::implicit(0, der::u64_contents(n)));
                }
                if let Some(n) = pc.inhibit_policy_mapping {
                    items.push(DerValue::implicit(1, der::u64_contents(n)));
                }
                DerValue::Sequence(items)
            }
            ExtensionValue::NameConstraints(nc) => {
                let mut items = Vec::new();
                if !nc.permitted.is_empty() {
                    items.push(DerValue::explicit(0, names(&nc.permitted)));
                }
                if !nc.excluded.is_empty() {
                    items.push(DerValue::explicit(1, names(&nc.excluded)));
                }
                DerValue::Sequence(items)
            }
            ExtensionValue::CrlDistributionPoint(uri) => DerValue::utf8(uri.clone()),
            ExtensionValue::Unknown { value, .. } => return Ok(value.clone()),
        };
        Ok(der::encode(&v)?)
    }

    fn to_der(&self) -> Result<DerValue, X509Error> {
        let mut items = vec![DerValue::Oid(self.oid())];
        if self.critical {
            items.push(DerValue::Boolean(true));
        }
        items.push(DerValue::OctetString(self.value_der()?));
        Ok(DerValue::Sequence(items))
    }

    fn from_der(value: &DerValue) -> Result<Self, X509Error> {
        let mut f = Fields::of(value, "Extension")?;
        let oid = f.oid("extnID")?.clone();
        let critical = f.default_false("critical")?;
        let raw = f.octets("extnValue")?;
        f.finish()?;
        let parsed = parse_extension_value(&oid, raw)?;
        Ok(Extension {
            critical,
            value: parsed,
        })
    }
}

fn parse_extension_value(oid: &Oid, raw: &[u8]) -> Result<ExtensionValue, X509Error> {
    let any = oids::any_policy();
    if *oid == oids::basic_constraints() {
        let v = der::decode_all(raw)?;
        let mut f = Fields::of(&v, "BasicConstraints")?;
        let is_ca = f.default_false("cA")?;
        let path_len = match f.peek() {
            Some(_) => Some(f.u64("pathLenConstraint")?),
            None => None,
        };
        f.finish()?;
        Ok(ExtensionValue::BasicConstraints(BasicConstraints {
            is_ca,
            path_len,
        }))
    } else if *oid == oids::key_usage() {
        let v = der::decode_all(raw)?;
        let bits = v
            .as_bit_string()
            .ok_or_else(|| mismatch("KeyUsage must be a BIT STRING"))?;
        if bits.bytes.len() > 2 {
            return Err(mismatch("KeyUsage: too many bits").into());
        }
        Ok(ExtensionValue::KeyUsage(KeyUsage(bits.to_flags())))
    } else if *oid == oids::certificate_policies() {
        let v = der::decode_all(raw)?;
        let list = v
            .as_sequence()
            .ok_or_else(|| mismatch("CertificatePolicies: expected SEQUENCE"))?;
        let mut out = Vec::with_capacity(list.len());
        for info in list {
            let mut f = Fields::of(info, "PolicyInformation")?;
            let policy = f.oid("policyIdentifier")?.clone();
            let qualifiers = match f.peek() {
                Some(q) => {
                    f.next("qualifiers")?;
                    Some(q.clone())
                }
                None => None,
            };
            f.finish()?;
            out.push(PolicyInformation { policy, qualifiers });
        }
        Ok(ExtensionValue::CertificatePolicies(out))
    } else if *oid == oids::policy_mappings() {
        let v = der::decode_all(raw)?;
        let list = v
            .as_sequence()
            .ok_or_else(|| mismatch("PolicyMappings: expected SEQUENCE"))?;
        let mut out = Vec::with_capacity(list.len());
        for m in list {
            let mut f = Fields::of(m, "PolicyMapping")?;
            let issuer_domain = f.oid("issuerDomainPolicy")?.clone();
            let subject_domain = f.oid("subjectDomainPolicy")?.clone();
            f.finish()?;
            if issuer_domain == any || subject_domain == any {
                return Err(mismatch("PolicyMappings: anyPolicy cannot be mapped").into());
            }
            out.push(PolicyMapping {
                issuer_domain,
                subject_domain,
            });
        }
        Ok(ExtensionValue::PolicyMappings(out))
    } else if *oid == oids::policy_constraints() {
        let v = der::decode_all(raw)?;
        let mut f = Fields::of(&v, "PolicyConstraints")?;
        let skip = |raw: Option<&[u8]>, what: &str| -> Result<Option<u64>, X509Error> {
            raw.map(|r| {
                der::implicit_u64(r)
                    .ok_or_else(|| mismatch(format!("PolicyConstraints: bad {what}")).into())
            })
            .transpose()
        };
        let require_explicit_policy = skip(f.implicit(0), "requireExplicitPolicy")?;
        let inhibit_policy_mapping = skip(f.implicit(1), "inhibitPolicyMapping")?;
        f.finish()?;
        Ok(ExtensionValue::PolicyConstraints(PolicyConstraints {
            require_explicit_policy,
            inhibit_policy_mapping,
        }))
    } else if *oid == oids::name_constraints() {
        let v = der::decode_all(raw)?;
        let mut f = Fields::of(&v, "NameConstraints")?;
        let names = |v: Option<&DerValue>| -> Result<Vec<Name>, X509Error> {
            match v {
                None => Ok(Vec::new()),
                Some(list) => {
                    let items = list
                        .as_sequence()
                        .ok_or_else(|| mismatch("NameConstraints: expected SEQUENCE"))?;
                    if items.is_empty() {
                        return Err(mismatch("NameConstraints: empty subtree list").into());
                    }
                    Ok(items.iter().map(Name::from_der).collect::<Result<_, _>>()?)
                }
            }
        };
        let permitted = names(f.explicit(0))?;
        let excluded = names(f.explicit(1))?;
        f.finish()?;
        Ok(ExtensionValue::NameConstraints(NameConstraints {
            permitted,
            excluded,
        }))
    } else if *oid == oids::crl_distribution_points() {
        let v = der::decode_all(raw)?;
        match v {
            DerValue::Utf8String(uri) => Ok(ExtensionValue::CrlDistributionPoint(uri)),
            _ => Err(mismatch("CRL distribution point must be a UTF8String").into()),
        }
    } else {
        Ok(ExtensionValue::Unknown {
            oid: oid.clone(),
            value: raw.to_vec(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extensions(pub Vec<Extension>);

impl Extensions {
    fn find(&self, oid: &Oid) -> Option<&Extension> {
        self.0.iter().find(|e| e.oid() == *oid)
    }

    pub fn basic_constraints(&self) -> Option<&BasicConstraints> {
        self.0.iter().find_map(|e| match &e.value {
            ExtensionValue::BasicConstraints(v) => Some(v),
            _ => None,
        })
    }

    pub fn key_usage(&self) -> Option<KeyUsage> {
        self.0.iter().find_map(|e| match &e.value {
            ExtensionValue::KeyUsage(v) => Some(*v),
            _ => None,
        })
    }

    pub fn certificate_policies(&self) -> Option<&[PolicyInformation]> {
        self.0.iter().find_map(|e| match &e.value {
            ExtensionValue::CertificatePolicies(v) => Some(v.as_slice()),
            _ => None,
        })
    }

    /// The asserted policy OIDs (empty when the extension is absent).
    pub fn policy_oids(&self) -> BTreeSet<Oid> {
        self.certificate_policies()
            .map(|list| list.iter().map(|p| p.policy.clone()).collect())
            .unwrap_or_default()
    }

    pub fn policy_mappings(&self) -> &[PolicyMapping] {
        self.0
            .iter()
            .find_map(|e| match &e.value {
                ExtensionValue::PolicyMappings(v) => Some(v.as_slice()),
                _ => None,
            })
            .unwrap_or(&[])
    }

    pub fn policy_constraints(&self) -> Option<&PolicyConstraints> {
        self.0.iter().find_map(|e| match &e.value {
            ExtensionValue::PolicyConstraints(v) => Some(v),
            _ => None,
        })
    }

    pub fn name_constraints(&self) -> Option<&NameConstraints> {
        self.0.iter().find_map(|e| match &e.value {
            ExtensionValue::NameConstraints(v) => Some(v),
            _ => None,
        })
    }

    pub fn crl_distribution_point(&self) -> Option<&str> {
        self.0.iter().find_map(|e| match &e.value {
            ExtensionValue::CrlDistributionPoint(v) => Some(v.as_str()),
            _ => None,
        })
    }

    pub fn has_unknown_critical(&self) -> bool {
        self.0
            .iter()
            .any(|e| e.critical && matches!(e.value, ExtensionValue::Unknown { .. }))
    }

    fn to_der(&self) -> Result<DerValue, X509Error> {
        Ok(DerValue::Sequence(
            self.0
                .iter()
                .map(Extension::to_der)
                .collect::<Result<_, _>>()?,
        ))
    }

    fn from_der(value: &DerValue) -> Result<Self, X509Error> {
        let list = value
            .as_sequence()
            .ok_or_else(|| mismatch("Extensions: expected SEQUENCE"))?;
        let exts = list
            .iter()
            .map(Extension::from_der)
            .collect::<Result<Vec<_>, _>>()?;
        for (i, e) in exts.iter().enumerate() {
            if exts[..i].iter().any(|p| p.oid() == e.oid()) {
                return Err(mismatch(format!("duplicate extension {}", e.oid())).into());
            }
        }
        Ok(Extensions(exts))
    }

    pub fn contains(&self, oid: &Oid) -> bool {
        self.find(oid).is_some()
    }
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validity {
    pub not_before: GeneralizedTime,
    pub not_after: GeneralizedTime,
}

impl Validity {
    pub fn contains(&self, at: GeneralizedTime) -> bool {
        self.not_before <= at && at <= self.not_after
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectPublicKey {
    pub algorithm: Oid,
    pub key: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TbsCertificate {
    pub serial: u64,
    pub signature_alg: Oid,
    pub issuer: Name,
    pub validity: Validity,
    pub subject: Name,
    pub public_key: SubjectPublicKey,
    pub extensions: Extensions,
}

/// Version marker for v3 certificates as carried in the `[0]` field.
const V3_MARKER: i64 = 2;

impl TbsCertificate {
    pub fn to_der(&self) -> Result<DerValue, X509Error> {
        if self.validity.not_before > self.validity.not_after {
            return Err(X509Error::InvalidValue("notBefore after notAfter".into()));
        }
        Ok(DerValue::Sequence(vec![
            DerValue::explicit(0, DerValue::int(V3_MARKER)),
            DerValue::uint(self.serial),
            DerValue::Sequence(vec![DerValue::Oid(self.signature_alg.clone())]),
            self.issuer.to_der(),
            DerValue::Sequence(vec![
                DerValue::GeneralizedTime(self.validity.not_before),
                DerValue::GeneralizedTime(self.validity.not_after),
            ]),
            self.subject.to_der(),
            DerValue::Sequence(vec![
                DerValue::Sequence(vec![DerValue::Oid(self.public_key.algorithm.clone())]),
                DerValue::BitString(BitString::from_bytes(self.public_key.key.clone())),
            ]),
            DerValue::explicit(3, self.extensions.to_der()?),
        ]))
    }

    fn from_der(value: &DerValue) -> Result<Self, X509Error> {
        let mut f = Fields::of(value, "TBSCertificate")?;
        let version = f
            .explicit(0)
            .ok_or_else(|| mismatch("TBSCertificate: missing version"))?
            .as_i64()
            .ok_or_else(|| mismatch("TBSCertificate: version must be an INTEGER"))?;
        if version != V3_MARKER {
            return Err(X509Error::UnsupportedVersion(version));
        }
        let serial = f.u64("serialNumber")?;
        let signature_alg = AlgorithmId::parse_oid(f.next("signature")?)?;
        let issuer = Name::from_der(f.next("issuer")?)?;
        let mut v = Fields::of(f.next("validity")?, "Validity")?;
        let validity = Validity {
            not_before: v.time("notBefore")?,
            not_after: v.time("notAfter")?,
        };
        v.finish()?;
        if validity.not_before > validity.not_after {
            return Err(X509Error::InvalidValue("notBefore after notAfter".into()));
        }
        let subject = Name::from_der(f.next("subject")?)?;
        let mut k = Fields::of(f.next("subjectPublicKeyInfo")?, "SubjectPublicKeyInfo")?;
        let algorithm = AlgorithmId::parse_oid(k.next("algorithm")?)?;
        let bits = k
            .next("subjectPublicKey")?
            .as_bit_string()
            .ok_or_else(|| mismatch("subjectPublicKey must be a BIT STRING"))?;
        if bits.unused_bits != 0 {
            return Err(mismatch("subjectPublicKey must be whole octets").into());
        }
        k.finish()?;
        let extensions = match f.explicit(3) {
            Some(e) => Extensions::from_der(e)?,
            None => return Err(mismatch("TBSCertificate: missing extensions").into()),
        };
        f.finish()?;
        Ok(Self {
            serial,
            signature_alg,
            issuer,
            validity,
            subject,
            public_key: SubjectPublicKey {
                algorithm,
                key: bits.bytes.clone(),
            },
            extensions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub tbs: TbsCertificate,
    pub signature_alg: Oid,
    pub signature: Vec<u8>,
}

impl Certificate {
    /// Signs `tbs` with `issuer_key`; the signature algorithm fields are set from the key.
    pub fn sign(mut tbs: TbsCertificate, issuer_key: &KeyPair) -> Result<Self, X509Error> {
        tbs.signature_alg = issuer_key.algorithm.oid.clone();
        let tbs_der = der::encode(&tbs.to_der()?)?;
        let signature = crypto::sign(issuer_key, &tbs_der)?;
        Ok(Self {
            signature_alg: tbs.signature_alg.clone(),
            tbs,
            signature,
        })
    }

    pub fn version(&self) -> u8 {
        3
    }

    pub fn serial(&self) -> u64 {
        self.tbs.serial
    }

    pub fn subject(&self) -> &Name {
        &self.tbs.subject
    }

    pub fn issuer(&self) -> &Name {
        &self.tbs.issuer
    }

    pub fn extensions(&self) -> &Extensions {
        &self.tbs.extensions
    }

    pub fn public_key(&self) -> &SubjectPublicKey {
        &self.tbs.public_key
    }

    pub fn is_self_issued(&self) -> bool {
        self.tbs.subject == self.tbs.issuer
    }

    pub fn has_unknown_critical(&self) -> bool {
        self.tbs.extensions.has_unknown_critical()
    }

    pub fn tbs_der(&self) -> Result<Vec<u8>, X509Error> {
        Ok(der::encode(&self.tbs.to_der()?)?)
    }

    pub fn to_der_value(&self) -> Result<DerValue, X509Error> {
        Ok(DerValue::Sequence(vec![
            self.tbs.to_der()?,
            DerValue::Sequence(vec![DerValue::Oid(self.signature_alg.clone())]),
            DerValue::BitString(BitString::from_bytes(self.signature.clone())),
        ]))
    }

    pub fn to_der(&self) -> Result<Vec<u8>, X509Error> {
        Ok(der::encode(&self.to_der_value()?)?)
    }

    pub fn from_der_value(value: &DerValue) -> Result<Self, X509Error> {
        let mut f = Fields::of(value, "Certificate")?;
        let tbs = TbsCertificate::from_der(f.next("tbsCertificate")?)?;
        let signature_alg = AlgorithmId::parse_oid(f.next("signatureAlgorithm")?)?;
        let sig = f
            .next("signatureValue")?
            .as_bit_string()
            .ok_or_else(|| mismatch("signatureValue must be a BIT STRING"))?;
        if sig.unused_bits != 0 {
            return Err(mismatch("signatureValue must be whole octets").into());
        }
        f.finish()?;
        Ok(Self {
            tbs,
            signature_alg,
            signature: sig.bytes.clone(),
        })
    }

    /// Parses a certificate. Any input that would not re-encode byte-identically is rejected.
    pub fn from_der(bytes: &[u8]) -> Result<Self, X509Error> {
        let value = der::decode_all(bytes)?;
        let cert = Self::from_der_value(&value)?;
        if cert.to_der()? != bytes {
            return Err(X509Error::StructureMismatch(
                "certificate does not re-encode identically".into(),
            ));
        }
        Ok(cert)
    }

    /// SHA-256 over the full certificate DER.
    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(crypto::sha256(
            &self.to_der().expect("parsed or signed certificates encode"),
        ))
    }

    /// Verifies this certificate's signature under an issuer public key.
    pub fn check_signature(&self, issuer_key: &SubjectPublicKey) -> Result<bool, X509Error> {
        if self.signature_alg != self.tbs.signature_alg {
            return Ok(false);
        }
        let alg = AlgorithmId::resolve(&self.signature_alg)?;
        AlgorithmId::resolve(&issuer_key.algorithm)?;
        Ok(crypto::verify(
            &issuer_key.key,
            &alg,
            &self.tbs_der()?,
            &self.signature,
        )?)
    }
}

pub fn parse_certificate(bytes: &[u8]) -> Result<Certificate, X509Error> {
    Certificate::from_der(bytes)
}

pub fn encode_certificate(cert: &Certificate) -> Result<Vec<u8>, X509Error> {
    cert.to_der()
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s.trim()).ok()?;
        Some(Self(bytes.try_into().ok()?))
    }

    pub fn from_slice(b: &[u8]) -> Option<Self> {
        Some(Self(b.try_into().ok()?))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", &self.to_hex()[..16])
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

// ---------------------------------------------------------------------------
// CRLs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReasonCode {
    Unspecified,
    KeyCompromise,
    CaCompromise,
    Superseded,
}

impl ReasonCode {
    pub fn code(self) -> i64 {
        match self {
            ReasonCode::Unspecified => 0,
            ReasonCode::KeyCompromise => 1,
            ReasonCode::CaCompromise => 2,
            ReasonCode::Superseded => 4,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(ReasonCode::Unspecified),
            1 => Some(ReasonCode::KeyCompromise),
            2 => Some(ReasonCode::CaCompromise),
            4 => Some(ReasonCode::Superseded),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReasonCode::Unspecified => "unspecified",
            ReasonCode::KeyCompromise => "keyCompromise",
            ReasonCode::CaCompromise => "caCompromise",
            ReasonCode::Superseded => "superseded",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReasonCode {
    type Err = X509Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "unspecified" => Ok(ReasonCode::Unspecified),
            "keycompromise" => Ok(ReasonCode::KeyCompromise),
            "cacompromise" => Ok(ReasonCode::CaCompromise),
            "superseded" => Ok(ReasonCode::Superseded),
            _ => Err(X509Error::InvalidValue(format!(
                "unknown revocation reason {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevokedEntry {
    pub serial: u64,
    pub date: GeneralizedTime,
    pub reason: ReasonCode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TbsCrl {
    pub signature_alg: Oid,
    pub issuer: Name,
    pub this_update: GeneralizedTime,
    pub next_update: GeneralizedTime,
    /// Strictly increasing by serial.
    pub revoked: Vec<RevokedEntry>,
}

const CRL_V2_MARKER: i64 = 1;

impl TbsCrl {
    fn to_der(&self) -> Result<DerValue, X509Error> {
        if self.this_update > self.next_update {
            return Err(X509Error::InvalidValue(
                "thisUpdate after nextUpdate".into(),
            ));
        }
        if self.revoked.windows(2).any(|w| w[0].serial >= w[1].serial) {
            return Err(X509Error::Der(DerError::InvalidValue(
                "revoked serials must be strictly increasing".into(),
            )));
        }
        Ok(DerValue::Sequence(vec![
            DerValue::int(CRL_V2_MARKER),
            DerValue::Sequence(vec![DerValue::Oid(self.signature_alg.clone())]),
            self.issuer.to_der(),
            DerValue::GeneralizedTime(self.this_update),
            DerValue::GeneralizedTime(self.next_update),
            DerValue::Sequence(
                self.revoked
                    .iter()
                    .map(|r| {
                        DerValue::Sequence(vec![
                            DerValue::uint(r.serial),
                            DerValue::GeneralizedTime(r.date),
                            DerValue::int(r.reason.code()),
                        ])
                    })
                    .collect(),
            ),
        ]))
    }

    fn from_der(value: &DerValue) -> Result<Self, X509Error> {
        let mut f = Fields::of(value, "TBSCertList")?;
        let version = f.i64("version")?;
        if version != CRL_V2_MARKER {
            return Err(X509Error::UnsupportedVersion(version));
        }
        let signature_alg = AlgorithmId::parse_oid(f.next("signature")?)?;
        let issuer = Name::from_der(f.next("issuer")?)?;
        let this_update = f.time("thisUpdate")?;
        let next_update = f.time("nextUpdate")?;
        let entries = f.sequence("revokedCertificates")?;
        f.finish()?;
        let mut revoked = Vec::with_capacity(entries.len());
        for e in entries {
            let mut ef = Fields::of(e, "RevokedCertificate")?;
            let serial = ef.u64("userCertificate")?;
            let date = ef.time("revocationDate")?;
            let code = ef.i64("reasonCode")?;
            ef.finish()?;
            let reason = ReasonCode::from_code(code)
                .ok_or_else(|| mismatch(format!("unknown reason code {code}")))?;
            revoked.push(RevokedEntry {
                serial,
                date,
                reason,
            });
        }
        let tbs = TbsCrl {
            signature_alg,
            issuer,
            this_update,
            next_update,
            revoked,
        };
        if tbs.this_update > tbs.next_update {
            return Err(X509Error::InvalidValue(
                "thisUpdate after nextUpdate".into(),
            ));
        }
        if tbs.revoked.windows(2).any(|w| w[0].serial >= w[1].serial) {
            return Err(X509Error::InvalidValue(
                "revoked serials not strictly increasing".into(),
            ));
        }
        Ok(tbs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crl {
    pub tbs: TbsCrl,
    pub signature_alg: Oid,
    pub signature: Vec<u8>,
}

impl Crl {
    pub fn sign(mut tbs: TbsCrl, issuer_key: &KeyPair) -> Result<Self, X509Error> {
        tbs.signature_alg = issuer_key.algorithm.oid.clone();
        let tbs_der = der::encode(&tbs.to_der()?)?;
        let signature = crypto::sign(issuer_key, &tbs_der)?;
        Ok(Self {
            signature_alg: tbs.signature_alg.clone(),
            tbs,
            signature,
        })
    }

    pub fn issuer(&self) -> &Name {
        &self.tbs.issuer
    }

    pub fn entry(&self, serial: u64) -> Option<&RevokedEntry> {
        self.tbs
            .revoked
            .binary_search_by_key(&serial, |e| e.serial)
            .ok()
            .map(|i| &self.tbs.revoked[i])
    }

    pub fn to_der_value(&self) -> Result<DerValue, X509Error> {
        Ok(DerValue::Sequence(vec![
            self.tbs.to_der()?,
            DerValue::Sequence(vec![DerValue::Oid(self.signature_alg.clone())]),
            DerValue::BitString(BitString::from_bytes(self.signature.clone())),
        ]))
    }

    pub fn to_der(&self) -> Result<Vec<u8>, X509Error> {
        Ok(der::encode(&self.to_der_value()?)?)
    }

    pub fn from_der_value(value: &DerValue) -> Result<Self, X509Error> {
        let mut f = Fields::of(value, "CertificateList")?;
        let tbs = TbsCrl::from_der(f.next("tbsCertList")?)?;
        let signature_alg = AlgorithmId::parse_oid(f.next("signatureAlgorithm")?)?;
        let sig = f
            .next("signatureValue")?
            .as_bit_string()
            .ok_or_else(|| mismatch("signatureValue must be a BIT STRING"))?;
        if sig.unused_bits != 0 {
            return Err(mismatch("signatureValue must be whole octets").into());
        }
        f.finish()?;
        Ok(Self {
            tbs,
            signature_alg,
            signature: sig.bytes.clone(),
        })
    }

    pub fn from_der(bytes: &[u8]) -> Result<Self, X509Error> {
        let crl = Self::from_der_value(&der::decode_all(bytes)?)?;
        if crl.to_der()? != bytes {
            return Err(X509Error::StructureMismatch(
                "CRL does not re-encode identically".into(),
            ));
        }
        Ok(crl)
    }

    pub fn check_signature(&self, issuer_key: &SubjectPublicKey) -> Result<bool, X509Error> {
        if self.signature_alg != self.tbs.signature_alg {
            return Ok(false);
        }
        let alg = AlgorithmId::resolve(&self.signature_alg)?;
        let tbs = der::encode(&self.tbs.to_der()?)?;
        Ok(crypto::verify(
            &issuer_key.key,
            &alg,
            &tbs,
            &self.signature,
        )?)
    }
}

pub fn parse_crl(bytes: &[u8]) -> Result<Crl, X509Error> {
    Crl::from_der(bytes)
}

pub fn encode_crl(crl: &Crl) -> Result<Vec<u8>, X509Error> {
    crl.to_der()
}
