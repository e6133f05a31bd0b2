//! Deterministic test PKI generator.
//!
//! A topology spec (TOML, see `docs/forge-spec.md`) lists entities, issuance
//! edges and revocations. [`forge`] turns it into certificates, CRLs, keys, an
//! anchor manifest and a file manifest. Keys derive from `seed` and the entity
//! label, and Ed25519 signatures are deterministic, so equal specs give
//! byte-identical trees.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use certval_core::anchors::{format_manifest, AnchorEntry, ANY_USAGE};
use certval_core::crypto::{generate, AlgorithmId, KeyPair};
use certval_core::der::{DerValue, Oid};
use certval_core::pcm::CertGraph;
use certval_core::x509::{
    oids, BasicConstraints, Certificate, Crl, Extension, ExtensionValue, Extensions, KeyUsage,
    NameConstraints, PolicyConstraints, PolicyInformation, PolicyMapping, ReasonCode, RevokedEntry,
    SubjectPublicKey, TbsCertificate, TbsCrl, Validity,
};
use certval_core::{GeneralizedTime, Name};
use serde::Deserialize;

pub mod scenarios;

/// Test policy identifiers used by the built-in scenarios.
pub mod test_policies {
    use certval_core::Oid;

    fn arc(n: u64) -> Oid {
        Oid::from_arcs(&[1, 3, 6, 1, 4, 1, 57264, 3, n])
    }
    pub fn p1() -> Oid {
        arc(1)
    }
    pub fn p2() -> Oid {
        arc(2)
    }
    pub fn mail() -> Oid {
        arc(10)
    }
}

/// Extension OID emitted for `critical-unknown = true`.
pub fn unknown_extension_oid() -> Oid {
    Oid::from_arcs(&[1, 3, 6, 1, 4, 1, 57264, 9, 1])
}

pub const DEFAULT_CRL_DAYS: i64 = 90;
pub const DEFAULT_REVOCATION_OFFSET_DAYS: i64 = 10;

pub fn default_epoch() -> GeneralizedTime {
    GeneralizedTime::from_ymd_hms(2025, 1, 1, 0, 0, 0).expect("valid date")
}

/// Validation time the scenarios are designed for.
pub fn scenario_validation_time() -> GeneralizedTime {
    default_epoch().plus_days(30)
}

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("spec: {0}")]
    Spec(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

fn spec_err(msg: impl Into<String>) -> ForgeError {
    ForgeError::Spec(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum EntityKind {
    #[serde(rename = "root", alias = "rootCa")]
    Root,
    #[serde(rename = "sub", alias = "subCa")]
    Sub,
    #[serde(rename = "ee", alias = "endEntity")]
    EndEntity,
}

impl EntityKind {
    pub fn is_ca(self) -> bool {
        !matches!(self, EntityKind::EndEntity)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EntitySpec {
    pub label: String,
    pub kind: EntityKind,
    /// Defaults to `O=<organization>,CN=<label>`.
    pub subject: Option<String>,
    /// Policy OIDs or aliases; `any` is anyPolicy. Absent: no certificatePolicies extension.
    pub policies: Option<Vec<String>>,
    #[serde(default)]
    pub mappings: Vec<[String; 2]>,
    pub require_explicit: Option<u64>,
    pub inhibit_mapping: Option<u64>,
    pub path_len: Option<u64>,
    /// Overrides basicConstraints cA (defaults to the kind).
    pub ca: Option<bool>,
    /// `false` omits basicConstraints entirely.
    #[serde(default = "yes")]
    pub basic_constraints: bool,
    /// Named bits: digitalSignature, keyCertSign, cRLSign. Absent: kind default; empty: omitted.
    pub key_usage: Option<Vec<String>>,
    #[serde(default)]
    pub permitted: Vec<String>,
    #[serde(default)]
    pub excluded: Vec<String>,
    pub not_before: Option<String>,
    pub not_after: Option<String>,
    pub crl_dp: Option<String>,
    #[serde(default)]
    pub critical_unknown: bool,
    /// Listed in anchors.txt. Defaults to true for roots.
    pub anchor: Option<bool>,
    /// Anchor usages. Defaults to `any`.
    pub usages: Option<Vec<String>>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EdgeSpec {
    pub issuer: String,
    pub subject: String,
    #[serde(default)]
    pub corrupt_signature: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RevocationSpec {
    pub issuer: String,
    /// Label of the subject of the `issuer -> subject` edge being revoked.
    pub subject: String,
    pub date: Option<String>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TopologySpec {
    pub seed: u64,
    /// Organization in default subject names. Defaults to `Test`.
    pub organization: Option<String>,
    pub epoch: Option<String>,
    pub crl_days: Option<i64>,
    /// Alias table, e.g. `P1 = "1.3.6.1.4.1.57264.3.1"`.
    #[serde(default)]
    pub policies: BTreeMap<String, String>,
    #[serde(default, rename = "entity")]
    pub entities: Vec<EntitySpec>,
    #[serde(default, rename = "edge")]
    pub edges: Vec<EdgeSpec>,
    #[serde(default, rename = "revoke")]
    pub revocations: Vec<RevocationSpec>,
}

impl TopologySpec {
    pub fn parse(text: &str) -> Result<Self, ForgeError> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Clone)]
pub struct ForgedCert {
    pub issuer: String,
    pub subject: String,
    pub serial: u64,
    /// Relative to the output root.
    pub file: PathBuf,
    pub cert: Certificate,
}

#[derive(Debug, Clone)]
pub struct ForgedCrl {
    pub issuer: String,
    pub file: PathBuf,
    pub crl: Crl,
}

#[derive(Debug, Clone)]
pub struct Forged {
    pub certs: Vec<ForgedCert>,
    pub crls: Vec<ForgedCrl>,
    pub keys: BTreeMap<String, KeyPair>,
    pub anchors: Vec<AnchorEntry>,
}

impl Forged {
    pub fn cert(&self, issuer: &str, subject: &str) -> Option<&Certificate> {
        self.certs
            .iter()
            .find(|c| c.issuer == issuer && c.subject == subject)
            .map(|c| &c.cert)
    }

    /// Certificates for which `label` is the subject.
    pub fn certs_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a ForgedCert> + 'a {
        self.certs.iter().filter(move |c| c.subject == label)
    }

    pub fn anchor_certs(&self) -> Vec<&Certificate> {
        self.anchors
            .iter()
            .filter_map(|a| {
                self.certs
                    .iter()
                    .find(|c| c.cert.fingerprint() == a.fingerprint)
            })
            .map(|c| &c.cert)
            .collect()
    }

    /// Every certificate, with the anchors marked.
    pub fn graph(&self) -> CertGraph {
        let mut g = CertGraph::new();
        for c in &self.certs {
            g.insert(c.cert.clone());
        }
        for a in &self.anchors {
            g.add_anchor(a.fingerprint)
                .expect("anchors are forged certificates");
        }
        g
    }

    pub fn crl_list(&self) -> Vec<Arc<Crl>> {
        self.crls.iter().map(|c| Arc::new(c.crl.clone())).collect()
    }

    pub fn crl_of(&self, issuer: &str) -> Option<&Crl> {
        self.crls
            .iter()
            .find(|c| c.issuer == issuer)
            .map(|c| &c.crl)
    }

    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for c in &self.certs {
            out.push_str(&format!(
                "cert {} {} serial={} issuer={} subject={}\n",
                c.file.display(),
                c.cert.fingerprint(),
                c.serial,
                c.issuer,
                c.subject
            ));
        }
        for c in &self.crls {
            out.push_str(&format!(
                "crl {} issuer={} entries={}\n",
                c.file.display(),
                c.issuer,
                c.crl.tbs.revoked.len()
            ));
        }
        for label in self.keys.keys() {
            out.push_str(&format!("key keys/{label}.key\n"));
        }
        out
    }

    /// Writes `certs/`, `crls/`, `keys/`, `anchors.txt` and `manifest.txt` under `out`.
    pub fn write(&self, out: &Path) -> Result<(), ForgeError> {
        self.write_files(out, "")?;
        write_file(
            &out.join("anchors.txt"),
            format_manifest(&self.anchors).as_bytes(),
        )?;
        write_file(&out.join("manifest.txt"), self.manifest().as_bytes())
    }

    /// Writes certificates, CRLs and keys with `prefix` prepended to every file name.
    pub fn write_files(&self, out: &Path, prefix: &str) -> Result<(), ForgeError> {
        for dir in ["certs", "crls", "keys"] {
            let d = out.join(dir);
            fs::create_dir_all(&d).map_err(|source| ForgeError::Io {
                path: d.clone(),
                source,
            })?;
        }
        let place = |rel: &Path| {
            let name = rel.file_name().expect("file name").to_string_lossy();
            out.join(rel.parent().unwrap_or(Path::new("")))
                .join(format!("{prefix}{name}"))
        };
        for c in &self.certs {
            write_file(
                &place(&c.file),
                &c.cert.to_der().map_err(|e| spec_err(e.to_string()))?,
            )?;
        }
        for c in &self.crls {
            write_file(
                &place(&c.file),
                &c.crl.to_der().map_err(|e| spec_err(e.to_string()))?,
            )?;
        }
        for (label, key) in &self.keys {
            write_file(
                &place(Path::new(&format!("keys/{label}.key"))),
                &key.to_key_file(),
            )?;
        }
        Ok(())
    }

    /// Every certificate verifies under its issuer's key unless it was deliberately corrupted.
    pub fn self_check(&self, spec: &TopologySpec) -> Result<(), ForgeError> {
        let corrupted: BTreeSet<(&str, &str)> = spec
            .edges
            .iter()
            .filter(|e| e.corrupt_signature)
            .map(|e| (e.issuer.as_str(), e.subject.as_str()))
            .collect();
        for c in &self.certs {
            let key = &self.keys[&c.issuer];
            let spk = SubjectPublicKey {
                algorithm: key.algorithm.oid.clone(),
                key: key.public_key.clone(),
            };
            let ok = c.cert.check_signature(&spk).unwrap_or(false);
            let expect = !corrupted.contains(&(c.issuer.as_str(), c.subject.as_str()));
            if ok != expect {
                return Err(ForgeError::SelfCheck(format!(
                    "{}: signature check gave {ok}",
                    c.file.display()
                )));
            }
            if Certificate::from_der(
                &c.cert
                    .to_der()
                    .map_err(|e| ForgeError::SelfCheck(e.to_string()))?,
            )
            .is_err()
            {
                return Err(ForgeError::SelfCheck(format!(
                    "{} does not re-parse",
                    c.file.display()
                )));
            }
        }
        for c in &self.crls {
            let key = &self.keys[&c.issuer];
            let spk = SubjectPublicKey {
                algorithm: key.algorithm.oid.clone(),
                key: key.public_key.clone(),
            };
            if !c.crl.check_signature(&spk).unwrap_or(false) {
                return Err(ForgeError::SelfCheck(format!(
                    "{} does not verify",
                    c.file.display()
                )));
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ForgeError> {
    fs::write(path, bytes).map_err(|source| ForgeError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_time(s: &str, what: &str) -> Result<GeneralizedTime, ForgeError> {
    s.parse().map_err(|e| spec_err(format!("{what}: {e}")))
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

struct Resolved<'a> {
    spec: &'a EntitySpec,
    name: Name,
    key: KeyPair,
    extensions: Extensions,
    validity: Validity,
}

fn resolve_policy(spec: &TopologySpec, p: &str) -> Result<Oid, ForgeError> {
    if p.eq_ignore_ascii_case("any") {
        return Ok(oids::any_policy());
    }
    let text = spec.policies.get(p).map(String::as_str).unwrap_or(p);
    text.parse()
        .map_err(|_| spec_err(format!("unknown policy {p:?}")))
}

fn key_usage_bits(names: &[String]) -> Result<u16, ForgeError> {
    names.iter().try_fold(0u16, |acc, n| {
        let bit = match n.to_ascii_lowercase().as_str() {
            "digitalsignature" => KeyUsage::DIGITAL_SIGNATURE,
            "keycertsign" => KeyUsage::KEY_CERT_SIGN,
            "crlsign" => KeyUsage::CRL_SIGN,
            other => return Err(spec_err(format!("unknown key usage {other:?}"))),
        };
        Ok(acc | bit)
    })
}

fn parse_name(s: &str) -> Result<Name, ForgeError> {
    s.parse().map_err(|e| spec_err(format!("name {s:?}: {e}")))
}

fn entity_extensions(spec: &TopologySpec, e: &EntitySpec) -> Result<Extensions, ForgeError> {
    let mut ext = Vec::new();
    if e.basic_constraints && (e.kind.is_ca() || e.ca.is_some() || e.path_len.is_some()) {
        let is_ca = e.ca.unwrap_or(e.kind.is_ca());
        ext.push(Extension::new(
            true,
            ExtensionValue::BasicConstraints(BasicConstraints {
                is_ca,
                path_len: e.path_len,
            }),
        ));
    }
    let ku = match &e.key_usage {
        Some(names) => key_usage_bits(names)?,
        None if e.kind.is_ca() => KeyUsage::KEY_CERT_SIGN | KeyUsage::CRL_SIGN,
        None => KeyUsage::DIGITAL_SIGNATURE,
    };
    if ku != 0 {
        ext.push(Extension::new(true, ExtensionValue::KeyUsage(KeyUsage(ku))));
    }
    if let Some(policies) = &e.policies {
        let infos = policies
            .iter()
            .map(|p| {
                resolve_policy(spec, p).map(|policy| PolicyInformation {
                    policy,
                    qualifiers: None,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        ext.push(Extension::new(
            false,
            ExtensionValue::CertificatePolicies(infos),
        ));
    }
    if !e.mappings.is_empty() {
        let maps = e
            .mappings
            .iter()
            .map(|[a, b]| {
                Ok(PolicyMapping {
                    issuer_domain: resolve_policy(spec, a)?,
                    subject_domain: resolve_policy(spec, b)?,
                })
            })
            .collect::<Result<Vec<_>, ForgeError>>()?;
        ext.push(Extension::new(true, ExtensionValue::PolicyMappings(maps)));
    }
    if e.require_explicit.is_some() || e.inhibit_mapping.is_some() {
        ext.push(Extension::new(
            true,
            ExtensionValue::PolicyConstraints(PolicyConstraints {
                require_explicit_policy: e.require_explicit,
                inhibit_policy_mapping: e.inhibit_mapping,
            }),
        ));
    }
    if !e.permitted.is_empty() || !e.excluded.is_empty() {
        let permitted = e
            .permitted
            .iter()
            .map(|n| parse_name(n))
            .collect::<Result<Vec<_>, _>>()?;
        let excluded = e
            .excluded
            .iter()
            .map(|n| parse_name(n))
            .collect::<Result<Vec<_>, _>>()?;
        ext.push(Extension::new(
            true,
            ExtensionValue::NameConstraints(NameConstraints {
                permitted,
                excluded,
            }),
        ));
    }
    if let Some(dp) = &e.crl_dp {
        ext.push(Extension::new(
            false,
            ExtensionValue::CrlDistributionPoint(dp.clone()),
        ));
    }
    if e.critical_unknown {
        let value = certval_core::der::encode(&DerValue::Null).expect("NULL encodes");
        ext.push(Extension::new(
            true,
            ExtensionValue::Unknown {
                oid: unknown_extension_oid(),
                value,
            },
        ));
    }
    Ok(Extensions(ext))
}

/// Builds the PKI in memory. Root entities get a self-signed certificate
/// (serial 1) before any edge; edges then receive serials sequentially per issuer.
pub fn forge(spec: &TopologySpec) -> Result<Forged, ForgeError> {
    let epoch = match &spec.epoch {
        Some(s) => parse_time(s, "epoch")?,
        None => default_epoch(),
    };
    let alg = AlgorithmId::ed25519();

    let mut entities: BTreeMap<&str, Resolved> = BTreeMap::new();
    for e in &spec.entities {
        if !valid_label(&e.label) {
            return Err(spec_err(format!("invalid label {:?}", e.label)));
        }
        if entities.contains_key(e.label.as_str()) {
            return Err(spec_err(format!("duplicate label {:?}", e.label)));
        }
        let org = spec.organization.as_deref().unwrap_or("Test");
        let name = parse_name(
            e.subject
                .as_deref()
                .unwrap_or(&format!("O={org},CN={}", e.label)),
        )?;
        let key = generate(
            &alg,
            Some(format!("pki-forge/{}/{}", spec.seed, e.label).as_bytes()),
        )
        .map_err(|err| spec_err(err.to_string()))?;
        let not_before = e
            .not_before
            .as_deref()
            .map(|s| parse_time(s, "not-before"))
            .transpose()?
            .unwrap_or(epoch);
        let default_after = if e.kind.is_ca() {
            epoch.plus_years(10)
        } else {
            epoch.plus_years(1)
        };
        let not_after = e
            .not_after
            .as_deref()
            .map(|s| parse_time(s, "not-after"))
            .transpose()?
            .unwrap_or(default_after);
        let extensions = entity_extensions(spec, e)?;
        entities.insert(
            &e.label,
            Resolved {
                spec: e,
                name,
                key,
                extensions,
                validity: Validity {
                    not_before,
                    not_after,
                },
            },
        );
    }

    for edge in &spec.edges {
        for label in [&edge.issuer, &edge.subject] {
            if !entities.contains_key(label.as_str()) {
                return Err(spec_err(format!("edge refers to unknown label {label:?}")));
            }
        }
        if edge.issuer == edge.subject {
            return Err(spec_err(format!(
                "edge {0} -> {0}: self-issuance is implicit for roots",
                edge.issuer
            )));
        }
    }
    let mut seen_edges = BTreeSet::new();
    for edge in &spec.edges {
        if !seen_edges.insert((&edge.issuer, &edge.subject)) {
            return Err(spec_err(format!(
                "duplicate edge {} -> {}",
                edge.issuer, edge.subject
            )));
        }
    }
    for e in &spec.entities {
        if e.kind == EntityKind::EndEntity && !spec.edges.iter().any(|x| x.subject == e.label) {
            return Err(spec_err(format!("end entity {:?} has no issuer", e.label)));
        }
        if e.kind == EntityKind::EndEntity && spec.edges.iter().any(|x| x.issuer == e.label) {
            return Err(spec_err(format!("end entity {:?} cannot issue", e.label)));
        }
    }

    let mut serials: BTreeMap<String, u64> = BTreeMap::new();
    let mut certs = Vec::new();
    let mut issue = |issuer: &Resolved,
                     subject: &Resolved,
                     corrupt: bool,
                     file: PathBuf|
     -> Result<(), ForgeError> {
        let serial = serials.entry(issuer.spec.label.clone()).or_insert(0);
        *serial += 1;
        let tbs = TbsCertificate {
            serial: *serial,
            signature_alg: issuer.key.algorithm.oid.clone(),
            issuer: issuer.name.clone(),
            validity: subject.validity,
            subject: subject.name.clone(),
            public_key: SubjectPublicKey {
                algorithm: subject.key.algorithm.oid.clone(),
                key: subject.key.public_key.clone(),
            },
            extensions: subject.extensions.clone(),
        };
        let mut cert = Certificate::sign(tbs, &issuer.key).map_err(|e| spec_err(e.to_string()))?;
        if corrupt {
            let last = cert.signature.len() - 1;
            cert.signature[last] ^= 0x01;
        }
        certs.push(ForgedCert {
            issuer: issuer.spec.label.clone(),
            subject: subject.spec.label.clone(),
            serial: *serial,
            file,
            cert,
        });
        Ok(())
    };

    for e in spec.entities.iter().filter(|e| e.kind == EntityKind::Root) {
        let r = &entities[e.label.as_str()];
        issue(r, r, false, PathBuf::from(format!("certs/{}.der", e.label)))?;
    }
    for edge in &spec.edges {
        let (i, s) = (
            &entities[edge.issuer.as_str()],
            &entities[edge.subject.as_str()],
        );
        issue(
            i,
            s,
            edge.corrupt_signature,
            PathBuf::from(format!("certs/{}-by-{}.der", edge.subject, edge.issuer)),
        )?;
    }

    let crl_days = spec.crl_days.unwrap_or(DEFAULT_CRL_DAYS);
    let mut revoked: BTreeMap<&str, Vec<RevokedEntry>> = BTreeMap::new();
    for r in &spec.revocations {
        let cert = certs
            .iter()
            .find(|c| c.issuer == r.issuer && c.subject == r.subject)
            .ok_or_else(|| {
                spec_err(format!(
                    "revocation of unknown edge {} -> {}",
                    r.issuer, r.subject
                ))
            })?;
        let date = match &r.date {
            Some(d) => parse_time(d, "revocation date")?,
            None => epoch.plus_days(DEFAULT_REVOCATION_OFFSET_DAYS),
        };
        let reason = match &r.reason {
            Some(s) => s
                .parse::<ReasonCode>()
                .map_err(|e| spec_err(e.to_string()))?,
            None => ReasonCode::Unspecified,
        };
        let list = revoked.entry(r.issuer.as_str()).or_default();
        if list.iter().any(|x| x.serial == cert.serial) {
            return Err(spec_err(format!(
                "duplicate revocation of {} -> {}",
                r.issuer, r.subject
            )));
        }
        list.push(RevokedEntry {
            serial: cert.serial,
            date,
            reason,
        });
    }

    let mut crls = Vec::new();
    for e in spec.entities.iter().filter(|e| e.kind.is_ca()) {
        let ca = &entities[e.label.as_str()];
        let mut entries = revoked.remove(e.label.as_str()).unwrap_or_default();
        entries.sort_by_key(|x| x.serial);
        let tbs = TbsCrl {
            signature_alg: ca.key.algorithm.oid.clone(),
            issuer: ca.name.clone(),
            this_update: epoch,
            next_update: epoch.plus_days(crl_days),
            revoked: entries,
        };
        crls.push(ForgedCrl {
            issuer: e.label.clone(),
            file: PathBuf::from(format!("crls/{}.crl", e.label)),
            crl: Crl::sign(tbs, &ca.key).map_err(|err| spec_err(err.to_string()))?,
        });
    }
    if let Some(issuer) = revoked.keys().next() {
        return Err(spec_err(format!(
            "{issuer:?} is not a CA and cannot revoke"
        )));
    }

    let mut anchors = Vec::new();
    for e in &spec.entities {
        if !e.anchor.unwrap_or(e.kind == EntityKind::Root) {
            continue;
        }
        let cert = certs
            .iter()
            .find(|c| c.issuer == e.label && c.subject == e.label)
            .ok_or_else(|| spec_err(format!("anchor {:?} must be a root", e.label)))?;
        let usages = e
            .usages
            .clone()
            .unwrap_or_else(|| vec![ANY_USAGE.to_owned()])
            .into_iter()
            .map(|u| u.to_ascii_lowercase())
            .collect();
        anchors.push(AnchorEntry {
            fingerprint: cert.cert.fingerprint(),
            label: e.label.clone(),
            usages,
        });
    }

    let keys = entities
        .iter()
        .map(|(l, r)| (l.to_string(), r.key.clone()))
        .collect();
    let forged = Forged {
        certs,
        crls,
        keys,
        anchors,
    };
    forged.self_check(spec)?;
    Ok(forged)
}

/// Parses, forges and writes a spec.
pub fn build(spec_text: &str, out: &Path) -> Result<Forged, ForgeError> {
    let spec = TopologySpec::parse(spec_text)?;
    let forged = forge(&spec)?;
    forged.write(out)?;
    Ok(forged)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"
seed = 1
[[entity]]
label = "root"
kind = "root"
[[entity]]
label = "sub"
kind = "sub"
[[entity]]
label = "ee"
kind = "ee"
[[edge]]
issuer = "root"
subject = "sub"
[[edge]]
issuer = "sub"
subject = "ee"
"#;

    #[test]
    fn linear_counts() {
        let f = forge(&TopologySpec::parse(LINEAR).unwrap()).unwrap();
        assert_eq!(f.certs.len(), 3);
        assert_eq!(f.crls.len(), 2);
        assert!(f.crls.iter().all(|c| c.crl.tbs.revoked.is_empty()));
        assert_eq!(f.anchors.len(), 1);
        assert_eq!(f.cert("root", "sub").unwrap().serial(), 2);
        assert_eq!(f.cert("sub", "ee").unwrap().serial(), 1);
    }

    #[test]
    fn cross_certified_roots() {
        let text = r#"
seed = 2
[[entity]]
label = "a"
kind = "root"
[[entity]]
label = "b"
kind = "root"
[[entity]]
label = "ea"
kind = "ee"
[[entity]]
label = "eb"
kind = "ee"
[[edge]]
issuer = "a"
subject = "b"
[[edge]]
issuer = "b"
subject = "a"
[[edge]]
issuer = "a"
subject = "ea"
[[edge]]
issuer = "b"
subject = "eb"
"#;
        let f = forge(&TopologySpec::parse(text).unwrap()).unwrap();
        assert_eq!(f.certs.len(), 6);
        let b: Vec<_> = f.certs_of("b").collect();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].cert.public_key(), b[1].cert.public_key());
        assert_ne!(b[0].cert.issuer(), b[1].cert.issuer());
    }

    #[test]
    fn spec_errors() {
        let dup = format!("{LINEAR}\n[[entity]]\nlabel = \"ee\"\nkind = \"ee\"\n");
        assert!(matches!(
            forge(&TopologySpec::parse(&dup).unwrap()),
            Err(ForgeError::Spec(_))
        ));
        let dangling = format!("{LINEAR}\n[[edge]]\nissuer = \"nobody\"\nsubject = \"ee\"\n");
        assert!(matches!(
            forge(&TopologySpec::parse(&dangling).unwrap()),
            Err(ForgeError::Spec(_))
        ));
        let orphan = "seed = 1\n[[entity]]\nlabel = \"ee\"\nkind = \"ee\"\n";
        assert!(matches!(
            forge(&TopologySpec::parse(orphan).unwrap()),
            Err(ForgeError::Spec(_))
        ));
        assert!(TopologySpec::parse("seed = 1\nbogus = 2\n").is_err());
    }
}
