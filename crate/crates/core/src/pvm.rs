//! Path validation over one candidate chain, and first-valid selection across
//! the candidates for a target.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::csm::{CertStatus, StatusSources, StatusValue};
use crate::der::Oid;
use crate::pcm::{discover, CandidateChain, CertGraph, Direction};
use crate::ppm::{self, CprRequirement};
use crate::time::GeneralizedTime;
use crate::x509::{Certificate, KeyUsage, Name, PolicyMapping};

/// Why a chain was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailureReason {
    Expired,
    NotYetValid,
    BadSignature,
    Revoked,
    RevocationUndetermined,
    NameChaining,
    BasicConstraints,
    KeyUsage,
    NameConstraint,
    PolicyFailure,
    UnknownCriticalExtension,
}

impl FailureReason {
    pub const ALL: [FailureReason; 11] = [
        Self::Expired,
        Self::NotYetValid,
        Self::BadSignature,
        Self::Revoked,
        Self::RevocationUndetermined,
        Self::NameChaining,
        Self::BasicConstraints,
        Self::KeyUsage,
        Self::NameConstraint,
        Self::PolicyFailure,
        Self::UnknownCriticalExtension,
    ];

    /// Wire code (position in `ALL`).
    pub fn code(self) -> i64 {
        Self::ALL.iter().position(|r| *r == self).expect("listed") as i64
    }

    pub fn from_code(code: i64) -> Option<Self> {
        usize::try_from(code)
            .ok()
            .and_then(|i| Self::ALL.get(i))
            .copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Expired => "expired",
            Self::NotYetValid => "notYetValid",
            Self::BadSignature => "badSignature",
            Self::Revoked => "revoked",
            Self::RevocationUndetermined => "revocationUndetermined",
            Self::NameChaining => "nameChaining",
            Self::BasicConstraints => "basicConstraints",
            Self::KeyUsage => "keyUsage",
            Self::NameConstraint => "nameConstraint",
            Self::PolicyFailure => "policyFailure",
            Self::UnknownCriticalExtension => "unknownCriticalExtension",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FailureReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|r| r.label().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| format!("unknown failure reason {s:?}"))
    }
}

/// Failing index used when the whole path fails the policy requirement.
pub const WHOLE_PATH: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Valid,
    Invalid {
        reason: FailureReason,
        failing_index: i32,
    },
    /// No candidate chain connects the target to an anchor.
    Unknown,
}

impl VerdictStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, VerdictStatus::Valid)
    }
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictStatus::Valid => f.write_str("valid"),
            VerdictStatus::Invalid {
                reason,
                failing_index,
            } => write!(f, "invalid({reason}, {failing_index})"),
            VerdictStatus::Unknown => f.write_str("unknown(noPath)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub authorized_policies: BTreeSet<Oid>,
    pub mappings_applied: Vec<PolicyMapping>,
    /// Revocation status for each checked certificate, by chain index.
    pub statuses: Vec<(usize, CertStatus)>,
    pub chain: Option<CandidateChain>,
    pub validation_time: GeneralizedTime,
}

impl Verdict {
    fn unknown(at: GeneralizedTime) -> Self {
        Self {
            status: VerdictStatus::Unknown,
            authorized_policies: BTreeSet::new(),
            mappings_applied: Vec::new(),
            statuses: Vec::new(),
            chain: None,
            validation_time: at,
        }
    }

    /// Status of the certificate whose revocation failed the chain, if any.
    pub fn revocation(&self) -> Option<&CertStatus> {
        match self.status {
            VerdictStatus::Invalid {
                reason: FailureReason::Revoked | FailureReason::RevocationUndetermined,
                failing_index,
            } => self
                .statuses
                .iter()
                .find(|(i, _)| *i as i32 == failing_index)
                .map(|(_, s)| s),
            _ => None,
        }
    }
}

pub struct ValidationInputs<'a> {
    pub at: GeneralizedTime,
    /// Already resolved: weak requirements must go through `ppm::effective_requirement` first.
    pub cpr: &'a CprRequirement,
    pub status: &'a StatusSources<'a>,
}

/// Accumulated subtree constraints on subject names.
#[derive(Default)]
struct NameScope {
    /// Each entry is one constraining certificate's permitted list; a name must
    /// fall under some subtree of every entry.
    permitted: Vec<Vec<Name>>,
    excluded: Vec<Name>,
}

impl NameScope {
    fn absorb(&mut self, cert: &Certificate) {
        if let Some(nc) = cert.extensions().name_constraints() {
            if !nc.permitted.is_empty() {
                self.permitted.push(nc.permitted.clone());
            }
            self.excluded.extend(nc.excluded.iter().cloned());
        }
    }

    fn allows(&self, name: &Name) -> bool {
        self.permitted
            .iter()
            .all(|list| list.iter().any(|p| p.is_prefix_of(name)))
            && !self.excluded.iter().any(|e| e.is_prefix_of(name))
    }
}

/// Validates one candidate chain. The anchor's own basicConstraints pathLen and
/// nameConstraints apply; the anchor itself is never signature- or revocation-checked.
pub fn validate_path(chain: &CandidateChain, inputs: &ValidationInputs) -> Verdict {
    let at = inputs.at;
    let n = chain.len();
    let anchor = &chain.anchor;
    let mut working_key = anchor.public_key().clone();
    let mut working_name = anchor.subject().clone();
    let mut max_path_len = anchor
        .extensions()
        .basic_constraints()
        .and_then(|bc| bc.path_len)
        .unwrap_or(n as u64);
    let mut names = NameScope::default();
    names.absorb(anchor);
    let mut policy = ppm::init_state(inputs.cpr, n);
    let mut statuses = Vec::new();

    let fail = |reason, index: usize, statuses: Vec<(usize, CertStatus)>| Verdict {
        status: VerdictStatus::Invalid {
            reason,
            failing_index: index as i32,
        },
        authorized_policies: BTreeSet::new(),
        mappings_applied: Vec::new(),
        statuses,
        chain: Some(chain.clone()),
        validation_time: at,
    };

    for (i, cert) in chain.certs.iter().enumerate() {
        let is_last = i + 1 == n;
        let self_issued = cert.is_self_issued();

        if !cert.check_signature(&working_key).unwrap_or(false) {
            return fail(FailureReason::BadSignature, i, statuses);
        }
        if at < cert.tbs.validity.not_before {
            return fail(FailureReason::NotYetValid, i, statuses);
        }
        if at > cert.tbs.validity.not_after {
            return fail(FailureReason::Expired, i, statuses);
        }
        if cert.issuer() != &working_name {
            return fail(FailureReason::NameChaining, i, statuses);
        }
        if (is_last || !self_issued) && !names.allows(cert.subject()) {
            return fail(FailureReason::NameConstraint, i, statuses);
        }
        if let Some(status) = inputs.status.status(cert, &working_key, at) {
            let value = status.value.clone();
            statuses.push((i, status));
            match value {
                StatusValue::Good => {}
                StatusValue::Revoked { .. } => return fail(FailureReason::Revoked, i, statuses),
                StatusValue::Undetermined(_) => {
                    return fail(FailureReason::RevocationUndetermined, i, statuses)
                }
            }
        }
        policy = ppm::process_cert(policy, cert, self_issued, is_last);
        if !is_last {
            let ext = cert.extensions();
            match ext.basic_constraints() {
                Some(bc) if bc.is_ca => {
                    if !self_issued {
                        if max_path_len == 0 {
                            return fail(FailureReason::BasicConstraints, i, statuses);
                        }
                        max_path_len -= 1;
                    }
                    if let Some(limit) = bc.path_len {
                        max_path_len = max_path_len.min(limit);
                    }
                }
                _ => return fail(FailureReason::BasicConstraints, i, statuses),
            }
            if ext
                .key_usage()
                .is_some_and(|ku| !ku.contains(KeyUsage::KEY_CERT_SIGN))
            {
                return fail(FailureReason::KeyUsage, i, statuses);
            }
            names.absorb(cert);
        }
        if cert.has_unknown_critical() {
            return fail(FailureReason::UnknownCriticalExtension, i, statuses);
        }
        working_key = cert.public_key().clone();
        working_name = cert.subject().clone();
    }

    let outcome = ppm::final_verdict(&policy, inputs.cpr);
    Verdict {
        status: if outcome.ok {
            VerdictStatus::Valid
        } else {
            VerdictStatus::Invalid {
                reason: FailureReason::PolicyFailure,
                failing_index: WHOLE_PATH,
            }
        },
        authorized_policies: outcome.authorized_set,
        mappings_applied: outcome.mappings_applied,
        statuses,
        chain: Some(chain.clone()),
        validation_time: at,
    }
}

/// Validates candidates in discovery order and returns the first valid verdict,
/// or the first candidate's verdict when none is valid.
pub fn validate_candidates(candidates: &[CandidateChain], inputs: &ValidationInputs) -> Verdict {
    let mut first = None;
    for chain in candidates {
        let verdict = validate_path(chain, inputs);
        if verdict.status.is_valid() {
            return verdict;
        }
        first.get_or_insert(verdict);
    }
    first.unwrap_or_else(|| Verdict::unknown(inputs.at))
}

/// Discovers the candidate chains for `target` and validates them.
pub fn validate_target(
    graph: &CertGraph,
    target: &Certificate,
    max_length: usize,
    inputs: &ValidationInputs,
) -> Verdict {
    let extended;
    let graph = if graph.contains(&target.fingerprint()) {
        graph
    } else {
        extended = graph.with_extra([target]);
        &extended
    };
    match discover(graph, target, Direction::Forward, max_length) {
        Ok(chains) => validate_candidates(&chains, inputs),
        Err(_) => Verdict::unknown(inputs.at),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::crypto::{generate, AlgorithmId, KeyPair};
    use crate::csm::RevocationRegime;
    use crate::x509::{
        BasicConstraints, Extension, ExtensionValue, Extensions, PolicyInformation,
        SubjectPublicKey, TbsCertificate, Validity,
    };

    fn t(days: i64) -> GeneralizedTime {
        GeneralizedTime::from_ymd_hms(2025, 1, 1, 0, 0, 0)
            .unwrap()
            .plus_days(days)
    }

    fn p1() -> Oid {
        Oid::from_arcs(&[1, 3, 6, 1, 4, 1, 57264, 3, 1])
    }

    struct Party {
        name: Name,
        key: KeyPair,
    }

    fn party(name: &str, seed: &str) -> Party {
        Party {
            name: name.parse().unwrap(),
            key: generate(&AlgorithmId::ed25519(), Some(seed.as_bytes())).unwrap(),
        }
    }

    fn ca(path_len: Option<u64>) -> Vec<Extension> {
        vec![
            Extension::new(
                true,
                ExtensionValue::BasicConstraints(BasicConstraints {
                    is_ca: true,
                    path_len,
                }),
            ),
            Extension::new(
                true,
                ExtensionValue::KeyUsage(KeyUsage(KeyUsage::KEY_CERT_SIGN | KeyUsage::CRL_SIGN)),
            ),
            Extension::new(
                false,
                ExtensionValue::CertificatePolicies(vec![PolicyInformation {
                    policy: p1(),
                    qualifiers: None,
                }]),
            ),
        ]
    }

    fn ee() -> Vec<Extension> {
        vec![Extension::new(
            false,
            ExtensionValue::CertificatePolicies(vec![PolicyInformation {
                policy: p1(),
                qualifiers: None,
            }]),
        )]
    }

    fn issue(
        issuer: &Party,
        subject: &Party,
        ext: Vec<Extension>,
        validity: (i64, i64),
    ) -> Arc<Certificate> {
        Arc::new(
            Certificate::sign(
                TbsCertificate {
                    serial: 1,
                    signature_alg: issuer.key.algorithm.oid.clone(),
                    issuer: issuer.name.clone(),
                    validity: Validity {
                        not_before: t(validity.0),
                        not_after: t(validity.1),
                    },
                    subject: subject.name.clone(),
                    public_key: SubjectPublicKey {
                        algorithm: subject.key.algorithm.oid.clone(),
                        key: subject.key.public_key.clone(),
                    },
                    extensions: Extensions(ext),
                },
                &issuer.key,
            )
            .unwrap(),
        )
    }

    fn check(chain: &CandidateChain, cpr: &CprRequirement) -> Verdict {
        let status = StatusSources {
            regime: RevocationRegime::None,
            crls: &[],
            online: None,
        };
        validate_path(
            chain,
            &ValidationInputs {
                at: t(30),
                cpr,
                status: &status,
            },
        )
    }

    fn invalid(reason: FailureReason, failing_index: i32) -> VerdictStatus {
        VerdictStatus::Invalid {
            reason,
            failing_index,
        }
    }

    const LIFE: (i64, i64) = (0, 365);

    #[test]
    fn path_len_counter() {
        // root pathLen=1 permits one intermediate below the first; ca2 is the second.
        let (root, ca1, ca2, leaf) = (
            party("CN=Root", "r"),
            party("CN=CA1", "1"),
            party("CN=CA2", "2"),
            party("CN=EE", "e"),
        );
        let anchor = issue(&root, &root, ca(Some(1)), LIFE);
        let chain = CandidateChain::new(
            anchor.clone(),
            vec![
                issue(&root, &ca1, ca(None), LIFE),
                issue(&ca1, &ca2, ca(None), LIFE),
                issue(&ca2, &leaf, ee(), LIFE),
            ],
        );
        assert_eq!(
            check(&chain, &CprRequirement::any_policy()).status,
            invalid(FailureReason::BasicConstraints, 1)
        );

        let short = CandidateChain::new(
            anchor,
            vec![
                issue(&root, &ca1, ca(None), LIFE),
                issue(&ca1, &leaf, ee(), LIFE),
            ],
        );
        assert!(check(&short, &CprRequirement::any_policy())
            .status
            .is_valid());

        // An intermediate's own pathLen=0 caps what follows.
        let anchor = issue(&root, &root, ca(None), LIFE);
        let capped = CandidateChain::new(
            anchor,
            vec![
                issue(&root, &ca1, ca(Some(0)), LIFE),
                issue(&ca1, &ca2, ca(None), LIFE),
                issue(&ca2, &leaf, ee(), LIFE),
            ],
        );
        assert_eq!(
            check(&capped, &CprRequirement::any_policy()).status,
            invalid(FailureReason::BasicConstraints, 1)
        );
    }

    #[test]
    fn self_issued_intermediate_does_not_count() {
        let root = party("CN=Root", "r");
        let rollover = party("CN=Root", "r2");
        let leaf = party("CN=EE", "e");
        let anchor = issue(&root, &root, ca(Some(0)), LIFE);
        let chain = CandidateChain::new(
            anchor,
            vec![
                issue(&root, &rollover, ca(None), LIFE),
                issue(&rollover, &leaf, ee(), LIFE),
            ],
        );
        assert!(check(&chain, &CprRequirement::any_policy())
            .status
            .is_valid());
    }

    #[test]
    fn key_usage_and_unknown_critical() {
        let (root, ca1, leaf) = (
            party("CN=Root", "r"),
            party("CN=CA1", "1"),
            party("CN=EE", "e"),
        );
        let anchor = issue(&root, &root, ca(None), LIFE);
        let mut no_sign = ca(None);
        no_sign[1] = Extension::new(
            true,
            ExtensionValue::KeyUsage(KeyUsage(KeyUsage::DIGITAL_SIGNATURE)),
        );
        let chain = CandidateChain::new(
            anchor.clone(),
            vec![
                issue(&root, &ca1, no_sign, LIFE),
                issue(&ca1, &leaf, ee(), LIFE),
            ],
        );
        assert_eq!(
            check(&chain, &CprRequirement::any_policy()).status,
            invalid(FailureReason::KeyUsage, 0)
        );

        let mut odd = ee();
        odd.push(Extension::new(
            true,
            ExtensionValue::Unknown {
                oid: Oid::from_arcs(&[1, 3, 6, 1, 4, 1, 57264, 9, 1]),
                value: vec![5, 0],
            },
        ));
        let chain = CandidateChain::new(
            anchor,
            vec![
                issue(&root, &ca1, ca(None), LIFE),
                issue(&ca1, &leaf, odd, LIFE),
            ],
        );
        assert_eq!(
            check(&chain, &CprRequirement::any_policy()).status,
            invalid(FailureReason::UnknownCriticalExtension, 1)
        );
    }

    #[test]
    fn signature_is_checked_before_validity() {
        let (root, ca1, leaf) = (
            party("CN=Root", "r"),
            party("CN=CA1", "1"),
            party("CN=EE", "e"),
        );
        let stranger = party("CN=CA1", "not ca1");
        let anchor = issue(&root, &root, ca(None), LIFE);
        let chain = CandidateChain::new(
            anchor.clone(),
            vec![
                issue(&root, &ca1, ca(None), LIFE),
                issue(&stranger, &leaf, ee(), (100, 200)),
            ],
        );
        assert_eq!(
            check(&chain, &CprRequirement::any_policy()).status,
            invalid(FailureReason::BadSignature, 1)
        );

        let chain = CandidateChain::new(
            anchor.clone(),
            vec![
                issue(&root, &ca1, ca(None), LIFE),
                issue(&ca1, &leaf, ee(), (100, 200)),
            ],
        );
        assert_eq!(
            check(&chain, &CprRequirement::any_policy()).status,
            invalid(FailureReason::NotYetValid, 1)
        );

        let chain = CandidateChain::new(
            anchor,
            vec![
                issue(&root, &ca1, ca(None), (0, 10)),
                issue(&ca1, &leaf, ee(), LIFE),
            ],
        );
        assert_eq!(
            check(&chain, &CprRequirement::any_policy()).status,
            invalid(FailureReason::Expired, 0)
        );
    }

    #[test]
    fn policy_failure_covers_the_whole_path() {
        let (root, ca1, leaf) = (
            party("CN=Root", "r"),
            party("CN=CA1", "1"),
            party("CN=EE", "e"),
        );
        let anchor = issue(&root, &root, ca(None), LIFE);
        let chain = CandidateChain::new(
            anchor,
            vec![
                issue(&root, &ca1, ca(None), LIFE),
                issue(&ca1, &leaf, ee(), LIFE),
            ],
        );
        let other = Oid::from_arcs(&[1, 3, 6, 1, 4, 1, 57264, 3, 2]);
        let v = check(
            &chain,
            &CprRequirement::strict([other].into(), false, false),
        );
        assert_eq!(v.status, invalid(FailureReason::PolicyFailure, WHOLE_PATH));
        let v = check(&chain, &CprRequirement::strict([p1()].into(), true, false));
        assert!(v.status.is_valid());
        assert_eq!(v.authorized_policies, [p1()].into());
        assert!(v.statuses.is_empty());
    }

    #[test]
    fn no_candidates_is_unknown() {
        let status = StatusSources {
            regime: RevocationRegime::None,
            crls: &[],
            online: None,
        };
        let cpr = CprRequirement::any_policy();
        let v = validate_candidates(
            &[],
            &ValidationInputs {
                at: t(0),
                cpr: &cpr,
                status: &status,
            },
        );
        assert_eq!(v.status, VerdictStatus::Unknown);
        assert_eq!(v.status.to_string(), "unknown(noPath)");
    }

    #[test]
    fn reason_codes_round_trip() {
        for r in FailureReason::ALL {
            assert_eq!(FailureReason::from_code(r.code()), Some(r));
            assert_eq!(r.label().parse::<FailureReason>(), Ok(r));
        }
        assert_eq!(FailureReason::from_code(11), None);
        assert_eq!(FailureReason::from_code(-1), None);
    }
}
