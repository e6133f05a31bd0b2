//! Client profile: what to ask the server for and how far to trust its answer.
//! Read from TOML; every key can be overridden from the command line.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use certval_core::ppm::CprRequirement;
use certval_core::vpm::WantBacks;
use certval_core::{Fingerprint, GeneralizedTime, Name, Oid};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Syntax {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("{key}: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ProfileError {
    ProfileError::Invalid {
        key,
        message: message.into(),
    }
}

/// Raw profile keys, as written in the file or given as flags. `None` means unset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ProfileSettings {
    pub server_url: Option<String>,
    pub server_name: Option<String>,
    pub strict_policies: Option<Vec<String>>,
    pub weak_usage: Option<String>,
    pub explicit_policy: Option<bool>,
    pub inhibit_mapping: Option<bool>,
    pub request_policy: Option<String>,
    /// Comma list of chain, crls, online-replies, time.
    pub want_backs: Option<String>,
    pub validation_time: Option<String>,
    pub requester: Option<String>,
    pub sign_request: Option<bool>,
    pub signing_key: Option<PathBuf>,
    pub signing_cert: Option<PathBuf>,
    pub trust_unsigned: Option<bool>,
    /// pinned, online or none.
    pub server_cert_check: Option<String>,
    pub server_fingerprint: Option<String>,
    /// Validator asked about the server's signing certificate; defaults to the server itself.
    pub signer_validator_url: Option<String>,
    pub store_evidence: Option<PathBuf>,
    pub timeout_ms: Option<u64>,
    pub thin: Option<bool>,
}

impl ProfileSettings {
    pub fn from_file(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut s: Self = toml::from_str(&text).map_err(|e| ProfileError::Syntax {
            path: path.to_owned(),
            source: Box::new(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut s.signing_key,
            &mut s.signing_cert,
            &mut s.store_evidence,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(s)
    }

    /// Keys set in `other` win.
    pub fn merge(self, other: ProfileSettings) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { Self { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            server_url,
            server_name,
            strict_policies,
            weak_usage,
            explicit_policy,
            inhibit_mapping,
            request_policy,
            want_backs,
            validation_time,
            requester,
            sign_request,
            signing_key,
            signing_cert,
            trust_unsigned,
            server_cert_check,
            server_fingerprint,
            signer_validator_url,
            store_evidence,
            timeout_ms,
            thin
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerCertCheck {
    Pinned(Fingerprint),
    /// Ask a validator whether the signing certificate is valid.
    Online {
        validator: Option<String>,
    },
    /// Any signer whose signature verifies.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigningConfig {
    pub key: PathBuf,
    /// Without a certificate the client signs with a self-signed one for `requester`.
    pub cert: Option<PathBuf>,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientProfile {
    pub server_url: String,
    pub server_name: Option<Name>,
    /// `None` leaves the policy fields blank: any policy.
    pub cpr: Option<CprRequirement>,
    pub request_policy: Option<Oid>,
    pub want_backs: Option<WantBacks>,
    pub validation_time: Option<GeneralizedTime>,
    pub requester: Option<Name>,
    pub signing: Option<SigningConfig>,
    pub trust_unsigned: bool,
    pub server_cert_check: ServerCertCheck,
    pub store_evidence: Option<PathBuf>,
    pub timeout: Duration,
    /// Only the VPM and pinned-fingerprint checks: no local evidence checks and
    /// no online check of the server certificate.
    pub thin: bool,
}

impl ClientProfile {
    pub fn new(server_url: impl Into<String>) -> Self {
        Self {
            server_url: server_url.into(),
            server_name: None,
            cpr: None,
            request_policy: None,
            want_backs: None,
            validation_time: None,
            requester: None,
            signing: None,
            trust_unsigned: false,
            server_cert_check: ServerCertCheck::None,
            store_evidence: None,
            timeout: DEFAULT_TIMEOUT,
            thin: false,
        }
    }

    pub fn from_settings(s: ProfileSettings) -> Result<Self, ProfileError> {
        let server_url = s
            .server_url
            .ok_or_else(|| invalid("server-url", "required"))?;
        let server_name = s
            .server_name
            .map(|n| {
                n.parse::<Name>()
                    .map_err(|e| invalid("server-name", e.to_string()))
            })
            .transpose()?;
        let oid = |key, text: &str| {
            text.trim()
                .parse::<Oid>()
                .map_err(|e| invalid(key, format!("{text:?}: {e}")))
        };

        let explicit = s.explicit_policy.unwrap_or(false);
        let inhibit = s.inhibit_mapping.unwrap_or(false);
        let cpr = match (s.strict_policies, s.weak_usage) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "weak-usage",
                    "cannot be combined with strict-policies",
                ))
            }
            (None, Some(usage)) => {
                if explicit || inhibit {
                    return Err(invalid(
                        "weak-usage",
                        "explicit-policy and inhibit-mapping apply to strict policies only",
                    ));
                }
                if usage.trim().is_empty() {
                    return Err(invalid("weak-usage", "empty usage"));
                }
                Some(CprRequirement::weak(usage.trim()))
            }
            (Some(list), None) => {
                let set = list
                    .iter()
                    .map(|p| oid("strict-policies", p))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                Some(CprRequirement::strict(set, explicit, inhibit))
            }
            (None, None) if explicit || inhibit => {
                Some(CprRequirement::strict(BTreeSet::new(), explicit, inhibit))
            }
            (None, None) => None,
        };

        let request_policy = s
            .request_policy
            .as_deref()
            .map(|p| oid("request-policy", p))
            .transpose()?;
        let want_backs = s
            .want_backs
            .as_deref()
            .map(|w| WantBacks::parse_list(w).map_err(|e| invalid("want-backs", e)))
            .transpose()?;
        let validation_time = s
            .validation_time
            .as_deref()
            .map(|t| {
                t.parse::<GeneralizedTime>()
                    .map_err(|e| invalid("validation-time", e.to_string()))
            })
            .transpose()?;
        let requester = s
            .requester
            .map(|n| {
                n.parse::<Name>()
                    .map_err(|e| invalid("requester", e.to_string()))
            })
            .transpose()?;

        let signing = match (s.sign_request.unwrap_or(false), s.signing_key) {
            (true, Some(key)) => Some(SigningConfig {
                key,
                cert: s.signing_cert,
            }),
            (true, None) => return Err(invalid("signing-key", "sign-request needs a signing key")),
            (false, _) => None,
        };

        let fingerprint = s
            .server_fingerprint
            .as_deref()
            .map(|f| {
                Fingerprint::from_hex(f.trim()).ok_or_else(|| {
                    invalid(
                        "server-fingerprint",
                        format!("{f:?} is not a SHA-256 hex digest"),
                    )
                })
            })
            .transpose()?;
        let server_cert_check = match s.server_cert_check.as_deref().map(str::trim) {
            Some("pinned") => ServerCertCheck::Pinned(fingerprint.ok_or_else(|| {
                invalid("server-fingerprint", "pinned check needs a fingerprint")
            })?),
            // A fingerprint on its own means pinning.
            None if fingerprint.is_some() => ServerCertCheck::Pinned(fingerprint.expect("checked")),
            Some("online") => ServerCertCheck::Online {
                validator: s.signer_validator_url,
            },
            Some("none") | None => ServerCertCheck::None,
            Some(other) => {
                return Err(invalid(
                    "server-cert-check",
                    format!("{other:?}: expected pinned, online or none"),
                ))
            }
        };

        Ok(Self {
            server_url,
            server_name,
            cpr,
            request_policy,
            want_backs,
            validation_time,
            requester,
            signing,
            trust_unsigned: s.trust_unsigned.unwrap_or(false),
            server_cert_check,
            store_evidence: s.store_evidence,
            timeout: s
                .timeout_ms
                .map(Duration::from_millis)
                .unwrap_or(DEFAULT_TIMEOUT),
            thin: s.thin.unwrap_or(false),
        })
    }
}
