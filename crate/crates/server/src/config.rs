//! Server configuration file (TOML).
//!
//! ```toml
//! [server]
//! name = "O=Test,CN=CVS"
//! listen = "127.0.0.1:8080"
//! repository = "repo"
//! cert = "server.der"      # created (self-signed) when missing
//! key = "server.key"       # created when missing
//! serial-file = "serial"
//!
//! [clock]
//! fixed = "20250131000000Z"  # omit for the system clock
//!
//! [online]                   # optional; default is the built-in responder
//! url = "http://127.0.0.1:8081/status"
//! responder-cert = "responder.der"
//!
//! [[policy]]
//! oid = "1.3.6.1.4.1.57264.4.1"
//! default = true
//! anchors = ["all"]
//! revocation = "crl"
//! usages = { e-mail = ["1.3.6.1.4.1.57264.3.10"] }
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use certval_core::csm::RevocationRegime;
use certval_core::pcm::DEFAULT_MAX_LENGTH;
use certval_core::ppm::UsageTable;
use certval_core::vpm::WantBacks;
use certval_core::{GeneralizedTime, Name, Oid};
use serde::Deserialize;

/// Default allowed distance between the request time and the server clock.
pub const DEFAULT_CLOCK_SKEW_SECS: i64 = 300;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub server: ServerSection,
    #[serde(default)]
    pub clock: ClockSection,
    pub online: Option<OnlineSection>,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ServerSection {
    pub name: String,
    #[serde(default = "default_listen")]
    pub listen: String,
    pub repository: PathBuf,
    pub cert: Option<PathBuf>,
    pub key: Option<PathBuf>,
    pub serial_file: Option<PathBuf>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_owned()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ClockSection {
    pub fixed: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OnlineSection {
    pub url: String,
    pub responder_cert: PathBuf,
    #[serde(default = "default_online_timeout")]
    pub timeout_ms: u64,
}

fn default_online_timeout() -> u64 {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PolicySection {
    pub oid: String,
    #[serde(default)]
    pub default: bool,
    /// Anchor labels from `anchors.txt`, or `all`.
    #[serde(default = "all_anchors")]
    pub anchors: Vec<String>,
    #[serde(default)]
    pub revocation: Option<String>,
    pub max_chain_length: Option<usize>,
    pub clock_skew: Option<i64>,
    #[serde(default)]
    pub require_signed_requests: bool,
    #[serde(default = "yes")]
    pub allow_supplied_chains: bool,
    /// Comma-separated: chain, crls, online-replies, time.
    pub default_want_backs: Option<String>,
    /// Intended usage to acceptable policy OIDs.
    #[serde(default)]
    pub usages: BTreeMap<String, Vec<String>>,
}

fn all_anchors() -> Vec<String> {
    vec![ALL_ANCHORS.to_owned()]
}

fn yes() -> bool {
    true
}

pub const ALL_ANCHORS: &str = "all";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnchorSelection {
    All,
    Labels(BTreeSet<String>),
}

/// A named server-side constraint bundle, selected by requestPolicy.
#[derive(Debug, Clone)]
pub struct ValidationPolicy {
    pub oid: Oid,
    pub is_default: bool,
    pub anchors: AnchorSelection,
    pub revocation: RevocationRegime,
    pub max_chain_length: usize,
    pub clock_skew: i64,
    pub require_signed_requests: bool,
    pub allow_supplied_chains: bool,
    pub default_want_backs: WantBacks,
    pub usages: UsageTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(GeneralizedTime),
}

impl Clock {
    pub fn now(self) -> GeneralizedTime {
        match self {
            Clock::System => GeneralizedTime::now(),
            Clock::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OnlineSettings {
    pub url: String,
    pub responder_cert: PathBuf,
    pub timeout_ms: u64,
}

/// Validated configuration with absolute paths.
#[derive(Debug, Clone)]
pub struct Settings {
    pub name: Name,
    pub listen: String,
    pub repository: PathBuf,
    pub cert: Option<PathBuf>,
    pub key: Option<PathBuf>,
    pub serial_file: Option<PathBuf>,
    pub clock: Clock,
    pub online: Option<OnlineSettings>,
    pub policies: Vec<ValidationPolicy>,
}

/// Command-line overrides; `None` keeps the file's value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub listen: Option<String>,
    pub clock_fixed: Option<String>,
    pub repository: Option<PathBuf>,
    pub name: Option<String>,
    pub serial_file: Option<PathBuf>,
}

impl Settings {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base, overrides)
    }

    pub fn from_text(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        Self::from_file(file, base, overrides)
    }

    pub fn from_file(file: ConfigFile, base: &Path, o: &Overrides) -> Result<Self, ConfigError> {
        let abs = |p: &Path| {
            if p.is_absolute() {
                p.to_owned()
            } else {
                base.join(p)
            }
        };
        let name_text = o.name.clone().unwrap_or(file.server.name);
        let name: Name = name_text
            .parse()
            .map_err(|e| invalid(format!("server name {name_text:?}: {e}")))?;
        let clock = match o.clock_fixed.as_ref().or(file.clock.fixed.as_ref()) {
            Some(t) => Clock::Fixed(
                t.parse()
                    .map_err(|e| invalid(format!("clock.fixed {t:?}: {e}")))?,
            ),
            None => Clock::System,
        };
        let mut policies = file
            .policies
            .iter()
            .map(policy)
            .collect::<Result<Vec<_>, _>>()?;
        check_policies(&policies)?;
        if policies.len() == 1 {
            policies[0].is_default = true;
        }
        Ok(Self {
            name,
            listen: o.listen.clone().unwrap_or(file.server.listen),
            repository: abs(o.repository.as_deref().unwrap_or(&file.server.repository)),
            cert: file.server.cert.as_deref().map(abs),
            key: file.server.key.as_deref().map(abs),
            serial_file: o
                .serial_file
                .as_deref()
                .or(file.server.serial_file.as_deref())
                .map(abs),
            clock,
            online: file.online.map(|s| OnlineSettings {
                url: s.url,
                responder_cert: abs(&s.responder_cert),
                timeout_ms: s.timeout_ms,
            }),
            policies,
        })
    }

    pub fn default_policy(&self) -> &ValidationPolicy {
        self.policies
            .iter()
            .find(|p| p.is_default)
            .expect("checked at load")
    }

    pub fn policy(&self, oid: &Oid) -> Option<&ValidationPolicy> {
        self.policies.iter().find(|p| &p.oid == oid)
    }
}

fn parse_oid(s: &str, what: &str) -> Result<Oid, ConfigError> {
    s.parse().map_err(|e| invalid(format!("{what} {s:?}: {e}")))
}

fn policy(s: &PolicySection) -> Result<ValidationPolicy, ConfigError> {
    let oid = parse_oid(&s.oid, "policy oid")?;
    let ctx = |msg: String| invalid(format!("policy {}: {msg}", s.oid));
    let anchors = if s.anchors.iter().any(|a| a == ALL_ANCHORS) {
        AnchorSelection::All
    } else if s.anchors.is_empty() {
        return Err(ctx("anchor list is empty".into()));
    } else {
        AnchorSelection::Labels(s.anchors.iter().cloned().collect())
    };
    let revocation = match &s.revocation {
        Some(r) => r.parse().map_err(ctx)?,
        None => RevocationRegime::default(),
    };
    let default_want_backs = match &s.default_want_backs {
        Some(w) => WantBacks::parse_list(w).map_err(ctx)?,
        None => WantBacks(WantBacks::CHAIN),
    };
    let mut table = BTreeMap::new();
    for (usage, oids) in &s.usages {
        let set = oids
            .iter()
            .map(|o| parse_oid(o, "usage policy"))
            .collect::<Result<BTreeSet<_>, _>>()?;
        table.insert(usage.clone(), set);
    }
    let usages = UsageTable::new(table).map_err(|e| ctx(e.to_string()))?;
    let max_chain_length = s.max_chain_length.unwrap_or(DEFAULT_MAX_LENGTH);
    if max_chain_length == 0 {
        return Err(ctx("max-chain-length must be positive".into()));
    }
    let clock_skew = s.clock_skew.unwrap_or(DEFAULT_CLOCK_SKEW_SECS);
    if clock_skew < 0 {
        return Err(ctx("clock-skew must not be negative".into()));
    }
    Ok(ValidationPolicy {
        oid,
        is_default: s.default,
        anchors,
        revocation,
        max_chain_length,
        clock_skew,
        require_signed_requests: s.require_signed_requests,
        allow_supplied_chains: s.allow_supplied_chains,
        default_want_backs,
        usages,
    })
}

fn check_policies(policies: &[ValidationPolicy]) -> Result<(), ConfigError> {
    if policies.is_empty() {
        return Err(invalid("at least one [[policy]] is required"));
    }
    let defaults = policies.iter().filter(|p| p.is_default).count();
    if defaults != 1 && !(policies.len() == 1 && defaults == 0) {
        return Err(invalid(format!(
            "exactly one policy must be marked default, found {defaults}"
        )));
    }
    let oids: BTreeSet<&Oid> = policies.iter().map(|p| &p.oid).collect();
    if oids.len() != policies.len() {
        return Err(invalid("duplicate policy oid"));
    }
    Ok(())
}
