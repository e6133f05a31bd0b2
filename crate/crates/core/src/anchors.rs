//! Trust anchor manifest (`anchors.txt`): one anchor per line,
//! `<hex fingerprint> <label> <usage,usage,...>`. Blank lines and `#` comments are ignored.

use std::collections::BTreeSet;
use std::fmt;

use crate::x509::Fingerprint;

/// Usage granting trust for every intended usage.
pub const ANY_USAGE: &str = "any";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorEntry {
    pub fingerprint: Fingerprint,
    pub label: String,
    /// Lowercased.
    pub usages: BTreeSet<String>,
}

impl AnchorEntry {
    pub fn trusts(&self, usage: &str) -> bool {
        self.usages.contains(ANY_USAGE) || self.usages.contains(&usage.to_ascii_lowercase())
    }
}

impl fmt::Display for AnchorEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let usages: Vec<&str> = self.usages.iter().map(String::as_str).collect();
        write!(
            f,
            "{} {} {}",
            self.fingerprint,
            self.label,
            usages.join(",")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("anchors line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

pub fn parse_manifest(text: &str) -> Result<Vec<AnchorEntry>, ManifestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| ManifestError {
            line: i + 1,
            message: message.to_owned(),
        };
        let mut parts = line.split_whitespace();
        let fingerprint = parts
            .next()
            .and_then(Fingerprint::from_hex)
            .ok_or_else(|| err("expected a 64-digit hex fingerprint"))?;
        let label = parts.next().ok_or_else(|| err("missing label"))?.to_owned();
        let usages: BTreeSet<String> = parts
            .next()
            .unwrap_or(ANY_USAGE)
            .split(',')
            .map(|u| u.trim().to_ascii_lowercase())
            .filter(|u| !u.is_empty())
            .collect();
        if parts.next().is_some() {
            return Err(err("trailing fields"));
        }
        if usages.is_empty() {
            return Err(err("empty usage list"));
        }
        out.push(AnchorEntry {
            fingerprint,
            label,
            usages,
        });
    }
    Ok(out)
}

pub fn format_manifest(entries: &[AnchorEntry]) -> String {
    entries.iter().map(|e| format!("{e}\n")).collect()
}
