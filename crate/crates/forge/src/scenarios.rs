//! Built-in scenario catalog. Each scenario is a topology spec shipped in
//! `scenarios/` and isolates one validation outcome.

use std::path::Path;

use certval_core::anchors::format_manifest;

use crate::{build, ForgeError, Forged, TopologySpec};

pub struct Scenario {
    pub name: &'static str,
    pub spec: &'static str,
}

impl Scenario {
    /// The comment on the topology file's first line.
    pub fn description(&self) -> &'static str {
        self.spec
            .lines()
            .next()
            .unwrap_or("")
            .trim_start_matches('#')
            .trim()
    }

    pub fn topology(&self) -> TopologySpec {
        TopologySpec::parse(self.spec).expect("built-in scenarios parse")
    }
}

macro_rules! catalog {
    ($($name:literal),* $(,)?) => {
        pub const CATALOG: &[Scenario] = &[
            $(Scenario { name: $name, spec: include_str!(concat!("../scenarios/", $name, ".toml")) },)*
        ];
    };
}

catalog!(
    "happy3",
    "expired-intermediate",
    "revoked-ee",
    "revoked-intermediate",
    "bad-signature",
    "pathlen-violated",
    "not-a-ca",
    "policy-mapped",
    "no-policy-ee",
    "name-constraint-violated",
    "mesh2paths",
    "cycle",
);

pub fn find(name: &str) -> Result<&'static Scenario, ForgeError> {
    CATALOG
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ForgeError::UnknownScenario(name.to_owned()))
}

pub fn forge_scenario(name: &str) -> Result<Forged, ForgeError> {
    crate::forge(&find(name)?.topology())
}

/// Emits the named scenario under `out`.
pub fn scenario(name: &str, out: &Path) -> Result<Forged, ForgeError> {
    build(find(name)?.spec, out)
}

/// Name accepted by the CLI for the merged catalog.
pub const ALL: &str = "all";

/// Writes the whole catalog into one repository under `out`. File names and
/// anchor labels get a `<scenario>.` prefix; subject names never collide
/// because every scenario has its own organization.
pub fn write_catalog(out: &Path) -> Result<Vec<(&'static str, Forged)>, ForgeError> {
    let mut all = Vec::new();
    let mut anchors = Vec::new();
    for s in CATALOG {
        let forged = forge_scenario(s.name)?;
        let prefix = format!("{}.", s.name);
        forged.write_files(out, &prefix)?;
        anchors.extend(forged.anchors.iter().cloned().map(|mut a| {
            a.label = format!("{prefix}{}", a.label);
            a
        }));
        all.push((s.name, forged));
    }
    let path = out.join("anchors.txt");
    std::fs::write(&path, format_manifest(&anchors))
        .map_err(|source| ForgeError::Io { path, source })?;
    Ok(all)
}

/// Hand-derived expected outcomes, one row per catalog entry.
pub const VERDICTS: &str = include_str!("../scenarios/verdicts.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedVerdict {
    pub scenario: String,
    /// `valid` or `invalid`.
    pub status: String,
    pub reason: Option<String>,
    pub failing_index: Option<i32>,
    pub chain_length: usize,
    /// Policy aliases.
    pub authorized: Vec<String>,
    /// `(issuer domain, subject domain)` alias pairs.
    pub mappings: Vec<(String, String)>,
}

pub fn expected_verdicts() -> Vec<ExpectedVerdict> {
    let dash = |s: &str| (s != "-").then(|| s.to_owned());
    let list = |s: &str| {
        dash(s)
            .map(|s| s.split(',').map(str::to_owned).collect())
            .unwrap_or_default()
    };
    VERDICTS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            assert_eq!(f.len(), 7, "malformed verdict row {l:?}");
            ExpectedVerdict {
                scenario: f[0].to_owned(),
                status: f[1].to_owned(),
                reason: dash(f[2]),
                failing_index: dash(f[3]).map(|s| s.parse().expect("index")),
                chain_length: f[4].parse().expect("chain length"),
                authorized: list(f[5]),
                mappings: list(f[6])
                    .into_iter()
                    .map(|m: String| {
                        let (a, b) = m.split_once('>').expect("mapping a>b");
                        (a.to_owned(), b.to_owned())
                    })
                    .collect(),
            }
        })
        .collect()
}
