//! Fixtures and generators shared by the acceptance suite.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use certval_core::crypto::{generate, AlgorithmId, KeyPair};
use certval_core::der::{BitString, DerValue};
use certval_core::ppm::CprRequirement;
use certval_core::vpm::WantBacks;
use certval_core::x509::{oids, Extensions, SubjectPublicKey, TbsCertificate, Validity};
use certval_core::{Certificate, GeneralizedTime, Name, Oid};
use certval_oracles::policy::{SimCert, SimRequest, ANY};
use cvs_server::{Overrides, RunningServer, Service, Settings};
use num_bigint::BigInt;
use pki_forge::scenarios::write_catalog;
use pki_forge::{scenario_validation_time, test_policies, Forged};
use proptest::prelude::*;
use rp_client::{ClientProfile, Invocation, ServerCertCheck, Target};

pub const CRL_POLICY: &str = "1.3.6.1.4.1.57264.4.1";
pub const ONLINE_POLICY: &str = "1.3.6.1.4.1.57264.4.2";
pub const SERVER_NAME: &str = "O=Test,CN=CVS";
pub const FIXED_CLOCK: &str = "20250131000000Z";

fn config(online: &str) -> String {
    format!(
        r#"
[server]
name = "{SERVER_NAME}"
repository = "repo"
cert = "server.der"
key = "server.key"
{online}
[clock]
fixed = "{FIXED_CLOCK}"

[[policy]]
oid = "{CRL_POLICY}"
default = true
revocation = "crl"
usages = {{ e-mail = ["1.3.6.1.4.1.57264.3.10"] }}

[[policy]]
oid = "{ONLINE_POLICY}"
revocation = "online"
"#
    )
}

/// The whole scenario catalog in one repository, served twice: `primary`
/// answers status queries itself; `relay` asks `primary` over HTTP for its
/// online regime.
pub struct World {
    pub dir: tempfile::TempDir,
    pub catalog: Vec<(&'static str, Forged)>,
    pub primary: Arc<Service>,
    pub relay: Arc<Service>,
    pub primary_http: RunningServer,
    pub relay_http: RunningServer,
}

impl World {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let repo = dir.path().join("repo");
        let catalog = write_catalog(&repo).expect("forge catalog");

        let a = dir.path().join("primary");
        fs::create_dir_all(&a).expect("mkdir");
        fs::write(a.join("cvs.toml"), config("")).expect("write config");
        let primary = Arc::new(service(&a.join("cvs.toml"), &repo));
        let primary_http =
            RunningServer::start(primary.clone(), "127.0.0.1:0").expect("start primary");

        let b = dir.path().join("relay");
        fs::create_dir_all(&b).expect("mkdir");
        let online = format!(
            "[online]\nurl = \"{}\"\nresponder-cert = \"{}\"\n",
            primary_http.url("/status"),
            a.join("server.der").display()
        );
        fs::write(b.join("cvs.toml"), config(&online)).expect("write config");
        let relay = Arc::new(service(&b.join("cvs.toml"), &repo));
        let relay_http = RunningServer::start(relay.clone(), "127.0.0.1:0").expect("start relay");
        Self {
            dir,
            catalog,
            primary,
            relay,
            primary_http,
            relay_http,
        }
    }

    pub fn forged(&self, scenario: &str) -> &Forged {
        &self
            .catalog
            .iter()
            .find(|(n, _)| *n == scenario)
            .expect("scenario")
            .1
    }

    pub fn ee(&self, scenario: &str) -> Certificate {
        self.forged(scenario)
            .certs
            .iter()
            .find(|c| c.subject == "ee")
            .expect("ee")
            .cert
            .clone()
    }

    pub fn target(&self, scenario: &str) -> Target {
        Target {
            label: scenario.to_owned(),
            cert: self.ee(scenario),
        }
    }

    pub fn repo(&self) -> PathBuf {
        self.dir.path().join("repo")
    }

    /// Strict {P1}, pinned to `service`, chain want-back.
    pub fn profile(&self, url: String, service: &Service) -> ClientProfile {
        ClientProfile {
            server_name: Some(SERVER_NAME.parse().expect("name")),
            cpr: Some(CprRequirement::strict(
                [test_policies::p1()].into(),
                false,
                false,
            )),
            want_backs: Some(WantBacks(WantBacks::CHAIN)),
            server_cert_check: ServerCertCheck::Pinned(service.signing_certificate().fingerprint()),
            ..ClientProfile::new(url)
        }
    }
}

impl Default for World {
    fn default() -> Self {
        Self::new()
    }
}

fn service(config: &Path, repo: &Path) -> Service {
    let overrides = Overrides {
        repository: Some(repo.to_owned()),
        ..Overrides::default()
    };
    Service::new(Settings::load(config, &overrides).expect("config")).expect("service")
}

pub fn fixed_time() -> GeneralizedTime {
    FIXED_CLOCK.parse().expect("fixed clock")
}

pub fn invocation(nonce: u64) -> Invocation {
    Invocation {
        nonce,
        request_time: scenario_validation_time(),
    }
}

/// Policy aliases used by the golden verdict table.
pub fn alias(name: &str) -> Oid {
    match name {
        "P1" => test_policies::p1(),
        "P2" => test_policies::p2(),
        "MAIL" => test_policies::mail(),
        other => panic!("unknown policy alias {other}"),
    }
}

/// Every file the forge wrote, sorted.
pub fn corpus_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_owned()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("read dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(
                path.extension().and_then(|e| e.to_str()),
                Some("der" | "crl" | "key")
            ) {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// Generators

fn bit_string() -> impl Strategy<Value = DerValue> {
    (prop::collection::vec(any::<u8>(), 0..12), 0u8..8).prop_map(|(mut bytes, unused)| {
        let unused = if bytes.is_empty() { 0 } else { unused };
        if let Some(last) = bytes.last_mut() {
            *last &= 0xffu8 << unused;
        }
        DerValue::BitString(BitString {
            bytes,
            unused_bits: unused,
        })
    })
}

fn oid() -> impl Strategy<Value = Oid> {
    (
        0u64..3,
        0u64..40,
        prop::collection::vec(prop_oneof![0u64..200, any::<u64>()], 0..6),
    )
        .prop_map(|(a, b, rest)| {
            let mut arcs = vec![a, if a == 2 { b * 1000 } else { b }];
            arcs.extend(rest);
            Oid::new(arcs).unwrap_or_else(|_| Oid::from_arcs(&[1, 2]))
        })
}

fn integer() -> impl Strategy<Value = BigInt> {
    prop_oneof![
        any::<i64>().prop_map(BigInt::from),
        prop::collection::vec(any::<u8>(), 1..40).prop_map(|b| BigInt::from_signed_bytes_be(&b)),
    ]
}

/// Arbitrary values from the supported tag set, nested up to four levels.
pub fn der_value() -> impl Strategy<Value = DerValue> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(DerValue::Boolean),
        integer().prop_map(DerValue::Integer),
        prop::collection::vec(any::<u8>(), 0..40).prop_map(DerValue::OctetString),
        bit_string(),
        Just(DerValue::Null),
        oid().prop_map(DerValue::Oid),
        "\\PC{0,16}".prop_map(DerValue::Utf8String),
        "[A-Za-z0-9 '()+,./:=?-]{0,16}".prop_map(DerValue::PrintableString),
        (-62_167_219_200i64..=253_402_300_799).prop_map(|s| DerValue::GeneralizedTime(
            GeneralizedTime::from_unix(s).expect("in range")
        )),
        (0u8..=30, prop::collection::vec(any::<u8>(), 0..16))
            .prop_map(|(n, c)| DerValue::implicit(n, c)),
    ];
    leaf.prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(DerValue::Sequence),
            prop::collection::vec(inner.clone(), 0..6).prop_map(DerValue::Set),
            (0u8..=30, inner).prop_map(|(n, v)| DerValue::explicit(n, v)),
        ]
    })
}

pub fn sym_oid(s: u8) -> Oid {
    if s == ANY {
        oids::any_policy()
    } else {
        Oid::from_arcs(&[1, 3, 6, 1, 4, 1, 99999, s as u64])
    }
}

fn sim_cert(last: bool) -> impl Strategy<Value = SimCert> {
    let policies = prop_oneof![
        1 => Just(None),
        6 => prop::collection::btree_set(0u8..5, 1..4).prop_map(Some),
    ];
    let mappings = if last {
        Just(Vec::new()).boxed()
    } else {
        prop::collection::vec((1u8..5, 1u8..5), 0..3).boxed()
    };
    (
        policies,
        mappings,
        prop::option::weighted(0.25, 0u64..3),
        prop::option::weighted(0.25, 0u64..3),
        prop::bool::weighted(0.15),
    )
        .prop_map(
            |(policies, mappings, require_explicit, inhibit_mapping, self_issued)| SimCert {
                policies,
                mappings,
                require_explicit,
                inhibit_mapping,
                self_issued,
            },
        )
}

/// Chains of one to five certificates; the last never maps policies.
pub fn sim_chain() -> impl Strategy<Value = Vec<SimCert>> {
    (1usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec(sim_cert(false), n - 1),
            sim_cert(true),
        )
            .prop_map(|(mut v, last)| {
                v.push(last);
                v
            })
    })
}

pub fn sim_request() -> impl Strategy<Value = SimRequest> {
    (
        prop::collection::btree_set(1u8..5, 0..3),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(
            |(acceptable, explicit_required, inhibit_mapping)| SimRequest {
                acceptable,
                explicit_required,
                inhibit_mapping,
            },
        )
}

/// A named key holder for random certificate graphs.
pub struct Entity {
    pub name: Name,
    pub key: KeyPair,
}

impl Entity {
    pub fn new(name: &str, seed: &str) -> Self {
        Self {
            name: name.parse().expect("name"),
            key: generate(&AlgorithmId::ed25519(), Some(seed.as_bytes())).expect("key"),
        }
    }

    pub fn issue(&self, subject: &Entity, serial: u64) -> Certificate {
        let t0 = GeneralizedTime::from_ymd_hms(2025, 1, 1, 0, 0, 0).expect("time");
        Certificate::sign(
            TbsCertificate {
                serial,
                signature_alg: self.key.algorithm.oid.clone(),
                issuer: self.name.clone(),
                validity: Validity {
                    not_before: t0,
                    not_after: t0.plus_days(365),
                },
                subject: subject.name.clone(),
                public_key: SubjectPublicKey {
                    algorithm: subject.key.algorithm.oid.clone(),
                    key: subject.key.public_key.clone(),
                },
                extensions: Extensions::default(),
            },
            &self.key,
        )
        .expect("sign")
    }
}

/// Frequency table, for reporting how varied a generated sample was.
pub fn histogram<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, usize> {
    let mut h = BTreeMap::new();
    for k in items {
        *h.entry(k).or_default() += 1;
    }
    h
}
