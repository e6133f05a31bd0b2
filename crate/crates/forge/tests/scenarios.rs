use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use certval_core::crypto::{generate, AlgorithmId};
use certval_core::csm::{
    CrlResponder, OnlineResponder, RevocationRegime, StatusSources, StatusTransport, StatusValue,
};
use certval_core::pcm::{discover, Direction, DEFAULT_MAX_LENGTH};
use certval_core::ppm::CprRequirement;
use certval_core::pvm::{
    validate_path, validate_target, FailureReason, ValidationInputs, Verdict, VerdictStatus,
};
use certval_core::{GeneralizedTime, Oid};
use certval_oracles::graph::all_simple_paths;
use pki_forge::scenarios::{expected_verdicts, forge_scenario, scenario, CATALOG};
use pki_forge::{forge, scenario_validation_time, test_policies, Forged, TopologySpec};

fn alias(a: &str) -> Oid {
    match a {
        "P1" => test_policies::p1(),
        "P2" => test_policies::p2(),
        "MAIL" => test_policies::mail(),
        other => panic!("unknown alias {other}"),
    }
}

fn p1_only() -> CprRequirement {
    CprRequirement::strict([test_policies::p1()].into(), false, false)
}

fn target_of(forged: &Forged) -> &certval_core::Certificate {
    &forged
        .certs
        .iter()
        .find(|c| c.subject == "ee")
        .expect("every scenario has an ee")
        .cert
}

fn run(forged: &Forged, regime: RevocationRegime, online: Option<&OnlineResponder>) -> Verdict {
    let crls = forged.crl_list();
    let status = StatusSources {
        regime,
        crls: &crls,
        online,
    };
    let cpr = p1_only();
    let inputs = ValidationInputs {
        at: scenario_validation_time(),
        cpr: &cpr,
        status: &status,
    };
    validate_target(
        &forged.graph(),
        target_of(forged),
        DEFAULT_MAX_LENGTH,
        &inputs,
    )
}

struct InProcess {
    responder: CrlResponder,
    now: GeneralizedTime,
}

impl StatusTransport for InProcess {
    fn exchange(&self, query: &[u8]) -> Result<Vec<u8>, String> {
        self.responder
            .respond(query, self.now)
            .map_err(|e| e.to_string())
    }
}

fn online_for(forged: &Forged) -> OnlineResponder {
    let key = generate(&AlgorithmId::ed25519(), Some(b"test responder")).unwrap();
    let responder = CrlResponder::new(key, forged.crl_list());
    let spk = responder.public_key();
    OnlineResponder {
        transport: Arc::new(InProcess {
            responder,
            now: scenario_validation_time(),
        }),
        key: spk,
    }
}

#[test]
fn every_scenario_forges_and_self_checks() {
    assert_eq!(CATALOG.len(), 12);
    for s in CATALOG {
        let forged = forge_scenario(s.name).unwrap_or_else(|e| panic!("{}: {e}", s.name));
        forged.self_check(&s.topology()).unwrap();
        assert!(
            !s.description().is_empty(),
            "{} lacks a description",
            s.name
        );
    }
}

#[test]
fn golden_table_covers_the_catalog() {
    let names: Vec<String> = expected_verdicts()
        .into_iter()
        .map(|e| e.scenario)
        .collect();
    let catalog: Vec<String> = CATALOG.iter().map(|s| s.name.to_owned()).collect();
    assert_eq!(names, catalog);
}

#[test]
fn scenarios_match_golden_verdicts() {
    for exp in expected_verdicts() {
        let forged = forge_scenario(&exp.scenario).unwrap();
        let v = run(&forged, RevocationRegime::Crl, None);
        let name = &exp.scenario;
        match (exp.status.as_str(), v.status) {
            ("valid", VerdictStatus::Valid) => {}
            (
                "invalid",
                VerdictStatus::Invalid {
                    reason,
                    failing_index,
                },
            ) => {
                assert_eq!(Some(reason.label().to_owned()), exp.reason, "{name}");
                assert_eq!(Some(failing_index), exp.failing_index, "{name}");
            }
            (want, got) => panic!("{name}: expected {want}, got {got}"),
        }
        assert_eq!(v.chain.as_ref().unwrap().len(), exp.chain_length, "{name}");
        let authorized: BTreeSet<Oid> = exp.authorized.iter().map(|a| alias(a)).collect();
        assert_eq!(v.authorized_policies, authorized, "{name}");
        let mappings: Vec<(Oid, Oid)> = exp
            .mappings
            .iter()
            .map(|(a, b)| (alias(a), alias(b)))
            .collect();
        let got: Vec<(Oid, Oid)> = v
            .mappings_applied
            .iter()
            .map(|m| (m.issuer_domain.clone(), m.subject_domain.clone()))
            .collect();
        assert_eq!(got, mappings, "{name}");
    }
}

#[test]
fn online_status_agrees_with_crls() {
    for s in CATALOG {
        let forged = forge_scenario(s.name).unwrap();
        let online = online_for(&forged);
        let by_crl = run(&forged, RevocationRegime::Crl, None);
        let by_online = run(&forged, RevocationRegime::Online, Some(&online));
        assert_eq!(by_crl.status, by_online.status, "{}", s.name);
        let values = |v: &Verdict| {
            v.statuses
                .iter()
                .map(|(i, s)| (*i, s.value.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(values(&by_crl), values(&by_online), "{}", s.name);
    }
}

#[test]
fn revoked_ee_serial_is_listed_by_its_issuer() {
    let dir = tempfile::tempdir().unwrap();
    let forged = scenario("revoked-ee", dir.path()).unwrap();
    let ee = forged.cert("sub", "ee").unwrap();
    let entry = forged
        .crl_of("sub")
        .unwrap()
        .entry(ee.serial())
        .expect("ee listed");
    assert_eq!(entry.date, "20250111000000Z".parse().unwrap());
    assert!(forged.crl_of("root").unwrap().tbs.revoked.is_empty());

    let on_disk =
        certval_core::x509::parse_crl(&fs::read(dir.path().join("crls/sub.crl")).unwrap()).unwrap();
    assert!(on_disk.entry(ee.serial()).is_some());
}

#[test]
fn revoked_verdict_evidence_proves_revocation() {
    let forged = forge_scenario("revoked-ee").unwrap();
    let v = run(&forged, RevocationRegime::Crl, None);
    let status = v.revocation().expect("revocation evidence");
    let crl = match &status.evidence {
        Some(certval_core::csm::Evidence::Crl(crl)) => crl.clone(),
        other => panic!("expected CRL evidence, got {other:?}"),
    };
    let sub_key = forged.cert("root", "sub").unwrap().public_key().clone();
    assert!(crl.check_signature(&sub_key).unwrap());
    assert!(crl.entry(target_of(&forged).serial()).is_some());
}

#[test]
fn online_evidence_is_a_signed_reply() {
    let forged = forge_scenario("revoked-ee").unwrap();
    let online = online_for(&forged);
    let v = run(&forged, RevocationRegime::Online, Some(&online));
    let status = v.revocation().unwrap();
    let bytes = match &status.evidence {
        Some(certval_core::csm::Evidence::Online(b)) => b.clone(),
        other => panic!("expected online evidence, got {other:?}"),
    };
    let reply = certval_core::csm::StatusReply::from_der(&bytes).unwrap();
    assert!(reply.verify_signature(&online.key));
    assert!(matches!(
        reply.value_at(scenario_validation_time()),
        StatusValue::Revoked { .. }
    ));
}

fn walk(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn forging_is_deterministic() {
    for s in CATALOG {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        scenario(s.name, a.path()).unwrap();
        scenario(s.name, b.path()).unwrap();
        let (ta, tb) = (walk(a.path()), walk(b.path()));
        assert!(
            ta.keys().any(|p| p.starts_with("certs")) && ta.contains_key(Path::new("anchors.txt"))
        );
        assert_eq!(ta, tb, "{}", s.name);
    }
}

#[test]
fn written_tree_matches_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let forged = scenario("mesh2paths", dir.path()).unwrap();
    let tree = walk(dir.path());
    for c in &forged.certs {
        assert_eq!(tree[&c.file], c.cert.to_der().unwrap());
    }
    assert_eq!(tree.keys().filter(|p| p.starts_with("crls")).count(), 3);
    assert_eq!(tree.keys().filter(|p| p.starts_with("keys")).count(), 4);
    let anchors = certval_core::anchors::parse_manifest(
        &String::from_utf8(tree[Path::new("anchors.txt")].clone()).unwrap(),
    )
    .unwrap();
    assert_eq!(anchors, forged.anchors);
}

/// Maps the forged topology onto the abstract graph the oracle enumerates.
fn oracle_paths(
    spec: &TopologySpec,
    target_edge: usize,
    max_len: usize,
) -> BTreeSet<(usize, Vec<usize>)> {
    let index: BTreeMap<&str, usize> = spec
        .entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.label.as_str(), i))
        .collect();
    let edges: Vec<(usize, usize)> = spec
        .edges
        .iter()
        .map(|e| (index[e.issuer.as_str()], index[e.subject.as_str()]))
        .collect();
    let anchors: BTreeSet<usize> = spec
        .entities
        .iter()
        .filter(|e| e.kind == pki_forge::EntityKind::Root)
        .map(|e| index[e.label.as_str()])
        .collect();
    all_simple_paths(&edges, &anchors, target_edge, max_len)
}

fn discovered(
    forged: &Forged,
    spec: &TopologySpec,
    dir: Direction,
) -> BTreeSet<(usize, Vec<usize>)> {
    let index: BTreeMap<&str, usize> = spec
        .entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.label.as_str(), i))
        .collect();
    let edge_of = |fp| {
        let c = forged
            .certs
            .iter()
            .find(|c| c.cert.fingerprint() == fp)
            .unwrap();
        spec.edges
            .iter()
            .position(|e| e.issuer == c.issuer && e.subject == c.subject)
            .unwrap()
    };
    let anchor_of = |fp| {
        let a = forged.anchors.iter().find(|a| a.fingerprint == fp).unwrap();
        index[a.label.as_str()]
    };
    discover(&forged.graph(), target_of(forged), dir, DEFAULT_MAX_LENGTH)
        .unwrap()
        .iter()
        .map(|c| {
            (
                anchor_of(c.anchor_fingerprint()),
                c.fingerprints().iter().map(|fp| edge_of(*fp)).collect(),
            )
        })
        .collect()
}

#[test]
fn mesh_and_cycle_discovery_match_oracle() {
    for (name, count) in [("mesh2paths", 2), ("cycle", 2)] {
        let spec = CATALOG.iter().find(|s| s.name == name).unwrap().topology();
        let forged = forge(&spec).unwrap();
        let ee_edge = spec.edges.iter().position(|e| e.subject == "ee").unwrap();
        let expected = oracle_paths(&spec, ee_edge, DEFAULT_MAX_LENGTH);
        assert_eq!(expected.len(), count, "{name}");
        for dir in [Direction::Forward, Direction::Reverse] {
            assert_eq!(discovered(&forged, &spec, dir), expected, "{name} {dir:?}");
        }
    }
}

#[test]
fn mesh_with_one_revoked_path_is_valid_via_the_other() {
    let mut text = CATALOG
        .iter()
        .find(|s| s.name == "mesh2paths")
        .unwrap()
        .spec
        .to_owned();
    text.push_str("\n[[revoke]]\nissuer = \"r1\"\nsubject = \"s\"\n");
    let forged = forge(&TopologySpec::parse(&text).unwrap()).unwrap();

    let crls = forged.crl_list();
    let status = StatusSources {
        regime: RevocationRegime::Crl,
        crls: &crls,
        online: None,
    };
    let cpr = p1_only();
    let inputs = ValidationInputs {
        at: scenario_validation_time(),
        cpr: &cpr,
        status: &status,
    };
    let chains = discover(
        &forged.graph(),
        target_of(&forged),
        Direction::Forward,
        DEFAULT_MAX_LENGTH,
    )
    .unwrap();
    assert_eq!(chains.len(), 2);

    let r1 = forged
        .anchors
        .iter()
        .find(|a| a.label == "r1")
        .unwrap()
        .fingerprint;
    for chain in &chains {
        let v = validate_path(chain, &inputs);
        if chain.anchor_fingerprint() == r1 {
            assert_eq!(
                v.status,
                VerdictStatus::Invalid {
                    reason: FailureReason::Revoked,
                    failing_index: 0
                }
            );
        } else {
            assert!(v.status.is_valid());
        }
    }
    let v = validate_target(
        &forged.graph(),
        target_of(&forged),
        DEFAULT_MAX_LENGTH,
        &inputs,
    );
    assert!(v.status.is_valid());
    assert_ne!(v.chain.unwrap().anchor_fingerprint(), r1);
}

#[test]
fn bad_signature_is_found_by_validation_not_discovery() {
    let forged = forge_scenario("bad-signature").unwrap();
    let chains = discover(
        &forged.graph(),
        target_of(&forged),
        Direction::Forward,
        DEFAULT_MAX_LENGTH,
    )
    .unwrap();
    assert_eq!(chains.len(), 1);
    let v = run(&forged, RevocationRegime::Crl, None);
    assert_eq!(
        v.status,
        VerdictStatus::Invalid {
            reason: FailureReason::BadSignature,
            failing_index: 1
        }
    );
}

#[test]
fn unreachable_target_is_unknown() {
    let happy = forge_scenario("happy3").unwrap();
    let stranger = forge_scenario("mesh2paths").unwrap();
    let crls = happy.crl_list();
    let status = StatusSources {
        regime: RevocationRegime::Crl,
        crls: &crls,
        online: None,
    };
    let cpr = CprRequirement::any_policy();
    let inputs = ValidationInputs {
        at: scenario_validation_time(),
        cpr: &cpr,
        status: &status,
    };
    let v = validate_target(
        &happy.graph(),
        target_of(&stranger),
        DEFAULT_MAX_LENGTH,
        &inputs,
    );
    assert_eq!(v.status, VerdictStatus::Unknown);
    assert!(v.chain.is_none());
}

#[test]
fn validation_is_repeatable() {
    for s in CATALOG {
        let forged = forge_scenario(s.name).unwrap();
        let a = run(&forged, RevocationRegime::Crl, None);
        let b = run(&forged, RevocationRegime::Crl, None);
        assert_eq!(a.status, b.status, "{}", s.name);
        assert_eq!(a.chain, b.chain, "{}", s.name);
    }
}

#[test]
fn catalog_merges_without_name_collisions() {
    let dir = tempfile::tempdir().unwrap();
    let all = pki_forge::scenarios::write_catalog(dir.path()).unwrap();
    let tree = walk(dir.path());
    let certs: usize = all.iter().map(|(_, f)| f.certs.len()).sum();
    assert_eq!(
        tree.keys().filter(|p| p.starts_with("certs")).count(),
        certs
    );
    let anchors = certval_core::anchors::parse_manifest(
        std::str::from_utf8(&tree[Path::new("anchors.txt")]).unwrap(),
    )
    .unwrap();
    assert_eq!(
        anchors.len(),
        all.iter().map(|(_, f)| f.anchors.len()).sum::<usize>()
    );
    assert!(anchors.iter().any(|a| a.label == "happy3.root"));

    // Distinct scenarios never share a subject name, so merged discovery stays per-scenario.
    let mut subjects: std::collections::HashMap<certval_core::Name, &str> =
        std::collections::HashMap::new();
    for (name, f) in &all {
        for c in &f.certs {
            if let Some(other) = subjects.insert(c.cert.subject().clone(), name) {
                assert_eq!(other, *name);
            }
        }
    }
}
