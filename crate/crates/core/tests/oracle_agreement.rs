//! Agreement of path discovery and policy processing with the brute-force
//! oracles over randomly generated inputs.

use std::collections::{BTreeMap, BTreeSet};

use certval_core::crypto::{generate, AlgorithmId, KeyPair};
use certval_core::pcm::{discover, CertGraph, Direction};
use certval_core::ppm::{final_verdict, init_state, process_fields, CprRequirement, PolicyFields};
use certval_core::x509::{
    oids, Certificate, Extensions, Fingerprint, PolicyMapping, SubjectPublicKey, TbsCertificate,
    Validity,
};
use certval_core::{GeneralizedTime, Name, Oid};
use certval_oracles::graph::all_simple_paths;
use certval_oracles::policy::{simulate, SimCert, SimOutcome, SimRequest, ANY};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym_oid(s: u8) -> Oid {
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

fn sim_chain() -> impl Strategy<Value = Vec<SimCert>> {
    (1usize..6).prop_flat_map(|n| {
        let body = prop::collection::vec(sim_cert(false), n - 1);
        (body, sim_cert(true)).prop_map(|(mut v, last)| {
            v.push(last);
            v
        })
    })
}

fn sim_request() -> impl Strategy<Value = SimRequest> {
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

fn run_policy(chain: &[SimCert], req: &SimRequest) -> SimOutcome {
    let cpr = CprRequirement::strict(
        req.acceptable.iter().map(|&s| sym_oid(s)).collect(),
        req.explicit_required,
        req.inhibit_mapping,
    );
    let n = chain.len();
    let mut state = init_state(&cpr, n);
    for (i, c) in chain.iter().enumerate() {
        let fields = PolicyFields {
            policies: c
                .policies
                .as_ref()
                .map(|p| p.iter().map(|&s| sym_oid(s)).collect()),
            mappings: c
                .mappings
                .iter()
                .map(|&(a, b)| PolicyMapping {
                    issuer_domain: sym_oid(a),
                    subject_domain: sym_oid(b),
                })
                .collect(),
            require_explicit_policy: c.require_explicit,
            inhibit_policy_mapping: c.inhibit_mapping,
        };
        state = process_fields(state, &fields, c.self_issued, i + 1 == n);
    }
    let out = final_verdict(&state, &cpr);
    let back: BTreeMap<Oid, u8> = (0u8..5).map(|s| (sym_oid(s), s)).collect();
    SimOutcome {
        ok: out.ok,
        authorized: out.authorized_set.iter().map(|o| back[o]).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn policy_processing_matches_oracle(chain in sim_chain(), req in sim_request()) {
        prop_assert_eq!(run_policy(&chain, &req), simulate(&chain, &req));
    }
}

struct Entity {
    name: Name,
    key: KeyPair,
}

fn issue(issuer: &Entity, subject: &Entity, serial: u64) -> Certificate {
    let t0 = GeneralizedTime::from_ymd_hms(2025, 1, 1, 0, 0, 0).unwrap();
    Certificate::sign(
        TbsCertificate {
            serial,
            signature_alg: issuer.key.algorithm.oid.clone(),
            issuer: issuer.name.clone(),
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
        &issuer.key,
    )
    .unwrap()
}

#[test]
fn discovery_matches_oracle_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let max_len = 4;
    let mut nonempty = 0;
    for round in 0..200 {
        let n = rng.gen_range(3..8);
        let entities: Vec<Entity> = (0..n)
            .map(|i| Entity {
                name: format!("O=G{round},CN=E{i}").parse().unwrap(),
                key: generate(
                    &AlgorithmId::ed25519(),
                    Some(format!("{round}/{i}").as_bytes()),
                )
                .unwrap(),
            })
            .collect();
        let edge_count = rng.gen_range(n..3 * n);
        let edges: Vec<(usize, usize)> = (0..edge_count)
            .map(|_| {
                let a = rng.gen_range(0..n);
                let mut b = rng.gen_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                (a, b)
            })
            .collect();
        let anchors: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).chain([0]).collect();

        let mut graph = CertGraph::new();
        let mut serial = 1;
        let mut edge_of: BTreeMap<Fingerprint, usize> = BTreeMap::new();
        let mut anchor_of: BTreeMap<Fingerprint, usize> = BTreeMap::new();
        for &a in &anchors {
            anchor_of.insert(
                graph.insert_anchor(issue(&entities[a], &entities[a], serial)),
                a,
            );
            serial += 1;
        }
        let mut certs = Vec::new();
        for (i, &(a, b)) in edges.iter().enumerate() {
            let cert = issue(&entities[a], &entities[b], serial);
            serial += 1;
            edge_of.insert(graph.insert(cert.clone()), i);
            certs.push(cert);
        }

        let target = rng.gen_range(0..edges.len());
        let expected = all_simple_paths(&edges, &anchors, target, max_len);
        for dir in [Direction::Forward, Direction::Reverse] {
            let chains = discover(&graph, &certs[target], dir, max_len).unwrap();
            let got: BTreeSet<(usize, Vec<usize>)> = chains
                .iter()
                .map(|c| {
                    (
                        anchor_of[&c.anchor_fingerprint()],
                        c.fingerprints().iter().map(|fp| edge_of[fp]).collect(),
                    )
                })
                .collect();
            assert_eq!(got.len(), chains.len(), "duplicate chains in round {round}");
            assert_eq!(got, expected, "round {round} direction {dir:?}");
            assert!(chains.iter().all(|c| c.is_well_formed()));
            assert!(chains.windows(2).all(|w| w[0].len() <= w[1].len()));
        }
        if !expected.is_empty() {
            nonempty += 1;
        }
    }
    assert!(nonempty > 50, "too few graphs with a path: {nonempty}");
}
