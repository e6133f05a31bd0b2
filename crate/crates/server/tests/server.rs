use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use certval_core::crypto::{generate, AlgorithmId};
use certval_core::csm::{StatusQuery, StatusReply, StatusValue};
use certval_core::ppm::CprRequirement;
use certval_core::pvm::{FailureReason, VerdictStatus};
use certval_core::vpm::{
    build_request, parse_and_verify_response, ErrorCode, PinnedSigner, RequestOptions,
    ResponseTrust, ServerMessage, TargetResult, ValidationRequest, WantBacks, DVCS_CONTENT_TYPE,
    STATUS_CONTENT_TYPE,
};
use certval_core::{Certificate, GeneralizedTime, Oid};
use cvs_server::{Identity, Overrides, RunningServer, Service, Settings};
use pki_forge::scenarios::write_catalog;
use pki_forge::{scenario_validation_time, test_policies, Forged};

const DEFAULT_POLICY: &str = "1.3.6.1.4.1.57264.4.1";
const SIGNED_ONLINE_POLICY: &str = "1.3.6.1.4.1.57264.4.2";

fn config(extra: &str) -> String {
    format!(
        r#"
[server]
name = "O=Test,CN=CVS"
repository = "repo"
serial-file = "serial"
cert = "server.der"
key = "server.key"

[clock]
fixed = "20250131000000Z"
{extra}
[[policy]]
oid = "{DEFAULT_POLICY}"
default = true
default-want-backs = "chain"
usages = {{ e-mail = ["1.3.6.1.4.1.57264.3.10"], p1 = ["1.3.6.1.4.1.57264.3.1"] }}

[[policy]]
oid = "{SIGNED_ONLINE_POLICY}"
revocation = "online"
require-signed-requests = true
"#
    )
}

struct Fixture {
    dir: tempfile::TempDir,
    catalog: Vec<(&'static str, Forged)>,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let catalog = write_catalog(&dir.path().join("repo")).unwrap();
        fs::write(dir.path().join("cvs.toml"), config("")).unwrap();
        Self { dir, catalog }
    }

    fn settings(&self) -> Settings {
        Settings::load(&self.dir.path().join("cvs.toml"), &Overrides::default()).unwrap()
    }

    fn service(&self) -> Service {
        Service::new(self.settings()).unwrap()
    }

    fn ee(&self, scenario: &str) -> Certificate {
        let (_, f) = self.catalog.iter().find(|(n, _)| *n == scenario).unwrap();
        f.certs
            .iter()
            .find(|c| c.subject == "ee")
            .unwrap()
            .cert
            .clone()
    }

    fn forged(&self, scenario: &str) -> &Forged {
        &self.catalog.iter().find(|(n, _)| *n == scenario).unwrap().1
    }
}

fn now() -> GeneralizedTime {
    scenario_validation_time()
}

fn request(opts: &RequestOptions, targets: Vec<Certificate>) -> ValidationRequest {
    build_request(opts, targets, 0x1234_5678, now()).unwrap()
}

fn p1() -> RequestOptions {
    RequestOptions {
        cpr: Some(CprRequirement::strict(
            [test_policies::p1()].into(),
            false,
            false,
        )),
        ..RequestOptions::default()
    }
}

fn exchange(service: &Service, req: &ValidationRequest) -> ServerMessage {
    let body = service.handle_dvcs(&req.to_der().unwrap()).body;
    let pin = PinnedSigner(service.signing_certificate().fingerprint());
    parse_and_verify_response(
        &body,
        &req.info,
        &ResponseTrust {
            trust_unsigned: false,
            signer: &pin,
        },
    )
    .unwrap()
}

fn results(msg: ServerMessage) -> Vec<TargetResult> {
    match msg {
        ServerMessage::Dvc { info, .. } => info.results,
        ServerMessage::Error { info, .. } => panic!("error notice {}: {}", info.code, info.message),
    }
}

fn error_code(msg: &ServerMessage) -> ErrorCode {
    match msg {
        ServerMessage::Error { info, .. } => info.code,
        ServerMessage::Dvc { .. } => panic!("expected an error notice"),
    }
}

#[test]
fn two_targets_keep_request_order() {
    let fx = Fixture::new();
    let svc = fx.service();
    let req = request(&p1(), vec![fx.ee("happy3"), fx.ee("revoked-ee")]);
    let r = results(exchange(&svc, &req));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0].target, fx.ee("happy3").fingerprint());
    assert_eq!(r[0].status, VerdictStatus::Valid);
    assert_eq!(
        r[1].status,
        VerdictStatus::Invalid {
            reason: FailureReason::Revoked,
            failing_index: 1
        }
    );
    // The CRL proving the revocation comes back even without the crls want-back.
    let crls = r[1].crls.as_ref().expect("revocation evidence");
    assert!(crls
        .iter()
        .any(|c| c.entry(fx.ee("revoked-ee").serial()).is_some()));
    // Default want-backs of the policy: the chain, anchor first.
    let chain = r[0].chain.as_ref().unwrap();
    assert_eq!(chain.len(), 3);
    assert_eq!(chain.last().unwrap(), &fx.ee("happy3"));
}

#[test]
fn weak_usage_matches_equivalent_strict_run() {
    let fx = Fixture::new();
    let svc = fx.service();
    let weak = RequestOptions {
        cpr: Some(CprRequirement::weak("e-mail")),
        ..RequestOptions::default()
    };
    let strict = RequestOptions {
        cpr: Some(CprRequirement::strict(
            [test_policies::mail()].into(),
            false,
            false,
        )),
        ..RequestOptions::default()
    };
    let w = results(exchange(&svc, &request(&weak, vec![fx.ee("happy3")])));
    let s = results(exchange(&svc, &request(&strict, vec![fx.ee("happy3")])));
    assert_eq!(w[0].status, VerdictStatus::Valid);
    assert_eq!(
        w[0].authorized_policies,
        BTreeSet::from([test_policies::mail()])
    );
    assert_eq!(
        (w[0].status, &w[0].authorized_policies),
        (s[0].status, &s[0].authorized_policies)
    );

    // A weak requirement is not "any policy": P1-only chains fail under e-mail.
    let w = results(exchange(
        &svc,
        &request(
            &weak,
            vec![fx.ee("revoked-intermediate"), fx.ee("mesh2paths")],
        ),
    ));
    assert_eq!(
        w[1].status,
        VerdictStatus::Invalid {
            reason: FailureReason::PolicyFailure,
            failing_index: -1
        }
    );

    // The default usage is any policy.
    let d = RequestOptions {
        cpr: Some(CprRequirement::weak("default")),
        ..RequestOptions::default()
    };
    assert_eq!(
        results(exchange(&svc, &request(&d, vec![fx.ee("no-policy-ee")])))[0].status,
        VerdictStatus::Valid
    );
}

#[test]
fn unmapped_usage_is_rejected() {
    let fx = Fixture::new();
    let svc = fx.service();
    let req = request(
        &RequestOptions {
            cpr: Some(CprRequirement::weak("fax")),
            ..RequestOptions::default()
        },
        vec![fx.ee("happy3")],
    );
    let msg = exchange(&svc, &req);
    assert_eq!(error_code(&msg), ErrorCode::UnknownUsage);
    assert!(msg.signature().is_some());
    assert_eq!(msg.request_info().unwrap(), &req.info);
}

#[test]
fn admission_checks() {
    let fx = Fixture::new();
    let svc = fx.service();
    let targets = vec![fx.ee("happy3")];

    let late = build_request(&p1(), targets.clone(), 1, now().plus_secs(-600)).unwrap();
    assert_eq!(error_code(&exchange(&svc, &late)), ErrorCode::BadTime);
    let edge = build_request(&p1(), targets.clone(), 1, now().plus_secs(-300)).unwrap();
    assert!(matches!(exchange(&svc, &edge), ServerMessage::Dvc { .. }));

    let other = RequestOptions {
        dvcs_name: Some("CN=other".parse().unwrap()),
        ..p1()
    };
    assert_eq!(
        error_code(&exchange(&svc, &request(&other, targets.clone()))),
        ErrorCode::WrongServer
    );
    let ours = RequestOptions {
        dvcs_name: Some("O=Test,CN=CVS".parse().unwrap()),
        ..p1()
    };
    assert!(matches!(
        exchange(&svc, &request(&ours, targets.clone())),
        ServerMessage::Dvc { .. }
    ));

    let mut service2 = request(&p1(), targets.clone());
    service2.info.service = 2;
    assert_eq!(
        error_code(&exchange(&svc, &service2)),
        ErrorCode::UnsupportedService
    );

    let unknown = RequestOptions {
        request_policy: Some("1.2.3.4".parse().unwrap()),
        ..p1()
    };
    assert_eq!(
        error_code(&exchange(&svc, &request(&unknown, targets.clone()))),
        ErrorCode::UnknownRequestPolicy
    );

    let mut mixed = request(
        &RequestOptions {
            cpr: Some(CprRequirement::weak("e-mail")),
            ..RequestOptions::default()
        },
        targets,
    );
    mixed.cpr.acceptable_set.push(test_policies::p1());
    assert_eq!(
        error_code(&exchange(&svc, &mixed)),
        ErrorCode::MalformedRequest
    );
}

#[test]
fn garbage_gets_an_unechoed_notice() {
    let fx = Fixture::new();
    let svc = fx.service();
    let body = svc.handle_dvcs(b"\x30\x03\x02\x01").body;
    match ServerMessage::from_der(&body).unwrap() {
        ServerMessage::Error { info, signature } => {
            assert_eq!(info.code, ErrorCode::MalformedRequest);
            assert!(info.request_info.is_none());
            assert!(signature.unwrap().verifies(&info.to_der()));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn signed_request_policy() {
    let fx = Fixture::new();
    let svc = fx.service();
    let opts = RequestOptions {
        request_policy: Some(SIGNED_ONLINE_POLICY.parse().unwrap()),
        ..p1()
    };
    let unsigned = request(&opts, vec![fx.ee("happy3"), fx.ee("revoked-ee")]);
    assert_eq!(
        error_code(&exchange(&svc, &unsigned)),
        ErrorCode::MalformedRequest
    );

    let key = generate(&AlgorithmId::ed25519(), Some(b"requester")).unwrap();
    let requester = Identity::self_signed(&"CN=Alice".parse().unwrap(), key, now());
    let mut signed = unsigned.clone();
    signed.sign(&requester.cert, &requester.key).unwrap();
    let r = results(exchange(&svc, &signed));
    assert_eq!(r[0].status, VerdictStatus::Valid);
    // Online regime through the built-in responder.
    assert_eq!(
        r[1].status,
        VerdictStatus::Invalid {
            reason: FailureReason::Revoked,
            failing_index: 1
        }
    );
    let reply = StatusReply::from_der(&r[1].online_replies.as_ref().unwrap()[0]).unwrap();
    assert!(reply.verify_signature(svc.signing_certificate().public_key()));

    let mut tampered = signed.clone();
    tampered.signature.as_mut().unwrap().signature[0] ^= 1;
    assert_eq!(
        error_code(&exchange(&svc, &tampered)),
        ErrorCode::MalformedRequest
    );
}

#[test]
fn serials_increase_across_restarts() {
    let fx = Fixture::new();
    let req = request(&p1(), vec![fx.ee("happy3")]);
    let serial = |svc: &Service| match exchange(svc, &req) {
        ServerMessage::Dvc { info, .. } => info.serial,
        _ => panic!("expected a DVC"),
    };
    let svc = fx.service();
    let (a, b) = (serial(&svc), serial(&svc));
    assert!(b > a);
    let signer = svc.signing_certificate().clone();
    drop(svc);
    let svc = fx.service();
    assert!(serial(&svc) > b);
    // The generated identity was persisted and is reused.
    assert_eq!(svc.signing_certificate(), &signer);
}

#[test]
fn validation_time_override_and_want_backs() {
    let fx = Fixture::new();
    let svc = fx.service();
    // Before the revocation date the revoked end entity is still good.
    let early = GeneralizedTime::from_ymd_hms(2025, 1, 5, 0, 0, 0).unwrap();
    let want = WantBacks(WantBacks::VALIDATION_TIME | WantBacks::CRLS);
    let opts = RequestOptions {
        validation_time: Some(early),
        want_backs: Some(want),
        ..p1()
    };
    let r = results(exchange(&svc, &request(&opts, vec![fx.ee("revoked-ee")])));
    assert_eq!(r[0].status, VerdictStatus::Valid);
    assert_eq!(r[0].validation_time, Some(early));
    assert!(r[0].chain.is_none());
    assert_eq!(r[0].crls.as_ref().unwrap().len(), 2);
}

#[test]
fn supplied_chains_fill_repository_gaps() {
    let fx = Fixture::new();
    let sub = fx.forged("happy3").cert("root", "sub").unwrap().clone();
    fs::remove_file(fx.dir.path().join("repo/certs/happy3.sub-by-root.der")).unwrap();
    let svc = fx.service();
    let bare = results(exchange(&svc, &request(&p1(), vec![fx.ee("happy3")])));
    assert_eq!(bare[0].status, VerdictStatus::Unknown);
    let opts = RequestOptions {
        supplied: vec![sub.clone()],
        ..p1()
    };
    let r = results(exchange(&svc, &request(&opts, vec![fx.ee("happy3")])));
    assert_eq!(r[0].status, VerdictStatus::Valid);

    let text = config("").replace(
        "default-want-backs",
        "allow-supplied-chains = false\ndefault-want-backs",
    );
    fs::write(fx.dir.path().join("cvs.toml"), text).unwrap();
    let svc = fx.service();
    let r = results(exchange(&svc, &request(&opts, vec![fx.ee("happy3")])));
    assert_eq!(r[0].status, VerdictStatus::Unknown);
}

#[test]
fn anchor_usages_restrict_weak_requests() {
    let fx = Fixture::new();
    let anchors = fx.dir.path().join("repo/anchors.txt");
    let text = fs::read_to_string(&anchors).unwrap();
    let narrowed: String = text
        .lines()
        .map(|l| {
            if l.contains(" happy3.root ") {
                l.replace(" any", " code-signing")
            } else {
                l.to_owned()
            }
        })
        .map(|l| l + "\n")
        .collect();
    fs::write(&anchors, narrowed).unwrap();
    let svc = fx.service();
    let weak = RequestOptions {
        cpr: Some(CprRequirement::weak("e-mail")),
        ..RequestOptions::default()
    };
    assert_eq!(
        results(exchange(&svc, &request(&weak, vec![fx.ee("happy3")])))[0].status,
        VerdictStatus::Unknown
    );
    // Strict requirements use every anchor of the policy.
    assert_eq!(
        results(exchange(&svc, &request(&p1(), vec![fx.ee("happy3")])))[0].status,
        VerdictStatus::Valid
    );
}

#[test]
fn reload_swaps_the_snapshot() {
    let fx = Fixture::new();
    let svc = fx.service();
    let req = request(&p1(), vec![fx.ee("happy3")]);
    let before = svc.repository().snapshot();
    fs::remove_file(fx.dir.path().join("repo/certs/happy3.sub-by-root.der")).unwrap();
    assert_eq!(
        results(exchange(&svc, &req))[0].status,
        VerdictStatus::Valid
    );
    svc.reload().unwrap();
    assert_eq!(
        results(exchange(&svc, &req))[0].status,
        VerdictStatus::Unknown
    );
    assert_eq!(
        before.graph.len(),
        svc.repository().snapshot().graph.len() + 1
    );
}

#[test]
fn startup_rejects_unknown_anchor_labels() {
    let fx = Fixture::new();
    let text = config("").replace("default = true", "default = true\nanchors = [\"nobody\"]");
    fs::write(fx.dir.path().join("cvs.toml"), text).unwrap();
    assert!(Service::new(fx.settings()).is_err());
}

fn post(url: &str, content_type: &str, body: &[u8]) -> (u16, Vec<u8>) {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .post(url)
        .header("content-type", content_type)
        .send(body)
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_vec().unwrap())
}

#[test]
fn http_endpoints() {
    let fx = Fixture::new();
    let svc = Arc::new(fx.service());
    let server = RunningServer::start(svc.clone(), "127.0.0.1:0").unwrap();

    let health = ureq::get(&server.url("/health"))
        .call()
        .unwrap()
        .body_mut()
        .read_to_string()
        .unwrap();
    assert_eq!(health, "ok");

    let (code, body) = post(&server.url("/dvcs"), DVCS_CONTENT_TYPE, b"junk");
    assert_eq!(code, 200);
    assert!(matches!(
        ServerMessage::from_der(&body).unwrap(),
        ServerMessage::Error { .. }
    ));
    assert_eq!(post(&server.url("/dvcs"), "text/plain", b"junk").0, 415);

    let query = StatusQuery::for_cert(&fx.ee("revoked-ee"), 99);
    let (code, body) = post(&server.url("/status"), STATUS_CONTENT_TYPE, &query.to_der());
    assert_eq!(code, 200);
    let reply = StatusReply::from_der(&body).unwrap();
    assert!(reply.verify_signature(svc.signing_certificate().public_key()));
    assert!(matches!(reply.value_at(now()), StatusValue::Revoked { .. }));

    // Concurrent requests: all answered, serials unique.
    let url = server.url("/dvcs");
    let ee = fx.ee("happy3");
    let handles: Vec<_> = (0..8u64)
        .map(|i| {
            let (url, ee) = (url.clone(), ee.clone());
            std::thread::spawn(move || {
                let req = build_request(&p1(), vec![ee], i, now()).unwrap();
                let (_, body) = post(&url, DVCS_CONTENT_TYPE, &req.to_der().unwrap());
                match ServerMessage::from_der(&body).unwrap() {
                    ServerMessage::Dvc { info, .. } => {
                        assert_eq!(info.request_info.nonce, i);
                        info.serial
                    }
                    other => panic!("{other:?}"),
                }
            })
        })
        .collect();
    let serials: BTreeSet<u64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(serials.len(), 8);
    server.stop().unwrap();
}

#[test]
fn online_regime_over_http() {
    let fx = Fixture::new();
    let responder = Arc::new(fx.service());
    let server = RunningServer::start(responder.clone(), "127.0.0.1:0").unwrap();

    // A second server that asks the first one over HTTP.
    let second = tempfile::tempdir().unwrap();
    let online = format!(
        "[online]\nurl = \"{}\"\nresponder-cert = \"{}\"\n",
        server.url("/status"),
        fx.dir.path().join("server.der").display()
    );
    let text = config(&online)
        .replace(
            "repository = \"repo\"",
            &format!("repository = \"{}\"", fx.dir.path().join("repo").display()),
        )
        .replace(
            "revocation = \"online\"\nrequire-signed-requests = true",
            "revocation = \"online\"",
        );
    fs::write(second.path().join("cvs.toml"), text).unwrap();
    let svc = Service::new(
        Settings::load(&second.path().join("cvs.toml"), &Overrides::default()).unwrap(),
    )
    .unwrap();

    let opts = RequestOptions {
        request_policy: Some(SIGNED_ONLINE_POLICY.parse().unwrap()),
        ..p1()
    };
    let r = results(exchange(
        &svc,
        &request(
            &opts,
            vec![
                fx.ee("happy3"),
                fx.ee("revoked-ee"),
                fx.ee("revoked-intermediate"),
            ],
        ),
    ));
    assert_eq!(r[0].status, VerdictStatus::Valid);
    assert_eq!(
        r[1].status,
        VerdictStatus::Invalid {
            reason: FailureReason::Revoked,
            failing_index: 1
        }
    );
    assert_eq!(
        r[2].status,
        VerdictStatus::Invalid {
            reason: FailureReason::Revoked,
            failing_index: 0
        }
    );

    // Responder gone: revocation cannot be determined.
    server.stop().unwrap();
    let r = results(exchange(&svc, &request(&opts, vec![fx.ee("happy3")])));
    assert_eq!(
        r[0].status,
        VerdictStatus::Invalid {
            reason: FailureReason::RevocationUndetermined,
            failing_index: 0
        }
    );
}

#[test]
fn config_paths_are_relative_to_the_file() {
    let fx = Fixture::new();
    let s = fx.settings();
    assert_eq!(s.repository, fx.dir.path().join("repo"));
    assert!(Path::new(&s.serial_file.unwrap()).starts_with(fx.dir.path()));
    let _: Oid = DEFAULT_POLICY.parse().unwrap();
}
