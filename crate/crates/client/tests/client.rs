use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use certval_core::crypto::{generate, AlgorithmId};
use certval_core::ppm::CprRequirement;
use certval_core::vpm::{parse_request, render_any, ErrorCode, VpmError, WantBacks};
use certval_core::{Certificate, Name};
use cvs_server::{Overrides, RunningServer, Service, Settings};
use pki_forge::scenarios::write_catalog;
use pki_forge::{scenario_validation_time, test_policies, Forged};
use rp_client::{
    Client, ClientError, ClientProfile, Fault, Faulty, HttpTransport, Invocation, ServerCertCheck,
    SigningConfig, Target, Transport, TransportError,
};

const SIGNED_POLICY: &str = "1.3.6.1.4.1.57264.4.2";

fn config(identity: &str) -> String {
    format!(
        r#"
[server]
name = "O=Test,CN=CVS"
repository = "repo"
serial-file = "serial"
{identity}

[clock]
fixed = "20250131000000Z"

[[policy]]
oid = "1.3.6.1.4.1.57264.4.1"
default = true
default-want-backs = "none"
usages = {{ e-mail = ["1.3.6.1.4.1.57264.3.10"] }}

[[policy]]
oid = "{SIGNED_POLICY}"
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
        Self::with_identity("cert = \"server.der\"\nkey = \"server.key\"")
    }

    fn with_identity(identity: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let catalog = write_catalog(&dir.path().join("repo")).unwrap();
        fs::write(dir.path().join("cvs.toml"), config(identity)).unwrap();
        Self { dir, catalog }
    }

    fn service(&self) -> Arc<Service> {
        let settings =
            Settings::load(&self.dir.path().join("cvs.toml"), &Overrides::default()).unwrap();
        Arc::new(Service::new(settings).unwrap())
    }

    fn forged(&self, scenario: &str) -> &Forged {
        &self.catalog.iter().find(|(n, _)| *n == scenario).unwrap().1
    }

    fn ee(&self, scenario: &str) -> Certificate {
        self.forged(scenario)
            .certs
            .iter()
            .find(|c| c.subject == "ee")
            .unwrap()
            .cert
            .clone()
    }

    fn ee_path(&self, scenario: &str) -> PathBuf {
        let c = self
            .forged(scenario)
            .certs
            .iter()
            .find(|c| c.subject == "ee")
            .unwrap();
        let name = c.file.file_name().unwrap().to_string_lossy();
        self.dir
            .path()
            .join("repo/certs")
            .join(format!("{scenario}.{name}"))
    }

    fn target(&self, scenario: &str) -> Target {
        Target {
            label: scenario.to_owned(),
            cert: self.ee(scenario),
        }
    }
}

struct InProcess(Arc<Service>);

impl Transport for InProcess {
    fn post(&self, _url: &str, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        Ok(self.0.handle_dvcs(body).body)
    }
}

/// Remembers every request body and URL it carried.
struct Recording<T> {
    inner: T,
    seen: RefCell<Vec<(String, Vec<u8>)>>,
}

impl<T: Transport> Transport for Recording<T> {
    fn post(&self, url: &str, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        self.seen.borrow_mut().push((url.to_owned(), body.to_vec()));
        self.inner.post(url, body)
    }
}

fn at() -> Invocation {
    Invocation {
        nonce: 42,
        request_time: scenario_validation_time(),
    }
}

fn p1_profile() -> ClientProfile {
    ClientProfile {
        cpr: Some(CprRequirement::strict(
            [test_policies::p1()].into(),
            false,
            false,
        )),
        ..ClientProfile::new("http://in-process/dvcs")
    }
}

fn run(
    svc: &Arc<Service>,
    profile: &ClientProfile,
    targets: Vec<Target>,
) -> Result<rp_client::Outcome, ClientError> {
    let t = InProcess(svc.clone());
    Client::new(profile, &t).validate(targets, at())
}

#[test]
fn valid_invalid_and_unknown_exit_codes() {
    let fx = Fixture::new();
    let svc = fx.service();
    let p = p1_profile();
    let ok = run(&svc, &p, vec![fx.target("happy3")]).unwrap();
    assert_eq!(ok.exit_code(), 0);
    assert!(ok.report().contains("happy3: VALID"));

    let bad = run(&svc, &p, vec![fx.target("happy3"), fx.target("revoked-ee")]).unwrap();
    assert_eq!(bad.exit_code(), 2);

    let unknown = run(
        &svc,
        &p,
        vec![
            fx.target("happy3"),
            Target {
                label: "self".into(),
                cert: stranger(),
            },
        ],
    )
    .unwrap();
    assert_eq!(unknown.exit_code(), 3);
    assert!(unknown.report().contains("self: UNKNOWN"));

    let both = run(
        &svc,
        &p,
        vec![
            fx.target("revoked-ee"),
            Target {
                label: "self".into(),
                cert: stranger(),
            },
        ],
    )
    .unwrap();
    assert_eq!(both.exit_code(), 2);
}

fn stranger() -> Certificate {
    let key = generate(&AlgorithmId::ed25519(), Some(b"stranger")).unwrap();
    certval_core::vpm::self_signed_signer(
        &"CN=stranger".parse().unwrap(),
        &key,
        scenario_validation_time(),
    )
}

#[test]
fn revoked_report_shows_the_crl_entry() {
    let fx = Fixture::new();
    let svc = fx.service();
    let ee = fx.ee("revoked-ee");
    let crl = fx.forged("revoked-ee").crl_of("sub").unwrap();
    let entry = crl.entry(ee.serial()).unwrap();

    for want in [None, Some("chain")] {
        let p = ClientProfile {
            want_backs: want.map(|w| WantBacks::parse_list(w).unwrap()),
            ..p1_profile()
        };
        let report = run(&svc, &p, vec![fx.target("revoked-ee")])
            .unwrap()
            .report();
        assert!(
            report.contains("revoked-ee: INVALID revoked (certificate 1)"),
            "{report}"
        );
        let line = format!(
            "serial {}  revocation date {}  reason {}",
            entry.serial, entry.date, entry.reason
        );
        assert!(report.contains(&line), "{report}");
        assert!(report.contains(&format!(
            "crl {} (this update {}",
            crl.issuer(),
            crl.tbs.this_update
        )));
    }

    // An intermediate revoked: the entry names the intermediate, found through the chain.
    let p = ClientProfile {
        want_backs: Some(WantBacks(WantBacks::CHAIN)),
        ..p1_profile()
    };
    let report = run(&svc, &p, vec![fx.target("revoked-intermediate")])
        .unwrap()
        .report();
    let sub = fx
        .forged("revoked-intermediate")
        .cert("root", "sub")
        .unwrap();
    let root_crl = fx.forged("revoked-intermediate").crl_of("root").unwrap();
    let e = root_crl.entry(sub.serial()).unwrap();
    assert!(
        report.contains(&format!("serial {}  revocation date {}", e.serial, e.date)),
        "{report}"
    );
}

#[test]
fn fault_doubles_are_rejected() {
    let fx = Fixture::new();
    let svc = fx.service();
    let cases = [
        (Fault::WrongNonce, VpmError::NonceMismatch),
        (Fault::AlteredEcho, VpmError::EchoMismatch),
        (Fault::Unsigned, VpmError::UnsignedRejected),
        (Fault::TamperedSignature, VpmError::BadServerSignature),
        (Fault::TamperedBody, VpmError::BadServerSignature),
    ];
    for (fault, expected) in cases {
        let t = Faulty {
            inner: InProcess(svc.clone()),
            fault,
        };
        let p = p1_profile();
        match Client::new(&p, &t).validate(vec![fx.target("happy3")], at()) {
            Err(ClientError::Response(e)) => {
                assert_eq!(e, expected, "{fault:?}");
                let text = ClientError::Response(e).to_string();
                assert!(text.contains(&format!("{expected:?}")), "{text}");
            }
            other => panic!("{fault:?}: {other:?}"),
        }
    }
}

#[test]
fn unsigned_responses_need_explicit_trust() {
    let fx = Fixture::new();
    let svc = fx.service();
    let t = Faulty {
        inner: InProcess(svc.clone()),
        fault: Fault::Unsigned,
    };
    let p = ClientProfile {
        trust_unsigned: true,
        ..p1_profile()
    };
    let out = Client::new(&p, &t)
        .validate(vec![fx.target("happy3")], at())
        .unwrap();
    assert_eq!(out.exit_code(), 0);
    assert!(out.report().lines().next().unwrap().ends_with("UNSIGNED"));
    // Trusting unsigned answers does not excuse a broken signature.
    let t = Faulty {
        inner: InProcess(svc),
        fault: Fault::TamperedSignature,
    };
    assert!(matches!(
        Client::new(&p, &t).validate(vec![fx.target("happy3")], at()),
        Err(ClientError::Response(VpmError::BadServerSignature))
    ));
}

#[test]
fn pinned_server_certificate() {
    let fx = Fixture::new();
    let svc = fx.service();
    let good = ClientProfile {
        server_cert_check: ServerCertCheck::Pinned(svc.signing_certificate().fingerprint()),
        ..p1_profile()
    };
    assert!(run(&svc, &good, vec![fx.target("happy3")]).is_ok());
    let thin = ClientProfile {
        thin: true,
        ..good.clone()
    };
    assert!(run(&svc, &thin, vec![fx.target("happy3")]).is_ok());
    let wrong = ClientProfile {
        server_cert_check: ServerCertCheck::Pinned(fx.ee("happy3").fingerprint()),
        ..p1_profile()
    };
    assert!(matches!(
        run(&svc, &wrong, vec![fx.target("happy3")]),
        Err(ClientError::Response(VpmError::SignerRejected(_)))
    ));
    let thin = ClientProfile {
        thin: true,
        ..wrong
    };
    assert!(matches!(
        run(&svc, &thin, vec![fx.target("happy3")]),
        Err(ClientError::Response(VpmError::SignerRejected(_)))
    ));
}

#[test]
fn online_check_of_the_server_certificate() {
    // The server signs with an end-entity certificate from the repository.
    let good = Fixture::with_identity(
        "cert = \"repo/certs/happy3.ee-by-sub.der\"\nkey = \"repo/keys/happy3.ee.key\"",
    );
    let svc = good.service();
    let online = ClientProfile {
        server_cert_check: ServerCertCheck::Online { validator: None },
        ..p1_profile()
    };
    let t = Recording {
        inner: InProcess(svc.clone()),
        seen: RefCell::new(Vec::new()),
    };
    assert!(Client::new(&online, &t)
        .validate(vec![good.target("mesh2paths")], at())
        .is_ok());
    assert_eq!(t.seen.borrow().len(), 2);

    let revoked = Fixture::with_identity(
        "cert = \"repo/certs/revoked-ee.ee-by-sub.der\"\nkey = \"repo/keys/revoked-ee.ee.key\"",
    );
    let svc = revoked.service();
    match run(&svc, &online, vec![revoked.target("happy3")]) {
        Err(ClientError::Response(VpmError::SignerRejected(m))) => {
            assert!(m.contains("revoked"), "{m}")
        }
        other => panic!("{other:?}"),
    }
    // Thin clients skip the online check altogether.
    let thin = ClientProfile {
        thin: true,
        ..online
    };
    let t = Recording {
        inner: InProcess(svc),
        seen: RefCell::new(Vec::new()),
    };
    assert!(Client::new(&thin, &t)
        .validate(vec![revoked.target("happy3")], at())
        .is_ok());
    assert_eq!(t.seen.borrow().len(), 1);
}

#[test]
fn error_notices_are_errors() {
    let fx = Fixture::new();
    let svc = fx.service();
    let p = ClientProfile {
        cpr: Some(CprRequirement::weak("fax")),
        ..p1_profile()
    };
    let e = run(&svc, &p, vec![fx.target("happy3")]).unwrap_err();
    assert_eq!(e.code(), Some(ErrorCode::UnknownUsage));
    let p = ClientProfile {
        server_name: Some("CN=elsewhere".parse().unwrap()),
        ..p1_profile()
    };
    assert_eq!(
        run(&svc, &p, vec![fx.target("happy3")]).unwrap_err().code(),
        Some(ErrorCode::WrongServer)
    );
}

#[test]
fn signed_requests() {
    let fx = Fixture::new();
    let svc = fx.service();
    let key = generate(&AlgorithmId::ed25519(), Some(b"alice")).unwrap();
    let key_path = fx.dir.path().join("alice.key");
    fs::write(&key_path, key.to_key_file()).unwrap();
    let unsigned = ClientProfile {
        request_policy: Some(SIGNED_POLICY.parse().unwrap()),
        ..p1_profile()
    };
    assert_eq!(
        run(&svc, &unsigned, vec![fx.target("happy3")])
            .unwrap_err()
            .code(),
        Some(ErrorCode::MalformedRequest)
    );
    let signed = ClientProfile {
        signing: Some(SigningConfig {
            key: key_path,
            cert: None,
        }),
        requester: Some("CN=Alice".parse().unwrap()),
        ..unsigned
    };
    let out = run(&svc, &signed, vec![fx.target("happy3")]).unwrap();
    assert_eq!(out.exit_code(), 0);
    let sig = out.request.signature.as_ref().unwrap();
    assert_eq!(sig.signer.subject(), &"CN=Alice".parse::<Name>().unwrap());
    assert_eq!(sig.signer.public_key().key, key.public_key);
}

#[test]
fn evidence_is_stored_and_inspectable() {
    let fx = Fixture::new();
    let svc = fx.service();
    let dir = fx.dir.path().join("evidence");
    let p = ClientProfile {
        store_evidence: Some(dir.clone()),
        want_backs: Some(WantBacks::parse_list("chain,crls").unwrap()),
        ..p1_profile()
    };
    let out = run(&svc, &p, vec![fx.target("happy3"), fx.target("revoked-ee")]).unwrap();
    let certval_core::vpm::ServerMessage::Dvc { info, .. } = &out.message else {
        panic!()
    };
    let stem = format!("dvc-{}", info.serial);
    let text = render_any(&fs::read(dir.join(format!("{stem}.der"))).unwrap()).unwrap();
    assert!(text.contains(&format!("serial: {}", info.serial)));
    assert!(text.contains("status: valid"));
    assert!(text.contains("status: invalid(revoked, 1)"));
    let request =
        parse_request(&fs::read(dir.join(format!("{stem}.request.der"))).unwrap()).unwrap();
    assert_eq!(request, out.request);
    let crl = render_any(&fs::read(dir.join(format!("{stem}.target1.crl1.crl"))).unwrap()).unwrap();
    let ee = fx.ee("revoked-ee");
    assert!(
        crl.contains(&format!(
            "serial {} revoked 20250111000000Z reason keyCompromise",
            ee.serial()
        )),
        "{crl}"
    );
}

/// Every profile field changes the request bytes, where the request goes, or
/// how the answer is judged.
#[test]
fn profile_fields_all_matter() {
    let fx = Fixture::new();
    let svc = fx.service();
    let key_path = fx.dir.path().join("k.key");
    fs::write(
        &key_path,
        generate(&AlgorithmId::ed25519(), Some(b"k"))
            .unwrap()
            .to_key_file(),
    )
    .unwrap();
    let cert_path = fx.dir.path().join("k.der");
    let k = generate(&AlgorithmId::ed25519(), Some(b"k")).unwrap();
    let kc = certval_core::vpm::self_signed_signer(
        &"CN=K2".parse().unwrap(),
        &k,
        scenario_validation_time(),
    );
    fs::write(&cert_path, kc.to_der().unwrap()).unwrap();

    let sent = |p: &ClientProfile| {
        let t = Recording {
            inner: InProcess(svc.clone()),
            seen: RefCell::new(Vec::new()),
        };
        let _ = Client::new(p, &t).validate(vec![fx.target("happy3")], at());
        t.seen.into_inner().remove(0)
    };
    let base = ClientProfile::new("http://in-process/dvcs");
    let baseline = sent(&base);
    let variants: Vec<(&str, ClientProfile)> = vec![
        (
            "server-url",
            ClientProfile {
                server_url: "http://other/dvcs".into(),
                ..base.clone()
            },
        ),
        (
            "server-name",
            ClientProfile {
                server_name: Some("O=Test,CN=CVS".parse().unwrap()),
                ..base.clone()
            },
        ),
        (
            "strict-policies",
            ClientProfile {
                cpr: Some(CprRequirement::strict(
                    [test_policies::p1()].into(),
                    false,
                    false,
                )),
                ..base.clone()
            },
        ),
        (
            "explicit-policy",
            ClientProfile {
                cpr: Some(CprRequirement::strict(BTreeSet::new(), true, false)),
                ..base.clone()
            },
        ),
        (
            "inhibit-mapping",
            ClientProfile {
                cpr: Some(CprRequirement::strict(BTreeSet::new(), false, true)),
                ..base.clone()
            },
        ),
        (
            "weak-usage",
            ClientProfile {
                cpr: Some(CprRequirement::weak("e-mail")),
                ..base.clone()
            },
        ),
        (
            "request-policy",
            ClientProfile {
                request_policy: Some(SIGNED_POLICY.parse().unwrap()),
                ..base.clone()
            },
        ),
        (
            "want-backs",
            ClientProfile {
                want_backs: Some(WantBacks(WantBacks::CRLS)),
                ..base.clone()
            },
        ),
        (
            "validation-time",
            ClientProfile {
                validation_time: Some(scenario_validation_time()),
                ..base.clone()
            },
        ),
        (
            "requester",
            ClientProfile {
                requester: Some("CN=Bob".parse().unwrap()),
                ..base.clone()
            },
        ),
        (
            "signing-key",
            ClientProfile {
                signing: Some(SigningConfig {
                    key: key_path.clone(),
                    cert: None,
                }),
                ..base.clone()
            },
        ),
        (
            "signing-cert",
            ClientProfile {
                signing: Some(SigningConfig {
                    key: key_path.clone(),
                    cert: Some(cert_path),
                }),
                ..base.clone()
            },
        ),
    ];
    let mut seen = vec![baseline.clone()];
    for (field, p) in &variants {
        let s = sent(p);
        assert!(!seen.contains(&s), "{field} did not change the request");
        seen.push(s);
    }
    // The remaining fields change verification or side effects.
    let unsigned = Faulty {
        inner: InProcess(svc.clone()),
        fault: Fault::Unsigned,
    };
    let trusting = ClientProfile {
        trust_unsigned: true,
        ..base.clone()
    };
    assert!(Client::new(&base, &unsigned)
        .validate(vec![fx.target("happy3")], at())
        .is_err());
    assert!(Client::new(&trusting, &unsigned)
        .validate(vec![fx.target("happy3")], at())
        .is_ok());

    let pinned = ClientProfile {
        server_cert_check: ServerCertCheck::Pinned(fx.ee("happy3").fingerprint()),
        ..base.clone()
    };
    assert!(run(&svc, &base, vec![fx.target("happy3")]).is_ok());
    assert!(run(&svc, &pinned, vec![fx.target("happy3")]).is_err());

    let online = ClientProfile {
        server_cert_check: ServerCertCheck::Online { validator: None },
        ..base.clone()
    };
    assert!(
        run(&svc, &online, vec![fx.target("happy3")]).is_err(),
        "self-signed server certificate is unknown"
    );
    let thin = ClientProfile {
        thin: true,
        ..online
    };
    assert!(run(&svc, &thin, vec![fx.target("happy3")]).is_ok());

    let dir = fx.dir.path().join("ev");
    run(
        &svc,
        &ClientProfile {
            store_evidence: Some(dir.clone()),
            ..base.clone()
        },
        vec![fx.target("happy3")],
    )
    .unwrap();
    assert!(fs::read_dir(&dir).unwrap().count() >= 2);
}

#[test]
fn http_transport_times_out() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/dvcs", listener.local_addr().unwrap());
    let t = HttpTransport::new(Duration::from_millis(200));
    let start = Instant::now();
    assert!(t.post(&url, b"x").is_err());
    assert!(start.elapsed() < Duration::from_secs(5));
    drop(listener);
}

// ---------------------------------------------------------------------------
// The binary, against a live server.

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rp-client"))
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_default();
    assert_eq!(actual, expected, "stdout differs from {}", path.display());
}

#[test]
fn cli_reports_match_golden_output() {
    let fx = Fixture::new();
    let server = RunningServer::start(fx.service(), "127.0.0.1:0").unwrap();
    let profile = fx.dir.path().join("client.toml");
    fs::write(
        &profile,
        format!(
            "server-url = \"{}\"\nserver-name = \"O=Test,CN=CVS\"\nstrict-policies = [\"{}\"]\nwant-backs = \"chain\"\n",
            server.url("/dvcs"),
            test_policies::p1()
        ),
    )
    .unwrap();
    let validate = |extra: &[&str], scenarios: &[&str]| {
        let mut cmd = bin();
        cmd.args(["validate", "--profile"])
            .arg(&profile)
            .args(["--request-time", "20250131000000Z"])
            .args(extra);
        for s in scenarios {
            cmd.arg(fx.ee_path(s));
        }
        cmd.output().unwrap()
    };

    let out = validate(&[], &["happy3", "revoked-ee"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    golden(
        "happy3_revoked_ee.txt",
        &String::from_utf8(out.stdout).unwrap(),
    );

    let out = validate(&[], &["policy-mapped", "no-policy-ee", "pathlen-violated"]);
    assert_eq!(out.status.code(), Some(2));
    golden(
        "policy_outcomes.txt",
        &String::from_utf8(out.stdout).unwrap(),
    );

    let out = validate(&["--weak-usage", "e-mail", "--want", "time"], &["happy3"]);
    assert_eq!(out.status.code(), Some(0));
    golden("weak_usage.txt", &String::from_utf8(out.stdout).unwrap());

    let out = validate(&["--weak-usage", "fax"], &["happy3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknownUsage"));

    // Pinned to the wrong certificate.
    let out = validate(
        &["--pin", &fx.ee("happy3").fingerprint().to_hex()],
        &["happy3"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SignerRejected"));

    let out = validate(&["--any-policy"], &["no-policy-ee"]);
    assert_eq!(out.status.code(), Some(0));
    server.stop().unwrap();
}

#[test]
fn cli_transport_failure_exits_1() {
    let fx = Fixture::new();
    let out = bin()
        .args([
            "validate",
            "--server-url",
            "http://127.0.0.1:9/dvcs",
            "--timeout-ms",
            "500",
        ])
        .arg(fx.ee_path("happy3"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_inspect() {
    let fx = Fixture::new();
    let crl = fx.dir.path().join("repo/crls/revoked-ee.sub.crl");
    let out = bin().arg("inspect").arg(&crl).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains(&format!(
            "serial {} revoked 20250111000000Z reason keyCompromise",
            fx.ee("revoked-ee").serial()
        )),
        "{text}"
    );

    let out = bin()
        .arg("inspect")
        .arg(fx.ee_path("happy3"))
        .output()
        .unwrap();
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("subject: O=happy3,CN=ee"));

    let garbage = fx.dir.path().join("garbage.bin");
    fs::write(&garbage, b"\x30\x80not der").unwrap();
    let out = bin().arg("inspect").arg(&garbage).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}
