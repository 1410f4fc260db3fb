//! The `wrapguard` binary: exit codes, reports and generated files.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn wrapguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrapguard"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Setup {
    dir: tempfile::TempDir,
    benign: String,
    patient_cert: String,
    mallory_cert: String,
}

impl Setup {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let keys = common::keys_dir();
        let s = Self {
            benign: p(&common::fixture("messages/login_fastxpath.xml")).into(),
            patient_cert: p(&keys.join("patient.crt.der")).into(),
            mallory_cert: p(&keys.join("mallory.crt.der")).into(),
            dir,
        };
        let out = wrapguard(&[
            "attack",
            "--in",
            &s.benign,
            "--all",
            "--challenge",
            "Fresh",
            "--cert",
            &s.mallory_cert,
            "--out-dir",
            p(&s.attacks()),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        s
    }

    fn attacks(&self) -> std::path::PathBuf {
        self.dir.path().join("attacks")
    }

    fn attack(&self, name: &str) -> String {
        p(&self.attacks().join(format!("{name}.xml"))).into()
    }
}

#[test]
fn verify_exit_codes() {
    let s = Setup::new();
    let ok = wrapguard(&[
        "verify",
        "--in",
        &s.benign,
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
    ]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).starts_with("accepted"));

    let evil = s.attack("sibling-value-challenge");
    let bad = wrapguard(&[
        "verify",
        "--in",
        &evil,
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
    ]);
    assert_eq!(code(&bad), 2);
    let naive = wrapguard(&[
        "verify",
        "--in",
        &evil,
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
        "--unsafe-naive",
    ]);
    assert_eq!(code(&naive), 0);
    assert!(String::from_utf8_lossy(&naive.stderr).contains("UNSAFE"));
}

#[test]
fn operational_errors_exit_one() {
    let s = Setup::new();
    let unknown = wrapguard(&["verify", "--in", &s.benign, "--policy", "phr", "--bogus"]);
    assert_eq!(code(&unknown), 1);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));

    let no_trust = wrapguard(&["verify", "--in", &s.benign, "--policy", "phr"]);
    assert_eq!(code(&no_trust), 1);
    let missing = wrapguard(&[
        "verify",
        "--in",
        "/nonexistent.xml",
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
    ]);
    assert_eq!(code(&missing), 1);
    let bad_policy = wrapguard(&[
        "verify",
        "--in",
        &s.benign,
        "--policy",
        "nope",
        "--trust",
        &s.patient_cert,
    ]);
    assert_eq!(code(&bad_policy), 1);
    let both = wrapguard(&[
        "attack",
        "--in",
        &s.benign,
        "--all",
        "--variant",
        "sibling-value-challenge",
    ]);
    assert_eq!(code(&both), 1);
    assert_eq!(code(&wrapguard(&[])), 1);
    assert_eq!(code(&wrapguard(&["--help"])), 0);
}

#[test]
fn json_report_is_flat() {
    let s = Setup::new();
    let evil = s.attack("simple-ancestry-challenge");
    let out = wrapguard(&[
        "verify",
        "--in",
        &evil,
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
        "--report",
        "json",
    ]);
    assert_eq!(code(&out), 2);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "rejected");
    assert_eq!(v["verifier"], "hardened");
    assert_eq!(v["failure_stage"], "reference-check");
    assert!(v["verified_locations"].as_array().unwrap().is_empty());
}

#[test]
fn attack_all_writes_manifest() {
    let s = Setup::new();
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(s.attacks().join("manifest.json")).unwrap()).unwrap();
    let variants = manifest["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 5);
    for v in variants {
        assert!(s.attacks().join(v["file"].as_str().unwrap()).exists());
    }
}

#[test]
fn audit_reports_every_stage() {
    let s = Setup::new();
    let out = wrapguard(&[
        "audit",
        "--in",
        &s.attack("sibling-value-challenge"),
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
    ]);
    assert_eq!(code(&out), 2);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with('[')).collect();
    assert_eq!(lines.len(), 5, "{text}");
    assert_eq!(lines[0], "[FAIL] structure");
    assert_eq!(
        lines[1..3],
        ["[pass] signature-presence", "[pass] instructions"],
        "{text}"
    );
    assert_eq!(lines[3], "[FAIL] reference-check", "{text}");

    let ok = wrapguard(&[
        "audit",
        "--in",
        &s.benign,
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
    ]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).lines().all(|l| l.starts_with("[pass]")));

    let id = p(&common::fixture("messages/login_id_referenced.xml")).to_owned();
    let out = wrapguard(&[
        "audit",
        "--in",
        &id,
        "--policy",
        "phr",
        "--trust",
        &s.patient_cert,
    ]);
    let text = stdout(&out);
    assert!(text.contains("[FAIL] reference-check"), "{text}");
    assert!(text.contains("non-fastxpath-reference"), "{text}");
}

#[test]
fn audit_agrees_with_verify() {
    let s = Setup::new();
    let mut docs: Vec<String> = std::fs::read_dir(s.attacks())
        .unwrap()
        .map(|e| p(&e.unwrap().path()).to_owned())
        .filter(|f| f.ends_with(".xml"))
        .collect();
    docs.push(s.benign.clone());
    docs.push(p(&common::fixture("messages/login_id_referenced.xml")).into());
    for doc in docs {
        let base = [
            "--in",
            doc.as_str(),
            "--policy",
            "phr",
            "--trust",
            &s.patient_cert,
            "--report",
            "json",
        ];
        let v: serde_json::Value =
            serde_json::from_slice(&wrapguard(&[&["verify"], &base[..]].concat()).stdout).unwrap();
        let a: serde_json::Value =
            serde_json::from_slice(&wrapguard(&[&["audit"], &base[..]].concat()).stdout).unwrap();
        let first_failed = a["stages"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["outcome"] == "failed")
            .map(|s| s["stage"].clone())
            .unwrap_or(serde_json::Value::Null);
        assert_eq!(first_failed, v["failure_stage"], "{doc}");
    }
}

#[test]
fn sign_then_verify() {
    let s = Setup::new();
    let unsigned = s.dir.path().join("unsigned.xml");
    std::fs::write(
        &unsigned,
        r#"<s:Envelope xmlns:s="http://www.w3.org/2003/05/soap-envelope"><s:Body><t:Challenge xmlns:t="http://docs.oasis-open.org/ws-sx/ws-trust/200512/">abc</t:Challenge></s:Body></s:Envelope>"#,
    )
    .unwrap();
    let signed = s.dir.path().join("signed.xml");
    let key = common::keys_dir().join("patient.key.pem");
    for extra in [&[][..], &["--alg", "rsa-pkcs1"][..]] {
        let args = [
            &[
                "sign",
                "--in",
                p(&unsigned),
                "--policy",
                "phr",
                "--key",
                p(&key),
                "--out",
                p(&signed),
            ][..],
            extra,
        ]
        .concat();
        assert_eq!(code(&wrapguard(&args)), 0);
        let verify = [
            "verify",
            "--in",
            p(&signed),
            "--policy",
            "phr",
            "--trust",
            &s.patient_cert,
        ];
        let expect = if extra.is_empty() { 0 } else { 2 };
        assert_eq!(code(&wrapguard(&verify)), expect);
    }
}

#[test]
fn xpath_gen_selects_the_body() {
    let out = wrapguard(&[
        "xpath-gen",
        "--in",
        p(&common::fixture("messages/login_fastxpath.xml")),
        "--id",
        "id-6c68f4bd-4771",
    ]);
    assert_eq!(code(&out), 0);
    let expr = wrapguard_core::fastxpath::FastXPathExpr::parse(stdout(&out).trim()).unwrap();
    assert_eq!(
        expr,
        wrapguard_core::xmldsig::SignaturePolicy::phr().expected_references()[0]
    );
    let missing = wrapguard(&[
        "xpath-gen",
        "--in",
        p(&common::fixture("messages/login_fastxpath.xml")),
        "--id",
        "nope",
    ]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn exported_policy_round_trips() {
    let s = Setup::new();
    let path = s.dir.path().join("policy.txt");
    assert_eq!(
        code(&wrapguard(&[
            "export-policy",
            "--name",
            "phr",
            "--trust",
            &s.patient_cert,
            "--out",
            p(&path)
        ])),
        0
    );
    let out = wrapguard(&["verify", "--in", &s.benign, "--policy", p(&path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}
