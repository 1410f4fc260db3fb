use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use wrapguard::corpus::random_challenge;
use wrapguard::crypto::{RsaSigningKey, RsaVerifier};
use wrapguard::files::{
    self, load_certificate, load_document, load_policy, load_signing_key, load_trust,
};
use wrapguard::harness::{run_matrix, AuthService, Rejection, ServerMode, UNSAFE_BANNER};
use wrapguard::http::{self, Client, ClientError};
use wrapguard::report::{audit_json, audit_text, verification_json, verification_text};
use wrapguard_core::fastxpath::generate_for;
use wrapguard_core::forge::{forge, forge_all, AttackVariant, CertPlacement, PROBE_URI};
use wrapguard_core::xml::XmlDocument;
use wrapguard_core::xmldsig::{
    audit, sign, sign_id_referenced, verify_hardened, verify_naive, SignOptions,
    SignatureAlgorithm, SignaturePolicy, SigningKey,
};

const ACCEPTED: u8 = 0;
const OPERATIONAL: u8 = 1;
const REJECTED: u8 = 2;

type Error = Box<dyn std::error::Error>;

/// XML Signature Wrapping toolkit: sign and verify WS-Security messages,
/// forge wrapping attacks, and run the PHR login service.
#[derive(Debug, Parser)]
#[command(name = "wrapguard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sign the SOAP Body of a message with a FastXPath reference.
    Sign(SignArgs),
    /// Verify a signed message (hardened unless --unsafe-naive).
    Verify(VerifyArgs),
    /// Run every verification stage and print a per-stage checklist.
    Audit(AuditArgs),
    /// Forge wrapping attacks from a signed message.
    Attack(AttackArgs),
    /// Run the PHR login service in-process or over HTTP.
    Simulate(SimulateArgs),
    /// Log in against a running service.
    Client(ClientArgs),
    /// Verify a message and its forged attacks with both verifiers.
    Matrix(MatrixArgs),
    /// Print the FastXPath expression selecting an element.
    XpathGen(XpathGenArgs),
    /// Print the exclusive canonical form of a document or subtree.
    C14n(C14nArgs),
    /// Write a built-in policy as a policy file.
    ExportPolicy(ExportPolicyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algorithm {
    RsaPss,
    RsaPkcs1,
}

impl From<Algorithm> for SignatureAlgorithm {
    fn from(a: Algorithm) -> Self {
        match a {
            Algorithm::RsaPss => Self::RsaPssSha256,
            Algorithm::RsaPkcs1 => Self::RsaPkcs1Sha256,
        }
    }
}

#[derive(Debug, Args)]
struct SignArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Policy file or built-in name (`phr`).
    #[arg(long)]
    policy: String,
    /// PKCS#8 PEM private key.
    #[arg(long)]
    key: PathBuf,
    /// Certificate (DER or PEM); defaults to the one next to the key.
    #[arg(long)]
    cert: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the policy's signature method.
    #[arg(long, value_enum)]
    alg: Option<Algorithm>,
    /// Reference by ID only, as vulnerable deployments do.
    #[arg(long)]
    id_referenced: bool,
}

#[derive(Debug, Args)]
struct TrustArgs {
    /// Trusted signer: certificate file or SHA-256 fingerprint (hex).
    /// Required unless the policy lists trust anchors.
    #[arg(long)]
    trust: Vec<String>,
}

impl TrustArgs {
    fn apply(&self, mut policy: SignaturePolicy) -> Result<SignaturePolicy, Error> {
        for t in &self.trust {
            policy = policy.with_trust_anchor(load_trust(t)?);
        }
        if policy.trust_anchors.is_empty() {
            return Err(
                "no trusted signers: pass --trust or add `trust` lines to the policy".into(),
            );
        }
        Ok(policy)
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    policy: String,
    #[command(flatten)]
    trust: TrustArgs,
    /// Use the ID-based verifier that wrapping attacks defeat.
    #[arg(long)]
    unsafe_naive: bool,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    policy: String,
    #[command(flatten)]
    trust: TrustArgs,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    SimpleAncestryChallenge,
    SimpleAncestryCertificate,
    SiblingValueChallenge,
    SiblingValueCertificate,
    PrefixRedefinition,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Placement {
    SecondSecurity,
    SameSecurity,
    SecondHeader,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["variant", "all"])))]
struct AttackArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, requires = "out")]
    variant: Option<Variant>,
    /// Write every variant plus manifest.json.
    #[arg(long, requires = "out_dir", conflicts_with = "out")]
    all: bool,
    /// Challenge for the challenge variants.
    #[arg(long)]
    challenge: Option<String>,
    /// Certificate to inject for the certificate variants.
    #[arg(long)]
    cert: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "second-security")]
    placement: Placement,
    /// Prefix to redefine (prefix-redefinition); defaults to the root's.
    #[arg(long)]
    prefix: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Naive,
    Hardened,
}

impl From<Mode> for ServerMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Naive => Self::Naive,
            Mode::Hardened => Self::Hardened,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Directory with service.key.pem (and, for the scripted run,
    /// patient.key.pem and mallory.key.pem) plus their certificates.
    #[arg(long)]
    keys: PathBuf,
    /// Required in hardened mode.
    #[arg(long)]
    policy: Option<String>,
    /// Trusted client certificates; required with --listen.
    #[arg(long)]
    trust: Vec<String>,
    /// Serve HTTP on host:port instead of running the scripted scenario.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long, default_value_t = 4)]
    threads: usize,
}

#[derive(Debug, Args)]
struct ClientArgs {
    /// Base URL, e.g. http://127.0.0.1:8080
    #[arg(long)]
    server: String,
    #[arg(long, required_unless_present = "send")]
    key: Option<PathBuf>,
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Policy whose reference shape the request follows.
    #[arg(long, default_value = "phr")]
    policy: String,
    /// Send this file as the LoginCreateToken request instead of signing
    /// a fresh challenge.
    #[arg(long)]
    send: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct MatrixArgs {
    /// Signed benign message.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    policy: String,
    #[command(flatten)]
    trust: TrustArgs,
    /// Certificate injected by the certificate variants.
    #[arg(long)]
    cert: PathBuf,
    /// Challenge injected by the challenge variants; random by default.
    #[arg(long)]
    challenge: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct XpathGenArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// ID of the target element.
    #[arg(long)]
    id: String,
}

#[derive(Debug, Args)]
struct C14nArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Canonicalize the element with this ID instead of the document.
    #[arg(long)]
    id: Option<String>,
    /// InclusiveNamespaces PrefixList.
    #[arg(long)]
    inclusive: Vec<String>,
}

#[derive(Debug, Args)]
struct ExportPolicyArgs {
    #[arg(long)]
    name: String,
    /// Trust anchor to add: certificate file or SHA-256 fingerprint.
    #[arg(long)]
    trust: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                OPERATIONAL
            } else {
                ACCEPTED
            });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(OPERATIONAL)
        }
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Sign(a) => cmd_sign(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Client(a) => cmd_client(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::XpathGen(a) => cmd_xpath_gen(a),
        Command::C14n(a) => cmd_c14n(a),
        Command::ExportPolicy(a) => {
            let mut policy = load_policy(&a.name)?;
            for t in &a.trust {
                policy = policy.with_trust_anchor(load_trust(t)?);
            }
            files::write(&a.out, policy.to_text())?;
            Ok(ACCEPTED)
        }
    }
}

fn cmd_sign(a: SignArgs) -> Result<u8, Error> {
    let doc = load_document(&a.input)?;
    let policy = load_policy(&a.policy)?;
    let key = load_signing_key(&a.key, a.cert.as_deref())?
        .with_algorithm(a.alg.map_or(policy.sig_alg, Into::into));
    let policy = policy.with_signature_algorithm(key.algorithm());
    let signed = if a.id_referenced {
        sign_id_referenced(&doc, &policy, &key, &SignOptions::default())?
    } else {
        sign(&doc, &policy, &key, &SignOptions::default())?
    };
    files::write(&a.out, signed.serialize())?;
    Ok(ACCEPTED)
}

fn cmd_verify(a: VerifyArgs) -> Result<u8, Error> {
    let doc = load_document(&a.input)?;
    let policy = a.trust.apply(load_policy(&a.policy)?)?;
    let report = if a.unsafe_naive {
        eprintln!("{UNSAFE_BANNER}");
        verify_naive(&doc, &policy.trust_anchors, &RsaVerifier)
    } else {
        verify_hardened(&doc, &policy, &RsaVerifier)
    };
    match a.report {
        ReportFormat::Json => println!(
            "{}",
            serde_json::to_string_pretty(&verification_json(&report))?
        ),
        ReportFormat::Text => print!("{}", verification_text(&report)),
    }
    Ok(if report.is_accepted() {
        ACCEPTED
    } else {
        REJECTED
    })
}

fn cmd_audit(a: AuditArgs) -> Result<u8, Error> {
    let doc = load_document(&a.input)?;
    let policy = a.trust.apply(load_policy(&a.policy)?)?;
    let report = audit(&doc, &policy, &RsaVerifier);
    match a.report {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&audit_json(&report))?),
        ReportFormat::Text => print!("{}", audit_text(&report)),
    }
    Ok(if report.passed() { ACCEPTED } else { REJECTED })
}

fn attack_variant(
    a: &AttackArgs,
    variant: Variant,
    doc: &XmlDocument,
) -> Result<AttackVariant, Error> {
    let challenge = || a.challenge.clone().ok_or("this variant needs --challenge");
    let cert = || -> Result<Vec<u8>, Error> {
        let path = a.cert.as_ref().ok_or("this variant needs --cert")?;
        Ok(load_certificate(path)?.der().to_vec())
    };
    Ok(match variant {
        Variant::SimpleAncestryChallenge => AttackVariant::simple_ancestry_challenge(&challenge()?),
        Variant::SiblingValueChallenge => AttackVariant::sibling_value_challenge(&challenge()?),
        Variant::SimpleAncestryCertificate => AttackVariant::simple_ancestry_certificate(&cert()?),
        Variant::SiblingValueCertificate => {
            let placement = match a.placement {
                Placement::SecondSecurity => CertPlacement::SecondSecurity,
                Placement::SameSecurity => CertPlacement::SameSecurity,
                Placement::SecondHeader => CertPlacement::SecondHeader,
            };
            AttackVariant::sibling_value_certificate(&cert()?, placement)
        }
        Variant::PrefixRedefinition => {
            let prefix = match &a.prefix {
                Some(p) => p.clone(),
                None => doc
                    .root()
                    .prefix
                    .clone()
                    .ok_or("root element has no prefix; pass --prefix")?,
            };
            AttackVariant::prefix_redefinition(&prefix, PROBE_URI)
        }
    })
}

fn cmd_attack(a: AttackArgs) -> Result<u8, Error> {
    let doc = load_document(&a.input)?;
    if let Some(variant) = a.variant {
        let evil = forge(&doc, &attack_variant(&a, variant, &doc)?)?;
        files::write(
            a.out.as_deref().expect("clap requires --out"),
            evil.serialize(),
        )?;
        return Ok(ACCEPTED);
    }
    let dir = a.out_dir.as_deref().expect("clap requires --out-dir");
    let challenge = a.challenge.clone().ok_or("--all needs --challenge")?;
    let cert = load_certificate(a.cert.as_deref().ok_or("--all needs --cert")?)?;
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut manifest = Vec::new();
    for (variant, evil) in forge_all(&doc, &challenge, cert.der())? {
        let file = format!("{}.xml", variant.name());
        files::write(&dir.join(&file), evil.serialize())?;
        manifest.push(json!({ "variant": variant.to_string(), "file": file }));
    }
    files::write(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&json!({ "source": a.input, "variants": manifest }))?,
    )?;
    Ok(ACCEPTED)
}

fn key_in(dir: &Path, name: &str) -> Result<RsaSigningKey, Error> {
    Ok(load_signing_key(
        &dir.join(format!("{name}.key.pem")),
        None,
    )?)
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, Error> {
    let mode: ServerMode = a.mode.into();
    let policy = match (&a.policy, mode) {
        (Some(p), _) => load_policy(p)?,
        (None, ServerMode::Naive) => SignaturePolicy::phr(),
        (None, ServerMode::Hardened) => return Err("hardened mode needs --policy".into()),
    };
    if mode == ServerMode::Naive {
        eprintln!("{UNSAFE_BANNER}");
    }
    let service_key = key_in(&a.keys, "service")?;
    match &a.listen {
        Some(addr) => {
            if a.trust.is_empty() {
                return Err("--listen needs at least one --trust".into());
            }
            let trust = a
                .trust
                .iter()
                .map(|t| load_trust(t))
                .collect::<Result<_, _>>()?;
            let service = Arc::new(AuthService::new(mode, policy, trust, service_key));
            let server = http::serve(service, addr, a.threads).map_err(|e| e.to_string())?;
            eprintln!("{} service listening on {}", mode.as_str(), server.url());
            server.join();
            Ok(ACCEPTED)
        }
        None => scripted_scenario(mode, policy, &a.keys, service_key),
    }
}

/// Honest login, then the replay and identity-split attacks, each against
/// a service trusting both the patient and Mallory.
fn scripted_scenario(
    mode: ServerMode,
    policy: SignaturePolicy,
    keys: &Path,
    service_key: RsaSigningKey,
) -> Result<u8, Error> {
    let patient = key_in(keys, "patient")?;
    let mallory = key_in(keys, "mallory")?;
    let trust = vec![
        patient.certificate().fingerprint(),
        mallory.certificate().fingerprint(),
    ];
    let sign_policy = policy.clone();
    let service = AuthService::new(mode, policy, trust, service_key);
    let challenge = |s: &AuthService| {
        wrapguard::harness::extract_challenge(&s.login_create_challenge())
            .expect("challenge response")
    };
    let show = |step: &str, r: Result<wrapguard::harness::Assertion, Rejection>| match r {
        Ok(a) => println!(
            "{step}: assertion issued for {}",
            a.subject.distinguished_name
        ),
        Err(e) => println!("{step}: rejected, {e}"),
    };
    println!("mode: {}", mode.as_str());

    let captured =
        wrapguard::harness::client_sign_challenge(&challenge(&service), &patient, &sign_policy)?;
    show("patient login", service.login_create_token(&captured));

    let fresh = challenge(&service);
    let replay = forge(&captured, &AttackVariant::simple_ancestry_challenge(&fresh))?;
    show(
        "replay of the captured login with a fresh challenge",
        service.login_create_token(&replay),
    );

    for variant in [
        AttackVariant::sibling_value_certificate(
            patient.certificate().der(),
            CertPlacement::SecondSecurity,
        ),
        AttackVariant::simple_ancestry_certificate(patient.certificate().der()),
    ] {
        let own = wrapguard::harness::client_sign_challenge(
            &challenge(&service),
            &mallory,
            &sign_policy,
        )?;
        let evil = forge(&own, &variant)?;
        show(
            &format!("Mallory's login carrying the patient's certificate ({variant})"),
            service.login_create_token(&evil),
        );
    }
    Ok(ACCEPTED)
}

fn cmd_client(a: ClientArgs) -> Result<u8, Error> {
    let client = Client::new(&a.server);
    let result = match &a.send {
        Some(path) => client.create_token_raw(
            &std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?,
        ),
        None => {
            let key = load_signing_key(
                a.key.as_deref().expect("clap requires --key"),
                a.cert.as_deref(),
            )?;
            client.login(&key, &load_policy(&a.policy)?)
        }
    };
    let (value, code) = match result {
        Ok(assertion) => (
            json!({
                "issued": true,
                "assertion_id": assertion.assertion_id,
                "subject": assertion.subject.distinguished_name,
                "expires_at": assertion.expires_at.to_string(),
            }),
            ACCEPTED,
        ),
        Err(e @ ClientError::Rejected { .. }) => (
            json!({ "issued": false, "rejection": e.rejection_code(), "error": e.to_string() }),
            REJECTED,
        ),
        Err(e) => return Err(e.into()),
    };
    match a.report {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&value)?),
        ReportFormat::Text if code == ACCEPTED => println!(
            "assertion {} issued for {}",
            value["assertion_id"].as_str().unwrap_or_default(),
            value["subject"].as_str().unwrap_or_default()
        ),
        ReportFormat::Text => println!("{}", value["error"].as_str().unwrap_or_default()),
    }
    Ok(code)
}

fn cmd_matrix(a: MatrixArgs) -> Result<u8, Error> {
    let doc = load_document(&a.input)?;
    let policy = a.trust.apply(load_policy(&a.policy)?)?;
    let cert = load_certificate(&a.cert)?;
    let challenge = a
        .challenge
        .unwrap_or_else(|| random_challenge(&mut rand::thread_rng()));
    let attacks = forge_all(&doc, &challenge, cert.der())?;
    let matrix = run_matrix(&doc, &attacks, &policy, &RsaVerifier);
    files::write(&a.out, serde_json::to_string_pretty(&matrix)?)?;
    print!("{}", matrix.to_text());
    Ok(ACCEPTED)
}

fn cmd_xpath_gen(a: XpathGenArgs) -> Result<u8, Error> {
    let doc = load_document(&a.input)?;
    let target = doc
        .resolve_id(&a.id)
        .map_err(|e| format!("{}: {e}", a.id))?;
    println!("{}", generate_for(&doc, &target, None)?);
    Ok(ACCEPTED)
}

fn cmd_c14n(a: C14nArgs) -> Result<u8, Error> {
    let doc = load_document(&a.input)?;
    let target = match &a.id {
        Some(id) => doc.resolve_id(id).map_err(|e| format!("{id}: {e}"))?,
        None => doc.root_path(),
    };
    let inclusive: Vec<&str> = a.inclusive.iter().map(String::as_str).collect();
    let out = doc.canonicalize(&target, &inclusive)?;
    use std::io::Write;
    std::io::stdout().write_all(&out)?;
    Ok(ACCEPTED)
}
