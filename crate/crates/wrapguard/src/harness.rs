//! Executable model of the PHR login: the service hands out challenges,
//! the client signs one inside a LoginCreateToken request, and the service
//! answers with a signed assertion or a rejection. The service runs either
//! the naive or the hardened verifier.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::distributions::Alphanumeric;
use rand::Rng;
use serde::{Deserialize, Serialize};
use time::format_description::well_known::Rfc3339;
use time::{Duration, OffsetDateTime};
use wrapguard_core::forge::{AttackKind, AttackVariant};
use wrapguard_core::ns;
use wrapguard_core::xml::{Element, QName, XmlDocument};
use wrapguard_core::xmldsig::{
    b64_decode, b64_encode, extract_signer_identity, naive_body, sign, verify_hardened,
    verify_naive, Certificate, CryptoError, FailureKind, Fingerprint, SignError, SignOptions,
    SignaturePolicy, SignatureVerifier, SigningKey, Stage, SubjectFields, VerificationReport,
};

use crate::crypto::RsaVerifier;

pub const CHALLENGE_LEN: usize = 32;
pub const DEFAULT_CHALLENGE_TTL: Duration = Duration::seconds(300);
pub const DEFAULT_ASSERTION_TTL: Duration = Duration::seconds(3600);
pub const UNSAFE_BANNER: &str = "!!! UNSAFE: naive ID-based signature verification is active. \
This server is deliberately vulnerable to XML Signature Wrapping. !!!";

const ASSERTION_NS: &str = ns::SAML2;

pub trait Clock: Send + Sync {
    fn now(&self) -> OffsetDateTime;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> OffsetDateTime {
        OffsetDateTime::now_utc()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<OffsetDateTime>);

impl ManualClock {
    pub fn new(start: OffsetDateTime) -> Self {
        Self(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        *self.0.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> OffsetDateTime {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChallengeState {
    Fresh,
    Consumed,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Challenge {
    pub value: String,
    pub issued_at: OffsetDateTime,
    pub state: ChallengeState,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("signature-invalid: {stage} ({kind}): {reason}")]
    SignatureInvalid {
        stage: Stage,
        kind: FailureKind,
        reason: String,
    },
    #[error("untrusted-certificate: {0}")]
    UntrustedCertificate(String),
    #[error("challenge-unknown")]
    ChallengeUnknown,
    #[error("challenge-expired")]
    ChallengeExpired,
    #[error("challenge-replayed")]
    ChallengeReplayed,
    #[error("malformed-request: {0}")]
    Malformed(String),
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Self::SignatureInvalid { .. } => "signature-invalid",
            Self::UntrustedCertificate(_) => "untrusted-certificate",
            Self::ChallengeUnknown => "challenge-unknown",
            Self::ChallengeExpired => "challenge-expired",
            Self::ChallengeReplayed => "challenge-replayed",
            Self::Malformed(_) => "malformed-request",
        }
    }

    /// The verifier stage that rejected, if verification was the cause.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Self::SignatureInvalid { stage, .. } => Some(*stage),
            Self::UntrustedCertificate(_) => Some(Stage::Crypto),
            _ => None,
        }
    }

    fn from_report(report: &VerificationReport) -> Self {
        let f = report
            .failure
            .as_ref()
            .expect("rejected report has a failure");
        match f.kind {
            FailureKind::UntrustedCertificate => Self::UntrustedCertificate(f.reason.clone()),
            kind => Self::SignatureInvalid {
                stage: f.stage,
                kind,
                reason: f.reason.clone(),
            },
        }
    }
}

/// Issued challenges. The fresh-to-consumed transition happens under one
/// lock, so concurrent replays cannot both succeed.
pub struct ChallengeStore {
    entries: Mutex<HashMap<String, (OffsetDateTime, bool)>>,
    ttl: Duration,
    clock: Arc<dyn Clock>,
}

impl ChallengeStore {
    pub fn new(ttl: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            ttl,
            clock,
        }
    }

    /// A fresh challenge: 32 characters from `[A-Za-z0-9]` drawn from the
    /// thread-local CSPRNG.
    pub fn issue(&self) -> Challenge {
        let issued_at = self.clock.now();
        let mut entries = self.entries.lock().unwrap();
        loop {
            let value: String = rand::thread_rng()
                .sample_iter(&Alphanumeric)
                .take(CHALLENGE_LEN)
                .map(char::from)
                .collect();
            if !entries.contains_key(&value) {
                entries.insert(value.clone(), (issued_at, false));
                return Challenge {
                    value,
                    issued_at,
                    state: ChallengeState::Fresh,
                };
            }
        }
    }

    fn state_of(&self, issued_at: OffsetDateTime, consumed: bool) -> ChallengeState {
        if consumed {
            ChallengeState::Consumed
        } else if self.clock.now() >= issued_at + self.ttl {
            ChallengeState::Expired
        } else {
            ChallengeState::Fresh
        }
    }

    pub fn get(&self, value: &str) -> Option<Challenge> {
        let entries = self.entries.lock().unwrap();
        let (issued_at, consumed) = *entries.get(value)?;
        Some(Challenge {
            value: value.into(),
            issued_at,
            state: self.state_of(issued_at, consumed),
        })
    }

    /// Marks a fresh challenge consumed.
    pub fn consume(&self, value: &str) -> Result<(), Rejection> {
        let mut entries = self.entries.lock().unwrap();
        let Some((issued_at, consumed)) = entries.get(value).copied() else {
            return Err(Rejection::ChallengeUnknown);
        };
        match self.state_of(issued_at, consumed) {
            ChallengeState::Consumed => Err(Rejection::ChallengeReplayed),
            ChallengeState::Expired => Err(Rejection::ChallengeExpired),
            ChallengeState::Fresh => {
                entries.insert(value.into(), (issued_at, true));
                Ok(())
            }
        }
    }
}

/// The login confirmation: a small signed XML element standing in for a
/// SAML assertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub subject: SubjectFields,
    pub issued_at: OffsetDateTime,
    pub expires_at: OffsetDateTime,
    pub assertion_id: String,
    /// Service signature over the canonical assertion element without its
    /// `SignatureValue` child.
    pub signature: Vec<u8>,
}

fn saml(local: &str) -> Element {
    Element::new(QName::new(ASSERTION_NS, local), Some("saml"))
}

fn rfc3339(t: OffsetDateTime) -> String {
    t.format(&Rfc3339).expect("UTC timestamps format")
}

impl Assertion {
    fn body(&self) -> Element {
        let mut attrs = saml("AttributeStatement");
        for (name, value) in [
            ("CN", &self.subject.common_name),
            ("O", &self.subject.organization),
            ("C", &self.subject.country),
        ] {
            if let Some(v) = value {
                attrs = attrs.with_child(
                    saml("Attribute")
                        .with_attr(QName::local("Name"), None, name)
                        .with_child(saml("AttributeValue").with_text(v)),
                );
            }
        }
        saml("Assertion")
            .with_attr(QName::local("ID"), None, &self.assertion_id)
            .with_attr(QName::local("IssueInstant"), None, &rfc3339(self.issued_at))
            .with_child(saml("Issuer").with_text("PHR Authentication Service"))
            .with_child(
                saml("Subject").with_child(
                    saml("NameID")
                        .with_attr(
                            QName::local("Format"),
                            None,
                            "urn:oasis:names:tc:SAML:1.1:nameid-format:X509SubjectName",
                        )
                        .with_text(&self.subject.distinguished_name),
                ),
            )
            .with_child(
                saml("Conditions")
                    .with_attr(QName::local("NotBefore"), None, &rfc3339(self.issued_at))
                    .with_attr(
                        QName::local("NotOnOrAfter"),
                        None,
                        &rfc3339(self.expires_at),
                    ),
            )
            .with_child(attrs)
    }

    fn canonical_body(&self) -> Vec<u8> {
        let doc = XmlDocument::from_root(self.body()).expect("built with bound prefixes");
        doc.canonicalize(&doc.root_path(), &[])
            .expect("canonicalizable")
    }

    pub fn issue<K: SigningKey + ?Sized>(
        subject: SubjectFields,
        issued_at: OffsetDateTime,
        ttl: Duration,
        key: &K,
    ) -> Result<Self, CryptoError> {
        let bytes: [u8; 16] = rand::thread_rng().gen();
        let mut a = Self {
            subject,
            issued_at,
            expires_at: issued_at + ttl,
            assertion_id: format!("_{}", hex(&bytes)),
            signature: Vec::new(),
        };
        a.signature = key.sign(&a.canonical_body())?;
        Ok(a)
    }

    pub fn to_element(&self) -> Element {
        self.body().with_child(
            Element::new(ns::ds("SignatureValue"), Some("ds"))
                .with_text(&b64_encode(&self.signature)),
        )
    }

    /// Reads an assertion element produced by [`Assertion::to_element`].
    pub fn from_element(e: &Element) -> Option<Self> {
        let q = |l: &str| QName::new(ASSERTION_NS, l);
        if e.name != q("Assertion") {
            return None;
        }
        let time = |s: &str| OffsetDateTime::parse(s, &Rfc3339).ok();
        let conditions = e.first_child(&q("Conditions"))?;
        let mut subject = SubjectFields {
            common_name: None,
            organization: None,
            country: None,
            distinguished_name: e
                .first_child(&q("Subject"))?
                .first_child(&q("NameID"))?
                .text_content(),
        };
        if let Some(stmt) = e.first_child(&q("AttributeStatement")) {
            for a in stmt.child_elements() {
                let value = a
                    .first_child(&q("AttributeValue"))
                    .map(|v| v.text_content());
                match a.attribute(&QName::local("Name")) {
                    Some("CN") => subject.common_name = value,
                    Some("O") => subject.organization = value,
                    Some("C") => subject.country = value,
                    _ => {}
                }
            }
        }
        Some(Self {
            subject,
            issued_at: time(conditions.attribute(&QName::local("NotBefore"))?)?,
            expires_at: time(conditions.attribute(&QName::local("NotOnOrAfter"))?)?,
            assertion_id: e.attribute(&QName::local("ID"))?.into(),
            signature: b64_decode(&e.first_child(&ns::ds("SignatureValue"))?.text_content())?,
        })
    }

    pub fn verify<V: SignatureVerifier + ?Sized>(
        &self,
        verifier: &V,
        service: &Certificate,
        algorithm: wrapguard_core::xmldsig::SignatureAlgorithm,
    ) -> Result<(), CryptoError> {
        verifier.verify(algorithm, service, &self.canonical_body(), &self.signature)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerMode {
    Naive,
    Hardened,
}

impl ServerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Hardened => "hardened",
        }
    }
}

/// The authentication service. Only the challenge store is mutable.
pub struct AuthService {
    mode: ServerMode,
    policy: SignaturePolicy,
    trust: Vec<Fingerprint>,
    store: ChallengeStore,
    service_key: Box<dyn SigningKey + Send + Sync>,
    verifier: Box<dyn SignatureVerifier + Send + Sync>,
    clock: Arc<dyn Clock>,
    assertion_ttl: Duration,
}

impl AuthService {
    /// `trust` pins the client certificates; in hardened mode they are
    /// added to the policy's trust anchors.
    pub fn new(
        mode: ServerMode,
        mut policy: SignaturePolicy,
        trust: Vec<Fingerprint>,
        service_key: impl SigningKey + Send + Sync + 'static,
    ) -> Self {
        for fp in &trust {
            policy = policy.with_trust_anchor(*fp);
        }
        let clock: Arc<dyn Clock> = Arc::new(SystemClock);
        Self {
            mode,
            policy,
            trust,
            store: ChallengeStore::new(DEFAULT_CHALLENGE_TTL, clock.clone()),
            service_key: Box::new(service_key),
            verifier: Box::new(RsaVerifier),
            clock,
            assertion_ttl: DEFAULT_ASSERTION_TTL,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>, challenge_ttl: Duration) -> Self {
        self.store = ChallengeStore::new(challenge_ttl, clock.clone());
        self.clock = clock;
        self
    }

    pub fn with_verifier(
        mut self,
        verifier: impl SignatureVerifier + Send + Sync + 'static,
    ) -> Self {
        self.verifier = Box::new(verifier);
        self
    }

    pub fn mode(&self) -> ServerMode {
        self.mode
    }

    pub fn policy(&self) -> &SignaturePolicy {
        &self.policy
    }

    pub fn store(&self) -> &ChallengeStore {
        &self.store
    }

    pub fn service_certificate(&self) -> &Certificate {
        self.service_key.certificate()
    }

    pub fn service_algorithm(&self) -> wrapguard_core::xmldsig::SignatureAlgorithm {
        self.service_key.algorithm()
    }

    /// LoginCreateChallenge: stores a fresh challenge and returns it in a
    /// SOAP response.
    pub fn login_create_challenge(&self) -> XmlDocument {
        let c = self.store.issue();
        soap_envelope(Element::new(ns::challenge(), Some("wst")).with_text(&c.value))
    }

    /// LoginCreateToken on raw request bytes.
    pub fn handle_token_request(&self, request: &[u8]) -> Result<Assertion, Rejection> {
        let doc = XmlDocument::parse(request).map_err(|e| Rejection::Malformed(e.to_string()))?;
        self.login_create_token(&doc)
    }

    pub fn verify(&self, request: &XmlDocument) -> VerificationReport {
        match self.mode {
            ServerMode::Naive => verify_naive(request, &self.trust, self.verifier.as_ref()),
            ServerMode::Hardened => verify_hardened(request, &self.policy, self.verifier.as_ref()),
        }
    }

    /// LoginCreateToken: verify, check and consume the challenge, issue an
    /// assertion for the signer.
    pub fn login_create_token(&self, request: &XmlDocument) -> Result<Assertion, Rejection> {
        let report = self.verify(request);
        if !report.is_accepted() {
            return Err(Rejection::from_report(&report));
        }
        let (challenge, subject) = match self.mode {
            // Reads fixed positions, whatever the signature covered.
            ServerMode::Naive => {
                let body =
                    naive_body(request).ok_or_else(|| Rejection::Malformed("no Body".into()))?;
                let challenge = request
                    .get(&body)
                    .and_then(|b| b.first_child(&ns::challenge()))
                    .map(Element::text_content)
                    .ok_or_else(|| Rejection::Malformed("no Challenge in Body".into()))?;
                let subject = report
                    .signer_certificate
                    .as_ref()
                    .expect("accepted")
                    .subject()
                    .clone();
                (challenge, subject)
            }
            // Reads only what the verifier located as signed.
            ServerMode::Hardened => {
                let challenge = signed_challenge(request, &report)?;
                let subject = extract_signer_identity(&report).expect("accepted");
                (challenge, subject)
            }
        };
        self.store.consume(&challenge)?;
        Assertion::issue(
            subject,
            self.clock.now(),
            self.assertion_ttl,
            self.service_key.as_ref(),
        )
        .map_err(|e| Rejection::Malformed(format!("assertion signing failed: {e}")))
    }
}

/// The single Challenge inside the verified locations.
fn signed_challenge(doc: &XmlDocument, report: &VerificationReport) -> Result<String, Rejection> {
    let mut found = Vec::new();
    for loc in &report.verified_locations {
        let e = doc.get(&loc.path).expect("verified path exists");
        if e.name == ns::challenge() {
            found.push(e.text_content());
        }
        found.extend(
            e.child_elements()
                .filter(|c| c.name == ns::challenge())
                .map(Element::text_content),
        );
    }
    match found.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(Rejection::Malformed(format!(
            "{} signed challenges, expected one",
            found.len()
        ))),
    }
}

pub fn soap_envelope(content: Element) -> XmlDocument {
    let root = Element::new(ns::envelope(), Some("soap"))
        .with_child(Element::new(ns::body(), Some("soap")).with_child(content));
    XmlDocument::from_root(root).expect("static layout")
}

pub fn assertion_response(a: &Assertion) -> XmlDocument {
    soap_envelope(a.to_element())
}

/// SOAP 1.2 Sender fault carrying the rejection code and detail.
pub fn fault_response(r: &Rejection) -> XmlDocument {
    let soap = |l: &str| Element::new(ns::soap(l), Some("soap"));
    soap_envelope(
        soap("Fault")
            .with_child(soap("Code").with_child(soap("Value").with_text("soap:Sender")))
            .with_child(
                soap("Reason").with_child(
                    soap("Text")
                        .with_attr(QName::new(ns::XML, "lang"), Some("xml"), "en")
                        .with_text(&r.to_string()),
                ),
            )
            .with_child(soap("Detail").with_child(
                Element::new(QName::new(WRAPGUARD_NS, "Rejection"), Some("wg")).with_text(r.code()),
            )),
    )
}

const WRAPGUARD_NS: &str = "urn:wrapguard:harness";

/// Text of the first `wst:Challenge` in a LoginCreateChallenge response.
pub fn extract_challenge(response: &XmlDocument) -> Option<String> {
    response
        .find_all(&ns::challenge())
        .first()
        .map(|(_, e)| e.text_content())
}

pub fn extract_assertion(response: &XmlDocument) -> Option<Assertion> {
    response
        .find_all(&QName::new(ASSERTION_NS, "Assertion"))
        .first()
        .and_then(|(_, e)| Assertion::from_element(e))
}

/// Rejection code from a fault response.
pub fn extract_rejection(response: &XmlDocument) -> Option<String> {
    response
        .find_all(&QName::new(WRAPGUARD_NS, "Rejection"))
        .first()
        .map(|(_, e)| e.text_content())
}

/// Prefixes and IDs of a LoginCreateToken request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestStyle {
    pub soap: String,
    pub wst: String,
    pub sign: SignOptions,
}

impl RequestStyle {
    /// The usual prefixes with random IDs in the listing's shape.
    pub fn with_random_ids(rng: &mut impl Rng) -> Self {
        let mut id = |kind: &str| {
            format!(
                "{kind}-{}-{}",
                hex(&rng.gen::<[u8; 4]>()),
                hex(&rng.gen::<[u8; 2]>())
            )
        };
        Self {
            soap: "soap".into(),
            wst: "wst".into(),
            sign: SignOptions {
                ds_prefix: "ds".into(),
                wsse_prefix: "wsse".into(),
                wsu_prefix: "wsu".into(),
                token_id: Some(id("X509")),
                str_id: Some(id("STR")),
                reference_ids: vec![id("id")],
            },
        }
    }

    /// Random IDs and five distinct random prefixes.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut style = Self::with_random_ids(rng);
        let mut taken: Vec<String> = Vec::new();
        let mut prefix = || loop {
            let len = rng.gen_range(1..=6);
            let p: String = (0..len)
                .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
                .collect();
            if !p.starts_with("xml") && !taken.contains(&p) {
                taken.push(p.clone());
                return p;
            }
        };
        style.soap = prefix();
        style.wst = prefix();
        style.sign.ds_prefix = prefix();
        style.sign.wsse_prefix = prefix();
        style.sign.wsu_prefix = prefix();
        style
    }
}

/// The unsigned LoginCreateToken request.
pub fn build_login_request(challenge: &str, style: &RequestStyle) -> XmlDocument {
    let soap = Some(style.soap.as_str());
    let root = Element::new(ns::envelope(), soap)
        .with_child(Element::new(ns::header(), soap))
        .with_child(
            Element::new(ns::body(), soap)
                .with_child(Element::new(ns::challenge(), Some(&style.wst)).with_text(challenge)),
        );
    XmlDocument::from_root(root).expect("static layout")
}

pub fn sign_login_request<K: SigningKey>(
    challenge: &str,
    key: &K,
    policy: &SignaturePolicy,
    style: &RequestStyle,
) -> Result<XmlDocument, SignError> {
    sign(
        &build_login_request(challenge, style),
        policy,
        key,
        &style.sign,
    )
}

/// Client side of LoginCreateToken: the signed request for `challenge`.
pub fn client_sign_challenge<K: SigningKey>(
    challenge: &str,
    key: &K,
    policy: &SignaturePolicy,
) -> Result<XmlDocument, SignError> {
    let style = RequestStyle::with_random_ids(&mut rand::thread_rng());
    sign_login_request(challenge, key, policy, &style)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub verdict: String,
    pub stage: Option<String>,
    pub kind: Option<String>,
}

impl MatrixCell {
    fn of(report: &VerificationReport) -> Self {
        Self {
            verdict: report.verdict.as_str().into(),
            stage: report.failure.as_ref().map(|f| f.stage.as_str().into()),
            kind: report.failure.as_ref().map(|f| f.kind.as_str().into()),
        }
    }

    pub fn accepted(&self) -> bool {
        self.verdict == "accepted"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub document: String,
    pub naive: MatrixCell,
    pub hardened: MatrixCell,
}

/// Accept/reject outcome of every document under both verifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub rows: Vec<MatrixRow>,
    /// Documents that probe robustness rather than attack (prefix
    /// redefinition); kept out of `rows`.
    pub probes: Vec<MatrixRow>,
}

impl MatrixReport {
    pub fn row(&self, document: &str) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.document == document)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<30} {:<10} {}\n", "document", "naive", "hardened");
        for r in self.rows.iter().chain(&self.probes) {
            let cell = |c: &MatrixCell| match &c.stage {
                Some(s) => format!("rejected@{s}"),
                None => c.verdict.clone(),
            };
            out += &format!(
                "{:<30} {:<10} {}\n",
                r.document,
                cell(&r.naive),
                cell(&r.hardened)
            );
        }
        out
    }
}

/// Runs each document through both verifiers. `policy` must carry the
/// trust anchors; the naive verifier trusts the same set.
pub fn run_matrix<V: SignatureVerifier + ?Sized>(
    benign: &XmlDocument,
    attacks: &[(AttackVariant, XmlDocument)],
    policy: &SignaturePolicy,
    verifier: &V,
) -> MatrixReport {
    let row = |name: &str, doc: &XmlDocument| MatrixRow {
        document: name.into(),
        naive: MatrixCell::of(&verify_naive(doc, &policy.trust_anchors, verifier)),
        hardened: MatrixCell::of(&verify_hardened(doc, policy, verifier)),
    };
    let mut report = MatrixReport {
        rows: vec![row("benign", benign)],
        probes: Vec::new(),
    };
    for (variant, doc) in attacks {
        let r = row(&variant.to_string(), doc);
        match variant.kind {
            AttackKind::PrefixRedefinition { .. } => report.probes.push(r),
            _ => report.rows.push(r),
        }
    }
    report
}
