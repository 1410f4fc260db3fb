use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::block::fragment;
use super::{
    b64_decode, Certificate, SignatureBlock, SignaturePolicy, SignatureVerifier, SubjectFields,
    TransformBlock, EXC_C14N,
};
use crate::fastxpath::FastXPathExpr;
use crate::ns;
use crate::structure::{
    apply_instructions, validate_element, validate_structure, StructureRule, StructureRuleSet,
};
use crate::xml::{NodePath, XmlDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Structure,
    SignaturePresence,
    Instructions,
    ReferenceCheck,
    Crypto,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Structure,
        Stage::SignaturePresence,
        Stage::Instructions,
        Stage::ReferenceCheck,
        Stage::Crypto,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Structure => "structure",
            Self::SignaturePresence => "signature-presence",
            Self::Instructions => "instructions",
            Self::ReferenceCheck => "reference-check",
            Self::Crypto => "crypto",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureKind {
    StructureViolation,
    SignatureMissing,
    MultipleSignatures,
    SignatureMisplaced,
    SignatureMalformed,
    InstructionViolation,
    AlgorithmMismatch,
    NonFastXPathReference,
    UnsupportedTransform,
    UnexpectedReference,
    MissingReference,
    ReferenceCardinality,
    ReferenceUriMismatch,
    KeyResolution,
    CertificateInvalid,
    UntrustedCertificate,
    DigestMismatch,
    SignatureInvalid,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::StructureViolation => "structure-violation",
            Self::SignatureMissing => "signature-missing",
            Self::MultipleSignatures => "multiple-signatures",
            Self::SignatureMisplaced => "signature-misplaced",
            Self::SignatureMalformed => "signature-malformed",
            Self::InstructionViolation => "instruction-violation",
            Self::AlgorithmMismatch => "algorithm-mismatch",
            Self::NonFastXPathReference => "non-fastxpath-reference",
            Self::UnsupportedTransform => "unsupported-transform",
            Self::UnexpectedReference => "unexpected-reference",
            Self::MissingReference => "missing-reference",
            Self::ReferenceCardinality => "reference-cardinality",
            Self::ReferenceUriMismatch => "reference-uri-mismatch",
            Self::KeyResolution => "key-resolution",
            Self::CertificateInvalid => "certificate-invalid",
            Self::UntrustedCertificate => "untrusted-certificate",
            Self::DigestMismatch => "digest-mismatch",
            Self::SignatureInvalid => "signature-invalid",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub kind: FailureKind,
    pub message: String,
    pub path: Option<NodePath>,
}

impl Finding {
    pub(crate) fn new(
        kind: FailureKind,
        message: impl Into<String>,
        path: Option<NodePath>,
    ) -> Self {
        Self {
            kind,
            message: message.into(),
            path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub stage: Stage,
    pub kind: FailureKind,
    pub reason: String,
    pub path: Option<NodePath>,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.stage, self.kind, self.reason)?;
        if let Some(p) = &self.path {
            write!(f, " at {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accepted => "accepted",
            Self::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifierKind {
    Hardened,
    Naive,
}

impl VerifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hardened => "hardened",
            Self::Naive => "naive",
        }
    }
}

/// One signed location. The hardened verifier always fills `expression`;
/// the naive one only knows the URI it followed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedLocation {
    pub expression: Option<FastXPathExpr>,
    pub uri: Option<String>,
    pub path: NodePath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub verifier: VerifierKind,
    pub verdict: Verdict,
    pub stage_reached: Stage,
    pub verified_locations: Vec<VerifiedLocation>,
    pub failure: Option<Failure>,
    /// The certificate the application treats as the signer's identity.
    pub signer_certificate: Option<Certificate>,
    /// The certificate whose key checked the signature value.
    pub key_certificate: Option<Certificate>,
}

impl VerificationReport {
    pub fn is_accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    /// The verified element selected by `expr`, if any.
    pub fn location_of(&self, expr: &FastXPathExpr) -> Option<&NodePath> {
        self.verified_locations
            .iter()
            .find(|l| l.expression.as_ref() == Some(expr))
            .map(|l| &l.path)
    }

    pub(crate) fn rejected(verifier: VerifierKind, stage: Stage, finding: Finding) -> Self {
        Self {
            verifier,
            verdict: Verdict::Rejected,
            stage_reached: stage,
            verified_locations: Vec::new(),
            failure: Some(Failure {
                stage,
                kind: finding.kind,
                reason: finding.message,
                path: finding.path,
            }),
            signer_certificate: None,
            key_certificate: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("verification did not accept the message")]
pub struct NotAccepted;

/// Subject of the certificate the report names as signer.
pub fn extract_signer_identity(report: &VerificationReport) -> Result<SubjectFields, NotAccepted> {
    match (&report.verdict, &report.signer_certificate) {
        (Verdict::Accepted, Some(c)) => Ok(c.subject().clone()),
        _ => Err(NotAccepted),
    }
}

/// Closed content model for the Signature element itself.
pub fn signature_rules() -> StructureRuleSet {
    let ds = ns::ds;
    StructureRuleSet::new("xmldsig")
        .with_root(ns::signature())
        .with_rule(
            StructureRule::new(ns::signature(), false)
                .child(ds("SignedInfo"), 1, Some(1))
                .child(ds("SignatureValue"), 1, Some(1))
                .child(ds("KeyInfo"), 1, Some(1)),
        )
        .with_rule(
            StructureRule::new(ds("SignedInfo"), false)
                .child(ds("CanonicalizationMethod"), 1, Some(1))
                .child(ds("SignatureMethod"), 1, Some(1))
                .child(ds("Reference"), 1, None),
        )
        .with_rule(
            StructureRule::new(ds("Reference"), false)
                .child(ds("Transforms"), 0, Some(1))
                .child(ds("DigestMethod"), 1, Some(1))
                .child(ds("DigestValue"), 1, Some(1)),
        )
        .with_rule(StructureRule::new(ds("Transforms"), false).child(ds("Transform"), 1, None))
}

fn from_violations(kind: FailureKind, v: Vec<crate::structure::Violation>) -> Vec<Finding> {
    v.into_iter()
        .map(|v| Finding::new(kind, format!("{}: {}", v.rule_id, v.reason), Some(v.path)))
        .collect()
}

pub(crate) fn check_structure(doc: &XmlDocument, policy: &SignaturePolicy) -> Vec<Finding> {
    from_violations(
        FailureKind::StructureViolation,
        validate_structure(doc, &policy.rules),
    )
}

/// Locates the Signature and parses it. The block is returned whenever the
/// first Signature parses, even if other findings were raised.
pub(crate) fn check_signature_presence(
    doc: &XmlDocument,
) -> (Option<SignatureBlock>, Vec<Finding>) {
    let sigs = doc.find_all(&ns::signature());
    let Some((path, sig)) = sigs.first() else {
        return (
            None,
            alloc::vec![Finding::new(
                FailureKind::SignatureMissing,
                "no ds:Signature element",
                None
            )],
        );
    };
    let mut findings = Vec::new();
    if sigs.len() > 1 {
        findings.push(Finding::new(
            FailureKind::MultipleSignatures,
            format!("{} ds:Signature elements, exactly one allowed", sigs.len()),
            Some(sigs[1].0.clone()),
        ));
    }
    let parent = path.parent();
    let placed = parent.as_ref().is_some_and(|p| p.name() == &ns::security());
    if !placed {
        findings.push(Finding::new(
            FailureKind::SignatureMisplaced,
            "ds:Signature is not a child of wsse:Security",
            Some(path.clone()),
        ));
    }
    findings.extend(from_violations(
        FailureKind::SignatureMalformed,
        validate_element(sig, path, &signature_rules()),
    ));
    match SignatureBlock::parse(sig, path) {
        Ok(block) => (Some(block), findings),
        Err(e) => {
            findings.push(Finding::new(
                FailureKind::SignatureMalformed,
                e,
                Some(path.clone()),
            ));
            (None, findings)
        }
    }
}

pub(crate) fn check_instructions(doc: &XmlDocument, policy: &SignaturePolicy) -> Vec<Finding> {
    from_violations(
        FailureKind::InstructionViolation,
        apply_instructions(doc, &policy.instructions),
    )
}

/// Output of a clean reference check: where each reference points and the
/// key certificate resolved inside the signature's Security header.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub locations: Vec<VerifiedLocation>,
    /// Inclusive prefixes of each reference's exclusive C14N transform.
    pub inclusive: Vec<Vec<String>>,
    pub certificate: Certificate,
}

pub(crate) fn check_references(
    doc: &XmlDocument,
    policy: &SignaturePolicy,
    block: &SignatureBlock,
) -> (Option<Resolved>, Vec<Finding>) {
    let mut findings = Vec::new();
    let at = |p: &NodePath| Some(p.clone());
    if block.c14n_method != EXC_C14N {
        findings.push(Finding::new(
            FailureKind::AlgorithmMismatch,
            format!(
                "canonicalization {} is not exclusive C14N",
                block.c14n_method
            ),
            at(&block.signed_info),
        ));
    }
    if block.signature_method != policy.sig_alg.uri() {
        findings.push(Finding::new(
            FailureKind::AlgorithmMismatch,
            format!(
                "signature method {} differs from policy {}",
                block.signature_method, policy.sig_alg
            ),
            at(&block.signed_info),
        ));
    }

    let expected = policy.expected_references();
    let mut matched = alloc::vec![false; expected.len()];
    let mut locations = Vec::new();
    let mut inclusive = Vec::new();
    for r in &block.references {
        let here = at(&r.path);
        if r.digest_method != policy.digest_alg.uri() {
            findings.push(Finding::new(
                FailureKind::AlgorithmMismatch,
                format!("digest method {} differs from policy", r.digest_method),
                here.clone(),
            ));
        }
        let (text, prefixes) = match r.transforms.as_slice() {
            [TransformBlock::XPathFilter2 { filter, expression }, TransformBlock::ExcC14n { inclusive_prefixes }] =>
            {
                if filter != "intersect" {
                    findings.push(Finding::new(
                        FailureKind::UnsupportedTransform,
                        format!("XPath Filter 2.0 filter {filter:?}, only intersect is allowed"),
                        here,
                    ));
                    continue;
                }
                (expression, inclusive_prefixes)
            }
            ts if !ts
                .iter()
                .any(|t| matches!(t, TransformBlock::XPathFilter2 { .. })) =>
            {
                let kind = match ts.iter().find(|t| {
                    matches!(
                        t,
                        TransformBlock::Other(_) | TransformBlock::MalformedFilter2(_)
                    )
                }) {
                    Some(_) => FailureKind::UnsupportedTransform,
                    None => FailureKind::NonFastXPathReference,
                };
                findings.push(Finding::new(
                    kind,
                    format!(
                        "reference {} is not selected by a FastXPath filter",
                        r.uri.as_deref().unwrap_or("(no URI)")
                    ),
                    here,
                ));
                continue;
            }
            _ => {
                findings.push(Finding::new(
                    FailureKind::UnsupportedTransform,
                    "transforms must be one XPath Filter 2.0 followed by exclusive C14N",
                    here,
                ));
                continue;
            }
        };
        let expr = match FastXPathExpr::parse(text) {
            Ok(e) => e,
            Err(e) => {
                findings.push(Finding::new(
                    FailureKind::NonFastXPathReference,
                    format!("{e}"),
                    here,
                ));
                continue;
            }
        };
        let Some(slot) = expected.iter().position(|e| e == &expr) else {
            findings.push(Finding::new(
                FailureKind::UnexpectedReference,
                format!("{expr} is not an expected reference"),
                here,
            ));
            continue;
        };
        if core::mem::replace(&mut matched[slot], true) {
            findings.push(Finding::new(
                FailureKind::ReferenceCardinality,
                format!("{expr} is referenced more than once"),
                here,
            ));
            continue;
        }
        let target = match expr.evaluate(doc).as_slice() {
            [one] => one.clone(),
            hits => {
                findings.push(Finding::new(
                    FailureKind::ReferenceCardinality,
                    format!(
                        "{expr} selects {} elements, expected exactly one",
                        hits.len()
                    ),
                    here,
                ));
                continue;
            }
        };
        match r.uri.as_deref() {
            None | Some("") => {}
            Some(uri) => match fragment(uri).map(|id| doc.resolve_id(id)) {
                Some(Ok(p)) if p == target || p.is_ancestor_of(&target) => {}
                Some(Ok(p)) => {
                    findings.push(Finding::new(
                        FailureKind::ReferenceUriMismatch,
                        format!("URI {uri} names {p}, outside the FastXPath selection {target}"),
                        here,
                    ));
                    continue;
                }
                Some(Err(e)) => {
                    findings.push(Finding::new(
                        FailureKind::ReferenceUriMismatch,
                        format!("URI {uri}: {e}"),
                        here,
                    ));
                    continue;
                }
                None => {
                    findings.push(Finding::new(
                        FailureKind::ReferenceUriMismatch,
                        format!("URI {uri:?} is not a same-document reference"),
                        here,
                    ));
                    continue;
                }
            },
        }
        locations.push(VerifiedLocation {
            expression: Some(expr),
            uri: r.uri.clone(),
            path: target,
        });
        inclusive.push(prefixes.clone());
    }
    for (expr, hit) in expected.iter().zip(&matched) {
        if !hit {
            findings.push(Finding::new(
                FailureKind::MissingReference,
                format!("expected reference {expr} is not signed"),
                at(&block.signed_info),
            ));
        }
    }

    let certificate = match resolve_key(doc, block) {
        Ok(c) => Some(c),
        Err(f) => {
            findings.push(f);
            None
        }
    };
    match certificate {
        Some(certificate) if findings.is_empty() => (
            Some(Resolved {
                locations,
                inclusive,
                certificate,
            }),
            findings,
        ),
        _ => (None, findings),
    }
}

/// Follows the SecurityTokenReference to a BinarySecurityToken that must
/// sit in the same Security header as the Signature.
fn resolve_key(doc: &XmlDocument, block: &SignatureBlock) -> Result<Certificate, Finding> {
    let key_err =
        |msg: String, path: Option<NodePath>| Finding::new(FailureKind::KeyResolution, msg, path);
    let uri = match &block.key_info {
        super::KeyInfoRef::TokenReference { uri } => uri,
        super::KeyInfoRef::Missing => {
            return Err(key_err("no KeyInfo".into(), Some(block.path.clone())))
        }
        super::KeyInfoRef::Unsupported(what) => {
            return Err(key_err(
                format!("unsupported KeyInfo content {what}"),
                Some(block.path.clone()),
            ))
        }
    };
    let id = fragment(uri).ok_or_else(|| key_err(format!("token URI {uri:?} is not #id"), None))?;
    let token_path = doc
        .resolve_id(id)
        .map_err(|e| key_err(format!("token reference: {e}"), None))?;
    let security = block.path.parent().expect("signature has a parent");
    if !security.is_ancestor_of(&token_path) {
        return Err(key_err(
            format!("token {uri} resolves outside the signature's Security header"),
            Some(token_path),
        ));
    }
    let token = doc.get(&token_path).expect("indexed path");
    if token.name != ns::binary_security_token() {
        return Err(key_err(
            format!("{uri} names {}, not a BinarySecurityToken", token.name),
            Some(token_path),
        ));
    }
    if let Some(vt) = token.attribute(&crate::xml::QName::local("ValueType")) {
        if vt != ns::X509_TOKEN_TYPE {
            return Err(key_err(
                format!("token ValueType {vt} is not X509v3"),
                Some(token_path),
            ));
        }
    }
    let der = b64_decode(&token.text_content()).ok_or_else(|| {
        Finding::new(
            FailureKind::CertificateInvalid,
            "token is not base64",
            Some(token_path.clone()),
        )
    })?;
    Certificate::from_der(&der).map_err(|e| {
        Finding::new(
            FailureKind::CertificateInvalid,
            format!("{e}"),
            Some(token_path),
        )
    })
}

pub(crate) fn check_crypto<V: SignatureVerifier + ?Sized>(
    doc: &XmlDocument,
    policy: &SignaturePolicy,
    block: &SignatureBlock,
    resolved: &Resolved,
    verifier: &V,
) -> Vec<Finding> {
    let cert = &resolved.certificate;
    if !policy.trust_anchors.contains(&cert.fingerprint()) {
        return alloc::vec![Finding::new(
            FailureKind::UntrustedCertificate,
            format!("certificate {} is not a trust anchor", cert.fingerprint()),
            None,
        )];
    }
    let mut findings = Vec::new();
    for (r, (loc, prefixes)) in block
        .references
        .iter()
        .zip(resolved.locations.iter().zip(&resolved.inclusive))
    {
        let prefixes: Vec<&str> = prefixes.iter().map(String::as_str).collect();
        match doc.canonicalize(&loc.path, &prefixes) {
            Ok(bytes) if policy.digest_alg.digest(&bytes) == r.digest_value => {}
            Ok(_) => findings.push(Finding::new(
                FailureKind::DigestMismatch,
                "digest does not match the referenced content",
                Some(loc.path.clone()),
            )),
            Err(e) => findings.push(Finding::new(
                FailureKind::DigestMismatch,
                format!("{e}"),
                Some(loc.path.clone()),
            )),
        }
    }
    if !findings.is_empty() {
        return findings;
    }
    let prefixes: Vec<&str> = block
        .c14n_inclusive_prefixes
        .iter()
        .map(String::as_str)
        .collect();
    let verified = doc
        .canonicalize(&block.signed_info, &prefixes)
        .map_err(|e| format!("{e}"))
        .and_then(|bytes| {
            verifier
                .verify(policy.sig_alg, cert, &bytes, &block.signature_value)
                .map_err(|e| format!("{e}"))
        });
    if let Err(e) = verified {
        findings.push(Finding::new(
            FailureKind::SignatureInvalid,
            e,
            Some(block.path.clone()),
        ));
    }
    findings
}

/// Runs structure, signature presence, instructions, reference check and
/// crypto in that order and stops at the first failing stage.
pub fn verify_hardened<V: SignatureVerifier + ?Sized>(
    doc: &XmlDocument,
    policy: &SignaturePolicy,
    verifier: &V,
) -> VerificationReport {
    let reject = |stage, mut findings: Vec<Finding>| {
        VerificationReport::rejected(VerifierKind::Hardened, stage, findings.remove(0))
    };
    let findings = check_structure(doc, policy);
    if !findings.is_empty() {
        return reject(Stage::Structure, findings);
    }
    let (block, findings) = check_signature_presence(doc);
    if !findings.is_empty() {
        return reject(Stage::SignaturePresence, findings);
    }
    let block = block.expect("parsed without findings");
    let findings = check_instructions(doc, policy);
    if !findings.is_empty() {
        return reject(Stage::Instructions, findings);
    }
    let (resolved, findings) = check_references(doc, policy, &block);
    if !findings.is_empty() {
        return reject(Stage::ReferenceCheck, findings);
    }
    let resolved = resolved.expect("resolved without findings");
    let findings = check_crypto(doc, policy, &block, &resolved, verifier);
    if !findings.is_empty() {
        return reject(Stage::Crypto, findings);
    }
    VerificationReport {
        verifier: VerifierKind::Hardened,
        verdict: Verdict::Accepted,
        stage_reached: Stage::Crypto,
        verified_locations: resolved.locations,
        failure: None,
        signer_certificate: Some(resolved.certificate.clone()),
        key_certificate: Some(resolved.certificate),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Passed,
    Failed,
    /// A prerequisite stage produced nothing to check.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageAudit {
    pub stage: Stage,
    pub outcome: StageOutcome,
    pub findings: Vec<Finding>,
}

/// Every stage's findings, without stopping at the first failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub stages: Vec<StageAudit>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.stages
            .iter()
            .all(|s| s.outcome == StageOutcome::Passed)
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageAudit> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// The stage `verify_hardened` would report as failing.
    pub fn first_failure(&self) -> Option<Stage> {
        self.stages
            .iter()
            .find(|s| s.outcome != StageOutcome::Passed)
            .map(|s| s.stage)
    }
}

/// Runs all stages and collects every finding. Later stages run on the
/// first Signature even if earlier ones failed; a stage is skipped only
/// when its inputs could not be produced.
pub fn audit<V: SignatureVerifier + ?Sized>(
    doc: &XmlDocument,
    policy: &SignaturePolicy,
    verifier: &V,
) -> AuditReport {
    fn entry(stage: Stage, findings: Vec<Finding>) -> StageAudit {
        let outcome = if findings.is_empty() {
            StageOutcome::Passed
        } else {
            StageOutcome::Failed
        };
        StageAudit {
            stage,
            outcome,
            findings,
        }
    }
    fn skipped(stage: Stage, why: &str) -> StageAudit {
        StageAudit {
            stage,
            outcome: StageOutcome::Skipped,
            findings: alloc::vec![Finding::new(
                FailureKind::SignatureMissing,
                why.to_owned(),
                None
            )],
        }
    }
    let mut stages = alloc::vec![entry(Stage::Structure, check_structure(doc, policy))];
    let (block, findings) = check_signature_presence(doc);
    stages.push(entry(Stage::SignaturePresence, findings));
    stages.push(entry(Stage::Instructions, check_instructions(doc, policy)));
    let Some(block) = block else {
        stages.push(skipped(Stage::ReferenceCheck, "no parseable signature"));
        stages.push(skipped(Stage::Crypto, "no parseable signature"));
        return AuditReport { stages };
    };
    let (resolved, findings) = check_references(doc, policy, &block);
    stages.push(entry(Stage::ReferenceCheck, findings));
    match resolved {
        Some(r) => stages.push(entry(
            Stage::Crypto,
            check_crypto(doc, policy, &block, &r, verifier),
        )),
        None => stages.push(skipped(Stage::Crypto, "references or key did not resolve")),
    }
    AuditReport { stages }
}
