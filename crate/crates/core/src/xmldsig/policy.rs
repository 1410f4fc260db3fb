use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::{DigestAlgorithm, Fingerprint, SignatureAlgorithm};
use crate::fastxpath::{FastXPathExpr, FastXPathStep};
use crate::ns;
use crate::structure::{
    parse_profile_lines, Profile, ProfileError, StructureRuleSet, ValidationInstruction,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("a policy needs at least one expected reference")]
    NoReferences,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Out-of-band verification artifacts: the expected reference
/// expressions, algorithms, structure profile and pinned certificates.
/// Canonicalization is always exclusive C14N without comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignaturePolicy {
    expected_references: Vec<FastXPathExpr>,
    pub digest_alg: DigestAlgorithm,
    pub sig_alg: SignatureAlgorithm,
    pub rules: StructureRuleSet,
    pub instructions: Vec<ValidationInstruction>,
    pub trust_anchors: Vec<Fingerprint>,
}

impl SignaturePolicy {
    pub fn new(
        expected_references: Vec<FastXPathExpr>,
        profile: Profile,
    ) -> Result<Self, PolicyError> {
        if expected_references.is_empty() {
            return Err(PolicyError::NoReferences);
        }
        Ok(Self {
            expected_references,
            digest_alg: DigestAlgorithm::Sha256,
            sig_alg: SignatureAlgorithm::RsaPssSha256,
            rules: profile.rules,
            instructions: profile.instructions,
            trust_anchors: Vec::new(),
        })
    }

    /// PHR login policy: the SOAP Body is the single signed element.
    pub fn phr() -> Self {
        let body = FastXPathExpr::from_steps(alloc::vec![
            FastXPathStep::new(ns::envelope()),
            FastXPathStep::new(ns::body()),
        ])
        .expect("two steps");
        Self::new(
            alloc::vec![body],
            Profile::builtin(crate::structure::SOAP12_HARDENED_PHR).expect("builtin"),
        )
        .expect("one reference")
    }

    /// Named built-in policies: `phr` / `soap12-hardened-phr`.
    pub fn builtin(name: &str) -> Result<Self, PolicyError> {
        match name {
            "phr" | crate::structure::SOAP12_HARDENED_PHR => Ok(Self::phr()),
            other => Err(ProfileError::UnknownProfile(other.into()).into()),
        }
    }

    pub fn expected_references(&self) -> &[FastXPathExpr] {
        &self.expected_references
    }

    pub fn with_trust_anchor(mut self, fp: Fingerprint) -> Self {
        if !self.trust_anchors.contains(&fp) {
            self.trust_anchors.push(fp);
        }
        self
    }

    pub fn with_signature_algorithm(mut self, alg: SignatureAlgorithm) -> Self {
        self.sig_alg = alg;
        self
    }

    pub fn profile(&self) -> Profile {
        Profile {
            rules: self.rules.clone(),
            instructions: self.instructions.clone(),
        }
    }

    /// Profile text plus `reference`, `signature-method`, `digest-method`
    /// and `trust <sha256-hex>` lines.
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let mut refs = Vec::new();
        let mut sig_alg = None;
        let mut digest_alg = None;
        let mut trust = Vec::new();
        let profile = parse_profile_lines(text, |directive, line, rest| {
            let fail = |message: String| ProfileError::Parse { line, message };
            match directive {
                "reference" => {
                    refs.push(FastXPathExpr::parse(rest).map_err(|e| fail(format!("{e}")))?)
                }
                "signature-method" => {
                    let a = SignatureAlgorithm::from_uri(rest)
                        .ok_or_else(|| fail(format!("unsupported signature method {rest:?}")))?;
                    if sig_alg.replace(a).is_some() {
                        return Err(fail("duplicate signature-method".into()));
                    }
                }
                "digest-method" => {
                    let a = DigestAlgorithm::from_uri(rest)
                        .ok_or_else(|| fail(format!("unsupported digest method {rest:?}")))?;
                    if digest_alg.replace(a).is_some() {
                        return Err(fail("duplicate digest-method".into()));
                    }
                }
                "trust" => trust.push(
                    Fingerprint::from_hex(rest)
                        .ok_or_else(|| fail(format!("bad SHA-256 fingerprint {rest:?}")))?,
                ),
                _ => return Err(fail("unknown directive".into())),
            }
            Ok(())
        })?;
        let mut policy = Self::new(refs, profile)?;
        policy.sig_alg = sig_alg.unwrap_or(SignatureAlgorithm::RsaPssSha256);
        policy.digest_alg = digest_alg.unwrap_or(DigestAlgorithm::Sha256);
        for fp in trust {
            policy = policy.with_trust_anchor(fp);
        }
        Ok(policy)
    }

    pub fn to_text(&self) -> String {
        let mut out = self.profile().to_text();
        for r in &self.expected_references {
            let _ = writeln!(out, "reference {r}");
        }
        let _ = writeln!(out, "signature-method {}", self.sig_alg.uri());
        let _ = writeln!(out, "digest-method {}", self.digest_alg.uri());
        for fp in &self.trust_anchors {
            let _ = writeln!(out, "trust {fp}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phr_policy_references_the_body() {
        let p = SignaturePolicy::phr();
        assert_eq!(p.expected_references().len(), 1);
        let steps = p.expected_references()[0].steps();
        assert_eq!(steps[1].name(), &ns::body());
        assert_eq!(p.sig_alg, SignatureAlgorithm::RsaPssSha256);
        assert_eq!(p.instructions.len(), 3);
    }

    #[test]
    fn text_round_trip() {
        let p = SignaturePolicy::phr()
            .with_trust_anchor(Fingerprint([7; 32]))
            .with_signature_algorithm(SignatureAlgorithm::RsaPkcs1Sha256);
        let text = p.to_text();
        let back = SignaturePolicy::parse(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn policy_without_references_is_rejected() {
        let text = Profile::builtin("phr").unwrap().to_text();
        assert_eq!(
            SignaturePolicy::parse(&text),
            Err(PolicyError::NoReferences)
        );
    }

    #[test]
    fn prefixed_reference_is_rejected() {
        let err = SignaturePolicy::parse("reference /soap:Envelope/soap:Body\n").unwrap_err();
        assert!(matches!(
            err,
            PolicyError::Profile(ProfileError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_trust_line_is_rejected() {
        let text = format!(
            "reference {}\ntrust 12\n",
            SignaturePolicy::phr().expected_references()[0]
        );
        assert!(SignaturePolicy::parse(&text).is_err());
    }
}
