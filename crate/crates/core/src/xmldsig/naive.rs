//! ID-based verification as commonly implemented: references and tokens are
//! looked up by the first element carrying the ID, no structure is checked,
//! and the application reads identity and payload from fixed positions.
//! Deliberately unsafe; kept to demonstrate wrapping attacks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::block::fragment;
use super::verify::{Finding, Stage, Verdict, VerificationReport, VerifiedLocation, VerifierKind};
use super::{
    b64_decode, Certificate, DigestAlgorithm, FailureKind, Fingerprint, KeyInfoRef,
    SignatureAlgorithm, SignatureBlock, SignatureVerifier, TransformBlock,
};
use crate::ns;
use crate::xml::{NodePath, XmlDocument};

/// The last `Body` child of the document element: where the application
/// reads its request from.
pub fn naive_body(doc: &XmlDocument) -> Option<NodePath> {
    last_child_path(doc, &[ns::body()])
}

/// The last `Header/Security/BinarySecurityToken`: where the application
/// reads the caller's certificate from.
pub fn naive_identity_token(doc: &XmlDocument) -> Option<NodePath> {
    last_child_path(
        doc,
        &[ns::header(), ns::security(), ns::binary_security_token()],
    )
}

fn last_child_path(doc: &XmlDocument, names: &[crate::xml::QName]) -> Option<NodePath> {
    let mut found = None;
    for (path, _) in doc.elements() {
        let steps = path.steps();
        if steps.len() == names.len() + 1 && steps[1..].iter().zip(names).all(|(s, n)| &s.name == n)
        {
            found = Some(path);
        }
    }
    found
}

fn token_certificate(doc: &XmlDocument, path: &NodePath) -> Option<Certificate> {
    let der = b64_decode(&doc.get(path)?.text_content())?;
    Certificate::from_der(&der).ok()
}

/// Verifies the first Signature by following `#id` references to their
/// first match, skipping every structural check.
pub fn verify_naive<V: SignatureVerifier + ?Sized>(
    doc: &XmlDocument,
    trust: &[Fingerprint],
    verifier: &V,
) -> VerificationReport {
    let reject = |stage, kind, msg: String, path: Option<NodePath>| {
        VerificationReport::rejected(VerifierKind::Naive, stage, Finding::new(kind, msg, path))
    };
    let sigs = doc.find_all(&ns::signature());
    let Some((sig_path, sig)) = sigs.first() else {
        return reject(
            Stage::SignaturePresence,
            FailureKind::SignatureMissing,
            "no ds:Signature element".into(),
            None,
        );
    };
    let block = match SignatureBlock::parse(sig, sig_path) {
        Ok(b) => b,
        Err(e) => {
            return reject(
                Stage::SignaturePresence,
                FailureKind::SignatureMalformed,
                e,
                Some(sig_path.clone()),
            )
        }
    };

    let mut locations = Vec::new();
    for r in &block.references {
        if DigestAlgorithm::from_uri(&r.digest_method).is_none() {
            return reject(
                Stage::ReferenceCheck,
                FailureKind::AlgorithmMismatch,
                format!("unsupported digest method {}", r.digest_method),
                Some(r.path.clone()),
            );
        }
        let target = match r.uri.as_deref() {
            None | Some("") => Some(doc.root_path()),
            Some(uri) => fragment(uri).and_then(|id| doc.first_id_match(id)),
        };
        let Some(target) = target else {
            return reject(
                Stage::ReferenceCheck,
                FailureKind::MissingReference,
                format!("reference {:?} does not resolve", r.uri),
                Some(r.path.clone()),
            );
        };
        locations.push(VerifiedLocation {
            expression: None,
            uri: r.uri.clone(),
            path: target,
        });
    }
    let key_token = match &block.key_info {
        KeyInfoRef::TokenReference { uri } => fragment(uri).and_then(|id| doc.first_id_match(id)),
        _ => None,
    };
    let Some(key_token) = key_token else {
        return reject(
            Stage::ReferenceCheck,
            FailureKind::KeyResolution,
            format!("KeyInfo {:?} does not resolve", block.key_info),
            None,
        );
    };
    let Some(key_cert) = token_certificate(doc, &key_token) else {
        return reject(
            Stage::ReferenceCheck,
            FailureKind::CertificateInvalid,
            "key token does not hold a certificate".into(),
            Some(key_token),
        );
    };

    if !trust.contains(&key_cert.fingerprint()) {
        return reject(
            Stage::Crypto,
            FailureKind::UntrustedCertificate,
            format!("certificate {} is not trusted", key_cert.fingerprint()),
            Some(key_token),
        );
    }
    for (r, loc) in block.references.iter().zip(&locations) {
        let prefixes: Vec<&str> = r
            .transforms
            .iter()
            .find_map(|t| match t {
                TransformBlock::ExcC14n { inclusive_prefixes } => Some(inclusive_prefixes),
                _ => None,
            })
            .map(|p| p.iter().map(String::as_str).collect())
            .unwrap_or_default();
        let ok = doc
            .canonicalize(&loc.path, &prefixes)
            .is_ok_and(|bytes| DigestAlgorithm::Sha256.digest(&bytes) == r.digest_value);
        if !ok {
            return reject(
                Stage::Crypto,
                FailureKind::DigestMismatch,
                "digest does not match the referenced content".into(),
                Some(loc.path.clone()),
            );
        }
    }
    let Some(alg) = SignatureAlgorithm::from_uri(&block.signature_method) else {
        return reject(
            Stage::Crypto,
            FailureKind::AlgorithmMismatch,
            format!("unsupported signature method {}", block.signature_method),
            None,
        );
    };
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
                .verify(alg, &key_cert, &bytes, &block.signature_value)
                .map_err(|e| format!("{e}"))
        });
    if let Err(e) = verified {
        return reject(
            Stage::Crypto,
            FailureKind::SignatureInvalid,
            e,
            Some(block.path.clone()),
        );
    }

    let identity = naive_identity_token(doc)
        .and_then(|p| token_certificate(doc, &p))
        .unwrap_or_else(|| key_cert.clone());
    VerificationReport {
        verifier: VerifierKind::Naive,
        verdict: Verdict::Accepted,
        stage_reached: Stage::Crypto,
        verified_locations: locations,
        failure: None,
        signer_certificate: Some(identity),
        key_certificate: Some(key_cert),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xml::XmlNode;
    use crate::xmldsig::testing::*;

    fn trust() -> Vec<Fingerprint> {
        alloc::vec![cert("patient").fingerprint(), cert("mallory").fingerprint()]
    }

    #[test]
    fn benign_message_is_accepted() {
        let doc = signed_benign("abc");
        let r = verify_naive(&doc, &trust(), &MockVerifier);
        assert_eq!(r.verdict, Verdict::Accepted, "{:?}", r.failure);
        assert_eq!(r.signer_certificate, Some(cert("patient")));
        assert_eq!(r.verified_locations[0].path, naive_body(&doc).unwrap());
    }

    #[test]
    fn stripped_signature_is_rejected() {
        let r = verify_naive(&benign_message("abc"), &trust(), &MockVerifier);
        assert_eq!(r.failure.unwrap().stage, Stage::SignaturePresence);
    }

    #[test]
    fn untrusted_key_is_rejected() {
        let r = verify_naive(&signed_benign("abc"), &[], &MockVerifier);
        assert_eq!(r.failure.unwrap().kind, FailureKind::UntrustedCertificate);
    }

    #[test]
    fn duplicate_body_is_not_noticed() {
        let doc = signed_benign("abc");
        let mut root = doc.root().clone();
        let mut body = root.first_child(&ns::body()).unwrap().clone();
        body.attributes.clear();
        root.children.push(XmlNode::Element(body));
        let doc = XmlDocument::from_root(root).unwrap();
        let r = verify_naive(&doc, &trust(), &MockVerifier);
        assert!(r.is_accepted());
        let body = naive_body(&doc).unwrap();
        assert_eq!(body.last_index(), 2);
        assert_ne!(r.verified_locations[0].path, body);
    }

    #[test]
    fn fixed_positions() {
        let doc = signed_benign("abc");
        assert_eq!(
            naive_identity_token(&doc).unwrap().name(),
            &ns::binary_security_token()
        );
        assert!(naive_identity_token(&benign_message("abc")).is_none());
    }
}
