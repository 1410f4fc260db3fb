//! Fixture certificates and a hash-based stand-in for RSA, so the core
//! crate can test signing and verification without a crypto provider.

use alloc::format;
use alloc::vec::Vec;

use super::*;
use crate::ns;
use crate::xml::{Element, QName, XmlDocument};

pub const PATIENT_FP: &str = "3a7228f88795450a2e976a0896d127193b950512e9382936dc7f3e2257303974";

macro_rules! key_der {
    ($name:literal) => {
        include_bytes!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/keys/",
            $name,
            ".crt.der"
        ))
    };
}

pub fn cert(name: &str) -> Certificate {
    let der: &[u8] = match name {
        "patient" => key_der!("patient"),
        "mallory" => key_der!("mallory"),
        "stranger" => key_der!("stranger"),
        "service" => key_der!("service"),
        other => panic!("no fixture {other}"),
    };
    Certificate::from_der(der).unwrap()
}

fn mock_signature(alg: SignatureAlgorithm, cert: &Certificate, message: &[u8]) -> Vec<u8> {
    use sha2::Digest;
    let mut h = sha2::Sha256::new();
    h.update(alg.uri().as_bytes());
    h.update(cert.public_key_der());
    h.update(message);
    h.finalize().to_vec()
}

pub struct MockKey {
    cert: Certificate,
    alg: SignatureAlgorithm,
}

impl MockKey {
    pub fn new(name: &str) -> Self {
        Self {
            cert: cert(name),
            alg: SignatureAlgorithm::RsaPssSha256,
        }
    }

    pub fn with_algorithm(mut self, alg: SignatureAlgorithm) -> Self {
        self.alg = alg;
        self
    }
}

impl SigningKey for MockKey {
    fn certificate(&self) -> &Certificate {
        &self.cert
    }
    fn algorithm(&self) -> SignatureAlgorithm {
        self.alg
    }
    fn sign(&self, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
        Ok(mock_signature(self.alg, &self.cert, message))
    }
}

pub struct MockVerifier;

impl SignatureVerifier for MockVerifier {
    fn verify(
        &self,
        algorithm: SignatureAlgorithm,
        certificate: &Certificate,
        message: &[u8],
        signature: &[u8],
    ) -> Result<(), CryptoError> {
        if mock_signature(algorithm, certificate, message) == signature {
            Ok(())
        } else {
            Err(CryptoError::BadSignature)
        }
    }
}

pub fn policy() -> SignaturePolicy {
    SignaturePolicy::phr()
}

/// PHR policy trusting the patient and Mallory.
pub fn trusted_policy() -> SignaturePolicy {
    policy()
        .with_trust_anchor(cert("patient").fingerprint())
        .with_trust_anchor(cert("mallory").fingerprint())
}

pub fn benign_message(challenge: &str) -> XmlDocument {
    let root = Element::new(ns::envelope(), Some("soap"))
        .with_child(Element::new(ns::header(), Some("soap")))
        .with_child(
            Element::new(ns::body(), Some("soap"))
                .with_child(Element::new(ns::challenge(), Some("wst")).with_text(challenge)),
        );
    XmlDocument::from_root(root).unwrap()
}

pub fn benign_message_with_body_id(challenge: &str, id: &str) -> XmlDocument {
    let mut root = benign_message(challenge).into_root();
    root.child_elements_mut()
        .find(|e| e.name == ns::body())
        .unwrap()
        .set_attribute(QName::new(ns::WSU, "Id"), Some("wsu"), id);
    XmlDocument::from_root(root).unwrap()
}

pub fn signed_benign(challenge: &str) -> XmlDocument {
    signed_by(challenge, "patient")
}

pub fn signed_by(challenge: &str, who: &str) -> XmlDocument {
    let opts = SignOptions {
        reference_ids: alloc::vec![format!("id-{who}-body")],
        ..SignOptions::default()
    };
    sign(
        &benign_message(challenge),
        &policy(),
        &MockKey::new(who),
        &opts,
    )
    .unwrap()
}
