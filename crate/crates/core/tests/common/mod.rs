#![allow(dead_code)]

//! Fixture certificates, a hash-based stand-in for RSA, and strategies for
//! random documents.

use proptest::prelude::*;
use wrapguard_core::ns;
use wrapguard_core::xml::{Element, QName, XmlDocument, XmlNode};
use wrapguard_core::xmldsig::{
    sign, Certificate, CryptoError, SignOptions, SignatureAlgorithm, SignaturePolicy,
    SignatureVerifier, SigningKey,
};

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

pub struct MockKey(pub Certificate);

impl SigningKey for MockKey {
    fn certificate(&self) -> &Certificate {
        &self.0
    }
    fn algorithm(&self) -> SignatureAlgorithm {
        SignatureAlgorithm::RsaPssSha256
    }
    fn sign(&self, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
        Ok(mock_signature(self.algorithm(), &self.0, message))
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

pub fn trusted_policy() -> SignaturePolicy {
    SignaturePolicy::phr()
        .with_trust_anchor(cert("patient").fingerprint())
        .with_trust_anchor(cert("mallory").fingerprint())
}

/// Prefixes, IDs and nonce of one login request.
#[derive(Debug, Clone)]
pub struct Style {
    pub soap: String,
    pub wst: String,
    pub ds: String,
    pub wsse: String,
    pub wsu: String,
    pub challenge: String,
    pub body_id: String,
    pub token_id: String,
    pub str_id: String,
    pub addressing: bool,
}

fn prefix() -> impl Strategy<Value = String> {
    "[a-w][a-z0-9]{0,4}"
}

pub fn style() -> impl Strategy<Value = Style> {
    (
        [prefix(), prefix(), prefix(), prefix(), prefix()],
        "[A-Za-z0-9]{32}",
        ["[0-9a-f]{8}", "[0-9a-f]{8}", "[0-9a-f]{8}"],
        any::<bool>(),
    )
        .prop_filter("distinct prefixes", |(p, ..)| {
            let mut v = p.to_vec();
            v.sort();
            v.dedup();
            v.len() == 5
        })
        .prop_map(
            |([soap, wst, ds, wsse, wsu], challenge, [b, t, s], addressing)| Style {
                soap,
                wst,
                ds,
                wsse,
                wsu,
                challenge,
                body_id: format!("id-{b}"),
                token_id: format!("X509-{t}"),
                str_id: format!("STR-{s}"),
                addressing,
            },
        )
}

pub fn unsigned_request(s: &Style) -> XmlDocument {
    let soap = Some(s.soap.as_str());
    let mut header = Element::new(ns::header(), soap);
    if s.addressing {
        let wsa = "http://www.w3.org/2005/08/addressing";
        header = header
            .with_child(
                Element::new(QName::new(wsa, "MessageID"), Some("wsa")).with_text("urn:uuid:1"),
            )
            .with_child(
                Element::new(QName::new(wsa, "To"), Some("wsa")).with_text("https://phr.example/"),
            );
    }
    let root = Element::new(ns::envelope(), soap)
        .with_child(header)
        .with_child(
            Element::new(ns::body(), soap)
                .with_child(Element::new(ns::challenge(), Some(&s.wst)).with_text(&s.challenge)),
        );
    XmlDocument::from_root(root).unwrap()
}

pub fn signed_request(s: &Style, who: &str) -> XmlDocument {
    let opts = SignOptions {
        ds_prefix: s.ds.clone(),
        wsse_prefix: s.wsse.clone(),
        wsu_prefix: s.wsu.clone(),
        token_id: Some(s.token_id.clone()),
        str_id: Some(s.str_id.clone()),
        reference_ids: vec![s.body_id.clone()],
    };
    let signed = sign(
        &unsigned_request(s),
        &SignaturePolicy::phr(),
        &MockKey(cert(who)),
        &opts,
    )
    .unwrap();
    XmlDocument::parse(&signed.serialize()).unwrap()
}

const NAMESPACES: [&str; 3] = ["urn:ex:a", "urn:ex:b", ""];
const LOCALS: [&str; 3] = ["a", "b", "item"];
const PREFIXES: [&str; 3] = ["p", "q", "r"];

fn leaf() -> impl Strategy<Value = Element> {
    (
        0..NAMESPACES.len(),
        0..LOCALS.len(),
        0..4usize,
        prop::option::of(0..3usize),
    )
        .prop_map(|(n, l, p, attr)| {
            let uri = NAMESPACES[n];
            let prefix = if uri.is_empty() || p == 3 {
                None
            } else {
                Some(PREFIXES[p])
            };
            let mut e = Element::new(QName::new(uri, LOCALS[l]), prefix);
            if let Some(v) = attr {
                e = e.with_attr(QName::local("k"), None, ["x", "y", "z"][v]);
            }
            e
        })
}

pub fn count(e: &Element) -> usize {
    1 + e.child_elements().map(count).sum::<usize>()
}

/// Trees of at most 30 elements over a small alphabet, with prefixes
/// rebound to different namespaces at different depths.
pub fn small_document() -> impl Strategy<Value = XmlDocument> {
    leaf()
        .prop_recursive(5, 30, 4, |inner| {
            (leaf(), prop::collection::vec((inner, any::<bool>()), 0..4)).prop_map(
                |(mut e, kids)| {
                    for (k, text) in kids {
                        if text {
                            e.children.push(XmlNode::Text("t".into()));
                        }
                        e.children.push(XmlNode::Element(k));
                    }
                    e
                },
            )
        })
        .prop_filter("at most 30 elements", |e| count(e) <= 30)
        .prop_map(|e| XmlDocument::from_root(e).unwrap())
}
