//! RSA signatures frozen from an independent implementation (Python
//! `cryptography`).

mod common;

use serde::Deserialize;
use wrapguard::crypto::RsaVerifier;
use wrapguard_core::xmldsig::{b64_decode, SignatureAlgorithm, SignatureVerifier, SigningKey};

#[derive(Deserialize)]
struct Vector {
    key: String,
    message: String,
    pss: String,
    pkcs1: String,
}

fn vectors() -> Vec<Vector> {
    let text = std::fs::read_to_string(common::fixture("rsa/vectors.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn oracle_signatures_verify() {
    let vs = vectors();
    assert!(vs.len() >= 6);
    for v in &vs {
        let cert = common::key(&v.key).certificate().clone();
        let msg = b64_decode(&v.message).unwrap();
        for (alg, sig) in [
            (SignatureAlgorithm::RsaPssSha256, &v.pss),
            (SignatureAlgorithm::RsaPkcs1Sha256, &v.pkcs1),
        ] {
            let sig = b64_decode(sig).unwrap();
            RsaVerifier.verify(alg, &cert, &msg, &sig).unwrap();
            let mut bad = msg.clone();
            bad.push(0);
            assert!(RsaVerifier.verify(alg, &cert, &bad, &sig).is_err());
        }
    }
}

#[test]
fn pkcs1_is_deterministic_and_matches_oracle() {
    for v in vectors() {
        let key = common::key(&v.key).with_algorithm(SignatureAlgorithm::RsaPkcs1Sha256);
        let msg = b64_decode(&v.message).unwrap();
        assert_eq!(key.sign(&msg).unwrap(), b64_decode(&v.pkcs1).unwrap());
    }
}

#[test]
fn signatures_do_not_cross_keys() {
    let v = &vectors()[0];
    let other = if v.key == "patient" {
        "mallory"
    } else {
        "patient"
    };
    let cert = common::key(other).certificate().clone();
    let sig = b64_decode(&v.pss).unwrap();
    let msg = b64_decode(&v.message).unwrap();
    assert!(RsaVerifier
        .verify(SignatureAlgorithm::RsaPssSha256, &cert, &msg, &sig)
        .is_err());
}
