#![allow(dead_code)]

use std::path::{Path, PathBuf};

use wrapguard::crypto::RsaSigningKey;
use wrapguard::files::load_signing_key;
use wrapguard_core::xmldsig::{SignaturePolicy, SigningKey};

pub fn keys_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/keys")
}

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn key(name: &str) -> RsaSigningKey {
    load_signing_key(&keys_dir().join(format!("{name}.key.pem")), None).unwrap()
}

/// The PHR policy trusting the patient and Mallory.
pub fn trusted_policy() -> SignaturePolicy {
    SignaturePolicy::phr()
        .with_trust_anchor(key("patient").certificate().fingerprint())
        .with_trust_anchor(key("mallory").certificate().fingerprint())
}
