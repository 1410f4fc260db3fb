//! XML Signature generation and verification over WS-Security headers.
//!
//! Signatures reference their targets with a prefix-free FastXPath carried
//! in an XPath Filter 2.0 `intersect` transform. The `URI` attribute also
//! names the target's ID so that ID-based processors can follow it; the
//! hardened verifier intersects both selections.
//!
//! Two verifiers are provided. [`verify_hardened`] runs the staged checks
//! (structure, signature presence, instructions, reference check, crypto)
//! and stops at the first failure. [`verify_naive`] resolves references by
//! the first matching ID and is only meant as an attack target.

mod block;
mod cert;
mod naive;
mod policy;
mod sign;
mod verify;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use block::{KeyInfoRef, ReferenceBlock, SignatureBlock, TransformBlock};
pub use cert::{Certificate, CertificateError, Fingerprint, SubjectFields};
pub use naive::{naive_body, naive_identity_token, verify_naive};
pub use policy::{PolicyError, SignaturePolicy};
pub use sign::{sign, sign_id_referenced, SignError, SignOptions};
pub use verify::{
    audit, extract_signer_identity, signature_rules, verify_hardened, AuditReport, Failure,
    FailureKind, Finding, NotAccepted, Stage, StageAudit, StageOutcome, Verdict,
    VerificationReport, VerifiedLocation, VerifierKind,
};

pub const EXC_C14N: &str = "http://www.w3.org/2001/10/xml-exc-c14n#";
pub const XPATH_FILTER2: &str = "http://www.w3.org/2002/06/xmldsig-filter2";
pub const SHA256: &str = "http://www.w3.org/2001/04/xmlenc#sha256";
pub const RSA_PSS_SHA256: &str = "http://www.w3.org/2007/05/xmldsig-more#sha256-rsa-MGF1";
pub const RSA_SHA256: &str = "http://www.w3.org/2001/04/xmldsig-more#rsa-sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignatureAlgorithm {
    /// RSASSA-PSS, SHA-256, MGF1 with SHA-256, 32-byte salt.
    RsaPssSha256,
    /// RSASSA-PKCS1-v1_5 with SHA-256.
    RsaPkcs1Sha256,
}

impl SignatureAlgorithm {
    pub fn uri(self) -> &'static str {
        match self {
            Self::RsaPssSha256 => RSA_PSS_SHA256,
            Self::RsaPkcs1Sha256 => RSA_SHA256,
        }
    }

    pub fn from_uri(uri: &str) -> Option<Self> {
        match uri {
            RSA_PSS_SHA256 => Some(Self::RsaPssSha256),
            RSA_SHA256 => Some(Self::RsaPkcs1Sha256),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DigestAlgorithm {
    Sha256,
}

impl DigestAlgorithm {
    pub fn uri(self) -> &'static str {
        SHA256
    }

    pub fn from_uri(uri: &str) -> Option<Self> {
        (uri == SHA256).then_some(Self::Sha256)
    }

    pub fn digest(self, data: &[u8]) -> Vec<u8> {
        use sha2::Digest;
        sha2::Sha256::digest(data).to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("unsupported algorithm {0}")]
    UnsupportedAlgorithm(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("signing failed: {0}")]
    Signing(String),
    #[error("signature does not verify")]
    BadSignature,
}

/// A private key together with its certificate. Implementations never
/// expose key material.
pub trait SigningKey {
    fn certificate(&self) -> &Certificate;
    fn algorithm(&self) -> SignatureAlgorithm;
    /// Signs `message`; hashing is part of the algorithm.
    fn sign(&self, message: &[u8]) -> Result<Vec<u8>, CryptoError>;
}

pub trait SignatureVerifier {
    fn verify(
        &self,
        algorithm: SignatureAlgorithm,
        certificate: &Certificate,
        message: &[u8],
        signature: &[u8],
    ) -> Result<(), CryptoError>;
}

impl<T: SigningKey + ?Sized> SigningKey for &T {
    fn certificate(&self) -> &Certificate {
        (**self).certificate()
    }
    fn algorithm(&self) -> SignatureAlgorithm {
        (**self).algorithm()
    }
    fn sign(&self, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
        (**self).sign(message)
    }
}

impl fmt::Display for SignatureAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.uri())
    }
}

pub fn b64_encode(data: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(data)
}

/// Decodes base64 text, ignoring XML whitespace (tokens are often wrapped).
pub fn b64_decode(text: &str) -> Option<Vec<u8>> {
    use base64::Engine;
    let compact: String = text.chars().filter(|c| !c.is_ascii_whitespace()).collect();
    base64::engine::general_purpose::STANDARD
        .decode(compact)
        .ok()
}

#[cfg(test)]
pub(crate) mod testing;
