//! RSA signing and verification for the core traits, backed by the `rsa`
//! crate.

use rsa::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePublicKey};
use rsa::signature::{RandomizedSigner, SignatureEncoding, Signer, Verifier};
use rsa::{RsaPrivateKey, RsaPublicKey};
use sha2::Sha256;
use wrapguard_core::xmldsig::{
    Certificate, CryptoError, SignatureAlgorithm, SignatureVerifier, SigningKey,
};

/// An RSA private key bound to the certificate carrying its public half.
pub struct RsaSigningKey {
    key: RsaPrivateKey,
    certificate: Certificate,
    algorithm: SignatureAlgorithm,
}

impl std::fmt::Debug for RsaSigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RsaSigningKey")
            .field("subject", &self.certificate.subject().distinguished_name)
            .field("algorithm", &self.algorithm)
            .finish_non_exhaustive()
    }
}

impl RsaSigningKey {
    /// Fails unless the certificate's public key belongs to `key`.
    pub fn new(key: RsaPrivateKey, certificate: Certificate) -> Result<Self, CryptoError> {
        let spki = key
            .to_public_key()
            .to_public_key_der()
            .map_err(|e| CryptoError::InvalidKey(e.to_string()))?;
        if spki.as_bytes() != certificate.public_key_der() {
            return Err(CryptoError::InvalidKey(
                "certificate does not match the private key".into(),
            ));
        }
        Ok(Self {
            key,
            certificate,
            algorithm: SignatureAlgorithm::RsaPssSha256,
        })
    }

    /// PKCS#8 PEM private key.
    pub fn from_pkcs8_pem(pem: &str, certificate: Certificate) -> Result<Self, CryptoError> {
        let key = RsaPrivateKey::from_pkcs8_pem(pem)
            .map_err(|e| CryptoError::InvalidKey(e.to_string()))?;
        Self::new(key, certificate)
    }

    pub fn with_algorithm(mut self, algorithm: SignatureAlgorithm) -> Self {
        self.algorithm = algorithm;
        self
    }
}

impl SigningKey for RsaSigningKey {
    fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    fn algorithm(&self) -> SignatureAlgorithm {
        self.algorithm
    }

    fn sign(&self, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let signing = |e: rsa::signature::Error| CryptoError::Signing(e.to_string());
        match self.algorithm {
            SignatureAlgorithm::RsaPssSha256 => {
                let k = rsa::pss::BlindedSigningKey::<Sha256>::new(self.key.clone());
                let s = k
                    .try_sign_with_rng(&mut rand::thread_rng(), message)
                    .map_err(signing)?;
                Ok(s.to_vec())
            }
            SignatureAlgorithm::RsaPkcs1Sha256 => {
                let k = rsa::pkcs1v15::SigningKey::<Sha256>::new(self.key.clone());
                Ok(k.try_sign(message).map_err(signing)?.to_vec())
            }
        }
    }
}

/// Verifies RSA signatures against the certificate's SubjectPublicKeyInfo.
#[derive(Debug, Clone, Copy, Default)]
pub struct RsaVerifier;

impl SignatureVerifier for RsaVerifier {
    fn verify(
        &self,
        algorithm: SignatureAlgorithm,
        certificate: &Certificate,
        message: &[u8],
        signature: &[u8],
    ) -> Result<(), CryptoError> {
        let public = RsaPublicKey::from_public_key_der(certificate.public_key_der())
            .map_err(|e| CryptoError::InvalidKey(e.to_string()))?;
        let ok = match algorithm {
            SignatureAlgorithm::RsaPssSha256 => {
                rsa::pss::Signature::try_from(signature).is_ok_and(|s| {
                    rsa::pss::VerifyingKey::<Sha256>::new(public)
                        .verify(message, &s)
                        .is_ok()
                })
            }
            SignatureAlgorithm::RsaPkcs1Sha256 => rsa::pkcs1v15::Signature::try_from(signature)
                .is_ok_and(|s| {
                    rsa::pkcs1v15::VerifyingKey::<Sha256>::new(public)
                        .verify(message, &s)
                        .is_ok()
                }),
        };
        ok.then_some(()).ok_or(CryptoError::BadSignature)
    }
}
