use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use x509_cert::der::asn1::ObjectIdentifier;
use x509_cert::der::{Decode, Encode};
use x509_cert::name::Name;

const OID_CN: ObjectIdentifier = ObjectIdentifier::new_unwrap("2.5.4.3");
const OID_O: ObjectIdentifier = ObjectIdentifier::new_unwrap("2.5.4.10");
const OID_C: ObjectIdentifier = ObjectIdentifier::new_unwrap("2.5.4.6");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid X.509 certificate: {0}")]
pub struct CertificateError(pub String);

/// SHA-256 over the certificate DER.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn of(der: &[u8]) -> Self {
        use sha2::Digest;
        Self(sha2::Sha256::digest(der).into())
    }

    /// Accepts 64 hex digits, optionally separated by colons.
    pub fn from_hex(text: &str) -> Option<Self> {
        let digits: Vec<u8> = text.bytes().filter(|b| *b != b':').collect();
        if digits.len() != 64 {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, pair) in digits.chunks(2).enumerate() {
            let hi = (pair[0] as char).to_digit(16)?;
            let lo = (pair[1] as char).to_digit(16)?;
            out[i] = (hi * 16 + lo) as u8;
        }
        Some(Self(out))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectFields {
    pub common_name: Option<String>,
    pub organization: Option<String>,
    pub country: Option<String>,
    /// RFC 4514 string form of the whole name.
    pub distinguished_name: String,
}

impl SubjectFields {
    fn from_name(name: &Name) -> Self {
        let mut fields = Self {
            common_name: None,
            organization: None,
            country: None,
            distinguished_name: name.to_string(),
        };
        for rdn in name.0.iter() {
            for atv in rdn.0.iter() {
                let Ok(value) = core::str::from_utf8(atv.value.value()) else {
                    continue;
                };
                let slot = match atv.oid {
                    OID_CN => &mut fields.common_name,
                    OID_O => &mut fields.organization,
                    OID_C => &mut fields.country,
                    _ => continue,
                };
                slot.get_or_insert_with(|| value.into());
            }
        }
        fields
    }
}

/// A parsed X.509 certificate. Equality is DER equality.
#[derive(Debug, Clone)]
pub struct Certificate {
    der: Vec<u8>,
    spki_der: Vec<u8>,
    subject: SubjectFields,
    issuer: String,
    fingerprint: Fingerprint,
}

impl PartialEq for Certificate {
    fn eq(&self, other: &Self) -> bool {
        self.der == other.der
    }
}

impl Eq for Certificate {}

impl Certificate {
    pub fn from_der(der: &[u8]) -> Result<Self, CertificateError> {
        let cert =
            x509_cert::Certificate::from_der(der).map_err(|e| CertificateError(e.to_string()))?;
        let tbs = &cert.tbs_certificate;
        let spki_der = tbs
            .subject_public_key_info
            .to_der()
            .map_err(|e| CertificateError(e.to_string()))?;
        Ok(Self {
            der: der.to_vec(),
            spki_der,
            subject: SubjectFields::from_name(&tbs.subject),
            issuer: tbs.issuer.to_string(),
            fingerprint: Fingerprint::of(der),
        })
    }

    pub fn der(&self) -> &[u8] {
        &self.der
    }

    /// DER SubjectPublicKeyInfo, the input crypto providers need.
    pub fn public_key_der(&self) -> &[u8] {
        &self.spki_der
    }

    pub fn subject(&self) -> &SubjectFields {
        &self.subject
    }

    pub fn issuer(&self) -> &str {
        &self.issuer
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xmldsig::testing::{cert, PATIENT_FP};

    #[test]
    fn patient_subject_fields() {
        let c = cert("patient");
        assert_eq!(c.subject().common_name.as_deref(), Some("TestPatient"));
        assert_eq!(
            c.subject().organization.as_deref(),
            Some("Wrapguard Test PKI")
        );
        assert_eq!(c.subject().country.as_deref(), Some("DE"));
        assert!(c.subject().distinguished_name.contains("CN=TestPatient"));
        assert_eq!(c.issuer(), c.subject().distinguished_name);
    }

    #[test]
    fn fingerprint_matches_openssl_value() {
        let c = cert("patient");
        assert_eq!(c.fingerprint().to_string(), PATIENT_FP);
        assert_eq!(Fingerprint::from_hex(PATIENT_FP), Some(c.fingerprint()));
        let colons: String = PATIENT_FP
            .as_bytes()
            .chunks(2)
            .map(|p| core::str::from_utf8(p).unwrap())
            .collect::<Vec<_>>()
            .join(":");
        assert_eq!(Fingerprint::from_hex(&colons), Some(c.fingerprint()));
        assert_eq!(Fingerprint::from_hex("abc"), None);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(Certificate::from_der(b"\x30\x03\x02\x01\x01").is_err());
        assert!(Certificate::from_der(b"").is_err());
    }

    #[test]
    fn distinct_certificates_differ() {
        assert_ne!(cert("patient"), cert("mallory"));
        assert_eq!(
            cert("mallory").subject().common_name.as_deref(),
            Some("Mallory")
        );
        assert_eq!(
            cert("service").subject().common_name.as_deref(),
            Some("PHR Authentication Service")
        );
    }
}
