//! Loading documents, keys, certificates, profiles and policies from disk.

use std::path::{Path, PathBuf};

use wrapguard_core::structure::{Profile, ProfileError};
use wrapguard_core::xml::{XmlDocument, XmlError};
use wrapguard_core::xmldsig::{
    b64_decode, Certificate, CertificateError, CryptoError, Fingerprint, PolicyError,
    SignaturePolicy,
};

use crate::crypto::RsaSigningKey;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Xml { path: PathBuf, source: XmlError },
    #[error("{path}: {source}")]
    Profile { path: PathBuf, source: ProfileError },
    #[error("{path}: {source}")]
    Policy { path: PathBuf, source: PolicyError },
    #[error("{path}: {source}")]
    Certificate {
        path: PathBuf,
        source: CertificateError,
    },
    #[error("{path}: {source}")]
    Key { path: PathBuf, source: CryptoError },
    #[error("{0:?} is neither a certificate file nor a SHA-256 fingerprint")]
    Trust(String),
}

fn read(path: &Path) -> Result<Vec<u8>, FileError> {
    std::fs::read(path).map_err(|source| FileError::Io {
        path: path.into(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.into(),
        source,
    })
}

pub fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), FileError> {
    std::fs::write(path, data).map_err(|source| FileError::Io {
        path: path.into(),
        source,
    })
}

pub fn load_document(path: &Path) -> Result<XmlDocument, FileError> {
    XmlDocument::parse(&read(path)?).map_err(|source| FileError::Xml {
        path: path.into(),
        source,
    })
}

/// DER or PEM (`-----BEGIN CERTIFICATE-----`).
pub fn load_certificate(path: &Path) -> Result<Certificate, FileError> {
    let raw = read(path)?;
    let der = pem_body(&raw, "CERTIFICATE").unwrap_or(raw);
    Certificate::from_der(&der).map_err(|source| FileError::Certificate {
        path: path.into(),
        source,
    })
}

fn pem_body(raw: &[u8], label: &str) -> Option<Vec<u8>> {
    let text = std::str::from_utf8(raw).ok()?;
    let begin = format!("-----BEGIN {label}-----");
    let end = format!("-----END {label}-----");
    let start = text.find(&begin)? + begin.len();
    let stop = start + text[start..].find(&end)?;
    b64_decode(&text[start..stop])
}

/// `key` is a PKCS#8 PEM private key. Without `cert`, the certificate is
/// looked up next to the key (`x.key.pem` -> `x.crt.pem` or `x.crt.der`).
pub fn load_signing_key(key: &Path, cert: Option<&Path>) -> Result<RsaSigningKey, FileError> {
    let cert = match cert {
        Some(c) => load_certificate(c)?,
        None => load_certificate(&sibling_certificate(key)?)?,
    };
    RsaSigningKey::from_pkcs8_pem(&read_text(key)?, cert).map_err(|source| FileError::Key {
        path: key.into(),
        source,
    })
}

fn sibling_certificate(key: &Path) -> Result<PathBuf, FileError> {
    let name = key.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = name.strip_suffix(".key.pem").unwrap_or(name);
    for ext in ["crt.pem", "crt.der"] {
        let candidate = key.with_file_name(format!("{stem}.{ext}"));
        if candidate.exists() {
            return Ok(candidate);
        }
    }
    Err(FileError::Io {
        path: key.with_file_name(format!("{stem}.crt.pem")),
        source: std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no certificate next to the key",
        ),
    })
}

/// A certificate file, or a SHA-256 fingerprint in hex.
pub fn load_trust(spec: &str) -> Result<Fingerprint, FileError> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(load_certificate(path)?.fingerprint());
    }
    Fingerprint::from_hex(spec).ok_or_else(|| FileError::Trust(spec.into()))
}

pub fn load_profile(spec: &str) -> Result<Profile, FileError> {
    let path = Path::new(spec);
    let result = if path.exists() {
        Profile::parse(&read_text(path)?)
    } else {
        Profile::builtin(spec)
    };
    result.map_err(|source| FileError::Profile {
        path: path.into(),
        source,
    })
}

pub fn save_profile(path: &Path, profile: &Profile) -> Result<(), FileError> {
    write(path, profile.to_text())
}

/// A policy file, or a built-in policy name (`phr`).
pub fn load_policy(spec: &str) -> Result<SignaturePolicy, FileError> {
    let path = Path::new(spec);
    let result = if path.exists() {
        SignaturePolicy::parse(&read_text(path)?)
    } else {
        SignaturePolicy::builtin(spec)
    };
    result.map_err(|source| FileError::Policy {
        path: path.into(),
        source,
    })
}

#[cfg(test)]
pub(crate) fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/keys")
        .join(name)
}

#[cfg(test)]
pub(crate) fn fixture_key(name: &str) -> RsaSigningKey {
    load_signing_key(&fixture_path(&format!("{name}.key.pem")), None).unwrap()
}
