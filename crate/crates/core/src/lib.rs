//! Signature-wrapping resistant XML signature processing.
//!
//! The crate is `no_std` (with `alloc`) and performs no I/O. It contains:
//!
//! * [`xml`]: a namespace-aware document model with a strict parser, a
//!   serializer and Exclusive XML Canonicalization 1.0.
//! * [`fastxpath`]: the prefix-free FastXPath subset used as the signature
//!   referencing scheme, with parser, evaluator and generator.
//! * [`structure`]: hardened structural rules and message validation
//!   instructions, plus the line-oriented profile format.
//! * [`xmldsig`]: signature generation and the staged hardened verifier, an
//!   intentionally naive ID-referencing verifier, and a non-stopping audit.
//! * [`forge`]: mechanical construction of wrapping attack documents.
//!
//! Cryptography is pluggable through [`xmldsig::SignatureVerifier`] and
//! [`xmldsig::SigningKey`]; only SHA-256 digests are computed here.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod fastxpath;
pub mod forge;
pub mod ns;
pub mod structure;
pub mod xml;
pub mod xmldsig;
