//! Command-line tooling and the PHR login harness on top of
//! `wrapguard-core`: RSA crypto, file loading, report rendering, the
//! challenge-response service and its HTTP transport.

pub mod corpus;
pub mod crypto;
pub mod files;
pub mod harness;
pub mod http;
pub mod report;
