//! Namespace URIs and well-known element names of SOAP 1.2, WS-Security and
//! XML Signature.

use crate::xml::QName;

pub const SOAP12: &str = "http://www.w3.org/2003/05/soap-envelope";
pub const WSSE: &str =
    "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-secext-1.0.xsd";
pub const WSU: &str =
    "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-wssecurity-utility-1.0.xsd";
pub const DS: &str = "http://www.w3.org/2000/09/xmldsig#";
pub const DSIG_FILTER2: &str = "http://www.w3.org/2002/06/xmldsig-filter2";
pub const WST: &str = "http://docs.oasis-open.org/ws-sx/ws-trust/200512/";
pub const SAML2: &str = "urn:oasis:names:tc:SAML:2.0:assertion";
pub const XML: &str = "http://www.w3.org/XML/1998/namespace";

pub const X509_TOKEN_TYPE: &str =
    "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-x509-token-profile-1.0#X509v3";
pub const BASE64_ENCODING: &str =
    "http://docs.oasis-open.org/wss/2004/01/oasis-200401-wss-soap-message-security-1.0#Base64Binary";

pub fn soap(local: &str) -> QName {
    QName::new(SOAP12, local)
}

pub fn wsse(local: &str) -> QName {
    QName::new(WSSE, local)
}

pub fn wsu(local: &str) -> QName {
    QName::new(WSU, local)
}

pub fn ds(local: &str) -> QName {
    QName::new(DS, local)
}

pub fn wst(local: &str) -> QName {
    QName::new(WST, local)
}

pub fn envelope() -> QName {
    soap("Envelope")
}

pub fn header() -> QName {
    soap("Header")
}

pub fn body() -> QName {
    soap("Body")
}

pub fn security() -> QName {
    wsse("Security")
}

pub fn binary_security_token() -> QName {
    wsse("BinarySecurityToken")
}

pub fn signature() -> QName {
    ds("Signature")
}

pub fn challenge() -> QName {
    wst("Challenge")
}
