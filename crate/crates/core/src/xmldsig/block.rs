use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{b64_decode, EXC_C14N, XPATH_FILTER2};
use crate::ns;
use crate::xml::{Element, NodePath, QName};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransformBlock {
    ExcC14n {
        inclusive_prefixes: Vec<String>,
    },
    /// One `XPath` child of an XPath Filter 2.0 transform.
    XPathFilter2 {
        filter: String,
        expression: String,
    },
    /// XPath Filter 2.0 transform whose content is not a single `XPath`.
    MalformedFilter2(String),
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceBlock {
    pub path: NodePath,
    pub uri: Option<String>,
    pub transforms: Vec<TransformBlock>,
    pub digest_method: String,
    pub digest_value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyInfoRef {
    /// `wsse:SecurityTokenReference/wsse:Reference/@URI`.
    TokenReference {
        uri: String,
    },
    Missing,
    Unsupported(String),
}

/// The parts of a `ds:Signature` element verification needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureBlock {
    pub path: NodePath,
    pub signed_info: NodePath,
    pub c14n_method: String,
    pub c14n_inclusive_prefixes: Vec<String>,
    pub signature_method: String,
    pub references: Vec<ReferenceBlock>,
    pub signature_value: Vec<u8>,
    pub key_info: KeyInfoRef,
}

fn ec(local: &str) -> QName {
    QName::new(EXC_C14N, local)
}

fn child_path<'a>(
    parent: &'a Element,
    parent_path: &NodePath,
    name: &QName,
) -> Option<(NodePath, &'a Element)> {
    parent
        .child_elements()
        .enumerate()
        .find(|(_, e)| &e.name == name)
        .map(|(i, e)| (parent_path.child(i, name.clone()), e))
}

fn algorithm(e: &Element) -> Result<String, String> {
    e.attribute(&QName::local("Algorithm"))
        .map(ToOwned::to_owned)
        .ok_or_else(|| format!("{} lacks an Algorithm attribute", e.name.local_name()))
}

fn inclusive_prefixes(e: &Element) -> Vec<String> {
    e.first_child(&ec("InclusiveNamespaces"))
        .and_then(|i| i.attribute(&QName::local("PrefixList")))
        .map(|l| l.split_whitespace().map(ToString::to_string).collect())
        .unwrap_or_default()
}

impl SignatureBlock {
    /// Reads a `ds:Signature` element. Errors describe what is missing or
    /// malformed.
    pub fn parse(sig: &Element, path: &NodePath) -> Result<Self, String> {
        if sig.name != ns::signature() {
            return Err(format!("{} is not a ds:Signature", sig.name));
        }
        let (si_path, si) =
            child_path(sig, path, &ns::ds("SignedInfo")).ok_or("missing SignedInfo")?;
        let c14n = si
            .first_child(&ns::ds("CanonicalizationMethod"))
            .ok_or("missing CanonicalizationMethod")?;
        let sm = si
            .first_child(&ns::ds("SignatureMethod"))
            .ok_or("missing SignatureMethod")?;
        let mut references = Vec::new();
        for (i, r) in si.child_elements().enumerate() {
            if r.name != ns::ds("Reference") {
                continue;
            }
            let mut transforms = Vec::new();
            if let Some(ts) = r.first_child(&ns::ds("Transforms")) {
                for t in ts.child_elements() {
                    transforms.push(parse_transform(t)?);
                }
            }
            let dm = r
                .first_child(&ns::ds("DigestMethod"))
                .ok_or("Reference without DigestMethod")?;
            let dv = r
                .first_child(&ns::ds("DigestValue"))
                .ok_or("Reference without DigestValue")?;
            references.push(ReferenceBlock {
                path: si_path.child(i, r.name.clone()),
                uri: r.attribute(&QName::local("URI")).map(ToOwned::to_owned),
                transforms,
                digest_method: algorithm(dm)?,
                digest_value: b64_decode(&dv.text_content()).ok_or("DigestValue is not base64")?,
            });
        }
        if references.is_empty() {
            return Err("SignedInfo has no Reference".into());
        }
        let sv = sig
            .first_child(&ns::ds("SignatureValue"))
            .ok_or("missing SignatureValue")?;
        let key_info = match sig.first_child(&ns::ds("KeyInfo")) {
            None => KeyInfoRef::Missing,
            Some(ki) => match ki
                .first_child(&ns::wsse("SecurityTokenReference"))
                .and_then(|str_| str_.first_child(&ns::wsse("Reference")))
                .and_then(|r| r.attribute(&QName::local("URI")))
            {
                Some(uri) => KeyInfoRef::TokenReference {
                    uri: uri.to_owned(),
                },
                None => KeyInfoRef::Unsupported(
                    ki.child_elements()
                        .next()
                        .map_or("empty KeyInfo".into(), |e| format!("{}", e.name)),
                ),
            },
        };
        Ok(Self {
            path: path.clone(),
            signed_info: si_path,
            c14n_method: algorithm(c14n)?,
            c14n_inclusive_prefixes: inclusive_prefixes(c14n),
            signature_method: algorithm(sm)?,
            references,
            signature_value: b64_decode(&sv.text_content())
                .ok_or("SignatureValue is not base64")?,
            key_info,
        })
    }
}

fn parse_transform(t: &Element) -> Result<TransformBlock, String> {
    let alg = algorithm(t)?;
    Ok(match alg.as_str() {
        EXC_C14N => TransformBlock::ExcC14n {
            inclusive_prefixes: inclusive_prefixes(t),
        },
        XPATH_FILTER2 => {
            let xpaths: Vec<&Element> = t.child_elements().collect();
            match xpaths.as_slice() {
                [x] if x.name == QName::new(XPATH_FILTER2, "XPath") => {
                    TransformBlock::XPathFilter2 {
                        filter: x
                            .attribute(&QName::local("Filter"))
                            .unwrap_or_default()
                            .to_owned(),
                        expression: x.text_content(),
                    }
                }
                _ => TransformBlock::MalformedFilter2(format!(
                    "{} child elements, expected one XPath",
                    xpaths.len()
                )),
            }
        }
        _ => TransformBlock::Other(alg),
    })
}

/// The ID named by a same-document `#id` URI.
pub(crate) fn fragment(uri: &str) -> Option<&str> {
    uri.strip_prefix('#').filter(|id| !id.is_empty())
}
