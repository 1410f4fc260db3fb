use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::verify::{check_references, check_signature_presence};
use super::{b64_encode, CryptoError, SignaturePolicy, SigningKey, EXC_C14N, XPATH_FILTER2};
use crate::ns;
use crate::structure::{apply_instructions, validate_structure};
use crate::xml::{Element, NodePath, QName, XmlDocument, XmlError, XmlNode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignError {
    #[error("policy violation: {0}")]
    PolicyViolation(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Xml(#[from] XmlError),
}

/// Prefixes and IDs used for the generated elements. IDs left as `None`
/// are derived from a digest of the input document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignOptions {
    pub ds_prefix: String,
    pub wsse_prefix: String,
    pub wsu_prefix: String,
    pub token_id: Option<String>,
    pub str_id: Option<String>,
    /// Assigned in order to referenced elements that carry no ID yet.
    pub reference_ids: Vec<String>,
}

impl Default for SignOptions {
    fn default() -> Self {
        Self {
            ds_prefix: "ds".into(),
            wsse_prefix: "wsse".into(),
            wsu_prefix: "wsu".into(),
            token_id: None,
            str_id: None,
            reference_ids: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Form {
    FastXPath,
    IdOnly,
}

/// Signs every element selected by the policy's expected references.
///
/// The input must satisfy the policy's structure rules and each expected
/// reference must select exactly one element. The output carries a
/// Security header with the signer's BinarySecurityToken and a Signature
/// whose references hold the prefix-free FastXPath in an XPath Filter 2.0
/// `intersect` transform. The output is re-checked against the policy's
/// structure rules, instructions and reference checks; any deviation
/// aborts signing.
pub fn sign<K: SigningKey>(
    doc: &XmlDocument,
    policy: &SignaturePolicy,
    key: &K,
    options: &SignOptions,
) -> Result<XmlDocument, SignError> {
    sign_impl(doc, policy, key, options, Form::FastXPath)
}

/// Produces the ID-referenced form (`URI="#id"` with only an exclusive
/// C14N transform) that the hardened verifier rejects. Only for building
/// test fixtures and attack targets.
pub fn sign_id_referenced<K: SigningKey>(
    doc: &XmlDocument,
    policy: &SignaturePolicy,
    key: &K,
    options: &SignOptions,
) -> Result<XmlDocument, SignError> {
    sign_impl(doc, policy, key, options, Form::IdOnly)
}

fn violation(msg: impl Into<String>) -> SignError {
    SignError::PolicyViolation(msg.into())
}

fn derived_id(seed: &[u8], label: &str) -> String {
    use sha2::Digest;
    let mut h = sha2::Sha256::new();
    h.update(seed);
    h.update(label.as_bytes());
    let d = h.finalize();
    let mut out = String::new();
    for b in &d[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn sign_impl<K: SigningKey>(
    doc: &XmlDocument,
    policy: &SignaturePolicy,
    key: &K,
    options: &SignOptions,
    form: Form,
) -> Result<XmlDocument, SignError> {
    if key.algorithm() != policy.sig_alg {
        return Err(violation(format!(
            "key algorithm {} differs from policy {}",
            key.algorithm(),
            policy.sig_alg
        )));
    }
    if let Some(v) = validate_structure(doc, &policy.rules).first() {
        return Err(violation(format!(
            "input structure: {} at {}",
            v.reason, v.path
        )));
    }
    if !doc.find_all(&ns::signature()).is_empty() {
        return Err(violation("document already contains a Signature"));
    }
    if doc.root().name != ns::envelope() {
        return Err(violation("document element must be a SOAP 1.2 Envelope"));
    }

    let mut targets = Vec::new();
    for expr in policy.expected_references() {
        match expr.evaluate(doc).as_slice() {
            [one] => targets.push((expr.clone(), one.clone())),
            hits => {
                return Err(violation(format!(
                    "reference {expr} selects {} elements, expected exactly one",
                    hits.len()
                )))
            }
        }
    }

    let seed = doc.serialize();
    let wsu_id = QName::new(ns::WSU, "Id");
    let mut root = doc.root().clone();
    let mut fresh_ids = options.reference_ids.iter();
    let mut ids = Vec::new();
    for (i, (_, path)) in targets.iter().enumerate() {
        let existing = doc
            .get(path)
            .and_then(|e| doc.registry().id_of(e))
            .map(|(_, v)| v.to_owned());
        let id = match existing {
            Some(id) => {
                if doc.resolve_id(&id).is_err() {
                    return Err(violation(format!(
                        "ID {id:?} of a signed element is not unique"
                    )));
                }
                id
            }
            None => {
                let id = fresh_ids
                    .next()
                    .cloned()
                    .unwrap_or_else(|| format!("id-{}", derived_id(&seed, &format!("ref{i}"))));
                if doc.first_id_match(&id).is_some() || ids.contains(&id) {
                    return Err(violation(format!("ID {id:?} is already in use")));
                }
                let e = path.resolve_in_mut(&mut root).expect("evaluated above");
                e.set_attribute(wsu_id.clone(), Some(&options.wsu_prefix), &id);
                id
            }
        };
        ids.push(id);
    }

    let token_id = options
        .token_id
        .clone()
        .unwrap_or_else(|| format!("X509-{}", derived_id(&seed, "token")));
    let str_id = options
        .str_id
        .clone()
        .unwrap_or_else(|| format!("STR-{}", derived_id(&seed, "str")));
    for id in [&token_id, &str_id] {
        if doc.first_id_match(id).is_some() || ids.contains(id) {
            return Err(violation(format!("ID {id:?} is already in use")));
        }
    }

    let ds = |local: &str| Element::new(ns::ds(local), Some(&options.ds_prefix));
    let wsse = |local: &str| Element::new(ns::wsse(local), Some(&options.wsse_prefix));
    let algorithm = |mut e: Element, uri: &str| {
        e.set_attribute(QName::local("Algorithm"), None, uri);
        e
    };

    let mut signed_info = ds("SignedInfo")
        .with_child(algorithm(ds("CanonicalizationMethod"), EXC_C14N))
        .with_child(algorithm(ds("SignatureMethod"), policy.sig_alg.uri()));
    for ((expr, _), id) in targets.iter().zip(&ids) {
        let mut transforms = ds("Transforms");
        if form == Form::FastXPath {
            transforms = transforms.with_child(
                algorithm(ds("Transform"), XPATH_FILTER2).with_child(
                    Element::new(QName::new(XPATH_FILTER2, "XPath"), Some("dsig-xpath"))
                        .with_attr(QName::local("Filter"), None, "intersect")
                        .with_text(&format!("{expr}")),
                ),
            );
        }
        transforms = transforms.with_child(algorithm(ds("Transform"), EXC_C14N));
        signed_info = signed_info.with_child(
            ds("Reference")
                .with_attr(QName::local("URI"), None, &format!("#{id}"))
                .with_child(transforms)
                .with_child(algorithm(ds("DigestMethod"), policy.digest_alg.uri()))
                .with_child(ds("DigestValue")),
        );
    }
    let signature = ds("Signature")
        .with_child(signed_info)
        .with_child(ds("SignatureValue"))
        .with_child(
            ds("KeyInfo").with_child(
                wsse("SecurityTokenReference")
                    .with_attr(wsu_id.clone(), Some(&options.wsu_prefix), &str_id)
                    .with_child(
                        wsse("Reference")
                            .with_attr(QName::local("URI"), None, &format!("#{token_id}"))
                            .with_attr(QName::local("ValueType"), None, ns::X509_TOKEN_TYPE),
                    ),
            ),
        );
    let token = wsse("BinarySecurityToken")
        .with_attr(QName::local("EncodingType"), None, ns::BASE64_ENCODING)
        .with_attr(QName::local("ValueType"), None, ns::X509_TOKEN_TYPE)
        .with_attr(wsu_id, Some(&options.wsu_prefix), &token_id)
        .with_text(&b64_encode(key.certificate().der()));

    let sig_path = install(&mut root, &options.wsse_prefix, token, signature)?;
    let si_path = sig_path.child(0, ns::ds("SignedInfo"));

    let registry = doc.registry().clone();
    let staged = XmlDocument::from_root_with(root, registry.clone())?;
    let mut root = staged.root().clone();
    for (i, (expr, _)) in targets.iter().enumerate() {
        let target = match expr.evaluate(&staged).as_slice() {
            [one] => one.clone(),
            _ => return Err(violation(format!("reference {expr} became ambiguous"))),
        };
        let digest = policy
            .digest_alg
            .digest(&staged.canonicalize(&target, &[])?);
        let reference = si_path.child(2 + i, ns::ds("Reference"));
        let dv = reference
            .child(2, ns::ds("DigestValue"))
            .resolve_in_mut(&mut root)
            .expect("built above");
        dv.set_text(&b64_encode(&digest));
    }
    let digested = XmlDocument::from_root_with(root, registry.clone())?;
    let signature_value = key.sign(&digested.canonicalize(&si_path, &[])?)?;
    let mut root = digested.into_root();
    sig_path
        .child(1, ns::ds("SignatureValue"))
        .resolve_in_mut(&mut root)
        .expect("built above")
        .set_text(&b64_encode(&signature_value));
    let signed = XmlDocument::from_root_with(root, registry)?;

    if let Some(v) = validate_structure(&signed, &policy.rules).first() {
        return Err(violation(format!(
            "output structure: {} at {}",
            v.reason, v.path
        )));
    }
    if let Some(v) = apply_instructions(&signed, &policy.instructions).first() {
        return Err(violation(format!(
            "output instruction {}: {}",
            v.rule_id, v.reason
        )));
    }
    let (block, findings) = check_signature_presence(&signed);
    if let Some(f) = findings.first() {
        return Err(violation(format!("output signature: {}", f.message)));
    }
    if form == Form::FastXPath {
        let sig = block.expect("no findings");
        let (_, findings) = check_references(&signed, policy, &sig);
        if let Some(f) = findings.first() {
            return Err(violation(format!("output references: {}", f.message)));
        }
    }
    Ok(signed)
}

/// Places token and signature into `Envelope/Header/Security`, creating
/// Header and Security as needed. Returns the Signature's path.
fn install(
    root: &mut Element,
    wsse_prefix: &str,
    token: Element,
    signature: Element,
) -> Result<NodePath, SignError> {
    let root_path = NodePath::root(root.name.clone());
    let existing = root.child_elements().position(|e| e.name == ns::header());
    let header_index = match existing {
        Some(i) => i,
        None => {
            let header = Element::new(ns::header(), root.prefix.as_deref());
            root.children.insert(0, XmlNode::Element(header));
            0
        }
    };
    let header_path = root_path.child(header_index, ns::header());
    let header = header_path.resolve_in_mut(root).expect("present");
    let securities: Vec<usize> = header
        .child_elements()
        .enumerate()
        .filter(|(_, e)| e.name == ns::security())
        .map(|(i, _)| i)
        .collect();
    let security_index = match securities.as_slice() {
        [] => {
            header.children.push(XmlNode::Element(Element::new(
                ns::security(),
                Some(wsse_prefix),
            )));
            header.child_elements().count() - 1
        }
        [i] => *i,
        _ => return Err(violation("more than one Security header")),
    };
    let security_path = header_path.child(security_index, ns::security());
    let security = security_path.resolve_in_mut(root).expect("present");
    if security
        .child_elements()
        .any(|e| e.name == ns::binary_security_token() || e.name == ns::signature())
    {
        return Err(violation(
            "Security header already carries a token or signature",
        ));
    }
    security.children.push(XmlNode::Element(token));
    security.children.push(XmlNode::Element(signature));
    let sig_index = security.child_elements().count() - 1;
    Ok(security_path.child(sig_index, ns::signature()))
}
