//! Random documents for property tests: signed login requests with random
//! prefixes, IDs and nonces, single-byte mutations of their signed
//! content, and small unsigned trees.

use rand::distributions::Alphanumeric;
use rand::seq::SliceRandom;
use rand::Rng;
use wrapguard_core::forge::signed_subtrees;
use wrapguard_core::ns;
use wrapguard_core::xml::{Element, NodePath, QName, XmlDocument, XmlNode};
use wrapguard_core::xmldsig::{b64_decode, SignError, SignaturePolicy, SigningKey};

use crate::harness::{build_login_request, RequestStyle, CHALLENGE_LEN};

const WSA: &str = "http://www.w3.org/2005/08/addressing";

pub fn random_challenge(rng: &mut impl Rng) -> String {
    rng.sample_iter(&Alphanumeric)
        .take(CHALLENGE_LEN)
        .map(char::from)
        .collect()
}

fn random_prefix(rng: &mut impl Rng, taken: &[String]) -> String {
    loop {
        let len = rng.gen_range(1..=5);
        let p: String = (0..len)
            .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
            .collect();
        if !p.starts_with("xml") && !taken.contains(&p) {
            return p;
        }
    }
}

/// A signed LoginCreateToken request with random prefixes, IDs and
/// challenge, sometimes carrying addressing headers next to the
/// Security header.
pub fn random_login_request<K: SigningKey>(
    rng: &mut impl Rng,
    key: &K,
    policy: &SignaturePolicy,
) -> Result<XmlDocument, SignError> {
    let style = RequestStyle::random(rng);
    let mut root = build_login_request(&random_challenge(rng), &style).into_root();
    if rng.gen_bool(0.5) {
        let taken = [
            style.soap.clone(),
            style.wst.clone(),
            style.sign.ds_prefix.clone(),
            style.sign.wsse_prefix.clone(),
            style.sign.wsu_prefix.clone(),
        ];
        let wsa = random_prefix(rng, &taken);
        let header = root.child_elements_mut().next().expect("Header");
        let message_id: [u8; 8] = rng.gen();
        header.children.push(XmlNode::Element(
            Element::new(QName::new(WSA, "MessageID"), Some(&wsa))
                .with_text(&format!("urn:uuid:{}", hex(&message_id))),
        ));
        header.children.push(XmlNode::Element(
            Element::new(QName::new(WSA, "To"), Some(&wsa)).with_text("https://phr.example/auth"),
        ));
    }
    let doc = XmlDocument::from_root(root).expect("prefixes are bound");
    wrapguard_core::xmldsig::sign(&doc, policy, key, &style.sign)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A place whose content a mutation may change without touching markup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MutationSite {
    /// The `index`-th child node of the element, which is character data.
    Text { element: NodePath, index: usize },
    /// An attribute value that is not an ID.
    Attribute { element: NodePath, name: QName },
    /// A `DigestValue` inside `SignedInfo`.
    DigestValue { element: NodePath },
}

/// Character data and non-ID attribute values inside signed subtrees.
/// Digest values count; algorithm URIs and transform expressions do not,
/// since changing them is caught by the reference check before crypto.
pub fn mutation_sites(doc: &XmlDocument) -> Vec<MutationSite> {
    let mut sites = Vec::new();
    for top in signed_subtrees(doc) {
        let is_signature = top.name() == &ns::signature();
        for (path, e) in doc.elements() {
            if path != top && !top.is_ancestor_of(&path) {
                continue;
            }
            if is_signature {
                if e.name == ns::ds("DigestValue") {
                    sites.push(MutationSite::DigestValue { element: path });
                }
                continue;
            }
            for (index, c) in e.children.iter().enumerate() {
                if matches!(c, XmlNode::Text(t) if !t.trim().is_empty()) {
                    sites.push(MutationSite::Text {
                        element: path.clone(),
                        index,
                    });
                }
            }
            for a in &e.attributes {
                if !doc.registry().is_id(&a.name) && !a.value.is_empty() {
                    sites.push(MutationSite::Attribute {
                        element: path.clone(),
                        name: a.name.clone(),
                    });
                }
            }
        }
    }
    sites
}

/// Replaces one non-space character with a different ASCII letter or
/// digit. Digest values only change to text decoding to different bytes.
pub fn mutate(doc: &XmlDocument, site: &MutationSite, rng: &mut impl Rng) -> XmlDocument {
    let mut root = doc.root().clone();
    let path = match site {
        MutationSite::Text { element, .. }
        | MutationSite::Attribute { element, .. }
        | MutationSite::DigestValue { element } => element,
    };
    let e = path.resolve_in_mut(&mut root).expect("site exists");
    match site {
        MutationSite::Text { index, .. } => {
            let XmlNode::Text(t) = &mut e.children[*index] else {
                unreachable!("site points at text")
            };
            *t = flip(t, rng, |_| true);
        }
        MutationSite::Attribute { name, .. } => {
            let a = e
                .attributes
                .iter_mut()
                .find(|a| &a.name == name)
                .expect("site exists");
            a.value = flip(&a.value, rng, |_| true);
        }
        MutationSite::DigestValue { .. } => {
            let old = e.text_content();
            let decoded = b64_decode(&old);
            let new = flip(&old, rng, |s| {
                b64_decode(s).is_some_and(|d| Some(&d) != decoded.as_ref())
            });
            e.set_text(&new);
        }
    }
    XmlDocument::from_root_with(root, doc.registry().clone()).expect("markup unchanged")
}

fn flip(s: &str, rng: &mut impl Rng, accept: impl Fn(&str) -> bool) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    let positions: Vec<usize> = s
        .char_indices()
        .filter(|(_, c)| c.is_ascii_alphanumeric() || c.is_ascii_punctuation())
        .map(|(i, _)| i)
        .collect();
    loop {
        let i = *positions.choose(rng).expect("site has a mutable character");
        let old = s.as_bytes()[i];
        let new = *ALPHABET.choose(rng).unwrap();
        if new == old {
            continue;
        }
        let mut out = s.to_owned();
        out.replace_range(i..i + 1, std::str::from_utf8(&[new]).unwrap());
        if accept(&out) {
            return out;
        }
    }
}

const NAMESPACES: [&str; 3] = ["urn:ex:a", "urn:ex:b", ""];
const LOCALS: [&str; 4] = ["a", "b", "c", "item"];
const ATTR_VALUES: [&str; 3] = ["x", "y", "z"];

/// A random tree of at most `max_nodes` elements over a small name
/// alphabet, so that same-named siblings and cousins are common. Prefixes
/// are random and sometimes redeclared deeper down.
pub fn random_document(rng: &mut impl Rng, max_nodes: usize) -> XmlDocument {
    let target = rng.gen_range(1..=max_nodes.max(1));
    let mut count = 1;
    let mut root = random_element(rng);
    let mut open: Vec<Vec<usize>> = vec![Vec::new()];
    while count < target {
        let at = open.choose(rng).unwrap().clone();
        let mut parent = &mut root;
        for &i in &at {
            parent = parent.child_elements_mut().nth(i).unwrap();
        }
        let index = parent.child_elements().count();
        if rng.gen_bool(0.2) {
            parent
                .children
                .push(XmlNode::Text(random_challenge(rng)[..4].into()));
        }
        parent.children.push(XmlNode::Element(random_element(rng)));
        let mut child = at;
        child.push(index);
        open.push(child);
        count += 1;
    }
    XmlDocument::from_root(root).expect("from_root binds every prefix")
}

fn random_element(rng: &mut impl Rng) -> Element {
    let uri = *NAMESPACES.choose(rng).unwrap();
    let local = *LOCALS.choose(rng).unwrap();
    let prefix = if uri.is_empty() || rng.gen_bool(0.3) {
        None
    } else {
        Some(random_prefix(rng, &[]))
    };
    let mut e = Element::new(QName::new(uri, local), prefix.as_deref());
    if rng.gen_bool(0.3) {
        e = e.with_attr(QName::local("k"), None, ATTR_VALUES.choose(rng).unwrap());
    }
    e
}
