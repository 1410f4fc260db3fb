//! Namespace-aware XML document model.
//!
//! Documents are immutable once built: every transformation (signing,
//! attack construction) clones the root [`Element`], edits the copy and
//! rebuilds a new [`XmlDocument`] through [`XmlDocument::from_root`].

mod c14n;
mod parse;
mod path;
mod write;

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use path::{NodePath, PathStep};

use crate::ns;

/// Errors produced while parsing, rebuilding or canonicalizing documents.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum XmlError {
    #[error("not well-formed at {line}:{column}: {message}")]
    WellFormedness {
        message: String,
        line: u32,
        column: u32,
    },
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(&'static str),
    #[error("namespace inconsistency: {0}")]
    Namespace(String),
    #[error("canonicalization failed: {0}")]
    Canonicalization(String),
    #[error("path {0} does not address an element")]
    PathNotFound(String),
}

/// Result of an ID lookup that did not find exactly one element.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("id {id:?} matched {matches} elements")]
pub struct AmbiguityError {
    pub id: String,
    pub matches: usize,
}

/// Expanded element or attribute name. Prefixes never appear here.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QName {
    namespace_uri: String,
    local_name: String,
}

impl QName {
    /// Panics if `local_name` is empty or contains a colon.
    pub fn new(namespace_uri: impl Into<String>, local_name: impl Into<String>) -> Self {
        let local_name = local_name.into();
        assert!(is_ncname(&local_name), "invalid local name {local_name:?}");
        Self {
            namespace_uri: namespace_uri.into(),
            local_name,
        }
    }

    pub fn try_new(namespace_uri: &str, local_name: &str) -> Option<Self> {
        is_ncname(local_name).then(|| Self {
            namespace_uri: namespace_uri.to_owned(),
            local_name: local_name.to_owned(),
        })
    }

    /// A name in no namespace.
    pub fn local(local_name: &str) -> Self {
        Self::new("", local_name)
    }

    pub fn local_name(&self) -> &str {
        &self.local_name
    }

    pub fn namespace_uri(&self) -> &str {
        &self.namespace_uri
    }
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.namespace_uri.is_empty() {
            f.write_str(&self.local_name)
        } else {
            write!(f, "{{{}}}{}", self.namespace_uri, self.local_name)
        }
    }
}

pub(crate) fn is_ncname(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '\u{B7}'))
}

/// A namespace declaration; `prefix == None` is the default namespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamespaceDecl {
    pub prefix: Option<String>,
    pub uri: String,
}

impl NamespaceDecl {
    pub fn new(prefix: Option<&str>, uri: &str) -> Self {
        Self {
            prefix: prefix.map(ToOwned::to_owned),
            uri: uri.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: QName,
    pub prefix: Option<String>,
    pub value: String,
}

impl Attribute {
    pub fn new(name: QName, prefix: Option<&str>, value: impl Into<String>) -> Self {
        Self {
            name,
            prefix: prefix.map(ToOwned::to_owned),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XmlNode {
    Element(Element),
    Text(String),
    /// Kept for faithful re-serialization; never canonicalized.
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: QName,
    pub prefix: Option<String>,
    pub attributes: Vec<Attribute>,
    pub namespace_decls: Vec<NamespaceDecl>,
    pub children: Vec<XmlNode>,
}

impl Element {
    pub fn new(name: QName, prefix: Option<&str>) -> Self {
        Self {
            name,
            prefix: prefix.map(ToOwned::to_owned),
            attributes: Vec::new(),
            namespace_decls: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn with_decl(mut self, prefix: Option<&str>, uri: &str) -> Self {
        self.namespace_decls.push(NamespaceDecl::new(prefix, uri));
        self
    }

    pub fn with_attr(mut self, name: QName, prefix: Option<&str>, value: &str) -> Self {
        self.set_attribute(name, prefix, value);
        self
    }

    pub fn with_child(mut self, child: Element) -> Self {
        self.children.push(XmlNode::Element(child));
        self
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.children.push(XmlNode::Text(text.to_owned()));
        self
    }

    pub fn attribute(&self, name: &QName) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| &a.name == name)
            .map(|a| a.value.as_str())
    }

    /// Replaces the value if the attribute exists, appends it otherwise.
    pub fn set_attribute(&mut self, name: QName, prefix: Option<&str>, value: &str) {
        match self.attributes.iter_mut().find(|a| a.name == name) {
            Some(a) => a.value = value.to_owned(),
            None => self.attributes.push(Attribute::new(name, prefix, value)),
        }
    }

    pub fn remove_attribute(&mut self, name: &QName) -> Option<Attribute> {
        let idx = self.attributes.iter().position(|a| &a.name == name)?;
        Some(self.attributes.remove(idx))
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|c| match c {
            XmlNode::Element(e) => Some(e),
            _ => None,
        })
    }

    pub fn child_elements_mut(&mut self) -> impl Iterator<Item = &mut Element> {
        self.children.iter_mut().filter_map(|c| match c {
            XmlNode::Element(e) => Some(e),
            _ => None,
        })
    }

    pub fn first_child(&self, name: &QName) -> Option<&Element> {
        self.child_elements().find(|e| &e.name == name)
    }

    /// Position of the `element_index`-th element child inside `children`.
    pub(crate) fn child_slot(&self, element_index: usize) -> Option<usize> {
        self.children
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, XmlNode::Element(_)))
            .nth(element_index)
            .map(|(i, _)| i)
    }

    /// Concatenation of all descendant text.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        self.collect_text(&mut out);
        out
    }

    fn collect_text(&self, out: &mut String) {
        for child in &self.children {
            match child {
                XmlNode::Text(t) => out.push_str(t),
                XmlNode::Element(e) => e.collect_text(out),
                XmlNode::Comment(_) => {}
            }
        }
    }

    /// Replaces all children with a single text node.
    pub fn set_text(&mut self, text: &str) {
        self.children.clear();
        self.children.push(XmlNode::Text(text.to_owned()));
    }

    pub fn qualified_name(&self) -> String {
        match &self.prefix {
            Some(p) => alloc::format!("{p}:{}", self.name.local_name()),
            None => self.name.local_name().to_string(),
        }
    }
}

/// Attribute names treated as XML IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdRegistry {
    attributes: Vec<QName>,
}

impl IdRegistry {
    pub fn new(attributes: Vec<QName>) -> Self {
        Self { attributes }
    }

    pub fn attributes(&self) -> &[QName] {
        &self.attributes
    }

    pub fn is_id(&self, name: &QName) -> bool {
        self.attributes.contains(name)
    }

    /// First registered ID attribute carried by `element`.
    pub fn id_of<'a>(&self, element: &'a Element) -> Option<(&'a QName, &'a str)> {
        element
            .attributes
            .iter()
            .find(|a| self.is_id(&a.name))
            .map(|a| (&a.name, a.value.as_str()))
    }
}

impl Default for IdRegistry {
    /// `wsu:Id` plus `Id`, `ID` and `id` in no namespace.
    fn default() -> Self {
        Self::new(alloc::vec![
            ns::wsu("Id"),
            QName::local("Id"),
            QName::local("ID"),
            QName::local("id"),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlDocument {
    root: Element,
    registry: IdRegistry,
    ids: BTreeMap<String, Vec<NodePath>>,
}

impl XmlDocument {
    /// Parses UTF-8 XML with the default ID registry.
    pub fn parse(input: &[u8]) -> Result<Self, XmlError> {
        Self::parse_with(input, IdRegistry::default())
    }

    pub fn parse_with(input: &[u8], registry: IdRegistry) -> Result<Self, XmlError> {
        let root = parse::parse_root(input)?;
        Ok(Self::index(root, registry))
    }

    /// Builds a document from an edited tree. Missing namespace
    /// declarations are added where an element or attribute prefix is not
    /// bound to its namespace in scope.
    pub fn from_root(root: Element) -> Result<Self, XmlError> {
        Self::from_root_with(root, IdRegistry::default())
    }

    pub fn from_root_with(mut root: Element, registry: IdRegistry) -> Result<Self, XmlError> {
        reconcile_namespaces(&mut root, &mut Vec::new())?;
        Ok(Self::index(root, registry))
    }

    fn index(root: Element, registry: IdRegistry) -> Self {
        let mut ids: BTreeMap<String, Vec<NodePath>> = BTreeMap::new();
        for (path, element) in walk(&root) {
            for attr in &element.attributes {
                if registry.is_id(&attr.name) {
                    ids.entry(attr.value.clone())
                        .or_default()
                        .push(path.clone());
                }
            }
        }
        Self {
            root,
            registry,
            ids,
        }
    }

    pub fn root(&self) -> &Element {
        &self.root
    }

    pub fn into_root(self) -> Element {
        self.root
    }

    pub fn registry(&self) -> &IdRegistry {
        &self.registry
    }

    pub fn root_path(&self) -> NodePath {
        NodePath::root(self.root.name.clone())
    }

    /// The unique element carrying `id` in a registered ID attribute.
    pub fn resolve_id(&self, id: &str) -> Result<NodePath, AmbiguityError> {
        match self.ids.get(id).map(Vec::as_slice) {
            Some([only]) => Ok(only.clone()),
            other => Err(AmbiguityError {
                id: id.to_owned(),
                matches: other.map_or(0, <[_]>::len),
            }),
        }
    }

    /// First element in document order carrying `id`. Ignores duplicates,
    /// which is exactly what an ID-referencing verifier should not do.
    pub fn first_id_match(&self, id: &str) -> Option<NodePath> {
        self.ids.get(id).and_then(|v| v.first().cloned())
    }

    /// ID values carried by more than one element.
    pub fn duplicate_ids(&self) -> Vec<(&str, usize)> {
        self.ids
            .iter()
            .filter(|(_, v)| v.len() > 1)
            .map(|(k, v)| (k.as_str(), v.len()))
            .collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = (&str, &[NodePath])> {
        self.ids.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn get(&self, path: &NodePath) -> Option<&Element> {
        path.resolve_in(&self.root)
    }

    /// All elements in document order.
    pub fn elements(&self) -> Vec<(NodePath, &Element)> {
        walk(&self.root)
    }

    /// All elements named `name`, in document order.
    pub fn find_all(&self, name: &QName) -> Vec<(NodePath, &Element)> {
        walk(&self.root)
            .into_iter()
            .filter(|(_, e)| &e.name == name)
            .collect()
    }

    pub fn serialize(&self) -> Vec<u8> {
        write::serialize(&self.root).into_bytes()
    }

    pub fn to_xml_string(&self) -> String {
        write::serialize(&self.root)
    }

    /// Indented rendering for humans. Changes whitespace, so it must never
    /// be applied to signed content.
    pub fn to_pretty_string(&self) -> String {
        write::pretty(&self.root)
    }

    /// Exclusive XML Canonicalization 1.0 (without comments) of the
    /// subtree at `subtree`.
    pub fn canonicalize(
        &self,
        subtree: &NodePath,
        inclusive_prefixes: &[&str],
    ) -> Result<Vec<u8>, XmlError> {
        c14n::canonicalize(&self.root, subtree, inclusive_prefixes)
    }

    /// Namespace bindings in scope at `path` (including the element's own
    /// declarations). Key `None` is the default namespace.
    pub fn in_scope_namespaces(&self, path: &NodePath) -> Option<BTreeMap<Option<String>, String>> {
        let mut scope = BTreeMap::new();
        let mut cur = &self.root;
        for decl in &cur.namespace_decls {
            scope.insert(decl.prefix.clone(), decl.uri.clone());
        }
        if cur.name != path.steps().first()?.name {
            return None;
        }
        for step in &path.steps()[1..] {
            cur = cur.child_elements().nth(step.index)?;
            if cur.name != step.name {
                return None;
            }
            for decl in &cur.namespace_decls {
                scope.insert(decl.prefix.clone(), decl.uri.clone());
            }
        }
        Some(scope)
    }
}

/// Pre-order walk returning every element with its path.
pub(crate) fn walk(root: &Element) -> Vec<(NodePath, &Element)> {
    fn go<'a>(e: &'a Element, path: NodePath, out: &mut Vec<(NodePath, &'a Element)>) {
        out.push((path.clone(), e));
        for (i, child) in e.child_elements().enumerate() {
            go(child, path.child(i, child.name.clone()), out);
        }
    }
    let mut out = Vec::new();
    go(root, NodePath::root(root.name.clone()), &mut out);
    out
}

type Scope = Vec<(Option<String>, String)>;

fn lookup<'a>(scope: &'a Scope, prefix: Option<&str>) -> Option<&'a str> {
    scope
        .iter()
        .rev()
        .find(|(p, _)| p.as_deref() == prefix)
        .map(|(_, u)| u.as_str())
}

fn declares<'a>(e: &'a Element, prefix: Option<&str>) -> Option<&'a str> {
    e.namespace_decls
        .iter()
        .find(|d| d.prefix.as_deref() == prefix)
        .map(|d| d.uri.as_str())
}

fn reconcile_namespaces(e: &mut Element, scope: &mut Scope) -> Result<(), XmlError> {
    let mark = scope.len();
    for d in &e.namespace_decls {
        scope.push((d.prefix.clone(), d.uri.clone()));
    }

    // The element name decides its own prefix binding.
    let prefix = e.prefix.clone();
    let uri = e.name.namespace_uri().to_owned();
    let bound = lookup(scope, prefix.as_deref()).unwrap_or("");
    if bound != uri {
        if prefix.is_some() && uri.is_empty() {
            return Err(XmlError::Namespace(alloc::format!(
                "element {} has a prefix but no namespace",
                e.qualified_name()
            )));
        }
        if declares(e, prefix.as_deref()).is_some() {
            return Err(XmlError::Namespace(alloc::format!(
                "element {} declares its own prefix with a different namespace",
                e.qualified_name()
            )));
        }
        e.namespace_decls
            .push(NamespaceDecl::new(prefix.as_deref(), &uri));
        scope.push((prefix, uri));
    }

    let mut extra = Vec::new();
    for a in &e.attributes {
        if a.name.namespace_uri().is_empty() {
            if a.prefix.is_some() {
                return Err(XmlError::Namespace(alloc::format!(
                    "attribute {} has a prefix but no namespace",
                    a.name
                )));
            }
            continue;
        }
        let Some(p) = a.prefix.as_deref() else {
            return Err(XmlError::Namespace(alloc::format!(
                "namespaced attribute {} has no prefix",
                a.name
            )));
        };
        if p == "xml" {
            continue;
        }
        if lookup(scope, Some(p)) != Some(a.name.namespace_uri()) {
            if declares(e, Some(p)).is_some() {
                return Err(XmlError::Namespace(alloc::format!(
                    "attribute prefix {p} conflicts with a local declaration"
                )));
            }
            extra.push(NamespaceDecl::new(Some(p), a.name.namespace_uri()));
            scope.push((Some(p.to_owned()), a.name.namespace_uri().to_owned()));
        }
    }
    e.namespace_decls.extend(extra);

    for child in e.child_elements_mut() {
        reconcile_namespaces(child, scope)?;
    }
    scope.truncate(mark);
    Ok(())
}
