//! Exclusive XML Canonicalization 1.0, without comments.
//!
//! A namespace declaration is rendered on an element when its prefix is
//! visibly utilized there (element prefix, attribute prefixes, default
//! namespace for unprefixed elements) or listed in the InclusiveNamespaces
//! prefix list, and the nearest rendering ancestor did not already render
//! the same binding.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Element, NodePath, XmlError, XmlNode};
use crate::ns;

/// Prefix key for maps: `""` stands for the default namespace.
type Bindings = BTreeMap<String, String>;

pub(super) fn canonicalize(
    root: &Element,
    subtree: &NodePath,
    inclusive_prefixes: &[&str],
) -> Result<Vec<u8>, XmlError> {
    let (first, rest) = subtree
        .steps()
        .split_first()
        .ok_or_else(|| XmlError::PathNotFound(subtree.to_string()))?;
    if first.name != root.name {
        return Err(XmlError::PathNotFound(subtree.to_string()));
    }
    let mut inherited = Bindings::new();
    let mut cur = root;
    for step in rest {
        add_decls(cur, &mut inherited);
        cur = cur
            .child_elements()
            .nth(step.index)
            .filter(|e| e.name == step.name)
            .ok_or_else(|| XmlError::PathNotFound(subtree.to_string()))?;
    }
    let inclusive: Vec<String> = inclusive_prefixes
        .iter()
        .map(|p| {
            if *p == "#default" {
                String::new()
            } else {
                p.to_string()
            }
        })
        .collect();
    let mut out = String::new();
    render(cur, &inherited, &Bindings::new(), &inclusive, &mut out)?;
    Ok(out.into_bytes())
}

fn add_decls(e: &Element, scope: &mut Bindings) {
    for d in &e.namespace_decls {
        scope.insert(d.prefix.clone().unwrap_or_default(), d.uri.clone());
    }
}

fn render(
    e: &Element,
    inherited: &Bindings,
    rendered: &Bindings,
    inclusive: &[String],
    out: &mut String,
) -> Result<(), XmlError> {
    let mut scope = inherited.clone();
    add_decls(e, &mut scope);

    let element_key = e.prefix.clone().unwrap_or_default();
    let mut utilized: Vec<String> = alloc::vec![element_key.clone()];
    for a in &e.attributes {
        if let Some(p) = &a.prefix {
            if p != "xml" && !utilized.contains(p) {
                utilized.push(p.clone());
            }
        }
    }

    let element_uri = scope.get(&element_key).map(String::as_str).unwrap_or("");
    if element_uri != e.name.namespace_uri() {
        return Err(XmlError::Canonicalization(format!(
            "prefix of {} is not bound to {}",
            e.qualified_name(),
            e.name.namespace_uri()
        )));
    }

    let mut emit = Bindings::new();
    let candidates = utilized
        .iter()
        .map(|k| (k, true))
        .chain(inclusive.iter().map(|k| (k, false)));
    for (key, visibly) in candidates {
        let uri = match scope.get(key) {
            Some(u) => u.as_str(),
            None if key.is_empty() => "",
            None if visibly => {
                return Err(XmlError::Canonicalization(format!(
                    "prefix {key} is not declared"
                )))
            }
            None => continue,
        };
        let previous = rendered.get(key).map(String::as_str);
        let needed = if key.is_empty() {
            uri != previous.unwrap_or("")
        } else {
            previous != Some(uri)
        };
        if needed {
            emit.insert(key.clone(), uri.to_string());
        }
    }

    let qname = e.qualified_name();
    out.push('<');
    out.push_str(&qname);
    for (prefix, uri) in &emit {
        if prefix.is_empty() {
            out.push_str(" xmlns=\"");
        } else {
            out.push_str(" xmlns:");
            out.push_str(prefix);
            out.push_str("=\"");
        }
        escape_attr(uri, out);
        out.push('"');
    }
    let mut attrs: Vec<_> = e.attributes.iter().collect();
    attrs.sort_by(|a, b| a.name.cmp(&b.name));
    for a in attrs {
        out.push(' ');
        if let Some(p) = &a.prefix {
            out.push_str(p);
            out.push(':');
        } else if a.name.namespace_uri() == ns::XML {
            out.push_str("xml:");
        }
        out.push_str(a.name.local_name());
        out.push_str("=\"");
        escape_attr(&a.value, out);
        out.push('"');
    }
    out.push('>');

    let child_rendered = if emit.is_empty() {
        None
    } else {
        let mut r = rendered.clone();
        r.extend(emit);
        Some(r)
    };
    let child_rendered = child_rendered.as_ref().unwrap_or(rendered);
    for child in &e.children {
        match child {
            XmlNode::Element(c) => render(c, &scope, child_rendered, inclusive, out)?,
            XmlNode::Text(t) => escape_text(t, out),
            XmlNode::Comment(_) => {}
        }
    }
    out.push_str("</");
    out.push_str(&qname);
    out.push('>');
    Ok(())
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#xD;"),
            _ => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#x9;"),
            '\n' => out.push_str("&#xA;"),
            '\r' => out.push_str("&#xD;"),
            _ => out.push(c),
        }
    }
}
