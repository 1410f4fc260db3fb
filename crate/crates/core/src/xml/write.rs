use alloc::string::String;

use super::{Element, XmlNode};

pub(super) fn serialize(root: &Element) -> String {
    let mut out = String::new();
    write_element(root, &mut out);
    out
}

fn write_start(e: &Element, out: &mut String) {
    out.push('<');
    out.push_str(&e.qualified_name());
    for d in &e.namespace_decls {
        match &d.prefix {
            Some(p) => {
                out.push_str(" xmlns:");
                out.push_str(p);
            }
            None => out.push_str(" xmlns"),
        }
        out.push_str("=\"");
        escape_attr(&d.uri, out);
        out.push('"');
    }
    for a in &e.attributes {
        out.push(' ');
        if let Some(p) = &a.prefix {
            out.push_str(p);
            out.push(':');
        }
        out.push_str(a.name.local_name());
        out.push_str("=\"");
        escape_attr(&a.value, out);
        out.push('"');
    }
}

fn write_element(e: &Element, out: &mut String) {
    write_start(e, out);
    if e.children.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    for child in &e.children {
        match child {
            XmlNode::Element(c) => write_element(c, out),
            XmlNode::Text(t) => escape_text(t, out),
            XmlNode::Comment(c) => {
                out.push_str("<!--");
                out.push_str(c);
                out.push_str("-->");
            }
        }
    }
    out.push_str("</");
    out.push_str(&e.qualified_name());
    out.push('>');
}

pub(super) fn escape_text(s: &str, out: &mut String) {
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

pub(super) fn escape_attr(s: &str, out: &mut String) {
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

pub(super) fn pretty(root: &Element) -> String {
    let mut out = String::new();
    pretty_element(root, 0, &mut out);
    out.push('\n');
    out
}

fn pretty_element(e: &Element, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    let structural = e.children.iter().all(|c| match c {
        XmlNode::Text(t) => t.trim().is_empty(),
        _ => true,
    });
    if !structural || e.children.is_empty() {
        write_element(e, out);
        return;
    }
    write_start(e, out);
    out.push('>');
    for child in &e.children {
        match child {
            XmlNode::Element(c) => {
                out.push('\n');
                pretty_element(c, depth + 1, out);
            }
            XmlNode::Comment(c) => {
                out.push('\n');
                for _ in 0..=depth {
                    out.push_str("  ");
                }
                out.push_str("<!--");
                out.push_str(c);
                out.push_str("-->");
            }
            XmlNode::Text(_) => {}
        }
    }
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str("</");
    out.push_str(&e.qualified_name());
    out.push('>');
}
