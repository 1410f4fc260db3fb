//! Strict parser on top of the `xmlparser` tokenizer.
//!
//! DTDs, entity declarations and processing instructions are rejected
//! outright. Only UTF-8 input is accepted.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use xmlparser::{ElementEnd, Token, Tokenizer};

use super::{Attribute, Element, NamespaceDecl, QName, XmlError, XmlNode};
use crate::ns;

struct Open<'a> {
    prefix: &'a str,
    local: &'a str,
    element: Element,
    scope_mark: usize,
}

struct PendingStart<'a> {
    prefix: &'a str,
    local: &'a str,
    offset: usize,
    attrs: Vec<(&'a str, &'a str, &'a str, usize)>,
}

struct Parser<'a> {
    input: &'a str,
    scope: Vec<(Option<String>, String)>,
    stack: Vec<Open<'a>>,
    root: Option<Element>,
}

pub(super) fn parse_root(input: &[u8]) -> Result<Element, XmlError> {
    let input = input.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(input);
    let text = core::str::from_utf8(input).map_err(|e| XmlError::WellFormedness {
        message: format!("input is not valid UTF-8 ({e})"),
        line: 0,
        column: 0,
    })?;
    // Line-end normalization happens before tokenizing.
    let normalized;
    let text = if text.contains('\r') {
        normalized = text.replace("\r\n", "\n").replace('\r', "\n");
        normalized.as_str()
    } else {
        text
    };
    Parser {
        input: text,
        scope: Vec::new(),
        stack: Vec::new(),
        root: None,
    }
    .run()
}

impl<'a> Parser<'a> {
    fn error(&self, offset: usize, message: impl Into<String>) -> XmlError {
        let before = &self.input[..offset.min(self.input.len())];
        let line = before.matches('\n').count() as u32 + 1;
        let column = (before.len() - before.rfind('\n').map_or(0, |i| i + 1)) as u32 + 1;
        XmlError::WellFormedness {
            message: message.into(),
            line,
            column,
        }
    }

    fn run(mut self) -> Result<Element, XmlError> {
        let mut pending: Option<PendingStart<'a>> = None;
        for token in Tokenizer::from(self.input) {
            let token = token.map_err(|e| {
                let pos = e.pos();
                XmlError::WellFormedness {
                    message: format!("{e}"),
                    line: pos.row,
                    column: pos.col,
                }
            })?;
            match token {
                Token::Declaration { encoding, .. } => {
                    if let Some(enc) = encoding {
                        if !enc.as_str().eq_ignore_ascii_case("utf-8") {
                            return Err(XmlError::UnsupportedConstruct("non UTF-8 encoding"));
                        }
                    }
                }
                Token::ProcessingInstruction { .. } => {
                    return Err(XmlError::UnsupportedConstruct("processing instruction"))
                }
                Token::DtdStart { .. }
                | Token::EmptyDtd { .. }
                | Token::EntityDeclaration { .. }
                | Token::DtdEnd { .. } => {
                    return Err(XmlError::UnsupportedConstruct("document type declaration"))
                }
                Token::Comment { text, span } => {
                    check_chars(text.as_str()).map_err(|m| self.error(span.start(), m))?;
                    if let Some(top) = self.stack.last_mut() {
                        top.element
                            .children
                            .push(XmlNode::Comment(text.as_str().to_owned()));
                    }
                }
                Token::ElementStart {
                    prefix,
                    local,
                    span,
                } => {
                    if self.root.is_some() && self.stack.is_empty() {
                        return Err(self.error(span.start(), "content after the document element"));
                    }
                    pending = Some(PendingStart {
                        prefix: prefix.as_str(),
                        local: local.as_str(),
                        offset: span.start(),
                        attrs: Vec::new(),
                    });
                }
                Token::Attribute {
                    prefix,
                    local,
                    value,
                    span,
                } => {
                    let start = pending
                        .as_mut()
                        .ok_or_else(|| self.error(span.start(), "attribute outside a start tag"))?;
                    start.attrs.push((
                        prefix.as_str(),
                        local.as_str(),
                        value.as_str(),
                        span.start(),
                    ));
                }
                Token::ElementEnd { end, span } => match end {
                    ElementEnd::Open => {
                        let start = pending
                            .take()
                            .ok_or_else(|| self.error(span.start(), "stray '>'"))?;
                        self.open(start)?;
                    }
                    ElementEnd::Empty => {
                        let start = pending
                            .take()
                            .ok_or_else(|| self.error(span.start(), "stray '/>'"))?;
                        self.open(start)?;
                        self.close(None, span.start())?;
                    }
                    ElementEnd::Close(prefix, local) => {
                        self.close(Some((prefix.as_str(), local.as_str())), span.start())?;
                    }
                },
                Token::Text { text } => {
                    let raw = text.as_str();
                    if self.stack.is_empty() {
                        if !raw.chars().all(|c| matches!(c, ' ' | '\t' | '\n')) {
                            return Err(
                                self.error(text.start(), "text outside the document element")
                            );
                        }
                        continue;
                    }
                    let decoded = unescape(raw).map_err(|m| self.error(text.start(), m))?;
                    check_chars(&decoded).map_err(|m| self.error(text.start(), m))?;
                    self.push_text(decoded);
                }
                Token::Cdata { text, span } => {
                    if self.stack.is_empty() {
                        return Err(self.error(span.start(), "CDATA outside the document element"));
                    }
                    check_chars(text.as_str()).map_err(|m| self.error(span.start(), m))?;
                    self.push_text(text.as_str().to_owned());
                }
            }
        }
        if let Some(open) = self.stack.last() {
            return Err(self.error(
                self.input.len(),
                format!("unclosed element {}", display_name(open.prefix, open.local)),
            ));
        }
        self.root.ok_or_else(|| XmlError::WellFormedness {
            message: "no document element".into(),
            line: 1,
            column: 1,
        })
    }

    fn push_text(&mut self, text: String) {
        let top = &mut self.stack.last_mut().expect("inside an element").element;
        if let Some(XmlNode::Text(prev)) = top.children.last_mut() {
            prev.push_str(&text);
        } else if !text.is_empty() {
            top.children.push(XmlNode::Text(text));
        }
    }

    fn lookup(&self, prefix: Option<&str>) -> Option<&str> {
        if prefix == Some("xml") {
            return Some(ns::XML);
        }
        self.scope
            .iter()
            .rev()
            .find(|(p, _)| p.as_deref() == prefix)
            .map(|(_, u)| u.as_str())
    }

    fn open(&mut self, start: PendingStart<'a>) -> Result<(), XmlError> {
        let scope_mark = self.scope.len();
        let mut decls = Vec::new();
        let mut plain = Vec::new();
        for (prefix, local, value, offset) in start.attrs {
            let value = normalize_attr(value).map_err(|m| self.error(offset, m))?;
            if prefix == "xmlns" {
                if local == "xmlns" {
                    return Err(self.error(offset, "the xmlns prefix must not be declared"));
                }
                if value.is_empty() {
                    return Err(
                        self.error(offset, format!("prefix {local} bound to empty namespace"))
                    );
                }
                if local == "xml" {
                    if value != ns::XML {
                        return Err(self.error(offset, "xml prefix bound to a foreign namespace"));
                    }
                    continue;
                }
                decls.push(NamespaceDecl {
                    prefix: Some(local.to_owned()),
                    uri: value,
                });
            } else if prefix.is_empty() && local == "xmlns" {
                decls.push(NamespaceDecl {
                    prefix: None,
                    uri: value,
                });
            } else {
                plain.push((prefix, local, value, offset));
            }
        }
        for (i, d) in decls.iter().enumerate() {
            if decls[..i].iter().any(|o| o.prefix == d.prefix) {
                return Err(self.error(start.offset, "duplicate namespace declaration"));
            }
        }
        for d in &decls {
            self.scope.push((d.prefix.clone(), d.uri.clone()));
        }

        let prefix = (!start.prefix.is_empty()).then_some(start.prefix);
        if prefix == Some("xmlns") {
            return Err(self.error(start.offset, "element uses the xmlns prefix"));
        }
        let uri = match self.lookup(prefix) {
            Some(u) => u.to_owned(),
            None if prefix.is_none() => String::new(),
            None => {
                return Err(self.error(start.offset, format!("undeclared prefix {}", start.prefix)))
            }
        };
        let name = QName::try_new(&uri, start.local)
            .ok_or_else(|| self.error(start.offset, "invalid element name"))?;
        let mut element = Element::new(name, prefix);
        element.namespace_decls = decls;

        for (aprefix, alocal, value, offset) in plain {
            let (ns_uri, p) = if aprefix.is_empty() {
                (String::new(), None)
            } else {
                let u = self
                    .lookup(Some(aprefix))
                    .ok_or_else(|| self.error(offset, format!("undeclared prefix {aprefix}")))?;
                (u.to_owned(), Some(aprefix))
            };
            let name = QName::try_new(&ns_uri, alocal)
                .ok_or_else(|| self.error(offset, "invalid attribute name"))?;
            if element.attributes.iter().any(|a| a.name == name) {
                return Err(self.error(offset, format!("duplicate attribute {name}")));
            }
            element.attributes.push(Attribute::new(name, p, value));
        }

        self.stack.push(Open {
            prefix: start.prefix,
            local: start.local,
            element,
            scope_mark,
        });
        Ok(())
    }

    fn close(&mut self, end: Option<(&str, &str)>, offset: usize) -> Result<(), XmlError> {
        let open = self
            .stack
            .pop()
            .ok_or_else(|| self.error(offset, "closing tag without an open element"))?;
        if let Some((prefix, local)) = end {
            if prefix != open.prefix || local != open.local {
                return Err(self.error(
                    offset,
                    format!(
                        "expected </{}>, found </{}>",
                        display_name(open.prefix, open.local),
                        display_name(prefix, local)
                    ),
                ));
            }
        }
        self.scope.truncate(open.scope_mark);
        match self.stack.last_mut() {
            Some(parent) => parent.element.children.push(XmlNode::Element(open.element)),
            None => self.root = Some(open.element),
        }
        Ok(())
    }
}

fn display_name(prefix: &str, local: &str) -> String {
    if prefix.is_empty() {
        local.to_owned()
    } else {
        format!("{prefix}:{local}")
    }
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

fn check_chars(s: &str) -> Result<(), String> {
    match s.chars().find(|c| !is_xml_char(*c)) {
        Some(c) => Err(format!("illegal character U+{:04X}", c as u32)),
        None => Ok(()),
    }
}

/// Attribute-value normalization: literal whitespace becomes a space,
/// references are then expanded.
fn normalize_attr(raw: &str) -> Result<String, String> {
    check_chars(raw)?;
    if raw.contains('<') {
        return Err("'<' in attribute value".into());
    }
    let spaced: String = raw
        .chars()
        .map(|c| {
            if matches!(c, '\t' | '\n' | '\r') {
                ' '
            } else {
                c
            }
        })
        .collect();
    unescape(&spaced)
}

pub(crate) fn unescape(raw: &str) -> Result<String, String> {
    if !raw.contains('&') {
        return Ok(raw.to_owned());
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let semi = after
            .find(';')
            .ok_or_else(|| String::from("unterminated reference"))?;
        let name = &after[..semi];
        match name {
            "lt" => out.push('<'),
            "gt" => out.push('>'),
            "amp" => out.push('&'),
            "apos" => out.push('\''),
            "quot" => out.push('"'),
            _ => {
                let code = if let Some(hex) = name.strip_prefix("#x") {
                    u32::from_str_radix(hex, 16).ok()
                } else if let Some(dec) = name.strip_prefix('#') {
                    dec.parse::<u32>().ok()
                } else {
                    return Err(format!("undefined entity &{name};"));
                };
                let c = code
                    .and_then(char::from_u32)
                    .filter(|c| is_xml_char(*c))
                    .ok_or_else(|| format!("invalid character reference &{name};"))?;
                out.push(c);
            }
        }
        rest = &after[semi + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
