//! Prefix-free FastXPath: absolute child-axis paths whose steps match on
//! `local-name()` and `namespace-uri()` instead of namespace prefixes.
//!
//! Each step has the shape
//!
//! ```text
//! /*[local-name()="N" and namespace-uri()="U" and @a="v" and ...]
//! ```
//!
//! where the optional attribute predicates are either `@local="v"` for an
//! attribute in no namespace, or
//! `@*[local-name()="L" and namespace-uri()="U"]="v"` for a namespaced one.
//! Anything else (prefixed names, `//`, `..`, other functions, positions)
//! is a [`SubsetViolation`]. Both quote styles parse; emitted text always
//! uses double quotes unless the value contains one.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::xml::{Element, NodePath, QName, XmlDocument};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not prefix-free FastXPath at offset {offset}: {message}")]
pub struct SubsetViolation {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("target {0} does not resolve to an element")]
    TargetNotFound(String),
    #[error("sibling ambiguity at {path} cannot be resolved: {reason}")]
    AmbiguityUnresolvable { path: String, reason: String },
    #[error("value {0:?} contains both quote characters")]
    UnrepresentableLiteral(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttrPredicate {
    pub name: QName,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FastXPathStep {
    name: QName,
    predicates: Vec<AttrPredicate>,
}

impl FastXPathStep {
    pub fn new(name: QName) -> Self {
        Self {
            name,
            predicates: Vec::new(),
        }
    }

    pub fn with_attribute(mut self, name: QName, value: &str) -> Result<Self, GenerateError> {
        if value.contains('"') && value.contains('\'') {
            return Err(GenerateError::UnrepresentableLiteral(value.to_owned()));
        }
        self.predicates.push(AttrPredicate {
            name,
            value: value.to_owned(),
        });
        Ok(self)
    }

    pub fn name(&self) -> &QName {
        &self.name
    }

    pub fn local_name(&self) -> &str {
        self.name.local_name()
    }

    pub fn namespace_uri(&self) -> &str {
        self.name.namespace_uri()
    }

    pub fn predicates(&self) -> &[AttrPredicate] {
        &self.predicates
    }

    pub fn matches(&self, e: &Element) -> bool {
        e.name == self.name
            && self
                .predicates
                .iter()
                .all(|p| e.attribute(&p.name) == Some(p.value.as_str()))
    }
}

/// A parsed expression. Equality is structural; `source_text` is kept only
/// for diagnostics.
#[derive(Debug, Clone)]
pub struct FastXPathExpr {
    steps: Vec<FastXPathStep>,
    source_text: String,
}

impl PartialEq for FastXPathExpr {
    fn eq(&self, other: &Self) -> bool {
        self.steps == other.steps
    }
}

impl Eq for FastXPathExpr {}

impl FastXPathExpr {
    pub fn from_steps(steps: Vec<FastXPathStep>) -> Option<Self> {
        if steps.is_empty() {
            return None;
        }
        let mut expr = Self {
            steps,
            source_text: String::new(),
        };
        expr.source_text = format!("{expr}");
        Some(expr)
    }

    pub fn steps(&self) -> &[FastXPathStep] {
        &self.steps
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn parse(text: &str) -> Result<Self, SubsetViolation> {
        parse_fastxpath(text)
    }

    /// Every matching element, in document order.
    pub fn evaluate(&self, doc: &XmlDocument) -> Vec<NodePath> {
        evaluate(self, doc)
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if s.contains('"') {
        write!(f, "'{s}'")
    } else {
        write!(f, "\"{s}\"")
    }
}

fn write_name_test(f: &mut fmt::Formatter<'_>, name: &QName) -> fmt::Result {
    f.write_str("local-name()=")?;
    write_literal(f, name.local_name())?;
    f.write_str(" and namespace-uri()=")?;
    write_literal(f, name.namespace_uri())
}

impl fmt::Display for FastXPathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            f.write_str("/*[")?;
            write_name_test(f, &step.name)?;
            for p in &step.predicates {
                f.write_str(" and @")?;
                if p.name.namespace_uri().is_empty() {
                    f.write_str(p.name.local_name())?;
                } else {
                    f.write_str("*[")?;
                    write_name_test(f, &p.name)?;
                    f.write_str("]")?;
                }
                f.write_str("=")?;
                write_literal(f, &p.value)?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t', '\n', '\r']);
        self.pos = self.text.len() - trimmed.len();
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, SubsetViolation> {
        Err(SubsetViolation {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, token: &str) -> Result<(), SubsetViolation> {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            let found: String = self.rest().chars().take(12).collect();
            self.fail(format!("expected {token:?}, found {found:?}"))
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn literal(&mut self) -> Result<&'a str, SubsetViolation> {
        self.skip_ws();
        let quote = match self.rest().chars().next() {
            Some(q @ ('"' | '\'')) => q,
            _ => return self.fail("expected a quoted string literal"),
        };
        let body = &self.rest()[1..];
        let end = match body.find(quote) {
            Some(e) => e,
            None => return self.fail("unterminated string literal"),
        };
        self.pos += end + 2;
        Ok(&body[..end])
    }

    fn keyword_and(&mut self) -> bool {
        self.skip_ws();
        let rest = self.rest();
        if rest.starts_with("and")
            && rest[3..]
                .chars()
                .next()
                .is_some_and(|c| c.is_whitespace() || c == '@')
        {
            self.pos += 3;
            true
        } else {
            false
        }
    }

    /// `local-name()="L" and namespace-uri()="U"`
    fn name_test(&mut self) -> Result<QName, SubsetViolation> {
        self.expect("local-name")?;
        self.expect("(")?;
        self.expect(")")?;
        self.expect("=")?;
        let at = self.pos;
        let local = self.literal()?;
        if !self.keyword_and() {
            return self.fail("expected 'and namespace-uri()=...' after local-name()");
        }
        self.expect("namespace-uri")?;
        self.expect("(")?;
        self.expect(")")?;
        self.expect("=")?;
        let uri = self.literal()?;
        QName::try_new(uri, local).ok_or(SubsetViolation {
            offset: at,
            message: format!("{local:?} is not a valid local name"),
        })
    }
}

pub fn parse_fastxpath(text: &str) -> Result<FastXPathExpr, SubsetViolation> {
    let mut c = Cursor { text, pos: 0 };
    let mut steps = Vec::new();
    loop {
        c.skip_ws();
        if c.rest().is_empty() {
            break;
        }
        if c.rest().starts_with("//") {
            return c.fail("descendant axis '//' is outside the subset");
        }
        if !c.eat("/") {
            return c.fail(if steps.is_empty() {
                "expression must be absolute"
            } else {
                "expected '/' between steps"
            });
        }
        c.skip_ws();
        if c.rest().starts_with("..") || c.rest().starts_with('.') {
            return c.fail("relative steps are outside the subset");
        }
        if !c.rest().starts_with('*') {
            let name: String = c
                .rest()
                .chars()
                .take_while(|ch| !matches!(ch, '/' | '[' | ' '))
                .collect();
            return c.fail(if name.contains(':') {
                format!("prefixed name test {name:?}; use local-name() and namespace-uri()")
            } else {
                format!("name test {name:?}; only '*' with predicates is allowed")
            });
        }
        c.pos += 1;
        if !c.eat("[") {
            return c.fail("wildcard step requires local-name() and namespace-uri() predicates");
        }
        let name = c.name_test()?;
        let mut step = FastXPathStep::new(name);
        while c.keyword_and() {
            c.expect("@")?;
            let attr_name = if c.eat("*") {
                c.expect("[")?;
                let n = c.name_test()?;
                c.expect("]")?;
                n
            } else {
                c.skip_ws();
                let local: String = c
                    .rest()
                    .chars()
                    .take_while(|ch| !matches!(ch, '=' | ' ' | '\t' | '\n' | '\r' | ']'))
                    .collect();
                if local.contains(':') {
                    return c.fail(format!("prefixed attribute {local:?}"));
                }
                let n = match QName::try_new("", &local) {
                    Some(n) => n,
                    None => return c.fail(format!("invalid attribute name {local:?}")),
                };
                c.pos += local.len();
                n
            };
            c.expect("=")?;
            let value = c.literal()?;
            step.predicates.push(AttrPredicate {
                name: attr_name,
                value: value.to_owned(),
            });
        }
        c.expect("]")?;
        c.skip_ws();
        if c.rest().starts_with('[') {
            return c.fail("additional predicates are outside the subset");
        }
        steps.push(step);
    }
    if steps.is_empty() {
        return c.fail("empty expression");
    }
    Ok(FastXPathExpr {
        steps,
        source_text: text.to_owned(),
    })
}

pub fn evaluate(expr: &FastXPathExpr, doc: &XmlDocument) -> Vec<NodePath> {
    let root = doc.root();
    let Some((first, rest)) = expr.steps.split_first() else {
        return Vec::new();
    };
    if !first.matches(root) {
        return Vec::new();
    }
    let mut frontier: Vec<(NodePath, &Element)> = alloc::vec![(doc.root_path(), root)];
    for step in rest {
        let mut next = Vec::new();
        for (path, e) in &frontier {
            for (i, child) in e.child_elements().enumerate() {
                if step.matches(child) {
                    next.push((path.child(i, child.name.clone()), child));
                }
            }
        }
        frontier = next;
    }
    frontier.into_iter().map(|(p, _)| p).collect()
}

/// Builds an expression selecting exactly `target`. Where same-named
/// siblings exist, the step is disambiguated by `disambiguator` or, when
/// absent, by the element's registered ID attribute. A step that cannot be
/// disambiguated stays bare; generation fails only if the result still
/// selects more than the target.
pub fn generate_for(
    doc: &XmlDocument,
    target: &NodePath,
    disambiguator: Option<&QName>,
) -> Result<FastXPathExpr, GenerateError> {
    if doc.get(target).is_none() {
        return Err(GenerateError::TargetNotFound(format!("{target}")));
    }
    let mut steps = Vec::new();
    let mut unresolved = None;
    let mut parent: Option<&Element> = None;
    let mut cur = doc.root();
    for (depth, ps) in target.steps().iter().enumerate() {
        if let Some(p) = parent {
            cur = p
                .child_elements()
                .nth(ps.index)
                .expect("target resolved above");
        }
        let mut step = FastXPathStep::new(cur.name.clone());
        let siblings: Vec<&Element> = match parent {
            Some(p) => p
                .child_elements()
                .enumerate()
                .filter(|(i, e)| *i != ps.index && e.name == cur.name)
                .map(|(_, e)| e)
                .collect(),
            None => Vec::new(),
        };
        if !siblings.is_empty() {
            match distinguishing_attribute(doc, cur, &siblings, disambiguator) {
                Ok((attr, value)) => step = step.with_attribute(attr, &value)?,
                Err(reason) => {
                    if unresolved.is_none() {
                        let partial = NodePath::from_steps(target.steps()[..=depth].to_vec())
                            .expect("non-empty");
                        unresolved = Some((format!("{partial}"), reason));
                    }
                }
            }
        }
        steps.push(step);
        parent = Some(cur);
    }
    let expr = FastXPathExpr::from_steps(steps).expect("target has at least one step");
    if evaluate(&expr, doc) == alloc::vec![target.clone()] {
        return Ok(expr);
    }
    let (path, reason) = unresolved.expect("every step disambiguated implies a unique match");
    Err(GenerateError::AmbiguityUnresolvable { path, reason })
}

fn distinguishing_attribute(
    doc: &XmlDocument,
    cur: &Element,
    siblings: &[&Element],
    disambiguator: Option<&QName>,
) -> Result<(QName, String), String> {
    let attr = match disambiguator {
        Some(a) => a.clone(),
        None => doc
            .registry()
            .id_of(cur)
            .map(|(n, _)| n.clone())
            .ok_or_else(|| String::from("element has same-named siblings and no ID attribute"))?,
    };
    let value = cur
        .attribute(&attr)
        .ok_or_else(|| format!("element lacks disambiguating attribute {attr}"))?;
    if siblings.iter().any(|s| s.attribute(&attr) == Some(value)) {
        return Err(format!("a sibling carries the same {attr} value"));
    }
    Ok((attr, value.into()))
}
