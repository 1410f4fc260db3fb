//! Structural allowlist/cardinality rules and declarative message
//! validation instructions.
//!
//! A [`Profile`] bundles a [`StructureRuleSet`] with a list of
//! [`ValidationInstruction`]s and has a line-oriented text form:
//!
//! ```text
//! # comment
//! profile soap12-hardened-phr
//! root <uri>|<local>
//! rule <uri>|<local> : <uri>|<local> <min>..<max|*> [open]
//! rule <uri>|<local> open|closed
//! instr <id> max-count <uri>|<local> scope=<uri>|<local> n=<int> [-- description]
//! instr <id> exactly-one <uri>|<local> scope=<uri>|<local> [-- description]
//! instr <id> forbid <uri>|<local> scope=<uri>|<local> [-- description]
//! ```
//!
//! Each `rule ... : child` line adds one allowed child to the rule for the
//! parent; the children's line order is the required sequence. A rule is
//! open (unlisted children tolerated) if any of its lines says `open`.
//! `rule <ctx> open|closed` declares a rule without listed children.
//! Unknown directives are errors.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::ns;
use crate::xml::{Element, NodePath, QName, XmlDocument};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("profile line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: NodePath,
    pub rule_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildSpec {
    pub name: QName,
    pub min_occurs: u32,
    /// `None` is unbounded.
    pub max_occurs: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureRule {
    pub context: QName,
    pub allowed_children: Vec<ChildSpec>,
    pub open: bool,
}

impl StructureRule {
    pub fn new(context: QName, open: bool) -> Self {
        Self {
            context,
            allowed_children: Vec::new(),
            open,
        }
    }

    /// Panics if `min > max`.
    pub fn child(mut self, name: QName, min: u32, max: Option<u32>) -> Self {
        assert!(max.is_none_or(|m| min <= m), "min_occurs > max_occurs");
        self.allowed_children.push(ChildSpec {
            name,
            min_occurs: min,
            max_occurs: max,
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureRuleSet {
    pub name: String,
    /// Required document element, if any.
    pub root: Option<QName>,
    rules: BTreeMap<QName, StructureRule>,
}

impl StructureRuleSet {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            root: None,
            rules: BTreeMap::new(),
        }
    }

    pub fn with_root(mut self, root: QName) -> Self {
        self.root = Some(root);
        self
    }

    /// Panics on a second rule for the same context.
    pub fn with_rule(mut self, rule: StructureRule) -> Self {
        self.insert(rule).expect("one rule per context");
        self
    }

    pub fn insert(&mut self, rule: StructureRule) -> Result<(), StructureRule> {
        if self.rules.contains_key(&rule.context) {
            return Err(rule);
        }
        self.rules.insert(rule.context.clone(), rule);
        Ok(())
    }

    pub fn rule(&self, context: &QName) -> Option<&StructureRule> {
        self.rules.get(context)
    }

    pub fn rules(&self) -> impl Iterator<Item = &StructureRule> {
        self.rules.values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstructionCheck {
    /// At most `n` elements named `name` with an ancestor named `scope`.
    MaxCount {
        name: QName,
        scope: QName,
        n: u32,
    },
    ExactlyOne {
        name: QName,
        scope: QName,
    },
    Forbid {
        name: QName,
        scope: QName,
    },
}

impl InstructionCheck {
    fn keyword(&self) -> &'static str {
        match self {
            Self::MaxCount { .. } => "max-count",
            Self::ExactlyOne { .. } => "exactly-one",
            Self::Forbid { .. } => "forbid",
        }
    }

    fn names(&self) -> (&QName, &QName) {
        match self {
            Self::MaxCount { name, scope, .. }
            | Self::ExactlyOne { name, scope }
            | Self::Forbid { name, scope } => (name, scope),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationInstruction {
    pub id: String,
    pub description: String,
    pub check: InstructionCheck,
}

impl ValidationInstruction {
    pub fn new(id: &str, description: &str, check: InstructionCheck) -> Self {
        Self {
            id: id.to_owned(),
            description: description.to_owned(),
            check,
        }
    }
}

pub fn validate_structure(doc: &XmlDocument, rules: &StructureRuleSet) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(root) = &rules.root {
        if &doc.root().name != root {
            out.push(Violation {
                path: doc.root_path(),
                rule_id: "root".into(),
                reason: format!("document element is {}, expected {root}", doc.root().name),
            });
            return out;
        }
    }
    validate_subtree(doc.root(), &doc.root_path(), rules, &mut out);
    out
}

/// Applies `rules` to `element` (addressed by `path`) and its descendants,
/// without the root check.
pub fn validate_element(
    element: &Element,
    path: &NodePath,
    rules: &StructureRuleSet,
) -> Vec<Violation> {
    let mut out = Vec::new();
    validate_subtree(element, path, rules, &mut out);
    out
}

fn validate_subtree(
    element: &Element,
    path: &NodePath,
    rules: &StructureRuleSet,
    out: &mut Vec<Violation>,
) {
    check_rule(element, path, rules, out);
    for (i, child) in element.child_elements().enumerate() {
        validate_subtree(child, &path.child(i, child.name.clone()), rules, out);
    }
}

fn check_rule(
    element: &Element,
    path: &NodePath,
    rules: &StructureRuleSet,
    out: &mut Vec<Violation>,
) {
    let Some(rule) = rules.rule(&element.name) else {
        return;
    };
    let ctx = rule.context.local_name();
    let mut counts = alloc::vec![0u32; rule.allowed_children.len()];
    let mut last_slot = 0usize;
    for (i, child) in element.child_elements().enumerate() {
        match rule
            .allowed_children
            .iter()
            .position(|c| c.name == child.name)
        {
            Some(slot) => {
                counts[slot] += 1;
                if slot < last_slot {
                    out.push(Violation {
                        path: path.child(i, child.name.clone()),
                        rule_id: format!("{ctx}>{}", child.name.local_name()),
                        reason: format!(
                            "{} must precede {}",
                            child.name, rule.allowed_children[last_slot].name
                        ),
                    });
                }
                last_slot = last_slot.max(slot);
            }
            None if !rule.open => out.push(Violation {
                path: path.child(i, child.name.clone()),
                rule_id: format!("{ctx}:closed"),
                reason: format!("{} is not allowed in {}", child.name, rule.context),
            }),
            None => {}
        }
    }
    for (spec, n) in rule.allowed_children.iter().zip(counts) {
        let rule_id = format!("{ctx}>{}", spec.name.local_name());
        if n < spec.min_occurs {
            out.push(Violation {
                path: path.clone(),
                rule_id,
                reason: format!(
                    "{} occurs {n} times, min_occurs={}",
                    spec.name, spec.min_occurs
                ),
            });
        } else if spec.max_occurs.is_some_and(|m| n > m) {
            out.push(Violation {
                path: path.clone(),
                rule_id,
                reason: format!(
                    "{} occurs {n} times, max_occurs={}",
                    spec.name,
                    spec.max_occurs.unwrap_or_default()
                ),
            });
        }
    }
}

pub fn apply_instructions(
    doc: &XmlDocument,
    instructions: &[ValidationInstruction],
) -> Vec<Violation> {
    let all = doc.elements();
    let mut out = Vec::new();
    for instr in instructions {
        let (name, scope) = instr.check.names();
        let hits: Vec<&NodePath> = all
            .iter()
            .filter(|(p, e)| &e.name == name && has_ancestor(p, scope))
            .map(|(p, _)| p)
            .collect();
        let mut fail = |path: NodePath, reason: String| {
            out.push(Violation {
                path,
                rule_id: instr.id.clone(),
                reason,
            })
        };
        match &instr.check {
            InstructionCheck::MaxCount { n, .. } => {
                if hits.len() > *n as usize {
                    fail(
                        hits[*n as usize].clone(),
                        format!("{} {name} within {scope}, at most {n} allowed", hits.len()),
                    );
                }
            }
            InstructionCheck::ExactlyOne { .. } => match hits.len() {
                1 => {}
                0 => fail(doc.root_path(), format!("no {name} within {scope}")),
                k => fail(
                    hits[1].clone(),
                    format!("{k} {name} within {scope}, exactly one required"),
                ),
            },
            InstructionCheck::Forbid { .. } => {
                for p in hits {
                    fail(p.clone(), format!("{name} is forbidden within {scope}"));
                }
            }
        }
    }
    out
}

fn has_ancestor(path: &NodePath, scope: &QName) -> bool {
    let steps = path.steps();
    steps[..steps.len() - 1].iter().any(|s| &s.name == scope)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub rules: StructureRuleSet,
    pub instructions: Vec<ValidationInstruction>,
}

pub const SOAP12_HARDENED: &str = "soap12-hardened";
pub const SOAP12_HARDENED_PHR: &str = "soap12-hardened-phr";

/// Envelope closed to `Header? Body`, Header left open: the Header hole
/// cannot be closed by cardinality rules and is left to instructions.
pub fn soap12_hardened() -> StructureRuleSet {
    StructureRuleSet::new(SOAP12_HARDENED)
        .with_root(ns::envelope())
        .with_rule(
            StructureRule::new(ns::envelope(), false)
                .child(ns::header(), 0, Some(1))
                .child(ns::body(), 1, Some(1)),
        )
        .with_rule(StructureRule::new(ns::header(), true))
}

/// The three instructions covering the sibling placements of a second
/// security token: a second Security header, a second token in one
/// Security element, and a second Header.
pub fn phr_instructions() -> Vec<ValidationInstruction> {
    alloc::vec![
        ValidationInstruction::new(
            "single-security",
            "at most one wsse:Security element in the SOAP header",
            InstructionCheck::MaxCount {
                name: ns::security(),
                scope: ns::header(),
                n: 1,
            },
        ),
        ValidationInstruction::new(
            "single-token",
            "exactly one BinarySecurityToken inside wsse:Security",
            InstructionCheck::ExactlyOne {
                name: ns::binary_security_token(),
                scope: ns::security(),
            },
        ),
        ValidationInstruction::new(
            "single-header",
            "at most one SOAP header",
            InstructionCheck::MaxCount {
                name: ns::header(),
                scope: ns::envelope(),
                n: 1,
            },
        ),
    ]
}

impl Profile {
    pub fn builtin(name: &str) -> Result<Self, ProfileError> {
        match name {
            SOAP12_HARDENED => Ok(Self {
                rules: soap12_hardened(),
                instructions: Vec::new(),
            }),
            SOAP12_HARDENED_PHR | "phr" => {
                let mut rules = soap12_hardened().with_rule(
                    StructureRule::new(ns::body(), false).child(ns::challenge(), 1, Some(1)),
                );
                rules.name = SOAP12_HARDENED_PHR.into();
                Ok(Self {
                    rules,
                    instructions: phr_instructions(),
                })
            }
            other => Err(ProfileError::UnknownProfile(other.to_owned())),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        parse_profile(text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "profile {}", self.rules.name);
        if let Some(root) = &self.rules.root {
            let _ = writeln!(out, "root {}", qname_text(root));
        }
        for rule in self.rules.rules() {
            let ctx = qname_text(&rule.context);
            if rule.allowed_children.is_empty() {
                let flag = if rule.open { "open" } else { "closed" };
                let _ = writeln!(out, "rule {ctx} {flag}");
            }
            for c in &rule.allowed_children {
                let max = c.max_occurs.map_or("*".into(), |m| format!("{m}"));
                let _ = write!(
                    out,
                    "rule {ctx} : {} {}..{max}",
                    qname_text(&c.name),
                    c.min_occurs
                );
                out.push_str(if rule.open { " open\n" } else { "\n" });
            }
        }
        for i in &self.instructions {
            let (name, scope) = i.check.names();
            let _ = write!(
                out,
                "instr {} {} {} scope={}",
                i.id,
                i.check.keyword(),
                qname_text(name),
                qname_text(scope)
            );
            if let InstructionCheck::MaxCount { n, .. } = i.check {
                let _ = write!(out, " n={n}");
            }
            if !i.description.is_empty() {
                let _ = write!(out, " -- {}", i.description);
            }
            out.push('\n');
        }
        out
    }
}

fn qname_text(q: &QName) -> String {
    format!("{}|{}", q.namespace_uri(), q.local_name())
}

fn parse_qname(text: &str, line: usize) -> Result<QName, ProfileError> {
    let err = || ProfileError::Parse {
        line,
        message: format!("expected <uri>|<local>, found {text:?}"),
    };
    let (uri, local) = text.rsplit_once('|').ok_or_else(err)?;
    QName::try_new(uri, local).ok_or_else(err)
}

/// Parses profile lines. Directives other than those of the profile format
/// are rejected; see [`parse_profile_lines`] for a lenient variant.
pub fn parse_profile(text: &str) -> Result<Profile, ProfileError> {
    parse_profile_lines(text, |_, line, _| {
        Err(ProfileError::Parse {
            line,
            message: "unknown directive".into(),
        })
    })
}

/// Like [`parse_profile`], handing unknown directives to `other` as
/// `(directive, line_number, rest)`.
pub fn parse_profile_lines<F>(text: &str, mut other: F) -> Result<Profile, ProfileError>
where
    F: FnMut(&str, usize, &str) -> Result<(), ProfileError>,
{
    let mut name: Option<String> = None;
    let mut root = None;
    let mut rules: BTreeMap<QName, StructureRule> = BTreeMap::new();
    let mut rule_order: Vec<QName> = Vec::new();
    let mut instructions = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (directive, rest) = trimmed
            .split_once(char::is_whitespace)
            .unwrap_or((trimmed, ""));
        let rest = rest.trim();
        let fail = |message: String| ProfileError::Parse { line, message };
        match directive {
            "profile" => {
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(fail("profile needs a single name".into()));
                }
                if name.replace(rest.to_owned()).is_some() {
                    return Err(fail("duplicate profile directive".into()));
                }
            }
            "root" => {
                if root.replace(parse_qname(rest, line)?).is_some() {
                    return Err(fail("duplicate root directive".into()));
                }
            }
            "rule" => {
                let mut words = rest.split_whitespace();
                let ctx = parse_qname(words.next().unwrap_or(""), line)?;
                let entry = rules.entry(ctx.clone()).or_insert_with(|| {
                    rule_order.push(ctx.clone());
                    StructureRule::new(ctx, false)
                });
                match words.next() {
                    Some("open") | Some("closed") if words.clone().next().is_none() => {
                        entry.open |= rest.ends_with("open");
                    }
                    Some(":") => {
                        let child = parse_qname(words.next().unwrap_or(""), line)?;
                        let range = words
                            .next()
                            .ok_or_else(|| fail("missing <min>..<max>".into()))?;
                        let (min, max) = range
                            .split_once("..")
                            .ok_or_else(|| fail(format!("bad occurrence range {range:?}")))?;
                        let min: u32 = min.parse().map_err(|_| fail(format!("bad min {min:?}")))?;
                        let max = match max {
                            "*" => None,
                            m => Some(
                                m.parse::<u32>()
                                    .map_err(|_| fail(format!("bad max {m:?}")))?,
                            ),
                        };
                        if max.is_some_and(|m| min > m) {
                            return Err(fail("min_occurs exceeds max_occurs".into()));
                        }
                        match words.next() {
                            None => {}
                            Some("open") => entry.open = true,
                            Some(w) => return Err(fail(format!("unexpected {w:?}"))),
                        }
                        if words.next().is_some() {
                            return Err(fail("trailing input".into()));
                        }
                        if entry.allowed_children.iter().any(|c| c.name == child) {
                            return Err(fail(format!("{child} listed twice")));
                        }
                        entry.allowed_children.push(ChildSpec {
                            name: child,
                            min_occurs: min,
                            max_occurs: max,
                        });
                    }
                    _ => {
                        return Err(fail(
                            "expected ':' <child> <min>..<max> or open|closed".into(),
                        ))
                    }
                }
            }
            "instr" => {
                let (body, description) = match rest.split_once(" -- ") {
                    Some((b, d)) => (b, d.trim()),
                    None => (rest, ""),
                };
                let words: Vec<&str> = body.split_whitespace().collect();
                let [id, kind, target, scope, tail @ ..] = words.as_slice() else {
                    return Err(fail(
                        "expected instr <id> <kind> <qname> scope=<qname>".into(),
                    ));
                };
                let name = parse_qname(target, line)?;
                let scope = parse_qname(
                    scope
                        .strip_prefix("scope=")
                        .ok_or_else(|| fail("missing scope=".into()))?,
                    line,
                )?;
                let check = match (*kind, tail) {
                    ("max-count", [n]) => {
                        let n = n
                            .strip_prefix("n=")
                            .and_then(|n| n.parse().ok())
                            .ok_or_else(|| fail(format!("bad count {n:?}")))?;
                        InstructionCheck::MaxCount { name, scope, n }
                    }
                    ("exactly-one", []) => InstructionCheck::ExactlyOne { name, scope },
                    ("forbid", []) => InstructionCheck::Forbid { name, scope },
                    ("max-count", _) => return Err(fail("max-count needs n=<int>".into())),
                    (k @ ("exactly-one" | "forbid"), _) => {
                        return Err(fail(format!("{k} takes no further arguments")))
                    }
                    (k, _) => return Err(fail(format!("unknown instruction kind {k:?}"))),
                };
                if instructions
                    .iter()
                    .any(|i: &ValidationInstruction| i.id == *id)
                {
                    return Err(fail(format!("duplicate instruction id {id:?}")));
                }
                instructions.push(ValidationInstruction::new(id, description, check));
            }
            d => other(d, line, rest)?,
        }
    }
    let mut set = StructureRuleSet::new(&name.unwrap_or_else(|| "custom".into()));
    set.root = root;
    for ctx in rule_order {
        let rule = rules.remove(&ctx).expect("recorded");
        let _ = set.insert(rule);
    }
    Ok(Profile {
        rules: set,
        instructions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xml::XmlDocument;

    fn envelope(header: &str, bodies: &str) -> XmlDocument {
        XmlDocument::parse(
            format!(
                r#"<soap:Envelope xmlns:soap="{}" xmlns:wsse="{}" xmlns:wst="{}">{header}{bodies}</soap:Envelope>"#,
                ns::SOAP12,
                ns::WSSE,
                ns::WST
            )
            .as_bytes(),
        )
        .unwrap()
    }

    const SECURITY: &str =
        "<soap:Header><wsse:Security><wsse:BinarySecurityToken>AA==</wsse:BinarySecurityToken></wsse:Security></soap:Header>";
    const BODY: &str = "<soap:Body><wst:Challenge>abc</wst:Challenge></soap:Body>";

    fn phr() -> Profile {
        Profile::builtin(SOAP12_HARDENED_PHR).unwrap()
    }

    #[test]
    fn benign_layout_conforms() {
        let doc = envelope(SECURITY, BODY);
        let p = phr();
        assert_eq!(validate_structure(&doc, &p.rules), []);
        assert_eq!(apply_instructions(&doc, &p.instructions), []);
    }

    #[test]
    fn second_body_exceeds_max_occurs() {
        let doc = envelope(SECURITY, &format!("{BODY}{BODY}"));
        let v = validate_structure(&doc, &phr().rules);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].reason.contains("max_occurs=1"));
        assert_eq!(v[0].rule_id, "Envelope>Body");
    }

    #[test]
    fn missing_body_violates_min_occurs() {
        let doc = envelope("", "");
        let v = validate_structure(&doc, &soap12_hardened());
        assert_eq!(v.len(), 1);
        assert!(v[0].reason.contains("min_occurs=1"));
    }

    #[test]
    fn header_after_body_is_out_of_order() {
        let doc = envelope("", &format!("{BODY}<soap:Header/>"));
        let v = validate_structure(&doc, &soap12_hardened());
        assert_eq!(v.len(), 1);
        assert!(v[0].reason.contains("precede"));
    }

    #[test]
    fn closed_rule_rejects_unlisted_child() {
        let doc = envelope(
            "",
            "<soap:Body><wst:Challenge>a</wst:Challenge><x/></soap:Body>",
        );
        let v = validate_structure(&doc, &phr().rules);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule_id, "Body:closed");
    }

    #[test]
    fn open_header_tolerates_anything() {
        let doc = envelope(
            "<soap:Header><Wrapper><x/></Wrapper><y/></soap:Header>",
            BODY,
        );
        assert_eq!(validate_structure(&doc, &phr().rules), []);
    }

    #[test]
    fn wrong_root_is_single_violation() {
        let doc = XmlDocument::parse(b"<Envelope/>").unwrap();
        let v = validate_structure(&doc, &soap12_hardened());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule_id, "root");
    }

    #[test]
    fn second_security_header_violates_instruction() {
        let header = "<soap:Header><wsse:Security><wsse:BinarySecurityToken>AA==</wsse:BinarySecurityToken></wsse:Security><wsse:Security><wsse:BinarySecurityToken>BB==</wsse:BinarySecurityToken></wsse:Security></soap:Header>";
        let doc = envelope(header, BODY);
        let ids: Vec<_> = apply_instructions(&doc, &phr().instructions)
            .into_iter()
            .map(|v| v.rule_id)
            .collect();
        assert!(ids.contains(&"single-security".to_owned()), "{ids:?}");
    }

    #[test]
    fn two_tokens_in_one_security_violate_exactly_one() {
        let header = "<soap:Header><wsse:Security><wsse:BinarySecurityToken>AA==</wsse:BinarySecurityToken><wsse:BinarySecurityToken>BB==</wsse:BinarySecurityToken></wsse:Security></soap:Header>";
        let doc = envelope(header, BODY);
        let v = apply_instructions(&doc, &phr().instructions);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule_id, "single-token");
    }

    #[test]
    fn token_outside_security_is_not_counted() {
        let header = "<soap:Header><wsse:Security><wsse:BinarySecurityToken>AA==</wsse:BinarySecurityToken></wsse:Security><Wrapper><wsse:BinarySecurityToken>BB==</wsse:BinarySecurityToken></Wrapper></soap:Header>";
        assert_eq!(
            apply_instructions(&envelope(header, BODY), &phr().instructions),
            []
        );
    }

    #[test]
    fn forbid_reports_each_occurrence() {
        let doc = XmlDocument::parse(b"<r><s><x/><x/></s><x/></r>").unwrap();
        let i = ValidationInstruction::new(
            "no-x",
            "",
            InstructionCheck::Forbid {
                name: QName::local("x"),
                scope: QName::local("s"),
            },
        );
        assert_eq!(apply_instructions(&doc, &[i]).len(), 2);
    }

    #[test]
    fn builtin_phr_has_three_instructions() {
        let p = phr();
        assert_eq!(p.instructions.len(), 3);
        assert_eq!(p.rules.name, SOAP12_HARDENED_PHR);
        assert_eq!(Profile::builtin("phr").unwrap(), p);
        assert_eq!(
            Profile::builtin("nope"),
            Err(ProfileError::UnknownProfile("nope".into()))
        );
    }

    #[test]
    fn text_round_trip() {
        for name in [SOAP12_HARDENED, SOAP12_HARDENED_PHR] {
            let p = Profile::builtin(name).unwrap();
            let text = p.to_text();
            let back = Profile::parse(&text).unwrap();
            assert_eq!(back, p);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn rule_line_order_is_child_sequence() {
        let text =
            "rule urn:a|r : urn:a|x 0..*\nrule urn:a|r : urn:a|y 1..1 open\nrule urn:a|s closed\n";
        let p = Profile::parse(text).unwrap();
        let r = p.rules.rule(&QName::new("urn:a", "r")).unwrap();
        assert!(r.open);
        assert_eq!(r.allowed_children[0].max_occurs, None);
        assert_eq!(r.allowed_children[1].name, QName::new("urn:a", "y"));
        assert!(!p.rules.rule(&QName::new("urn:a", "s")).unwrap().open);
    }

    #[test]
    fn malformed_profiles_are_rejected() {
        for (bad, line) in [
            ("bogus x", 1),
            ("# c\nrule urn:a|r : urn:a|x 2..1", 2),
            ("rule urn:a|r : urn:a|x", 1),
            ("rule urn:a|r : a:b 0..1", 1),
            ("instr i max-count urn:a|x scope=urn:a|y", 1),
            ("instr i exactly-one urn:a|x urn:a|y", 1),
            ("instr i maybe urn:a|x scope=urn:a|y", 1),
            (
                "instr i forbid urn:a|x scope=urn:a|y\ninstr i forbid urn:a|x scope=urn:a|y",
                2,
            ),
            ("profile a b", 1),
        ] {
            match Profile::parse(bad) {
                Err(ProfileError::Parse { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
                other => panic!("{bad:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn adding_an_instruction_never_removes_violations() {
        let header = "<soap:Header><wsse:Security/><wsse:Security/></soap:Header>";
        let doc = envelope(header, BODY);
        let all = phr_instructions();
        for k in 0..=all.len() {
            let fewer = apply_instructions(&doc, &all[..k]);
            let more = apply_instructions(&doc, &all);
            assert!(fewer.iter().all(|v| more.contains(v)));
        }
    }

    #[test]
    fn rule_builder_rejects_inverted_bounds() {
        let r = std::panic::catch_unwind(|| {
            StructureRule::new(QName::local("a"), false).child(QName::local("b"), 2, Some(1))
        });
        assert!(r.is_err());
    }
}
