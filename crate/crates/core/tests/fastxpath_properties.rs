//! FastXPath evaluation against an exhaustive oracle: an element is
//! selected iff its full ancestor chain matches the steps one to one.

mod common;

use proptest::prelude::*;
use wrapguard_core::fastxpath::{generate_for, FastXPathExpr, FastXPathStep, GenerateError};
use wrapguard_core::forge::rebind_prefixes;
use wrapguard_core::xml::{Element, NodePath, QName, XmlDocument};

/// Every element with the chain of elements from the root down to it.
fn chains(doc: &XmlDocument) -> Vec<(NodePath, Vec<&Element>)> {
    fn walk<'a>(
        e: &'a Element,
        path: NodePath,
        chain: &mut Vec<&'a Element>,
        out: &mut Vec<(NodePath, Vec<&'a Element>)>,
    ) {
        chain.push(e);
        out.push((path.clone(), chain.clone()));
        for (i, c) in e.child_elements().enumerate() {
            walk(c, path.child(i, c.name.clone()), chain, out);
        }
        chain.pop();
    }
    let mut out = Vec::new();
    walk(
        doc.root(),
        NodePath::root(doc.root().name.clone()),
        &mut Vec::new(),
        &mut out,
    );
    out
}

fn step_matches(step: &FastXPathStep, e: &Element) -> bool {
    e.name.local_name() == step.local_name()
        && e.name.namespace_uri() == step.namespace_uri()
        && step
            .predicates()
            .iter()
            .all(|p| e.attribute(&p.name) == Some(p.value.as_str()))
}

fn oracle(expr: &FastXPathExpr, doc: &XmlDocument) -> Vec<NodePath> {
    chains(doc)
        .into_iter()
        .filter(|(_, chain)| {
            chain.len() == expr.steps().len()
                && chain
                    .iter()
                    .zip(expr.steps())
                    .all(|(e, s)| step_matches(s, e))
        })
        .map(|(p, _)| p)
        .collect()
}

/// An expression derived from `seed`: the chain of some element, with one
/// step possibly renamed and an attribute predicate possibly added.
fn expression(doc: &XmlDocument, seed: (u16, u8, u8, u8)) -> FastXPathExpr {
    let all = chains(doc);
    let (_, chain) = &all[seed.0 as usize % all.len()];
    let locals = ["a", "b", "item", "zz"];
    let uris = ["urn:ex:a", "urn:ex:b", ""];
    let mut steps: Vec<FastXPathStep> = chain
        .iter()
        .map(|e| FastXPathStep::new(e.name.clone()))
        .collect();
    let at = seed.1 as usize % steps.len();
    match seed.2 % 4 {
        0 => {
            let n = steps[at].name().clone();
            steps[at] =
                FastXPathStep::new(QName::new(n.namespace_uri(), locals[seed.3 as usize % 4]));
        }
        1 => {
            let n = steps[at].name().clone();
            steps[at] = FastXPathStep::new(QName::new(uris[seed.3 as usize % 3], n.local_name()));
        }
        2 => {
            let v = ["x", "y", "z"][seed.3 as usize % 3];
            steps[at] = steps[at]
                .clone()
                .with_attribute(QName::local("k"), v)
                .unwrap();
        }
        _ => {}
    }
    FastXPathExpr::from_steps(steps).unwrap()
}

fn fresh_prefixes(doc: &XmlDocument) -> XmlDocument {
    let mut n = 0;
    rebind_prefixes(doc, &[], |_| {
        n += 1;
        Some(format!("fresh{n}"))
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn evaluate_agrees_with_oracle(
        doc in common::small_document(),
        seeds in prop::collection::vec(any::<(u16, u8, u8, u8)>(), 5..8),
    ) {
        let reparsed = XmlDocument::parse(&doc.serialize()).unwrap();
        for seed in seeds {
            let expr = expression(&doc, seed);
            let expected = oracle(&expr, &doc);
            prop_assert_eq!(&expr.evaluate(&doc), &expected, "{}", expr);
            prop_assert_eq!(&expr.evaluate(&reparsed), &expected);
            let text = expr.to_string();
            let back = FastXPathExpr::parse(&text).unwrap();
            prop_assert_eq!(&back, &expr);
            prop_assert_eq!(back.evaluate(&doc), expected);
        }
    }

    #[test]
    fn generate_for_inverts_evaluate(doc in common::small_document()) {
        let all = chains(&doc);
        for (path, chain) in &all {
            match generate_for(&doc, path, None) {
                Ok(expr) => {
                    prop_assert_eq!(expr.evaluate(&doc), vec![path.clone()]);
                    prop_assert_eq!(FastXPathExpr::parse(&expr.to_string()).unwrap(), expr);
                }
                Err(GenerateError::AmbiguityUnresolvable { .. }) => {
                    let names: Vec<&QName> = chain.iter().map(|e| &e.name).collect();
                    let twins = all.iter().filter(|(_, c)| {
                        c.iter().map(|e| &e.name).collect::<Vec<_>>() == names
                    }).count();
                    prop_assert!(twins > 1, "ambiguity claimed for a unique chain at {}", path);
                }
                Err(e) => prop_assert!(false, "unexpected {:?}", e),
            }
        }
    }

    #[test]
    fn prefix_renaming_changes_no_selection(
        doc in common::small_document(),
        seeds in prop::collection::vec(any::<(u16, u8, u8, u8)>(), 5..8),
    ) {
        let renamed = XmlDocument::parse(&fresh_prefixes(&doc).serialize()).unwrap();
        for seed in seeds {
            let expr = expression(&doc, seed);
            prop_assert_eq!(expr.evaluate(&renamed), expr.evaluate(&doc));
        }
    }

    #[test]
    fn evaluation_is_deterministic(doc in common::small_document(), seed in any::<(u16, u8, u8, u8)>()) {
        let expr = expression(&doc, seed);
        prop_assert_eq!(expr.evaluate(&doc), expr.evaluate(&doc.clone()));
    }
}
