//! Forged documents against both verifiers, over random login requests.

mod common;

use common::{cert, signed_request, style, trusted_policy, MockVerifier, Style};
use proptest::prelude::*;
use wrapguard_core::forge::{
    forge, forge_all, rebind_prefixes, signed_subtrees, AttackKind, AttackVariant, ForgeError,
};
use wrapguard_core::ns;
use wrapguard_core::structure::{
    apply_instructions, validate_structure, InstructionCheck, ValidationInstruction,
};
use wrapguard_core::xml::{NodePath, XmlDocument};
use wrapguard_core::xmldsig::{
    audit, naive_body, naive_identity_token, verify_hardened, verify_naive, DigestAlgorithm,
    SignatureBlock, Stage,
};

const FRESH: &str = "FreshChallengeFreshChallenge0123";

fn attacks(benign: &XmlDocument) -> Vec<(AttackVariant, XmlDocument)> {
    forge_all(benign, FRESH, cert("mallory").der())
        .unwrap()
        .into_iter()
        .map(|(v, d)| (v, XmlDocument::parse(&d.serialize()).unwrap()))
        .collect()
}

fn is_probe(v: &AttackVariant) -> bool {
    matches!(v.kind, AttackKind::PrefixRedefinition { .. })
}

fn expected_stage(v: &AttackVariant) -> Stage {
    match v.kind {
        AttackKind::SimpleAncestryChallenge | AttackKind::SimpleAncestryCertificate => {
            Stage::ReferenceCheck
        }
        AttackKind::SiblingValueChallenge => Stage::Structure,
        AttackKind::SiblingValueCertificate { .. } => Stage::Instructions,
        _ => unreachable!("not in the PHR set"),
    }
}

fn signature(doc: &XmlDocument) -> (NodePath, SignatureBlock) {
    let (path, e) = doc.find_all(&ns::signature()).into_iter().next().unwrap();
    let block = SignatureBlock::parse(e, &path).unwrap();
    (path, block)
}

fn canonical(doc: &XmlDocument, path: &NodePath) -> Vec<u8> {
    doc.canonicalize(path, &[]).unwrap()
}

fn fresh_prefixes(doc: &XmlDocument) -> XmlDocument {
    let mut n = 0;
    let preserve = signed_subtrees(doc);
    rebind_prefixes(doc, &preserve, |_| {
        n += 1;
        Some(format!("fresh{n}"))
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn naive_accepts_all_hardened_only_benign(s in style()) {
        let benign = signed_request(&s, "patient");
        let policy = trusted_policy();
        prop_assert!(verify_naive(&benign, &policy.trust_anchors, &MockVerifier).is_accepted());
        prop_assert!(verify_hardened(&benign, &policy, &MockVerifier).is_accepted());
        let mut attack_count = 0;
        for (v, doc) in attacks(&benign) {
            let hardened = verify_hardened(&doc, &policy, &MockVerifier);
            if is_probe(&v) {
                prop_assert!(hardened.is_accepted(), "prefix redefinition changed the verdict");
                continue;
            }
            attack_count += 1;
            prop_assert!(verify_naive(&doc, &policy.trust_anchors, &MockVerifier).is_accepted(), "{}", v);
            let f = hardened.failure.unwrap();
            prop_assert_eq!(f.stage, expected_stage(&v), "{}: {}", v, f);
        }
        prop_assert_eq!(attack_count, 4);
    }

    #[test]
    fn signed_octets_survive_forging(s in style()) {
        let benign = signed_request(&s, "patient");
        let (sig_path, block) = signature(&benign);
        let body_id = format!("#{}", s.body_id);
        prop_assert_eq!(block.references[0].uri.as_deref(), Some(body_id.as_str()));
        let signed_body = canonical(&benign, &benign.first_id_match(&s.body_id).unwrap());
        let signed_info = canonical(&benign, &sig_path);
        for (v, doc) in attacks(&benign) {
            let (p, _) = signature(&doc);
            prop_assert_eq!(&canonical(&doc, &p), &signed_info, "{}", v);
            let target = doc.first_id_match(&s.body_id).unwrap();
            let relocated = canonical(&doc, &target);
            prop_assert_eq!(&relocated, &signed_body, "{}", v);
            prop_assert_eq!(DigestAlgorithm::Sha256.digest(&relocated), block.references[0].digest_value.clone());
        }
    }

    #[test]
    fn naive_digests_one_node_and_reads_another(s in style()) {
        let benign = signed_request(&s, "patient");
        prop_assert_eq!(benign.first_id_match(&s.body_id), naive_body(&benign));
        prop_assert_eq!(benign.first_id_match(&s.token_id), naive_identity_token(&benign));
        for (v, doc) in attacks(&benign) {
            let (digested, read) = match v.kind {
                AttackKind::SimpleAncestryChallenge | AttackKind::SiblingValueChallenge => {
                    (doc.first_id_match(&s.body_id), naive_body(&doc))
                }
                AttackKind::SimpleAncestryCertificate | AttackKind::SiblingValueCertificate { .. } => {
                    (doc.first_id_match(&s.token_id), naive_identity_token(&doc))
                }
                _ => continue,
            };
            prop_assert!(digested.is_some() && read.is_some());
            prop_assert_ne!(digested, read, "{}", v);
        }
    }

    #[test]
    fn forging_twice_is_refused(s in style()) {
        let benign = signed_request(&s, "patient");
        for (v, doc) in attacks(&benign) {
            prop_assert!(matches!(forge(&doc, &v), Err(ForgeError::AlreadyAttacked(_))), "{}", v);
        }
    }

    #[test]
    fn first_failure_is_the_earliest_failing_stage(s in style(), cut in 0usize..4) {
        let benign = signed_request(&s, "patient");
        let policy = trusted_policy();
        let mut docs: Vec<XmlDocument> = attacks(&benign).into_iter().map(|(_, d)| d).collect();
        docs.push(benign.clone());
        // Additional failures: an unknown signer and a truncated document.
        docs.push(signed_request(&s, "stranger"));
        let mut root = benign.root().clone();
        root.children.truncate(cut.min(root.children.len()));
        docs.push(XmlDocument::from_root(root).unwrap());
        for doc in docs {
            let report = verify_hardened(&doc, &policy, &MockVerifier);
            let audited = audit(&doc, &policy, &MockVerifier);
            prop_assert_eq!(audited.first_failure(), report.failure.as_ref().map(|f| f.stage));
            prop_assert_eq!(audited.passed(), report.is_accepted());
            if let Some(f) = &report.failure {
                let earlier = Stage::ALL.iter().take_while(|s| **s != f.stage);
                for st in earlier {
                    prop_assert!(audited.stage(*st).unwrap().findings.is_empty());
                }
            }
        }
    }

    #[test]
    fn accepted_reports_are_sound(s in style()) {
        let benign = signed_request(&s, "patient");
        let report = verify_hardened(&benign, &trusted_policy(), &MockVerifier);
        prop_assert!(report.is_accepted());
        let patient = cert("patient");
        prop_assert_eq!(report.signer_certificate.as_ref().unwrap().der(), patient.der());
        prop_assert_eq!(&report.signer_certificate, &report.key_certificate);
        let (_, block) = signature(&benign);
        prop_assert_eq!(report.verified_locations.len(), block.references.len());
        for (loc, r) in report.verified_locations.iter().zip(&block.references) {
            let octets = canonical(&benign, &loc.path);
            prop_assert_eq!(DigestAlgorithm::Sha256.digest(&octets), r.digest_value.clone());
        }
    }

    #[test]
    fn prefix_renaming_changes_no_verdict(s in style()) {
        let benign = signed_request(&s, "patient");
        let policy = trusted_policy();
        let mut docs = vec![benign.clone()];
        docs.extend(attacks(&benign).into_iter().map(|(_, d)| d));
        for doc in docs {
            let renamed = XmlDocument::parse(&fresh_prefixes(&doc).serialize()).unwrap();
            for (a, b) in [
                (verify_hardened(&doc, &policy, &MockVerifier), verify_hardened(&renamed, &policy, &MockVerifier)),
                (verify_naive(&doc, &policy.trust_anchors, &MockVerifier), verify_naive(&renamed, &policy.trust_anchors, &MockVerifier)),
            ] {
                prop_assert_eq!(a.verdict, b.verdict);
                prop_assert_eq!(a.failure.map(|f| (f.stage, f.kind)), b.failure.map(|f| (f.stage, f.kind)));
            }
        }
    }

    #[test]
    fn benign_requests_violate_nothing(s in style()) {
        let benign = signed_request(&s, "patient");
        let policy = trusted_policy();
        prop_assert!(validate_structure(&benign, &policy.rules).is_empty());
        prop_assert!(apply_instructions(&benign, &policy.instructions).is_empty());
    }

    #[test]
    fn only_simple_ancestry_attacks_pass_the_profile(s in style()) {
        let benign = signed_request(&s, "patient");
        let policy = trusted_policy();
        for (v, doc) in attacks(&benign) {
            let violations = validate_structure(&doc, &policy.rules).len()
                + apply_instructions(&doc, &policy.instructions).len();
            match v.kind {
                AttackKind::SimpleAncestryChallenge
                | AttackKind::SimpleAncestryCertificate
                | AttackKind::PrefixRedefinition { .. } => prop_assert_eq!(violations, 0, "{}", v),
                _ => prop_assert!(violations > 0, "{}", v),
            }
        }
    }

    #[test]
    fn adding_instructions_keeps_violations(s in style()) {
        let benign = signed_request(&s, "patient");
        let mut catalog = trusted_policy().instructions;
        catalog.push(ValidationInstruction::new(
            "no-wrapper",
            "",
            InstructionCheck::Forbid { name: wrapguard_core::xml::QName::local("Wrapper"), scope: ns::header() },
        ));
        for (_, doc) in attacks(&benign) {
            for k in 0..catalog.len() {
                let fewer = apply_instructions(&doc, &catalog[..k]);
                let more = apply_instructions(&doc, &catalog[..=k]);
                prop_assert!(fewer.iter().all(|v| more.contains(v)));
            }
        }
    }
}

#[test]
fn style_strategy_yields_distinct_prefixes() {
    use proptest::strategy::ValueTree;
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..20 {
        let s: Style = style().new_tree(&mut runner).unwrap().current();
        let mut v = vec![&s.soap, &s.wst, &s.ds, &s.wsse, &s.wsu];
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 5);
    }
}
