//! Replay safety and identity binding of the hardened service under random
//! interleavings of honest, replayed and forged requests.

mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use wrapguard::crypto::RsaSigningKey;
use wrapguard::harness::{client_sign_challenge, extract_challenge, AuthService, ServerMode};
use wrapguard_core::forge::{forge, AttackVariant, CertPlacement};
use wrapguard_core::xml::XmlDocument;
use wrapguard_core::xmldsig::{SignaturePolicy, SigningKey};

#[derive(Debug, Clone)]
enum Op {
    Issue,
    Honest { who: bool, challenge: usize },
    Replay { request: usize },
    ReplayWithChallenge { request: usize, challenge: usize },
    InjectCertificate { request: usize, second: bool },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Issue),
        (any::<bool>(), any::<usize>()).prop_map(|(who, challenge)| Op::Honest { who, challenge }),
        any::<usize>().prop_map(|request| Op::Replay { request }),
        (any::<usize>(), any::<usize>())
            .prop_map(|(request, challenge)| Op::ReplayWithChallenge { request, challenge }),
        (any::<usize>(), any::<bool>())
            .prop_map(|(request, second)| Op::InjectCertificate { request, second }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_assertion_per_challenge_bound_to_the_signer(ops in prop::collection::vec(op(), 1..24)) {
        let keys: [RsaSigningKey; 2] = [common::key("patient"), common::key("mallory")];
        let service = AuthService::new(
            ServerMode::Hardened,
            SignaturePolicy::phr(),
            common::trusted_policy().trust_anchors,
            common::key("service"),
        );
        let mut challenges = vec![extract_challenge(&service.login_create_challenge()).unwrap()];
        let mut requests: Vec<(XmlDocument, usize)> = Vec::new();
        let mut issued: HashMap<String, usize> = HashMap::new();
        for op in ops {
            let (doc, signer) = match op {
                Op::Issue => {
                    challenges.push(extract_challenge(&service.login_create_challenge()).unwrap());
                    continue;
                }
                Op::Honest { who, challenge } => {
                    let signer = who as usize;
                    let c = &challenges[challenge % challenges.len()];
                    let doc = client_sign_challenge(c, &keys[signer], &SignaturePolicy::phr()).unwrap();
                    requests.push((doc.clone(), signer));
                    (doc, signer)
                }
                Op::Replay { request } if !requests.is_empty() => requests[request % requests.len()].clone(),
                Op::ReplayWithChallenge { request, challenge } if !requests.is_empty() => {
                    let (doc, signer) = &requests[request % requests.len()];
                    let c = &challenges[challenge % challenges.len()];
                    (forge(doc, &AttackVariant::simple_ancestry_challenge(c)).unwrap(), *signer)
                }
                Op::InjectCertificate { request, second } if !requests.is_empty() => {
                    let (doc, signer) = &requests[request % requests.len()];
                    let other = keys[1 - signer].certificate().der();
                    let v = if second {
                        AttackVariant::sibling_value_certificate(other, CertPlacement::SecondSecurity)
                    } else {
                        AttackVariant::simple_ancestry_certificate(other)
                    };
                    (forge(doc, &v).unwrap(), *signer)
                }
                _ => continue,
            };
            if let Ok(a) = service.login_create_token(&doc) {
                let challenge = doc
                    .find_all(&wrapguard_core::ns::challenge())
                    .last()
                    .map(|(_, e)| e.text_content())
                    .unwrap();
                *issued.entry(challenge).or_default() += 1;
                prop_assert_eq!(&a.subject, keys[signer].certificate().subject());
            }
        }
        prop_assert!(issued.values().all(|n| *n == 1), "{:?}", issued);
    }
}
