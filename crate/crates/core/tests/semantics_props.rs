mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use cpcausal::corpus::{self, random_story, random_theory, TheoryShape};
use cpcausal::parser::{format_story, format_theory, parse_story, parse_theory};
use cpcausal::semantics::{distribution, enumerate_branches, marginal, Budget, Schedule};
use cpcausal::transform::{determinize_all, intervene_negative, intervene_positive, remove_laws};
use cpcausal::{CpTheory, Literal, Outcome, Rational};

fn theory(seed: u64) -> Arc<CpTheory> {
    Arc::new(random_theory(&mut corpus::rng(seed), TheoryShape::default()))
}

fn wide_theory(seed: u64) -> Arc<CpTheory> {
    let shape = TheoryShape {
        max_atoms: 6,
        max_laws: 8,
    };
    Arc::new(random_theory(&mut corpus::rng(seed), shape))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distribution_matches_reference(seed in any::<u64>()) {
        let t = wide_theory(seed);
        let lib = distribution(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        let laws = common::raw(&t);
        prop_assert_eq!(common::named(&lib), common::distribution(&laws, false));
    }

    #[test]
    fn distribution_is_normalized(seed in any::<u64>()) {
        let t = wide_theory(seed);
        let d = distribution(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        prop_assert!(d.total().is_one());
        prop_assert!(d.0.values().all(|p| p.is_positive()));
        let branches = enumerate_branches(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        let sum = branches.iter().fold(Rational::zero(), |acc, b| acc + b.probability().clone());
        prop_assert!(sum.is_one());
    }

    #[test]
    fn schedules_agree(seed in any::<u64>(), shuffle in any::<u64>()) {
        let t = wide_theory(seed);
        let base = distribution(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        let reverse = distribution(&t, &Schedule::reverse_ids(&t), Budget::DEFAULT).unwrap();
        let shuffled = Schedule::shuffled(&t, &mut corpus::rng(shuffle));
        let random = distribution(&t, &shuffled, Budget::DEFAULT).unwrap();
        prop_assert_eq!(&base, &reverse);
        prop_assert_eq!(&base, &random);
        prop_assert_eq!(common::named(&base), common::distribution(&common::raw(&t), true));
    }

    #[test]
    fn conjunction_is_monotone(seed in any::<u64>(), a in 0usize..6, b in 0usize..6, sa: bool, sb: bool) {
        let t = wide_theory(seed);
        let atoms = t.atoms();
        let la = Literal { atom: atoms[a % atoms.len()].clone(), positive: sa };
        let lb = Literal { atom: atoms[b % atoms.len()].clone(), positive: sb };
        let single = marginal(&t, std::slice::from_ref(&la), Budget::DEFAULT).unwrap();
        let both = marginal(&t, &[la.clone(), lb], Budget::DEFAULT).unwrap();
        let complement = marginal(&t, &[la.negated()], Budget::DEFAULT).unwrap();
        prop_assert!(both <= single);
        prop_assert!((single + complement).is_one());
    }

    #[test]
    fn theory_text_round_trips(seed in any::<u64>()) {
        let t = wide_theory(seed);
        let text = format_theory(&t);
        let back = parse_theory(&text).unwrap();
        prop_assert_eq!(back.laws(), t.laws());
        prop_assert_eq!(format_theory(&back), text);
    }

    #[test]
    fn story_text_round_trips(seed in any::<u64>()) {
        let t = theory(seed);
        let story = random_story(&mut corpus::rng(seed ^ 1), &t);
        let back = parse_story(&format_story(&story), t.clone()).unwrap();
        prop_assert_eq!(&back, &story);
        prop_assert_eq!(back.probability(), story.probability());
    }

    #[test]
    fn determinized_theory_follows_the_story(seed in any::<u64>()) {
        let t = theory(seed);
        let story = random_story(&mut corpus::rng(seed ^ 2), &t);
        let pinned = determinize_all(&story).unwrap();
        let d = distribution(&pinned, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        prop_assert_eq!(d.0.len(), 1);
        let (world, p) = d.0.iter().next().unwrap();
        prop_assert!(p.is_one());
        prop_assert_eq!(world, &story.leaf_atoms());

        let choices: BTreeMap<u32, Option<String>> = story
            .steps()
            .iter()
            .map(|s| {
                let law = t.law(s.law).unwrap();
                let atom = match s.outcome {
                    Outcome::Disjunct(k) => Some(law.head[k].atom.to_string()),
                    Outcome::Nothing => None,
                };
                (s.law, atom)
            })
            .collect();
        let reference = common::distribution(&common::pin(&common::raw(&t), &choices), false);
        prop_assert_eq!(common::named(&d), reference);
    }

    #[test]
    fn interventions_match_reference(seed in any::<u64>(), pick in 0usize..6) {
        let t = wide_theory(seed);
        let atom = t.atoms()[pick % t.atoms().len()].clone();
        let name = atom.to_string();
        let laws = common::raw(&t);

        let blocked = intervene_negative(&t, &atom).unwrap();
        prop_assert!(marginal(&blocked, &[Literal::pos(atom.clone())], Budget::DEFAULT).unwrap().is_zero());
        let d = distribution(&blocked, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        prop_assert_eq!(common::named(&d), common::distribution(&common::block(&laws, &name), false));

        let forced = intervene_positive(&t, &atom).unwrap();
        prop_assert!(marginal(&forced, &[Literal::pos(atom.clone())], Budget::DEFAULT).unwrap().is_one());
        let d = distribution(&forced, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        prop_assert_eq!(common::named(&d), common::distribution(&common::force(&laws, &name), false));

        let first = t.laws()[0].id;
        let removed = remove_laws(&t, &[first].into_iter().collect()).unwrap();
        let d = distribution(&removed, &Schedule::Canonical, Budget::DEFAULT).unwrap();
        prop_assert_eq!(common::named(&d), common::distribution(&common::without(&laws, &[first]), false));
    }
}

#[test]
fn suzy_distribution_by_hand() {
    let t = parse_theory(
        "Throws(Suzy) <- .\nThrows(Billy) <- .\nBreaks:0.9 <- Throws(Suzy).\nBreaks:0.8 <- Throws(Billy).\n",
    )
    .unwrap();
    let d = distribution(&t, &Schedule::Canonical, Budget::DEFAULT).unwrap();
    assert_eq!(d.0.len(), 2);
    // 1 - (1/10)(1/5)
    assert_eq!(
        d.probability(&[cpcausal::parser::parse_literal("Breaks").unwrap()]),
        Rational::new(49, 50)
    );
    assert_eq!(
        common::marginal(&common::raw(&t), &[("Breaks", true)]),
        Rational::new(49, 50)
    );
}

#[test]
fn negation_waits_for_impossibility() {
    // B may only fire once A can no longer become true
    let t = parse_theory("A:1/2 <- C.\nC:1/2 <- .\nB <- ~A.\n").unwrap();
    let p = marginal(&t, &[cpcausal::parser::parse_literal("B").unwrap()], Budget::DEFAULT).unwrap();
    // B holds unless C and then A: 1 - 1/4
    assert_eq!(p, Rational::new(3, 4));
    let branches = enumerate_branches(&Arc::new(t), &Schedule::Canonical, Budget::DEFAULT).unwrap();
    assert_eq!(branches.len(), 3);
}
