mod common;

use std::collections::BTreeSet;

use common::*;
use groundplan::plan::{Function, PlanError};
use groundplan::{candidate_plans, execute, fixtures, parse_plan, Constraints, GoldDecomposition, Plan};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn syntax_errors_report_position() {
    match parse_plan("(JOIN knows java").unwrap_err() {
        PlanError::Syntax { position, .. } => assert_eq!(position, 17, "1-based, one past the end"),
        other => panic!("{other}"),
    }
    assert!(parse_plan("(FOO a)").is_err());
    assert!(parse_plan("(COUNT a b)").is_err());
}

#[test]
fn gold_decomposition_by_length() {
    let g = parse_plan("(COUNT (AND Emulator (JOIN emulates java)))").unwrap();
    let d = GoldDecomposition::derive(&g).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.step(1)[0].render(), "(JOIN emulates java)");
    assert_eq!(d.step(3)[0], g);
}

#[test]
fn spec_enumeration_examples() {
    let kb = fixtures::mini();
    let java = vec![Plan::symbol("java")];
    let out: Vec<String> = candidate_plans(&kb, &java, &Constraints::default()).unwrap().iter().map(Plan::render).collect();
    assert_eq!(out, ["(AND Language java)", "(JOIN emulates java)", "(JOIN knows java)"]);
}

fn random_beam(seed: u64) -> (RawKb, groundplan::KnowledgeBase, Vec<Plan>) {
    let mut rng = seeded(seed);
    let raw = random_kb(&mut rng, 20, 5);
    let kb = raw.build();
    let mut beam = Vec::new();
    for _ in 0..12 {
        let depth = rng.random_range(0..=2);
        if let Some(p) = random_typed_plan(&raw, &kb, &mut rng, depth) {
            if execute(&kb, &p).is_ok_and(|d| !d.is_empty()) && !beam.contains(&p) {
                beam.push(p);
            }
        }
        if beam.len() == 4 {
            break;
        }
    }
    (raw, kb, beam)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn render_parse_round_trip(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let raw = random_kb(&mut rng, 10, 4);
        for _ in 0..10 {
            let p = random_plan(&raw, &mut rng, 4);
            let text = p.render();
            let back = parse_plan(&text).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(back.render(), text);
        }
    }

    #[test]
    fn and_is_order_free(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let raw = random_kb(&mut rng, 10, 4);
        let (a, b) = (random_entity_plan(&raw, &mut rng, 2), random_entity_plan(&raw, &mut rng, 2));
        prop_assert_eq!(Plan::and(a.clone(), b.clone()), Plan::and(b, a));
    }

    #[test]
    fn enumeration_is_deterministic_and_order_free(seed in any::<u64>()) {
        let (_, kb, mut beam) = random_beam(seed);
        prop_assume!(!beam.is_empty());
        let first = candidate_plans(&kb, &beam, &Constraints::default()).unwrap();
        prop_assert_eq!(&candidate_plans(&kb, &beam, &Constraints::default()).unwrap(), &first);
        beam.shuffle(&mut seeded(seed ^ 1));
        prop_assert_eq!(&candidate_plans(&kb, &beam, &Constraints::default()).unwrap(), &first);
        let renders: Vec<String> = first.iter().map(Plan::render).collect();
        let mut sorted = renders.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(renders, sorted);
    }

    #[test]
    fn length_step(seed in any::<u64>()) {
        let (_, kb, beam) = random_beam(seed);
        prop_assume!(!beam.is_empty());
        let lengths: BTreeSet<usize> = beam.iter().map(Plan::length).collect();
        let pair_lengths: BTreeSet<usize> = beam
            .iter()
            .flat_map(|a| beam.iter().map(move |b| a.length() + b.length() + 1))
            .collect();
        for c in candidate_plans(&kb, &beam, &Constraints::default()).unwrap() {
            let l = c.length();
            prop_assert!(lengths.contains(&(l - 1)) || pair_lengths.contains(&l), "{}", c);
        }
    }

    #[test]
    fn constraints_are_respected(seed in any::<u64>(), max in 1usize..5) {
        let (raw, kb, beam) = random_beam(seed);
        prop_assume!(!beam.is_empty());
        let denied = raw.relations[0].0.clone();
        let c = Constraints::default().deny_relation(denied.clone()).deny_function(Function::Count);
        let beam_relations: BTreeSet<&str> = beam.iter().flat_map(|p| p.relation_names()).collect();
        let out = candidate_plans(&kb, &beam, &c).unwrap();
        for p in &out {
            prop_assert!(p.function() != Some(Function::Count));
            if !beam_relations.contains(denied.as_str()) {
                prop_assert!(!p.relation_names().contains(&denied.as_str()), "{}", p);
            }
        }
        let capped = candidate_plans(&kb, &beam, &Constraints { max_candidates: Some(max), ..c }).unwrap();
        prop_assert_eq!(capped.as_slice(), &out[..out.len().min(max)]);
    }
}
