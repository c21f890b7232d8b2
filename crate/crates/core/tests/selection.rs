use std::collections::BTreeSet;

use ampforge_core::config::AmplificationConfig;
use ampforge_core::mutation::{Mutant, Operator};
use ampforge_core::selection::{focus_method, focused, is_focused, select_against, AmplifiedTest, UndefinedFocus};
use ampforge_core::test_model::{parse_test_method, TestMethodModel, Transformation};
use ampforge_lang::MethodKey;

fn model(name: &str, body: &str, transformations: usize) -> TestMethodModel {
    let cfg = AmplificationConfig::default();
    let mut m = parse_test_method(&format!("{name} [ {body} ]"), name, &cfg.assertion_forms).unwrap();
    m.parent = "testOrig".into();
    m.history = (0..transformations)
        .map(|i| Transformation { amplifier: "literal".into(), detail: format!("step {i}") })
        .collect();
    m
}

fn ids(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn cand(name: &str, body: &str, transformations: usize, kills: &[&str]) -> AmplifiedTest {
    AmplifiedTest::new(model(name, body, transformations), ids(kills), 1)
}

fn mutant(id: &str, selector: &str) -> Mutant {
    Mutant {
        id: id.into(),
        operator: Operator::Relational,
        method: MethodKey::new("Cut", selector, false),
        span: (0, 1),
        original: ">".into(),
        replacement: "<".into(),
    }
}

#[test]
fn shortest_candidate_wins_a_tie() {
    let long = cand("a", "| x | x := 1. x := 2. self assert: x equals: 2", 0, &["m1"]);
    let short = cand("b", "self assert: 2 equals: 2", 3, &["m1"]);
    let kept = select_against(&[long, short], &BTreeSet::new());
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].model.name, "b");
}

#[test]
fn fewer_transformations_break_length_ties() {
    let many = cand("a", "self assert: 1 equals: 1", 4, &["m1", "m2"]);
    let few = cand("z", "self assert: 3 equals: 3", 1, &["m1", "m2"]);
    let kept = select_against(&[many, few], &BTreeSet::new());
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].model.name, "z");
}

#[test]
fn candidates_without_fresh_kills_are_dropped() {
    let old = cand("a", "self assert: 1 equals: 1", 0, &["m1"]);
    let none = cand("b", "self assert: 1 equals: 1", 0, &[]);
    let fresh = cand("c", "self assert: 1 equals: 1", 0, &["m1", "m2"]);
    let kept = select_against(&[old, none, fresh], &ids(&["m1"]));
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].model.name, "c");
    assert_eq!(kept[0].newly_killed, ids(&["m2"]));
}

#[test]
fn subsumed_kill_sets_are_not_kept_twice() {
    let big = cand("a", "self assert: 1 equals: 1", 0, &["m1", "m2"]);
    let small = cand("b", "self assert: 1 equals: 1", 0, &["m2"]);
    let kept = select_against(&[big, small], &BTreeSet::new());
    assert_eq!(kept.iter().map(|t| t.model.name.as_str()).collect::<Vec<_>>(), ["a"]);
}

#[test]
fn focus_examples() {
    let ms = [mutant("a1", "push:"), mutant("a2", "push:"), mutant("b1", "pop"), mutant("c1", "top")];
    // 2 of 4 in one method: exactly half counts as focused
    assert_eq!(focused(&ids(&["a1", "a2", "b1", "c1"]), &ms), Ok(true));
    // 1 of 3 is not
    assert_eq!(focused(&ids(&["a1", "b1", "c1"]), &ms), Ok(false));
    assert_eq!(focused(&ids(&["b1"]), &ms), Ok(true));
    assert_eq!(focused(&BTreeSet::new(), &ms), Err(UndefinedFocus));
    let t = cand("t", "self assert: 1 equals: 1", 0, &["a1", "a2", "b1"]);
    assert_eq!(is_focused(&t, &ms), Ok(true));
    let f = focus_method(&t.newly_killed, &ms).unwrap();
    assert_eq!(f.method, "push:");
    assert!((f.share - 2.0 / 3.0).abs() < 1e-9);
}
