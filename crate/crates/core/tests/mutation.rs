use std::collections::BTreeSet;

use ampforge_core::config::AmplificationConfig;
use ampforge_core::mutation::{generate_mutants, run_matrix, MutantStatus, Operator};
use ampforge_core::runner::{run_test, RunOptions};
use ampforge_core::test_model::{parse_test_method, test_methods, TestMethodModel};
use ampforge_lang::Image;

const BANK: &str = include_str!("../fixtures/smallbank.st");
const ALL: &[&str] = &[
    BANK,
    include_str!("../fixtures/ticket.st"),
    include_str!("../fixtures/turnstile.st"),
    include_str!("../fixtures/stack.st"),
    include_str!("../fixtures/thermometer.st"),
    include_str!("../fixtures/greeter.st"),
];

fn load(src: &str) -> Image {
    let mut image = Image::new();
    image.load(src).unwrap();
    image
}

fn with_all_test(cfg: &AmplificationConfig) -> TestMethodModel {
    parse_test_method(
        "testWithdrawAll [ | b success | b := SmallBank new. b deposit: 30. success := b withdraw: 30. self assert: success. self assert: b balance equals: 0 ]",
        "testWithdrawAll",
        &cfg.assertion_forms,
    )
    .unwrap()
}

/// Mutants the original `testWithdraw` cannot see: it never checks what
/// `withdraw:` answers, and 100 > 30 holds as well as 100 >= 30.
const LIVE_UNDER_ORIGINAL: &[&str] = &[
    "relational in withdraw:: `>=` -> `>`",
    "boolean_flip in withdraw:: `true` -> `false`",
    "return_removal in withdraw:: `^ true` -> `true`",
    "return_self in withdraw:: `^ true` -> `^ self`",
    "boolean_flip in withdraw:: `false` -> `true`",
    "return_removal in withdraw:: `^ false` -> `false`",
    "return_self in withdraw:: `^ false` -> `^ self`",
];

#[test]
fn relational_operator_has_two_replacements() {
    let image = load(BANK);
    let ms = generate_mutants(&image, "SmallBank").unwrap();
    let ge: Vec<&str> = ms
        .iter()
        .filter(|m| m.operator == Operator::Relational && m.original == ">=")
        .map(|m| m.replacement.as_str())
        .collect();
    assert_eq!(ge, [">", "<"]);
    assert!(ms.len() <= 30);
    let empty = load("Object subclass: Empty [ | a | ]");
    assert!(generate_mutants(&empty, "Empty").unwrap().is_empty());
}

#[test]
fn ids_are_stable_and_edits_revert_exactly() {
    for src in ALL {
        let image = load(src);
        for class in image.user_classes().map(|c| c.name.clone()).collect::<Vec<_>>() {
            let a = generate_mutants(&image, &class).unwrap();
            let b = generate_mutants(&load(src), &class).unwrap();
            assert_eq!(a, b);
            let ids: BTreeSet<&str> = a.iter().map(|m| m.id.as_str()).collect();
            assert_eq!(ids.len(), a.len());
            let source = image.class(&class).unwrap().source.clone().unwrap();
            for m in &a {
                let mutated = m.apply(&source);
                assert_ne!(mutated, *source);
                assert_eq!(m.revert(&mutated), *source);
            }
        }
    }
}

#[test]
fn original_suite_matches_hand_traced_matrix() {
    let cfg = AmplificationConfig::default();
    let image = load(BANK);
    let ms = generate_mutants(&image, "SmallBank").unwrap();
    assert_eq!(ms.len(), 18);
    let tests = test_methods(&image, "SmallBankTest", &cfg.assertion_forms);
    let matrix = run_matrix(&image, "SmallBankTest", &tests, &ms, &cfg).unwrap();
    let live: Vec<String> =
        ms.iter().filter(|m| matrix.status[&m.id] == MutantStatus::Live).map(|m| m.describe()).collect();
    assert_eq!(live, LIVE_UNDER_ORIGINAL);
    let t = matrix.totals();
    assert_eq!((t.all, t.killed, t.live, t.uncovered, t.invalid), (18, 11, 7, 0, 0));
    for (id, kills) in &matrix.kills {
        assert_eq!(!kills.is_empty(), matrix.status[id] == MutantStatus::Killed);
    }
    for test in &tests {
        assert!(run_test(&image, "SmallBankTest", &test.to_method(), RunOptions::new(&cfg), None).verdict.passed());
    }
}

#[test]
fn boundary_input_kills_the_relational_mutant_and_kills_only_grow() {
    let cfg = AmplificationConfig::default();
    let image = load(BANK);
    let ms = generate_mutants(&image, "SmallBank").unwrap();
    let mut tests = test_methods(&image, "SmallBankTest", &cfg.assertion_forms);
    let before = run_matrix(&image, "SmallBankTest", &tests, &ms, &cfg).unwrap();
    tests.push(with_all_test(&cfg));
    let after = run_matrix(&image, "SmallBankTest", &tests, &ms, &cfg).unwrap();
    let gt = ms.iter().find(|m| m.original == ">=" && m.replacement == ">").unwrap();
    assert_eq!(before.status[&gt.id], MutantStatus::Live);
    assert_eq!(after.kills[&gt.id], BTreeSet::from(["testWithdrawAll".to_string()]));
    for (id, kills) in &before.kills {
        assert!(kills.is_subset(&after.kills[id]));
    }
    assert_eq!(after, run_matrix(&image, "SmallBankTest", &tests, &ms, &cfg).unwrap());
}

#[test]
fn no_tests_means_nothing_is_covered() {
    let cfg = AmplificationConfig::default();
    let image = load(BANK);
    let ms = generate_mutants(&image, "SmallBank").unwrap();
    let matrix = run_matrix(&image, "SmallBankTest", &[], &ms, &cfg).unwrap();
    assert!(matrix.killed().is_empty());
    assert_eq!(matrix.totals().uncovered, ms.len());
}

#[test]
fn looping_mutant_is_killed_by_the_budget() {
    let cfg = AmplificationConfig::default();
    let image = load(
        r#"
Object subclass: Countdown [
    run: n [ | i | i := n. [ i > 0 ] whileTrue: [ i := i - 1 ]. ^ i ]
]
TestCase subclass: CountdownTest [ testRun [ self assert: (Countdown new run: 3) equals: 0 ] ]"#,
    );
    let ms = generate_mutants(&image, "Countdown").unwrap();
    let tests = test_methods(&image, "CountdownTest", &cfg.assertion_forms);
    let matrix = run_matrix(&image, "CountdownTest", &tests, &ms, &cfg).unwrap();
    let plus = ms.iter().find(|m| m.original == "-" && m.replacement == "+").unwrap();
    assert_eq!(matrix.status[&plus.id], MutantStatus::Killed);
}
