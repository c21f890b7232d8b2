use ampforge_core::config::AmplificationConfig;
use ampforge_core::profiler::{profile, uncovered_methods, wrap_methods, ProfileError};
use ampforge_core::runner::{run_test, RunOptions};
use ampforge_core::test_model::{parse_test_method, test_methods, TestMethodModel};
use ampforge_lang::{Image, Literal, MethodKey};

const FIXTURES: &[(&str, &str, &str)] = &[
    ("SmallBankTest", "SmallBank", include_str!("../fixtures/smallbank.st")),
    ("TicketTest", "Ticket", include_str!("../fixtures/ticket.st")),
    ("TurnstileTest", "Turnstile", include_str!("../fixtures/turnstile.st")),
    ("StackTest", "Stack", include_str!("../fixtures/stack.st")),
    ("ThermometerTest", "Thermometer", include_str!("../fixtures/thermometer.st")),
    ("GreeterTest", "Greeter", include_str!("../fixtures/greeter.st")),
];

fn load(src: &str) -> Image {
    let mut image = Image::new();
    image.load(src).unwrap();
    image
}

fn tests_of(image: &Image, class: &str, cfg: &AmplificationConfig) -> Vec<TestMethodModel> {
    test_methods(image, class, &cfg.assertion_forms)
}

fn outcomes(image: &Image, class: &str, tests: &[TestMethodModel], cfg: &AmplificationConfig) -> Vec<bool> {
    tests.iter().map(|t| run_test(image, class, &t.to_method(), RunOptions::new(cfg), None).verdict.passed()).collect()
}

#[test]
fn deposit_argument_is_sampled() {
    let cfg = AmplificationConfig::default();
    let image = load(FIXTURES[0].2);
    let tests = tests_of(&image, "SmallBankTest", &cfg);
    let p = profile(&image, "SmallBankTest", "SmallBank", &tests, &cfg).unwrap();
    let obs = p.param(&MethodKey::new("SmallBank", "deposit:", false), 0).unwrap();
    assert_eq!(obs.type_names.iter().collect::<Vec<_>>(), ["Integer"]);
    assert!(obs.samples.contains(&Literal::Int(100)));
    let w = p.param(&MethodKey::new("SmallBank", "withdraw:", false), 0).unwrap();
    assert_eq!(w.samples, vec![Literal::Int(30)]);
    assert_eq!(p.var_types("testWithdraw", "b").into_iter().collect::<Vec<_>>(), ["SmallBank"]);
    for key in p.params.keys() {
        assert!(p.covered.contains(&key.method));
    }
}

#[test]
fn uncovered_methods_are_the_complement() {
    let cfg = AmplificationConfig::default();
    let src = format!(
        "{}\nTestCase subclass: DepositOnlyTest [ testDeposit [ | b | b := SmallBank new. b deposit: 5. self assert: b balance equals: 5 ] ]",
        FIXTURES[0].2
    );
    let image = load(&src);
    let tests = tests_of(&image, "DepositOnlyTest", &cfg);
    let p = profile(&image, "DepositOnlyTest", "SmallBank", &tests, &cfg).unwrap();
    let uncovered = uncovered_methods(&p, &image, "SmallBank", &cfg);
    assert_eq!(uncovered, ["withdraw:"]);
    assert!(!p.covered.contains(&MethodKey::new("SmallBank", "withdraw:", false)));
    assert!(uncovered.iter().all(|u| !p.covered.iter().any(|k| &k.selector == u)));
}

#[test]
fn polymorphic_variable_records_both_types() {
    let cfg = AmplificationConfig::default();
    let src = r#"
Object subclass: Box [ | v | v [ ^ v ] v: x [ v := x ] ]
TestCase subclass: BoxTest [
    testMixed [
        | x b |
        b := Box new.
        #(1 'one') do: [ :each | x := each. b v: x ].
        self assert: b v equals: 'one'
    ]
]"#;
    let image = load(src);
    let tests = tests_of(&image, "BoxTest", &cfg);
    let p = profile(&image, "BoxTest", "Box", &tests, &cfg).unwrap();
    assert_eq!(p.var_types("testMixed", "x").into_iter().collect::<Vec<_>>(), ["Integer", "String"]);
    let obs = p.param(&MethodKey::new("Box", "v:", false), 0).unwrap();
    assert_eq!(obs.type_names.len(), 2);
    assert_eq!(obs.samples, vec![Literal::Int(1), Literal::Str("one".into())]);
}

#[test]
fn red_test_aborts_profiling() {
    let cfg = AmplificationConfig::default();
    let image = load(FIXTURES[0].2);
    let t = parse_test_method("testBad [ self assert: SmallBank new balance equals: 1 ]", "testBad", &cfg.assertion_forms).unwrap();
    let err = profile(&image, "SmallBankTest", "SmallBank", &[t], &cfg).unwrap_err();
    assert!(matches!(err, ProfileError::RedTest { .. }));
    assert_eq!(image.wrapper_count(), 0);
}

#[test]
fn revert_stops_logging() {
    let cfg = AmplificationConfig::default();
    let image = load(FIXTURES[0].2);
    let tests = tests_of(&image, "SmallBankTest", &cfg);
    let handle = wrap_methods(&image, "SmallBank", &cfg).unwrap();
    let log = handle.log.clone();
    run_test(&image, "SmallBankTest", &tests[0].to_method(), RunOptions::new(&cfg), None);
    let withdraws: Vec<_> = log.records().into_iter().filter(|r| r.method.selector == "withdraw:").collect();
    assert_eq!(withdraws.len(), 1);
    assert_eq!(withdraws[0].args[0].primitive, Some(Literal::Int(30)));
    let before = log.records().len();
    handle.revert();
    run_test(&image, "SmallBankTest", &tests[0].to_method(), RunOptions::new(&cfg), None);
    assert_eq!(log.records().len(), before);

    let empty = load("Object subclass: Empty [ ]");
    let handle = wrap_methods(&empty, "Empty", &cfg).unwrap();
    assert!(handle.wrapped().is_empty());
    handle.revert();
}

#[test]
fn profiling_does_not_change_outcomes() {
    let cfg = AmplificationConfig::default();
    for (test_class, cut, src) in FIXTURES {
        let image = load(src);
        let tests = tests_of(&image, test_class, &cfg);
        let before = outcomes(&image, test_class, &tests, &cfg);
        profile(&image, test_class, cut, &tests, &cfg).unwrap();
        assert_eq!(image.wrapper_count(), 0, "{cut}");
        assert_eq!(outcomes(&image, test_class, &tests, &cfg), before, "{cut}");
        assert!(before.iter().all(|p| *p), "{cut}");
    }
}
