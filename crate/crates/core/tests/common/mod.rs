#![allow(dead_code)]

use std::collections::BTreeSet;

use ampforge_core::assert_amp::amplify_assertions;
use ampforge_core::config::AmplificationConfig;
use ampforge_core::input_amp::{amplify_literals, duplicate_calls, remove_calls};
use ampforge_core::mutation::{run_matrix, Mutant};
use ampforge_core::runner::{run_test, RunOptions};
use ampforge_core::selection::AmplifiedTest;
use ampforge_core::test_model::{strip_assertions, test_methods, TestMethodModel};
use ampforge_lang::Image;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// (test class, class under test, source) for every fixture.
pub const FIXTURES: &[(&str, &str, &str)] = &[
    ("SmallBankTest", "SmallBank", include_str!("../../fixtures/smallbank.st")),
    ("TicketTest", "Ticket", include_str!("../../fixtures/ticket.st")),
    ("TurnstileTest", "Turnstile", include_str!("../../fixtures/turnstile.st")),
    ("StackTest", "Stack", include_str!("../../fixtures/stack.st")),
    ("ThermometerTest", "Thermometer", include_str!("../../fixtures/thermometer.st")),
    ("GreeterTest", "Greeter", include_str!("../../fixtures/greeter.st")),
];

pub fn load(srcs: &[&str]) -> Image {
    let mut image = Image::new();
    for s in srcs {
        image.load(s).unwrap();
    }
    image
}

pub fn kills(image: &Image, tc: &str, t: &TestMethodModel, mutants: &[Mutant], cfg: &AmplificationConfig) -> BTreeSet<String> {
    run_matrix(image, tc, std::slice::from_ref(t), mutants, cfg).unwrap().killed_by(&t.name)
}

pub fn green(image: &Image, tc: &str, t: &TestMethodModel, cfg: &AmplificationConfig) -> bool {
    run_test(image, tc, &t.to_method(), RunOptions::new(cfg), None).verdict.passed()
}

/// Assertion-amplified originals and a handful of input variants, each with
/// the mutants it kills beyond the original suite.
pub fn candidates(image: &Image, tc: &str, mutants: &[Mutant], cfg: &AmplificationConfig) -> Vec<AmplifiedTest> {
    let originals = test_methods(image, tc, &cfg.assertion_forms);
    let before = run_matrix(image, tc, &originals, mutants, cfg).unwrap().killed();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    for o in &originals {
        let base = strip_assertions(o);
        let mut inputs = vec![base.clone()];
        inputs.extend(amplify_literals(&base, &mut rng).into_iter().take(4));
        inputs.extend(duplicate_calls(&base).into_iter().take(2));
        inputs.extend(remove_calls(&base).into_iter().take(2));
        for (k, input) in inputs.iter().enumerate() {
            let Ok(mut t) = amplify_assertions(image, tc, input, cfg) else { continue };
            t.name = format!("{}_cand{k}", o.name);
            let fresh: BTreeSet<String> = kills(image, tc, &t, mutants, cfg).difference(&before).cloned().collect();
            if !fresh.is_empty() {
                out.push(AmplifiedTest::new(t, fresh, 1));
            }
        }
    }
    out
}
