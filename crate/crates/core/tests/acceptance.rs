//! One line per acceptance criterion. Runs without the libtest harness so
//! the verdicts are printed even when everything passes.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ampforge_core::assert_amp::{amplify_assertions, collect_traces, instrument};
use ampforge_core::config::{AmplificationConfig, AmplifierSettings};
use ampforge_core::input_amp::{number_variants, plan_reduction, AmplifierRegistry, AMPLIFIER_NAMES};
use ampforge_core::mutation::{generate_mutants, increase_killed, run_matrix, Mutant, MutantStatus, Operator};
use ampforge_core::orchestrator::{amplify_class, Amplification};
use ampforge_core::postprocess::{reduce_assertions, ReductionOutcome};
use ampforge_core::profiler::profile;
use ampforge_core::runner::{run_test, RunOptions};
use ampforge_core::selection::focused;
use ampforge_core::test_model::{strip_assertions, test_methods, StatementKind};
use ampforge_lang::{Image, Literal, MethodKey};
use common::{candidates, kills, load, FIXTURES};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn prop_config(cases: u32) -> PropConfig {
    PropConfig { cases, failure_persistence: None, ..PropConfig::default() }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(tc: &str) -> (&'static str, &'static str, &'static str) {
    *FIXTURES.iter().find(|f| f.0 == tc).expect("known fixture")
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}

/// SmallBank mutants traced by hand against `testWithdraw` (deposit 100,
/// withdraw 30): operator, method, first line of the replaced text, the
/// replacement, and whether the original test leaves the mutant alive.
const SMALLBANK_MATRIX: &[(&str, &str, &str, &str, bool)] = &[
    ("constant_increment", "initialize", "0", "1", false),
    ("constant_decrement", "initialize", "0", "-1", false),
    ("statement_deletion", "initialize", "balance := 0", "", false),
    ("return_removal", "balance", "^ balance", "balance", false),
    ("return_self", "balance", "^ balance", "^ self", false),
    ("arithmetic", "deposit:", "+", "-", false),
    ("statement_deletion", "deposit:", "balance := balance + amount", "", false),
    // 100 > 30 as well as 100 >= 30
    ("relational", "withdraw:", ">=", ">", true),
    ("relational", "withdraw:", ">=", "<", false),
    ("arithmetic", "withdraw:", "-", "+", false),
    ("statement_deletion", "withdraw:", "balance := balance - amount", "", false),
    // the answer of withdraw: is never checked
    ("boolean_flip", "withdraw:", "true", "false", true),
    ("return_removal", "withdraw:", "^ true", "true", true),
    ("return_self", "withdraw:", "^ true", "^ self", true),
    ("statement_deletion", "withdraw:", "balance >= amount", "", false),
    // the insufficient-funds branch is never taken
    ("boolean_flip", "withdraw:", "false", "true", true),
    ("return_removal", "withdraw:", "^ false", "false", true),
    ("return_self", "withdraw:", "^ false", "^ self", true),
];

fn find<'m>(ms: &'m [Mutant], op: &str, method: &str, original: &str, replacement: &str) -> Option<&'m Mutant> {
    ms.iter().find(|m| {
        m.operator.name() == op && m.method.selector == method && first_line(&m.original) == original && m.replacement == replacement
    })
}

/// The emitted suite loaded next to the originals.
fn with_emitted(image: &Image, r: &Amplification) -> Image {
    let mut out = image.clone();
    if let Some(src) = r.render_tests(image) {
        out.load(&src).expect("emitted suite parses");
    }
    out
}

fn criterion_1() -> Outcome {
    let (tc, cut, src) = fixture("SmallBankTest");
    let image = load(&[src]);
    let cfg = AmplificationConfig { seed: 42, ..AmplificationConfig::default() };
    let ms = generate_mutants(&image, cut).map_err(|e| e.to_string())?;
    ensure!(ms.len() <= 30, "{} mutants", ms.len());
    ensure!(ms.len() == SMALLBANK_MATRIX.len(), "{} mutants, oracle has {}", ms.len(), SMALLBANK_MATRIX.len());

    let originals = test_methods(&image, tc, &cfg.assertion_forms);
    let before = run_matrix(&image, tc, &originals, &ms, &cfg).map_err(|e| e.to_string())?;
    for (op, method, original, replacement, live) in SMALLBANK_MATRIX {
        let m = find(&ms, op, method, original, replacement)
            .ok_or_else(|| format!("missing mutant {op} in {method}: {original} -> {replacement}"))?;
        let status = before.status[&m.id];
        let expected = if *live { MutantStatus::Live } else { MutantStatus::Killed };
        ensure!(status == expected, "{}: {status:?}, expected {expected:?}", m.describe());
    }

    let start = Instant::now();
    let r = amplify_class(&image, tc, cut, &cfg, Some("testWithdraw")).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(elapsed <= Duration::from_secs(120), "took {elapsed:?}");

    let gt = find(&ms, "relational", "withdraw:", ">=", ">").unwrap();
    let no_funds = find(&ms, "boolean_flip", "withdraw:", "false", "true").unwrap();
    let extended = with_emitted(&image, &r);
    let amplified: Vec<_> = test_methods(&extended, tc, &cfg.assertion_forms)
        .into_iter()
        .filter(|t| t.name.contains("_amp"))
        .collect();
    let after = run_matrix(&extended, tc, &amplified, &ms, &cfg).map_err(|e| e.to_string())?;
    for m in [gt, no_funds] {
        ensure!(before.kills[&m.id].is_empty(), "original suite kills {}", m.describe());
        ensure!(!after.kills[&m.id].is_empty(), "emitted tests miss {}", m.describe());
    }
    println!("    smallbank: {} mutants, {} emitted tests, {elapsed:.2?}", ms.len(), amplified.len());
    Ok(())
}

fn criterion_2() -> Outcome {
    let a = increase_killed(6, 2).ok_or("undefined for 6 killed")?;
    let b = increase_killed(2, 4).ok_or("undefined for 2 killed")?;
    let close = |x: f64, y: f64| (x - y).abs() <= 0.01;
    ensure!(close(a, 33.33), "increase_killed(6, 2) = {a}");
    ensure!(close(b, 200.00), "increase_killed(2, 4) = {b}");
    Ok(())
}

fn criterion_3() -> Outcome {
    let c = AmplificationConfig::default();
    let got = (c.n_iteration, c.n_max_inputs, c.n_serialization, c.n_flakiness);
    ensure!(got == (3, 10, 3, 10), "defaults {got:?}");
    let empty = AmplificationConfig::from_toml_str("").map_err(|e| e.to_string())?;
    ensure!(empty == c, "an empty config file changes the defaults");
    Ok(())
}

fn int_variants(n: i64, others: &[i64]) -> Vec<i64> {
    let lits: Vec<Literal> = others.iter().map(|o| Literal::Int(*o)).collect();
    number_variants(&Literal::Int(n), &lits)
        .into_iter()
        .map(|l| match l {
            Literal::Int(i) => i,
            other => panic!("integer literal turned into {other:?}"),
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let v = int_variants(100, &[30]);
    let set: BTreeSet<i64> = v.iter().copied().collect();
    ensure!(v.len() == 7 && set == BTreeSet::from([0, 101, 99, 200, 50, -100, 30]), "variants {v:?}");

    let mut runner = TestRunner::new(prop_config(512));
    runner
        .run(&(any::<i64>(), prop::collection::vec(any::<i64>(), 0..4)), |(n, others)| {
            let mut family: BTreeSet<i64> =
                [Some(0), n.checked_add(1), n.checked_sub(1), n.checked_mul(2), Some(n / 2), n.checked_neg()]
                    .into_iter()
                    .flatten()
                    .chain(others.iter().copied())
                    .collect();
            family.remove(&n);
            let v = int_variants(n, &others);
            let got: BTreeSet<i64> = v.iter().copied().collect();
            prop_assert_eq!(got.len(), v.len());
            prop_assert_eq!(got, family);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn criterion_5() -> Outcome {
    let cfg = AmplificationConfig::default();
    ensure!(cfg.n_flakiness == 10, "reruns {}", cfg.n_flakiness);
    let (tc, _, src) = fixture("TicketTest");
    let image = load(&[src]);
    for t in test_methods(&image, tc, &cfg.assertion_forms).iter().map(strip_assertions) {
        let out = amplify_assertions(&image, tc, &t, &cfg).map_err(|e| e.to_string())?;
        let on_timestamp: Vec<String> = out
            .statements
            .iter()
            .filter(|s| s.kind == StatementKind::Assertion && s.render().contains("issuedAt"))
            .map(|s| s.render())
            .collect();
        ensure!(
            on_timestamp == ["self assert: t issuedAt class equals: Integer"],
            "timestamp assertions {on_timestamp:?}"
        );
    }

    for (tc, _, src) in FIXTURES.iter().filter(|f| f.0 != "TicketTest") {
        let image = load(&[src]);
        let inputs: Vec<_> = test_methods(&image, tc, &cfg.assertion_forms).iter().map(strip_assertions).collect();
        for _ in 0..100 {
            for t in &inputs {
                let traces = collect_traces(&image, tc, &instrument(t), &cfg).map_err(|e| e.to_string())?;
                ensure!(traces.values().all(|n| !n.any_flaky()), "{tc}>>{} has a flaky point", t.name);
            }
        }
    }
    Ok(())
}

fn criterion_6() -> Outcome {
    let cfg = AmplificationConfig::default();
    let mut exercised = Vec::new();
    for (tc, cut, src) in FIXTURES {
        let image = load(&[src]);
        let ms = generate_mutants(&image, cut).map_err(|e| e.to_string())?;
        let originals = test_methods(&image, tc, &cfg.assertion_forms);
        let before = run_matrix(&image, tc, &originals, &ms, &cfg).map_err(|e| e.to_string())?.killed();
        let mut reduced_any = false;
        for c in candidates(&image, tc, &ms, &cfg) {
            let (r, outcome) = reduce_assertions(&image, tc, &c, &ms, &cfg);
            reduced_any |= matches!(outcome, ReductionOutcome::Reduced { .. });
            let green = run_test(&image, tc, &r.model.to_method(), RunOptions::new(&cfg), None).verdict.passed();
            ensure!(green, "{tc}: reduced test is red:\n{}", r.model.render());
            let after: BTreeSet<String> = kills(&image, tc, &r.model, &ms, &cfg).difference(&before).cloned().collect();
            ensure!(after == c.newly_killed, "{tc}: newly killed {after:?} != {:?}", c.newly_killed);
        }
        if reduced_any {
            exercised.push(*tc);
        }
    }
    ensure!(exercised.len() >= 5, "reductions on {exercised:?} only");

    let (tc, cut, src) = fixture("TurnstileTest");
    let image = load(&[src]);
    let ms = generate_mutants(&image, cut).map_err(|e| e.to_string())?;
    let cands = candidates(&image, tc, &ms, &cfg);
    let c = cands.iter().find(|c| c.model.render().contains("report")).ok_or("no candidate reads the impure accessor")?;
    let (r, outcome) = reduce_assertions(&image, tc, c, &ms, &cfg);
    ensure!(matches!(outcome, ReductionOutcome::Reverted { .. }), "impure accessor: {outcome:?}");
    ensure!(r.model.render() == c.model.render(), "revert is not byte-identical");
    Ok(())
}

fn criterion_7() -> Outcome {
    let strategy = (
        prop::collection::vec(prop::sample::select(AMPLIFIER_NAMES.to_vec()), 0..80),
        1usize..20,
        prop::collection::vec(0.1f64..5.0, AMPLIFIER_NAMES.len()),
        any::<u64>(),
    );
    let mut runner = TestRunner::new(prop_config(1000));
    runner
        .run(&strategy, |(names, n_max, weights, seed)| {
            let origins: Vec<String> = names.into_iter().map(String::from).collect();
            let mut cfg = AmplificationConfig::default();
            for (name, w) in AMPLIFIER_NAMES.iter().zip(&weights) {
                cfg.amplifiers.insert(name.to_string(), AmplifierSettings { enabled: true, weight: *w });
            }
            let registry = AmplifierRegistry::from_config(&cfg);
            let plan = plan_reduction(&origins, n_max, &registry, &mut ChaCha8Rng::seed_from_u64(seed));
            let kept = plan.kept();
            prop_assert!(kept.len() <= n_max);
            if origins.len() <= n_max {
                prop_assert_eq!(&kept, &(0..origins.len()).collect::<Vec<_>>());
            } else {
                let competitive: BTreeSet<usize> = plan.competitive.iter().copied().collect();
                let contributing: BTreeSet<&str> = origins
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !competitive.contains(i))
                    .map(|(_, o)| o.as_str())
                    .collect();
                if contributing.len() <= n_max - plan.competitive.len() {
                    let balanced: BTreeSet<&str> = plan.balanced.iter().map(|&i| origins[i].as_str()).collect();
                    prop_assert_eq!(balanced, contributing);
                }
            }
            let again = plan_reduction(&origins, n_max, &registry, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(again, plan);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Ids in the `@killed-mutants` comment right before each method header.
fn annotations(src: &str) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    let mut pending: Vec<String> = Vec::new();
    let mut in_comment = false;
    for line in src.lines() {
        let t = line.trim();
        if t.starts_with("\"@killed-mutants") {
            in_comment = true;
            pending.clear();
            continue;
        }
        if in_comment {
            let body = t.trim_end_matches('"');
            if let Some(id) = body.split_whitespace().next() {
                pending.push(id.to_string());
            }
            in_comment = !t.ends_with('"');
            continue;
        }
        if let Some(name) = t.strip_suffix(" [").filter(|n| n.chars().all(|c| c.is_alphanumeric() || c == '_')) {
            out.insert(name.to_string(), std::mem::take(&mut pending));
        }
    }
    out
}

/// (kills per method, expected verdict), labelled by hand.
const FOCUS_CASES: &[(&[usize], bool)] = &[
    (&[1], true),
    (&[1, 1], true),
    (&[2, 2], true),
    (&[2, 1, 1], true),
    (&[1, 1, 1], false),
    (&[3, 2, 1], true),
    (&[3, 2, 2], false),
    (&[2, 2, 1], false),
    (&[5, 5], true),
    (&[4, 3, 1], true),
    (&[4, 4, 1], false),
    (&[1, 1, 1, 1], false),
    (&[2, 1, 1, 1], false),
    (&[3, 1, 1, 1], true),
    (&[10], true),
    (&[6, 6], true),
    (&[6, 7], true),
    (&[5, 3, 3], false),
    (&[7, 3, 2, 2], true),
    (&[1, 2, 3, 4], false),
];

fn criterion_8() -> Outcome {
    let cfg = AmplificationConfig::default();
    let mut total_tests = 0;
    for (tc, cut, src) in FIXTURES {
        let image = load(&[src]);
        let r = amplify_class(&image, tc, cut, &cfg, None).map_err(|e| format!("{tc}: {e}"))?;
        let Some(rendered) = r.render_tests(&image) else { continue };
        let extended = with_emitted(&image, &r);
        let all = test_methods(&extended, tc, &cfg.assertion_forms);
        for t in &all {
            let green = run_test(&extended, tc, &t.to_method(), RunOptions::new(&cfg), None).verdict.passed();
            ensure!(green, "{tc}>>{} is red", t.name);
        }
        let matrix = run_matrix(&extended, tc, &all, &r.mutants, &cfg).map_err(|e| e.to_string())?;
        let originals: BTreeSet<String> = test_methods(&image, tc, &cfg.assertion_forms).into_iter().map(|t| t.name).collect();
        let mut cumulative: BTreeSet<String> =
            originals.iter().flat_map(|o| matrix.killed_by(o)).collect();
        let notes = annotations(&rendered);
        for t in &r.tests {
            let own = matrix.killed_by(&t.model.name);
            let grown = cumulative.len();
            cumulative.extend(own.iter().cloned());
            ensure!(cumulative.len() > grown, "{tc}>>{} adds no kills", t.model.name);
            ensure!(t.newly_killed.is_subset(&own), "{tc}>>{} does not kill what it claims", t.model.name);
            let ids = notes.get(&t.model.name).ok_or(format!("{tc}>>{} was not emitted", t.model.name))?;
            ensure!(!ids.is_empty(), "{tc}>>{} has an empty annotation", t.model.name);
            let listed: BTreeSet<String> = ids.iter().cloned().collect();
            ensure!(listed == t.newly_killed, "{tc}>>{} annotation {listed:?}", t.model.name);
        }
        total_tests += r.tests.len();
    }
    ensure!(total_tests > 0, "the corpus produced no amplified tests");

    for (i, (per_method, expected)) in FOCUS_CASES.iter().enumerate() {
        let mut ms = Vec::new();
        let mut killed = BTreeSet::new();
        for (j, &n) in per_method.iter().enumerate() {
            for k in 0..n {
                let id = format!("m{j}_{k}");
                killed.insert(id.clone());
                ms.push(Mutant {
                    id,
                    operator: Operator::Relational,
                    method: MethodKey::new("Cut", format!("method{j}"), false),
                    span: (0, 1),
                    original: ">".into(),
                    replacement: "<".into(),
                });
            }
            // a live mutant in every method must not count
            ms.push(Mutant {
                id: format!("live{j}"),
                operator: Operator::Relational,
                method: MethodKey::new("Cut", format!("method{j}"), false),
                span: (0, 1),
                original: ">".into(),
                replacement: "<".into(),
            });
        }
        let got = focused(&killed, &ms).map_err(|e| e.to_string())?;
        ensure!(got == *expected, "focus case {i} {per_method:?}: {got}");
    }
    ensure!(focused(&BTreeSet::new(), &[]).is_err(), "focus of an empty kill set is defined");
    Ok(())
}

fn criterion_9() -> Outcome {
    let cfg = AmplificationConfig::default();
    for (tc, cut, src) in FIXTURES {
        let image = load(&[src]);
        let tests = test_methods(&image, tc, &cfg.assertion_forms);
        let run = |img: &Image| -> Vec<bool> {
            tests.iter().map(|t| run_test(img, tc, &t.to_method(), RunOptions::new(&cfg), None).verdict.passed()).collect()
        };
        let off = run(&image);
        profile(&image, tc, cut, &tests, &cfg).map_err(|e| format!("{tc}: {e}"))?;
        ensure!(image.wrapper_count() == 0, "{tc}: {} wrappers left", image.wrapper_count());
        let after = run(&image);
        ensure!(after == off, "{tc}: outcomes {off:?} became {after:?}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: &[Criterion] = &[
        (1, "SmallBank: boundary and insufficient-funds mutants killed", criterion_1),
        (2, "increase_killed reproduces 33.33 and 200.00", criterion_2),
        (3, "default hyperparameters 3/10/3/10", criterion_3),
        (4, "literal variants of 100 with co-literal 30; variant family", criterion_4),
        (5, "timestamp asserted by type only; no flaky points elsewhere", criterion_5),
        (6, "assertion reduction keeps kills, stays green, reverts on impure accessor", criterion_6),
        (7, "input reduction bound, pass-through, balance, reproducibility", criterion_7),
        (8, "end-to-end invariants and focus classifier", criterion_8),
        (9, "profiling leaves outcomes and the image untouched", criterion_9),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(()) => println!("criterion {id}: PASS  {title} ({:.2?})", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {id}: FAIL  {title}: {why}");
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
