//! Readability passes over selected tests: dropping assertions no mutant
//! needs, and tidying temporaries.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use ampforge_lang::{Expr, Hook, Image, Interpreter, Stmt, Unwind, Value};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::AmplificationConfig;
use crate::mutation::{mutated_image, Mutant};
use crate::profiler::temp_types;
use crate::runner::{run_test, RunOptions};
use crate::selection::AmplifiedTest;
use crate::syntax::{block, rename_stmt, self_send, send, var, visit_stmt_vars};
use crate::test_model::{Statement, StatementKind, TestMethodModel};

const NEVER_REMOVED: &[&str] = &["should:raise:"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ReductionOutcome {
    Unchanged,
    Reduced { removed: usize },
    /// The reduced test failed verification; the input was kept as is.
    Reverted { attempted: usize },
}

struct MarkHook {
    fired: Rc<RefCell<BTreeSet<usize>>>,
}

impl Hook for MarkHook {
    fn primitive(&mut self, _: &mut Interpreter<'_>, name: &str, _: &Value, args: &[Value]) -> Result<Value, Unwind> {
        if let (true, Some(Value::Int(i))) = (name == "markFailedAssertion", args.first()) {
            self.fired.borrow_mut().insert(*i as usize);
        }
        Ok(Value::Nil)
    }
}

fn removable(s: &Statement) -> bool {
    s.kind == StatementKind::Assertion && !s.selector().is_some_and(|sel| NEVER_REMOVED.contains(&sel))
}

/// Wraps assertion `i` so that a failure reports `i` and the test goes on.
fn guard(s: &Statement, i: usize) -> Statement {
    let handler = block(vec![self_send("markFailedAssertion:", vec![Expr::Lit(ampforge_lang::Literal::Int(i as i64))])], vec!["ex".into()]);
    Statement::raw(Stmt::Expr(send(block(vec![s.node.clone()], vec![]), "on:do:", vec![var("TestFailure"), handler])))
}

fn original_sends(image: &Image, test_class: &str, t: &TestMethodModel, cfg: &AmplificationConfig) -> Option<u64> {
    let run = run_test(image, test_class, &t.to_method(), RunOptions::new(cfg), None);
    run.verdict.passed().then_some(run.sends)
}

/// Green on `image` and failing under every mutant in `targets`.
pub fn verify(image: &Image, test_class: &str, t: &TestMethodModel, targets: &[&Mutant], cfg: &AmplificationConfig) -> bool {
    let Some(sends) = original_sends(image, test_class, t, cfg) else { return false };
    let method = t.to_method();
    targets.par_iter().all(|m| {
        mutated_image(image, m).is_some_and(|img| {
            !run_test(&img, test_class, &method, RunOptions::scaled(cfg, sends), None).verdict.passed()
        })
    })
}

fn targets<'m>(t: &AmplifiedTest, mutants: &'m [Mutant]) -> Vec<&'m Mutant> {
    mutants.iter().filter(|m| t.newly_killed.contains(&m.id)).collect()
}

/// Runs the newly killed mutants once against a guarded copy of the test and
/// drops every assertion that never failed. If the result is not green or
/// stops killing one of those mutants, the input is returned unchanged.
pub fn reduce_assertions(
    image: &Image,
    test_class: &str,
    t: &AmplifiedTest,
    mutants: &[Mutant],
    cfg: &AmplificationConfig,
) -> (AmplifiedTest, ReductionOutcome) {
    let candidates: Vec<usize> =
        t.model.statements.iter().enumerate().filter(|(_, s)| removable(s)).map(|(i, _)| i).collect();
    if candidates.is_empty() {
        return (t.clone(), ReductionOutcome::Unchanged);
    }
    let Some(sends) = original_sends(image, test_class, &t.model, cfg) else {
        return (t.clone(), ReductionOutcome::Unchanged);
    };
    let mut guarded = t.model.clone();
    for &i in &candidates {
        guarded.statements[i] = guard(&t.model.statements[i], i);
    }
    let method = guarded.to_method();
    let targets = targets(t, mutants);
    let fired: BTreeSet<usize> = targets
        .par_iter()
        .map(|m| {
            let fired = Rc::new(RefCell::new(BTreeSet::new()));
            if let Some(img) = mutated_image(image, m) {
                let hook = MarkHook { fired: fired.clone() };
                run_test(&img, test_class, &method, RunOptions::scaled(cfg, sends), Some(Box::new(hook)));
            }
            fired.take()
        })
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let drop: BTreeSet<usize> = candidates.iter().copied().filter(|i| !fired.contains(i)).collect();
    if drop.is_empty() {
        return (t.clone(), ReductionOutcome::Unchanged);
    }
    let mut reduced = t.clone();
    reduced.model.statements =
        t.model.statements.iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, s)| s.clone()).collect();
    if verify(image, test_class, &reduced.model, &targets, cfg) {
        (reduced, ReductionOutcome::Reduced { removed: drop.len() })
    } else {
        (t.clone(), ReductionOutcome::Reverted { attempted: drop.len() })
    }
}

fn is_generated_temp(name: &str) -> bool {
    name.strip_prefix("tmp").is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
}

/// (reads, writes) per variable over the whole method.
fn usage(t: &TestMethodModel) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in &t.statements {
        visit_stmt_vars(&s.node, &mut |v, write| {
            let e = out.entry(v.to_string()).or_default();
            if write {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        });
    }
    out
}

fn mentions(e: &Expr, v: &str) -> bool {
    let mut found = false;
    visit_stmt_vars(&Stmt::Expr(e.clone()), &mut |name, _| found |= name == v);
    found
}

/// Replaces the single read of `v` with `rep`, provided no other message is
/// sent before `v` would have been evaluated.
fn substitute(e: &Expr, v: &str, rep: &Expr, sent: &mut bool) -> Option<Expr> {
    Some(match e {
        Expr::Var(name) if name == v => {
            if *sent {
                return None;
            }
            rep.clone()
        }
        Expr::Var(_) | Expr::Lit(_) => e.clone(),
        Expr::Assign { target, value } => {
            if target == v {
                return None;
            }
            Expr::Assign { target: target.clone(), value: Box::new(substitute(value, v, rep, sent)?) }
        }
        Expr::Send { receiver, selector, args } => {
            let receiver = Box::new(substitute(receiver, v, rep, sent)?);
            let args = args.iter().map(|a| substitute(a, v, rep, sent)).collect::<Option<Vec<_>>>()?;
            *sent = true;
            Expr::Send { receiver, selector: selector.clone(), args }
        }
        Expr::Block(_) | Expr::Cascade { .. } => {
            if mentions(e, v) {
                return None;
            }
            if matches!(e, Expr::Cascade { .. }) {
                *sent = true;
            }
            e.clone()
        }
        Expr::Brace(items) => Expr::Brace(items.iter().map(|i| substitute(i, v, rep, sent)).collect::<Option<Vec<_>>>()?),
    })
}

fn drop_dead_assignments(t: &mut TestMethodModel) -> bool {
    let use_ = usage(t);
    let temps: BTreeSet<&String> = t.temps.iter().collect();
    let mut changed = false;
    let mut out = Vec::new();
    for s in &t.statements {
        let dead = s.kind == StatementKind::Assignment
            && s.target().is_some_and(|v| temps.contains(&v.to_string()) && use_.get(v).is_none_or(|u| u.0 == 0));
        if !dead {
            out.push(s.clone());
            continue;
        }
        changed = true;
        if let Expr::Assign { value, .. } = s.expr() {
            if matches!(value.as_ref(), Expr::Send { .. } | Expr::Cascade { .. }) {
                out.push(Statement::new(StatementKind::Invocation, value.as_ref().clone()));
            }
        }
    }
    t.statements = out;
    changed
}

fn drop_unused_temps(t: &mut TestMethodModel) -> bool {
    let use_ = usage(t);
    let before = t.temps.len();
    t.temps.retain(|v| use_.contains_key(v));
    t.temps.len() != before
}

fn inline_once(t: &mut TestMethodModel) -> bool {
    let use_ = usage(t);
    for i in 0..t.statements.len().saturating_sub(1) {
        let s = &t.statements[i];
        let Some(v) = s.target().filter(|v| is_generated_temp(v)) else { continue };
        if use_.get(v) != Some(&(1, 1)) {
            continue;
        }
        let Expr::Assign { value, .. } = s.expr() else { continue };
        if !matches!(value.as_ref(), Expr::Send { .. }) {
            continue;
        }
        let next = &t.statements[i + 1];
        let Stmt::Expr(e) = &next.node else { continue };
        if !mentions(e, v) {
            continue;
        }
        if let Some(inlined) = substitute(e, v, value, &mut false) {
            let v = v.to_string();
            t.statements[i + 1] = Statement { kind: next.kind, node: Stmt::Expr(inlined) };
            t.statements.remove(i);
            t.temps.retain(|x| *x != v);
            return true;
        }
    }
    false
}

fn type_based_name(type_name: &str) -> Option<String> {
    if type_name.ends_with(" class") {
        return None;
    }
    let mut chars = type_name.chars();
    let first = chars.next()?;
    Some(first.to_lowercase().chain(chars).collect())
}

/// Removes dead temporaries, folds single-use generated temporaries back
/// into the next statement, and names the rest after their runtime type.
/// `reserved` names are never chosen.
pub fn tidy_model(
    t: &TestMethodModel,
    types: &BTreeMap<String, BTreeSet<String>>,
    reserved: &BTreeSet<String>,
) -> TestMethodModel {
    let mut out = t.clone();
    loop {
        let a = drop_dead_assignments(&mut out);
        let b = drop_unused_temps(&mut out);
        let c = inline_once(&mut out);
        if !(a || b || c) {
            break;
        }
    }
    let mut taken: BTreeSet<String> = out.variables();
    taken.extend(reserved.iter().cloned());
    for v in out.temps.clone() {
        if !is_generated_temp(&v) {
            continue;
        }
        let Some(ts) = types.get(&v).filter(|ts| ts.len() == 1) else { continue };
        let Some(base) = ts.first().and_then(|ty| type_based_name(ty)) else { continue };
        let name = std::iter::once(base.clone())
            .chain((2..).map(|k| format!("{base}{k}")))
            .find(|n| !taken.contains(n))
            .expect("unbounded suffixes");
        taken.insert(name.clone());
        for s in &mut out.statements {
            s.node = rename_stmt(&s.node, &v, &name);
        }
        for x in &mut out.temps {
            if *x == v {
                *x = name.clone();
            }
        }
    }
    out
}

const PSEUDO: &[&str] = &["self", "super", "thisContext", "nil", "true", "false"];

/// [`tidy_model`] with types from one run, kept only if the result is green
/// and still kills every newly killed mutant.
pub fn tidy(
    image: &Image,
    test_class: &str,
    t: &AmplifiedTest,
    mutants: &[Mutant],
    cfg: &AmplificationConfig,
) -> AmplifiedTest {
    let types = temp_types(image, test_class, &t.model, cfg);
    let mut reserved: BTreeSet<String> = PSEUDO.iter().map(|s| s.to_string()).collect();
    if let Some(c) = image.class(test_class) {
        reserved.extend(c.all_ivars.iter().cloned());
    }
    let model = tidy_model(&t.model, &types, &reserved);
    if model.same_code(&t.model) {
        return t.clone();
    }
    if verify(image, test_class, &model, &targets(t, mutants), cfg) {
        AmplifiedTest { model, ..t.clone() }
    } else {
        t.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DEFAULT_ASSERTION_FORMS;
    use crate::test_model::parse_test_method;

    fn parse(src: &str) -> TestMethodModel {
        let forms: Vec<String> = DEFAULT_ASSERTION_FORMS.iter().map(|s| s.to_string()).collect();
        let name = src.split_whitespace().next().unwrap();
        parse_test_method(src, name, &forms).unwrap()
    }

    #[test]
    fn dead_temps_go_and_single_use_temps_fold_back() {
        let t = parse("testIt [ | b tmp1 tmp2 | b := Bank new. tmp1 := b deposit: 3. tmp2 := b balance. self assert: tmp2 equals: 3 ]");
        let out = tidy_model(&t, &BTreeMap::new(), &BTreeSet::new());
        assert_eq!(out.temps, ["b"]);
        let lines: Vec<String> = out.statements.iter().map(|s| s.render()).collect();
        assert_eq!(lines, ["b := Bank new", "b deposit: 3", "self assert: b balance equals: 3"]);
    }

    #[test]
    fn inlining_respects_evaluation_order() {
        let t = parse("testIt [ | a tmp1 | a := Foo new. tmp1 := a next. self assert: a bump equals: tmp1 ]");
        let out = tidy_model(&t, &BTreeMap::new(), &BTreeSet::new());
        assert!(out.temps.contains(&"tmp1".to_string()));
    }

    #[test]
    fn remaining_temps_are_named_after_their_type() {
        let t = parse("testIt [ | tmp1 tmp2 point | tmp1 := Point x: 1 y: 2. tmp2 := Point x: 3 y: 4. point := tmp1 + tmp2. self assert: tmp1 x equals: 1. self assert: tmp2 y equals: 4. self assert: point x equals: 4 ]");
        let types = BTreeMap::from([
            ("tmp1".to_string(), BTreeSet::from(["Point".to_string()])),
            ("tmp2".to_string(), BTreeSet::from(["Point".to_string()])),
        ]);
        let out = tidy_model(&t, &types, &BTreeSet::new());
        assert_eq!(out.temps, ["point2", "point3", "point"]);
        assert_eq!(tidy_model(&out, &types, &BTreeSet::new()), out);
    }

    fn stmt_strategy() -> impl proptest::strategy::Strategy<Value = String> {
        use proptest::prelude::*;
        let v = prop::sample::select(vec!["a", "tmp1", "tmp2", "tmp3"]);
        prop_oneof![
            (v.clone(), v.clone()).prop_map(|(x, y)| format!("{x} := {y} next")),
            v.clone().prop_map(|x| format!("{x} := Foo new")),
            v.clone().prop_map(|x| format!("{x} bump")),
            (v.clone(), v.clone()).prop_map(|(x, y)| format!("self assert: {x} size equals: {y}")),
        ]
    }

    proptest::proptest! {
        #[test]
        fn tidying_is_idempotent(body in proptest::collection::vec(stmt_strategy(), 1..8), typed in proptest::bool::ANY) {
            let t = parse(&format!("testIt [ | a tmp1 tmp2 tmp3 | {} ]", body.join(". ")));
            let types: BTreeMap<String, BTreeSet<String>> = if typed {
                ["tmp1", "tmp2", "tmp3"].iter().map(|v| (v.to_string(), BTreeSet::from(["Foo".to_string()]))).collect()
            } else {
                BTreeMap::new()
            };
            let once = tidy_model(&t, &types, &BTreeSet::new());
            let twice = tidy_model(&once, &types, &BTreeSet::new());
            proptest::prop_assert_eq!(twice.render(), once.render());
        }
    }
}
