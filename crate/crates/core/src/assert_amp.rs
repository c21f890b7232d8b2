//! Assertion amplification: observe object states after each statement,
//! drop values that change between runs, and turn the rest into assertions.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use ampforge_lang::ast::arity;
use ampforge_lang::printer::literal_to_source;
use ampforge_lang::{Expr, Hook, Image, Interpreter, Literal, MethodDef, Stmt, Unwind, Value};
use serde::Serialize;
use thiserror::Error;

use crate::config::AmplificationConfig;
use crate::profiler::callable_methods;
use crate::runner::{run_test, RunOptions, Verdict};
use crate::syntax::{block, contains_return, self_send, send, var};
use crate::test_model::{Statement, StatementKind, TestMethodModel};

/// Elements serialized per collection.
pub const COLLECTION_CAP: usize = 10;

const PSEUDO_VARIABLES: &[&str] = &["self", "super", "thisContext", "nil", "true", "false"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessorRef {
    pub class: String,
    pub selector: String,
    /// `Some(true)` for methods that only answer an instance variable.
    pub pure: Option<bool>,
}

fn answers_ivar(def: &MethodDef, ivars: &[String]) -> bool {
    matches!(def.body.as_slice(), [Stmt::Return(Expr::Var(v))] if ivars.contains(v))
}

fn is_predicate_name(selector: &str) -> bool {
    ["is", "has"].iter().any(|p| {
        selector.strip_prefix(p).and_then(|rest| rest.chars().next()).is_some_and(|c| c.is_ascii_uppercase())
    })
}

/// Zero-argument public methods with an explicit return that are tagged
/// `accessing`/`testing`, share an instance variable's name, or are named
/// like a predicate. Name-sorted.
pub fn identify_accessors(image: &Image, class: &str, cfg: &AmplificationConfig) -> Vec<AccessorRef> {
    let Some(c) = image.class(class) else { return vec![] };
    callable_methods(image, class, cfg)
        .into_iter()
        .filter(|m| {
            let d = &m.def;
            arity(&d.selector) == 0
                && contains_return(&d.body)
                && (d.has_pragma("accessing")
                    || d.has_pragma("testing")
                    || c.all_ivars.contains(&d.selector)
                    || is_predicate_name(&d.selector))
        })
        .map(|m| AccessorRef {
            class: m.key.class.clone(),
            selector: m.def.selector.clone(),
            pure: answers_ivar(&m.def, &c.all_ivars).then_some(true),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    ReceiverState,
    ReturnValue,
    Exception,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PointId {
    pub statement: usize,
    pub kind: PointKind,
}

/// How a child is reached from its parent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Step {
    Accessor(String),
    Size,
    At(Literal),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationNode {
    pub type_name: String,
    /// Present for primitives; absent for objects, collections and
    /// non-finite floats.
    pub value: Option<Literal>,
    pub children: Vec<(Step, ObservationNode)>,
    pub flaky: bool,
}

impl ObservationNode {
    fn leaf(type_name: String, value: Option<Literal>) -> Self {
        ObservationNode { type_name, value, children: vec![], flaky: false }
    }

    pub fn depth(&self) -> usize {
        self.children.iter().map(|(_, c)| 1 + c.depth()).max().unwrap_or(0)
    }

    pub fn any_flaky(&self) -> bool {
        self.flaky || self.children.iter().any(|(_, c)| c.any_flaky())
    }
}

pub type Traces = BTreeMap<PointId, ObservationNode>;

/// Combines two observations of the same point. Differing types drop the
/// node; differing values mark it flaky; children must appear in both.
pub fn merge_nodes(a: &ObservationNode, b: &ObservationNode) -> Option<ObservationNode> {
    if a.type_name != b.type_name {
        return None;
    }
    let children = a
        .children
        .iter()
        .filter_map(|(step, ca)| {
            let (_, cb) = b.children.iter().find(|(s, _)| s == step)?;
            merge_nodes(ca, cb).map(|m| (step.clone(), m))
        })
        .collect();
    Some(ObservationNode {
        type_name: a.type_name.clone(),
        value: a.value.clone(),
        children,
        flaky: a.flaky || b.flaky || a.value != b.value,
    })
}

#[derive(Debug, Error)]
pub enum AssertAmpError {
    #[error("instrumented run did not complete: {0:?}")]
    RunFailed(Verdict),
    #[error("exceptions were raised at different statements across runs")]
    Inconsistent,
    #[error("generated test is not green: {0:?}")]
    NotGreen(Verdict),
}

/// What the instrumented test observes after each statement.
#[derive(Debug, Clone)]
pub struct Plan {
    pub receiver: Option<Expr>,
    /// Variable holding the statement's answer.
    pub retval: Option<String>,
}

/// A test with observer calls and exception guards around each statement.
#[derive(Debug, Clone)]
pub struct Instrumented {
    pub test: TestMethodModel,
    /// The input with invocations rewritten to bind their answers.
    pub base: TestMethodModel,
    pub plans: Vec<Plan>,
}

fn point(k: usize) -> Expr {
    Expr::Lit(Literal::Int(k as i64))
}

pub fn instrument(t: &TestMethodModel) -> Instrumented {
    let mut base = t.clone();
    let mut plans = Vec::new();
    for k in 0..base.statements.len() {
        let s = base.statements[k].clone();
        let receiver = s
            .receiver()
            .filter(|r| matches!(r, Expr::Var(v) if !PSEUDO_VARIABLES.contains(&v.as_str())))
            .cloned();
        let retval = match s.kind {
            StatementKind::Assignment if s.call().is_some() => s.target().map(str::to_string),
            StatementKind::Invocation => {
                let tmp = base.fresh_temp();
                let e = Expr::Assign { target: tmp.clone(), value: Box::new(s.expr().clone()) };
                base.statements[k] = Statement::new(StatementKind::Assignment, e);
                Some(tmp)
            }
            _ => None,
        };
        plans.push(Plan { receiver, retval });
    }
    let mut test = base.clone();
    test.statements = base
        .statements
        .iter()
        .zip(&plans)
        .enumerate()
        .map(|(k, (s, plan))| {
            let mut body = vec![s.node.clone()];
            if let Some(r) = &plan.receiver {
                body.push(self_send("observe:at:", vec![r.clone(), point(k)]));
            }
            if let Some(v) = &plan.retval {
                body.push(self_send("observeRetVal:at:", vec![var(v), point(k)]));
            }
            let handler = block(
                vec![self_send("observeException:at:", vec![var("ex"), point(k)]), Stmt::Return(var("self"))],
                vec!["ex".into()],
            );
            Statement::raw(Stmt::Expr(send(block(body, vec![]), "on:do:", vec![var("Error"), handler])))
        })
        .collect();
    Instrumented { test, base, plans }
}

struct ObserveHook<'c> {
    cfg: &'c AmplificationConfig,
    traces: Rc<RefCell<Traces>>,
    receivers: BTreeMap<usize, Value>,
    accessors: BTreeMap<String, Vec<String>>,
}

impl ObserveHook<'_> {
    fn accessors_of(&mut self, image: &Image, class: &str) -> Vec<String> {
        self.accessors
            .entry(class.to_string())
            .or_insert_with(|| identify_accessors(image, class, self.cfg).into_iter().map(|a| a.selector).collect())
            .clone()
    }

    fn serialize(&mut self, interp: &mut Interpreter<'_>, v: &Value, depth: usize) -> Result<ObservationNode, Unwind> {
        let type_name = v.type_name();
        if let Some(lit) = v.as_primitive() {
            let finite = !matches!(lit, Literal::Float(f) if !f.is_finite());
            return Ok(ObservationNode::leaf(type_name, finite.then_some(lit)));
        }
        let mut node = ObservationNode::leaf(type_name, None);
        if depth >= self.cfg.n_serialization {
            return Ok(node);
        }
        let mut steps: Vec<(Step, Value)> = Vec::new();
        match v {
            Value::Array(_) | Value::List(_) => {
                let items = interp.elements(v).unwrap_or_default();
                steps.push((Step::Size, Value::Int(items.len() as i64)));
                for (i, item) in items.into_iter().take(COLLECTION_CAP).enumerate() {
                    steps.push((Step::At(Literal::Int(i as i64 + 1)), item));
                }
            }
            Value::Dict(_) => {
                let entries = interp.dict_entries(v).unwrap_or_default();
                steps.push((Step::Size, Value::Int(entries.len() as i64)));
                let mut keyed: Vec<(Literal, Value)> =
                    entries.into_iter().filter_map(|(k, val)| k.as_primitive().map(|k| (k, val))).collect();
                keyed.sort_by_key(|(k, _)| literal_to_source(k));
                for (k, val) in keyed.into_iter().take(COLLECTION_CAP) {
                    steps.push((Step::At(k), val));
                }
            }
            Value::Object(o) if !o.class.builtin => {
                let class = o.class.name.clone();
                for sel in self.accessors_of(interp.image(), &class) {
                    match interp.send(v.clone(), &sel, vec![]) {
                        Ok(child) => steps.push((Step::Accessor(sel), child)),
                        Err(Unwind::Signal(_)) => {}
                        Err(other) => return Err(other),
                    }
                }
            }
            _ => {}
        }
        for (step, child) in steps {
            let c = self.serialize(interp, &child, depth + 1)?;
            node.children.push((step, c));
        }
        Ok(node)
    }
}

impl Hook for ObserveHook<'_> {
    fn primitive(&mut self, interp: &mut Interpreter<'_>, name: &str, _receiver: &Value, args: &[Value]) -> Result<Value, Unwind> {
        let (Some(subject), Some(Value::Int(k))) = (args.first(), args.get(1)) else { return Ok(Value::Nil) };
        let k = *k as usize;
        let (kind, node) = match name {
            "observe" => {
                self.receivers.insert(k, subject.clone());
                (PointKind::ReceiverState, self.serialize(interp, subject, 0)?)
            }
            "observeRetVal" => {
                if self.receivers.get(&k).is_some_and(|r| r.identical(subject)) {
                    return Ok(Value::Nil);
                }
                (PointKind::ReturnValue, self.serialize(interp, subject, 0)?)
            }
            "observeException" => {
                let (class, _) = interp.exception_info(subject);
                (PointKind::Exception, ObservationNode::leaf(class, None))
            }
            _ => return Ok(Value::Nil),
        };
        self.traces.borrow_mut().insert(PointId { statement: k, kind }, node);
        Ok(Value::Nil)
    }
}

fn exception_points(t: &Traces) -> Vec<usize> {
    t.keys().filter(|p| p.kind == PointKind::Exception).map(|p| p.statement).collect()
}

/// Runs the instrumented test `n_flakiness` times and merges the traces.
pub fn collect_traces(
    image: &Image,
    test_class: &str,
    inst: &Instrumented,
    cfg: &AmplificationConfig,
) -> Result<Traces, AssertAmpError> {
    let method = inst.test.to_method();
    let mut merged: Option<Traces> = None;
    for _ in 0..cfg.n_flakiness.max(1) {
        let traces = Rc::new(RefCell::new(Traces::new()));
        let hook = ObserveHook { cfg, traces: traces.clone(), receivers: BTreeMap::new(), accessors: BTreeMap::new() };
        let out = run_test(image, test_class, &method, RunOptions::new(cfg), Some(Box::new(hook)));
        if !out.verdict.passed() {
            return Err(AssertAmpError::RunFailed(out.verdict));
        }
        let run = traces.take();
        merged = Some(match merged {
            None => run,
            Some(prev) => {
                if exception_points(&prev) != exception_points(&run) {
                    return Err(AssertAmpError::Inconsistent);
                }
                prev.iter()
                    .filter_map(|(p, a)| run.get(p).and_then(|b| merge_nodes(a, b)).map(|m| (*p, m)))
                    .collect()
            }
        });
    }
    Ok(merged.unwrap_or_default())
}

fn assertion(selector: &str, args: Vec<Expr>) -> Statement {
    Statement::new(StatementKind::Assertion, send(var("self"), selector, args))
}

fn class_assertion(e: Expr, type_name: &str) -> Statement {
    assertion("assert:equals:", vec![send(e, "class", vec![]), var(type_name)])
}

/// Assertions for `node` reached through `e`, parents before children.
pub fn node_assertions(e: &Expr, node: &ObservationNode, out: &mut Vec<Statement>) {
    if node.type_name.ends_with(" class") {
        return;
    }
    if node.flaky {
        out.push(class_assertion(e.clone(), &node.type_name));
        return;
    }
    match &node.value {
        Some(Literal::Nil) => out.push(assertion("assert:", vec![send(e.clone(), "isNil", vec![])])),
        Some(Literal::Bool(true)) => out.push(assertion("assert:", vec![e.clone()])),
        Some(Literal::Bool(false)) => out.push(assertion("deny:", vec![e.clone()])),
        Some(lit) => out.push(assertion("assert:equals:", vec![e.clone(), Expr::Lit(lit.clone())])),
        None => out.push(class_assertion(e.clone(), &node.type_name)),
    }
    for (step, child) in &node.children {
        let ce = match step {
            Step::Accessor(sel) => send(e.clone(), sel, vec![]),
            Step::Size => send(e.clone(), "size", vec![]),
            Step::At(k) => send(e.clone(), "at:", vec![Expr::Lit(k.clone())]),
        };
        node_assertions(&ce, child, out);
    }
}

/// Rebuilds the input with assertions after each observed statement. A
/// statement that raised becomes a `should:raise:` assertion and ends the
/// test.
pub fn generate_assertions(t: &TestMethodModel, inst: &Instrumented, traces: &Traces) -> TestMethodModel {
    let mut out = t.clone();
    out.statements.clear();
    let mut temps_used = Vec::new();
    for (k, original) in t.statements.iter().enumerate() {
        if let Some(ex) = traces.get(&PointId { statement: k, kind: PointKind::Exception }) {
            let guarded = block(vec![original.node.clone()], vec![]);
            out.statements.push(assertion("should:raise:", vec![guarded, var(&ex.type_name)]));
            break;
        }
        let plan = &inst.plans[k];
        let mut checks = Vec::new();
        if let (Some(r), Some(node)) = (&plan.receiver, traces.get(&PointId { statement: k, kind: PointKind::ReceiverState })) {
            node_assertions(r, node, &mut checks);
        }
        let mut rebound = false;
        if let (Some(v), Some(node)) = (&plan.retval, traces.get(&PointId { statement: k, kind: PointKind::ReturnValue })) {
            let before = checks.len();
            node_assertions(&var(v), node, &mut checks);
            rebound = checks.len() > before && original.kind == StatementKind::Invocation;
            if rebound {
                temps_used.push(v.clone());
            }
        }
        out.statements.push(if rebound { inst.base.statements[k].clone() } else { original.clone() });
        out.statements.extend(checks);
    }
    out.temps.extend(temps_used);
    out
}

/// Instruments, observes and regenerates assertions for one input, keeping
/// the result only if it passes on the unmodified code.
pub fn amplify_assertions(
    image: &Image,
    test_class: &str,
    t: &TestMethodModel,
    cfg: &AmplificationConfig,
) -> Result<TestMethodModel, AssertAmpError> {
    let inst = instrument(t);
    let traces = collect_traces(image, test_class, &inst, cfg)?;
    let out = generate_assertions(t, &inst, &traces);
    let verdict = run_test(image, test_class, &out.to_method(), RunOptions::new(cfg), None).verdict;
    if !verdict.passed() {
        return Err(AssertAmpError::NotGreen(verdict));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(t: &str, v: Option<Literal>) -> ObservationNode {
        ObservationNode::leaf(t.into(), v)
    }

    #[test]
    fn merge_marks_value_changes_flaky_and_drops_type_changes() {
        let a = ObservationNode {
            children: vec![
                (Step::Accessor("x".into()), leaf("Integer", Some(Literal::Int(1)))),
                (Step::Accessor("y".into()), leaf("Integer", Some(Literal::Int(2)))),
                (Step::Accessor("z".into()), leaf("Integer", Some(Literal::Int(3)))),
            ],
            ..leaf("Foo", None)
        };
        let b = ObservationNode {
            children: vec![
                (Step::Accessor("x".into()), leaf("Integer", Some(Literal::Int(1)))),
                (Step::Accessor("y".into()), leaf("Integer", Some(Literal::Int(5)))),
                (Step::Accessor("z".into()), leaf("String", Some(Literal::Str("3".into())))),
            ],
            ..leaf("Foo", None)
        };
        let m = merge_nodes(&a, &b).unwrap();
        assert!(!m.flaky);
        assert_eq!(m.children.len(), 2);
        assert!(!m.children[0].1.flaky);
        assert!(m.children[1].1.flaky);
        assert!(merge_nodes(&a, &leaf("Bar", None)).is_none());
    }

    #[test]
    fn predicate_names_need_a_capital_after_the_prefix() {
        assert!(is_predicate_name("isEmpty"));
        assert!(is_predicate_name("hasItems"));
        assert!(!is_predicate_name("island"));
        assert!(!is_predicate_name("is"));
    }
}
