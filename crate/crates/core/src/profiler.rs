//! Runtime type profiling.
//!
//! Two observers run together while the original tests execute once: method
//! wrappers on the class under test record argument types and primitive
//! argument values, and a source-level rewrite of each test reports the value
//! of every variable after each statement that mentions it.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;
use std::sync::{Arc, Mutex};

use ampforge_lang::{
    ArgInfo, BlockExpr, CallObserver, Expr, Hook, Image, Interpreter, Literal, Method, MethodDef, MethodKey, Stmt, Unwind, Value,
    WrapError,
};
use serde_json::json;
use thiserror::Error;

use crate::config::AmplificationConfig;
use crate::runner::{run_test, RunOptions, Verdict};
use crate::syntax::{self_send, var};
use crate::test_model::TestMethodModel;

/// At most this many distinct sample values are kept per observation.
pub const SAMPLE_CAP: usize = 32;

static PROFILE_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeObservation {
    pub type_names: BTreeSet<String>,
    /// Distinct primitive values in first-seen order.
    pub samples: Vec<Literal>,
}

impl TypeObservation {
    fn record(&mut self, type_name: &str, value: Option<Literal>) {
        self.type_names.insert(type_name.to_string());
        if let Some(v) = value.filter(is_sample) {
            if self.samples.len() < SAMPLE_CAP && !self.samples.contains(&v) {
                self.samples.push(v);
            }
        }
    }
}

fn is_sample(lit: &Literal) -> bool {
    matches!(lit, Literal::Int(_) | Literal::Float(_) | Literal::Bool(_) | Literal::Str(_) | Literal::Sym(_))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamKey {
    pub method: MethodKey,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct VarKey {
    pub test: String,
    pub var: String,
    /// Index of the statement after which the value was seen.
    pub statement: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TypeProfile {
    pub params: BTreeMap<ParamKey, TypeObservation>,
    pub vars: BTreeMap<VarKey, TypeObservation>,
    pub covered: BTreeSet<MethodKey>,
    /// Methods that could not be wrapped, with the reason.
    pub skipped: Vec<(MethodKey, String)>,
}

impl TypeProfile {
    pub fn param(&self, method: &MethodKey, index: usize) -> Option<&TypeObservation> {
        self.params.get(&ParamKey { method: method.clone(), index })
    }

    /// Types a variable of `test` held at any point.
    pub fn var_types(&self, test: &str, var: &str) -> BTreeSet<String> {
        self.vars
            .iter()
            .filter(|(k, _)| k.test == test && k.var == var)
            .flat_map(|(_, o)| o.type_names.iter().cloned())
            .collect()
    }

    /// Debug dump: `"Class.method[i]"` → `{types, samples}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut out = serde_json::Map::new();
        for (k, o) in &self.params {
            let side = if k.method.class_side { " class" } else { "" };
            let name = format!("{}{}.{}[{}]", k.method.class, side, k.method.selector, k.index);
            out.insert(name, json!({ "types": o.type_names, "samples": o.samples }));
        }
        serde_json::Value::Object(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub method: MethodKey,
    pub receiver_type: String,
    pub args: Vec<ArgInfo>,
}

/// Collects the calls reported by installed wrappers.
#[derive(Debug, Default)]
pub struct CallLog {
    records: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn records(&self) -> Vec<CallRecord> {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl CallObserver for CallLog {
    fn on_call(&self, key: &MethodKey, receiver_type: &str, args: &[ArgInfo]) {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).push(CallRecord {
            method: key.clone(),
            receiver_type: receiver_type.to_string(),
            args: args.to_vec(),
        });
    }
}

/// Installed wrappers; dropping the handle removes them.
pub struct WrapHandle<'a> {
    image: &'a Image,
    keys: Vec<MethodKey>,
    pub skipped: Vec<(MethodKey, String)>,
    pub log: Arc<CallLog>,
}

impl WrapHandle<'_> {
    pub fn wrapped(&self) -> &[MethodKey] {
        &self.keys
    }

    pub fn revert(mut self) {
        self.remove_all();
    }

    fn remove_all(&mut self) {
        for key in self.keys.drain(..) {
            self.image.remove_wrapper(&key);
        }
    }
}

impl Drop for WrapHandle<'_> {
    fn drop(&mut self) {
        self.remove_all();
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("test `{test}` does not pass on the original code: {reason}")]
    RedTest { test: String, reason: String },
}

/// Public methods defined by `class` itself on one side, name-sorted.
pub fn public_methods(image: &Image, class: &str, class_side: bool, cfg: &AmplificationConfig) -> Vec<Arc<Method>> {
    image
        .class(class)
        .map(|c| c.side(class_side).values().filter(|m| !cfg.is_private(&m.def)).cloned().collect())
        .unwrap_or_default()
}

/// Public instance methods `class` understands through user-defined classes,
/// nearest definition first, name-sorted.
pub fn callable_methods(image: &Image, class: &str, cfg: &AmplificationConfig) -> Vec<Arc<Method>> {
    let mut seen = BTreeMap::new();
    for c in image.ancestry(class) {
        if c.builtin {
            break;
        }
        for (sel, m) in &c.methods {
            seen.entry(sel.clone()).or_insert_with(|| m.clone());
        }
    }
    seen.into_values().filter(|m| !cfg.is_private(&m.def)).collect()
}

/// Wraps every public method of `cut`, both sides.
pub fn wrap_methods<'a>(image: &'a Image, cut: &str, cfg: &AmplificationConfig) -> Result<WrapHandle<'a>, ProfileError> {
    if image.class(cut).is_none() {
        return Err(ProfileError::UnknownClass(cut.into()));
    }
    let log = Arc::new(CallLog::default());
    let mut handle = WrapHandle { image, keys: vec![], skipped: vec![], log: log.clone() };
    for side in [false, true] {
        for m in public_methods(image, cut, side, cfg) {
            match image.install_wrapper(&m.key, log.clone()) {
                Ok(()) => handle.keys.push(m.key.clone()),
                Err(WrapError::Primitive) => handle.skipped.push((m.key.clone(), "primitive method".into())),
                Err(e) => handle.skipped.push((m.key.clone(), format!("{e:?}"))),
            }
        }
    }
    Ok(handle)
}

/// Public methods of `cut` never entered while profiling, name-sorted by label.
pub fn uncovered_methods(p: &TypeProfile, image: &Image, cut: &str, cfg: &AmplificationConfig) -> Vec<String> {
    let mut out: Vec<String> = [false, true]
        .into_iter()
        .flat_map(|side| public_methods(image, cut, side, cfg))
        .filter(|m| !p.covered.contains(&m.key))
        .map(|m| m.key.label())
        .collect();
    out.sort();
    out
}

struct VarHook {
    test: String,
    vars: Rc<RefCell<BTreeMap<VarKey, TypeObservation>>>,
}

impl Hook for VarHook {
    fn primitive(&mut self, _: &mut Interpreter<'_>, name: &str, _: &Value, args: &[Value]) -> Result<Value, Unwind> {
        if name == "profileVar" {
            if let (Some(Value::Str(var)), Some(Value::Int(k)), Some(value)) = (args.first(), args.get(1), args.get(2)) {
                let key = VarKey { test: self.test.clone(), var: var.to_string(), statement: *k as usize };
                self.vars.borrow_mut().entry(key).or_default().record(&value.type_name(), value.as_primitive());
            }
        }
        Ok(Value::Nil)
    }
}

fn profile_stmt(name: &str, k: usize) -> Stmt {
    self_send(
        "profileVar:at:value:",
        vec![Expr::Lit(Literal::Str(name.into())), Expr::Lit(Literal::Int(k as i64)), var(name)],
    )
}

/// Rewrites a test so that it reports variable values after each statement.
/// `tracked` are the names worth reporting: temporaries and instance variables.
pub fn instrument_variables(t: &TestMethodModel, tracked: &BTreeSet<String>) -> MethodDef {
    let mut body = Vec::new();
    for (k, s) in t.statements.iter().enumerate() {
        let node = match &s.node {
            Stmt::Expr(e) => Stmt::Expr(instrument_blocks(e, k, tracked, &mut Vec::new())),
            Stmt::Return(_) => {
                body.push(s.node.clone());
                continue;
            }
        };
        body.push(node);
        for v in s.variables() {
            if tracked.contains(&v) {
                body.push(profile_stmt(&v, k));
            }
        }
    }
    MethodDef { body, ..t.to_method() }
}

fn instrument_blocks(e: &Expr, k: usize, tracked: &BTreeSet<String>, shadow: &mut Vec<String>) -> Expr {
    let mut map = |x: &Expr| instrument_blocks(x, k, tracked, shadow);
    match e {
        Expr::Lit(_) | Expr::Var(_) => e.clone(),
        Expr::Assign { target, value } => Expr::Assign { target: target.clone(), value: Box::new(map(value)) },
        Expr::Send { receiver, selector, args } => {
            let receiver = Box::new(map(receiver));
            let args = args.iter().map(map).collect();
            Expr::Send { receiver, selector: selector.clone(), args }
        }
        Expr::Cascade { receiver, messages } => {
            let receiver = Box::new(map(receiver));
            let messages = messages
                .iter()
                .map(|m| ampforge_lang::Message { selector: m.selector.clone(), args: m.args.iter().map(&mut map).collect() })
                .collect();
            Expr::Cascade { receiver, messages }
        }
        Expr::Brace(items) => Expr::Brace(items.iter().map(map).collect()),
        Expr::Block(b) => {
            let mark = shadow.len();
            shadow.extend(b.params.iter().chain(&b.temps).cloned());
            let n = b.body.len();
            let mut body = Vec::new();
            for (i, s) in b.body.iter().enumerate() {
                let rewritten = match s {
                    Stmt::Expr(e) => Stmt::Expr(instrument_blocks(e, k, tracked, shadow)),
                    Stmt::Return(e) => Stmt::Return(instrument_blocks(e, k, tracked, shadow)),
                };
                body.push(rewritten);
                if let Stmt::Expr(Expr::Assign { target, .. }) = s {
                    if tracked.contains(target) && !shadow.contains(target) {
                        body.push(profile_stmt(target, k));
                        if i + 1 == n {
                            // keep the block's value
                            body.push(Stmt::Expr(var(target)));
                        }
                    }
                }
            }
            shadow.truncate(mark);
            Expr::Block(Arc::new(BlockExpr { params: b.params.clone(), temps: b.temps.clone(), body }))
        }
    }
}

/// Runs every test once with both observers installed. The wrappers are gone
/// when this returns, whatever the outcome.
pub fn profile(
    image: &Image,
    test_class: &str,
    cut: &str,
    tests: &[TestMethodModel],
    cfg: &AmplificationConfig,
) -> Result<TypeProfile, ProfileError> {
    let _guard = PROFILE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let test_ivars: BTreeSet<String> = image
        .class(test_class)
        .ok_or_else(|| ProfileError::UnknownClass(test_class.into()))?
        .all_ivars
        .iter()
        .cloned()
        .collect();
    let handle = wrap_methods(image, cut, cfg)?;
    let vars = Rc::new(RefCell::new(BTreeMap::new()));
    let mut covered = BTreeSet::new();
    for t in tests {
        let mut tracked = test_ivars.clone();
        tracked.extend(t.temps.iter().cloned());
        let method = instrument_variables(t, &tracked);
        let hook = VarHook { test: t.name.clone(), vars: vars.clone() };
        let out = run_test(image, test_class, &method, RunOptions::new(cfg).with_coverage(), Some(Box::new(hook)));
        if out.verdict != Verdict::Pass {
            return Err(ProfileError::RedTest { test: t.name.clone(), reason: format!("{:?}", out.verdict) });
        }
        covered.extend(out.coverage.into_iter().filter(|k| k.class == cut));
    }
    let log = handle.log.clone();
    let skipped = handle.skipped.clone();
    handle.revert();

    let mut params: BTreeMap<ParamKey, TypeObservation> = BTreeMap::new();
    for r in log.records() {
        covered.insert(r.method.clone());
        for (index, a) in r.args.iter().enumerate() {
            params
                .entry(ParamKey { method: r.method.clone(), index })
                .or_default()
                .record(&a.type_name, a.primitive.clone());
        }
    }
    let vars = vars.borrow().clone();
    Ok(TypeProfile { params, vars, covered, skipped })
}

/// Types each temporary of `t` held during one run, without wrapping the
/// class under test.
pub fn temp_types(
    image: &Image,
    test_class: &str,
    t: &TestMethodModel,
    cfg: &AmplificationConfig,
) -> BTreeMap<String, BTreeSet<String>> {
    let tracked: BTreeSet<String> = t.temps.iter().cloned().collect();
    let vars = Rc::new(RefCell::new(BTreeMap::new()));
    let hook = VarHook { test: t.name.clone(), vars: vars.clone() };
    run_test(image, test_class, &instrument_variables(t, &tracked), RunOptions::new(cfg), Some(Box::new(hook)));
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (k, o) in vars.borrow().iter() {
        out.entry(k.var.clone()).or_default().extend(o.type_names.iter().cloned());
    }
    out
}
