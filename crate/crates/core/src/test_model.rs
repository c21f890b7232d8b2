//! Test methods as ordered statement sequences.
//!
//! Parsing splits nested message sends into single-send statements that bind
//! generated `tmp<k>` temporaries, so that later passes can observe and
//! transform one call at a time. Statements containing blocks, returns and
//! other shapes the model does not understand are kept verbatim as `Raw`.

use std::collections::BTreeSet;

use ampforge_lang::printer::{method_to_source, stmt_to_source};
use ampforge_lang::ast::arity;
use ampforge_lang::{parse_file, parse_methods, Expr, Image, Literal, MethodDef, ParseError, Stmt};
use serde::Serialize;
use thiserror::Error;

use crate::syntax::{contains_block, stmt_expr, visit_stmt_vars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Assignment,
    Invocation,
    Assertion,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralKind {
    Number,
    Boolean,
    String,
}

/// A literal inside a statement. `path` walks from the statement expression:
/// child 0 of an assignment is its value, child 0 of a send its receiver and
/// child `i` its `i`-th argument, and elements of braces and literal arrays
/// are numbered from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralSite {
    pub path: Vec<usize>,
    pub value: Literal,
}

impl LiteralSite {
    pub fn kind(&self) -> LiteralKind {
        match self.value {
            Literal::Bool(_) => LiteralKind::Boolean,
            Literal::Str(_) => LiteralKind::String,
            _ => LiteralKind::Number,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub kind: StatementKind,
    pub node: Stmt,
}

impl Statement {
    pub fn new(kind: StatementKind, expr: Expr) -> Self {
        Statement { kind, node: Stmt::Expr(expr) }
    }

    pub fn raw(node: Stmt) -> Self {
        Statement { kind: StatementKind::Raw, node }
    }

    pub fn expr(&self) -> &Expr {
        stmt_expr(&self.node)
    }

    pub fn target(&self) -> Option<&str> {
        match (self.kind, self.expr()) {
            (StatementKind::Assignment, Expr::Assign { target, .. }) => Some(target),
            _ => None,
        }
    }

    /// The statement's single message send, if it has one.
    pub fn call(&self) -> Option<(&Expr, &str, &[Expr])> {
        if self.kind == StatementKind::Raw {
            return None;
        }
        let e = match self.expr() {
            Expr::Assign { value, .. } => value.as_ref(),
            e => e,
        };
        match e {
            Expr::Send { receiver, selector, args } => Some((receiver, selector, args)),
            _ => None,
        }
    }

    pub fn receiver(&self) -> Option<&Expr> {
        self.call().map(|c| c.0)
    }

    pub fn selector(&self) -> Option<&str> {
        self.call().map(|c| c.1)
    }

    pub fn args(&self) -> &[Expr] {
        self.call().map_or(&[], |c| c.2)
    }

    /// Number, boolean and string literals, in evaluation order. Raw
    /// statements and assertions expose none.
    pub fn literal_sites(&self) -> Vec<LiteralSite> {
        let mut out = Vec::new();
        if matches!(self.kind, StatementKind::Raw | StatementKind::Assertion) {
            return out;
        }
        collect_literals(self.expr(), &mut Vec::new(), &mut out);
        out
    }

    /// Copy with the literal at `path` replaced.
    pub fn with_literal(&self, path: &[usize], value: Literal) -> Statement {
        let expr = replace_at(self.expr(), path, value);
        Statement { kind: self.kind, node: Stmt::Expr(expr) }
    }

    pub fn render(&self) -> String {
        stmt_to_source(&self.node)
    }

    /// Variables read or written anywhere in the statement.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        visit_stmt_vars(&self.node, &mut |v, _| {
            out.insert(v.to_string());
        });
        out
    }
}

fn collect_literals(e: &Expr, path: &mut Vec<usize>, out: &mut Vec<LiteralSite>) {
    let child = |i: usize, e: &Expr, path: &mut Vec<usize>, out: &mut Vec<LiteralSite>| {
        path.push(i);
        collect_literals(e, path, out);
        path.pop();
    };
    match e {
        Expr::Lit(lit) => collect_literal(lit, path, out),
        Expr::Assign { value, .. } => child(0, value, path, out),
        Expr::Send { receiver, args, .. } => {
            child(0, receiver, path, out);
            for (i, a) in args.iter().enumerate() {
                child(i + 1, a, path, out);
            }
        }
        Expr::Brace(items) => {
            for (i, a) in items.iter().enumerate() {
                child(i, a, path, out);
            }
        }
        Expr::Var(_) | Expr::Cascade { .. } | Expr::Block(_) => {}
    }
}

fn collect_literal(lit: &Literal, path: &mut Vec<usize>, out: &mut Vec<LiteralSite>) {
    match lit {
        Literal::Int(_) | Literal::Float(_) | Literal::Bool(_) | Literal::Str(_) => {
            out.push(LiteralSite { path: path.clone(), value: lit.clone() })
        }
        Literal::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                path.push(i);
                collect_literal(item, path, out);
                path.pop();
            }
        }
        Literal::Nil | Literal::Sym(_) => {}
    }
}

fn replace_at(e: &Expr, path: &[usize], value: Literal) -> Expr {
    let Some((&i, rest)) = path.split_first() else {
        return Expr::Lit(value);
    };
    match e {
        Expr::Assign { target, value: v } => {
            Expr::Assign { target: target.clone(), value: Box::new(replace_at(v, rest, value)) }
        }
        Expr::Send { receiver, selector, args } => {
            let mut receiver = receiver.clone();
            let mut args = args.clone();
            if i == 0 {
                *receiver = replace_at(&receiver, rest, value);
            } else {
                args[i - 1] = replace_at(&args[i - 1], rest, value);
            }
            Expr::Send { receiver, selector: selector.clone(), args }
        }
        Expr::Brace(items) => {
            let mut items = items.clone();
            items[i] = replace_at(&items[i], rest, value);
            Expr::Brace(items)
        }
        Expr::Lit(lit) => Expr::Lit(replace_in_literal(lit, path, value)),
        other => other.clone(),
    }
}

fn replace_in_literal(lit: &Literal, path: &[usize], value: Literal) -> Literal {
    match (path.split_first(), lit) {
        (None, _) => value,
        (Some((&i, rest)), Literal::Array(items)) => {
            let mut items = items.clone();
            items[i] = replace_in_literal(&items[i], rest, value);
            Literal::Array(items)
        }
        _ => lit.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transformation {
    pub amplifier: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestMethodModel {
    pub name: String,
    pub temps: Vec<String>,
    pub statements: Vec<Statement>,
    /// Name of the original test this one descends from.
    pub parent: String,
    pub history: Vec<Transformation>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("no test method named `{0}`")]
    NotFound(String),
}

/// Parses `name` out of `source`, which may be a class file or a sequence of
/// bare method definitions.
pub fn parse_test_method(source: &str, name: &str, assertion_forms: &[String]) -> Result<TestMethodModel, ModelError> {
    let methods = match parse_file(source) {
        Ok(file) => file.classes.into_iter().flat_map(|c| c.methods).collect(),
        Err(file_err) => match parse_methods(source) {
            Ok(methods) => methods,
            Err(method_err) => {
                let far = |e: &ParseError| (e.pos.line, e.pos.column);
                return Err(if far(&file_err) >= far(&method_err) { file_err } else { method_err }.into());
            }
        },
    };
    let def = methods.into_iter().find(|m| m.selector == name).ok_or_else(|| ModelError::NotFound(name.into()))?;
    Ok(TestMethodModel::from_method(&def, assertion_forms))
}

/// Unary `test*` methods defined by `class` itself, name-sorted.
pub fn test_methods(image: &Image, class: &str, assertion_forms: &[String]) -> Vec<TestMethodModel> {
    image
        .class(class)
        .map(|c| {
            c.methods
                .values()
                .filter(|m| m.def.selector.starts_with("test") && arity(&m.def.selector) == 0)
                .map(|m| TestMethodModel::from_method(&m.def, assertion_forms))
                .collect()
        })
        .unwrap_or_default()
}

pub fn is_assertion(e: &Expr, assertion_forms: &[String]) -> bool {
    matches!(e, Expr::Send { receiver, selector, .. }
        if matches!(receiver.as_ref(), Expr::Var(v) if v == "self") && assertion_forms.iter().any(|f| f == selector))
}

impl TestMethodModel {
    pub fn from_method(def: &MethodDef, assertion_forms: &[String]) -> Self {
        let mut used = BTreeSet::new();
        used.extend(def.temps.iter().cloned());
        for s in &def.body {
            visit_stmt_vars(s, &mut |v, _| {
                used.insert(v.to_string());
            });
        }
        let mut splitter = Splitter { forms: assertion_forms, used, temps: def.temps.clone(), next: 0, out: vec![] };
        for s in &def.body {
            splitter.stmt(s);
        }
        TestMethodModel {
            name: def.selector.clone(),
            temps: splitter.temps,
            statements: splitter.out,
            parent: def.selector.clone(),
            history: vec![],
        }
    }

    pub fn to_method(&self) -> MethodDef {
        MethodDef {
            selector: self.name.clone(),
            params: vec![],
            temps: self.temps.clone(),
            pragmas: vec![],
            body: self.statements.iter().map(|s| s.node.clone()).collect(),
        }
    }

    pub fn render(&self) -> String {
        self.render_at(0)
    }

    /// Renders the method indented `depth` levels, as inside a class body.
    pub fn render_at(&self, depth: usize) -> String {
        method_to_source(&self.to_method(), depth)
    }

    /// Same name, temporaries and statements; history is not compared.
    pub fn same_code(&self, other: &TestMethodModel) -> bool {
        self.name == other.name && self.temps == other.temps && self.statements == other.statements
    }

    pub fn count(&self, kind: StatementKind) -> usize {
        self.statements.iter().filter(|s| s.kind == kind).count()
    }

    /// Every variable name used in the method, temporaries included.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.temps.iter().cloned().collect();
        for s in &self.statements {
            out.extend(s.variables());
        }
        out
    }

    /// Declares and returns an unused `tmp<k>` name.
    pub fn fresh_temp(&mut self) -> String {
        let used = self.variables();
        let name = (1..).map(|k| format!("tmp{k}")).find(|n| !used.contains(n)).expect("unbounded range");
        self.temps.push(name.clone());
        name
    }

    /// A derived copy: new name, one more history entry.
    pub fn derive(&self, name: String, amplifier: &str, detail: String) -> TestMethodModel {
        let mut t = self.clone();
        t.name = name;
        t.history.push(Transformation { amplifier: amplifier.into(), detail });
        t
    }
}

/// Removes every assertion statement, keeping everything else in order.
pub fn strip_assertions(m: &TestMethodModel) -> TestMethodModel {
    let mut out = m.clone();
    out.statements.retain(|s| s.kind != StatementKind::Assertion);
    out
}

struct Splitter<'a> {
    forms: &'a [String],
    used: BTreeSet<String>,
    temps: Vec<String>,
    next: usize,
    out: Vec<Statement>,
}

impl Splitter<'_> {
    fn fresh(&mut self) -> String {
        loop {
            self.next += 1;
            let name = format!("tmp{}", self.next);
            if self.used.insert(name.clone()) {
                self.temps.push(name.clone());
                return name;
            }
        }
    }

    fn push(&mut self, kind: StatementKind, e: Expr) {
        self.out.push(Statement::new(kind, e));
    }

    fn stmt(&mut self, s: &Stmt) {
        let e = match s {
            Stmt::Return(_) => return self.out.push(Statement::raw(s.clone())),
            Stmt::Expr(e) => e,
        };
        if is_assertion(e, self.forms) {
            return self.push(StatementKind::Assertion, e.clone());
        }
        if contains_block(e) {
            return self.out.push(Statement::raw(s.clone()));
        }
        match e {
            Expr::Assign { target, value } => {
                let value = match value.as_ref() {
                    Expr::Send { .. } => self.flat_send(value),
                    Expr::Cascade { receiver, messages } => self.cascade(receiver, messages),
                    Expr::Brace(_) => self.operand(value),
                    Expr::Lit(_) | Expr::Var(_) => value.as_ref().clone(),
                    _ => return self.out.push(Statement::raw(s.clone())),
                };
                self.push(StatementKind::Assignment, Expr::Assign { target: target.clone(), value: Box::new(value) });
            }
            Expr::Send { .. } => {
                let call = self.flat_send(e);
                self.push(StatementKind::Invocation, call);
            }
            Expr::Cascade { receiver, messages } => {
                let call = self.cascade(receiver, messages);
                self.push(StatementKind::Invocation, call);
            }
            _ => self.out.push(Statement::raw(s.clone())),
        }
    }

    /// A send whose receiver and arguments no longer contain sends.
    fn flat_send(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Send { receiver, selector, args } => {
                let receiver = self.operand(receiver);
                let args = args.iter().map(|a| self.operand(a)).collect();
                Expr::Send { receiver: Box::new(receiver), selector: selector.clone(), args }
            }
            other => other.clone(),
        }
    }

    /// Hoists sends out of an operand position into earlier statements.
    fn operand(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Send { .. } => {
                let call = self.flat_send(e);
                let tmp = self.fresh();
                self.push(StatementKind::Assignment, Expr::Assign { target: tmp.clone(), value: Box::new(call) });
                Expr::Var(tmp)
            }
            Expr::Cascade { receiver, messages } => {
                let call = self.cascade(receiver, messages);
                let tmp = self.fresh();
                self.push(StatementKind::Assignment, Expr::Assign { target: tmp.clone(), value: Box::new(call) });
                Expr::Var(tmp)
            }
            Expr::Assign { target, value } => {
                let value = self.operand(value);
                self.push(StatementKind::Assignment, Expr::Assign { target: target.clone(), value: Box::new(value) });
                Expr::Var(target.clone())
            }
            Expr::Brace(items) => Expr::Brace(items.iter().map(|i| self.operand(i)).collect()),
            other => other.clone(),
        }
    }

    /// Emits all but the last cascaded message and returns the last one.
    fn cascade(&mut self, receiver: &Expr, messages: &[ampforge_lang::Message]) -> Expr {
        let r = self.operand(receiver);
        let (last, init) = messages.split_last().expect("cascade has messages");
        for m in init {
            let args = m.args.iter().map(|a| self.operand(a)).collect();
            self.push(
                StatementKind::Invocation,
                Expr::Send { receiver: Box::new(r.clone()), selector: m.selector.clone(), args },
            );
        }
        let args = last.args.iter().map(|a| self.operand(a)).collect();
        Expr::Send { receiver: Box::new(r), selector: last.selector.clone(), args }
    }
}
