//! Small tree utilities shared by the transformation passes.

use std::sync::Arc;

use ampforge_lang::{BlockExpr, Expr, Literal, Message, Stmt};

pub(crate) fn stmt_expr(s: &Stmt) -> &Expr {
    match s {
        Stmt::Expr(e) | Stmt::Return(e) => e,
    }
}

pub(crate) fn contains_block(e: &Expr) -> bool {
    match e {
        Expr::Block(_) => true,
        Expr::Lit(_) | Expr::Var(_) => false,
        Expr::Assign { value, .. } => contains_block(value),
        Expr::Send { receiver, args, .. } => contains_block(receiver) || args.iter().any(contains_block),
        Expr::Cascade { receiver, messages } => {
            contains_block(receiver) || messages.iter().any(|m| m.args.iter().any(contains_block))
        }
        Expr::Brace(items) => items.iter().any(contains_block),
    }
}

pub(crate) fn contains_return(body: &[Stmt]) -> bool {
    fn expr(e: &Expr) -> bool {
        match e {
            Expr::Block(b) => contains_return(&b.body),
            Expr::Lit(_) | Expr::Var(_) => false,
            Expr::Assign { value, .. } => expr(value),
            Expr::Send { receiver, args, .. } => expr(receiver) || args.iter().any(expr),
            Expr::Cascade { receiver, messages } => expr(receiver) || messages.iter().any(|m| m.args.iter().any(expr)),
            Expr::Brace(items) => items.iter().any(expr),
        }
    }
    body.iter().any(|s| matches!(s, Stmt::Return(_)) || expr(stmt_expr(s)))
}

/// Calls `f(name, is_write)` for every variable occurrence, skipping names
/// shadowed by block parameters or temporaries.
pub(crate) fn visit_stmt_vars(s: &Stmt, f: &mut dyn FnMut(&str, bool)) {
    visit(stmt_expr(s), &mut Vec::new(), f)
}

fn visit(e: &Expr, shadow: &mut Vec<String>, f: &mut dyn FnMut(&str, bool)) {
    match e {
        Expr::Lit(_) => {}
        Expr::Var(v) => {
            if !shadow.contains(v) {
                f(v, false)
            }
        }
        Expr::Assign { target, value } => {
            visit(value, shadow, f);
            if !shadow.contains(target) {
                f(target, true)
            }
        }
        Expr::Send { receiver, args, .. } => {
            visit(receiver, shadow, f);
            for a in args {
                visit(a, shadow, f);
            }
        }
        Expr::Cascade { receiver, messages } => {
            visit(receiver, shadow, f);
            for m in messages {
                for a in &m.args {
                    visit(a, shadow, f);
                }
            }
        }
        Expr::Block(b) => {
            let mark = shadow.len();
            shadow.extend(b.params.iter().chain(&b.temps).cloned());
            for s in &b.body {
                visit(stmt_expr(s), shadow, f);
            }
            shadow.truncate(mark);
        }
        Expr::Brace(items) => {
            for i in items {
                visit(i, shadow, f);
            }
        }
    }
}

/// Calls `f` for every literal, looking inside blocks and literal arrays.
pub(crate) fn visit_literals(e: &Expr, f: &mut dyn FnMut(&Literal)) {
    fn lit(l: &Literal, f: &mut dyn FnMut(&Literal)) {
        match l {
            Literal::Array(items) => items.iter().for_each(|i| lit(i, f)),
            other => f(other),
        }
    }
    match e {
        Expr::Lit(l) => lit(l, f),
        Expr::Var(_) => {}
        Expr::Assign { value, .. } => visit_literals(value, f),
        Expr::Send { receiver, args, .. } => {
            visit_literals(receiver, f);
            args.iter().for_each(|a| visit_literals(a, f));
        }
        Expr::Cascade { receiver, messages } => {
            visit_literals(receiver, f);
            messages.iter().flat_map(|m| &m.args).for_each(|a| visit_literals(a, f));
        }
        Expr::Block(b) => b.body.iter().for_each(|s| visit_literals(stmt_expr(s), f)),
        Expr::Brace(items) => items.iter().for_each(|i| visit_literals(i, f)),
    }
}

/// Replaces unshadowed occurrences of variable `name` (reads and writes).
pub(crate) fn rename_var(e: &Expr, name: &str, to: &str) -> Expr {
    let map = |x: &Expr| rename_var(x, name, to);
    match e {
        Expr::Lit(_) => e.clone(),
        Expr::Var(v) => Expr::Var(if v == name { to.to_string() } else { v.clone() }),
        Expr::Assign { target, value } => Expr::Assign {
            target: if target == name { to.to_string() } else { target.clone() },
            value: Box::new(map(value)),
        },
        Expr::Send { receiver, selector, args } => Expr::Send {
            receiver: Box::new(map(receiver)),
            selector: selector.clone(),
            args: args.iter().map(map).collect(),
        },
        Expr::Cascade { receiver, messages } => Expr::Cascade {
            receiver: Box::new(map(receiver)),
            messages: messages
                .iter()
                .map(|m| Message { selector: m.selector.clone(), args: m.args.iter().map(map).collect() })
                .collect(),
        },
        Expr::Block(b) => {
            if b.params.iter().chain(&b.temps).any(|p| p == name) {
                return e.clone();
            }
            Expr::Block(Arc::new(BlockExpr {
                params: b.params.clone(),
                temps: b.temps.clone(),
                body: b.body.iter().map(|s| rename_stmt(s, name, to)).collect(),
            }))
        }
        Expr::Brace(items) => Expr::Brace(items.iter().map(map).collect()),
    }
}

pub(crate) fn rename_stmt(s: &Stmt, name: &str, to: &str) -> Stmt {
    match s {
        Stmt::Expr(e) => Stmt::Expr(rename_var(e, name, to)),
        Stmt::Return(e) => Stmt::Return(rename_var(e, name, to)),
    }
}

pub(crate) fn send(receiver: Expr, selector: &str, args: Vec<Expr>) -> Expr {
    Expr::Send { receiver: Box::new(receiver), selector: selector.to_string(), args }
}

pub(crate) fn var(name: &str) -> Expr {
    Expr::Var(name.to_string())
}

pub(crate) fn self_send(selector: &str, args: Vec<Expr>) -> Stmt {
    Stmt::Expr(send(var("self"), selector, args))
}

pub(crate) fn block(body: Vec<Stmt>, params: Vec<String>) -> Expr {
    Expr::Block(Arc::new(BlockExpr { params, temps: vec![], body }))
}
