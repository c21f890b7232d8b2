//! Deterministic source rendering. Output re-parses to an equal tree.

use crate::ast::{keyword_parts, BlockExpr, ClassDef, Expr, Literal, MethodDef, Pragma, Stmt};
use crate::lexer::{is_binary_char, is_ident_char, is_ident_start};

const INDENT: &str = "    ";

pub fn literal_to_source(lit: &Literal) -> String {
    let mut out = String::new();
    write_literal(&mut out, lit, false);
    out
}

pub fn float_to_source(f: f64) -> String {
    let s = format!("{f:?}");
    match s.find('e') {
        Some(i) if !s[..i].contains('.') => format!("{}.0{}", &s[..i], &s[i..]),
        _ => s,
    }
}

fn plain_symbol(s: &str) -> bool {
    if s.is_empty() {
        return false;
    }
    if s.chars().all(|c| is_binary_char(c) || c == '|') {
        return true;
    }
    if !s.starts_with(is_ident_start) {
        return false;
    }
    if !s.contains(':') {
        return s.chars().all(is_ident_char);
    }
    s.ends_with(':')
        && keyword_parts(s).iter().all(|p| {
            let w = &p[..p.len() - 1];
            w.starts_with(is_ident_start) && w.chars().all(is_ident_char)
        })
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn write_literal(out: &mut String, lit: &Literal, in_array: bool) {
    match lit {
        Literal::Nil => out.push_str("nil"),
        Literal::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Literal::Int(i) => out.push_str(&i.to_string()),
        Literal::Float(f) => out.push_str(&float_to_source(*f)),
        Literal::Str(s) => out.push_str(&quote(s)),
        Literal::Sym(s) => {
            out.push('#');
            if plain_symbol(s) {
                out.push_str(s);
            } else {
                out.push_str(&quote(s));
            }
        }
        Literal::Array(items) => {
            out.push_str(if in_array { "(" } else { "#(" });
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_literal(out, item, true);
            }
            out.push(')');
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Assign,
    Cascade,
    Keyword,
    Binary,
    Unary,
    Primary,
}

fn prec(e: &Expr) -> Prec {
    match e {
        Expr::Assign { .. } => Prec::Assign,
        Expr::Cascade { .. } => Prec::Cascade,
        Expr::Send { selector, .. } => selector_prec(selector),
        _ => Prec::Primary,
    }
}

fn selector_prec(selector: &str) -> Prec {
    if selector.ends_with(':') {
        Prec::Keyword
    } else if selector.starts_with(is_binary_char) {
        Prec::Binary
    } else {
        Prec::Unary
    }
}

pub fn expr_to_source(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_at_least(out: &mut String, e: &Expr, min: Prec) {
    if prec(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_message(out: &mut String, selector: &str, args: &[Expr]) {
    match selector_prec(selector) {
        Prec::Unary => {
            out.push(' ');
            out.push_str(selector);
        }
        Prec::Binary => {
            out.push(' ');
            out.push_str(selector);
            out.push(' ');
            write_at_least(out, &args[0], Prec::Unary);
        }
        _ => {
            for (part, arg) in keyword_parts(selector).into_iter().zip(args) {
                out.push(' ');
                out.push_str(part);
                out.push(' ');
                write_at_least(out, arg, Prec::Binary);
            }
        }
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Lit(l) => write_literal(out, l, false),
        Expr::Var(v) => out.push_str(v),
        Expr::Assign { target, value } => {
            out.push_str(target);
            out.push_str(" := ");
            write_expr(out, value);
        }
        Expr::Send { receiver, selector, args } => {
            let min = match selector_prec(selector) {
                Prec::Unary => Prec::Unary,
                _ => Prec::Binary,
            };
            write_at_least(out, receiver, min);
            write_message(out, selector, args);
        }
        Expr::Cascade { receiver, messages } => {
            // parenthesise generously; parentheses never create nodes
            write_at_least(out, receiver, Prec::Primary);
            for (i, m) in messages.iter().enumerate() {
                if i > 0 {
                    out.push(';');
                }
                write_message(out, &m.selector, &m.args);
            }
        }
        Expr::Block(b) => write_block(out, b),
        Expr::Brace(items) => {
            out.push('{');
            for (i, item) in items.iter().enumerate() {
                out.push_str(if i == 0 { " " } else { ". " });
                write_expr(out, item);
            }
            out.push_str(if items.is_empty() { "}" } else { " }" });
        }
    }
}

fn write_block(out: &mut String, b: &BlockExpr) {
    out.push('[');
    for p in &b.params {
        out.push_str(" :");
        out.push_str(p);
    }
    if !b.params.is_empty() {
        out.push_str(" |");
    }
    if !b.temps.is_empty() {
        out.push_str(" | ");
        out.push_str(&b.temps.join(" "));
        out.push_str(" |");
    }
    for (i, s) in b.body.iter().enumerate() {
        out.push_str(if i == 0 { " " } else { ". " });
        write_stmt(out, s);
    }
    out.push_str(" ]");
}

pub fn stmt_to_source(s: &Stmt) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s);
    out
}

fn write_stmt(out: &mut String, s: &Stmt) {
    match s {
        Stmt::Expr(e) => write_expr(out, e),
        Stmt::Return(e) => {
            out.push_str("^ ");
            write_expr(out, e);
        }
    }
}

fn write_pragma(out: &mut String, p: &Pragma) {
    out.push('<');
    if p.args.is_empty() {
        out.push_str(&p.selector);
    } else {
        for (i, (part, arg)) in keyword_parts(&p.selector).into_iter().zip(&p.args).enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(part);
            out.push(' ');
            write_literal(out, arg, false);
        }
    }
    out.push('>');
}

pub fn method_pattern(m: &MethodDef) -> String {
    match selector_prec(&m.selector) {
        Prec::Unary => m.selector.clone(),
        Prec::Binary => format!("{} {}", m.selector, m.params[0]),
        _ => keyword_parts(&m.selector)
            .into_iter()
            .zip(&m.params)
            .map(|(k, p)| format!("{k} {p}"))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Renders a method definition at the given indentation depth.
pub fn method_to_source(m: &MethodDef, depth: usize) -> String {
    let pad = INDENT.repeat(depth);
    let inner = INDENT.repeat(depth + 1);
    let mut out = format!("{pad}{} [\n", method_pattern(m));
    for p in &m.pragmas {
        out.push_str(&inner);
        write_pragma(&mut out, p);
        out.push('\n');
    }
    if !m.temps.is_empty() {
        out.push_str(&format!("{inner}| {} |\n", m.temps.join(" ")));
    }
    let n = m.body.len();
    for (i, s) in m.body.iter().enumerate() {
        out.push_str(&inner);
        write_stmt(&mut out, s);
        if i + 1 < n {
            out.push('.');
        }
        out.push('\n');
    }
    out.push_str(&pad);
    out.push_str("]\n");
    out
}

pub fn class_to_source(c: &ClassDef) -> String {
    let mut out = match &c.superclass {
        Some(sup) => format!("{sup} subclass: {} [\n", c.name),
        None => format!("{} extend [\n", c.name),
    };
    if !c.ivars.is_empty() {
        out.push_str(&format!("{INDENT}| {} |\n", c.ivars.join(" ")));
    }
    for m in &c.class_methods {
        let body = method_to_source(m, 1);
        out.push_str(&format!("{INDENT}{} class >> {}", c.name, body.trim_start()));
    }
    for m in &c.methods {
        out.push('\n');
        out.push_str(&method_to_source(m, 1));
    }
    out.push_str("]\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr, parse_file};

    fn round_trip(src: &str) {
        let e = parse_expr(src).unwrap();
        let printed = expr_to_source(&e);
        assert_eq!(parse_expr(&printed).unwrap(), e, "{src} -> {printed}");
    }

    #[test]
    fn expressions_round_trip() {
        for src in [
            "a foo: (b bar: c) baz: d + e",
            "(a + b) * c",
            "a + (b + c)",
            "a - -3",
            "(x foo; bar) baz",
            "x := y := 3",
            "#(1 #(2 3) #at:put: #+ 'q''s' #'two words')",
            "[:a | a] value: (b := 2)",
            "{ 1. 2 + 3. #x }",
            "1.0e-7 + 2.5",
            "self assert: (b balance = 100)",
        ] {
            round_trip(src);
        }
    }

    #[test]
    fn floats_keep_a_fraction() {
        assert_eq!(float_to_source(1e-7), "1.0e-7");
        assert_eq!(float_to_source(50.0), "50.0");
        assert_eq!(float_to_source(-0.5), "-0.5");
    }

    #[test]
    fn class_round_trip() {
        let src = "Object subclass: P [\n | x y |\n P class >> x: ax y: ay [ ^ self new setX: ax y: ay ]\n setX: ax y: ay [ x := ax. y := ay ]\n + other [ ^ P x: x + other x y: y + other y ]\n x [ <accessing> ^ x ]\n]";
        let a = parse_file(src).unwrap().classes.remove(0);
        let printed = class_to_source(&a);
        let mut b = parse_file(&printed).unwrap().classes.remove(0);
        b.span = a.span;
        assert_eq!(a, b);
    }
}
