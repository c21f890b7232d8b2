//! Syntax tree for the host language.
//!
//! Nodes carry no source positions, so two trees compare equal exactly when
//! they describe the same program. Positions needed by tools (mutation sites)
//! are collected on the side by the parser.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Literal {
    Nil,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Sym(String),
    Array(Vec<Literal>),
}

impl Literal {
    pub fn is_number(&self) -> bool {
        matches!(self, Literal::Int(_) | Literal::Float(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub selector: String,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockExpr {
    pub params: Vec<String>,
    pub temps: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Var(String),
    Assign { target: String, value: Box<Expr> },
    Send { receiver: Box<Expr>, selector: String, args: Vec<Expr> },
    Cascade { receiver: Box<Expr>, messages: Vec<Message> },
    Block(Arc<BlockExpr>),
    Brace(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Expr(Expr),
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pragma {
    pub selector: String,
    pub args: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDef {
    pub selector: String,
    pub params: Vec<String>,
    pub temps: Vec<String>,
    pub pragmas: Vec<Pragma>,
    pub body: Vec<Stmt>,
}

impl MethodDef {
    pub fn has_pragma(&self, name: &str) -> bool {
        self.pragmas.iter().any(|p| p.selector.trim_end_matches(':') == name)
    }

    pub fn primitive(&self) -> Option<&str> {
        self.pragmas.iter().find(|p| p.selector == "primitive:").and_then(|p| match p.args.first() {
            Some(Literal::Str(s)) | Some(Literal::Sym(s)) => Some(s.as_str()),
            _ => None,
        })
    }

    /// True when some statement, at any nesting level, is a `^` return.
    pub fn has_explicit_return(&self) -> bool {
        fn stmts(body: &[Stmt]) -> bool {
            body.iter().any(|s| match s {
                Stmt::Return(_) => true,
                Stmt::Expr(e) => expr(e),
            })
        }
        fn expr(e: &Expr) -> bool {
            match e {
                Expr::Block(b) => stmts(&b.body),
                Expr::Assign { value, .. } => expr(value),
                Expr::Send { receiver, args, .. } => expr(receiver) || args.iter().any(expr),
                Expr::Cascade { receiver, messages } => {
                    expr(receiver) || messages.iter().any(|m| m.args.iter().any(expr))
                }
                Expr::Brace(items) => items.iter().any(expr),
                Expr::Lit(_) | Expr::Var(_) => false,
            }
        }
        stmts(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub name: String,
    /// `None` for `Name extend [ ... ]` blocks.
    pub superclass: Option<String>,
    pub ivars: Vec<String>,
    pub methods: Vec<MethodDef>,
    pub class_methods: Vec<MethodDef>,
    /// Byte range of the whole definition in the file it was parsed from.
    pub span: (usize, usize),
}

impl ClassDef {
    pub fn is_extension(&self) -> bool {
        self.superclass.is_none()
    }
}

/// Number of message sends in an expression, counting cascaded messages.
pub fn count_sends(e: &Expr) -> usize {
    match e {
        Expr::Lit(_) | Expr::Var(_) | Expr::Block(_) => 0,
        Expr::Assign { value, .. } => count_sends(value),
        Expr::Send { receiver, args, .. } => {
            1 + count_sends(receiver) + args.iter().map(count_sends).sum::<usize>()
        }
        Expr::Cascade { receiver, messages } => {
            count_sends(receiver)
                + messages.iter().map(|m| 1 + m.args.iter().map(count_sends).sum::<usize>()).sum::<usize>()
        }
        Expr::Brace(items) => items.iter().map(count_sends).sum(),
    }
}

/// Number of arguments a selector takes.
pub fn arity(selector: &str) -> usize {
    if selector.chars().next().is_some_and(crate::lexer::is_binary_char) {
        1
    } else {
        selector.matches(':').count()
    }
}

/// Splits a keyword selector into its parts: `at:put:` -> `["at:", "put:"]`.
pub fn keyword_parts(selector: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    for (i, c) in selector.char_indices() {
        if c == ':' {
            parts.push(&selector[start..=i]);
            start = i + 1;
        }
    }
    parts
}
