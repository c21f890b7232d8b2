//! Recursive-descent parser.
//!
//! Message precedence is the classic one: unary binds tighter than binary,
//! binary tighter than keyword; binary operators associate to the left with
//! no priority among themselves.
//!
//! Files hold class definitions in bracket syntax:
//!
//! ```text
//! Object subclass: Counter [
//!     | count |
//!     Counter class >> startingAt: n [ ^ self new setCount: n ]
//!     count [ ^ count ]
//!     increment [ count := count + 1 ]
//! ]
//! Counter extend [ reset [ count := 0 ] ]
//! ```

use std::sync::Arc;

use crate::ast::{BlockExpr, ClassDef, Expr, Literal, Message, MethodDef, Pragma, Stmt};
use crate::error::{ParseError, Pos};
use crate::lexer::{tokenize, Token, TokenKind};

/// A syntactic location inside a method body that mutation tools care about.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub class: String,
    pub selector: String,
    pub class_side: bool,
    pub kind: SiteKind,
    /// Byte range in the parsed file.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SiteKind {
    BinarySelector(String),
    BoolLiteral(bool),
    IntLiteral(i64),
    /// A `^ expr` statement; `value_start` is where `expr` begins.
    Return { value_start: usize, returns_self: bool },
    /// A non-return statement.
    Statement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    pub classes: Vec<ClassDef>,
    pub sites: Vec<Site>,
}

pub fn parse_file(src: &str) -> Result<SourceFile, ParseError> {
    let mut p = Parser::new(src)?;
    let mut classes = Vec::new();
    while !p.at(&TokenKind::Eof) {
        classes.push(p.class_def()?);
    }
    Ok(SourceFile { classes, sites: p.sites })
}

/// Parses a sequence of bare method definitions (class-body syntax without
/// the surrounding class).
pub fn parse_methods(src: &str) -> Result<Vec<MethodDef>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while !p.at(&TokenKind::Eof) {
        out.push(p.method_def(false)?);
    }
    Ok(out)
}

/// Parses a statement sequence, e.g. a doit.
pub fn parse_statements(src: &str) -> Result<Vec<Stmt>, ParseError> {
    let mut p = Parser::new(src)?;
    let body = p.statements(&TokenKind::Eof)?;
    p.expect(&TokenKind::Eof, "end of input")?;
    Ok(body)
}

/// Parses a doit: optional `| temps |` followed by statements.
pub fn parse_doit(src: &str) -> Result<(Vec<String>, Vec<Stmt>), ParseError> {
    let mut p = Parser::new(src)?;
    let temps = if p.at(&TokenKind::Bar) { p.temps()? } else { Vec::new() };
    let body = p.statements(&TokenKind::Eof)?;
    p.expect(&TokenKind::Eof, "end of input")?;
    Ok((temps, body))
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect(&TokenKind::Eof, "end of input")?;
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    sites: Vec<Site>,
    context: Option<(String, String, bool)>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        Ok(Parser { src, tokens: tokenize(src)?, pos: 0, sites: Vec::new(), context: None })
    }

    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_n(&self, n: usize) -> &TokenKind {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek() == kind
    }

    fn start(&self) -> usize {
        self.tokens[self.pos].start
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].end
        }
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(Pos::locate(self.src, self.start()), msg)
    }

    fn describe(&self) -> String {
        match self.peek() {
            TokenKind::Eof => "end of input".to_string(),
            _ => {
                let t = &self.tokens[self.pos];
                format!("`{}`", &self.src[t.start..t.end])
            }
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<Token, ParseError> {
        if self.at(kind) {
            Ok(self.advance())
        } else {
            Err(self.error(format!("expected {what}, found {}", self.describe())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            TokenKind::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}, found {}", self.describe()))),
        }
    }

    fn is_binary(&self, op: &str) -> bool {
        matches!(self.peek(), TokenKind::Binary(b) if b == op)
    }

    fn site(&mut self, kind: SiteKind, start: usize, end: usize) {
        if let Some((class, selector, class_side)) = &self.context {
            self.sites.push(Site {
                class: class.clone(),
                selector: selector.clone(),
                class_side: *class_side,
                kind,
                start,
                end,
            });
        }
    }

    fn class_def(&mut self) -> Result<ClassDef, ParseError> {
        let start = self.start();
        let first = self.ident("class definition")?;
        let (name, superclass) = match self.peek().clone() {
            TokenKind::Keyword(k) if k == "subclass:" => {
                self.advance();
                let name = self.ident("class name")?;
                (name, Some(first))
            }
            TokenKind::Ident(k) if k == "extend" => {
                self.advance();
                (first, None)
            }
            _ => {
                return Err(self.error(format!(
                    "expected `subclass:` or `extend`, found {}",
                    self.describe()
                )))
            }
        };
        self.expect(&TokenKind::LBracket, "`[`")?;
        let mut class = ClassDef {
            name: name.clone(),
            superclass,
            ivars: Vec::new(),
            methods: Vec::new(),
            class_methods: Vec::new(),
            span: (start, start),
        };
        loop {
            match self.peek().clone() {
                TokenKind::RBracket => {
                    self.advance();
                    break;
                }
                TokenKind::Bar => {
                    self.advance();
                    while let TokenKind::Ident(v) = self.peek().clone() {
                        self.advance();
                        class.ivars.push(v);
                    }
                    self.expect(&TokenKind::Bar, "`|` closing instance variables")?;
                }
                TokenKind::Ident(n)
                    if n == name
                        && matches!(self.peek_n(1), TokenKind::Ident(c) if c == "class")
                        && matches!(self.peek_n(2), TokenKind::Binary(b) if b == ">>") =>
                {
                    self.pos += 3;
                    self.context = Some((name.clone(), String::new(), true));
                    let m = self.method_def(true)?;
                    class.class_methods.push(m);
                }
                TokenKind::Eof => return Err(self.error(format!("unterminated class `{name}`"))),
                _ => {
                    self.context = Some((name.clone(), String::new(), false));
                    let m = self.method_def(false)?;
                    class.methods.push(m);
                }
            }
            self.context = None;
        }
        class.span.1 = self.prev_end();
        Ok(class)
    }

    fn method_def(&mut self, class_side: bool) -> Result<MethodDef, ParseError> {
        let (selector, params) = self.method_pattern()?;
        if let Some(ctx) = &mut self.context {
            ctx.1 = selector.clone();
            ctx.2 = class_side;
        }
        self.expect(&TokenKind::LBracket, "`[` opening method body")?;
        let mut pragmas = Vec::new();
        let mut temps = Vec::new();
        loop {
            if self.is_binary("<") {
                pragmas.push(self.pragma()?);
            } else if self.at(&TokenKind::Bar) {
                temps.extend(self.temps()?);
            } else {
                break;
            }
        }
        let body = self.statements(&TokenKind::RBracket)?;
        self.expect(&TokenKind::RBracket, "`]` closing method body")?;
        Ok(MethodDef { selector, params, temps, pragmas, body })
    }

    fn method_pattern(&mut self) -> Result<(String, Vec<String>), ParseError> {
        match self.peek().clone() {
            TokenKind::Ident(s) => {
                self.advance();
                Ok((s, Vec::new()))
            }
            TokenKind::Binary(op) => {
                self.advance();
                let p = self.ident("parameter name")?;
                Ok((op, vec![p]))
            }
            TokenKind::Keyword(_) => {
                let mut sel = String::new();
                let mut params = Vec::new();
                while let TokenKind::Keyword(k) = self.peek().clone() {
                    self.advance();
                    sel.push_str(&k);
                    params.push(self.ident("parameter name")?);
                }
                Ok((sel, params))
            }
            _ => Err(self.error(format!("expected method pattern, found {}", self.describe()))),
        }
    }

    fn pragma(&mut self) -> Result<Pragma, ParseError> {
        self.advance();
        let pragma = match self.peek().clone() {
            TokenKind::Ident(s) => {
                self.advance();
                Pragma { selector: s, args: Vec::new() }
            }
            TokenKind::Keyword(_) => {
                let mut sel = String::new();
                let mut args = Vec::new();
                while let TokenKind::Keyword(k) = self.peek().clone() {
                    self.advance();
                    sel.push_str(&k);
                    args.push(self.literal_atom()?);
                }
                Pragma { selector: sel, args }
            }
            _ => return Err(self.error("malformed pragma")),
        };
        if !self.is_binary(">") {
            return Err(self.error(format!("expected `>` closing pragma, found {}", self.describe())));
        }
        self.advance();
        Ok(pragma)
    }

    fn literal_atom(&mut self) -> Result<Literal, ParseError> {
        let lit = match self.peek().clone() {
            TokenKind::Int(i) => Literal::Int(i),
            TokenKind::Float(f) => Literal::Float(f),
            TokenKind::Str(s) => Literal::Str(s),
            TokenKind::Sym(s) => Literal::Sym(s),
            TokenKind::Ident(s) if s == "true" => Literal::Bool(true),
            TokenKind::Ident(s) if s == "false" => Literal::Bool(false),
            TokenKind::Ident(s) if s == "nil" => Literal::Nil,
            TokenKind::HashParen => {
                self.advance();
                return self.literal_array_body();
            }
            _ => return Err(self.error(format!("expected literal, found {}", self.describe()))),
        };
        self.advance();
        Ok(lit)
    }

    fn temps(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect(&TokenKind::Bar, "`|`")?;
        let mut out = Vec::new();
        while let TokenKind::Ident(v) = self.peek().clone() {
            self.advance();
            out.push(v);
        }
        self.expect(&TokenKind::Bar, "`|` closing temporaries")?;
        Ok(out)
    }

    fn statements(&mut self, terminator: &TokenKind) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.at(&TokenKind::Period) {
                self.advance();
            }
            if self.at(terminator) {
                break;
            }
            let start = self.start();
            if self.at(&TokenKind::Caret) {
                self.advance();
                let value_start = self.start();
                let e = self.expr()?;
                let returns_self = e == Expr::Var("self".into());
                let end = self.prev_end();
                self.site(SiteKind::Return { value_start, returns_self }, start, end);
                out.push(Stmt::Return(e));
            } else {
                let e = self.expr()?;
                let end = self.prev_end();
                self.site(SiteKind::Statement, start, end);
                out.push(Stmt::Expr(e));
            }
            if self.at(&TokenKind::Period) {
                continue;
            }
            if !self.at(terminator) {
                return Err(self.error(format!(
                    "expected `.` or end of statements, found {}",
                    self.describe()
                )));
            }
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if let (TokenKind::Ident(name), TokenKind::Assign) = (self.peek().clone(), self.peek_n(1)) {
            self.pos += 2;
            let value = self.expr()?;
            return Ok(Expr::Assign { target: name, value: Box::new(value) });
        }
        self.cascade()
    }

    fn cascade(&mut self) -> Result<Expr, ParseError> {
        let first = self.keyword_expr()?;
        if !self.at(&TokenKind::Semicolon) {
            return Ok(first);
        }
        let (receiver, selector, args) = match first {
            Expr::Send { receiver, selector, args } => (receiver, selector, args),
            _ => return Err(self.error("cascade without a message send")),
        };
        let mut messages = vec![Message { selector, args }];
        while self.at(&TokenKind::Semicolon) {
            self.advance();
            messages.push(self.cascade_message()?);
        }
        Ok(Expr::Cascade { receiver, messages })
    }

    fn cascade_message(&mut self) -> Result<Message, ParseError> {
        match self.peek().clone() {
            TokenKind::Ident(s) => {
                self.advance();
                Ok(Message { selector: s, args: Vec::new() })
            }
            TokenKind::Binary(op) => {
                let start = self.start();
                self.advance();
                self.site(SiteKind::BinarySelector(op.clone()), start, start + op.len());
                let arg = self.unary_expr()?;
                Ok(Message { selector: op, args: vec![arg] })
            }
            TokenKind::Keyword(_) => {
                let mut sel = String::new();
                let mut args = Vec::new();
                while let TokenKind::Keyword(k) = self.peek().clone() {
                    self.advance();
                    sel.push_str(&k);
                    args.push(self.binary_expr()?);
                }
                Ok(Message { selector: sel, args })
            }
            _ => Err(self.error(format!("expected cascaded message, found {}", self.describe()))),
        }
    }

    fn keyword_expr(&mut self) -> Result<Expr, ParseError> {
        let receiver = self.binary_expr()?;
        if !matches!(self.peek(), TokenKind::Keyword(_)) {
            return Ok(receiver);
        }
        let mut sel = String::new();
        let mut args = Vec::new();
        while let TokenKind::Keyword(k) = self.peek().clone() {
            self.advance();
            sel.push_str(&k);
            args.push(self.binary_expr()?);
        }
        Ok(Expr::Send { receiver: Box::new(receiver), selector: sel, args })
    }

    fn binary_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary_expr()?;
        while let TokenKind::Binary(op) = self.peek().clone() {
            let start = self.start();
            self.advance();
            self.site(SiteKind::BinarySelector(op.clone()), start, start + op.len());
            let right = self.unary_expr()?;
            left = Expr::Send { receiver: Box::new(left), selector: op, args: vec![right] };
        }
        Ok(left)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while let TokenKind::Ident(s) = self.peek().clone() {
            self.advance();
            e = Expr::Send { receiver: Box::new(e), selector: s, args: Vec::new() };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.tokens[self.pos].clone();
        match tok.kind {
            TokenKind::Ident(s) => {
                self.advance();
                Ok(match s.as_str() {
                    "true" | "false" => {
                        let b = s == "true";
                        self.site(SiteKind::BoolLiteral(b), tok.start, tok.end);
                        Expr::Lit(Literal::Bool(b))
                    }
                    "nil" => Expr::Lit(Literal::Nil),
                    _ => Expr::Var(s),
                })
            }
            TokenKind::Int(i) => {
                self.advance();
                self.site(SiteKind::IntLiteral(i), tok.start, tok.end);
                Ok(Expr::Lit(Literal::Int(i)))
            }
            TokenKind::Float(f) => {
                self.advance();
                Ok(Expr::Lit(Literal::Float(f)))
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::Lit(Literal::Str(s)))
            }
            TokenKind::Sym(s) => {
                self.advance();
                Ok(Expr::Lit(Literal::Sym(s)))
            }
            TokenKind::HashParen => {
                self.advance();
                Ok(Expr::Lit(self.literal_array_body()?))
            }
            TokenKind::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            TokenKind::LBracket => self.block(),
            TokenKind::LBrace => {
                self.advance();
                let stmts = self.statements(&TokenKind::RBrace)?;
                self.expect(&TokenKind::RBrace, "`}`")?;
                let mut items = Vec::new();
                for s in stmts {
                    match s {
                        Stmt::Expr(e) => items.push(e),
                        Stmt::Return(_) => return Err(self.error("`^` inside a brace array")),
                    }
                }
                Ok(Expr::Brace(items))
            }
            _ => Err(self.error(format!("expected expression, found {}", self.describe()))),
        }
    }

    fn block(&mut self) -> Result<Expr, ParseError> {
        self.expect(&TokenKind::LBracket, "`[`")?;
        let mut params = Vec::new();
        while self.at(&TokenKind::Colon) {
            self.advance();
            params.push(self.ident("block parameter")?);
        }
        if !params.is_empty() {
            if self.at(&TokenKind::Bar) {
                self.advance();
            } else if !self.at(&TokenKind::RBracket) {
                return Err(self.error(format!("expected `|` after block parameters, found {}", self.describe())));
            }
        }
        let temps = if self.at(&TokenKind::Bar) { self.temps()? } else { Vec::new() };
        let body = self.statements(&TokenKind::RBracket)?;
        self.expect(&TokenKind::RBracket, "`]` closing block")?;
        Ok(Expr::Block(Arc::new(BlockExpr { params, temps, body })))
    }

    fn literal_array_body(&mut self) -> Result<Literal, ParseError> {
        let mut items = Vec::new();
        loop {
            let item = match self.peek().clone() {
                TokenKind::RParen => {
                    self.advance();
                    return Ok(Literal::Array(items));
                }
                TokenKind::Int(i) => Literal::Int(i),
                TokenKind::Float(f) => Literal::Float(f),
                TokenKind::Str(s) => Literal::Str(s),
                TokenKind::Sym(s) => Literal::Sym(s),
                TokenKind::Ident(s) => match s.as_str() {
                    "true" => Literal::Bool(true),
                    "false" => Literal::Bool(false),
                    "nil" => Literal::Nil,
                    _ => Literal::Sym(s),
                },
                TokenKind::Keyword(k) => Literal::Sym(k),
                TokenKind::Binary(b) if b == "-" && self.tokens[self.pos].end == self.tokens[self.pos + 1].start => {
                    // the lexer cannot see array context: `#(1 -2)`
                    match self.peek_n(1).clone() {
                        TokenKind::Int(i) => {
                            self.advance();
                            Literal::Int(-i)
                        }
                        TokenKind::Float(f) => {
                            self.advance();
                            Literal::Float(-f)
                        }
                        _ => Literal::Sym(b),
                    }
                }
                TokenKind::Binary(b) => Literal::Sym(b),
                TokenKind::LParen | TokenKind::HashParen => {
                    self.advance();
                    items.push(self.literal_array_body()?);
                    continue;
                }
                _ => return Err(self.error(format!("unexpected {} in literal array", self.describe()))),
            };
            self.advance();
            items.push(item);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn send(r: Expr, sel: &str, args: Vec<Expr>) -> Expr {
        Expr::Send { receiver: Box::new(r), selector: sel.into(), args }
    }
    fn var(s: &str) -> Expr {
        Expr::Var(s.into())
    }
    fn int(i: i64) -> Expr {
        Expr::Lit(Literal::Int(i))
    }

    #[test]
    fn precedence_unary_binary_keyword() {
        let e = parse_expr("a foo: b bar + 2 baz: 3").unwrap();
        assert_eq!(
            e,
            send(
                var("a"),
                "foo:baz:",
                vec![send(send(var("b"), "bar", vec![]), "+", vec![int(2)]), int(3)]
            )
        );
    }

    #[test]
    fn binary_is_left_associative() {
        let e = parse_expr("1 + 2 * 3").unwrap();
        assert_eq!(e, send(send(int(1), "+", vec![int(2)]), "*", vec![int(3)]));
    }

    #[test]
    fn cascade_shares_receiver() {
        let e = parse_expr("c add: 1; add: 2; yourself").unwrap();
        match e {
            Expr::Cascade { receiver, messages } => {
                assert_eq!(*receiver, var("c"));
                assert_eq!(messages.len(), 3);
                assert_eq!(messages[2].selector, "yourself");
            }
            other => panic!("not a cascade: {other:?}"),
        }
    }

    #[test]
    fn class_file_with_pragmas_and_sites() {
        let src = "Object subclass: SmallBank [\n  | balance |\n  balance [ <accessing> ^ balance ]\n  withdraw: amount [\n    balance >= amount ifTrue: [ balance := balance - amount. ^ true ].\n    ^ false\n  ]\n  SmallBank class >> fresh [ ^ self new ]\n]\n";
        let file = parse_file(src).unwrap();
        assert_eq!(file.classes.len(), 1);
        let c = &file.classes[0];
        assert_eq!(c.superclass.as_deref(), Some("Object"));
        assert_eq!(c.ivars, vec!["balance"]);
        assert_eq!(c.methods.len(), 2);
        assert!(c.methods[0].has_pragma("accessing"));
        assert_eq!(c.class_methods[0].selector, "fresh");
        let ge = file
            .sites
            .iter()
            .find(|s| s.kind == SiteKind::BinarySelector(">=".into()))
            .unwrap();
        assert_eq!(&src[ge.start..ge.end], ">=");
        assert_eq!(ge.selector, "withdraw:");
        let returns: Vec<_> = file
            .sites
            .iter()
            .filter(|s| matches!(s.kind, SiteKind::Return { .. }))
            .map(|s| &src[s.start..s.end])
            .collect();
        assert_eq!(returns, vec!["^ balance", "^ true", "^ false", "^ self new"]);
        let fresh = file.sites.iter().find(|s| s.selector == "fresh").unwrap();
        assert!(fresh.class_side);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_file("Object subclass: A [\n  foo [ 1 + ]\n]").unwrap_err();
        assert_eq!(err.pos.line, 2);
        assert!(err.message.contains("expected expression"));
    }

    #[test]
    fn blocks_with_params_and_temps() {
        let e = parse_expr("[:x :y | | t | t := x + y. t]").unwrap();
        match e {
            Expr::Block(b) => {
                assert_eq!(b.params, vec!["x", "y"]);
                assert_eq!(b.temps, vec!["t"]);
                assert_eq!(b.body.len(), 2);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn literal_arrays_nest() {
        let e = parse_expr("#(1 -2.5 foo #bar 'x' true (3))").unwrap();
        assert_eq!(
            e,
            Expr::Lit(Literal::Array(vec![
                Literal::Int(1),
                Literal::Float(-2.5),
                Literal::Sym("foo".into()),
                Literal::Sym("bar".into()),
                Literal::Str("x".into()),
                Literal::Bool(true),
                Literal::Array(vec![Literal::Int(3)]),
            ]))
        );
    }

    #[test]
    fn empty_statements_are_tolerated() {
        let body = parse_statements("a foo. . b bar.").unwrap();
        assert_eq!(body.len(), 2);
    }
}
