//! Tokenizer for the host language.

use crate::error::{ParseError, Pos};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Keyword(String),
    Binary(String),
    Int(i64),
    Float(f64),
    Str(String),
    Sym(String),
    Assign,
    Caret,
    Period,
    Semicolon,
    Colon,
    Bar,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    HashParen,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

const BINARY_CHARS: &str = "+-*/\\<>=~,@%&?!";

pub(crate) fn is_binary_char(c: char) -> bool {
    BINARY_CHARS.contains(c)
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `src` into tokens. Comments (`"..."`) and whitespace are dropped.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    Lexer { src, pos: 0, tokens: Vec::new() }.run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn err(&self, at: usize, msg: impl Into<String>) -> ParseError {
        ParseError::new(Pos::locate(self.src, at), msg)
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(offset)
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        self.tokens.push(Token { kind, start, end: self.pos });
    }

    /// A leading `-` is part of a number literal unless the previous token
    /// could end an operand (`x-1` is a subtraction, `x - -1` is not).
    fn minus_starts_literal(&self) -> bool {
        match self.tokens.last().map(|t| &t.kind) {
            None => true,
            Some(
                TokenKind::Ident(_)
                | TokenKind::Int(_)
                | TokenKind::Float(_)
                | TokenKind::Str(_)
                | TokenKind::Sym(_)
                | TokenKind::RParen
                | TokenKind::RBracket
                | TokenKind::RBrace,
            ) => false,
            Some(_) => true,
        }
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            if c.is_whitespace() {
                self.pos += c.len_utf8();
                continue;
            }
            if c == '"' {
                self.pos += 1;
                match self.src[self.pos..].find('"') {
                    Some(off) => self.pos += off + 1,
                    None => return Err(self.err(start, "unterminated comment")),
                }
                continue;
            }
            if is_ident_start(c) {
                self.lex_word(start);
                continue;
            }
            if c.is_ascii_digit() {
                self.lex_number(start, false)?;
                continue;
            }
            if c == '-'
                && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())
                && self.minus_starts_literal()
            {
                self.pos += 1;
                self.lex_number(start, true)?;
                continue;
            }
            match c {
                '\'' => {
                    let s = self.lex_string(start)?;
                    self.push(TokenKind::Str(s), start);
                }
                '#' => self.lex_hash(start)?,
                ':' => {
                    if self.peek_at(1) == Some('=') {
                        self.pos += 2;
                        self.push(TokenKind::Assign, start);
                    } else {
                        self.pos += 1;
                        self.push(TokenKind::Colon, start);
                    }
                }
                '^' => self.single(TokenKind::Caret, start),
                '.' => self.single(TokenKind::Period, start),
                ';' => self.single(TokenKind::Semicolon, start),
                '|' => self.single(TokenKind::Bar, start),
                '(' => self.single(TokenKind::LParen, start),
                ')' => self.single(TokenKind::RParen, start),
                '[' => self.single(TokenKind::LBracket, start),
                ']' => self.single(TokenKind::RBracket, start),
                '{' => self.single(TokenKind::LBrace, start),
                '}' => self.single(TokenKind::RBrace, start),
                c if is_binary_char(c) => {
                    while self.peek().is_some_and(is_binary_char) {
                        // `x--1`: stop before a minus that begins a literal
                        if self.pos > start
                            && self.peek() == Some('-')
                            && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())
                        {
                            break;
                        }
                        self.pos += 1;
                    }
                    let op = self.src[start..self.pos].to_string();
                    self.push(TokenKind::Binary(op), start);
                }
                other => return Err(self.err(start, format!("unexpected character `{other}`"))),
            }
        }
        let end = self.pos;
        self.tokens.push(Token { kind: TokenKind::Eof, start: end, end });
        Ok(self.tokens)
    }

    fn single(&mut self, kind: TokenKind, start: usize) {
        self.pos += 1;
        self.push(kind, start);
    }

    fn lex_word(&mut self, start: usize) {
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        if self.peek() == Some(':') && self.peek_at(1) != Some('=') {
            self.pos += 1;
            let kw = self.src[start..self.pos].to_string();
            self.push(TokenKind::Keyword(kw), start);
        } else {
            let id = self.src[start..self.pos].to_string();
            self.push(TokenKind::Ident(id), start);
        }
    }

    fn lex_number(&mut self, start: usize, negative: bool) -> Result<(), ParseError> {
        let digits_start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let mut is_float = false;
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if self.peek() == Some('e') {
            let exp_digit = match self.peek_at(1) {
                Some('-') => self.peek_at(2).is_some_and(|c| c.is_ascii_digit()),
                Some(c) => c.is_ascii_digit(),
                None => false,
            };
            if exp_digit {
                is_float = true;
                self.pos += 2;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = &self.src[digits_start..self.pos];
        if is_float {
            let v: f64 = text.parse().map_err(|_| self.err(start, "malformed float literal"))?;
            self.push(TokenKind::Float(if negative { -v } else { v }), start);
        } else {
            let full = if negative { format!("-{text}") } else { text.to_string() };
            let v: i64 = full.parse().map_err(|_| self.err(start, "integer literal out of range"))?;
            self.push(TokenKind::Int(v), start);
        }
        Ok(())
    }

    fn lex_string(&mut self, start: usize) -> Result<String, ParseError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err(start, "unterminated string literal")),
                Some('\'') => {
                    if self.peek_at(1) == Some('\'') {
                        out.push('\'');
                        self.pos += 2;
                    } else {
                        self.pos += 1;
                        return Ok(out);
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
    }

    fn lex_hash(&mut self, start: usize) -> Result<(), ParseError> {
        self.pos += 1;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                self.push(TokenKind::HashParen, start);
            }
            Some('\'') => {
                let s = self.lex_string(self.pos)?;
                self.push(TokenKind::Sym(s), start);
            }
            Some(c) if is_ident_start(c) => {
                let sym_start = self.pos;
                loop {
                    while self.peek().is_some_and(is_ident_char) {
                        self.pos += 1;
                    }
                    if self.peek() == Some(':') && self.peek_at(1) != Some('=') {
                        self.pos += 1;
                        if self.peek().is_some_and(is_ident_start) {
                            continue;
                        }
                    }
                    break;
                }
                let s = self.src[sym_start..self.pos].to_string();
                self.push(TokenKind::Sym(s), start);
            }
            Some(c) if is_binary_char(c) || c == '|' => {
                let sym_start = self.pos;
                while self.peek().is_some_and(|c| is_binary_char(c) || c == '|') {
                    self.pos += 1;
                }
                let s = self.src[sym_start..self.pos].to_string();
                self.push(TokenKind::Sym(s), start);
            }
            _ => return Err(self.err(start, "malformed symbol literal")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn negative_literals_depend_on_context() {
        assert_eq!(
            kinds("x-1"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::Binary("-".into()),
                TokenKind::Int(1),
                TokenKind::Eof
            ]
        );
        assert_eq!(
            kinds("x - -1"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::Binary("-".into()),
                TokenKind::Int(-1),
                TokenKind::Eof
            ]
        );
        assert_eq!(
            kinds("b deposit: -5"),
            vec![
                TokenKind::Ident("b".into()),
                TokenKind::Keyword("deposit:".into()),
                TokenKind::Int(-5),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn keywords_symbols_and_strings() {
        assert_eq!(
            kinds("#at:put: 'it''s' x := #+"),
            vec![
                TokenKind::Sym("at:put:".into()),
                TokenKind::Str("it's".into()),
                TokenKind::Ident("x".into()),
                TokenKind::Assign,
                TokenKind::Sym("+".into()),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn floats_with_exponents() {
        assert_eq!(kinds("1.5e-3"), vec![TokenKind::Float(1.5e-3), TokenKind::Eof]);
        assert_eq!(kinds("2e3"), vec![TokenKind::Float(2000.0), TokenKind::Eof]);
        assert_eq!(kinds("3."), vec![TokenKind::Int(3), TokenKind::Period, TokenKind::Eof]);
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(kinds("\"hello\" x"), vec![TokenKind::Ident("x".into()), TokenKind::Eof]);
        assert!(tokenize("\"open").is_err());
    }
}
