//! A small Smalltalk-flavoured language: lexer, parser, printer and a
//! tree-walking interpreter with hooks for observing execution.
//!
//! ```
//! use ampforge_lang::{Image, Interpreter, Limits, Value};
//!
//! let mut image = Image::new();
//! image.load("Object subclass: Counter [ | n | initialize [ n := 0 ] bump [ n := n + 1. ^ n ] ]").unwrap();
//! let mut interp = Interpreter::new(&image, Limits::default());
//! let counter = interp.instantiate("Counter").unwrap();
//! interp.send(counter.clone(), "bump", vec![]).unwrap();
//! let n = interp.send(counter, "bump", vec![]).unwrap();
//! assert!(matches!(n, Value::Int(2)));
//! ```

pub mod ast;
pub mod error;
pub mod image;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod printer;
mod prelude;
pub mod value;

pub use ast::{BlockExpr, ClassDef, Expr, Literal, Message, MethodDef, Pragma, Stmt};
pub use error::{LoadError, ParseError, Pos};
pub use image::{ArgInfo, CallObserver, Class, Image, Method, MethodKey, WrapError};
pub use interp::{Eval, Hook, Interpreter, LimitKind, Limits, Unwind};
pub use parser::{parse_doit, parse_expr, parse_file, parse_methods, parse_statements, Site, SiteKind, SourceFile};
pub use value::Value;
