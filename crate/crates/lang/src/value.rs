use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use crate::ast::{BlockExpr, Literal};
use crate::image::Class;

pub type Shared<T> = Rc<RefCell<T>>;

#[derive(Debug)]
pub struct Object {
    pub class: Arc<Class>,
    pub fields: RefCell<Vec<Value>>,
    pub id: u64,
}

#[derive(Debug)]
pub struct Scope {
    pub vars: RefCell<Vec<(String, Value)>>,
    pub parent: Option<Rc<Scope>>,
}

impl Scope {
    pub fn new(vars: Vec<(String, Value)>, parent: Option<Rc<Scope>>) -> Rc<Scope> {
        Rc::new(Scope { vars: RefCell::new(vars), parent })
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        if let Some((_, v)) = self.vars.borrow().iter().find(|(n, _)| n == name) {
            return Some(v.clone());
        }
        self.parent.as_ref().and_then(|p| p.get(name))
    }

    pub fn set(&self, name: &str, value: Value) -> bool {
        if let Some(slot) = self.vars.borrow_mut().iter_mut().find(|(n, _)| n == name) {
            slot.1 = value;
            return true;
        }
        self.parent.as_ref().is_some_and(|p| p.set(name, value))
    }
}

/// Method activation shared by the method body and the blocks it creates.
#[derive(Debug)]
pub struct Context {
    pub receiver: Value,
    /// Class that defines the running method; `super` starts above it.
    pub class: Arc<Class>,
    pub class_side: bool,
    pub home: u64,
}

#[derive(Debug)]
pub struct Closure {
    pub block: Arc<BlockExpr>,
    pub scope: Rc<Scope>,
    pub context: Rc<Context>,
}

#[derive(Debug, Clone)]
pub enum Value {
    Nil,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    Sym(Rc<str>),
    Array(Shared<Vec<Value>>),
    List(Shared<Vec<Value>>),
    Dict(Shared<Vec<(Value, Value)>>),
    Object(Rc<Object>),
    Class(Arc<Class>),
    Block(Rc<Closure>),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn sym(s: &str) -> Value {
        Value::Sym(Rc::from(s))
    }

    pub fn from_literal(lit: &Literal) -> Value {
        match lit {
            Literal::Nil => Value::Nil,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Int(*i),
            Literal::Float(f) => Value::Float(*f),
            Literal::Str(s) => Value::str(s),
            Literal::Sym(s) => Value::sym(s),
            Literal::Array(items) => {
                Value::Array(Rc::new(RefCell::new(items.iter().map(Value::from_literal).collect())))
            }
        }
    }

    /// The literal this value denotes, for primitive (non-collection) values.
    pub fn as_primitive(&self) -> Option<Literal> {
        Some(match self {
            Value::Nil => Literal::Nil,
            Value::Bool(b) => Literal::Bool(*b),
            Value::Int(i) => Literal::Int(*i),
            Value::Float(f) => Literal::Float(*f),
            Value::Str(s) => Literal::Str(s.to_string()),
            Value::Sym(s) => Literal::Sym(s.to_string()),
            _ => return None,
        })
    }

    /// Name of the class a value belongs to; class objects report `Name class`.
    pub fn type_name(&self) -> String {
        match self {
            Value::Class(c) => format!("{} class", c.name),
            other => other.class_name().to_string(),
        }
    }

    pub fn class_name(&self) -> &str {
        match self {
            Value::Nil => "UndefinedObject",
            Value::Bool(_) => "Boolean",
            Value::Int(_) => "Integer",
            Value::Float(_) => "Float",
            Value::Str(_) => "String",
            Value::Sym(_) => "Symbol",
            Value::Array(_) => "Array",
            Value::List(_) => "OrderedCollection",
            Value::Dict(_) => "Dictionary",
            Value::Object(o) => &o.class.name,
            Value::Class(_) => "Class",
            Value::Block(_) => "BlockClosure",
        }
    }

    pub fn identical(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Nil, Value::Nil) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => Rc::ptr_eq(a, b),
            (Value::Sym(a), Value::Sym(b)) => a == b,
            (Value::Array(a), Value::Array(b)) | (Value::List(a), Value::List(b)) => Rc::ptr_eq(a, b),
            (Value::Dict(a), Value::Dict(b)) => Rc::ptr_eq(a, b),
            (Value::Object(a), Value::Object(b)) => Rc::ptr_eq(a, b),
            (Value::Class(a), Value::Class(b)) => a.name == b.name,
            (Value::Block(a), Value::Block(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }

    /// Text of a string or symbol.
    pub fn str_content(&self) -> Option<&str> {
        match self {
            Value::Str(s) | Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn truthy(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}
