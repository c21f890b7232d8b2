//! Messages answered by the runtime itself, grouped by receiver kind.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::rc::Rc;
use std::sync::Arc;

use super::{Eval, Interpreter, Unwind};
use crate::ast::arity;
use crate::image::Class;
use crate::printer::float_to_source;
use crate::value::{Closure, Shared, Value};

type Native = Result<Option<Value>, Unwind>;

#[derive(Debug, Clone, Copy)]
enum Num {
    I(i64),
    F(f64),
}

impl Num {
    fn of(v: &Value) -> Option<Num> {
        match v {
            Value::Int(i) => Some(Num::I(*i)),
            Value::Float(f) => Some(Num::F(*f)),
            _ => None,
        }
    }

    fn f(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::F(f) => f,
        }
    }

    fn value(self) -> Value {
        match self {
            Num::I(i) => Value::Int(i),
            Num::F(f) => Value::Float(f),
        }
    }
}

fn float_to_int(f: f64) -> Option<i64> {
    (-9.2e18..=9.2e18).contains(&f).then_some(f as i64)
}

fn floor_div(a: i64, b: i64) -> Option<i64> {
    let q = a.checked_div(b)?;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q.checked_sub(1)
    } else {
        Some(q)
    }
}

fn list(items: Vec<Value>) -> Value {
    Value::List(Rc::new(RefCell::new(items)))
}

fn array(items: Vec<Value>) -> Value {
    Value::Array(Rc::new(RefCell::new(items)))
}

fn article(name: &str) -> &'static str {
    match name.chars().next() {
        Some(c) if "AEIOUaeiou".contains(c) => "an",
        _ => "a",
    }
}

fn print_float(f: f64) -> String {
    if f.is_nan() {
        "Float nan".into()
    } else if f.is_infinite() {
        if f > 0.0 { "Float infinity".into() } else { "Float negativeInfinity".into() }
    } else {
        float_to_source(f)
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

const UNIVERSAL: &[&str] = &[
    "==", "~~", "=", "~=", "hash", "identityHash", "class", "isNil", "notNil", "ifNil:", "ifNotNil:",
    "ifNil:ifNotNil:", "ifNotNil:ifNil:", "isKindOf:", "isMemberOf:", "respondsTo:", "yourself", "printString",
    "displayString", "asString", "copy", "shallowCopy", "deepCopy", "perform:", "perform:with:",
    "perform:with:with:", "perform:withArguments:", "error:", "value", "in:", "isString", "isSymbol",
    "isNumber", "isInteger", "isFloat", "isCollection", "isBlock", "isClass", "isEmptyOrNil", "instVarNamed:",
];

impl<'a> Interpreter<'a> {
    pub(super) fn native(&mut self, recv: Value, sel: &str, args: Vec<Value>) -> Eval {
        let found = match &recv {
            Value::Int(_) | Value::Float(_) => self.number_native(&recv, sel, &args)?,
            Value::Bool(b) => self.bool_native(*b, sel, &args)?,
            Value::Str(_) | Value::Sym(_) => self.string_native(&recv, sel, &args)?,
            Value::Array(items) => self.seq_native(&recv, items, false, sel, &args)?,
            Value::List(items) => self.seq_native(&recv, items, true, sel, &args)?,
            Value::Dict(d) => self.dict_native(&recv, d, sel, &args)?,
            Value::Block(b) => self.block_native(b, sel, &args)?,
            Value::Class(c) => self.class_native(c, sel, &args)?,
            Value::Nil | Value::Object(_) => None,
        };
        if let Some(v) = found {
            return Ok(v);
        }
        if let Some(v) = self.object_native(&recv, sel, &args)? {
            return Ok(v);
        }
        self.not_understood(&recv, sel)
    }

    /// `a = b` as the language sees it, honouring user overrides.
    pub fn values_equal(&mut self, a: &Value, b: &Value) -> Result<bool, Unwind> {
        Ok(self.send(a.clone(), "=", vec![b.clone()])?.truthy() == Some(true))
    }

    /// `printString` as the language sees it, honouring user overrides.
    pub fn print_string(&mut self, v: &Value) -> Result<String, Unwind> {
        match self.send(v.clone(), "printString", vec![])? {
            Value::Str(s) => Ok(s.to_string()),
            _ => self.native_print(v),
        }
    }

    fn native_print(&mut self, v: &Value) -> Result<String, Unwind> {
        Ok(match v {
            Value::Nil => "nil".into(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => print_float(*f),
            Value::Str(s) => quote(s),
            Value::Sym(s) => format!("#{s}"),
            Value::Array(items) => {
                let items = items.borrow().clone();
                let parts = self.print_all(&items)?;
                format!("#({})", parts.join(" "))
            }
            Value::List(items) => {
                let items = items.borrow().clone();
                let parts = self.print_all(&items)?;
                format!("an OrderedCollection({})", parts.join(" "))
            }
            Value::Dict(d) => {
                let entries = d.borrow().clone();
                let mut parts = Vec::new();
                for (k, v) in &entries {
                    parts.push(format!("{}->{}", self.print_string(k)?, self.print_string(v)?));
                }
                format!("a Dictionary({})", parts.join(" "))
            }
            Value::Object(o) => format!("{} {}", article(&o.class.name), o.class.name),
            Value::Class(c) => c.name.clone(),
            Value::Block(_) => "a BlockClosure".into(),
        })
    }

    fn print_all(&mut self, items: &[Value]) -> Result<Vec<String>, Unwind> {
        items.iter().map(|i| self.print_string(i)).collect()
    }

    fn display_string(&mut self, v: &Value) -> Result<String, Unwind> {
        match v {
            Value::Str(s) | Value::Sym(s) => Ok(s.to_string()),
            other => self.print_string(other),
        }
    }

    fn native_equal(&mut self, a: &Value, b: &Value) -> Result<bool, Unwind> {
        Ok(match (a, b) {
            (Value::Array(x), Value::Array(y)) | (Value::List(x), Value::List(y)) => {
                if Rc::ptr_eq(x, y) {
                    return Ok(true);
                }
                let (x, y) = (x.borrow().clone(), y.borrow().clone());
                if x.len() != y.len() {
                    return Ok(false);
                }
                for (p, q) in x.iter().zip(&y) {
                    if !self.values_equal(p, q)? {
                        return Ok(false);
                    }
                }
                true
            }
            (Value::Dict(x), Value::Dict(y)) => {
                let (x, y) = (x.borrow().clone(), y.borrow().clone());
                if x.len() != y.len() {
                    return Ok(false);
                }
                for (k, v) in &x {
                    match self.dict_find(&y, k)? {
                        Some(i) => {
                            if !self.values_equal(v, &y[i].1)? {
                                return Ok(false);
                            }
                        }
                        None => return Ok(false),
                    }
                }
                true
            }
            _ => a.identical(b),
        })
    }

    fn int_arg(&mut self, v: &Value) -> Result<i64, Unwind> {
        match v {
            Value::Int(i) => Ok(*i),
            other => self.error("Error", format!("expected an Integer, got {}", other.type_name())),
        }
    }

    fn index(&mut self, v: &Value, len: usize) -> Result<usize, Unwind> {
        let i = self.int_arg(v)?;
        if i < 1 || i as usize > len {
            return self.error("SubscriptOutOfBounds", format!("index {i} out of bounds"));
        }
        Ok(i as usize - 1)
    }

    fn collection_items(&mut self, v: &Value) -> Result<Vec<Value>, Unwind> {
        match v {
            Value::Array(items) | Value::List(items) => Ok(items.borrow().clone()),
            Value::Dict(d) => Ok(d.borrow().iter().map(|(_, v)| v.clone()).collect()),
            Value::Str(s) | Value::Sym(s) => Ok(s.chars().map(|c| Value::str(&c.to_string())).collect()),
            other => self.error("Error", format!("{} is not a collection", other.type_name())),
        }
    }

    fn block_arity(v: &Value) -> usize {
        match v {
            Value::Block(b) => b.block.params.len(),
            Value::Sym(_) => 1,
            _ => 0,
        }
    }

    fn test(&mut self, block: &Value, args: Vec<Value>) -> Result<bool, Unwind> {
        match self.call_value(block, args)? {
            Value::Bool(b) => Ok(b),
            other => self.error("NonBooleanReceiver", format!("{} is not a Boolean", other.type_name())),
        }
    }

    // ---- numbers ------------------------------------------------------

    fn arith(&mut self, sel: &str, a: Num, b: Num, recv: &Value, arg: &Value) -> Native {
        use Num::*;
        let overflow = |s: &mut Self| s.error::<Option<Value>>("ArithmeticError", "integer overflow");
        let v = match (a, b) {
            (I(x), I(y)) => match sel {
                "+" => match x.checked_add(y) { Some(r) => Value::Int(r), None => return overflow(self) },
                "-" => match x.checked_sub(y) { Some(r) => Value::Int(r), None => return overflow(self) },
                "*" => match x.checked_mul(y) { Some(r) => Value::Int(r), None => return overflow(self) },
                "/" => {
                    if y == 0 {
                        return self.error("ZeroDivide", "division by zero");
                    }
                    match x.checked_rem(y) {
                        Some(0) => match x.checked_div(y) { Some(r) => Value::Int(r), None => return overflow(self) },
                        Some(_) => Value::Float(x as f64 / y as f64),
                        None => return overflow(self),
                    }
                }
                "//" | "\\\\" | "rem:" | "quo:" => {
                    if y == 0 {
                        return self.error("ZeroDivide", "division by zero");
                    }
                    let r = match sel {
                        "//" => floor_div(x, y),
                        "\\\\" => floor_div(x, y).and_then(|q| q.checked_mul(y)).and_then(|p| x.checked_sub(p)),
                        "rem:" => x.checked_rem(y),
                        _ => x.checked_div(y),
                    };
                    match r { Some(r) => Value::Int(r), None => return overflow(self) }
                }
                "<" => Value::Bool(x < y),
                ">" => Value::Bool(x > y),
                "<=" => Value::Bool(x <= y),
                ">=" => Value::Bool(x >= y),
                "=" => Value::Bool(x == y),
                "~=" => Value::Bool(x != y),
                "max:" => Value::Int(x.max(y)),
                "min:" => Value::Int(x.min(y)),
                _ => return Ok(None),
            },
            _ => {
                let (x, y) = (a.f(), b.f());
                match sel {
                    "+" => Value::Float(x + y),
                    "-" => Value::Float(x - y),
                    "*" => Value::Float(x * y),
                    "/" | "//" | "\\\\" | "rem:" | "quo:" if y == 0.0 => {
                        return self.error("ZeroDivide", "division by zero")
                    }
                    "/" => Value::Float(x / y),
                    "//" | "quo:" => {
                        let q = if sel == "//" { (x / y).floor() } else { (x / y).trunc() };
                        match float_to_int(q) {
                            Some(i) => Value::Int(i),
                            None => return self.error("ArithmeticError", "result is not a finite integer"),
                        }
                    }
                    "\\\\" => Value::Float(x - (x / y).floor() * y),
                    "rem:" => Value::Float(x % y),
                    "<" => Value::Bool(x < y),
                    ">" => Value::Bool(x > y),
                    "<=" => Value::Bool(x <= y),
                    ">=" => Value::Bool(x >= y),
                    "=" => Value::Bool(x == y),
                    "~=" => Value::Bool(x != y),
                    "max:" => if x >= y { recv.clone() } else { arg.clone() },
                    "min:" => if x <= y { recv.clone() } else { arg.clone() },
                    _ => return Ok(None),
                }
            }
        };
        Ok(Some(v))
    }

    fn number_native(&mut self, recv: &Value, sel: &str, args: &[Value]) -> Native {
        let a = Num::of(recv).expect("number receiver");
        const BINARY: &[&str] =
            &["+", "-", "*", "/", "//", "\\\\", "rem:", "quo:", "<", ">", "<=", ">=", "=", "~=", "max:", "min:"];
        if args.len() == 1 && BINARY.contains(&sel) {
            return match Num::of(&args[0]) {
                Some(b) => self.arith(sel, a, b, recv, &args[0]),
                None if sel == "=" => Ok(Some(Value::Bool(false))),
                None if sel == "~=" => Ok(Some(Value::Bool(true))),
                None => self.error("Error", format!("{} is not a number", args[0].type_name())),
            };
        }
        let to_int = |s: &mut Self, f: f64| -> Native {
            match float_to_int(f) {
                Some(i) => Ok(Some(Value::Int(i))),
                None => s.error("ArithmeticError", "result is not a finite integer"),
            }
        };
        let v = match (sel, a) {
            ("abs", Num::I(i)) => match i.checked_abs() {
                Some(r) => Value::Int(r),
                None => return self.error("ArithmeticError", "integer overflow"),
            },
            ("abs", Num::F(f)) => Value::Float(f.abs()),
            ("negated", Num::I(i)) => match i.checked_neg() {
                Some(r) => Value::Int(r),
                None => return self.error("ArithmeticError", "integer overflow"),
            },
            ("negated", Num::F(f)) => Value::Float(-f),
            ("squared", _) => return self.arith("*", a, a, recv, recv),
            ("reciprocal", _) => return self.arith("/", Num::I(1), a, recv, recv),
            ("sqrt", _) => Value::Float(a.f().sqrt()),
            ("isZero", _) => Value::Bool(a.f() == 0.0),
            ("even", Num::I(i)) => Value::Bool(i % 2 == 0),
            ("odd", Num::I(i)) => Value::Bool(i % 2 != 0),
            ("even", Num::F(f)) => Value::Bool(f % 2.0 == 0.0),
            ("odd", Num::F(f)) => Value::Bool(f.abs() % 2.0 == 1.0),
            ("sign", _) => Value::Int(match a.f() {
                x if x > 0.0 => 1,
                x if x < 0.0 => -1,
                _ => 0,
            }),
            ("negative", _) => Value::Bool(a.f() < 0.0),
            ("positive", _) => Value::Bool(a.f() >= 0.0),
            ("strictlyPositive", _) => Value::Bool(a.f() > 0.0),
            ("floor" | "ceiling" | "rounded" | "truncated" | "asInteger", Num::I(i)) => Value::Int(i),
            ("floor", Num::F(f)) => return to_int(self, f.floor()),
            ("ceiling", Num::F(f)) => return to_int(self, f.ceil()),
            ("rounded", Num::F(f)) => return to_int(self, f.round()),
            ("truncated" | "asInteger", Num::F(f)) => return to_int(self, f.trunc()),
            ("asFloat", _) => Value::Float(a.f()),
            ("isNumber", _) => Value::Bool(true),
            ("isInteger", _) => Value::Bool(matches!(a, Num::I(_))),
            ("isFloat", _) => Value::Bool(matches!(a, Num::F(_))),
            ("isNaN", _) => Value::Bool(a.f().is_nan()),
            ("isInfinite", _) => Value::Bool(a.f().is_infinite()),
            ("hash", Num::I(i)) => Value::Int(i),
            ("hash", Num::F(f)) => Value::Int(f.to_bits() as i64 >> 1),
            ("printString" | "displayString" | "asString", _) => Value::str(&self.native_print(recv)?),
            ("between:and:", _) => {
                let lo = self.send(recv.clone(), ">=", vec![args[0].clone()])?;
                let hi = self.send(recv.clone(), "<=", vec![args[1].clone()])?;
                Value::Bool(lo.truthy() == Some(true) && hi.truthy() == Some(true))
            }
            ("raisedTo:", _) => match (a, Num::of(&args[0])) {
                (Num::I(x), Some(Num::I(y))) if y >= 0 => match u32::try_from(y).ok().and_then(|y| x.checked_pow(y)) {
                    Some(r) => Value::Int(r),
                    None => return self.error("ArithmeticError", "integer overflow"),
                },
                (x, Some(y)) => Value::Float(x.f().powf(y.f())),
                (_, None) => return self.error("Error", "exponent is not a number"),
            },
            ("timesRepeat:", Num::I(n)) => {
                for _ in 0..n.max(0) {
                    self.call_value(&args[0], vec![])?;
                }
                recv.clone()
            }
            ("to:", _) => {
                let mut out = Vec::new();
                self.count_loop(a, &args[0], &Value::Int(1), |_, v| {
                    out.push(v);
                    Ok(())
                })?;
                array(out)
            }
            ("to:do:", _) => {
                let block = args[1].clone();
                self.count_loop(a, &args[0], &Value::Int(1), |s, v| s.call_value(&block, vec![v]).map(|_| ()))?;
                recv.clone()
            }
            ("to:by:do:", _) => {
                let block = args[2].clone();
                self.count_loop(a, &args[0], &args[1], |s, v| s.call_value(&block, vec![v]).map(|_| ()))?;
                recv.clone()
            }
            _ => return Ok(None),
        };
        Ok(Some(v))
    }

    fn count_loop(
        &mut self,
        start: Num,
        stop: &Value,
        step: &Value,
        mut body: impl FnMut(&mut Self, Value) -> Result<(), Unwind>,
    ) -> Result<(), Unwind> {
        let (Some(stop), Some(step)) = (Num::of(stop), Num::of(step)) else {
            return self.error("Error", "loop bounds must be numbers");
        };
        if step.f() == 0.0 {
            return self.error("Error", "step must not be zero");
        }
        let mut cur = start;
        loop {
            let done = if step.f() > 0.0 { cur.f() > stop.f() } else { cur.f() < stop.f() };
            if done {
                return Ok(());
            }
            self.tick()?;
            body(self, cur.value())?;
            let next = self.arith("+", cur, step, &cur.value(), &step.value())?;
            cur = match next.as_ref().and_then(Num::of) {
                Some(n) => n,
                None => return Ok(()),
            };
        }
    }

    // ---- booleans -----------------------------------------------------

    fn bool_native(&mut self, b: bool, sel: &str, args: &[Value]) -> Native {
        let v = match sel {
            "not" => Value::Bool(!b),
            "&" => Value::Bool(b && args[0].truthy() == Some(true)),
            "|" => Value::Bool(b || args[0].truthy() == Some(true)),
            "and:" => {
                if b { self.call_value(&args[0], vec![])? } else { Value::Bool(false) }
            }
            "or:" => {
                if b { Value::Bool(true) } else { self.call_value(&args[0], vec![])? }
            }
            "xor:" => Value::Bool(b != (args[0].truthy() == Some(true))),
            "ifTrue:" => {
                if b { self.call_value(&args[0], vec![])? } else { Value::Nil }
            }
            "ifFalse:" => {
                if b { Value::Nil } else { self.call_value(&args[0], vec![])? }
            }
            "ifTrue:ifFalse:" => self.call_value(&args[if b { 0 } else { 1 }], vec![])?,
            "ifFalse:ifTrue:" => self.call_value(&args[if b { 1 } else { 0 }], vec![])?,
            "printString" | "displayString" | "asString" => Value::str(if b { "true" } else { "false" }),
            "hash" => Value::Int(b as i64),
            _ => return Ok(None),
        };
        Ok(Some(v))
    }

    // ---- strings and symbols ------------------------------------------

    fn string_native(&mut self, recv: &Value, sel: &str, args: &[Value]) -> Native {
        let (s, is_sym) = match recv {
            Value::Str(s) => (s.clone(), false),
            Value::Sym(s) => (s.clone(), true),
            _ => unreachable!(),
        };
        let chars: Vec<char> = s.chars().collect();
        let arg_str = |v: &Value| match v {
            Value::Str(x) | Value::Sym(x) => Some(x.clone()),
            _ => None,
        };
        let v = match sel {
            "=" => Value::Bool(match (&args[0], is_sym) {
                (Value::Sym(o), true) => *o == s,
                (Value::Str(o), false) | (Value::Sym(o), false) => *o == s,
                _ => false,
            }),
            "~=" => {
                let eq = self.string_native(recv, "=", args)?.and_then(|v| v.truthy()).unwrap_or(false);
                Value::Bool(!eq)
            }
            "<" | ">" | "<=" | ">=" => {
                let Some(o) = arg_str(&args[0]) else {
                    return self.error("Error", format!("cannot compare a String with {}", args[0].type_name()));
                };
                let ord = s.as_ref().cmp(o.as_ref());
                Value::Bool(match sel {
                    "<" => ord == Ordering::Less,
                    ">" => ord == Ordering::Greater,
                    "<=" => ord != Ordering::Greater,
                    _ => ord != Ordering::Less,
                })
            }
            "hash" => Value::Int(s.bytes().fold(17i64, |h, b| h.wrapping_mul(31).wrapping_add(b as i64))),
            "size" => Value::Int(chars.len() as i64),
            "isEmpty" => Value::Bool(chars.is_empty()),
            "notEmpty" => Value::Bool(!chars.is_empty()),
            "isString" => Value::Bool(true),
            "isSymbol" => Value::Bool(is_sym),
            "isCollection" => Value::Bool(true),
            "printString" => Value::str(&self.native_print(recv)?),
            "displayString" | "asString" => Value::str(&s),
            "asSymbol" => Value::sym(&s),
            "," => match arg_str(&args[0]) {
                Some(o) => Value::str(&format!("{s}{o}")),
                None => return self.error("Error", format!("cannot append {} to a String", args[0].type_name())),
            },
            "at:" => {
                let i = self.index(&args[0], chars.len())?;
                Value::str(&chars[i].to_string())
            }
            "first" | "last" => {
                if chars.is_empty() {
                    return self.error("CollectionIsEmpty", "collection is empty");
                }
                let c = if sel == "first" { chars[0] } else { chars[chars.len() - 1] };
                Value::str(&c.to_string())
            }
            "reversed" | "reverse" => Value::str(&chars.iter().rev().collect::<String>()),
            "asUppercase" => Value::str(&s.to_uppercase()),
            "asLowercase" => Value::str(&s.to_lowercase()),
            "trimBoth" | "trimmed" => Value::str(s.trim()),
            "includesSubstring:" => match arg_str(&args[0]) {
                Some(o) => Value::Bool(s.contains(o.as_ref())),
                None => Value::Bool(false),
            },
            "beginsWith:" | "startsWith:" => match arg_str(&args[0]) {
                Some(o) => Value::Bool(s.starts_with(o.as_ref())),
                None => Value::Bool(false),
            },
            "endsWith:" => match arg_str(&args[0]) {
                Some(o) => Value::Bool(s.ends_with(o.as_ref())),
                None => Value::Bool(false),
            },
            "includes:" | "indexOf:" | "occurrencesOf:" => {
                let needle = arg_str(&args[0]).and_then(|o| {
                    let mut it = o.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) => Some(c),
                        _ => None,
                    }
                });
                match sel {
                    "includes:" => Value::Bool(needle.is_some_and(|c| chars.contains(&c))),
                    "indexOf:" => Value::Int(
                        needle.and_then(|c| chars.iter().position(|x| *x == c)).map_or(0, |p| p as i64 + 1),
                    ),
                    _ => Value::Int(needle.map_or(0, |c| chars.iter().filter(|x| **x == c).count() as i64)),
                }
            }
            "copyFrom:to:" => {
                let from = self.int_arg(&args[0])?;
                let to = self.int_arg(&args[1])?;
                if to < from {
                    Value::str("")
                } else {
                    let a = self.index(&Value::Int(from), chars.len())?;
                    let b = self.index(&Value::Int(to), chars.len())?;
                    Value::str(&chars[a..=b].iter().collect::<String>())
                }
            }
            "copyReplaceAll:with:" => match (arg_str(&args[0]), arg_str(&args[1])) {
                (Some(a), Some(b)) if !a.is_empty() => Value::str(&s.replace(a.as_ref(), &b)),
                _ => recv.clone(),
            },
            "asInteger" => {
                let t = s.trim_start();
                let (neg, digits) = match t.strip_prefix('-') {
                    Some(rest) => (true, rest),
                    None => (false, t),
                };
                let digits: String = digits.chars().take_while(|c| c.is_ascii_digit()).collect();
                match digits.parse::<i64>() {
                    Ok(n) => Value::Int(if neg { -n } else { n }),
                    Err(_) => Value::Nil,
                }
            }
            "asNumber" => {
                let t = s.trim();
                if let Ok(i) = t.parse::<i64>() {
                    Value::Int(i)
                } else if let Ok(f) = t.parse::<f64>() {
                    Value::Float(f)
                } else {
                    Value::Nil
                }
            }
            "substrings" => array(s.split_whitespace().map(Value::str).collect()),
            "substrings:" => {
                let seps = arg_str(&args[0]).unwrap_or_else(|| Rc::from(" "));
                array(s.split(|c| seps.contains(c)).filter(|p| !p.is_empty()).map(Value::str).collect())
            }
            "lines" => array(s.lines().map(Value::str).collect()),
            "asArray" => array(chars.iter().map(|c| Value::str(&c.to_string())).collect()),
            "do:" => {
                for c in &chars {
                    self.call_value(&args[0], vec![Value::str(&c.to_string())])?;
                }
                recv.clone()
            }
            "select:" | "reject:" => {
                let want = sel == "select:";
                let mut out = String::new();
                for c in &chars {
                    if self.test(&args[0], vec![Value::str(&c.to_string())])? == want {
                        out.push(*c);
                    }
                }
                Value::str(&out)
            }
            "collect:" => {
                let mut out = Vec::new();
                for c in &chars {
                    out.push(self.call_value(&args[0], vec![Value::str(&c.to_string())])?);
                }
                if out.iter().all(|v| matches!(v, Value::Str(x) if x.chars().count() == 1)) {
                    Value::str(&out.iter().filter_map(|v| v.str_content()).collect::<String>())
                } else {
                    array(out)
                }
            }
            "value:" if is_sym => return self.send(args[0].clone(), &s, vec![]).map(Some),
            "numArgs" if is_sym => Value::Int(arity(&s) as i64),
            _ => return self.empty_tests(recv, chars.is_empty(), sel, args),
        };
        Ok(Some(v))
    }

    fn empty_tests(&mut self, recv: &Value, empty: bool, sel: &str, args: &[Value]) -> Native {
        Ok(Some(match sel {
            "ifEmpty:" => {
                if empty { self.call_value(&args[0], vec![])? } else { recv.clone() }
            }
            "ifNotEmpty:" => {
                if empty {
                    recv.clone()
                } else {
                    let a = if Self::block_arity(&args[0]) == 1 { vec![recv.clone()] } else { vec![] };
                    self.call_value(&args[0], a)?
                }
            }
            "ifEmpty:ifNotEmpty:" => {
                if empty {
                    self.call_value(&args[0], vec![])?
                } else {
                    let a = if Self::block_arity(&args[1]) == 1 { vec![recv.clone()] } else { vec![] };
                    self.call_value(&args[1], a)?
                }
            }
            "isEmptyOrNil" => Value::Bool(empty),
            _ => return Ok(None),
        }))
    }

    // ---- arrays and ordered collections -------------------------------

    fn same_kind(is_list: bool, items: Vec<Value>) -> Value {
        if is_list { list(items) } else { array(items) }
    }

    fn merge_sort(&mut self, items: Vec<Value>, block: Option<&Value>) -> Result<Vec<Value>, Unwind> {
        if items.len() <= 1 {
            return Ok(items);
        }
        let mut left = items;
        let right = left.split_off(left.len() / 2);
        let left = self.merge_sort(left, block)?;
        let right = self.merge_sort(right, block)?;
        let mut out = Vec::with_capacity(left.len() + right.len());
        let (mut l, mut r) = (left.into_iter().peekable(), right.into_iter().peekable());
        while let (Some(a), Some(b)) = (l.peek(), r.peek()) {
            let before = match block {
                Some(blk) => self.test(blk, vec![a.clone(), b.clone()])?,
                None => self.send(a.clone(), "<=", vec![b.clone()])?.truthy() == Some(true),
            };
            if before {
                out.push(l.next().unwrap());
            } else {
                out.push(r.next().unwrap());
            }
        }
        out.extend(l);
        out.extend(r);
        Ok(out)
    }

    fn position(&mut self, items: &[Value], target: &Value) -> Result<Option<usize>, Unwind> {
        for (i, item) in items.iter().enumerate() {
            if self.values_equal(item, target)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    fn extreme(&mut self, items: &[Value], op: &str) -> Eval {
        let Some(mut best) = items.first().cloned() else {
            return self.error("CollectionIsEmpty", "collection is empty");
        };
        for item in &items[1..] {
            if self.send(item.clone(), op, vec![best.clone()])?.truthy() == Some(true) {
                best = item.clone();
            }
        }
        Ok(best)
    }

    fn seq_native(&mut self, recv: &Value, cell: &Shared<Vec<Value>>, is_list: bool, sel: &str, args: &[Value]) -> Native {
        let items = cell.borrow().clone();
        let n = items.len();
        let growable = |s: &mut Self| -> Result<(), Unwind> {
            if is_list { Ok(()) } else { s.error("ShouldNotImplement", format!("an Array cannot {sel}")) }
        };
        let v = match sel {
            "=" => Value::Bool(self.native_equal(recv, &args[0])?),
            "~=" => Value::Bool(!self.native_equal(recv, &args[0])?),
            "hash" => Value::Int(n as i64),
            "size" => Value::Int(n as i64),
            "isEmpty" => Value::Bool(n == 0),
            "notEmpty" => Value::Bool(n != 0),
            "isCollection" => Value::Bool(true),
            "isArray" => Value::Bool(!is_list),
            "printString" | "displayString" => Value::str(&self.native_print(recv)?),
            "copy" | "shallowCopy" | "deepCopy" => Self::same_kind(is_list, items),
            "asArray" => array(items),
            "asOrderedCollection" => list(items),
            "reversed" => Self::same_kind(is_list, items.into_iter().rev().collect()),
            "at:" => {
                let i = self.index(&args[0], n)?;
                items[i].clone()
            }
            "at:ifAbsent:" => match &args[0] {
                Value::Int(i) if *i >= 1 && (*i as usize) <= n => items[*i as usize - 1].clone(),
                _ => self.call_value(&args[1], vec![])?,
            },
            "at:put:" => {
                let i = self.index(&args[0], n)?;
                cell.borrow_mut()[i] = args[1].clone();
                args[1].clone()
            }
            "first" | "last" | "anyOne" => {
                if n == 0 {
                    return self.error("CollectionIsEmpty", "collection is empty");
                }
                if sel == "last" { items[n - 1].clone() } else { items[0].clone() }
            }
            "second" => {
                let i = self.index(&Value::Int(2), n)?;
                items[i].clone()
            }
            "first:" | "last:" => {
                let k = self.int_arg(&args[0])?;
                if k < 0 || k as usize > n {
                    return self.error("SubscriptOutOfBounds", format!("index {k} out of bounds"));
                }
                let k = k as usize;
                let part = if sel == "first:" { items[..k].to_vec() } else { items[n - k..].to_vec() };
                Self::same_kind(is_list, part)
            }
            "allButFirst" => Self::same_kind(is_list, items.into_iter().skip(1).collect()),
            "allButLast" => Self::same_kind(is_list, items.into_iter().take(n.saturating_sub(1)).collect()),
            "copyFrom:to:" => {
                let from = self.int_arg(&args[0])?;
                let to = self.int_arg(&args[1])?;
                if to < from {
                    Self::same_kind(is_list, vec![])
                } else {
                    let a = self.index(&Value::Int(from), n)?;
                    let b = self.index(&Value::Int(to), n)?;
                    Self::same_kind(is_list, items[a..=b].to_vec())
                }
            }
            "," => {
                let mut out = items;
                out.extend(self.collection_items(&args[0])?);
                Self::same_kind(is_list, out)
            }
            "copyWith:" => {
                let mut out = items;
                out.push(args[0].clone());
                Self::same_kind(is_list, out)
            }
            "copyWithout:" => {
                let mut out = Vec::new();
                for item in items {
                    if !self.values_equal(&item, &args[0])? {
                        out.push(item);
                    }
                }
                Self::same_kind(is_list, out)
            }
            "indexOf:" => Value::Int(self.position(&items, &args[0])?.map_or(0, |p| p as i64 + 1)),
            "includes:" => Value::Bool(self.position(&items, &args[0])?.is_some()),
            "occurrencesOf:" => {
                let mut count = 0;
                for item in &items {
                    if self.values_equal(item, &args[0])? {
                        count += 1;
                    }
                }
                Value::Int(count)
            }
            "do:" => {
                for item in items {
                    self.call_value(&args[0], vec![item])?;
                }
                recv.clone()
            }
            "reverseDo:" => {
                for item in items.into_iter().rev() {
                    self.call_value(&args[0], vec![item])?;
                }
                recv.clone()
            }
            "do:separatedBy:" => {
                for (i, item) in items.into_iter().enumerate() {
                    if i > 0 {
                        self.call_value(&args[1], vec![])?;
                    }
                    self.call_value(&args[0], vec![item])?;
                }
                recv.clone()
            }
            "doWithIndex:" | "withIndexDo:" => {
                for (i, item) in items.into_iter().enumerate() {
                    self.call_value(&args[0], vec![item, Value::Int(i as i64 + 1)])?;
                }
                recv.clone()
            }
            "keysAndValuesDo:" => {
                for (i, item) in items.into_iter().enumerate() {
                    self.call_value(&args[0], vec![Value::Int(i as i64 + 1), item])?;
                }
                recv.clone()
            }
            "collect:" => {
                let mut out = Vec::with_capacity(n);
                for item in items {
                    out.push(self.call_value(&args[0], vec![item])?);
                }
                Self::same_kind(is_list, out)
            }
            "withIndexCollect:" => {
                let mut out = Vec::with_capacity(n);
                for (i, item) in items.into_iter().enumerate() {
                    out.push(self.call_value(&args[0], vec![item, Value::Int(i as i64 + 1)])?);
                }
                Self::same_kind(is_list, out)
            }
            "select:" | "reject:" => {
                let want = sel == "select:";
                let mut out = Vec::new();
                for item in items {
                    if self.test(&args[0], vec![item.clone()])? == want {
                        out.push(item);
                    }
                }
                Self::same_kind(is_list, out)
            }
            "detect:" | "detect:ifNone:" => {
                for item in items {
                    if self.test(&args[0], vec![item.clone()])? {
                        return Ok(Some(item));
                    }
                }
                if sel == "detect:" {
                    return self.error("NotFound", "no element satisfies the condition");
                }
                self.call_value(&args[1], vec![])?
            }
            "anySatisfy:" | "contains:" | "allSatisfy:" | "noneSatisfy:" => {
                let mut any = false;
                let mut all = true;
                for item in items {
                    if self.test(&args[0], vec![item])? {
                        any = true;
                    } else {
                        all = false;
                    }
                }
                Value::Bool(match sel {
                    "allSatisfy:" => all,
                    "noneSatisfy:" => !any,
                    _ => any,
                })
            }
            "count:" => {
                let mut count = 0;
                for item in items {
                    if self.test(&args[0], vec![item])? {
                        count += 1;
                    }
                }
                Value::Int(count)
            }
            "inject:into:" => {
                let mut acc = args[0].clone();
                for item in items {
                    acc = self.call_value(&args[1], vec![acc, item])?;
                }
                acc
            }
            "sum" => {
                let mut acc = Value::Int(0);
                for item in items {
                    acc = self.send(acc, "+", vec![item])?;
                }
                acc
            }
            "max" => self.extreme(&items, ">")?,
            "min" => self.extreme(&items, "<")?,
            "sorted" | "asSortedCollection" => Self::same_kind(is_list, self.merge_sort(items, None)?),
            "sorted:" => Self::same_kind(is_list, self.merge_sort(items, Some(&args[0]))?),
            "sort" | "sort:" => {
                let sorted = self.merge_sort(items, args.first())?;
                *cell.borrow_mut() = sorted;
                recv.clone()
            }
            "add:" | "addLast:" => {
                growable(self)?;
                cell.borrow_mut().push(args[0].clone());
                args[0].clone()
            }
            "addFirst:" => {
                growable(self)?;
                cell.borrow_mut().insert(0, args[0].clone());
                args[0].clone()
            }
            "addAll:" => {
                growable(self)?;
                let more = self.collection_items(&args[0])?;
                cell.borrow_mut().extend(more);
                args[0].clone()
            }
            "add:beforeIndex:" => {
                growable(self)?;
                let i = self.index(&args[1], n + 1)?;
                cell.borrow_mut().insert(i, args[0].clone());
                args[0].clone()
            }
            "removeFirst" | "removeLast" => {
                growable(self)?;
                if n == 0 {
                    return self.error("CollectionIsEmpty", "collection is empty");
                }
                let mut v = cell.borrow_mut();
                if sel == "removeFirst" { v.remove(0) } else { v.pop().unwrap() }
            }
            "removeFirst:" | "removeLast:" => {
                growable(self)?;
                let k = self.int_arg(&args[0])?;
                if k < 0 || k as usize > n {
                    return self.error("CollectionIsEmpty", "not enough elements");
                }
                let mut v = cell.borrow_mut();
                let removed: Vec<Value> =
                    if sel == "removeFirst:" { v.drain(..k as usize).collect() } else { v.split_off(n - k as usize) };
                array(removed)
            }
            "remove:" | "remove:ifAbsent:" => {
                growable(self)?;
                match self.position(&items, &args[0])? {
                    Some(p) => {
                        cell.borrow_mut().remove(p);
                        args[0].clone()
                    }
                    None if sel == "remove:" => return self.error("NotFound", "object is not in the collection"),
                    None => self.call_value(&args[1], vec![])?,
                }
            }
            "removeAll:" => {
                growable(self)?;
                for item in self.collection_items(&args[0])? {
                    let current = cell.borrow().clone();
                    match self.position(&current, &item)? {
                        Some(p) => {
                            cell.borrow_mut().remove(p);
                        }
                        None => return self.error("NotFound", "object is not in the collection"),
                    }
                }
                args[0].clone()
            }
            "removeAll" => {
                growable(self)?;
                cell.borrow_mut().clear();
                recv.clone()
            }
            "removeAt:" | "removeIndex:" => {
                growable(self)?;
                let i = self.index(&args[0], n)?;
                cell.borrow_mut().remove(i)
            }
            _ => return self.empty_tests(recv, n == 0, sel, args),
        };
        Ok(Some(v))
    }

    // ---- dictionaries -------------------------------------------------

    fn dict_find(&mut self, entries: &[(Value, Value)], key: &Value) -> Result<Option<usize>, Unwind> {
        for (i, (k, _)) in entries.iter().enumerate() {
            if self.values_equal(k, key)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    fn dict_native(&mut self, recv: &Value, cell: &Shared<Vec<(Value, Value)>>, sel: &str, args: &[Value]) -> Native {
        let entries = cell.borrow().clone();
        let n = entries.len();
        let v = match sel {
            "=" => Value::Bool(self.native_equal(recv, &args[0])?),
            "~=" => Value::Bool(!self.native_equal(recv, &args[0])?),
            "hash" | "size" => Value::Int(n as i64),
            "isEmpty" => Value::Bool(n == 0),
            "notEmpty" => Value::Bool(n != 0),
            "isCollection" | "isDictionary" => Value::Bool(true),
            "printString" | "displayString" => Value::str(&self.native_print(recv)?),
            "copy" | "shallowCopy" | "deepCopy" => Value::Dict(Rc::new(RefCell::new(entries))),
            "at:" | "at:ifAbsent:" | "at:ifAbsentPut:" | "at:ifPresent:" | "removeKey:" | "removeKey:ifAbsent:"
            | "includesKey:" => {
                let found = self.dict_find(&entries, &args[0])?;
                match (sel, found) {
                    ("includesKey:", f) => Value::Bool(f.is_some()),
                    ("at:" | "at:ifAbsent:" | "at:ifAbsentPut:", Some(i)) => entries[i].1.clone(),
                    ("at:ifPresent:", Some(i)) => self.call_value(&args[1], vec![entries[i].1.clone()])?,
                    ("at:ifPresent:", None) => Value::Nil,
                    ("removeKey:" | "removeKey:ifAbsent:", Some(i)) => cell.borrow_mut().remove(i).1,
                    ("at:ifAbsent:" | "removeKey:ifAbsent:", None) => self.call_value(&args[1], vec![])?,
                    ("at:ifAbsentPut:", None) => {
                        let v = self.call_value(&args[1], vec![])?;
                        cell.borrow_mut().push((args[0].clone(), v.clone()));
                        v
                    }
                    (_, None) => {
                        let key = self.print_string(&args[0])?;
                        return self.error("KeyNotFound", format!("key {key} not found"));
                    }
                    _ => unreachable!(),
                }
            }
            "at:put:" => {
                match self.dict_find(&entries, &args[0])? {
                    Some(i) => cell.borrow_mut()[i].1 = args[1].clone(),
                    None => cell.borrow_mut().push((args[0].clone(), args[1].clone())),
                }
                args[1].clone()
            }
            "includes:" => Value::Bool(self.position(&entries.iter().map(|e| e.1.clone()).collect::<Vec<_>>(), &args[0])?.is_some()),
            "keyAtValue:" => {
                let mut found = Value::Nil;
                for (k, v) in &entries {
                    if self.values_equal(v, &args[0])? {
                        found = k.clone();
                        break;
                    }
                }
                found
            }
            "keys" => array(entries.into_iter().map(|e| e.0).collect()),
            "values" => array(entries.into_iter().map(|e| e.1).collect()),
            "do:" | "valuesDo:" => {
                for (_, v) in entries {
                    self.call_value(&args[0], vec![v])?;
                }
                recv.clone()
            }
            "keysDo:" => {
                for (k, _) in entries {
                    self.call_value(&args[0], vec![k])?;
                }
                recv.clone()
            }
            "keysAndValuesDo:" => {
                for (k, v) in entries {
                    self.call_value(&args[0], vec![k, v])?;
                }
                recv.clone()
            }
            "collect:" => {
                let mut out = Vec::with_capacity(n);
                for (_, v) in entries {
                    out.push(self.call_value(&args[0], vec![v])?);
                }
                array(out)
            }
            "select:" | "reject:" => {
                let want = sel == "select:";
                let mut out = Vec::new();
                for (k, v) in entries {
                    if self.test(&args[0], vec![v.clone()])? == want {
                        out.push((k, v));
                    }
                }
                Value::Dict(Rc::new(RefCell::new(out)))
            }
            "removeAll" => {
                cell.borrow_mut().clear();
                recv.clone()
            }
            _ => return self.empty_tests(recv, n == 0, sel, args),
        };
        Ok(Some(v))
    }

    // ---- blocks -------------------------------------------------------

    fn handles(&self, selector: &Value, ex: &Value) -> bool {
        match selector {
            Value::Class(c) => self.is_kind_of(ex, &c.name),
            Value::Array(items) => items.borrow().iter().any(|s| self.handles(s, ex)),
            _ => false,
        }
    }

    fn block_native(&mut self, b: &Rc<Closure>, sel: &str, args: &[Value]) -> Native {
        let v = match sel {
            "value" | "value:" | "value:value:" | "value:value:value:" | "value:value:value:value:" => {
                self.call_block(b, args.to_vec())?
            }
            "valueWithArguments:" => {
                let a = self.collection_items(&args[0])?;
                self.call_block(b, a)?
            }
            "numArgs" => Value::Int(b.block.params.len() as i64),
            "whileTrue:" | "whileFalse:" | "whileTrue" | "whileFalse" => {
                let want = sel.starts_with("whileTrue");
                loop {
                    let cond = match self.call_block(b, vec![])? {
                        Value::Bool(c) => c,
                        other => {
                            return self.error("NonBooleanReceiver", format!("{} is not a Boolean", other.type_name()))
                        }
                    };
                    if cond != want {
                        break;
                    }
                    if let Some(body) = args.first() {
                        self.call_value(body, vec![])?;
                    }
                }
                Value::Nil
            }
            "repeat" => loop {
                self.call_block(b, vec![])?;
            },
            "on:do:" => match self.call_block(b, vec![]) {
                Err(Unwind::Signal(ex)) if self.handles(&args[0], &ex) => {
                    let id = match &ex {
                        Value::Object(o) => o.id,
                        _ => 0,
                    };
                    let handler_args = if Self::block_arity(&args[1]) == 1 { vec![ex] } else { vec![] };
                    match self.call_value(&args[1], handler_args) {
                        Err(Unwind::HandlerReturn { exception, value }) if exception == id => value,
                        other => other?,
                    }
                }
                other => other?,
            },
            "ensure:" | "ifCurtailed:" => {
                let result = self.call_block(b, vec![]);
                let run_cleanup = match &result {
                    Err(Unwind::Limit(_)) => false,
                    Ok(_) => sel == "ensure:",
                    Err(_) => true,
                };
                if run_cleanup {
                    self.call_value(&args[0], vec![])?;
                }
                result?
            }
            _ => return Ok(None),
        };
        Ok(Some(v))
    }

    // ---- classes ------------------------------------------------------

    fn class_native(&mut self, c: &Arc<Class>, sel: &str, args: &[Value]) -> Native {
        let v = match sel {
            "new" | "basicNew" => match c.name.as_str() {
                "OrderedCollection" => list(vec![]),
                "Array" => array(vec![]),
                "Dictionary" => Value::Dict(Rc::new(RefCell::new(vec![]))),
                "String" => Value::str(""),
                "Integer" | "Float" | "Number" | "Boolean" | "UndefinedObject" | "Symbol" | "BlockClosure"
                | "Class" | "Magnitude" | "Collection" => {
                    return self.error("ShouldNotImplement", format!("{} cannot be instantiated with new", c.name))
                }
                _ => {
                    let obj = self.allocate(c);
                    if sel == "new" {
                        self.send(obj.clone(), "initialize", vec![])?;
                    }
                    obj
                }
            },
            "new:" | "new:withAll:" => {
                let size = self.int_arg(&args[0])?;
                if size < 0 {
                    return self.error("Error", "negative size");
                }
                let fill = args.get(1).cloned().unwrap_or(Value::Nil);
                match c.name.as_str() {
                    "Array" => array(vec![fill; size as usize]),
                    "OrderedCollection" => list(vec![]),
                    "Dictionary" => Value::Dict(Rc::new(RefCell::new(vec![]))),
                    "String" => Value::str(&" ".repeat(size as usize)),
                    _ => return Ok(None),
                }
            }
            "with:" | "with:with:" | "with:with:with:" | "with:with:with:with:" | "withAll:" => {
                let items = if sel == "withAll:" { self.collection_items(&args[0])? } else { args.to_vec() };
                match c.name.as_str() {
                    "Array" => array(items),
                    "OrderedCollection" => list(items),
                    _ => return Ok(None),
                }
            }
            "name" | "printString" | "displayString" | "asString" => Value::str(&c.name),
            "superclass" => match c.superclass.as_deref().and_then(|s| self.image.class(s)) {
                Some(s) => Value::Class(s.clone()),
                None => Value::Nil,
            },
            "selectors" => array(c.methods.keys().map(|s| Value::sym(s)).collect()),
            "includesSelector:" => Value::Bool(matches!(&args[0], Value::Sym(s) | Value::Str(s) if c.methods.contains_key(s.as_ref()))),
            "canUnderstand:" => Value::Bool(match &args[0] {
                Value::Sym(s) | Value::Str(s) => self.image.lookup(&c.name, s, false).is_some(),
                _ => false,
            }),
            "inheritsFrom:" => Value::Bool(match &args[0] {
                Value::Class(o) => o.name != c.name && self.image.inherits_from(&c.name, &o.name),
                _ => false,
            }),
            "handles:" => Value::Bool(self.is_kind_of(&args[0], &c.name)),
            "," => array(vec![Value::Class(c.clone()), args[0].clone()]),
            "=" => Value::Bool(matches!(&args[0], Value::Class(o) if o.name == c.name)),
            "hash" => Value::Int(c.name.len() as i64),
            "isClass" => Value::Bool(true),
            _ => return Ok(None),
        };
        Ok(Some(v))
    }

    // ---- everything ---------------------------------------------------

    fn object_native(&mut self, recv: &Value, sel: &str, args: &[Value]) -> Native {
        let v = match sel {
            "==" => Value::Bool(recv.identical(&args[0])),
            "~~" => Value::Bool(!recv.identical(&args[0])),
            "=" => Value::Bool(recv.identical(&args[0])),
            "~=" => Value::Bool(!self.values_equal(recv, &args[0])?),
            "hash" | "identityHash" => Value::Int(match recv {
                Value::Object(o) => o.id as i64,
                _ => 0,
            }),
            "class" => match recv {
                Value::Object(o) => Value::Class(o.class.clone()),
                other => self.class_value(other),
            },
            "isNil" => Value::Bool(matches!(recv, Value::Nil)),
            "notNil" => Value::Bool(!matches!(recv, Value::Nil)),
            "isEmptyOrNil" => Value::Bool(matches!(recv, Value::Nil)),
            "ifNil:" => match recv {
                Value::Nil => self.call_value(&args[0], vec![])?,
                other => other.clone(),
            },
            "ifNotNil:" => match recv {
                Value::Nil => Value::Nil,
                other => self.with_optional_arg(&args[0], other)?,
            },
            "ifNil:ifNotNil:" => match recv {
                Value::Nil => self.call_value(&args[0], vec![])?,
                other => self.with_optional_arg(&args[1], other)?,
            },
            "ifNotNil:ifNil:" => match recv {
                Value::Nil => self.call_value(&args[1], vec![])?,
                other => self.with_optional_arg(&args[0], other)?,
            },
            "isKindOf:" => Value::Bool(match &args[0] {
                Value::Class(c) => self.is_kind_of(recv, &c.name),
                _ => false,
            }),
            "isMemberOf:" => Value::Bool(match &args[0] {
                Value::Class(c) => recv.class_name() == c.name,
                _ => false,
            }),
            "respondsTo:" => Value::Bool(match &args[0] {
                Value::Sym(s) | Value::Str(s) => {
                    let (name, side) = match recv {
                        Value::Class(c) => (c.name.clone(), true),
                        other => (other.class_name().to_string(), false),
                    };
                    self.image.lookup(&name, s, side).is_some() || UNIVERSAL.contains(&s.as_ref())
                }
                _ => false,
            }),
            "yourself" | "value" | "inspect" | "halt" => recv.clone(),
            "in:" => self.call_value(&args[0], vec![recv.clone()])?,
            "printString" | "asString" => Value::str(&self.native_print(recv)?),
            "displayString" => Value::str(&self.display_string(recv)?),
            "copy" | "shallowCopy" | "deepCopy" => match recv {
                Value::Object(o) => {
                    let id = self.fresh_id();
                    Value::Object(Rc::new(crate::value::Object {
                        class: o.class.clone(),
                        fields: RefCell::new(o.fields.borrow().clone()),
                        id,
                    }))
                }
                other => other.clone(),
            },
            "perform:" | "perform:with:" | "perform:with:with:" | "perform:withArguments:" => {
                let selector = match &args[0] {
                    Value::Sym(s) | Value::Str(s) => s.to_string(),
                    other => return self.error("Error", format!("{} is not a selector", other.type_name())),
                };
                let rest =
                    if sel == "perform:withArguments:" { self.collection_items(&args[1])? } else { args[1..].to_vec() };
                self.send(recv.clone(), &selector, rest)?
            }
            "error:" => {
                let text = self.display_string(&args[0])?;
                return self.error("Error", text);
            }
            "instVarNamed:" => match recv {
                Value::Object(o) => match &args[0] {
                    Value::Sym(s) | Value::Str(s) => match o.class.ivar_index(s) {
                        Some(i) => o.fields.borrow()[i].clone(),
                        None => return self.error("Error", format!("no instance variable {s}")),
                    },
                    _ => Value::Nil,
                },
                _ => Value::Nil,
            },
            "isString" | "isSymbol" | "isNumber" | "isInteger" | "isFloat" | "isCollection" | "isArray"
            | "isDictionary" | "isClass" => Value::Bool(false),
            "isBlock" => Value::Bool(matches!(recv, Value::Block(_))),
            _ => return Ok(None),
        };
        Ok(Some(v))
    }

    fn with_optional_arg(&mut self, block: &Value, value: &Value) -> Eval {
        let a = if Self::block_arity(block) == 1 { vec![value.clone()] } else { vec![] };
        self.call_value(block, a)
    }
}
