//! Tree-walking evaluator.
//!
//! Every run is bounded: a send budget stands in for a wall-clock timeout so
//! that runaway programs stop at the same point on every execution, an
//! optional deadline catches the rest, and the activation depth is capped.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::rc::Rc;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::ast::{Expr, MethodDef, Stmt};
use crate::image::{ArgInfo, Class, Image, Method, MethodKey};
use crate::value::{Closure, Context, Object, Scope, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Sends,
    Time,
    Depth,
}

#[derive(Debug, Clone)]
pub enum Unwind {
    /// A signalled exception object travelling to its handler.
    Signal(Value),
    /// `^` from inside a block, returning from the method activation `home`.
    NonLocal { home: u64, value: Value },
    /// `ex return: value` travelling to the `on:do:` handling `exception`.
    HandlerReturn { exception: u64, value: Value },
    /// A resource limit was hit; not catchable from the language.
    Limit(LimitKind),
}

pub type Eval = Result<Value, Unwind>;

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_sends: u64,
    pub deadline: Option<Instant>,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_sends: 5_000_000, deadline: None, max_depth: 1_000 }
    }
}

/// Receives calls to `<primitive: 'hook:...'>` methods.
pub trait Hook {
    fn primitive(&mut self, interp: &mut Interpreter<'_>, name: &str, receiver: &Value, args: &[Value]) -> Eval;
}

static LAST_CLOCK: AtomicI64 = AtomicI64::new(0);

/// Microseconds since the epoch, strictly increasing across calls.
fn clock_now() -> i64 {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as i64).unwrap_or(0);
    let mut prev = LAST_CLOCK.load(Ordering::SeqCst);
    loop {
        let next = now.max(prev + 1);
        match LAST_CLOCK.compare_exchange(prev, next, Ordering::SeqCst, Ordering::SeqCst) {
            Ok(_) => return next,
            Err(actual) => prev = actual,
        }
    }
}

const RED_ZONE: usize = 64 * 1024;
const STACK_CHUNK: usize = 2 * 1024 * 1024;

pub struct Interpreter<'a> {
    image: &'a Image,
    limits: Limits,
    sends: u64,
    depth: usize,
    next_id: u64,
    hook: Option<Box<dyn Hook + 'a>>,
    coverage: Option<BTreeSet<MethodKey>>,
}

impl<'a> Interpreter<'a> {
    pub fn new(image: &'a Image, limits: Limits) -> Self {
        Interpreter { image, limits, sends: 0, depth: 0, next_id: 1, hook: None, coverage: None }
    }

    pub fn image(&self) -> &'a Image {
        self.image
    }

    pub fn set_hook(&mut self, hook: Box<dyn Hook + 'a>) {
        self.hook = Some(hook);
    }

    pub fn enable_coverage(&mut self) {
        self.coverage = Some(BTreeSet::new());
    }

    /// User-defined methods entered so far (requires [`enable_coverage`](Self::enable_coverage)).
    pub fn coverage(&self) -> Option<&BTreeSet<MethodKey>> {
        self.coverage.as_ref()
    }

    pub fn sends(&self) -> u64 {
        self.sends
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn tick(&mut self) -> Result<(), Unwind> {
        self.sends += 1;
        if self.sends > self.limits.max_sends {
            return Err(Unwind::Limit(LimitKind::Sends));
        }
        if self.sends.is_multiple_of(1024) {
            if let Some(deadline) = self.limits.deadline {
                if Instant::now() >= deadline {
                    return Err(Unwind::Limit(LimitKind::Time));
                }
            }
        }
        Ok(())
    }

    // ---- errors -------------------------------------------------------

    pub fn new_exception(&mut self, class: &str, text: &str) -> Value {
        let class = self.image.class(class).or_else(|| self.image.class("Error")).expect("prelude defines Error").clone();
        let obj = self.allocate(&class);
        if let (Value::Object(o), Some(idx)) = (&obj, class.ivar_index("messageText")) {
            o.fields.borrow_mut()[idx] = Value::str(text);
        }
        obj
    }

    pub fn error<T>(&mut self, class: &str, text: impl AsRef<str>) -> Result<T, Unwind> {
        Err(Unwind::Signal(self.new_exception(class, text.as_ref())))
    }

    fn not_understood<T>(&mut self, receiver: &Value, selector: &str) -> Result<T, Unwind> {
        let text = format!("{} does not understand #{}", receiver.type_name(), selector);
        self.error("MessageNotUnderstood", text)
    }

    /// Class name and message text of a signalled exception value.
    pub fn exception_info(&self, ex: &Value) -> (String, String) {
        match ex {
            Value::Object(o) => {
                let text = o
                    .class
                    .ivar_index("messageText")
                    .map(|i| o.fields.borrow()[i].clone())
                    .and_then(|v| match v {
                        Value::Str(s) => Some(s.to_string()),
                        _ => None,
                    })
                    .unwrap_or_else(|| o.class.name.clone());
                (o.class.name.clone(), text)
            }
            other => (other.type_name(), String::new()),
        }
    }

    // ---- objects ------------------------------------------------------

    pub fn allocate(&mut self, class: &Arc<Class>) -> Value {
        let id = self.fresh_id();
        Value::Object(Rc::new(Object {
            class: class.clone(),
            fields: RefCell::new(vec![Value::Nil; class.all_ivars.len()]),
            id,
        }))
    }

    pub fn instantiate(&mut self, class: &str) -> Eval {
        match self.image.class(class) {
            Some(c) => {
                let c = c.clone();
                self.send(Value::Class(c), "new", vec![])
            }
            None => self.error("UndeclaredVariable", format!("unknown class {class}")),
        }
    }

    pub fn is_kind_of(&self, value: &Value, class: &str) -> bool {
        match value {
            Value::Class(_) => class == "Class" || class == "Object",
            other => self.image.inherits_from(other.class_name(), class),
        }
    }

    pub fn class_value(&self, value: &Value) -> Value {
        match self.image.class(value.class_name()) {
            Some(c) => Value::Class(c.clone()),
            None => Value::Nil,
        }
    }

    pub fn elements(&self, value: &Value) -> Option<Vec<Value>> {
        match value {
            Value::Array(items) | Value::List(items) => Some(items.borrow().clone()),
            _ => None,
        }
    }

    pub fn dict_entries(&self, value: &Value) -> Option<Vec<(Value, Value)>> {
        match value {
            Value::Dict(d) => Some(d.borrow().clone()),
            _ => None,
        }
    }

    // ---- execution ----------------------------------------------------

    /// Sends `selector` to `receiver`.
    pub fn send(&mut self, receiver: Value, selector: &str, args: Vec<Value>) -> Eval {
        self.tick()?;
        let found = match &receiver {
            Value::Class(c) => self.image.lookup(&c.name, selector, true),
            other => self.image.lookup(other.class_name(), selector, false),
        };
        match found {
            Some(m) => self.invoke(receiver, &m, args),
            None => self.native(receiver, selector, args),
        }
    }

    fn super_send(&mut self, ctx: &Rc<Context>, selector: &str, args: Vec<Value>) -> Eval {
        self.tick()?;
        let found = ctx
            .class
            .superclass
            .as_deref()
            .and_then(|s| self.image.lookup(s, selector, ctx.class_side));
        match found {
            Some(m) => self.invoke(ctx.receiver.clone(), &m, args),
            None => self.native(ctx.receiver.clone(), selector, args),
        }
    }

    fn invoke(&mut self, receiver: Value, method: &Arc<Method>, args: Vec<Value>) -> Eval {
        if args.len() != method.def.params.len() {
            return self.error("WrongArgumentCount", format!("{} expects {} arguments", method.key, method.def.params.len()));
        }
        if let Some(observer) = self.image.wrapper(&method.key) {
            let infos: Vec<ArgInfo> =
                args.iter().map(|a| ArgInfo { type_name: a.type_name(), primitive: a.as_primitive() }).collect();
            observer.on_call(&method.key, &receiver.type_name(), &infos);
        }
        let class = self.image.class(&method.key.class).cloned().expect("method belongs to a loaded class");
        if let Some(cov) = &mut self.coverage {
            if !class.builtin {
                cov.insert(method.key.clone());
            }
        }
        if let Some(name) = method.def.primitive() {
            let name = name.to_string();
            return self.primitive(&name, receiver, args);
        }
        self.activate(receiver, class, method.key.class_side, &method.def, args)
    }

    /// Runs a method body that need not be installed in the image, as if it
    /// were defined in `class`. Used to execute generated test methods.
    pub fn run_method(&mut self, receiver: Value, class: &str, def: &MethodDef, args: Vec<Value>) -> Eval {
        let class = match self.image.class(class) {
            Some(c) => c.clone(),
            None => return self.error("UndeclaredVariable", format!("unknown class {class}")),
        };
        self.tick()?;
        self.activate(receiver, class, false, def, args)
    }

    fn activate(&mut self, receiver: Value, class: Arc<Class>, class_side: bool, def: &MethodDef, args: Vec<Value>) -> Eval {
        if self.depth >= self.limits.max_depth {
            return Err(Unwind::Limit(LimitKind::Depth));
        }
        self.depth += 1;
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || {
            let home = self.fresh_id();
            let mut vars: Vec<(String, Value)> = def.params.iter().cloned().zip(args).collect();
            vars.extend(def.temps.iter().map(|t| (t.clone(), Value::Nil)));
            let scope = Scope::new(vars, None);
            let ctx = Rc::new(Context { receiver: receiver.clone(), class, class_side, home });
            match self.exec_method_body(&def.body, &scope, &ctx) {
                Err(Unwind::NonLocal { home: h, value }) if h == home => Ok(value),
                other => other,
            }
        });
        self.depth -= 1;
        result
    }

    fn exec_method_body(&mut self, body: &[Stmt], scope: &Rc<Scope>, ctx: &Rc<Context>) -> Eval {
        for stmt in body {
            match stmt {
                Stmt::Return(e) => return self.eval(e, scope, ctx),
                Stmt::Expr(e) => {
                    self.eval(e, scope, ctx)?;
                }
            }
        }
        Ok(ctx.receiver.clone())
    }

    pub fn call_block(&mut self, closure: &Rc<Closure>, args: Vec<Value>) -> Eval {
        if args.len() != closure.block.params.len() {
            return self.error(
                "WrongArgumentCount",
                format!("block expects {} arguments, got {}", closure.block.params.len(), args.len()),
            );
        }
        self.tick()?;
        if self.depth >= self.limits.max_depth {
            return Err(Unwind::Limit(LimitKind::Depth));
        }
        self.depth += 1;
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || {
            let mut vars: Vec<(String, Value)> = closure.block.params.iter().cloned().zip(args).collect();
            vars.extend(closure.block.temps.iter().map(|t| (t.clone(), Value::Nil)));
            let scope = Scope::new(vars, Some(closure.scope.clone()));
            let ctx = &closure.context;
            let mut last = Value::Nil;
            for stmt in &closure.block.body {
                match stmt {
                    Stmt::Return(e) => {
                        let value = self.eval(e, &scope, ctx)?;
                        return Err(Unwind::NonLocal { home: ctx.home, value });
                    }
                    Stmt::Expr(e) => last = self.eval(e, &scope, ctx)?,
                }
            }
            Ok(last)
        });
        self.depth -= 1;
        result
    }

    /// Evaluates a "valuable": a block, or a symbol used as a one-argument block.
    pub fn call_value(&mut self, valuable: &Value, args: Vec<Value>) -> Eval {
        match valuable {
            Value::Block(b) => self.call_block(b, args),
            Value::Sym(s) if args.len() == 1 => {
                let mut args = args;
                let recv = args.remove(0);
                self.send(recv, s, vec![])
            }
            other => {
                let sel = match args.len() {
                    0 => "value",
                    1 => "value:",
                    2 => "value:value:",
                    _ => "valueWithArguments:",
                };
                self.not_understood(other, sel)
            }
        }
    }

    fn eval(&mut self, e: &Expr, scope: &Rc<Scope>, ctx: &Rc<Context>) -> Eval {
        match e {
            Expr::Lit(l) => Ok(Value::from_literal(l)),
            Expr::Var(name) => self.read_var(name, scope, ctx),
            Expr::Assign { target, value } => {
                let v = self.eval(value, scope, ctx)?;
                self.write_var(target, v.clone(), scope, ctx)?;
                Ok(v)
            }
            Expr::Send { receiver, selector, args } => {
                let is_super = matches!(receiver.as_ref(), Expr::Var(v) if v == "super");
                let recv = if is_super { Value::Nil } else { self.eval(receiver, scope, ctx)? };
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(a, scope, ctx)?);
                }
                if is_super {
                    self.super_send(ctx, selector, argv)
                } else {
                    self.send(recv, selector, argv)
                }
            }
            Expr::Cascade { receiver, messages } => {
                let recv = self.eval(receiver, scope, ctx)?;
                let mut last = Value::Nil;
                for m in messages {
                    let mut argv = Vec::with_capacity(m.args.len());
                    for a in &m.args {
                        argv.push(self.eval(a, scope, ctx)?);
                    }
                    last = self.send(recv.clone(), &m.selector, argv)?;
                }
                Ok(last)
            }
            Expr::Block(b) => Ok(Value::Block(Rc::new(Closure {
                block: b.clone(),
                scope: scope.clone(),
                context: ctx.clone(),
            }))),
            Expr::Brace(items) => {
                let mut out = Vec::with_capacity(items.len());
                for i in items {
                    out.push(self.eval(i, scope, ctx)?);
                }
                Ok(Value::Array(Rc::new(RefCell::new(out))))
            }
        }
    }

    fn read_var(&mut self, name: &str, scope: &Rc<Scope>, ctx: &Rc<Context>) -> Eval {
        if name == "self" || name == "super" {
            return Ok(ctx.receiver.clone());
        }
        if let Some(v) = scope.get(name) {
            return Ok(v);
        }
        if let Value::Object(o) = &ctx.receiver {
            if let Some(i) = o.class.ivar_index(name) {
                return Ok(o.fields.borrow()[i].clone());
            }
        }
        if let Some(c) = self.image.class(name) {
            return Ok(Value::Class(c.clone()));
        }
        self.error("UndeclaredVariable", format!("undeclared variable {name}"))
    }

    fn write_var(&mut self, name: &str, value: Value, scope: &Rc<Scope>, ctx: &Rc<Context>) -> Result<(), Unwind> {
        if scope.set(name, value.clone()) {
            return Ok(());
        }
        if let Value::Object(o) = &ctx.receiver {
            if let Some(i) = o.class.ivar_index(name) {
                o.fields.borrow_mut()[i] = value;
                return Ok(());
            }
        }
        self.error("UndeclaredVariable", format!("cannot assign undeclared variable {name}"))
    }

    /// Runs top-level statements with `receiver` as `self`.
    pub fn eval_statements(&mut self, receiver: Value, temps: &[String], body: &[Stmt]) -> Eval {
        let def = MethodDef {
            selector: "doIt".into(),
            params: vec![],
            temps: temps.to_vec(),
            pragmas: vec![],
            body: body.to_vec(),
        };
        let class = match &receiver {
            Value::Object(o) => o.class.clone(),
            other => match self.image.class(other.class_name()) {
                Some(c) => c.clone(),
                None => self.image.class("Object").expect("prelude").clone(),
            },
        };
        // a doit answers its last expression
        let mut body = def.body.clone();
        if let Some(Stmt::Expr(e)) = body.last().cloned() {
            *body.last_mut().unwrap() = Stmt::Return(e);
        }
        let def = MethodDef { body, ..def };
        self.activate(receiver, class, false, &def, vec![])
    }

    fn primitive(&mut self, name: &str, receiver: Value, args: Vec<Value>) -> Eval {
        if let Some(hook_name) = name.strip_prefix("hook:") {
            return match self.hook.take() {
                Some(mut hook) => {
                    let r = hook.primitive(self, hook_name, &receiver, &args);
                    self.hook = Some(hook);
                    r
                }
                None => Ok(Value::Nil),
            };
        }
        match name {
            "signal" => Err(Unwind::Signal(receiver)),
            "exReturn" => match &receiver {
                Value::Object(o) => Err(Unwind::HandlerReturn {
                    exception: o.id,
                    value: args.into_iter().next().unwrap_or(Value::Nil),
                }),
                _ => Ok(Value::Nil),
            },
            "clockNow" => Ok(Value::Int(clock_now())),
            "basicNew" => match &receiver {
                Value::Class(c) => {
                    let c = c.clone();
                    Ok(self.allocate(&c))
                }
                other => self.not_understood(other, "basicNew"),
            },
            other => self.error("Error", format!("unknown primitive {other}")),
        }
    }
}

mod natives;
