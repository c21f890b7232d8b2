//! The class table a program runs against.
//!
//! Classes are immutable once loaded and shared through `Arc`, so cloning an
//! image is cheap and a clone can be handed to another thread. Method wrappers
//! are the one piece of mutable dispatch state: a wrapper observes every call
//! that dispatches to a given method and is removed again by the caller.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use crate::ast::{ClassDef, Literal, MethodDef};
use crate::error::LoadError;
use crate::parser::parse_file;
use crate::prelude::PRELUDE;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct MethodKey {
    pub class: String,
    pub selector: String,
    pub class_side: bool,
}

impl MethodKey {
    pub fn new(class: impl Into<String>, selector: impl Into<String>, class_side: bool) -> Self {
        MethodKey { class: class.into(), selector: selector.into(), class_side }
    }

    /// Selector as seen from the class: `withdraw:` or `class>>for:`.
    pub fn label(&self) -> String {
        if self.class_side {
            format!("class>>{}", self.selector)
        } else {
            self.selector.clone()
        }
    }
}

impl fmt::Display for MethodKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.class_side {
            write!(f, "{} class>>{}", self.class, self.selector)
        } else {
            write!(f, "{}>>{}", self.class, self.selector)
        }
    }
}

#[derive(Debug)]
pub struct Method {
    pub def: MethodDef,
    pub key: MethodKey,
}

#[derive(Debug, Clone)]
pub struct Class {
    pub name: String,
    pub superclass: Option<String>,
    pub ivars: Vec<String>,
    /// Inherited instance variables first, then this class's own.
    pub all_ivars: Vec<String>,
    pub methods: BTreeMap<String, Arc<Method>>,
    pub class_methods: BTreeMap<String, Arc<Method>>,
    pub builtin: bool,
    /// Text of the defining `subclass:` block.
    pub source: Option<Arc<str>>,
}

impl Class {
    pub fn ivar_index(&self, name: &str) -> Option<usize> {
        self.all_ivars.iter().position(|v| v == name)
    }

    pub fn side(&self, class_side: bool) -> &BTreeMap<String, Arc<Method>> {
        if class_side {
            &self.class_methods
        } else {
            &self.methods
        }
    }
}

/// Argument as reported to a [`CallObserver`].
#[derive(Debug, Clone, PartialEq)]
pub struct ArgInfo {
    pub type_name: String,
    pub primitive: Option<Literal>,
}

pub trait CallObserver: Send + Sync {
    fn on_call(&self, key: &MethodKey, receiver_type: &str, args: &[ArgInfo]);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WrapError {
    NoSuchMethod,
    Primitive,
    AlreadyWrapped,
}

pub struct Image {
    classes: BTreeMap<String, Arc<Class>>,
    wrappers: RwLock<HashMap<MethodKey, Arc<dyn CallObserver>>>,
    wrapped: AtomicUsize,
}

impl Clone for Image {
    /// Clones the class table. Installed wrappers stay with the original.
    fn clone(&self) -> Self {
        Image { classes: self.classes.clone(), wrappers: RwLock::default(), wrapped: AtomicUsize::new(0) }
    }
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image").field("classes", &self.classes.keys().collect::<Vec<_>>()).finish()
    }
}

impl Default for Image {
    fn default() -> Self {
        Self::new()
    }
}

impl Image {
    /// An image holding only the prelude (kernel classes and `TestCase`).
    pub fn new() -> Self {
        let mut image = Image { classes: BTreeMap::new(), wrappers: RwLock::default(), wrapped: AtomicUsize::new(0) };
        image.load_inner(PRELUDE, true).expect("prelude must load");
        image
    }

    pub fn load(&mut self, src: &str) -> Result<Vec<String>, LoadError> {
        self.load_inner(src, false)
    }

    fn load_inner(&mut self, src: &str, builtin: bool) -> Result<Vec<String>, LoadError> {
        let file = parse_file(src)?;
        let mut staged = self.classes.clone();
        let mut names = Vec::new();
        let mut pending: Vec<&ClassDef> = Vec::new();
        for def in &file.classes {
            if def.is_extension() {
                continue;
            }
            if staged.contains_key(&def.name) || pending.iter().any(|p| p.name == def.name) {
                return Err(LoadError::DuplicateClass(def.name.clone()));
            }
            pending.push(def);
        }
        // superclasses may appear later in the same file
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for def in pending {
                let sup = def.superclass.as_deref().unwrap_or("Object");
                if staged.contains_key(sup) || (builtin && def.name == "Object") {
                    let source: Arc<str> = Arc::from(&src[def.span.0..def.span.1]);
                    let class = build_class(def, &staged, builtin, Some(source));
                    staged.insert(def.name.clone(), Arc::new(class));
                    names.push(def.name.clone());
                } else {
                    rest.push(def);
                }
            }
            if rest.len() == before {
                let def = rest[0];
                let sup = def.superclass.clone().unwrap_or_default();
                if rest.iter().any(|d| d.name == sup) {
                    return Err(LoadError::Cycle(def.name.clone()));
                }
                return Err(LoadError::UnknownSuperclass { class: def.name.clone(), superclass: sup });
            }
            pending = rest;
        }
        for def in file.classes.iter().filter(|d| d.is_extension()) {
            let existing = staged.get_mut(&def.name).ok_or_else(|| LoadError::UnknownExtension(def.name.clone()))?;
            let class = Arc::make_mut(existing);
            for m in &def.methods {
                add_method(class, m.clone(), false);
            }
            for m in &def.class_methods {
                add_method(class, m.clone(), true);
            }
        }
        self.classes = staged;
        Ok(names)
    }

    /// Replaces the definition of an existing class with a re-parsed one.
    /// Methods added by extensions are kept unless redefined.
    pub fn replace_class(&mut self, name: &str, src: &str) -> Result<(), LoadError> {
        let file = parse_file(src)?;
        let def = file
            .classes
            .iter()
            .find(|d| d.name == name && !d.is_extension())
            .ok_or_else(|| LoadError::UnknownExtension(name.to_string()))?;
        let old = self.classes.get(name).ok_or_else(|| LoadError::UnknownExtension(name.to_string()))?.clone();
        let mut class = build_class(def, &self.classes, old.builtin, Some(Arc::from(src)));
        let own: Vec<&str> = def.methods.iter().map(|m| m.selector.as_str()).collect();
        let own_class: Vec<&str> = def.class_methods.iter().map(|m| m.selector.as_str()).collect();
        let original = old.source.as_deref().and_then(|s| parse_file(s).ok());
        let original_def = original.as_ref().and_then(|f| f.classes.iter().find(|d| d.name == name));
        let from_def = |sel: &str, side: bool| {
            original_def.is_some_and(|d| {
                let ms = if side { &d.class_methods } else { &d.methods };
                ms.iter().any(|m| m.selector == sel)
            })
        };
        for (sel, m) in &old.methods {
            if !own.contains(&sel.as_str()) && !from_def(sel, false) {
                class.methods.insert(sel.clone(), m.clone());
            }
        }
        for (sel, m) in &old.class_methods {
            if !own_class.contains(&sel.as_str()) && !from_def(sel, true) {
                class.class_methods.insert(sel.clone(), m.clone());
            }
        }
        self.classes.insert(name.to_string(), Arc::new(class));
        Ok(())
    }

    /// Adds or replaces a single method.
    pub fn define_method(&mut self, class: &str, def: MethodDef, class_side: bool) -> bool {
        match self.classes.get_mut(class) {
            Some(c) => {
                add_method(Arc::make_mut(c), def, class_side);
                true
            }
            None => false,
        }
    }

    pub fn class(&self, name: &str) -> Option<&Arc<Class>> {
        self.classes.get(name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &Arc<Class>> {
        self.classes.values()
    }

    pub fn user_classes(&self) -> impl Iterator<Item = &Arc<Class>> {
        self.classes.values().filter(|c| !c.builtin)
    }

    /// Walks the superclass chain starting at `class`.
    pub fn lookup(&self, class: &str, selector: &str, class_side: bool) -> Option<Arc<Method>> {
        let mut current = self.classes.get(class);
        while let Some(c) = current {
            if let Some(m) = c.side(class_side).get(selector) {
                return Some(m.clone());
            }
            current = c.superclass.as_deref().and_then(|s| self.classes.get(s));
        }
        None
    }

    pub fn inherits_from(&self, class: &str, ancestor: &str) -> bool {
        let mut current = Some(class);
        while let Some(name) = current {
            if name == ancestor {
                return true;
            }
            current = self.classes.get(name).and_then(|c| c.superclass.as_deref());
        }
        false
    }

    /// Superclass chain from `class` up to the root, `class` first.
    pub fn ancestry(&self, class: &str) -> Vec<Arc<Class>> {
        let mut out = Vec::new();
        let mut current = self.classes.get(class);
        while let Some(c) = current {
            out.push(c.clone());
            current = c.superclass.as_deref().and_then(|s| self.classes.get(s));
        }
        out
    }

    pub fn install_wrapper(&self, key: &MethodKey, observer: Arc<dyn CallObserver>) -> Result<(), WrapError> {
        let class = self.classes.get(&key.class).ok_or(WrapError::NoSuchMethod)?;
        let method = class.side(key.class_side).get(&key.selector).ok_or(WrapError::NoSuchMethod)?;
        if method.def.primitive().is_some() {
            return Err(WrapError::Primitive);
        }
        let mut wrappers = self.wrappers.write().unwrap_or_else(|e| e.into_inner());
        if wrappers.contains_key(key) {
            return Err(WrapError::AlreadyWrapped);
        }
        wrappers.insert(key.clone(), observer);
        self.wrapped.store(wrappers.len(), Ordering::SeqCst);
        Ok(())
    }

    pub fn remove_wrapper(&self, key: &MethodKey) -> bool {
        let mut wrappers = self.wrappers.write().unwrap_or_else(|e| e.into_inner());
        let removed = wrappers.remove(key).is_some();
        self.wrapped.store(wrappers.len(), Ordering::SeqCst);
        removed
    }

    pub fn wrapper_count(&self) -> usize {
        self.wrapped.load(Ordering::SeqCst)
    }

    pub(crate) fn wrapper(&self, key: &MethodKey) -> Option<Arc<dyn CallObserver>> {
        if self.wrapped.load(Ordering::Relaxed) == 0 {
            return None;
        }
        self.wrappers.read().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }
}

fn add_method(class: &mut Class, def: MethodDef, class_side: bool) {
    let key = MethodKey::new(class.name.clone(), def.selector.clone(), class_side);
    let sel = def.selector.clone();
    let m = Arc::new(Method { def, key });
    if class_side {
        class.class_methods.insert(sel, m);
    } else {
        class.methods.insert(sel, m);
    }
}

fn build_class(def: &ClassDef, known: &BTreeMap<String, Arc<Class>>, builtin: bool, source: Option<Arc<str>>) -> Class {
    let superclass = if def.name == "Object" && builtin { None } else { def.superclass.clone() };
    let mut all_ivars = superclass
        .as_deref()
        .and_then(|s| known.get(s))
        .map(|c| c.all_ivars.clone())
        .unwrap_or_default();
    all_ivars.extend(def.ivars.iter().cloned());
    let mut class = Class {
        name: def.name.clone(),
        superclass,
        ivars: def.ivars.clone(),
        all_ivars,
        methods: BTreeMap::new(),
        class_methods: BTreeMap::new(),
        builtin,
        source,
    };
    for m in &def.methods {
        add_method(&mut class, m.clone(), false);
    }
    for m in &def.class_methods {
        add_method(&mut class, m.clone(), true);
    }
    class
}
