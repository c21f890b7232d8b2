//! Input amplification: new test inputs from assertion-free tests, and the
//! reduction that keeps the pool small.

use std::collections::{BTreeMap, BTreeSet};

use ampforge_lang::printer::literal_to_source;
use ampforge_lang::ast::arity;
use ampforge_lang::{Expr, Image, Literal};
use rand::distr::{Alphanumeric, Distribution};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::Serialize;

use crate::config::AmplificationConfig;
use crate::profiler::{callable_methods, TypeProfile};
use crate::syntax::{send, var, visit_literals};
use crate::test_model::{Statement, StatementKind, TestMethodModel};

pub const AMPLIFIER_NAMES: &[&str] = &["literals", "call_duplicate", "call_remove", "call_add"];

/// Builtin classes the call adder may instantiate with `new`.
const CONSTRUCTIBLE_BUILTINS: &[&str] = &["OrderedCollection", "Dictionary", "Array", "Object"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplifierKind {
    TypeSensitive,
    TypeInsensitive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplifierSpec {
    pub name: String,
    pub weight: f64,
    pub kind: AmplifierKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierRegistry {
    pub amplifiers: Vec<AmplifierSpec>,
}

impl Default for AmplifierRegistry {
    fn default() -> Self {
        Self::from_config(&AmplificationConfig::default())
    }
}

impl AmplifierRegistry {
    /// Enabled amplifiers with their configured weights.
    pub fn from_config(cfg: &AmplificationConfig) -> Self {
        let amplifiers = AMPLIFIER_NAMES
            .iter()
            .filter_map(|&name| {
                let settings = cfg.amplifier(name);
                settings.enabled.then(|| AmplifierSpec {
                    name: name.to_string(),
                    weight: settings.weight,
                    kind: if name == "call_add" { AmplifierKind::TypeSensitive } else { AmplifierKind::TypeInsensitive },
                })
            })
            .collect();
        AmplifierRegistry { amplifiers }
    }

    pub fn enabled(&self, name: &str) -> bool {
        self.amplifiers.iter().any(|a| a.name == name)
    }

    pub fn weight(&self, name: &str) -> f64 {
        self.amplifiers.iter().find(|a| a.name == name).map_or(1.0, |a| a.weight)
    }
}

/// Assertion-free inputs with the amplifier that produced each one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestInputPool {
    pub inputs: Vec<TestMethodModel>,
    pub origin: Vec<String>,
}

impl TestInputPool {
    pub fn push(&mut self, input: TestMethodModel, amplifier: &str) {
        self.inputs.push(input);
        self.origin.push(amplifier.to_string());
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn extend(&mut self, other: TestInputPool) {
        self.inputs.extend(other.inputs);
        self.origin.extend(other.origin);
    }

    /// Drops inputs whose code repeats an earlier input's.
    pub fn dedup(&mut self) {
        let mut seen = BTreeSet::new();
        let mut keep = Vec::new();
        for (t, o) in self.inputs.drain(..).zip(self.origin.drain(..)) {
            let key = t.statements.iter().map(|s| s.render()).collect::<Vec<_>>().join(".\n");
            if seen.insert(key) {
                keep.push((t, o));
            }
        }
        let (inputs, origin) = keep.into_iter().unzip();
        self.inputs = inputs;
        self.origin = origin;
    }
}

/// Replacement values for a number literal: zero, successor, predecessor,
/// double, half (integers truncate toward zero), negation, and every other
/// number in `others`. Values equal to `n`, repeated values and values that
/// would overflow are left out.
pub fn number_variants(n: &Literal, others: &[Literal]) -> Vec<Literal> {
    let mut out: Vec<Literal> = match *n {
        Literal::Int(x) => [Some(0), x.checked_add(1), x.checked_sub(1), x.checked_mul(2), Some(x / 2), x.checked_neg()]
            .into_iter()
            .flatten()
            .map(Literal::Int)
            .collect(),
        Literal::Float(x) => [0.0, x + 1.0, x - 1.0, x * 2.0, x / 2.0, -x]
            .into_iter()
            .filter(|f| f.is_finite())
            .map(Literal::Float)
            .collect(),
        _ => return vec![],
    };
    out.extend(others.iter().filter(|o| o.is_number()).cloned());
    let mut unique: Vec<Literal> = Vec::new();
    for v in out {
        if v != *n && !unique.contains(&v) {
            unique.push(v);
        }
    }
    unique
}

fn random_char(rng: &mut impl Rng) -> char {
    Alphanumeric.sample(rng) as char
}

/// One random character added, removed and changed, and the whole string
/// replaced by a random one of the same length.
pub fn string_variants(s: &str, rng: &mut impl Rng) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut added = chars.clone();
    added.insert(rng.random_range(0..=chars.len()), random_char(rng));
    out.push(added);
    if !chars.is_empty() {
        let mut removed = chars.clone();
        removed.remove(rng.random_range(0..chars.len()));
        out.push(removed);

        let mut changed = chars.clone();
        let i = rng.random_range(0..chars.len());
        changed[i] = loop {
            let c = random_char(rng);
            if c != chars[i] {
                break c;
            }
        };
        out.push(changed);

        out.push((0..chars.len()).map(|_| random_char(rng)).collect());
    }
    let mut unique: Vec<String> = Vec::new();
    for v in out.into_iter().map(|v| v.into_iter().collect::<String>()) {
        if v != s && !unique.contains(&v) {
            unique.push(v);
        }
    }
    unique
}

fn numbers_in(t: &TestMethodModel) -> Vec<Literal> {
    let mut out: Vec<Literal> = Vec::new();
    for s in &t.statements {
        visit_literals(s.expr(), &mut |l| {
            if l.is_number() && !out.contains(l) {
                out.push(l.clone());
            }
        });
    }
    out
}

/// One variant per literal site and applicable transformation.
pub fn amplify_literals(t: &TestMethodModel, rng: &mut impl Rng) -> Vec<TestMethodModel> {
    let numbers = numbers_in(t);
    let mut out = Vec::new();
    for (i, s) in t.statements.iter().enumerate() {
        for site in s.literal_sites() {
            let values: Vec<Literal> = match &site.value {
                Literal::Int(_) | Literal::Float(_) => {
                    let others: Vec<Literal> = numbers.iter().filter(|n| **n != site.value).cloned().collect();
                    number_variants(&site.value, &others)
                }
                Literal::Bool(b) => vec![Literal::Bool(!b)],
                Literal::Str(text) => string_variants(text, rng).into_iter().map(Literal::Str).collect(),
                _ => vec![],
            };
            for v in values {
                let detail =
                    format!("statement {}: {} -> {}", i + 1, literal_to_source(&site.value), literal_to_source(&v));
                let mut variant = t.derive(t.name.clone(), "literals", detail);
                variant.statements[i] = s.with_literal(&site.path, v);
                out.push(variant);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct MethodCallVariants {
    pub duplicated: Vec<TestMethodModel>,
    pub removed: Vec<TestMethodModel>,
    pub added: Vec<TestMethodModel>,
    /// Insertions given up because an argument could not be built.
    pub skipped_insertions: usize,
}

pub struct CallContext<'a> {
    pub image: &'a Image,
    pub profile: &'a TypeProfile,
    pub cfg: &'a AmplificationConfig,
}

pub fn duplicate_calls(t: &TestMethodModel) -> Vec<TestMethodModel> {
    let mut out = Vec::new();
    for (i, s) in t.statements.iter().enumerate() {
        if s.kind == StatementKind::Invocation {
            let mut v = t.derive(t.name.clone(), "call_duplicate", format!("statement {}: {}", i + 1, s.render()));
            v.statements.insert(i + 1, s.clone());
            out.push(v);
        }
    }
    out
}

pub fn remove_calls(t: &TestMethodModel) -> Vec<TestMethodModel> {
    let mut out = Vec::new();
    for (i, s) in t.statements.iter().enumerate() {
        if s.kind == StatementKind::Invocation {
            let mut v = t.derive(t.name.clone(), "call_remove", format!("statement {}: {}", i + 1, s.render()));
            v.statements.remove(i);
            out.push(v);
        }
    }
    out
}

fn build_argument(ctx: &CallContext<'_>, method: &ampforge_lang::MethodKey, index: usize, rng: &mut impl Rng) -> Option<Expr> {
    let obs = ctx.profile.param(method, index)?;
    if let Some(sample) = obs.samples.choose(rng) {
        return Some(Expr::Lit(sample.clone()));
    }
    obs.type_names
        .iter()
        .find(|t| {
            ctx.image.class(t).is_some_and(|c| !c.builtin) || CONSTRUCTIBLE_BUILTINS.contains(&t.as_str())
        })
        .map(|t| send(var(t), "new", vec![]))
}

/// Calls to public methods of each variable's profiled class, inserted at a
/// random point after the variable is bound.
pub fn add_calls(t: &TestMethodModel, ctx: &CallContext<'_>, rng: &mut impl Rng) -> (Vec<TestMethodModel>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    for (i, s) in t.statements.iter().enumerate() {
        let Some(target) = s.target() else { continue };
        for type_name in ctx.profile.var_types(&t.parent, target) {
            if !ctx.image.class(&type_name).is_some_and(|c| !c.builtin) {
                continue;
            }
            'methods: for m in callable_methods(ctx.image, &type_name, ctx.cfg) {
                if m.def.selector == "initialize" {
                    continue;
                }
                let mut args = Vec::new();
                for index in 0..arity(&m.def.selector) {
                    match build_argument(ctx, &m.key, index, rng) {
                        Some(a) => args.push(a),
                        None => {
                            skipped += 1;
                            continue 'methods;
                        }
                    }
                }
                let call = Statement::new(StatementKind::Invocation, send(var(target), &m.def.selector, args));
                let at = rng.random_range(i + 1..=t.statements.len());
                let detail = format!("statement {}: {}", at + 1, call.render());
                let mut v = t.derive(t.name.clone(), "call_add", detail);
                v.statements.insert(at, call);
                out.push(v);
            }
        }
    }
    (out, skipped)
}

pub fn amplify_method_calls(t: &TestMethodModel, ctx: &CallContext<'_>, rng: &mut impl Rng) -> MethodCallVariants {
    let (added, skipped_insertions) = add_calls(t, ctx, rng);
    MethodCallVariants { duplicated: duplicate_calls(t), removed: remove_calls(t), added, skipped_insertions }
}

/// Runs every enabled amplifier on `t`. Returns the pool and the number of
/// skipped call insertions.
pub fn amplify(
    t: &TestMethodModel,
    registry: &AmplifierRegistry,
    ctx: &CallContext<'_>,
    rng: &mut impl Rng,
) -> (TestInputPool, usize) {
    let mut pool = TestInputPool::default();
    let mut skipped = 0;
    for a in &registry.amplifiers {
        let variants = match a.name.as_str() {
            "literals" => amplify_literals(t, rng),
            "call_duplicate" => duplicate_calls(t),
            "call_remove" => remove_calls(t),
            "call_add" => {
                let (v, s) = add_calls(t, ctx, rng);
                skipped += s;
                v
            }
            _ => vec![],
        };
        for v in variants {
            pool.push(v, &a.name);
        }
    }
    (pool, skipped)
}

/// Which pool positions a reduction kept, by slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub competitive: Vec<usize>,
    pub balanced: Vec<usize>,
}

impl Reduction {
    pub fn kept(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.competitive.iter().chain(&self.balanced).copied().collect();
        all.sort_unstable();
        all
    }
}

/// Chooses at most `n_max` of `origins.len()` inputs. Half of the budget
/// (rounded up) is drawn uniformly from the whole pool; the rest goes first
/// to one input from each amplifier still holding unchosen inputs, heaviest
/// amplifier first, then by smooth weighted round robin.
pub fn plan_reduction(origins: &[String], n_max: usize, registry: &AmplifierRegistry, rng: &mut impl Rng) -> Reduction {
    let n = origins.len();
    if n <= n_max {
        return Reduction { competitive: (0..n).collect(), balanced: vec![] };
    }
    let n_competitive = n_max.div_ceil(2);
    let mut competitive: Vec<usize> = rand::seq::index::sample(rng, n, n_competitive).into_vec();
    competitive.sort_unstable();
    let taken: BTreeSet<usize> = competitive.iter().copied().collect();

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, o) in origins.iter().enumerate() {
        if !taken.contains(&i) {
            groups.entry(o.as_str()).or_default().push(i);
        }
    }
    let mut order: Vec<&str> = groups.keys().copied().collect();
    let rank = |name: &str| registry.amplifiers.iter().position(|a| a.name == name).unwrap_or(usize::MAX);
    order.sort_by(|a, b| {
        registry.weight(b).total_cmp(&registry.weight(a)).then(rank(a).cmp(&rank(b))).then(a.cmp(b))
    });
    for g in groups.values_mut() {
        g.shuffle(rng);
    }

    let mut capacity = n_max - n_competitive;
    let mut balanced = Vec::new();
    for name in &order {
        if capacity == 0 {
            break;
        }
        if let Some(i) = groups.get_mut(name).and_then(|g| g.pop()) {
            balanced.push(i);
            capacity -= 1;
        }
    }
    let mut credit: BTreeMap<&str, f64> = order.iter().map(|n| (*n, 0.0)).collect();
    while capacity > 0 {
        let active: Vec<&str> = order.iter().copied().filter(|n| !groups[n].is_empty()).collect();
        if active.is_empty() {
            break;
        }
        let total: f64 = active.iter().map(|n| registry.weight(n)).sum();
        for n in &active {
            *credit.get_mut(n).unwrap() += registry.weight(n);
        }
        let pick = active
            .iter()
            .copied()
            .fold(None::<&str>, |best, n| match best {
                Some(b) if credit[b] >= credit[n] => Some(b),
                _ => Some(n),
            })
            .expect("active is non-empty");
        *credit.get_mut(pick).unwrap() -= total;
        balanced.push(groups.get_mut(pick).unwrap().pop().unwrap());
        capacity -= 1;
    }
    balanced.sort_unstable();
    Reduction { competitive, balanced }
}

/// Keeps at most `n_max` inputs (see [`plan_reduction`]), in pool order.
pub fn reduce_inputs(pool: &TestInputPool, n_max: usize, registry: &AmplifierRegistry, rng: &mut impl Rng) -> TestInputPool {
    let plan = plan_reduction(&pool.origin, n_max, registry, rng);
    let mut out = TestInputPool::default();
    for i in plan.kept() {
        out.push(pool.inputs[i].clone(), &pool.origin[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DEFAULT_ASSERTION_FORMS;
    use crate::test_model::parse_test_method;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn forms() -> Vec<String> {
        DEFAULT_ASSERTION_FORMS.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn halving_truncates_toward_zero_and_overflow_is_skipped() {
        let v = number_variants(&Literal::Int(-7), &[]);
        assert_eq!(v, [0, -6, -8, -14, -3, 7].map(Literal::Int).to_vec());
        let v = number_variants(&Literal::Int(i64::MAX), &[]);
        assert_eq!(v, [0, i64::MAX - 1, i64::MAX / 2, -i64::MAX].map(Literal::Int).to_vec());
        let v = number_variants(&Literal::Float(1.5), &[Literal::Int(2)]);
        assert_eq!(v, vec![
            Literal::Float(0.0),
            Literal::Float(2.5),
            Literal::Float(0.5),
            Literal::Float(3.0),
            Literal::Float(0.75),
            Literal::Float(-1.5),
            Literal::Int(2),
        ]);
    }

    #[test]
    fn string_variants_differ_by_one_edit_or_keep_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = string_variants("abc", &mut rng);
        assert!(v.iter().any(|s| s.len() == 4));
        assert!(v.iter().any(|s| s.len() == 2));
        assert!(v.iter().all(|s| s != "abc"));
        assert_eq!(string_variants("", &mut rng).len(), 1);
    }

    #[test]
    fn call_variants_change_statement_count_by_one() {
        let t = parse_test_method("testIt [ | b | b := Foo new. b bar: 1. b baz ]", "testIt", &forms()).unwrap();
        for v in duplicate_calls(&t) {
            assert_eq!(v.statements.len(), 4);
        }
        let removed = remove_calls(&t);
        assert_eq!(removed.len(), 2);
        assert!(removed.iter().all(|v| v.statements.len() == 2 && v.history.len() == 1));
    }

    #[test]
    fn small_pools_pass_through() {
        let origins: Vec<String> = (0..9).map(|i| format!("a{}", i % 2)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = plan_reduction(&origins, 10, &AmplifierRegistry::default(), &mut rng);
        assert_eq!(plan.kept(), (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn balanced_slice_covers_minor_amplifier() {
        let mut origins = vec!["literals".to_string(); 80];
        origins.extend(vec!["call_remove".to_string(); 20]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = plan_reduction(&origins, 10, &AmplifierRegistry::default(), &mut rng);
        assert_eq!(plan.competitive.len(), 5);
        assert_eq!(plan.balanced.len(), 5);
        let names: BTreeSet<&str> = plan.balanced.iter().map(|&i| origins[i].as_str()).collect();
        assert_eq!(names.len(), 2);
    }
}
