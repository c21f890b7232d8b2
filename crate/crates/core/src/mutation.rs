//! Mutants of the class under test, the kill matrix, and the score metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use ampforge_lang::{parse_file, Image, MethodKey, SiteKind};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::AmplificationConfig;
use crate::runner::{run_test, RunOptions};
use crate::test_model::TestMethodModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Relational,
    Arithmetic,
    BooleanFlip,
    ReturnRemoval,
    ReturnSelf,
    StatementDeletion,
    ConstantIncrement,
    ConstantDecrement,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Relational => "relational",
            Operator::Arithmetic => "arithmetic",
            Operator::BooleanFlip => "boolean_flip",
            Operator::ReturnRemoval => "return_removal",
            Operator::ReturnSelf => "return_self",
            Operator::StatementDeletion => "statement_deletion",
            Operator::ConstantIncrement => "constant_increment",
            Operator::ConstantDecrement => "constant_decrement",
        }
    }
}

/// A single textual edit of the class definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mutant {
    pub id: String,
    pub operator: Operator,
    pub method: MethodKey,
    /// Byte range in the class definition.
    pub span: (usize, usize),
    pub original: String,
    pub replacement: String,
}

impl Mutant {
    pub fn apply(&self, class_source: &str) -> String {
        let (s, e) = self.span;
        format!("{}{}{}", &class_source[..s], self.replacement, &class_source[e..])
    }

    pub fn revert(&self, mutated: &str) -> String {
        let s = self.span.0;
        let e = s + self.replacement.len();
        format!("{}{}{}", &mutated[..s], self.original, &mutated[e..])
    }

    pub fn describe(&self) -> String {
        format!("{} in {}: `{}` -> `{}`", self.operator.name(), self.method.label(), self.original, self.replacement)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MutantStatus {
    Killed,
    Live,
    Uncovered,
    Invalid,
}

#[derive(Debug, Error)]
pub enum MutationError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{0}` has no source to mutate")]
    NoSource(String),
    #[error("test `{test}` does not pass on the original code: {reason}")]
    RedTest { test: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no mutants to score")]
pub struct UndefinedScore;

fn replacements(op: &str) -> &'static [(&'static str, Operator)] {
    use Operator::*;
    match op {
        ">=" => &[(">", Relational), ("<", Relational)],
        ">" => &[(">=", Relational), ("<=", Relational)],
        "<=" => &[("<", Relational), (">", Relational)],
        "<" => &[("<=", Relational), (">=", Relational)],
        "=" => &[("~=", Relational)],
        "~=" => &[("=", Relational)],
        "+" => &[("-", Arithmetic)],
        "-" => &[("+", Arithmetic)],
        "*" => &[("/", Arithmetic)],
        "/" => &[("*", Arithmetic)],
        _ => &[],
    }
}

fn mutant_id(class: &str, m: &Mutant) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "{class}\0{}\0{}\0{}\0{}\0{}",
        m.method.label(),
        m.operator.name(),
        m.span.0,
        m.span.1,
        m.replacement
    ));
    let digest = h.finalize();
    let mut out = String::new();
    for b in &digest[..6] {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Every compilable, distinct mutant of `cut`, in source order.
pub fn generate_mutants(image: &Image, cut: &str) -> Result<Vec<Mutant>, MutationError> {
    let class = image.class(cut).ok_or_else(|| MutationError::UnknownClass(cut.into()))?;
    let source = class.source.as_deref().ok_or_else(|| MutationError::NoSource(cut.into()))?;
    let file = parse_file(source).map_err(|_| MutationError::NoSource(cut.into()))?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for site in &file.sites {
        if site.class != cut {
            continue;
        }
        let text = &source[site.start..site.end];
        let edits: Vec<(String, Operator, usize)> = match &site.kind {
            SiteKind::BinarySelector(op) => {
                replacements(op).iter().map(|(r, o)| (r.to_string(), *o, site.start)).collect()
            }
            SiteKind::BoolLiteral(b) => vec![((!b).to_string(), Operator::BooleanFlip, site.start)],
            SiteKind::IntLiteral(i) => [(i.checked_add(1), Operator::ConstantIncrement), (i.checked_sub(1), Operator::ConstantDecrement)]
                .into_iter()
                .filter_map(|(v, o)| v.map(|v| (v.to_string(), o, site.start)))
                .collect(),
            SiteKind::Return { value_start, returns_self: false } => vec![
                (source[*value_start..site.end].to_string(), Operator::ReturnRemoval, site.start),
                ("^ self".to_string(), Operator::ReturnSelf, site.start),
            ],
            SiteKind::Return { .. } => vec![],
            SiteKind::Statement => vec![(String::new(), Operator::StatementDeletion, site.start)],
        };
        for (replacement, operator, start) in edits {
            let mut m = Mutant {
                id: String::new(),
                operator,
                method: MethodKey::new(cut, site.selector.clone(), site.class_side),
                span: (start, site.end),
                original: text.to_string(),
                replacement,
            };
            let mutated = m.apply(source);
            if mutated == source || parse_file(&mutated).is_err() || !seen.insert(mutated) {
                continue;
            }
            m.id = mutant_id(cut, &m);
            out.push(m);
        }
    }
    Ok(out)
}

/// Original-code runs: coverage and send counts per test.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub tests: Vec<(TestMethodModel, BTreeSet<MethodKey>, u64)>,
}

impl Baseline {
    pub fn new(image: &Image, test_class: &str, tests: &[TestMethodModel], cfg: &AmplificationConfig) -> Result<Self, MutationError> {
        let mut out = Vec::new();
        for t in tests {
            let run = run_test(image, test_class, &t.to_method(), RunOptions::new(cfg).with_coverage(), None);
            if !run.verdict.passed() {
                return Err(MutationError::RedTest { test: t.name.clone(), reason: format!("{:?}", run.verdict) });
            }
            out.push((t.clone(), run.coverage, run.sends));
        }
        Ok(Baseline { tests: out })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MutationMatrix {
    pub status: BTreeMap<String, MutantStatus>,
    pub kills: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub all: usize,
    pub killed: usize,
    pub live: usize,
    pub uncovered: usize,
    pub invalid: usize,
}

impl MutationMatrix {
    pub fn killed(&self) -> BTreeSet<String> {
        self.kills.iter().filter(|(_, k)| !k.is_empty()).map(|(id, _)| id.clone()).collect()
    }

    pub fn with_status(&self, status: MutantStatus) -> BTreeSet<String> {
        self.status.iter().filter(|(_, s)| **s == status).map(|(id, _)| id.clone()).collect()
    }

    pub fn killed_by(&self, test: &str) -> BTreeSet<String> {
        self.kills.iter().filter(|(_, k)| k.contains(test)).map(|(id, _)| id.clone()).collect()
    }

    /// `all` leaves out mutants that could not be loaded.
    pub fn totals(&self) -> Totals {
        let mut t = Totals::default();
        for s in self.status.values() {
            match s {
                MutantStatus::Killed => t.killed += 1,
                MutantStatus::Live => t.live += 1,
                MutantStatus::Uncovered => t.uncovered += 1,
                MutantStatus::Invalid => t.invalid += 1,
            }
        }
        t.all = t.killed + t.live + t.uncovered;
        t
    }
}

/// A copy of `image` with `m` applied, or `None` if it does not load.
pub fn mutated_image(image: &Image, m: &Mutant) -> Option<Image> {
    let source = image.class(&m.method.class)?.source.clone()?;
    let mut mutated = image.clone();
    mutated.replace_class(&m.method.class, &m.apply(&source)).ok()?;
    Some(mutated)
}

fn evaluate(
    image: &Image,
    test_class: &str,
    baseline: &Baseline,
    mutant: &Mutant,
    cfg: &AmplificationConfig,
) -> (MutantStatus, BTreeSet<String>) {
    let covering: Vec<_> = baseline.tests.iter().filter(|(_, cov, _)| cov.contains(&mutant.method)).collect();
    if covering.is_empty() {
        return (MutantStatus::Uncovered, BTreeSet::new());
    }
    let Some(mutated) = mutated_image(image, mutant) else {
        return (MutantStatus::Invalid, BTreeSet::new());
    };
    let kills: BTreeSet<String> = covering
        .iter()
        .filter(|(t, _, sends)| {
            !run_test(&mutated, test_class, &t.to_method(), RunOptions::scaled(cfg, *sends), None).verdict.passed()
        })
        .map(|(t, _, _)| t.name.clone())
        .collect();
    (if kills.is_empty() { MutantStatus::Live } else { MutantStatus::Killed }, kills)
}

/// Runs every covering test against each mutant in its own copy of the image.
pub fn run_matrix_with(
    image: &Image,
    test_class: &str,
    baseline: &Baseline,
    mutants: &[Mutant],
    cfg: &AmplificationConfig,
) -> MutationMatrix {
    let results: Vec<(String, MutantStatus, BTreeSet<String>)> = mutants
        .par_iter()
        .map(|m| {
            let (status, kills) = evaluate(image, test_class, baseline, m, cfg);
            (m.id.clone(), status, kills)
        })
        .collect();
    let mut matrix = MutationMatrix::default();
    for (id, status, kills) in results {
        matrix.status.insert(id.clone(), status);
        matrix.kills.insert(id, kills);
    }
    matrix
}

pub fn run_matrix(
    image: &Image,
    test_class: &str,
    tests: &[TestMethodModel],
    mutants: &[Mutant],
    cfg: &AmplificationConfig,
) -> Result<MutationMatrix, MutationError> {
    let baseline = Baseline::new(image, test_class, tests, cfg)?;
    Ok(run_matrix_with(image, test_class, &baseline, mutants, cfg))
}

/// Percentage of killed mutants among all loadable ones.
pub fn mutation_score(m: &MutationMatrix) -> Result<f64, UndefinedScore> {
    let t = m.totals();
    if t.all == 0 {
        return Err(UndefinedScore);
    }
    Ok(100.0 * t.killed as f64 / t.all as f64)
}

/// Newly killed mutants relative to the originally killed ones, in percent.
/// Undefined when the original suite killed nothing.
pub fn increase_killed(original_killed: usize, newly_killed: usize) -> Option<f64> {
    (original_killed > 0).then(|| 100.0 * newly_killed as f64 / original_killed as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert!((increase_killed(6, 2).unwrap() - 33.33).abs() < 0.01);
        assert!((increase_killed(2, 4).unwrap() - 200.0).abs() < 0.01);
        assert_eq!(increase_killed(5, 0), Some(0.0));
        assert_eq!(increase_killed(0, 3), None);
        let mut m = MutationMatrix::default();
        assert_eq!(mutation_score(&m), Err(UndefinedScore));
        for i in 0..12 {
            let id = format!("m{i}");
            let killed = i < 6;
            m.status.insert(id.clone(), if killed { MutantStatus::Killed } else { MutantStatus::Live });
            m.kills.insert(id, if killed { BTreeSet::from(["t".to_string()]) } else { BTreeSet::new() });
        }
        assert_eq!(mutation_score(&m), Ok(50.0));
    }
}
