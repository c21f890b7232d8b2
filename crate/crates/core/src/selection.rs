//! Keeping the amplified tests that kill something new.

use std::collections::{BTreeMap, BTreeSet};

use ampforge_lang::MethodKey;
use serde::Serialize;
use thiserror::Error;

use crate::mutation::{Mutant, MutationMatrix};
use crate::test_model::TestMethodModel;

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifiedTest {
    pub model: TestMethodModel,
    /// Mutants this test kills that the original suite does not.
    pub newly_killed: BTreeSet<String>,
    pub parent: String,
    pub n_transformations: usize,
    /// Amplification round that produced the test; 0 for assertion-only.
    pub iteration: usize,
}

impl AmplifiedTest {
    pub fn new(model: TestMethodModel, kills: BTreeSet<String>, iteration: usize) -> Self {
        AmplifiedTest {
            parent: model.parent.clone(),
            n_transformations: model.history.len(),
            newly_killed: kills,
            model,
            iteration,
        }
    }

    fn rank(&self) -> (usize, usize, &str) {
        (self.model.statements.len(), self.n_transformations, &self.model.name)
    }
}

/// Greedy pass over candidates, keeping those that add kills beyond
/// `already_killed` and earlier picks. Among candidates with the same new
/// kills the shortest wins, then the one with fewer transformations, then by
/// name. Kept tests have `newly_killed` trimmed to exclude `already_killed`.
pub fn select_against(candidates: &[AmplifiedTest], already_killed: &BTreeSet<String>) -> Vec<AmplifiedTest> {
    let mut best: BTreeMap<BTreeSet<String>, &AmplifiedTest> = BTreeMap::new();
    for c in candidates {
        let fresh: BTreeSet<String> = c.newly_killed.difference(already_killed).cloned().collect();
        if fresh.is_empty() {
            continue;
        }
        best.entry(fresh).and_modify(|b| if c.rank() < b.rank() { *b = c }).or_insert(c);
    }
    let mut winners: Vec<(&BTreeSet<String>, &AmplifiedTest)> = best.iter().map(|(k, v)| (k, *v)).collect();
    winners.sort_by(|a, b| (a.1.iteration, &a.1.model.name).cmp(&(b.1.iteration, &b.1.model.name)));
    let mut cumulative = already_killed.clone();
    let mut out = Vec::new();
    for (fresh, c) in winners {
        if fresh.is_subset(&cumulative) {
            continue;
        }
        cumulative.extend(fresh.iter().cloned());
        out.push(AmplifiedTest { newly_killed: fresh.clone(), ..c.clone() });
    }
    out
}

pub fn select_improving(candidates: &[AmplifiedTest], baseline: &MutationMatrix) -> Vec<AmplifiedTest> {
    select_against(candidates, &baseline.killed())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("a test that kills nothing new has no focus")]
pub struct UndefinedFocus;

/// Mutants per method among `killed`, for the ids present in `mutants`.
pub fn kills_per_method(killed: &BTreeSet<String>, mutants: &[Mutant]) -> BTreeMap<MethodKey, usize> {
    let mut counts = BTreeMap::new();
    for m in mutants.iter().filter(|m| killed.contains(&m.id)) {
        *counts.entry(m.method.clone()).or_insert(0) += 1;
    }
    counts
}

/// True when at least half of the newly killed mutants sit in one method.
pub fn is_focused(t: &AmplifiedTest, mutants: &[Mutant]) -> Result<bool, UndefinedFocus> {
    focused(&t.newly_killed, mutants)
}

pub fn focused(killed: &BTreeSet<String>, mutants: &[Mutant]) -> Result<bool, UndefinedFocus> {
    if killed.is_empty() {
        return Err(UndefinedFocus);
    }
    let top = kills_per_method(killed, mutants).into_values().max().unwrap_or(0);
    Ok(2 * top >= killed.len())
}

#[derive(Debug, Clone, Serialize)]
pub struct Focus {
    pub method: String,
    pub share: f64,
}

/// The method holding most of the kills (first by name on ties).
pub fn focus_method(killed: &BTreeSet<String>, mutants: &[Mutant]) -> Option<Focus> {
    let counts = kills_per_method(killed, mutants);
    let top = *counts.values().max()?;
    let (key, _) = counts.iter().find(|(_, c)| **c == top)?;
    Some(Focus { method: key.label(), share: top as f64 / killed.len() as f64 })
}
