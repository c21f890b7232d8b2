//! The amplification loop over one test class, its report, and the files it
//! writes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ampforge_lang::{Image, Interpreter, Limits, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assert_amp::amplify_assertions;
use crate::config::AmplificationConfig;
use crate::input_amp::{amplify, reduce_inputs, AmplifierRegistry, CallContext, TestInputPool};
use crate::mutation::{generate_mutants, run_matrix_with, Baseline, Mutant, MutationError, MutationMatrix, Totals};
use crate::postprocess::{reduce_assertions, tidy, ReductionOutcome};
use crate::profiler::{profile, uncovered_methods, ProfileError, TypeProfile};
use crate::selection::{focus_method, focused, select_against, AmplifiedTest};
use crate::test_model::{strip_assertions, test_methods, TestMethodModel, Transformation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("unknown test class `{0}`")]
    UnknownTestClass(String),
    #[error("no class under test found for `{0}`; name it with --cut or a class-side `classUnderTest` method")]
    NoCut(String),
    #[error("`{class}` has no test method `{test}`")]
    UnknownTest { class: String, test: String },
    #[error("`{0}` has no test methods")]
    NoTests(String),
    #[error("test `{test}` does not pass on the original code: {reason}")]
    RedSuite { test: String, reason: String },
    #[error(transparent)]
    Profile(ProfileError),
    #[error(transparent)]
    Mutation(MutationError),
}

impl From<ProfileError> for OrchestratorError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::RedTest { test, reason } => OrchestratorError::RedSuite { test, reason },
            other => OrchestratorError::Profile(other),
        }
    }
}

impl From<MutationError> for OrchestratorError {
    fn from(e: MutationError) -> Self {
        match e {
            MutationError::RedTest { test, reason } => OrchestratorError::RedSuite { test, reason },
            other => OrchestratorError::Mutation(other),
        }
    }
}

/// The class a test class exercises: whatever a class-side
/// `classUnderTest` answers, else the test class name without `Test`.
pub fn detect_cut(image: &Image, test_class: &str) -> Result<String, OrchestratorError> {
    let class = image.class(test_class).ok_or_else(|| OrchestratorError::UnknownTestClass(test_class.into()))?;
    if image.lookup(test_class, "classUnderTest", true).is_some() {
        let mut interp = Interpreter::new(image, Limits::default());
        let named = match interp.send(Value::Class(class.clone()), "classUnderTest", vec![]) {
            Ok(Value::Class(c)) => Some(c.name.clone()),
            Ok(v) => v.str_content().map(str::to_string),
            Err(_) => None,
        };
        return named.filter(|n| image.class(n).is_some()).ok_or_else(|| OrchestratorError::NoCut(test_class.into()));
    }
    test_class
        .strip_suffix("Test")
        .filter(|n| !n.is_empty() && image.class(n).is_some_and(|c| !c.builtin))
        .map(str::to_string)
        .ok_or_else(|| OrchestratorError::NoCut(test_class.into()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub init: f64,
    pub input_amp: f64,
    pub assert_amp: f64,
    pub selection: f64,
    pub readability: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub parent: String,
    pub iteration: usize,
    pub newly_killed: Vec<String>,
    pub focused: bool,
    pub focus_method: Option<String>,
    pub assertion_reduction: ReductionOutcome,
    pub transformations: Vec<Transformation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplificationReport {
    pub schema_version: u32,
    pub test_class: String,
    pub cut: String,
    pub seed: u64,
    pub original_tests: usize,
    pub amplified_originals: Vec<String>,
    pub cut_loc: usize,
    pub mutants: Totals,
    pub mutation_score_before: Option<f64>,
    pub mutation_score_after: Option<f64>,
    pub killed_before: usize,
    pub newly_killed: usize,
    pub increase_killed: Option<f64>,
    pub new_tests: usize,
    pub focused_tests: usize,
    pub discarded_candidates: usize,
    pub skipped_call_insertions: usize,
    pub uncovered_methods: Vec<String>,
    pub budget_exhausted: bool,
    pub tests: Vec<TestReport>,
    pub timings: Timings,
}

/// One mutant's line in `mutants.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutantRecord {
    pub id: String,
    pub operator: String,
    pub method: String,
    pub span: (usize, usize),
    pub status: String,
    pub killed_by: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Amplification {
    pub test_class: String,
    pub tests: Vec<AmplifiedTest>,
    pub mutants: Vec<Mutant>,
    pub matrix_before: MutationMatrix,
    pub profile: TypeProfile,
    pub report: AmplificationReport,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn seed_for(seed: u64, test: &str) -> u64 {
    let digest = Sha256::digest(test.as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

struct Clock {
    start: Instant,
    deadline: Option<Instant>,
}

impl Clock {
    fn exhausted(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

struct Run<'a> {
    image: &'a Image,
    test_class: &'a str,
    cfg: &'a AmplificationConfig,
    mutants: &'a [Mutant],
    timings: Timings,
    discarded: usize,
    skipped: usize,
    next_candidate: usize,
}

impl Run<'_> {
    /// Assertion-amplifies each input and measures what it kills among the
    /// mutants not yet killed.
    fn evaluate(&mut self, inputs: &[TestMethodModel], iteration: usize, killed: &BTreeSet<String>) -> Vec<AmplifiedTest> {
        let t0 = Instant::now();
        let mut ready = Vec::new();
        for input in inputs {
            match amplify_assertions(self.image, self.test_class, input, self.cfg) {
                Ok(mut t) => {
                    self.next_candidate += 1;
                    t.name = format!("{}_cand{}", t.parent, self.next_candidate);
                    ready.push(t);
                }
                Err(_) => self.discarded += 1,
            }
        }
        self.timings.assert_amp += t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let open: Vec<Mutant> = self.mutants.iter().filter(|m| !killed.contains(&m.id)).cloned().collect();
        let out = match Baseline::new(self.image, self.test_class, &ready, self.cfg) {
            Ok(baseline) => {
                let matrix = run_matrix_with(self.image, self.test_class, &baseline, &open, self.cfg);
                ready.into_iter().map(|t| {
                    let kills = matrix.killed_by(&t.name);
                    AmplifiedTest::new(t, kills, iteration)
                }).collect()
            }
            Err(_) => {
                self.discarded += ready.len();
                Vec::new()
            }
        };
        self.timings.selection += t1.elapsed().as_secs_f64();
        out
    }
}

/// Runs the whole amplification for `test_class` against `cut`. With
/// `only`, just that original test is amplified; the kill baseline always
/// uses the full class.
pub fn amplify_class(
    image: &Image,
    test_class: &str,
    cut: &str,
    cfg: &AmplificationConfig,
    only: Option<&str>,
) -> Result<Amplification, OrchestratorError> {
    let clock = Clock {
        start: Instant::now(),
        deadline: cfg.time_budget_s.map(|s| Instant::now() + Duration::from_secs_f64(s.max(0.0))),
    };
    if image.class(test_class).is_none() {
        return Err(OrchestratorError::UnknownTestClass(test_class.into()));
    }
    let originals = test_methods(image, test_class, &cfg.assertion_forms);
    if originals.is_empty() {
        return Err(OrchestratorError::NoTests(test_class.into()));
    }
    let chosen: Vec<TestMethodModel> = match only {
        Some(name) => vec![originals.iter().find(|t| t.name == name).cloned().ok_or_else(|| {
            OrchestratorError::UnknownTest { class: test_class.into(), test: name.into() }
        })?],
        None => originals.clone(),
    };

    let baseline = Baseline::new(image, test_class, &originals, cfg)?;
    let type_profile = profile(image, test_class, cut, &originals, cfg)?;
    let mutants = generate_mutants(image, cut)?;
    let matrix_before = run_matrix_with(image, test_class, &baseline, &mutants, cfg);
    let killed_before = matrix_before.killed();
    let registry = AmplifierRegistry::from_config(cfg);
    let mut run = Run {
        image,
        test_class,
        cfg,
        mutants: &mutants,
        timings: Timings { init: clock.start.elapsed().as_secs_f64(), ..Timings::default() },
        discarded: 0,
        skipped: 0,
        next_candidate: 0,
    };

    let mut killed = killed_before.clone();
    let mut selected: Vec<AmplifiedTest> = Vec::new();
    let mut exhausted = false;
    for original in &chosen {
        if mutants.is_empty() || killed.len() == mutants.len() {
            break;
        }
        if clock.exhausted() {
            exhausted = true;
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg.seed, &original.name));
        let mut v = vec![strip_assertions(original)];
        let mut seen: BTreeSet<String> = v.iter().map(|t| t.render()).collect();
        let u = run.evaluate(&v, 0, &killed);
        let picked = select_against(&u, &killed);
        for p in &picked {
            killed.extend(p.newly_killed.iter().cloned());
        }
        selected.extend(picked);

        for iteration in 1..=cfg.n_iteration {
            if clock.exhausted() {
                exhausted = true;
                break;
            }
            let t0 = Instant::now();
            let ctx = CallContext { image, profile: &type_profile, cfg };
            let mut tmp = TestInputPool::default();
            for input in &v {
                let (pool, skipped) = amplify(input, &registry, &ctx, &mut rng);
                run.skipped += skipped;
                tmp.extend(pool);
            }
            tmp.dedup();
            let mut fresh = TestInputPool::default();
            for (t, o) in tmp.inputs.into_iter().zip(tmp.origin) {
                if seen.insert(t.render()) {
                    fresh.push(t, &o);
                }
            }
            v = reduce_inputs(&fresh, cfg.n_max_inputs, &registry, &mut rng).inputs;
            run.timings.input_amp += t0.elapsed().as_secs_f64();
            if v.is_empty() || clock.exhausted() {
                exhausted |= clock.exhausted();
                break;
            }
            let u = run.evaluate(&v, iteration, &killed);
            let picked = select_against(&u, &killed);
            for p in &picked {
                killed.extend(p.newly_killed.iter().cloned());
            }
            selected.extend(picked);
        }
        if exhausted {
            break;
        }
    }

    let t0 = Instant::now();
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut finished = Vec::new();
    let mut reductions = Vec::new();
    for t in selected {
        let (t, outcome) = if exhausted {
            (t, ReductionOutcome::Unchanged)
        } else {
            let (reduced, outcome) = reduce_assertions(image, test_class, &t, &mutants, cfg);
            (tidy(image, test_class, &reduced, &mutants, cfg), outcome)
        };
        let k = counters.entry(t.parent.clone()).or_insert(0);
        *k += 1;
        let mut t = t;
        t.model.name = format!("{}_amp{}", t.parent, k);
        finished.push(t);
        reductions.push(outcome);
    }
    run.timings.readability = t0.elapsed().as_secs_f64();
    run.timings.total = clock.start.elapsed().as_secs_f64();

    let totals = matrix_before.totals();
    let newly: BTreeSet<String> = finished.iter().flat_map(|t| t.newly_killed.iter().cloned()).collect();
    let score = |k: usize| (totals.all > 0).then(|| round2(100.0 * k as f64 / totals.all as f64));
    let tests: Vec<TestReport> = finished
        .iter()
        .zip(&reductions)
        .map(|(t, r)| TestReport {
            name: t.model.name.clone(),
            parent: t.parent.clone(),
            iteration: t.iteration,
            newly_killed: t.newly_killed.iter().cloned().collect(),
            focused: focused(&t.newly_killed, &mutants).unwrap_or(false),
            focus_method: focus_method(&t.newly_killed, &mutants).map(|f| f.method),
            assertion_reduction: *r,
            transformations: t.model.history.clone(),
        })
        .collect();
    let cut_loc = image
        .class(cut)
        .and_then(|c| c.source.as_deref().map(|s| s.lines().filter(|l| !l.trim().is_empty()).count()))
        .unwrap_or(0);
    let report = AmplificationReport {
        schema_version: SCHEMA_VERSION,
        test_class: test_class.into(),
        cut: cut.into(),
        seed: cfg.seed,
        original_tests: originals.len(),
        amplified_originals: chosen.iter().map(|t| t.name.clone()).collect(),
        cut_loc,
        mutants: totals,
        mutation_score_before: score(killed_before.len()),
        mutation_score_after: score(killed_before.len() + newly.len()),
        killed_before: killed_before.len(),
        newly_killed: newly.len(),
        increase_killed: crate::mutation::increase_killed(killed_before.len(), newly.len()).map(round2),
        new_tests: finished.len(),
        focused_tests: tests.iter().filter(|t| t.focused).count(),
        discarded_candidates: run.discarded,
        skipped_call_insertions: run.skipped,
        uncovered_methods: uncovered_methods(&type_profile, image, cut, cfg),
        budget_exhausted: exhausted,
        tests,
        timings: run.timings,
    };
    Ok(Amplification { test_class: test_class.into(), tests: finished, mutants, matrix_before, profile: type_profile, report })
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

impl Amplification {
    /// Kill relation over original and amplified tests. Amplified tests are
    /// credited with the mutants they newly kill.
    pub fn mutant_records(&self) -> Vec<MutantRecord> {
        let credited: BTreeMap<&str, Vec<String>> = self.mutants.iter().map(|m| {
            let by: Vec<String> = self.tests.iter().filter(|t| t.newly_killed.contains(&m.id)).map(|t| t.model.name.clone()).collect();
            (m.id.as_str(), by)
        }).collect();
        self.mutants
            .iter()
            .map(|m| {
                let mut killed_by: Vec<String> = self.matrix_before.kills.get(&m.id).map(|k| k.iter().cloned().collect()).unwrap_or_default();
                killed_by.extend(credited[m.id.as_str()].iter().cloned());
                let status = match self.matrix_before.status.get(&m.id) {
                    _ if !killed_by.is_empty() => "killed",
                    Some(s) => match s {
                        crate::mutation::MutantStatus::Killed => "killed",
                        crate::mutation::MutantStatus::Live => "live",
                        crate::mutation::MutantStatus::Uncovered => "uncovered",
                        crate::mutation::MutantStatus::Invalid => "invalid",
                    },
                    None => "live",
                };
                MutantRecord {
                    id: m.id.clone(),
                    operator: m.operator.name().into(),
                    method: m.method.label(),
                    span: m.span,
                    status: status.into(),
                    killed_by,
                }
            })
            .collect()
    }

    /// `<TestClass> extend [ ... ]` with one annotated method per amplified
    /// test, or `None` when nothing was amplified.
    pub fn render_tests(&self, image: &Image) -> Option<String> {
        if self.tests.is_empty() {
            return None;
        }
        let by_id: BTreeMap<&str, &Mutant> = self.mutants.iter().map(|m| (m.id.as_str(), m)).collect();
        let mut out = format!("{} extend [\n", self.test_class);
        for (i, t) in self.tests.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str("    \"@killed-mutants");
            for id in &t.newly_killed {
                if let Some(m) = by_id.get(id.as_str()) {
                    let source = image.class(&m.method.class).and_then(|c| c.source.clone()).unwrap_or_default();
                    let line = line_of(&source, m.span.0);
                    let text = format!(
                        "\n        {} {} {} line {}: {} -> {}",
                        m.id,
                        m.operator.name(),
                        m.method.label(),
                        line,
                        m.original.split_whitespace().collect::<Vec<_>>().join(" "),
                        if m.replacement.is_empty() { "(deleted)".to_string() } else { m.replacement.clone() }
                    );
                    out.push_str(&text.replace('"', "'"));
                }
            }
            out.push_str("\"\n");
            out.push_str(t.model.render_at(1).trim_end());
            out.push('\n');
        }
        out.push_str("]\n");
        Some(out)
    }
}

/// Writes the generated tests, `report.json` (or `report_path`) and
/// `mutants.json` into `out_dir`.
pub fn emit_outputs(image: &Image, result: &Amplification, out_dir: &Path, report_path: Option<&Path>) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if let Some(src) = result.render_tests(image) {
        let path = out_dir.join(format!("{}_amplified.st", result.test_class));
        fs::write(&path, src)?;
        written.push(path);
    }
    let report = report_path.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join("report.json"));
    if let Some(parent) = report.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&report, serde_json::to_string_pretty(&result.report)? + "\n")?;
    written.push(report);
    let mutants = out_dir.join("mutants.json");
    fs::write(&mutants, serde_json::to_string_pretty(&result.mutant_records())? + "\n")?;
    written.push(mutants);
    Ok(written)
}
