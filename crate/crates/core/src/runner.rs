//! Executes one test method in a fresh interpreter.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ampforge_lang::{Hook, Image, Interpreter, Limits, MethodDef, MethodKey, Unwind, Value};

use crate::config::AmplificationConfig;

/// Send budget for runs that have no reference run to scale from.
pub const UNSCALED_SEND_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// An assertion failed.
    Fail(String),
    /// Any other uncaught exception.
    Error(String),
    /// A send, time or depth limit was hit.
    Timeout,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub sends: u64,
    /// User methods entered, when coverage was requested.
    pub coverage: BTreeSet<MethodKey>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub max_sends: u64,
    pub timeout: Duration,
    pub coverage: bool,
}

impl RunOptions {
    pub fn new(cfg: &AmplificationConfig) -> Self {
        RunOptions {
            max_sends: UNSCALED_SEND_BUDGET,
            timeout: Duration::from_secs_f64(cfg.exec_timeout_s),
            coverage: false,
        }
    }

    /// Budget for re-running a test whose unmutated run took `sends` sends.
    pub fn scaled(cfg: &AmplificationConfig, sends: u64) -> Self {
        RunOptions {
            max_sends: sends.saturating_mul(cfg.send_budget_factor).max(cfg.min_send_budget),
            ..RunOptions::new(cfg)
        }
    }

    pub fn with_coverage(mut self) -> Self {
        self.coverage = true;
        self
    }
}

/// Runs `setUp`, the test body and `tearDown` on a new instance of `test_class`.
pub fn run_test<'a>(
    image: &'a Image,
    test_class: &str,
    method: &MethodDef,
    opts: RunOptions,
    hook: Option<Box<dyn Hook + 'a>>,
) -> RunOutcome {
    let limits = Limits { max_sends: opts.max_sends, deadline: Some(Instant::now() + opts.timeout), ..Limits::default() };
    let mut interp = Interpreter::new(image, limits);
    if let Some(hook) = hook {
        interp.set_hook(hook);
    }
    if opts.coverage {
        interp.enable_coverage();
    }
    let result = execute(&mut interp, test_class, method);
    let verdict = match result {
        Ok(()) => Verdict::Pass,
        Err(Unwind::Limit(_)) => Verdict::Timeout,
        Err(Unwind::Signal(ex)) => {
            let (class, text) = interp.exception_info(&ex);
            if interp.is_kind_of(&ex, "TestFailure") {
                Verdict::Fail(text)
            } else {
                Verdict::Error(format!("{class}: {text}"))
            }
        }
        Err(Unwind::NonLocal { .. }) => Verdict::Error("block returned from a method that already returned".into()),
        Err(Unwind::HandlerReturn { .. }) => Verdict::Error("exception returned outside its handler".into()),
    };
    RunOutcome { verdict, sends: interp.sends(), coverage: interp.coverage().cloned().unwrap_or_default() }
}

fn execute(interp: &mut Interpreter<'_>, test_class: &str, method: &MethodDef) -> Result<(), Unwind> {
    let instance = interp.instantiate(test_class)?;
    interp.send(instance.clone(), "setUp", vec![])?;
    let body = interp.run_method(instance.clone(), test_class, method, vec![]);
    if matches!(body, Err(Unwind::Limit(_))) {
        return body.map(|_| ());
    }
    let teardown = interp.send(instance, "tearDown", vec![]);
    body?;
    teardown.map(|_: Value| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ampforge_lang::parse_methods;

    fn image() -> Image {
        let mut image = Image::new();
        image
            .load(
                "TestCase subclass: T [ | log | setUp [ log := 1 ] \
                 testOk [ self assert: log = 1 ] testBad [ self assert: log = 2 ] \
                 testErr [ nil foo ] testLoop [ [ true ] whileTrue ] ]",
            )
            .unwrap();
        image
    }

    fn run(image: &Image, name: &str) -> Verdict {
        let class = image.class("T").unwrap();
        let m = class.methods[name].def.clone();
        run_test(image, "T", &m, RunOptions::new(&AmplificationConfig::default()), None).verdict
    }

    #[test]
    fn verdicts() {
        let image = image();
        assert_eq!(run(&image, "testOk"), Verdict::Pass);
        assert!(matches!(run(&image, "testBad"), Verdict::Fail(_)));
        assert!(matches!(run(&image, "testErr"), Verdict::Error(e) if e.starts_with("MessageNotUnderstood")));
    }

    #[test]
    fn send_budget_stops_loops() {
        let image = image();
        let m = image.class("T").unwrap().methods["testLoop"].def.clone();
        let opts = RunOptions::scaled(&AmplificationConfig::default(), 10);
        assert_eq!(opts.max_sends, 100_000);
        assert_eq!(run_test(&image, "T", &m, opts, None).verdict, Verdict::Timeout);
    }

    #[test]
    fn unloaded_methods_run_in_the_class_context() {
        let image = image();
        let m = parse_methods("testNew [ self assert: log = 1 ]").unwrap().remove(0);
        let out = run_test(&image, "T", &m, RunOptions::new(&AmplificationConfig::default()), None);
        assert!(out.verdict.passed());
        assert!(out.sends > 0);
    }
}
