use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ampforge_core::config::AmplificationConfig;
use ampforge_core::orchestrator::{amplify_class, detect_cut, emit_outputs, OrchestratorError};
use ampforge_lang::{Image, LoadError};
use clap::{Args, Parser, Subcommand};
use walkdir::WalkDir;

const EXIT_RED_SUITE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "ampforge", version, about = "Amplify unit tests to kill more mutants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Amplify one test class, or one test with `Class>>selector`.
    Amplify(AmplifyArgs),
}

#[derive(Args)]
struct AmplifyArgs {
    /// Test class, or `Class>>selector` for a single test.
    #[arg(long = "test")]
    test: String,
    /// Class under test; detected from the test class when omitted.
    #[arg(long)]
    cut: Option<String>,
    /// Source file or directory; directories are searched for `*.st`.
    #[arg(long = "src", default_value = ".")]
    src: Vec<PathBuf>,
    /// TOML file with configuration overrides. Flags win over the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long = "max-inputs")]
    max_inputs: Option<usize>,
    #[arg(long)]
    serialization: Option<usize>,
    #[arg(long)]
    flakiness: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock budget in seconds for the whole run.
    #[arg(long = "time-budget")]
    time_budget: Option<f64>,
    /// Skip input amplification; only add assertions to the original tests.
    #[arg(long = "assert-only")]
    assert_only: bool,
    #[arg(long)]
    out: PathBuf,
    /// Where to write report.json; defaults to the output directory.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the runtime type profile of the original tests as JSON.
    #[arg(long = "profile-dump")]
    profile_dump: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<OrchestratorError> for Failure {
    fn from(e: OrchestratorError) -> Self {
        let code = if matches!(e, OrchestratorError::RedSuite { .. }) { EXIT_RED_SUITE } else { EXIT_CONFIG };
        Failure { code, message: e.to_string() }
    }
}

fn build_config(args: &AmplifyArgs) -> Result<AmplificationConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            AmplificationConfig::from_toml_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => AmplificationConfig::default(),
    };
    if let Some(n) = args.iterations {
        cfg.n_iteration = n;
    }
    if let Some(n) = args.max_inputs {
        cfg.n_max_inputs = n;
    }
    if let Some(n) = args.serialization {
        cfg.n_serialization = n;
    }
    if let Some(n) = args.flakiness {
        cfg.n_flakiness = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.time_budget.is_some() {
        cfg.time_budget_s = args.time_budget;
    }
    if args.assert_only {
        cfg.n_iteration = 0;
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn source_files(roots: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for root in roots {
        if root.is_file() {
            files.push(root.clone());
            continue;
        }
        if !root.exists() {
            return Err(Failure::config(format!("{}: no such file or directory", root.display())));
        }
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| Failure::config(e.to_string()))?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "st") {
                files.push(entry.into_path());
            }
        }
    }
    Ok(files)
}

/// Loads every file, retrying the ones whose superclass or extended class
/// only shows up in a later file.
fn load_image(files: &[PathBuf]) -> Result<Image, Failure> {
    let mut image = Image::new();
    let mut pending: Vec<(PathBuf, String)> = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| Failure::config(format!("{}: {e}", f.display())))?;
        pending.push((f.clone(), text));
    }
    loop {
        let before = pending.len();
        let mut last_error = None;
        let mut rest = Vec::new();
        for (path, text) in pending {
            match image.load(&text) {
                Ok(_) => {}
                Err(e @ (LoadError::UnknownSuperclass { .. } | LoadError::UnknownExtension(_))) => {
                    last_error = Some(format!("{}: {e}", path.display()));
                    rest.push((path, text));
                }
                Err(e) => return Err(Failure::config(format!("{}: {e}", path.display()))),
            }
        }
        if rest.is_empty() {
            return Ok(image);
        }
        if rest.len() == before {
            return Err(Failure::config(last_error.unwrap_or_default()));
        }
        pending = rest;
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
    }
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    std::fs::write(path, text + "\n").map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn amplify(args: &AmplifyArgs) -> Result<u8, Failure> {
    let cfg = build_config(args)?;
    let (test_class, only) = match args.test.split_once(">>") {
        Some((c, s)) => (c.trim(), Some(s.trim())),
        None => (args.test.trim(), None),
    };
    let image = load_image(&source_files(&args.src)?)?;
    let cut = match &args.cut {
        Some(c) if image.class(c).is_some() => c.clone(),
        Some(c) => return Err(Failure::config(format!("unknown class under test `{c}`"))),
        None => detect_cut(&image, test_class)?,
    };

    let result = amplify_class(&image, test_class, &cut, &cfg, only)?;
    if let Some(path) = &args.profile_dump {
        write_json(path, &result.profile.to_json())?;
    }
    let written = emit_outputs(&image, &result, &args.out, args.report.as_deref())
        .map_err(|e| Failure::config(format!("{}: {e}", args.out.display())))?;

    let r = &result.report;
    let score = |s: Option<f64>| s.map_or("n/a".to_string(), |s| format!("{s:.2}%"));
    println!(
        "{test_class} vs {cut}: {} mutants, score {} -> {}, {} new test(s)",
        r.mutants.all,
        score(r.mutation_score_before),
        score(r.mutation_score_after),
        r.new_tests
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    if r.budget_exhausted {
        eprintln!("time budget exhausted; results are partial");
        return Ok(EXIT_BUDGET);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Amplify(args) => amplify(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
