use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BANK: &str = include_str!("../../core/fixtures/smallbank.st");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn ampforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ampforge")).args(args).output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn amplifies_a_single_test_from_a_directory() {
    let out = tempfile::tempdir().unwrap();
    let src = fixtures();
    let o = ampforge(&[
        "amplify", "--test", "SmallBankTest>>testWithdraw", "--src", src.to_str().unwrap(),
        "--out", out.path().to_str().unwrap(), "--profile-dump", out.path().join("profile.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(out.path());
    assert_eq!(r["cut"], "SmallBank");
    assert_eq!(r["amplified_originals"], serde_json::json!(["testWithdraw"]));
    assert!(r["new_tests"].as_u64().unwrap() > 0);
    let suite = std::fs::read_to_string(out.path().join("SmallBankTest_amplified.st")).unwrap();
    assert!(suite.contains("testWithdraw_amp1"));
    assert!(out.path().join("mutants.json").exists());
    assert!(out.path().join("profile.json").exists());
}

#[test]
fn red_suite_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bank.st"), BANK).unwrap();
    std::fs::write(
        dir.path().join("broken.st"),
        "SmallBankTest extend [ testBroken [ self assert: SmallBank new balance equals: 1 ] ]",
    )
    .unwrap();
    let o = ampforge(&["amplify", "--test", "SmallBankTest", "--src", dir.path().to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("testBroken"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bank = fixtures().join("smallbank.st");
    let out = dir.path().join("out");
    let run = |extra: &[&str]| {
        let mut args = vec!["amplify", "--src", bank.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        ampforge(&args).status.code()
    };
    assert_eq!(run(&["--test", "NoSuchTest"]), Some(2));
    assert_eq!(run(&["--test", "SmallBankTest", "--cut", "Nope"]), Some(2));
    assert_eq!(run(&["--test", "SmallBankTest>>testNope"]), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n_iteration = 'three'").unwrap();
    assert_eq!(run(&["--test", "SmallBankTest", "--config", bad.to_str().unwrap()]), Some(2));
    std::fs::write(&bad, "[amplifiers.teleport]\nweight = 1.0").unwrap();
    assert_eq!(run(&["--test", "SmallBankTest", "--config", bad.to_str().unwrap()]), Some(2));
    assert_eq!(run(&["--test", "SmallBankTest", "--time-budget", "-1"]), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("amp.toml");
    std::fs::write(&cfg, "seed = 11\nn_iteration = 0\n").unwrap();
    let bank = fixtures().join("smallbank.st");
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec!["amplify", "--test", "SmallBankTest", "--src", bank.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(ampforge(&args).status.code(), Some(0));
        report(out)
    };
    let from_file = run(&dir.path().join("a"), &[]);
    assert_eq!(from_file["seed"], 11);
    // iterations 0 from the file: only the assertion-amplified original
    assert!(from_file["tests"].as_array().unwrap().iter().all(|t| t["iteration"] == 0));
    let flagged = run(&dir.path().join("b"), &["--seed", "5", "--iterations", "2"]);
    assert_eq!(flagged["seed"], 5);
    assert!(flagged["tests"].as_array().unwrap().iter().any(|t| t["iteration"] != 0));
}

#[test]
fn exhausted_budget_exits_with_3_and_keeps_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let bank = fixtures().join("smallbank.st");
    let report_path = dir.path().join("r/report.json");
    let o = ampforge(&[
        "amplify", "--test", "SmallBankTest", "--src", bank.to_str().unwrap(), "--time-budget", "0",
        "--out", dir.path().join("out").to_str().unwrap(), "--report", report_path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(r["budget_exhausted"], true);
}

#[test]
fn files_may_arrive_before_their_superclass() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a_test.st"), "TestCase subclass: CounterTest [ testUp [ | c | c := Counter new. c up. self assert: c n equals: 1 ] ]").unwrap();
    std::fs::write(dir.path().join("b_sub.st"), "Base subclass: Counter [ up [ n := n + 1 ] n [ ^ n ] ]").unwrap();
    std::fs::write(dir.path().join("c_base.st"), "Object subclass: Base [ | n | initialize [ n := 0 ] ]").unwrap();
    let o = ampforge(&["amplify", "--test", "CounterTest", "--src", dir.path().to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
