use std::path::Path;
use std::process::{Command, Output};

fn noon(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noon"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("NOON_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_passes_at_the_reference_init() {
    let dir = tempfile::tempdir().unwrap();
    let o = noon(dir.path(), &["--n", "2", "validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("PASS two-path beamsplitter 1"));
    assert!(text.contains("PASS fft dominant (1, 1)"));
    assert!(dir.path().join("n2/validation.json").is_file());
}

#[test]
fn strict_validation_fails_on_reference_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let o = noon(dir.path(), &["--n", "5", "validate", "--strict"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_then_report_then_trained_analyses() {
    let dir = tempfile::tempdir().unwrap();
    let o = noon(dir.path(), &["--n", "3", "train"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(2, 1): raw CFI"));
    for f in ["summary.json", "trace.csv", "fringes_afek.csv", "fringes_trained.csv"] {
        assert!(dir.path().join("n3").join(f).is_file(), "{f}");
    }
    let o = noon(dir.path(), &["--n", "3", "report", "--eta-loss", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("n3/feasibility.json").is_file());
    for args in [["--n", "3", "qfi", "--which", "trained"], ["--n", "3", "scan", "--which", "trained"]] {
        assert_eq!(noon(dir.path(), &args).status.code(), Some(0), "{args:?}");
    }
    let o = noon(dir.path(), &["--n", "3", "wigner", "--which", "trained", "--mode", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("n3/wigner_trained_mode0.csv").is_file());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(noon(dir.path(), &["--n", "7", "qfi"]).status.code(), Some(2));
    assert_eq!(noon(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(noon(dir.path(), &["wigner", "--mode", "2"]).status.code(), Some(2));
    // nothing trained in this directory yet
    assert_eq!(noon(dir.path(), &["report"]).status.code(), Some(2));
    assert_eq!(noon(dir.path(), &["wigner", "--which", "trained"]).status.code(), Some(2));
}

#[test]
fn config_file_is_applied_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 4\n[adam]\nsteps = 3\n").unwrap();
    let o = noon(dir.path(), &["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(o.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.path().join("n4/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4);

    std::fs::write(&cfg, "n = 4\nlearning_rate = 0.1\n").unwrap();
    let o = noon(dir.path(), &["--config", cfg.to_str().unwrap(), "qfi"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_noon"))
        .args(["--n", "2", "qfi"])
        .env("NOON_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("n2/qfi_afek.json").is_file());
}

#[test]
fn multistart_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = noon(dir.path(), &["--seed", "11", "multistart", "--seeds", "2"]);
    let b = noon(dir.path(), &["--seed", "11", "multistart", "--seeds", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).matches("seed ").count(), 2);
}

#[test]
fn help_documents_defaults() {
    let o = Command::new(env!("CARGO_BIN_EXE_noon")).arg("--help").output().unwrap();
    let text = stdout(&o);
    for s in ["--n", "--out", "--config", "--seed", "default: 2", "validate", "multistart", "report"] {
        assert!(text.contains(s), "{s}");
    }
}
