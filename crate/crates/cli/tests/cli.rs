use std::fs;
use std::process::Command;

fn opsgd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_opsgd"))
}

#[test]
fn lemmas_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = opsgd()
        .args(["lemmas", "--jobs", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS lemma-audit"));
    assert!(dir.path().join("lemmas.csv").exists());
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn config_file_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "experiment = \"dual-vs-spectral\"\ntrials = 5\nseed = 1\n",
    )
    .unwrap();
    let run = |seed: &str, sub: &str| {
        let out_dir = dir.path().join(format!("out{seed}"));
        let out = opsgd()
            .args(["crosscheck", "--config"])
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read_to_string(out_dir.join(sub)).unwrap()
    };
    let a = run("3", "crosscheck.csv");
    let b = run("4", "crosscheck.csv");
    assert_eq!(a.lines().count(), 6);
    assert_ne!(a, b);
}

#[test]
fn mismatched_experiment_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "experiment = \"lemma-audit\"\n").unwrap();
    let out = opsgd()
        .args(["pca", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lemma-audit"));
}

#[test]
fn unknown_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "experiment = \"lemma-audit\"\nbogus = 1\n").unwrap();
    let out = opsgd()
        .args(["lemmas", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn invalid_config_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "experiment = \"rate-expectation\"\nhorizons = [8, 4]\nreplicates = 0\n",
    )
    .unwrap();
    let out = opsgd()
        .args(["rate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("horizons") && err.contains("replicates"),
        "{err}"
    );
}
