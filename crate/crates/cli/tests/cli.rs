use std::process::Command;

fn c2s(dir: &std::path::Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_c2s")).current_dir(dir).args(args).output().expect("binary runs")
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = c2s(dir.path(), &["eval", "--set", "env.capacity=0", "--set", "nope=1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("env.capacity") && err.contains("nope"), "{err}");
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = c2s(dir.path(), &["oracle-check", "--instances", "30", "--dump", "inst"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(dir.path().join("inst")).unwrap().count(), 30);
}

#[test]
fn dumps_and_evals_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "combo = \"H+H\"\neval.episodes = 2\n[paths]\nout = \"a\"\n").unwrap();
    for out_dir in ["a", "b"] {
        let set = format!("paths.out=\"{out_dir}\"");
        let cfg = cfg.to_str().unwrap();
        assert!(c2s(dir.path(), &["--config", cfg, "--set", &set, "dump-world", "--episode", "1"]).status.success());
        assert!(c2s(dir.path(), &["--config", cfg, "--set", &set, "eval"]).status.success());
    }
    for f in ["world_dump_1.csv", "trips_1.csv", "eval_HH.csv", "eval_HH_episodes.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = c2s(dir.path(), &["eval", "--set", "combo=L+L"]);
    assert_eq!(out.status.code(), Some(1));
}
