use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 7

[sites]
ids = ["north", "south"]
capacities = [1.0]

[simulation]
hours = 3000

[model]
train_hours = 2000

[market]
site = "south"
"#;

fn windcast(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windcast"))
        .args(args)
        .current_dir(dir)
        .env("WINDCAST_THREADS", "1")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn small_pipeline_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    let out = windcast(
        &["pipeline", "--config", "run.toml", "--out", "out", "--seed", "9"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("out/scores.csv").is_file());

    let again = windcast(&["verify", "--config", "run.toml", "--out", "out"], dir.path());
    assert!(again.status.success(), "{}", stderr(&again));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("unknown.toml"), format!("{SMALL}\n[extra]\nx = 1\n")).unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = \"seven\"\n").unwrap();
    for file in ["unknown.toml", "bad.toml", "absent.toml"] {
        let out = windcast(&["simulate", "--config", file, "--out", "out"], dir.path());
        assert_eq!(out.status.code(), Some(2), "{file}");
        let err = stderr(&out);
        assert!(err.starts_with("error[config]: "), "{err}");
        assert_eq!(err.lines().count(), 1);
    }
}

#[test]
fn missing_stage_input_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    let out = windcast(&["fit", "--config", "run.toml", "--out", "empty"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("error[data]: "), "{}", stderr(&out));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_windcast"))
        .args(["verify", "--out", "out"])
        .current_dir(dir.path())
        .env("WINDCAST_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
