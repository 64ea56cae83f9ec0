use std::path::Path;
use std::process::{Command, Output};

fn ergolin(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ergolin"));
    cmd.current_dir(dir).args(args);
    match threads {
        Some(t) => cmd.env("ERGOLIN_THREADS", t),
        None => cmd.env_remove("ERGOLIN_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn list_shows_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let o = ergolin(dir.path(), &["list"], None);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in ["c-ergodic", "c-br-bound", "dist-null", "dist-irregular", "fhc-visits", "nu-n-convergence", "kronecker", "rotation-escape", "measure-ops-suite"] {
        assert!(text.contains(name), "missing {name}");
    }
    let o = ergolin(dir.path(), &["list", "--json"], None);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["experiments"].as_array().unwrap().len(), 9);
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ergolin(dir.path(), &["run", "c-br-bound", "--trials", "0"], None)), 1);
    assert_eq!(code(&ergolin(dir.path(), &["run", "no-such-experiment"], None)), 1);
    assert_eq!(code(&ergolin(dir.path(), &["run", "dist-null", "--trials", "3"], None)), 1);
    assert_eq!(code(&ergolin(dir.path(), &["run", "dist-null", "--tol", "bogus=1"], None)), 1);
    std::fs::write(dir.path().join("bad.toml"), "experiment = \"kronecker\"\nhorizonn = 10\n").unwrap();
    assert_eq!(code(&ergolin(dir.path(), &["run", "--config", "bad.toml"], None)), 1);
    assert_eq!(code(&ergolin(dir.path(), &["list"], Some("0"))), 1);
}

#[test]
fn kronecker_reports_return_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = ergolin(dir.path(), &["run", "kronecker", "--json"], None);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["pass"], true);
    assert!(v["checks"][0]["label"].as_str().unwrap().contains("n = 89"));
    let hit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ergolin-out/kronecker/hit.json")).unwrap()).unwrap();
    assert_eq!(hit["n"], 89);
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["run", "c-br-bound", "--horizon", "4000", "--trials", "8", "--output", out];
    assert_eq!(code(&ergolin(dir.path(), &args("one"), Some("1"))), 0);
    assert_eq!(code(&ergolin(dir.path(), &args("four"), Some("4"))), 0);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("c-br-bound/c_estimate.csv")).unwrap();
    assert_eq!(read("one"), read("four"));
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = ergolin(dir.path(), &["run", "dist-null", "--depth", "3", "--tol", "min_null_density=0.999"], None);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn certificates_verify_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ergolin(dir.path(), &["run", "dist-null", "--depth", "4"], None)), 0);
    let path = dir.path().join("ergolin-out/dist-null/certificate.json");
    let o = ergolin(dir.path(), &["verify-certificate", path.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let measured = v["certificate"]["claims"][0]["measured"].as_f64().unwrap();
    v["certificate"]["claims"][0]["measured"] = serde_json::json!(measured + 0.125);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, serde_json::to_string(&v).unwrap()).unwrap();
    let o = ergolin(dir.path(), &["verify-certificate", tampered.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("DIFFERS"));

    std::fs::write(&tampered, "{").unwrap();
    assert_eq!(code(&ergolin(dir.path(), &["verify-certificate", tampered.to_str().unwrap()], None)), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "experiment = \"kronecker\"\nseed = 7\noutput = \"from-file\"\n").unwrap();
    let o = ergolin(dir.path(), &["run", "--config", "run.toml", "--seed", "11", "--json"], None);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["params"]["seed"], 11);
    assert!(dir.path().join("from-file/kronecker/summary.json").exists());
}
