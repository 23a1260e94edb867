use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_granflow"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.ini"))
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let st = bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    st.status.code().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (sub, name) in [("stationary", "stationary_cubic"), ("counterexample", "counterexample"), ("wj-probe", "wj_cubic")] {
        assert_eq!(run(sub, &scenario(name), a.path(), &[]), 0, "{name}");
        assert_eq!(run(sub, &scenario(name), b.path(), &[]), 0, "{name}");
        let (fa, fb) = (files(&a.path().join(name)), files(&b.path().join(name)));
        assert!(fa.iter().any(|(n, _)| n == "summary.csv"));
        assert_eq!(fa, fb, "{name}");
    }
}

#[test]
fn seed_override_changes_probes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = scenario("wj_cubic");
    assert_eq!(run("wj-probe", &cfg, a.path(), &["--seed", "1"]), 0);
    assert_eq!(run("wj-probe", &cfg, b.path(), &["--seed", "2"]), 0);
    let read = |d: &Path| fs::read_to_string(d.join("wj_cubic/probes.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run("stationary", &dir.path().join("missing.ini"), &out, &[]), 1);

    // an envelope constant far above the true rate is a violation
    let text = fs::read_to_string(scenario("cubic_polynomial"))
        .unwrap()
        .replace("c_deg = 0.5", "c_deg = 50")
        .replace("m = 800", "m = 200")
        .replace("t_end = 5", "t_end = 1");
    let cfg = dir.path().join("violating.ini");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run("contract", &cfg, &out, &[]), 2);
    let checks = fs::read_to_string(out.join("cubic_polynomial/checks.csv")).unwrap();
    assert!(checks.contains("pair0:polynomial_envelope,false"));

    // too few iterations for the fixed point is a runtime error
    let text = fs::read_to_string(scenario("stationary_cubic")).unwrap().replace("[run]", "[run]\nmax_iter = 3");
    let cfg = dir.path().join("short.ini");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run("stationary", &cfg, &out, &[]), 1);
    assert!(fs::read_to_string(out.join("stationary_cubic/summary.csv")).unwrap().contains("# FAILED:"));

    let st = bin().arg("report").arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("cubic_polynomial,violation"));
    assert!(report.contains("stationary_cubic,error"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, fs::read_to_string(scenario("counterexample")).unwrap().replace("[grid]", "[grid]\nsize = 3")).unwrap();
    let o = bin().arg("counterexample").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("size"));
}
