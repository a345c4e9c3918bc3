use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointground"))
        .args(args)
        .env("POINTGROUND_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn all_checks_pass(v: &Value) -> bool {
    v["paper_checks"]
        .as_object()
        .unwrap()
        .values()
        .all(|c| c["pass"].as_bool().unwrap())
}

fn stderr_report(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

#[test]
fn solve_writes_profile_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_json(&dir.path().join("summary.json"));
    let y = s["y_star"].as_f64().unwrap();
    assert!((y - 3.6498309528).abs() < 1e-8, "{y}");
    let rel = s["K"].as_f64().unwrap().abs() / s["Npw"].as_f64().unwrap();
    assert!(rel <= 1e-4);
    assert!(all_checks_pass(&s), "{s}");

    let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "r,u,du,f,df");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(first[0] > 0.0 && first[1] > 0.0);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(run(&["green", "--out", d.path().to_str().unwrap()]).status.success());
    }
    let x = std::fs::read(a.path().join("green.csv")).unwrap();
    let y = std::fs::read(b.path().join("green.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn subcritical_lambda_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--lambda", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_report(&out);
    assert_eq!(e["error"], "SubcriticalLambda");
    assert_eq!(e["exit_code"], 2);
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn bad_exponent_exits_two() {
    let out = run(&["solve", "--p", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["error"], "BadExponent");
}

#[test]
fn bad_epsilon_exits_two() {
    let out = run(&["perturbed", "--eps=-0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["error"], "BadEpsilon");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(r#"{{"lambda": 1.0, "p": 3.0, "out": {:?}}}"#, out_dir.to_str().unwrap()),
    )
    .unwrap();
    // λ = 1 from the file is subcritical; the flag restores a valid value.
    let bad = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let good = run(&["solve", "--config", cfg.to_str().unwrap(), "--lambda", "2"]);
    assert!(good.status.success());
    let s = read_json(&out_dir.join("summary.json"));
    assert_eq!(s["lambda"].as_f64(), Some(2.0));

    std::fs::write(&cfg, r#"{"lamda": 2.0}"#).unwrap();
    let typo = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(typo.status.code(), Some(2));
    assert_eq!(stderr_report(&typo)["error"], "BadConfig");
}

#[test]
fn pohozaev_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["pohozaev", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let s = read_json(&dir.path().join("pohozaev_summary.json"));
    assert!(all_checks_pass(&s), "{s}");
    let csv = std::fs::read_to_string(dir.path().join("pohozaev.csv")).unwrap();
    assert!(csv.starts_with("r,J,Cu2,residual,X_selfcheck\n"));
}

#[test]
fn perturbed_and_green_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(run(&["perturbed", "--out", d]).status.success());
    let s = read_json(&dir.path().join("perturbed.json"));
    assert!(all_checks_pass(&s), "{s}");
    assert!(s["c1"].as_f64().unwrap() > 1.0);
    assert_eq!(s["sign_scan"]["sign"], -1);

    assert!(run(&["green", "--out", d, "--format", "json"]).status.success());
    let g = read_json(&dir.path().join("green.json"));
    let rows = g["rows"].as_array().unwrap();
    let vals: Vec<f64> = rows.iter().map(|r| r[1].as_f64().unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
}

#[test]
fn spectrum_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "spectrum",
        "--out",
        dir.path().to_str().unwrap(),
        "--n",
        "400",
        "--sectors",
        "0,1",
        "--tags",
        "+,-",
        "--k",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_json(&dir.path().join("spectrum.json"));
    assert!(s.is_object());
    assert!(s.get("paper_checks").is_some());
}
