use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn accreta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_accreta"))
        .args(args)
        .env("ACCRETA_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The small decoupled geometry with a solute-dependent speed.
fn coupled_config(dir: &Path, max_iter: usize, tol: f64) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(fixture("decoupled.json")).unwrap()).unwrap();
    v["hamiltonian"]["gamma"] = json!({"profile": "affine", "base": 1.0, "slope": 0.3, "u_min": 0.0, "u_max": 1.0});
    v["coupling"]["max_iter"] = json!(max_iter);
    v["coupling"]["tol"] = json!(tol);
    let path = dir.join(format!("coupled_{max_iter}.json"));
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn assert_same_tree(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let (x, y) = (a.join(&n), b.join(&n));
        if x.is_dir() {
            assert_same_tree(&x, &y);
        } else {
            assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{} differs", x.display());
        }
    }
}

#[test]
fn validate_accepts_fixtures_and_rejects_bad_input() {
    for name in ["disk_benchmark.json", "decoupled.json"] {
        let out = accreta(&["validate", "--config", s(&fixture(name))]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    }
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ not json").unwrap();
    assert_eq!(code(&accreta(&["validate", "--config", s(&broken)])), 1);

    let mut v: Value = serde_json::from_str(&fs::read_to_string(fixture("decoupled.json")).unwrap()).unwrap();
    v["domain"]["kappa0"] = json!(-1.0);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    let out = accreta(&["validate", "--config", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("error ["));
    assert_eq!(code(&accreta(&["couple", "--config", s(&bad), "--out", s(&dir.path().join("x"))])), 1);
    assert_eq!(code(&accreta(&["couple"])), 1);
}

#[test]
fn decoupled_run_writes_layout_and_diagnoses() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = accreta(&["couple", "--config", s(&fixture("decoupled.json")), "--out", s(&run)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "history.json", "diagnostics.json", "activation.csv", "activation.json", "v_final.csv", "v_final.json"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_dir(run.join("u")).unwrap().count(), 2 * 11);
    assert_eq!(fs::read_dir(run.join("ku")).unwrap().count(), 2 * 11);

    let history: Value = serde_json::from_str(&fs::read_to_string(run.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["verdict"], "converged");
    assert_eq!(history["records"].as_array().unwrap().len(), 1);
    assert_eq!(history["records"][0]["delta"], 0.0);
    assert_eq!(history["representation_residual"], 0.0);
    let diag: Value = serde_json::from_str(&fs::read_to_string(run.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["passed"], true);

    let out = accreta(&["diagnose", "--run", s(&run), "--out", s(&dir.path().join("d.json"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(run.join("diagnostics.json")).unwrap(), fs::read(dir.path().join("d.json")).unwrap());
}

#[test]
fn diagnose_rejects_inconsistent_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&accreta(&["couple", "--config", s(&fixture("decoupled.json")), "--out", s(&run)])), 0);
    let text = fs::read_to_string(run.join("v_final.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let last = lines.len() - 1;
    let mut cols: Vec<String> = lines[last].split(',').map(str::to_string).collect();
    let value: f64 = cols[4].parse().unwrap();
    cols[4] = (value + 0.01).to_string();
    lines[last] = cols.join(",");
    fs::write(run.join("v_final.csv"), lines.join("\n") + "\n").unwrap();
    assert_eq!(code(&accreta(&["diagnose", "--run", s(&run)])), 1);
}

#[test]
fn stage_commands_reproduce_an_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let config = coupled_config(dir.path(), 50, 1e-3);
    let run = dir.path().join("run");
    let out = accreta(&["couple", "--config", s(&config), "--out", s(&run), "--keep-iterations"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let j = run.join("iterations/j_0001");
    assert!(j.is_dir());

    let (p1, p2, p3) = (dir.path().join("hj"), dir.path().join("el"), dir.path().join("cv"));
    let a = j.join("activation.csv");
    assert_eq!(code(&accreta(&["hj", "--config", s(&config), "--activation", s(&a), "--out", s(&p1), "--curves", "4"])), 0);
    assert_eq!(fs::read(j.join("v.csv")).unwrap(), fs::read(p1.join("v.csv")).unwrap());
    assert!(fs::read_to_string(p1.join("curves.csv")).unwrap().starts_with("curve,k,x,y\n"));

    assert_eq!(code(&accreta(&["elliptic", "--config", s(&config), "--v", s(&p1.join("v.csv")), "--out", s(&p2)])), 0);
    assert_same_tree(&j.join("u"), &p2.join("u"));

    assert_eq!(code(&accreta(&["convolve", "--config", s(&config), "--u", s(&p2.join("u")), "--out", s(&p3)])), 0);
    assert_same_tree(&j.join("ku"), &p3.join("ku"));
}

#[test]
fn manifest_rerun_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = coupled_config(dir.path(), 50, 1e-3);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&accreta(&["couple", "--config", s(&config), "--out", s(&a)])), 0);
    assert_eq!(code(&accreta(&["couple", "--config", s(&a.join("manifest.json")), "--out", s(&b)])), 0);
    for f in ["history.json", "diagnostics.json", "v_final.csv", "activation.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_same_tree(&a.join("ku"), &b.join("ku"));
    let ma: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let mb: Value = serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
}

#[test]
fn iteration_budget_exhaustion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = coupled_config(dir.path(), 2, 1e-14);
    let run = dir.path().join("run");
    let out = accreta(&["couple", "--config", s(&config), "--out", s(&run)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let history: Value = serde_json::from_str(&fs::read_to_string(run.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["verdict"], "max_iter_reached");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outcome"], "max_iter_reached");
}

#[test]
fn stage_inputs_on_another_grid_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&accreta(&["couple", "--config", s(&fixture("decoupled.json")), "--out", s(&run)])), 0);
    let out = accreta(&[
        "elliptic",
        "--config",
        s(&fixture("disk_benchmark.json")),
        "--v",
        s(&run.join("v_final.csv")),
        "--out",
        s(&dir.path().join("e")),
    ]);
    assert_eq!(code(&out), 1);
}
