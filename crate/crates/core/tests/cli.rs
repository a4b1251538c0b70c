use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_sphereflow");

fn scenario(name: &str, body: &str) -> String {
    format!(
        r#"{{
  "name": "{name}",
  "n": 2,
  "N": 32,
  "curvature": {{"name": "sigma", "k": 2}},
  {body}
}}"#
    )
}

fn prolate(name: &str, extra: &str) -> String {
    scenario(
        name,
        &format!(
            r#""initial": {{"shape": "perturbed_sphere", "r": 0.7853981633974483, "amp": 0.05, "mode": 2}},
  "direction": "contracting",
  "stop": {{"min_radius_below": 0.3}},
  "snapshot_stride": 20{extra}"#
        ),
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, text).unwrap();
    path
}

fn sphereflow(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN)
        .args(args)
        .env_remove("SPHEREFLOW_OUT")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "prolate", &prolate("prolate", ""));
    let out = tmp.path().join("out");
    let (code, stdout, _) = sphereflow(&["run", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code, 0);
    assert!(stdout.contains("prolate"));
    let dir = out.join("prolate");
    for f in [
        "meta.json",
        "series.csv",
        "u_overlay.svg",
        "decay.svg",
        "snapshots/00000.txt",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let series = fs::read_to_string(dir.join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,theta_ref,u_min,u_max,pinch_ratio,F_tilde_min,F_tilde_max,f_sigma,tracefree"
    );
    let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 9);
    for field in row {
        let x: f64 = field.parse().unwrap();
        assert_eq!(format!("{x:.16e}").parse::<f64>().unwrap(), x);
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap();
    let est = meta["tstar_est"].as_f64().unwrap();
    let bracket = meta["tstar_bracket"].as_array().unwrap();
    assert!(bracket[0].as_f64().unwrap() <= est && est <= bracket[1].as_f64().unwrap());
    assert_eq!(meta["config"]["N"], 32);
    let sup = meta["f_sigma_max"].as_array().unwrap();
    assert_eq!(sup.len(), 2);
    assert_eq!(sup[1][0], 0.1);
    let snap = fs::read_to_string(dir.join("snapshots/00000.txt")).unwrap();
    assert_eq!(snap.lines().next().unwrap().split_whitespace().count(), 3);
    assert_eq!(snap.lines().count(), 34);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_job_counts() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a", &prolate("a", ""));
    let b = write_config(
        tmp.path(),
        "b",
        &prolate("b", ",\n  \"curvature\": {\"name\": \"mean\"}")
            .replace("\"curvature\": {\"name\": \"sigma\", \"k\": 2},\n", ""),
    );
    let one = tmp.path().join("one");
    let two = tmp.path().join("two");
    assert_eq!(
        sphereflow(&[
            "run",
            "--config",
            p(&a),
            "--config",
            p(&b),
            "--out",
            p(&one)
        ])
        .0,
        0
    );
    assert_eq!(
        sphereflow(&[
            "run",
            "--config",
            p(&a),
            "--config",
            p(&b),
            "--jobs",
            "2",
            "--out",
            p(&two)
        ])
        .0,
        0
    );
    for name in ["a", "b"] {
        for f in ["series.csv", "meta.json", "u_overlay.svg", "decay.svg"] {
            let x = fs::read(one.join(name).join(f)).unwrap();
            let y = fs::read(two.join(name).join(f)).unwrap();
            assert!(x == y, "{name}/{f} differs");
        }
    }
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "env", &prolate("env", ""));
    let root = tmp.path().join("from_env");
    let status = Command::new(BIN)
        .args(["run", "--config", p(&cfg)])
        .env("SPHEREFLOW_OUT", &root)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(root.join("env/series.csv").is_file());
}

#[test]
fn missing_config_is_a_configuration_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.json");
    let (code, _, stderr) = sphereflow(&["run", "--config", p(&missing), "--out", p(tmp.path())]);
    assert_eq!(code, 2);
    assert!(stderr.contains("nope.json"), "{stderr}");
}

#[test]
fn malformed_configs_are_configuration_errors() {
    let tmp = TempDir::new().unwrap();
    let bad_json = write_config(tmp.path(), "bad", "{ not json");
    let bad_grid = write_config(
        tmp.path(),
        "grid",
        &prolate("grid", "").replace("\"N\": 32", "\"N\": 33"),
    );
    let unknown = write_config(tmp.path(), "unk", &prolate("unk", ",\n  \"colour\": 1"));
    for cfg in [bad_json, bad_grid, unknown] {
        assert_eq!(
            sphereflow(&["run", "--config", p(&cfg), "--out", p(tmp.path())]).0,
            2
        );
    }
    assert_eq!(sphereflow(&["run"]).0, 2);
    assert_eq!(sphereflow(&["frobnicate"]).0, 2);
}

#[test]
fn running_past_extinction_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let text = scenario(
        "past",
        r#""initial": {"shape": "sphere", "r": 1.0},
  "direction": "contracting",
  "stop": {"time_reached": 5.0}"#,
    );
    let cfg = write_config(tmp.path(), "past", &text);
    let out = tmp.path().join("out");
    let (code, _, stderr) = sphereflow(&["run", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code, 3, "{stderr}");
    assert!(out.join("past/series.csv").is_file());
}

#[test]
fn dual_check_exit_status_follows_the_tolerance() {
    let tmp = TempDir::new().unwrap();
    let loose = write_config(
        tmp.path(),
        "loose",
        &prolate("loose", ",\n  \"tolerance\": 5e-3"),
    );
    let tight = write_config(
        tmp.path(),
        "tight",
        &prolate("tight", ",\n  \"tolerance\": 1e-12"),
    );
    let out = tmp.path().join("out");
    assert_eq!(
        sphereflow(&["dual-check", "--config", p(&loose), "--out", p(&out)]).0,
        0
    );
    assert_eq!(
        sphereflow(&["dual-check", "--config", p(&tight), "--out", p(&out)]).0,
        1
    );
    let both = sphereflow(&[
        "dual-check",
        "--config",
        p(&loose),
        "--config",
        p(&tight),
        "--out",
        p(&out),
    ]);
    assert_eq!(both.0, 1);
    let csv = fs::read_to_string(out.join("loose/dual.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,d");
    let summary = fs::read_to_string(out.join("tight/summary.txt")).unwrap();
    assert!(summary.starts_with("max_d "));
}

#[test]
fn benchmark_compares_with_the_closed_form() {
    let tmp = TempDir::new().unwrap();
    let text = scenario(
        "sphere",
        r#""initial": {"shape": "sphere", "r": 1.0471975511965979},
  "direction": "contracting",
  "stop": {"min_radius_below": 0.3}"#,
    );
    let cfg = write_config(tmp.path(), "sphere", &text);
    let out = tmp.path().join("out");
    assert_eq!(
        sphereflow(&["benchmark", "--config", p(&cfg), "--out", p(&out)]).0,
        0
    );
    assert!(out.join("sphere/benchmark.csv").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sphere/benchmark.json")).unwrap())
            .unwrap();
    assert!(report.is_object());
    let bad = write_config(tmp.path(), "notsphere", &prolate("notsphere", ""));
    assert_eq!(
        sphereflow(&["benchmark", "--config", p(&bad), "--out", p(&out)]).0,
        2
    );
}

#[test]
fn concavity_audit_is_deterministic_and_clean() {
    let tmp = TempDir::new().unwrap();
    let one = tmp.path().join("one");
    let two = tmp.path().join("two");
    for root in [&one, &two] {
        let (code, _, _) = sphereflow(&[
            "concavity-audit",
            "--n",
            "4",
            "--samples",
            "50",
            "--seed",
            "9",
            "--out",
            p(root),
        ]);
        assert_eq!(code, 0);
    }
    let a = fs::read(one.join("concavity_audit_n4_seed9/audit.csv")).unwrap();
    let b = fs::read(two.join("concavity_audit_n4_seed9/audit.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().count() > 50);
    assert_eq!(
        sphereflow(&["concavity-audit", "--n", "9", "--out", p(tmp.path())]).0,
        2
    );
}
