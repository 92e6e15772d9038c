use std::path::{Path, PathBuf};
use std::process::Command;

use mhessian_cli::{RunReport, REPORT_SCHEMA};
use serde_json::{json, Value};
use tempfile::TempDir;

const DISC: f64 = 1.445_796_490_736_696;

struct Run {
    code: i32,
    stderr: String,
    report: Option<RunReport>,
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mhessian"))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

/// Runs `config` with `output.report` pointed into `dir`.
fn run(dir: &Path, name: &str, mut config: Value, threads_env: Option<&str>) -> Run {
    let report = dir.join(format!("{name}.report.json"));
    config["output"]["report"] = json!(report);
    let path = write_json(dir, &format!("{name}.json"), &config);
    let mut cmd = bin();
    cmd.arg("run").arg(&path).env_remove("MHESSIAN_THREADS");
    if let Some(t) = threads_env {
        cmd.env("MHESSIAN_THREADS", t);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        report: report.exists().then(|| RunReport::read(&report).unwrap()),
    }
}

fn disc(h: f64, mode: &str) -> Value {
    json!({
        "domain": {"kind": "ball", "params": [1.0], "n": 1, "h": h},
        "problem": {"mode": mode, "m": 1},
        "output": {}
    })
}

fn compare(a: &Path, b: &Path, tol: &Path) -> i32 {
    bin().arg("compare").arg(a).arg(b).arg("--tol-file").arg(tol).status().unwrap().code().unwrap()
}

#[test]
fn eigen_disc_report() {
    let dir = TempDir::new().unwrap();
    let mut cfg = disc(1.0 / 16.0, "eigen");
    cfg["problem"]["method"] = json!("both");
    cfg["output"]["field_csv"] = json!(dir.path().join("field.csv"));
    let r = run(dir.path(), "disc", cfg, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report.unwrap();
    let l = rep.scalars["lambda1"];
    assert!((l - DISC).abs() / DISC < 0.01, "{l}");
    assert!(rep.scalars["method_rel_gap"] < 0.005);
    assert!(rep.flags["bounds_pass"]);
    assert!(!rep.heuristic_domain);
    let text = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,y1,u,sigma_m,cone_slack"));
    assert_eq!(lines.count(), rep.provenance.dims.iter().product::<usize>());
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let mut cfg = disc(0.25, "eigen");
    cfg["domain"]["n"] = json!(2);
    cfg["problem"]["m"] = json!(3);
    let r = run(dir.path(), "m3", cfg, None);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("1 ≤ m ≤ n"), "{}", r.stderr);
    assert!(r.report.is_none());

    let mut cfg = disc(0.25, "eigen");
    cfg["problem"]["bogus"] = json!(1);
    assert_eq!(run(dir.path(), "unknown", cfg, None).code, 2);

    let r = run(dir.path(), "env", disc(0.25, "eigen"), Some("zero"));
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("MHESSIAN_THREADS"));

    let cfg = disc(0.25, "dirichlet");
    assert_eq!(run(dir.path(), "norhs", cfg, None).code, 2);

    let mut cfg = disc(0.25, "eigen");
    cfg["problem"]["f"] = json!({"kind": "constant", "value": -1.0});
    assert_eq!(run(dir.path(), "negf", cfg, None).code, 2);
}

#[test]
fn solver_failure_exit_3() {
    let dir = TempDir::new().unwrap();
    let mut cfg = disc(1.0 / 16.0, "eigen");
    cfg["solver"] = json!({"max_eigen_iters": 1});
    let r = run(dir.path(), "fail", cfg, None);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("inverse_iteration"), "{}", r.stderr);
    assert!(!r.report.unwrap().messages.is_empty());
}

#[test]
fn verify_mode() {
    let dir = TempDir::new().unwrap();
    let mut cfg = disc(1.0 / 16.0, "verify");
    cfg["problem"]["lambda1"] = json!(DISC);
    let r = run(dir.path(), "ok", cfg.clone(), None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.report.unwrap().flags["verify_pass"]);

    cfg["problem"]["lambda1"] = json!(1.2 * DISC);
    let r = run(dir.path(), "tampered", cfg, None);
    assert_eq!(r.code, 4);
    let rep = r.report.unwrap();
    assert!(!rep.flags["verify_pass"]);
    assert!(!rep.flags["lambda1_within_tol"]);
}

#[test]
fn dirichlet_quadratic() {
    let dir = TempDir::new().unwrap();
    let mut cfg = disc(1.0 / 16.0, "dirichlet");
    cfg["problem"]["rhs"] = json!({"kind": "constant", "value": 1.0});
    let r = run(dir.path(), "dir", cfg, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = &r.report.unwrap().scalars;
    assert!((s["u_min"] + 1.0).abs() < 1e-8, "{}", s["u_min"]);
    assert!((s["energy"] - std::f64::consts::PI / 4.0).abs() < 0.05, "{}", s["energy"]);
}

#[test]
fn radial_mode_csv() {
    let dir = TempDir::new().unwrap();
    let mut cfg = disc(0.25, "radial");
    cfg["output"]["radial_csv"] = json!(dir.path().join("radial.csv"));
    let r = run(dir.path(), "rad", cfg, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report.unwrap();
    assert!((rep.scalars["radial_lambda"] - DISC).abs() < 1e-8);
    assert_eq!(rep.labels["radial_label"], "eigenvalue");
    let mut rdr = csv::Reader::from_path(dir.path().join("radial.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["t", "v", "dv"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() > 10);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    assert!(rows.last().unwrap()[1].abs() < 1e-6);

    let mut cfg = disc(0.25, "radial");
    cfg["domain"] = json!({"kind": "box", "params": [1.0, 1.0], "n": 1, "h": 0.25});
    assert_eq!(run(dir.path(), "radbox", cfg, None).code, 2);
}

#[test]
fn bifurcate_gate() {
    let dir = TempDir::new().unwrap();
    let l = 1.44;
    let mut cfg = disc(1.0 / 16.0, "bifurcate");
    cfg["problem"]["lambda1"] = json!(l);
    cfg["problem"]["gamma0"] = json!(0.5 * l);
    cfg["problem"]["psi"] = json!({"family": "affine", "a": 1.0, "b": 0.5 * l});
    let r = run(dir.path(), "ok", cfg.clone(), None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = &r.report.unwrap().scalars;
    assert!(s["residual"] < 1e-7);
    assert!(s["fixed_point_gap"] < 1e-5);

    cfg["problem"]["gamma0"] = json!(1.1 * l);
    let r = run(dir.path(), "refused", cfg, None);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("precondition"), "{}", r.stderr);
}

#[test]
fn bounds_mode_box_is_heuristic() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "domain": {"kind": "box", "params": [1.0, 1.0], "n": 1, "h": 0.0625},
        "problem": {"mode": "bounds", "m": 1},
        "output": {}
    });
    let r = run(dir.path(), "box", cfg, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report.unwrap();
    assert!(rep.heuristic_domain);
    assert!(rep.flags["bounds_pass"]);
    let s = &rep.scalars;
    assert!(s["lower_alexandrov"] <= s["lambda1"] && s["lambda1"] <= s["upper_inscribed_ball"]);
}

#[test]
fn report_round_trips_and_rejects_unknown_fields() {
    let dir = TempDir::new().unwrap();
    let r = run(dir.path(), "rt", disc(0.125, "eigen"), None);
    let rep = r.report.unwrap();
    let text = serde_json::to_string(&rep).unwrap();
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rep);
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["extra"] = json!(true);
    assert!(serde_json::from_value::<RunReport>(v).is_err());
}

fn assert_keys_documented(value: &Value, schema: &Value, defs: &Value, path: &str) {
    let schema = match schema.get("$ref").and_then(Value::as_str) {
        Some(r) => &defs[r.trim_start_matches("#/$defs/")],
        None => schema,
    };
    let Some(obj) = value.as_object() else { return };
    let variants: Vec<&Value> = match schema.get("oneOf").and_then(Value::as_array) {
        Some(v) => v.iter().collect(),
        None => vec![schema],
    };
    for (k, v) in obj {
        let sub = variants.iter().find_map(|s| s["properties"].get(k));
        let sub = sub.unwrap_or_else(|| panic!("{path}.{k} is not documented in the schema"));
        assert_keys_documented(v, sub, defs, &format!("{path}.{k}"));
    }
}

#[test]
fn schema_documents_every_report_field() {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let out = bin().arg("schema").output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), REPORT_SCHEMA);
    let defs = &schema["$defs"];
    let dir = TempDir::new().unwrap();
    let l = 1.44;
    let mut bif = disc(0.125, "bifurcate");
    bif["problem"]["lambda1"] = json!(l);
    bif["problem"]["gamma0"] = json!(0.5 * l);
    bif["problem"]["psi"] = json!({"family": "affine", "a": 1.0, "b": 0.5 * l});
    bif["problem"]["uniqueness_starts"] = json!(2);
    let mut eig = disc(0.125, "eigen");
    eig["problem"]["method"] = json!("both");
    eig["problem"]["uniqueness_starts"] = json!(2);
    let mut dir_cfg = disc(0.125, "dirichlet");
    dir_cfg["problem"]["rhs"] = json!({"kind": "affine", "c0": 2.0, "grad": [0.5, 0.0]});
    let mut ver = disc(0.125, "verify");
    ver["problem"]["lambda1"] = json!(DISC);
    let configs = [
        ("eig", eig),
        ("bounds", disc(0.125, "bounds")),
        ("bif", bif),
        ("rad", disc(0.125, "radial")),
        ("dir", dir_cfg),
        ("ver", ver),
    ];
    for (name, cfg) in configs {
        let r = run(dir.path(), name, cfg, None);
        assert_eq!(r.code, 0, "{name}: {}", r.stderr);
        let v = serde_json::to_value(r.report.unwrap()).unwrap();
        assert_keys_documented(&v, &schema, defs, name);
    }
}

#[test]
fn exact_mode_is_bitwise_deterministic_across_threads() {
    let dir = TempDir::new().unwrap();
    let mut ball2 = json!({
        "domain": {"kind": "ball", "params": [1.0], "n": 2, "h": 1.0 / 6.0},
        "problem": {"mode": "eigen", "m": 2},
        "output": {}
    });
    for (name, cfg) in [("disc", disc(1.0 / 16.0, "eigen")), ("ball2", ball2.clone())] {
        let reports: Vec<RunReport> = ["1", "3", "8"]
            .iter()
            .map(|t| run(dir.path(), &format!("{name}{t}"), cfg.clone(), Some(t)).report.unwrap())
            .collect();
        assert_eq!(reports[0].provenance.threads, 1);
        assert_eq!(reports[2].provenance.threads, 8);
        for r in &reports[1..] {
            assert_eq!(r.scalars.len(), reports[0].scalars.len());
            for (k, v) in &reports[0].scalars {
                assert_eq!(v.to_bits(), r.scalars[k].to_bits(), "{name}: {k}");
            }
        }
    }
    ball2["determinism"] = json!("fast");
    ball2["threads"] = json!(2);
    let fast = run(dir.path(), "fast", ball2.clone(), Some("5")).report.unwrap();
    assert_eq!(fast.provenance.threads, 2);
    ball2["determinism"] = json!("exact");
    let exact = run(dir.path(), "exact", ball2, None).report.unwrap();
    assert_eq!(fast.scalars, exact.scalars);
}

#[test]
fn compare_gates() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    run(d, "a", disc(1.0 / 16.0, "eigen"), None);
    run(d, "b", disc(1.0 / 32.0, "eigen"), None);
    let a = d.join("a.report.json");
    let b = d.join("b.report.json");
    let strict = write_json(d, "strict.json", &json!({"default": 0.0}));
    let lambda3 = write_json(d, "l3.json", &json!({"keys": {"lambda1": 0.03}}));
    let lambda1 = write_json(d, "l1.json", &json!({"keys": {"lambda1": 0.01}}));
    assert_eq!(compare(&a, &a, &strict), 0);
    assert_eq!(compare(&a, &b, &lambda3), 0);

    let mut shifted: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    shifted["scalars"]["lambda1"] = json!(1.05 * DISC);
    let shifted = write_json(d, "shifted.json", &shifted);
    assert_eq!(compare(&a, &shifted, &lambda1), 1);

    run(d, "c", disc(1.0 / 16.0, "bounds"), None);
    assert_eq!(compare(&a, &d.join("c.report.json"), &lambda3), 2);
    let bad_tol = write_json(d, "bad.json", &json!({"keys": {"lambda1": 0.01}, "oops": 1}));
    assert_eq!(compare(&a, &a, &bad_tol), 2);
}
