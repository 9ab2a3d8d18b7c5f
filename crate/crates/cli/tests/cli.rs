use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kamrg-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn kamrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kamrg")).args(args).output().expect("binary runs")
}

const SMALL: [&str; 6] = ["--box-q-kernel", "1", "--box-q-solver", "3", "--n-max", "2"];

fn small(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd];
    args.extend(SMALL);
    args.extend(["--output-dir", out.to_str().unwrap()]);
    args.extend(extra);
    kamrg(&args)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn zero_coupling_gives_a_zero_torus() {
    let out = scratch("zero");
    let o = small("flow", &out, &["--lambda", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let torus = read_json(&out.join("torus.json"));
    for m in torus["modes"].as_array().unwrap() {
        for part in ["re", "im"] {
            assert!(m[part].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
        }
    }
    let v = small("verify", &out, &["--lambda", "0", out.join("torus.json").to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    assert_eq!(read_json(&out.join("verification.json"))["passed"], Value::Bool(true));
}

#[test]
fn flow_writes_every_artifact_and_the_defaults() {
    let out = scratch("artifacts");
    let o = small("flow", &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "torus.json", "torus_grid.csv", "trace.csv", "invariants.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let cfg = read_json(&out.join("config.json"));
    for key in ["d", "omega", "lambda", "box_Q_kernel", "alpha", "beta", "h", "t_end", "seed", "method"] {
        assert!(cfg.get(key).is_some(), "{key} not written");
    }
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 2);
}

#[test]
fn schedule_violation_exits_with_two() {
    let out = scratch("alpha");
    let o = small("flow", &out, &["--alpha", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn unknown_config_field_exits_with_two() {
    let out = scratch("unknown");
    let cfg = out.join("cfg.json");
    std::fs::write(&cfg, r#"{"lamda": 0.001}"#).unwrap();
    let o = kamrg(&["flow", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_or_corrupt_torus_exits_with_two() {
    let out = scratch("missing");
    let o = small("verify", &out, &[out.join("nope.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let bad = out.join("bad.json");
    std::fs::write(&bad, "{\"omega\": [1.0").unwrap();
    let o = small("verify", &out, &[bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resonant_frequency_aborts_the_flow() {
    let out = scratch("resonant");
    let o = kamrg(&["flow", "--omega", "1,2", "--box-q-kernel", "2", "--n-max", "1", "--output-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bumped_coefficient_fails_verification_naming_the_mode() {
    let out = scratch("bump");
    assert_eq!(small("flow", &out, &[]).status.code(), Some(0));
    let path = out.join("torus.json");
    assert_eq!(small("verify", &out, &[path.to_str().unwrap()]).status.code(), Some(0));

    let mut torus = read_json(&path);
    let modes = torus["modes"].as_array_mut().unwrap();
    let m = modes.iter_mut().find(|m| m["q"] == serde_json::json!([1, 1])).unwrap();
    let re = m["re"][0].as_f64().unwrap();
    m["re"][0] = serde_json::json!(re + 1e-3);
    std::fs::write(&path, serde_json::to_string(&torus).unwrap()).unwrap();

    let o = small("verify", &out, &[path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report = read_json(&out.join("verification.json"));
    assert_eq!(report["passed"], Value::Bool(false));
    let worst = &report["worst_mode"];
    assert!(*worst == serde_json::json!([1, 1]) || *worst == serde_json::json!([-1, -1]), "{worst}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("1, 1"));
}

#[test]
fn identical_configs_give_identical_files() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    assert_eq!(small("flow", &a, &["--seed", "7"]).status.code(), Some(0));
    assert_eq!(small("flow", &b, &["--seed", "7"]).status.code(), Some(0));
    for f in ["torus.json", "torus_grid.csv", "trace.csv", "invariants.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn compare_at_zero_coupling_is_all_zero() {
    let out = scratch("compare");
    let o = small("compare", &out, &["--lambda", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cmp = read_json(&out.join("compare.json"));
    for row in cmp["distances"].as_array().unwrap() {
        assert!(row.as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
    }
    let slope = cmp["slopes"][0].as_f64().unwrap();
    assert!((slope - 2.0).abs() <= 0.1, "order-1 slope {slope}");
    assert!(out.join("lambda_sweep.csv").is_file());
}

#[test]
fn diagnose_dumps_the_initial_kernels() {
    let out = scratch("diagnose");
    assert_eq!(small("diagnose", &out, &[]).status.code(), Some(0));
    let dump = std::fs::read_to_string(out.join("kernels.jsonl")).unwrap();
    let first: Value = serde_json::from_str(dump.lines().next().unwrap()).unwrap();
    assert_eq!(first["n"], 0);
    let levels = read_json(&out.join("diagnose.json"))["initial_levels"].clone();
    assert_eq!(levels.as_array().unwrap().len(), 3);
}

#[test]
fn lindstedt_and_newton_write_tori() {
    let out = scratch("oracles");
    assert_eq!(small("lindstedt", &out, &[]).status.code(), Some(0));
    assert_eq!(small("newton", &out, &[]).status.code(), Some(0));
    for f in ["lindstedt_torus.json", "newton_torus.json"] {
        let o = small("verify", &out, &[out.join(f).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{f}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
