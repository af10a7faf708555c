use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use opk_core::trace::Table;
use serde_json::Value;

fn opk(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opk"))
        .args(args)
        .env("OPK_OUT_DIR", out)
        .output()
        .expect("spawn opk")
}

fn table(path: &Path) -> Table {
    Table::read(std::io::BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn analytic_prints_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = opk(dir.path(), &["analytic", "--zeta", "1", "--kappa", "0.5", "--mode", "symmetric"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["sigma2"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["kappa_crit"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["c_norm"].as_f64().unwrap() - 0.353553).abs() < 1e-6);
    assert_eq!(summary(dir.path())["command"], "analytic");

    let out = opk(dir.path(), &["analytic", "--mode", "nonsymmetric"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["sigma2"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((v["kappa_crit"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn bad_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["analytic", "--bogus", "1"][..],
        &["analytic", "--gamma", "0.7"],
        &["analytic", "--kappa", "1.5"],
        &["analytic", "--gamma", "abc"],
        &["experiment", "no-such-experiment"],
        &["macro-run", "--phi0", "zigzag"],
    ] {
        let out = opk(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn constant_opinion_macro_run_has_zero_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let out = opk(dir.path(), &["macro-run", "--phi0", "constant", "--density", "step", "--macro_cells", "32", "--t_end", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(&dir.path().join("macro.csv"));
    assert_eq!(t.schema, "macro/1");
    assert_eq!(t.columns, ["t", "conserved", "entropy", "dissipation_rhs", "amplitude"]);
    assert!(t.rows.len() > 1);
    assert!(t.column("amplitude").unwrap().iter().all(|&a| a == 0.0));
    let field = table(&dir.path().join("macro_field.csv"));
    assert_eq!(field.rows.len(), 32);
    assert!(field.params.iter().any(|(k, v)| k == "density" && v == "step"));
    let s = summary(dir.path());
    assert_eq!(s["command"], "macro-run");
    assert_eq!(s["results"]["final_amplitude"], 0.0);
    assert_eq!(s["config"]["phi0"], "constant");
}

#[test]
fn sine_macro_run_reports_consensus() {
    let dir = tempfile::tempdir().unwrap();
    let out = opk(dir.path(), &["macro-run", "--macro_cells", "64", "--t_end", "200", "--trace_every", "5"]);
    assert!(out.status.success());
    let s = summary(dir.path());
    assert_eq!(s["results"]["entropy_non_increasing"], true);
    assert!(s["results"]["conserved_rel_drift"].as_f64().unwrap() < 1e-12);
    assert!(s["results"]["consensus_time"].as_f64().is_some());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["particle-run", "--agents", "400", "--t_end", "20", "--trace_every", "5", "--seed", "7", "--spatial", "true", "--bins", "8"];
    for dir in [&a, &b] {
        let out = opk(dir.path(), &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["particle.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let t = table(&a.path().join("particle.csv"));
    assert_eq!(t.columns.len(), 3 + 2 * 8);

    let out = opk(b.path(), &["particle-run", "--agents", "400", "--t_end", "20", "--trace_every", "5", "--seed", "8", "--spatial", "true", "--bins", "8"]);
    assert!(out.status.success());
    assert_ne!(fs::read(a.path().join("particle.csv")).unwrap(), fs::read(b.path().join("particle.csv")).unwrap());
}

#[test]
fn environment_overrides_out_dir() {
    let env_dir = tempfile::tempdir().unwrap();
    let key_dir = tempfile::tempdir().unwrap();
    let key = key_dir.path().join("elsewhere");
    let out = opk(env_dir.path(), &["analytic", "--out_dir", key.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(env_dir.path().join("summary.json").exists());
    assert!(!key.exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# comment\ngamma = 0.1\nkappa = 0.4\n").unwrap();
    let out = opk(dir.path(), &["analytic", "--config", cfg.to_str().unwrap(), "--gamma", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["params"]["gamma"], "0.2");
    assert_eq!(s["params"]["kappa"], "0.4");
}

#[test]
fn kinetic_run_writes_trace_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = opk(dir.path(), &["kinetic-run", "--cells", "64", "--t_end", "40", "--initial", "narrow"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(&dir.path().join("kinetic.csv"));
    assert_eq!(t.schema, "kinetic/1");
    assert_eq!(t.columns, ["t", "mass", "mean", "variance", "residual"]);
    for m in t.column("mass").unwrap() {
        assert!((m - 1.0).abs() < 1e-12);
    }
    let profile = table(&dir.path().join("kinetic_profile.csv"));
    assert_eq!(profile.columns, ["phi", "f"]);
    assert!(profile.params.iter().any(|(k, v)| k == "gamma" && v == "0.05"));
    assert_eq!(summary(dir.path())["results"]["trace"], "kinetic.csv");
}

#[test]
fn experiment_writes_named_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = opk(dir.path(), &["experiment", "entropy-audit", "--macro_cells", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(&dir.path().join("entropy-audit.csv"));
    assert_eq!(t.schema, "entropy-audit/1");
    let s = summary(dir.path());
    assert_eq!(s["command"], "experiment entropy-audit");
    assert_eq!(s["results"]["table"], "entropy-audit.csv");
    assert_eq!(s["results"]["monotone"], true);
}

#[test]
fn keys_lists_every_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = opk(dir.path(), &["keys"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (k, _, _) in opk_core::config::KEYS {
        assert!(text.lines().any(|l| l.starts_with(k)), "{k}");
    }
}
