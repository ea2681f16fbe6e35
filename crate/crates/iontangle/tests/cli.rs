use std::path::Path;
use std::process::{Command, Output};

use iontangle::SCENARIOS;

fn iontangle(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iontangle"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("IONTANGLE_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn list_prints_the_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = iontangle(&["list"], dir.path());
    assert!(out.status.success());
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(names, SCENARIOS);
}

#[test]
fn table1_writes_metadata_and_populations() {
    let dir = tempfile::tempdir().unwrap();
    let out = iontangle(&["scenario", "table1", "--out", "out/"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let base = dir.path().join("out/table1");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(base.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["scenario"], "table1");
    assert_eq!(meta["convergence"]["check"], "step_halving");
    assert_eq!(meta["unconverged"], false);
    let lines = data_lines(&base.join("populations.csv"));
    assert_eq!(lines[0], "gamma_r_over_lambda,t_ms,lambda_t,P_S,P_T,P_ee,P_gg");
    assert_eq!(lines.len(), 1 + 3 * 801);
    let header = std::fs::read_to_string(base.join("populations.csv")).unwrap();
    assert!(header.starts_with("# gamma_r_over_lambda [1]:"));
}

#[test]
fn fig4_small_grid_has_a_chsh_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small_grid.json",
        r#"{
            "scenario": "fig4",
            "params": { "n_cut": 2 },
            "grid": [
                { "name": "nu_over_2pi_khz", "values": [2000] },
                { "name": "nbar_th", "values": [0] },
                { "name": "gamma_eff_over_g", "values": [0.01, 0.1] },
                { "name": "kappa_over_g", "values": [0.01] }
            ],
            "output_dir": "results",
            "options": { "convergence_check": false }
        }"#,
    );
    let out = iontangle(&["scenario", "fig4", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.path().join("results/fig4/grid.csv"));
    let cols: Vec<&str> = lines[0].split(',').collect();
    let s = cols.iter().position(|c| *c == "S").unwrap();
    assert_eq!(lines.len(), 3);
    for row in &lines[1..] {
        let v: f64 = row.split(',').nth(s).unwrap().parse().unwrap();
        assert!(v > 2.0 && v <= 2.0 * std::f64::consts::SQRT_2 + 1e-9);
    }
}

#[test]
fn steady_and_evolve_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"params": {"n_cut": 2, "kappa1_over_2pi_khz": 1, "kappa2_over_2pi_khz": 0.1}, "options": {"convergence_check": false}}"#);
    let out = iontangle(&["steady", "--config", &cfg, "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.path().join("o/steady/steady.csv"));
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("P_S,P_T,P_ee,P_gg,S,residual,nullspace_dim,error"));

    let cfg = write(dir.path(), "e.json", r#"{"options": {"t_end_ms": 20, "samples": 5, "engineered": "branching"}, "params": {"p_s": 0.94, "p_d": 0.06}}"#);
    let out = iontangle(&["evolve", "--config", &cfg, "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.path().join("o/evolve/populations.csv"));
    assert_eq!(lines.len(), 6);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/evolve/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["summary"]["engineered"], "branching");
    assert!(meta["convergence"]["drift"].as_f64().unwrap() < 1e-6);
}

#[test]
fn exit_codes_distinguish_configuration_and_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(iontangle(&["scenario", "fig9"], p).status.code(), Some(1));
    let bad = write(p, "bad.json", r#"{"params": {"nu": 1}}"#);
    assert_eq!(iontangle(&["sweep", "--config", &bad], p).status.code(), Some(1));
    assert_eq!(iontangle(&["steady", "--config", "missing.json"], p).status.code(), Some(1));
    let broken = write(p, "broken.json", "{ not json");
    let out = iontangle(&["evolve", "--config", &broken], p);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json"));

    // No engineered decay and no phonon damping: the steady state is not unique.
    let ambiguous = write(p, "amb.json", r#"{"params": {"n_cut": 2, "gamma_eff_over_2pi_khz": 0}, "options": {"convergence_check": false}}"#);
    let out = iontangle(&["steady", "--config", &ambiguous], p);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not unique"));
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.json", r#"{"options": {"t_end_ms": 1, "samples": 2, "convergence_check": false}}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_iontangle"))
        .args(["scenario", "table1", "--config", &cfg])
        .current_dir(dir.path())
        .env("IONTANGLE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let ok = Command::new(env!("CARGO_BIN_EXE_iontangle"))
        .args(["scenario", "table1", "--config", &cfg])
        .current_dir(dir.path())
        .env("IONTANGLE_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(dir.path().join("out/table1/meta.json").exists());
}
