use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_magtomo"));
    c.env("RUST_LOG", "error");
    c
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn error_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("error json on stderr");
    serde_json::from_str(line).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_SIM: &str = r#"{
  "target": {"variant": "squeezed_coherent", "alpha": [0.8, -0.6], "r": 0.3, "psi": 1.0},
  "signal": {"theta_over_pi": 0.4},
  "noise": {"sigma_s": 0.5},
  "n": 800,
  "seed": 3
}"#;

#[test]
fn simulate_preset_writes_full_dataset_reproducibly() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run("simulate", &preset("simulate_fig3_med.json"), out, &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read(a.join("dataset.csv")).unwrap();
    assert_eq!(text.iter().filter(|&&c| c == b'\n').count(), 10_001);
    assert_eq!(text, fs::read(b.join("dataset.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("dataset.meta.json")).unwrap(),
        fs::read(b.join("dataset.meta.json")).unwrap()
    );
    let meta = read_json(&a.join("dataset.meta.json"));
    assert_eq!(meta["seed"], 42);
}

#[test]
fn seed_override_changes_data() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "sim.json", SMALL_SIM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("simulate", &cfg, &a, &[]).status.success());
    assert!(run("simulate", &cfg, &b, &["--seed", "4"]).status.success());
    assert_ne!(
        fs::read(a.join("dataset.csv")).unwrap(),
        fs::read(b.join("dataset.csv")).unwrap()
    );
    assert_eq!(read_json(&b.join("dataset.meta.json"))["seed"], 4);
}

#[test]
fn zero_samples_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sim.json",
        &SMALL_SIM.replace("\"n\": 800", "\"n\": 0"),
    );
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["exit_code"], 2);
    assert!(!out.join("dataset.csv").exists());
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sim.json",
        &SMALL_SIM.replace("\"seed\": 3", "\"seed\": 3, \"speed\": 1"),
    );
    let o = run("simulate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "schema");
}

fn simulate_small(dir: &TempDir) -> PathBuf {
    let cfg = write_config(dir, "sim.json", SMALL_SIM);
    let out = dir.path().join("data");
    let o = run("simulate", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("dataset.csv")
}

#[test]
fn reconstruct_writes_report_and_grids() {
    let dir = TempDir::new().unwrap();
    simulate_small(&dir);
    let cfg = write_config(
        &dir,
        "rec.json",
        r#"{
          "dataset": "data/dataset.csv",
          "cutoff": 12,
          "mle": {"stop_rule": "iteration_budget", "max_iter": 15},
          "target": {"variant": "squeezed_coherent", "alpha": [0.8, -0.6], "r": 0.3, "psi": 1.0},
          "wigner": {"x_min": -5, "x_max": 5, "nx": 11, "p_min": -5, "p_max": 5, "np": 11}
        }"#,
    );
    let out = dir.path().join("rec");
    let o = run("reconstruct", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["dim"], 12);
    assert_eq!(report["iterations"], 15);
    let f = report["fidelity"].as_f64().unwrap();
    assert!(f > 0.8 && f <= 1.0, "{f}");
    assert!(out.join("wigner_pred.csv").exists() && out.join("wigner_target.csv").exists());
    let lines = fs::read_to_string(out.join("wigner_pred.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(lines, 1 + 121);

    // Cutoff override reaches the report.
    let o = run(
        "reconstruct",
        &cfg,
        &dir.path().join("rec8"),
        &["--cutoff", "8"],
    );
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("rec8/report.json"))["dim"], 8);
}

#[test]
fn reconstruct_without_target_skips_fidelity() {
    let dir = TempDir::new().unwrap();
    simulate_small(&dir);
    let cfg = write_config(
        &dir,
        "rec.json",
        r#"{"dataset": "data/dataset.csv", "cutoff": 6, "mle": {"stop_rule": "iteration_budget", "max_iter": 3},
            "wigner": {"x_min": -1, "x_max": 1, "nx": 3, "p_min": -1, "p_max": 1, "np": 3}}"#,
    );
    let out = dir.path().join("rec");
    assert!(run("reconstruct", &cfg, &out, &[]).status.success());
    assert!(read_json(&out.join("report.json"))
        .get("fidelity")
        .is_none());
    assert!(!out.join("wigner_target.csv").exists());
}

#[test]
fn corrupted_csv_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let data = simulate_small(&dir);
    let mut text = fs::read_to_string(&data).unwrap();
    text.push_str("0.5,not-a-number\n");
    fs::write(&data, text).unwrap();
    let cfg = write_config(
        &dir,
        "rec.json",
        r#"{"dataset": "data/dataset.csv", "cutoff": 6}"#,
    );
    let o = run("reconstruct", &cfg, &dir.path().join("rec"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = error_json(&o);
    assert_eq!(err["error"], "schema");
    assert!(err["message"].as_str().unwrap().contains("line"));
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "rec.json",
        r#"{"dataset": "nowhere.csv", "cutoff": 6}"#,
    );
    let o = run("reconstruct", &cfg, &dir.path().join("rec"), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_json(&o)["error"], "io");
}

#[test]
fn degenerate_theta_is_surfaced() {
    let dir = TempDir::new().unwrap();
    simulate_small(&dir);
    let cfg = write_config(
        &dir,
        "rec.json",
        r#"{"dataset": "data/dataset.csv", "signal": {"theta_over_pi": 0.5}, "cutoff": 6}"#,
    );
    let o = run("reconstruct", &cfg, &dir.path().join("rec"), &[]);
    assert_eq!(o.status.code(), Some(3));
    let err = error_json(&o);
    assert_eq!(err["error"], "degenerate_theta");
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("degenerate mixing angle"));
}

#[test]
fn not_converged_keeps_report_and_exits_numerical() {
    let dir = TempDir::new().unwrap();
    simulate_small(&dir);
    let cfg = write_config(
        &dir,
        "rec.json",
        r#"{"dataset": "data/dataset.csv", "cutoff": 8, "mle": {"max_iter": 2},
            "wigner": {"x_min": -1, "x_max": 1, "nx": 3, "p_min": -1, "p_max": 1, "np": 3}}"#,
    );
    let out = dir.path().join("rec");
    let o = run("reconstruct", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "not_converged");
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["converged"], false);
    assert_eq!(report["iterations"], 2);
}

fn snr_rows(out: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(out.join("snr.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn snr_presets() {
    let dir = TempDir::new().unwrap();
    let ir = dir.path().join("ir");
    assert!(run("snr", &preset("snr_yig_infrared.json"), &ir, &[])
        .status
        .success());
    let rows = snr_rows(&ir);
    assert_eq!(rows.len(), 31);
    for r in &rows {
        assert!(r[2] > 0.15 && r[2] < 0.30, "{r:?}");
    }
    let interior: Vec<f64> = rows[1..rows.len() - 1].iter().map(|r| r[2]).collect();
    assert!(
        interior.iter().all(|t| (0.18..=0.25).contains(t)),
        "{interior:?}"
    );

    let vis = dir.path().join("vis");
    assert!(run("snr", &preset("snr_yig_visible.json"), &vis, &[])
        .status
        .success());
    let theta_off = read_json(&vis.join("snr.json"))["theta_off"]
        .as_f64()
        .unwrap();
    assert!((theta_off - 0.02).abs() < 0.005, "{theta_off}");
}

#[test]
fn snr_empty_grid_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "snr.json",
        r#"{"scenario": {"material": "yig_infrared", "l_um": 10, "rho": 0.5},
            "l_grid": {"start_um": 1, "stop_um": 10, "points": 0}}"#,
    );
    let out = dir.path().join("snr");
    assert!(run("snr", &cfg, &out, &[]).status.success());
    assert_eq!(
        fs::read_to_string(out.join("snr.csv")).unwrap(),
        "l,rho_opt,theta,sigma_s,sigma_b\n"
    );
}

#[test]
fn evaluate_requires_target() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "ev.json",
        r#"{"signal": {"theta_over_pi": 0.3}, "noise": {"sigma_s": 1}, "n": 10, "seed": 1}"#,
    );
    let o = run("evaluate", &cfg, &dir.path().join("ev"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"]
        .as_str()
        .unwrap()
        .contains("reconstruct"));
}

#[test]
fn evaluate_is_idempotent_and_tags_stages() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
      "target": {"variant": "cat", "alpha": [1.0, 0.5], "psi": 0.4},
      "signal": {"theta_over_pi": 0.35},
      "noise": {"sigma_s": 0.6},
      "n": 600, "seed": 9, "cutoff": 10,
      "mle": {"stop_rule": "iteration_budget", "max_iter": 10},
      "wigner": {"x_min": -4, "x_max": 4, "nx": 9, "p_min": -4, "p_max": 4, "np": 9}
    }"#;
    let cfg = write_config(&dir, "ev.json", body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run("evaluate", &cfg, out, &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "dataset.csv",
        "dataset.meta.json",
        "report.json",
        "wigner_pred.csv",
        "wigner_target.csv",
        "metrics.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let m = read_json(&a.join("metrics.json"));
    assert!(m["fidelity_to_classical"].as_f64().is_some());
    assert_eq!(m["iterations"], 10);

    let degenerate = write_config(&dir, "deg.json", &body.replace("0.35", "0.5"));
    let o = run("evaluate", &degenerate, &dir.path().join("deg"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["stage"], "reconstruct");
}

#[test]
fn fig3_low_preset_recovers_phase() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("f3l");
    let o = run("evaluate", &preset("fig3_low.json"), &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out.join("metrics.json"));
    let err = m["phase_error_deg"].as_f64().unwrap();
    assert!(err < 2.0, "{err}");
}

#[test]
fn every_fidelity_preset_parses() {
    for fig in 3..=6 {
        for level in ["low", "med", "high"] {
            let p = preset(&format!("fig{fig}_{level}.json"));
            let v = read_json(&p);
            assert_eq!(v["n"], 10_000);
            assert_eq!(v["mle"]["max_iter"], 20);
        }
    }
}
