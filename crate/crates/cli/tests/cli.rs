//! End-to-end tests of the `repremia` binary: file contents, determinism,
//! and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_repremia"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

/// Data rows of a CSV file: everything after the comment block and header.
fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

/// Strip the configuration-echo comment, which legitimately differs when
/// only run plumbing (e.g. the thread cap) changes.
fn without_config_line(csv: &str) -> String {
    csv.lines()
        .filter(|l| !l.starts_with("# config:"))
        .collect::<Vec<_>>()
        .join("\n")
}

const PARETO_SCN: &str = r#"{
  "schema": 1,
  "loss": {"kind": "pareto", "eta": 2.0, "zeta": 2.0},
  "premium": {"theta0": 1.0, "theta1_bar": 0.5, "theta2": 2.0},
  "insurer": {"kind": "tvar", "alpha": 0.1},
  "reinsurer": {"kind": "tvar", "alpha": 0.05},
  "solver": {"outer_grid": 80}
}
"#;

const EXP_SCN: &str = r#"{
  "schema": 1,
  "loss": {"kind": "exponential", "mu": 2.0},
  "premium": {"theta0": 1.0, "theta1_bar": 0.5, "theta2": 2.0, "delta": 0.8},
  "insurer": {"kind": "tvar", "alpha": 0.2},
  "reinsurer": {"kind": "tvar", "alpha": 0.1},
  "solver": {"outer_grid": 60},
  "verify": {"cases": 10, "mc_n": 50000}
}
"#;

#[test]
fn premium_eval_reproduces_the_golden_file() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/premium_eval_scenario.json");
    let out = run(&[
        "premium-eval",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let got = read(tmp.path(), "premium_eval.csv");
    let want = include_str!("golden/premium_eval.csv");
    assert_eq!(got, want, "premium table must be byte-identical to the golden file");
}

#[test]
fn premium_eval_empty_grid_is_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(
        tmp.path(),
        "s.json",
        &PARETO_SCN.replace(
            "\"solver\": {\"outer_grid\": 80}",
            "\"solver\": {\"outer_grid\": 80}, \"premium_eval\": {\"a\": 1.0, \"y_values\": []}",
        ),
    );
    let out = run(&[
        "premium-eval",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--delta",
        "0.5",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let got = read(tmp.path(), "premium_eval.csv");
    assert!(data_rows(&got).is_empty(), "no data rows expected:\n{got}");
    assert!(got.lines().any(|l| l == "y,premium,branch"), "header kept");
}

#[test]
fn solve_over_a_delta_list_yields_nondecreasing_stop_loss_retentions() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), "s.json", PARETO_SCN);
    let out = run(&[
        "solve",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--delta-grid",
        "0.25:1.0:0.25",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = data_rows(&read(tmp.path(), "solve_summary.csv"));
    assert_eq!(rows.len(), 4);
    let mut prev = 0.0f64;
    for r in &rows {
        assert_eq!(r[7], "stop-loss", "row {r:?}");
        let d1: f64 = r[3].parse().unwrap();
        assert!(
            d1 >= prev - 1e-7,
            "retention fell from {prev} to {d1} as delta rose"
        );
        prev = d1;
    }
    // per-delta reports exist alongside the summary
    for k in 0..4 {
        let doc: serde_json::Value =
            serde_json::from_str(&read(tmp.path(), &format!("solve_{k:03}.json"))).unwrap();
        assert!(doc["value"].as_f64().unwrap() > 0.0);
        assert_eq!(doc["config"]["command"], "solve");
        assert!(read(tmp.path(), &format!("solve_{k:03}_trace.csv"))
            .lines()
            .any(|l| l == "a,d1,d2,value,branch"));
    }
}

#[test]
fn identical_inputs_give_identical_output_files() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), "s.json", EXP_SCN);
    for sub in ["run1", "run2"] {
        let out = run(&[
            "solve",
            "--scenario",
            scn.to_str().unwrap(),
            "--out",
            tmp.path().join(sub).to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    for name in ["solve_000.json", "solve_000_trace.csv", "solve_summary.csv"] {
        assert_eq!(
            read(&tmp.path().join("run1"), name),
            read(&tmp.path().join("run2"), name),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn the_thread_cap_does_not_change_the_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), "s.json", PARETO_SCN);
    for (sub, threads) in [("t1", "1"), ("t4", "4")] {
        let out = run(&[
            "bowley",
            "--scenario",
            scn.to_str().unwrap(),
            "--out",
            tmp.path().join(sub).to_str().unwrap(),
            "--delta-grid",
            "0:1:0.1",
            "--threads",
            threads,
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    assert_eq!(
        without_config_line(&read(&tmp.path().join("t1"), "bowley_rows.csv")),
        without_config_line(&read(&tmp.path().join("t4"), "bowley_rows.csv")),
        "row data must not depend on the worker count"
    );
}

#[test]
fn bowley_summary_lands_near_the_known_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), "s.json", PARETO_SCN);
    let out = run(&[
        "bowley",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--delta-grid",
        "0:1:0.05",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "bowley_summary.json")).unwrap();
    let star = doc["delta_star"].as_f64().unwrap();
    // the fine-grid optimum sits near 0.26; a 0.05 grid must land adjacent
    assert!(
        (star - 0.26).abs() <= 0.05 + 1e-12,
        "delta_star {star} far from the known optimum"
    );
    assert_eq!(doc["optimal_set"]["min"].as_f64().unwrap(), star);
    assert!(doc["warnings"].as_array().unwrap().is_empty());
    assert_eq!(data_rows(&read(tmp.path(), "bowley_rows.csv")).len(), 21);
}

#[test]
fn sweep_emits_rows_without_an_optimum_file() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), "s.json", PARETO_SCN);
    let out = run(&[
        "sweep",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--delta-grid",
        "0:1:0.25",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(data_rows(&read(tmp.path(), "sweep_rows.csv")).len(), 5);
    assert!(
        !tmp.path().join("bowley_summary.json").exists(),
        "sweep must not select an optimum"
    );
}

#[test]
fn beta_curve_ends_at_zero_for_a_risk_neutral_leader() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(
        tmp.path(),
        "s.json",
        &EXP_SCN.replace(
            "\"verify\": {\"cases\": 10, \"mc_n\": 50000}",
            "\"betas\": {\"beta_values\": [0.5, 1.0]}",
        ),
    );
    let out = run(&[
        "beta-curve",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--delta-grid",
        "0:1:0.2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = data_rows(&read(tmp.path(), "beta_curve.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "1.00000000000");
    assert_eq!(
        rows[1][1], "0",
        "a risk-neutral leader gains nothing from premium variability"
    );
}

#[test]
fn verify_passes_and_writes_the_junit_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = write_scenario(tmp.path(), "s.json", EXP_SCN);
    let out = run(&[
        "verify",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let junit = read(tmp.path(), "verify_junit.xml");
    assert!(junit.contains(r#"failures="0""#), "{junit}");
    let rows = data_rows(&read(tmp.path(), "verify_cases.csv"));
    // 1 brute + 10 chain + 10 pricing + 10 premium + 1 mc
    assert_eq!(rows.len(), 32);
    assert!(rows.iter().all(|r| r[4] == "true"), "all cases must pass");
}

#[test]
fn config_mistakes_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap().to_owned();

    // unreadable scenario
    let out = run(&["solve", "--scenario", "no_such.json", "--out", &out_dir]);
    assert_eq!(code(&out), 2);

    // unknown key, named in the diagnostic
    let scn = write_scenario(
        tmp.path(),
        "bad_key.json",
        &EXP_SCN.replace("\"theta0\"", "\"theta_zero\""),
    );
    let out = run(&["solve", "--scenario", scn.to_str().unwrap(), "--out", &out_dir]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("theta_zero"),
        "diagnostic must name the key: {}",
        stderr(&out)
    );

    // unsupported schema revision
    let scn = write_scenario(
        tmp.path(),
        "bad_schema.json",
        &EXP_SCN.replace("\"schema\": 1", "\"schema\": 7"),
    );
    let out = run(&["solve", "--scenario", scn.to_str().unwrap(), "--out", &out_dir]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("schema"));

    // premium-eval without its block
    let scn = write_scenario(tmp.path(), "no_block.json", EXP_SCN);
    let out = run(&[
        "premium-eval",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        &out_dir,
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("premium_eval"));

    // leader commands need the loading floor, not a fixed loading
    let scn = write_scenario(
        tmp.path(),
        "fixed_theta1.json",
        &PARETO_SCN.replace("\"theta1_bar\": 0.5", "\"theta1\": 0.5"),
    );
    let out = run(&["bowley", "--scenario", scn.to_str().unwrap(), "--out", &out_dir]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("theta1_bar"));

    // conflicting delta flags are a usage error (clap also exits 2)
    let scn = write_scenario(tmp.path(), "ok.json", EXP_SCN);
    let out = run(&[
        "solve",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        &out_dir,
        "--delta",
        "0.5",
        "--delta-grid",
        "0:1:0.5",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn json_format_emits_parseable_documents() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/premium_eval_scenario.json");
    let out = run(&[
        "premium-eval",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "premium_eval.json")).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["branch"], "floor");
    assert_eq!(rows[0]["premium"].as_f64().unwrap(), 1.5);
    assert_eq!(doc["config"]["format"], "json");
}

#[test]
fn the_output_directory_can_come_from_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let scn_text = EXP_SCN.replace(
        "\"verify\": {\"cases\": 10, \"mc_n\": 50000}",
        "\"output\": {\"dir\": \"from_scenario\"}",
    );
    let scn = write_scenario(tmp.path(), "s.json", &scn_text);
    let out = bin()
        .current_dir(tmp.path())
        .args(["solve", "--scenario", scn.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(tmp.path().join("from_scenario/solve_summary.csv").exists());
}
