use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aoi-mech"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const UNIFORM: &str = r#"{
  "aoi": {"kind": "power", "alpha": 1},
  "sources": [{"kind": "uniform", "c_low": 5, "c_high": 30}],
  "delta_q": 5,
  "verify": {"true_points": 40, "report_points": 80}
}"#;

const TWO: &str = r#"{
  "sources": [
    {"kind": "uniform", "c_low": 0, "c_high": 10, "f_max": 0.2},
    {"kind": "uniform", "c_low": 0, "c_high": 10, "f_max": 0.2}
  ],
  "delta_q": 1,
  "seed": 11,
  "verify": {"true_points": 20, "report_points": 40, "draws": 512, "replicates": 8}
}"#;

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "u.json", UNIFORM);
    write(dir.path(), "two.json", TWO);
    dir
}

/// Table rows below the metadata block and header.
fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn closed_forms_table() {
    let dir = setup();
    let o = run(
        &[
            "closed-forms",
            "--setting",
            "uniform",
            "--alpha",
            "1",
            "--c-high",
            "30",
            "--c-low",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# tool: aoi-mech "));
    // [c̄(1+1/α)]^{α/(1+α)} = √60.
    let jb: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("J_benchmark,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((jb - 60f64.sqrt()).abs() < 1e-10);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = setup();
    let o = run(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn malformed_config_reports_position() {
    let dir = setup();
    write(dir.path(), "bad.json", "{\n  \"seed\": ,\n}");
    let o = run(&["verify", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2 column"), "{err}");
}

#[test]
fn invalid_values_exit_one() {
    let dir = setup();
    write(dir.path(), "neg.json", r#"{"verify": {"tolerance": -1}}"#);
    let o = run(
        &["experiment", "--name", "fig8", "--config", "neg.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["mechanism", "single", "--config", "two.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        &[
            "baseline", "--kind", "complete", "--config", "u.json", "--costs", "31",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn naive_mechanism_fails_certification() {
    let dir = setup();
    let o = run(
        &[
            "verify",
            "--config",
            "u.json",
            "--mechanism",
            "naive",
            "--out",
            "v.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["reports"][0]["ic"], false);
    assert_eq!(v["reports"][0]["best_deviation"].as_f64(), Some(30.0));
    assert!(v["metadata"]["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn optimal_and_quantized_are_certified() {
    let dir = setup();
    for (cfg, mech) in [
        ("u.json", "optimal"),
        ("u.json", "quantized"),
        ("u.json", "benchmark"),
        ("two.json", "optimal"),
    ] {
        let o = run(
            &["verify", "--config", cfg, "--mechanism", mech],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{cfg} {mech}");
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn single_schedule_matches_closed_form() {
    let dir = setup();
    let o = run(
        &["mechanism", "single", "--config", "u.json", "--grid", "11"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let table = rows(&stdout(&o));
    assert_eq!(table.len(), 11);
    for r in &table {
        let (c, f, h, p, x) = (r[0], r[1], r[2], r[3], r[4]);
        let expected = (2.0 * (2.0 * c - 5.0)).powf(-0.5);
        assert!((f - expected).abs() < 1e-10 * expected);
        assert!((x * f - 1.0).abs() < 1e-10);
        assert!((p * f - h).abs() < 1e-9 * h);
    }
    // Rent vanishes at the top: p(c̄) = c̄.
    assert!((table[10][3] - 30.0).abs() < 1e-9);
}

#[test]
fn multi_allocation_json() {
    let dir = setup();
    let o = run(
        &[
            "mechanism",
            "multi",
            "--config",
            "two.json",
            "--costs",
            "1,2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let f: Vec<f64> = v["f"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let pi: Vec<f64> = v["pi"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(f.iter().all(|&r| r <= 0.2 + 1e-12));
    assert!(((pi[0] + pi[1]) - 1.0).abs() < 1e-12);
    let x = v["x"].as_f64().unwrap();
    assert!((x * (f[0] + f[1]) - 1.0).abs() < 1e-10);
}

#[test]
fn quantize_table_covers_support() {
    let dir = setup();
    let o = run(
        &[
            "quantize", "--config", "u.json", "--delta", "1.0", "--out", "q.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("q.csv")).unwrap();
    assert!(text.contains("# quantizer: cells anchored at c_low"));
    let table = rows(&text);
    assert_eq!(table.len(), 25);
    assert_eq!(table[0][1], 5.0);
    assert_eq!(table[24][2], 30.0);
    for w in table.windows(2) {
        assert_eq!(w[0][2], w[1][1]);
        assert!(w[0][4] >= w[1][4], "rates fall across cells");
    }
}

#[test]
fn simulation_is_reproducible() {
    let dir = setup();
    let args = [
        "simulate",
        "--config",
        "two.json",
        "--costs",
        "1,2",
        "--updates",
        "2000",
        "--seed",
        "7",
    ];
    let a = run(&[&args[..], &["--out", "a.csv"]].concat(), dir.path());
    let b = run(&[&args[..], &["--out", "b.csv"]].concat(), dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let ta = std::fs::read(dir.path().join("a.csv")).unwrap();
    let tb = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.contains("# seed: 7\n"));
    assert_eq!(rows(&text).len(), 2000);
}

#[test]
fn experiment_output_is_byte_identical() {
    let dir = setup();
    write(
        dir.path(),
        "e.json",
        r#"{"seed": 3, "evaluation": {"qmc_points": 1024, "replicates": 8, "max_relative_stderr": 0.1}}"#,
    );
    let args = ["experiment", "--name", "fig8", "--config", "e.json"];
    let a = run(&[&args[..], &["--out", "r1.csv"]].concat(), dir.path());
    let b = bin()
        .args([&args[..], &["--out", "r2.csv"]].concat())
        .env("AOI_MECH_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let ra = std::fs::read_to_string(dir.path().join("r1.csv")).unwrap();
    let rb = std::fs::read_to_string(dir.path().join("r2.csv")).unwrap();
    assert_eq!(ra, rb);
    assert!(ra.contains(
        "experiment,seed,param_name,param_value,J_complete,J_optimal,J_quantized,J_benchmark,stderr"
    ));
    assert_eq!(ra.lines().filter(|l| l.starts_with("fig8,")).count(), 4);
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = setup();
    let o = bin()
        .args([
            "closed-forms",
            "--setting",
            "uniform",
            "--alpha",
            "1",
            "--c-high",
            "3",
        ])
        .env("AOI_MECH_THREADS", "0")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
