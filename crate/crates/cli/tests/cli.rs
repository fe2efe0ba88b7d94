use std::path::Path;
use std::process::Command;

use pnflow::check::{exit_code, run_checks};
use pnflow::experiment::ReportJson;
use pnflow::flow::CSV_HEADER;
use pnflow_core::flow_systems::rhs_submersion;
use pnflow_core::gw_space::{ricci_phase, PhasePoint};

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["pnflow"];
    all.extend_from_slice(args);
    pnflow::run(all)
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn flow_csv(dir: &Path, args: &[&str]) -> (i32, Vec<Vec<f64>>) {
    let out = dir.join("flow.csv");
    let mut all = vec!["flow", "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let code = run(&all);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, CSV_HEADER);
    (code, rows)
}

const T: usize = 0;
const PHI: usize = 4;
const PSI: usize = 5;
const R1: usize = 6;
const V: usize = 10;

#[test]
fn einstein_point_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rows) = flow_csv(
        dir.path(),
        &[
            "--n", "2", "--system", "phase", "--phi", "2", "--psi", "0", "--t-max", "1",
        ],
    );
    assert_eq!(code, 0);
    assert!(rows.len() > 1);
    assert_eq!(rows.last().unwrap()[T], 1.0);
    for row in rows {
        for r in &row[R1..R1 + 3] {
            assert!((r - 0.4375).abs() < 1e-9);
        }
        assert_eq!(row[PSI], 0.0);
        assert_eq!(row[11], 0.0);
    }
}

#[test]
fn reparametrized_phi_column_is_t_plus_n() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rows) = flow_csv(
        dir.path(),
        &[
            "--n", "2", "--system", "reparam", "--phi", "10", "--psi", "-0.001",
        ],
    );
    assert_eq!(code, 0);
    for row in rows {
        assert!((row[PHI] - (row[T] + 10.0)).abs() < 1e-9);
        assert!(row[PSI] < 0.0);
    }
}

#[test]
fn submersion_start_keeps_psi_zero() {
    let dir = tempfile::tempdir().unwrap();
    for t_max in ["0.01", "1", "100"] {
        let (code, rows) = flow_csv(
            dir.path(),
            &[
                "--n", "3", "--system", "phase", "--phi", "3", "--psi", "0.0", "--t-max", t_max,
            ],
        );
        // a blow-up before t_max is reported as an integrator failure
        assert!(code == 0 || code == 2);
        assert!(rows.iter().all(|r| r[PSI].abs() < 1e-10));
    }
}

#[test]
fn full_system_volume_column_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rows) = flow_csv(
        dir.path(),
        &[
            "--n", "3", "--system", "full", "--x1", "1", "--x2", "1", "--x3", "2", "--t-max", "20",
        ],
    );
    assert_eq!(code, 0);
    let v0 = rows[0][V];
    assert!(rows.iter().all(|r| ((r[V] - v0) / v0).abs() < 1e-8));
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let code = run(&[
        "flow",
        "--system",
        "reduced",
        "--x1",
        "1.1",
        "--x2",
        "0.9",
        "--t-max",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 12);
        for f in &fields[..11] {
            let mantissa = f.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 17, "{f}");
        }
        fields[11].parse::<u32>().unwrap();
    }
}

#[test]
fn flow_usage_errors_exit_1() {
    assert_eq!(run(&["flow", "--n", "1", "--phi", "3"]), 1);
    assert_eq!(run(&["flow", "--phi", "1", "--psi", "2"]), 1);
    assert_eq!(run(&["flow", "--phi", "3", "--x1", "1"]), 1);
    assert_eq!(run(&["flow", "--system", "phase"]), 1);
    assert_eq!(run(&["flow", "--phi", "3", "--unnormalized"]), 1);
    assert_eq!(run(&["flow", "--phi", "3", "--rel-tol", "0"]), 1);
    assert_eq!(
        run(&[
            "flow",
            "--system",
            "submersion",
            "--phi",
            "3",
            "--psi",
            "0.1"
        ]),
        1
    );
    assert_eq!(run(&["flow", "--bogus"]), 1);
    assert_eq!(run(&[]), 1);
}

#[test]
fn flow_integrator_failure_exits_2() {
    // the generic full flow degenerates in finite time
    let dir = tempfile::tempdir().unwrap();
    let (code, rows) = flow_csv(
        dir.path(),
        &[
            "--system", "full", "--x1", "1.2", "--x2", "0.8", "--x3", "1", "--t-max", "1000",
        ],
    );
    assert_eq!(code, 2);
    assert!(!rows.is_empty());
}

fn experiment(dir: &Path, args: &[&str]) -> (i32, Option<String>) {
    let out = dir.join("report.json");
    let _ = std::fs::remove_file(&out);
    let mut all = vec!["experiment", "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let code = run(&all);
    (code, std::fs::read_to_string(&out).ok())
}

#[test]
fn experiment_report_schema_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = experiment(dir.path(), &["--n", "2", "--N", "10"]);
    let text = text.unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "n",
        "N",
        "epsilon",
        "t_r1_negative",
        "t_r2_negative",
        "final_negative_count",
        "expected_negative_count",
        "slope_estimate",
        "slope_target",
        "decay_bound_holds",
        "divergence",
        "monotonicity",
        "termination",
    ] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert_eq!(value["n"], 2);
    assert_eq!(value["N"], 10.0);
    assert_eq!(value["expected_negative_count"], 8);

    let report: ReportJson = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap();
    assert_eq!(
        serde_json::from_str::<serde_json::Value>(&again).unwrap(),
        value
    );
    assert_eq!(serde_json::from_str::<ReportJson>(&again).unwrap(), report);
    assert_eq!(again.trim_end(), text.trim_end());

    let expected = if report.final_negative_count == report.expected_negative_count {
        0
    } else {
        4
    };
    assert_eq!(code, expected);
}

#[test]
fn experiment_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // the Einstein radius is not in the large-N regime; no report is written
    let (code, text) = experiment(dir.path(), &["--n", "2", "--N", "2"]);
    assert_eq!(code, 3);
    assert!(text.is_none());

    assert_eq!(experiment(dir.path(), &["--n", "1"]).0, 1);
    assert_eq!(experiment(dir.path(), &["--epsilon", "-1"]).0, 1);
    assert_eq!(experiment(dir.path(), &["--rel-tol", "-1"]).0, 1);

    // config file supplies n, the flag shortens the run
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": {"n": 3}}"#).unwrap();
    let (code, text) = experiment(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "--t-max", "10"],
    );
    let report: ReportJson = serde_json::from_str(&text.unwrap()).unwrap();
    assert_eq!(report.n, 3);
    assert_eq!(report.termination, "ReachedTmax");
    assert_eq!(report.t_final, 10.0);
    assert_eq!(code, 4);
}

#[test]
fn experiment_exit_follows_the_count() {
    let dir = tempfile::tempdir().unwrap();
    for n in ["2", "3"] {
        let (code, text) = experiment(dir.path(), &["--n", n]);
        let report: ReportJson = serde_json::from_str(&text.unwrap()).unwrap();
        let matches = report.final_negative_count == report.expected_negative_count;
        assert_eq!(code, if matches { 0 } else { 4 });
    }
}

fn portrait(dir: &Path, name: &str, args: &[&str]) -> (i32, String) {
    let out = dir.join(name);
    let mut all = vec!["portrait", "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let code = run(&all);
    (code, std::fs::read_to_string(&out).unwrap_or_default())
}

fn attr(element: &str, name: &str) -> f64 {
    let key = format!(" {name}=\"");
    let start = element.find(&key).unwrap() + key.len();
    let end = start + element[start..].find('"').unwrap();
    element[start..end].parse().unwrap()
}

#[test]
fn portrait_axis_arrows_are_horizontal_and_einstein_point_is_marked() {
    let dir = tempfile::tempdir().unwrap();
    let (code, svg) = portrait(
        dir.path(),
        "p.svg",
        &["--n", "2", "--phi-range", "1:8", "--psi-range", "-2:2"],
    );
    assert_eq!(code, 0);
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains(r#"version="1.1""#));
    assert!(svg.trim_end().ends_with("</svg>"));

    let axis = svg.lines().find(|l| l.contains(r#"class="axis""#)).unwrap();
    let axis_y = attr(axis, "y1");
    let mut on_axis = 0;
    for line in svg.lines().filter(|l| l.contains(r#"class="arrow""#)) {
        if attr(line, "y1") == axis_y {
            on_axis += 1;
            assert_eq!(attr(line, "y2"), axis_y, "{line}");
            let phi = 1.0 + (attr(line, "x1") - 50.0) * 7.0 / 700.0;
            let forward = rhs_submersion(2, phi).unwrap() > 0.0;
            assert_eq!(attr(line, "x2") > attr(line, "x1"), forward, "{line}");
        }
    }
    assert!(on_axis > 0);

    // phi = 2 sits at x = 50 + (2 - 1) * 700 / 7 = 150
    let zero = svg.lines().find(|l| l.contains(r#"class="zero""#)).unwrap();
    assert_eq!((attr(zero, "cx"), attr(zero, "cy")), (150.0, axis_y));
    assert!(svg
        .lines()
        .filter(|l| l.contains(r#"class="fixed""#))
        .any(|l| attr(l, "cx") == 150.0));
}

#[test]
fn portrait_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--n",
        "3",
        "--trajectory",
        "4,-0.5",
        "--trajectory",
        "3,0.2",
        "--t-max",
        "0.3",
    ];
    let (a_code, a) = portrait(dir.path(), "a.svg", &args);
    let (b_code, b) = portrait(dir.path(), "b.svg", &args);
    assert_eq!((a_code, b_code), (0, 0));
    assert_eq!(a, b);
    assert!(a.contains(r#"class="trajectory""#));
}

#[test]
fn portrait_rejects_bad_boxes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(portrait(dir.path(), "x.svg", &["--phi-range", "5:1"]).0, 1);
    assert_eq!(
        portrait(
            dir.path(),
            "x.svg",
            &["--phi-range", "1:2", "--psi-range", "3:4"]
        )
        .0,
        1
    );
    assert_eq!(
        portrait(dir.path(), "x.svg", &["--phi-range", "-3:-1"]).0,
        1
    );
    assert_eq!(portrait(dir.path(), "x.svg", &["--phi-range", "1-2"]).0, 1);
    assert_eq!(portrait(dir.path(), "x.svg", &["--trajectory", "1,2"]).0, 1);
}

#[test]
fn check_exit_codes() {
    assert_eq!(run(&["check", "--n-max", "6"]), 0);
    assert_eq!(run(&["check", "--n-max", "1"]), 1);
}

/// Flipping the sign of the `phi psi` term in `r2` breaks the spectrum check
/// and only that check.
#[test]
fn mutated_r2_fails_spectrum_agreement() {
    let mutated = |p: &PhasePoint| {
        let mut s = ricci_phase(p)?;
        let (n, phi, psi) = (p.n() as i32, p.phi(), p.psi());
        let q = phi * phi - psi * psi;
        let term = phi * psi * q.powi(n - 2) / (4f64.powi(n - 1) * (n as f64 + 2.0));
        s.r[1] += 2.0 * term;
        Ok(s)
    };
    let rows = run_checks(6, &mutated);
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name)
        .collect();
    assert_eq!(failed, ["spectrum-agreement"]);
    assert_eq!(exit_code(&rows), 4);
    assert_eq!(exit_code(&run_checks(3, &ricci_phase)), 0);
}

#[test]
fn config_file_defaults_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"flow": {"n": 3, "system": "reparam", "phi": 5.0, "psi": -0.01, "t_max": 2.0}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let (code, rows) = flow_csv(dir.path(), &["--config", cfg]);
    assert_eq!(code, 0);
    assert_eq!(rows.last().unwrap()[T], 2.0);
    assert_eq!(rows[0][PHI], 5.0);
    let (code, rows) = flow_csv(
        dir.path(),
        &["--config", cfg, "--t-max", "0.5", "--phi", "6"],
    );
    assert_eq!(code, 0);
    assert_eq!(rows.last().unwrap()[T], 0.5);
    assert_eq!(rows[0][PHI], 6.0);
    // n = 3 puts x3 = (x1 x2)^-2 on the unit-volume slice
    let r = &rows[0];
    assert!((r[3] - 1.0 / (r[1] * r[2]).powi(2)).abs() < 1e-12 * r[3]);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"flow": {"nn": 3}}"#).unwrap();
    assert_eq!(
        run(&["--config", bad.to_str().unwrap(), "flow", "--phi", "3"]),
        1
    );
    assert_eq!(
        run(&["--config", "/nonexistent/cfg.json", "flow", "--phi", "3"]),
        1
    );
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_pnflow");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["check", "--n-max", "1"]), Some(1));
    assert_eq!(status(&["experiment", "--N", "2"]), Some(3));
    assert_eq!(status(&["--help"]), Some(0));
    assert_eq!(status(&["flow", "--phi", "2", "--t-max", "0.5"]), Some(0));
}
