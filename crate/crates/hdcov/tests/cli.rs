//! End-to-end tests of the `hdcov` binary: exit codes, determinism, and
//! the documented output schemas.

use std::path::Path;
use std::process::{Command, Output};

fn hdcov(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdcov"))
        .args(args)
        .current_dir(dir)
        .env_remove("HDCOV_THREADS")
        .output()
        .expect("failed to spawn hdcov")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn calibrate_round_trip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "calibrate",
        "--test",
        "nagao",
        "--n",
        "51",
        "--p",
        "10",
        "--reps",
        "20000",
        "--seed",
        "7",
        "--out",
        "calib.json",
    ];
    let out = hdcov(&args, dir.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read(dir.path().join("calib.json")).unwrap();

    // Exact mean is (p/4)(1 - 2/N) = 2.4 at N = 50.
    let parsed: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let m = parsed["m"].as_f64().unwrap();
    let sigma = parsed["sigma"].as_f64().unwrap();
    assert!(
        (m - 2.4).abs() <= 4.0 * sigma / (20_000f64).sqrt(),
        "m = {m}"
    );
    assert_eq!(parsed["method"], "monte_carlo");

    // Rerun with the same flags: byte-identical output.
    let out = hdcov(&args, dir.path());
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(dir.path().join("calib.json")).unwrap());

    // Thread count must not change the bytes.
    let mut threaded = args.to_vec();
    threaded.extend_from_slice(&["--threads", "8"]);
    let out = hdcov(&threaded, dir.path());
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(dir.path().join("calib.json")).unwrap());
}

#[test]
fn calibrate_degenerate_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdcov(
        &[
            "calibrate",
            "--test",
            "lrt",
            "--n",
            "10",
            "--p",
            "20",
            "--reps",
            "200",
            "--seed",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrate_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdcov(
        &[
            "calibrate",
            "--test",
            "nagao",
            "--n",
            "21",
            "--p",
            "4",
            "--reps",
            "200",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));

    // "--seed auto" draws and prints one.
    let out = hdcov(
        &[
            "calibrate",
            "--test",
            "nagao",
            "--n",
            "21",
            "--p",
            "4",
            "--reps",
            "200",
            "--seed",
            "auto",
            "--out",
            "c.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stdout_str(&out).contains("seed:"));
}

#[test]
fn test_command_decides_and_rejects_bad_shapes() {
    let dir = tempfile::tempdir().unwrap();
    // Deterministic null data (n = 31 rows, p = 4), unknown-mean mode.
    let x = hdcov::sample::gaussian_sample(&hdcov::Matrix::identity(4, 4), None, 31, 99).unwrap();
    let mut csv = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format!("{}", x[(i, j)])).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(dir.path().join("data.csv"), &csv).unwrap();

    let out = hdcov(
        &[
            "calibrate",
            "--test",
            "john",
            "--n",
            "31",
            "--p",
            "4",
            "--reps",
            "5000",
            "--seed",
            "3",
            "--out",
            "calib.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());

    let run = |extra: &[&str]| {
        let mut args = vec![
            "test",
            "--test",
            "john",
            "--data",
            "data.csv",
            "--calib",
            "calib.json",
        ];
        args.extend_from_slice(extra);
        hdcov(&args, dir.path())
    };
    let out = run(&[]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(parsed["zscore"].is_number());
    assert!(parsed["reject"].is_boolean());
    // Identical invocation, identical bytes.
    assert_eq!(stdout_str(&out), stdout_str(&run(&[])));

    // Known-mean mode changes n to rows + 1 and mismatches the calibration.
    let out = run(&["--known-mean"]);
    assert_eq!(out.status.code(), Some(2));

    // Constant rows: unknown-mean covariance is zero, degenerate for LRT.
    std::fs::write(dir.path().join("const.csv"), "1,1\n1,1\n1,1\n").unwrap();
    let out = hdcov(
        &[
            "test",
            "--test",
            "lrt",
            "--data",
            "const.csv",
            "--calib",
            "asymptotic",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn power_identity_equals_alpha_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdcov(
        &[
            "power",
            "--test",
            "lrt",
            "--n",
            "201",
            "--p",
            "50",
            "--alpha",
            "0.05",
            "--sigma",
            r#"{"kind":"identity","p":50}"#,
            "--diagnose",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!((parsed["power"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    let diag = &parsed["diagnose"];
    assert_eq!(diag["err_bar"].as_f64().unwrap(), 0.0);
    assert_eq!(diag["v_method"], "closed_form");

    // Spiked spec agrees with the spiked closed form exactly.
    let out = hdcov(
        &[
            "power",
            "--test",
            "nagao",
            "--n",
            "101",
            "--p",
            "20",
            "--sigma",
            r#"{"kind":"spiked","p":20,"a":[2.0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]}"#,
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let mut a = vec![0.0; 20];
    a[0] = 2.0;
    let expect =
        hdcov_core::power::spiked_power(hdcov::TestKind::Nagao, &a, 101, 20, 0.05).unwrap();
    assert!((parsed["power"].as_f64().unwrap() - expect).abs() < 1e-12);

    // Invalid spec: exit 2.
    let out = hdcov(
        &[
            "power",
            "--test",
            "nagao",
            "--n",
            "101",
            "--p",
            "20",
            "--sigma",
            r#"{"kind":"banded","p":20}"#,
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_monotone_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdcov(
        &[
            "sweep",
            "--test",
            "all",
            "--n",
            "201",
            "--p",
            "50",
            "--a1-grid",
            "0,0.5,1,2",
            "--out",
            "sweep.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("# schema: hdcov.sweep/v1\n"));

    let mut by_kind: std::collections::HashMap<String, Vec<(f64, f64)>> = Default::default();
    for line in text.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        let a1: f64 = cols[4].trim_start_matches("a1=").parse().unwrap();
        let power: f64 = cols[6].parse().unwrap();
        by_kind
            .entry(cols[0].to_string())
            .or_default()
            .push((a1, power));
    }
    assert_eq!(by_kind.len(), 4);
    // Monotone spike grid gives strictly increasing identity-LRT power.
    let lrt = &by_kind["lrt"];
    assert!(lrt.windows(2).all(|w| w[1].1 > w[0].1), "{lrt:?}");
    // At a = 0 every test's power equals alpha.
    for rows in by_kind.values() {
        assert!((rows[0].1 - 0.05).abs() < 1e-9);
    }
    // Rowwise ordering between the two LRTs.
    for (row_lrt, row_lrts) in by_kind["lrt"].iter().zip(&by_kind["lrt-s"]) {
        assert!(row_lrt.1 >= row_lrts.1 - 1e-12);
    }

    // Malformed grid: exit 2.
    let out = hdcov(
        &["sweep", "--n", "201", "--p", "50", "--a1-grid", "0,zebra"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_null_row_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--test",
        "john",
        "--n",
        "41",
        "--p",
        "8",
        "--sigma",
        r#"{"kind":"identity","p":8}"#,
        "--reps",
        "2000",
        "--seed",
        "11",
        "--out",
        "sim.csv",
    ];
    let out = hdcov(&args, dir.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    let data_line = first.lines().nth(2).unwrap();
    let cols: Vec<&str> = data_line.split(',').collect();
    let se: f64 = cols[7].parse().unwrap();
    let discrepancy: f64 = cols[8].parse().unwrap();
    assert!(
        discrepancy.abs() <= 3.0 * se + 1e-9,
        "discrepancy {discrepancy}, se {se}"
    );

    let out = hdcov(&args, dir.path());
    assert!(out.status.success());
    assert_eq!(
        first,
        std::fs::read_to_string(dir.path().join("sim.csv")).unwrap()
    );

    // A separated identity-LRT alternative at (N,p)=(200,50): the analytic
    // and empirical columns agree to 0.05.
    let mut spikes = vec!["0".to_string(); 50];
    spikes[0] = "1.0".into();
    let spec = format!(r#"{{"kind":"spiked","p":50,"a":[{}]}}"#, spikes.join(","));
    let out = hdcov(
        &[
            "simulate", "--test", "lrt", "--n", "201", "--p", "50", "--sigma", &spec, "--reps",
            "2000", "--seed", "21", "--out", "sim2.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("sim2.csv")).unwrap();
    let cols: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let discrepancy: f64 = cols[8].parse().unwrap();
    assert!(discrepancy.abs() <= 0.05, "discrepancy {discrepancy}");
}

#[test]
fn verify_subset_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdcov(
        &["verify", "--only", "u_matrix", "--out", "report.json"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = stdout_str(&out);
    assert!(stdout.contains("PASS u_matrix_semigroup"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["failed"], 0);
    assert!(report["checks"].as_array().unwrap().len() >= 3);

    // Unknown section: exit 2.
    let out = hdcov(&["verify", "--only", "no_such_section"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
