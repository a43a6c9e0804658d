//! End-to-end tests of the `gcs` binary: artifacts, reproducibility, CSV
//! schemas and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gcs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gcs"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn gcs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn awgn_spec(out_dir: &Path, extra: &str) -> String {
    format!(
        r#"
name = "mini"
seed = 7
output_dir = "{}"

[train]
m = 4
optimizer = "ckf"
max_iterations = 40
[train.ckf]
q = 1e-4
r = 1e-2
[train.convergence]
window = 10

[channel]
kind = "awgn"
snr_db = 10.0

[evaluation]
num_runs = 3
symbols_per_run = 1000
{extra}
"#,
        out_dir.display()
    )
}

/// Parses our CSV format: returns (header, rows).
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .expect("header")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| {
        panic!("column {name} missing from header {header:?}");
    })
}

#[test]
fn export_qam_is_byte_stable_and_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("qam16-a.toml");
    let b = dir.path().join("qam16-b.toml");
    run_ok(gcs().args(["export-qam", "--m", "16", "--out"]).arg(&a));
    run_ok(gcs().args(["export-qam", "--m", "16", "--out"]).arg(&b));
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b, "exports are not byte-stable");

    // The exported file evaluates cleanly.
    let csv = dir.path().join("eval.csv");
    run_ok(
        gcs()
            .args(["evaluate", "--channel", "awgn", "--snr-db", "20", "--runs", "2"])
            .args(["--symbols", "500", "--seed", "3", "--out"])
            .arg(&csv)
            .arg("--constellation")
            .arg(&a),
    );
    assert!(csv.exists());
}

#[test]
fn export_qam_rejects_non_power_of_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qam8.toml");
    let result = gcs()
        .args(["export-qam", "--m", "8", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn train_writes_three_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let spec = write_spec(dir.path(), "mini.toml", &awgn_spec(&out_dir, ""));

    run_ok(gcs().arg("train").arg("--spec").arg(&spec));
    let constellation = out_dir.join("mini-snr10.constellation.toml");
    let loss = out_dir.join("mini-snr10.loss.csv");
    let manifest = out_dir.join("mini-snr10.manifest.toml");
    assert!(constellation.exists() && loss.exists() && manifest.exists());

    // Constellation loads back with unit power: reuse it through evaluate.
    let csv = out_dir.join("eval.csv");
    run_ok(
        gcs()
            .args(["evaluate", "--channel", "awgn", "--snr-db", "10", "--runs", "2"])
            .args(["--symbols", "500", "--out"])
            .arg(&csv)
            .arg("--constellation")
            .arg(&constellation),
    );

    // Re-running the same spec yields a byte-identical constellation.
    let first = std::fs::read(&constellation).unwrap();
    run_ok(gcs().arg("train").arg("--spec").arg(&spec));
    let second = std::fs::read(&constellation).unwrap();
    assert_eq!(first, second, "training is not reproducible");

    // The loss trace has one row per iteration.
    let (header, rows) = parse_csv(&std::fs::read_to_string(&loss).unwrap());
    assert_eq!(header, vec!["iteration", "loss_nats"]);
    assert_eq!(rows.len(), 40);

    let manifest_text = std::fs::read_to_string(&manifest).unwrap();
    assert!(manifest_text.contains("seed = 7"));
    assert!(manifest_text.contains("[train]"));
}

#[test]
fn train_sweep_writes_distinct_operating_points() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let spec = write_spec(
        dir.path(),
        "sweep.toml",
        &awgn_spec(&out_dir, "[sweep]\nsnr_db = [6.0, 10.0, 14.0]\n"),
    );
    run_ok(
        gcs()
            .arg("train")
            .arg("--spec")
            .arg(&spec)
            .args(["--max-iterations", "20"]),
    );
    let mut points = Vec::new();
    for snr in ["snr6", "snr10", "snr14"] {
        let path = out_dir.join(format!("mini-{snr}.constellation.toml"));
        let text = std::fs::read_to_string(&path).unwrap();
        let op_line = text
            .lines()
            .find(|l| l.starts_with("operating_point"))
            .unwrap()
            .to_string();
        points.push(op_line);
    }
    points.dedup();
    assert_eq!(points.len(), 3, "operating points are not distinct");
}

#[test]
fn snr_flag_overrides_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ovr");
    let spec = write_spec(
        dir.path(),
        "ovr.toml",
        &awgn_spec(&out_dir, "[sweep]\nsnr_db = [6.0, 10.0]\n"),
    );
    run_ok(
        gcs()
            .arg("train")
            .arg("--spec")
            .arg(&spec)
            .args(["--snr-db", "12", "--max-iterations", "20"]),
    );
    assert!(out_dir.join("mini-snr12.constellation.toml").exists());
    assert!(!out_dir.join("mini-snr6.constellation.toml").exists());
}

#[test]
fn evaluate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for out in [&csv_a, &csv_b] {
        run_ok(
            gcs()
                .args(["evaluate", "--qam", "4", "--channel", "awgn", "--snr-db", "10"])
                .args(["--runs", "3", "--symbols", "2000", "--seed", "11", "--out"])
                .arg(out),
        );
    }
    assert_eq!(
        std::fs::read(&csv_a).unwrap(),
        std::fs::read(&csv_b).unwrap()
    );
}

#[test]
fn evaluate_qam64_at_25db_matches_quadrature_value() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("qam64.csv");
    run_ok(
        gcs()
            .args(["evaluate", "--qam", "64", "--channel", "awgn", "--snr-db", "25"])
            .args(["--runs", "10", "--symbols", "20000", "--seed", "4", "--out"])
            .arg(&csv),
    );
    let (header, rows) = parse_csv(&std::fs::read_to_string(&csv).unwrap());
    let mi: f64 = rows[0][col(&header, "mi_mean")].parse().unwrap();
    // Independent Gauss-Hermite quadrature of the MI integral gives 5.9992.
    assert!(
        (mi - 5.9992).abs() < 0.05,
        "64-QAM at 25 dB: mi_mean {mi} is off the quadrature value 5.9992"
    );
}

#[test]
fn grid_search_reports_cells_and_selected_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("grid");
    let spec = write_spec(
        dir.path(),
        "grid.toml",
        &awgn_spec(
            &out_dir,
            "[grid]\nq = [1e-3, 1e-4]\nr = [1e-2, 1e-3]\n",
        ),
    );
    run_ok(gcs().arg("grid-search").arg("--spec").arg(&spec));
    let (header, rows) =
        parse_csv(&std::fs::read_to_string(out_dir.join("mini-snr10.grid.csv")).unwrap());
    assert_eq!(rows.len(), 4, "expected one row per grid cell");
    let sel_col = col(&header, "selected");
    let mi_col = col(&header, "selection_mi_bits");
    let selected: Vec<&Vec<String>> = rows.iter().filter(|r| r[sel_col] == "true").collect();
    assert_eq!(selected.len(), 1, "exactly one selected cell");
    let best_mi: f64 = selected[0][mi_col].parse().unwrap();
    for row in &rows {
        if let Ok(mi) = row[mi_col].parse::<f64>() {
            assert!(best_mi >= mi, "selected row is not the best");
        }
    }
    assert!(out_dir.join("mini-snr10.grid-manifest.toml").exists());
}

#[test]
fn compare_emits_all_series_at_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cmp");
    let spec = write_spec(
        dir.path(),
        "cmp.toml",
        &awgn_spec(&out_dir, "[sweep]\nsnr_db = [8.0, 12.0]\n"),
    );
    run_ok(
        gcs()
            .arg("compare")
            .arg("--spec")
            .arg(&spec)
            .args(["--series", "ae-ckf,ae-bp,qam", "--max-iterations", "60"]),
    );
    let (header, rows) =
        parse_csv(&std::fs::read_to_string(out_dir.join("mini.compare.csv")).unwrap());
    let s = col(&header, "series");
    let p = col(&header, "operating_point");
    for series in ["ae-ckf", "ae-bp", "qam"] {
        for point in ["8.0000000000000000e0", "1.2000000000000000e1"] {
            assert!(
                rows.iter().any(|r| r[s] == series && r[p] == point),
                "missing {series} at {point}"
            );
        }
    }
}

#[test]
fn compare_rejects_backprop_on_bps_channel() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "bps.toml",
        &format!(
            r#"
name = "bps"
seed = 1
output_dir = "{}"

[train]
m = 4
optimizer = "ckf"
max_iterations = 20
[train.ckf]
q = 1e-4
r = 1e-2

[channel]
kind = "phase-noise-bps"
snr_db = 15.0
linewidth_hz = 100e3
symbol_rate_baud = 32e9
num_test_phases = 36
window_size = 40
"#,
            dir.path().display()
        ),
    );
    let out = gcs()
        .arg("compare")
        .arg("--spec")
        .arg(&spec)
        .args(["--series", "ae-bp"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("does not support"),
        "unexpected stderr: {stderr}"
    );
}

#[test]
fn invalid_spec_exits_with_config_code_and_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bad.toml", "name = \"x\"\nseed = \"still a string\"\n");
    let out = gcs().arg("train").arg("--spec").arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "diagnostic lacks location: {stderr}");
}

#[test]
fn missing_spec_exits_with_io_code() {
    let out = gcs()
        .arg("train")
        .args(["--spec", "/nonexistent/path/spec.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn output_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from-env");
    let spec_body = awgn_spec(&dir.path().join("ignored"), "");
    let spec = write_spec(dir.path(), "env.toml", &spec_body);
    run_ok(
        gcs()
            .arg("train")
            .arg("--spec")
            .arg(&spec)
            .args(["--max-iterations", "20"])
            .env("GCS_OUTPUT_DIR", &env_dir),
    );
    assert!(env_dir.join("mini-snr10.constellation.toml").exists());
}
