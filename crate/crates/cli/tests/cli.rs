use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fipsed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fipsed"))
        .current_dir(dir)
        .env_remove("FIPSED_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn csv_rows_no_header(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn sensitivity_table_reproduces_reference_values() {
    let tmp = TempDir::new().unwrap();
    let out = fipsed(tmp.path(), &["sensitivity-table", "-o", "st"]);
    assert!(out.status.success());
    let rows = csv_rows(&tmp.path().join("st/sensitivity.csv"));
    let expected = [
        (109.0, 118.7),
        (19.3, 131.6),
        (1.2, 138.8),
        (0.1, 139.9),
        (0.0, 140.0),
        (0.0, 140.0),
    ];
    assert_eq!(rows.len(), expected.len());
    for (r, (a, b)) in rows.iter().zip(expected) {
        assert_eq!(format!("{:.1}", r[1]), format!("{a:.1}"));
        assert_eq!(format!("{:.1}", r[2]), format!("{b:.1}"));
    }
    assert!((3.0e3..3.5e3).contains(&rows[3][4]));
}

#[test]
fn nonpositive_smoothing_factor_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = fipsed(tmp.path(), &["sensitivity-table", "--sm", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive"));
}

#[test]
fn edge_bench_meets_reference_errors() {
    let tmp = TempDir::new().unwrap();
    assert!(fipsed(tmp.path(), &["edge-bench", "-o", "eb"]).status.success());
    let rows = json(&tmp.path().join("eb/edge_bench.json"));
    let reference = [4.8080e-3, 7.8200e-3, 4.1642e-3, 9.2959e-3];
    for (row, limit) in rows.as_array().unwrap().iter().zip(reference) {
        assert!(row["mae"].as_f64().unwrap() <= 1.5 * limit, "{row}");
    }
    let f = csv_rows(&tmp.path().join("eb/edge_f.csv"));
    assert_eq!(f[0].len(), 4);
}

/// A finer fine grid tracks the interpolant crossing more closely, which
/// need not be closer to the true jump; the localization bound still holds.
#[test]
fn finer_detection_grid_stays_within_the_localization_bound() {
    let tmp = TempDir::new().unwrap();
    assert!(fipsed(tmp.path(), &["edge-bench", "--m", "400", "-o", "eb"])
        .status
        .success());
    let bound = 2.0 * TAU / 400.0 + TAU / 100.0;
    for row in json(&tmp.path().join("eb/edge_bench.json")).as_array().unwrap() {
        assert!(row["mae"].as_f64().unwrap() <= bound, "{row}");
    }
}

#[test]
fn constant_signal_gives_an_empty_report() {
    let tmp = TempDir::new().unwrap();
    let out = fipsed(tmp.path(), &["edge-bench", "--function", "constant", "-o", "eb"]);
    assert!(out.status.success());
    let rows = json(&tmp.path().join("eb/edge_bench.json"));
    assert!(rows[0]["ad_points"].as_array().unwrap().is_empty());
}

#[test]
fn missing_params_file_is_reported() {
    let tmp = TempDir::new().unwrap();
    let out = fipsed(tmp.path(), &["solve-uav", "--params", "absent.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.toml"), "n_in = 30\n").unwrap();
    let out = fipsed(tmp.path(), &["--config", "run.toml", "sensitivity-table"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fipsed"))
        .current_dir(tmp.path())
        .env("FIPSED_OUTPUT_DIR", "from-env")
        .arg("sensitivity-table")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from-env/sensitivity.csv").exists());
}

#[test]
fn coarse_single_mesh_flags_unresolved_boundary_switches() {
    let tmp = TempDir::new().unwrap();
    let args = ["solve-uav", "--n-in", "30", "--max-meshes", "1", "-o"];
    let a = fipsed(tmp.path(), &[&args[..], &["a"]].concat());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let report = json(&tmp.path().join("a/report.json"));
    assert_eq!(report["status"], "converged");
    assert_eq!(report["boundary"]["unresolved"], true);
    assert_eq!(report["history"].as_array().unwrap().len(), 1);

    let traj = fs::read_to_string(tmp.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(
        traj.lines().next().unwrap(),
        "t,x,z,gamma,V,alpha,T_predicted,T_corrected"
    );
    assert_eq!(traj.lines().count(), 31);
    assert!(tmp.path().join("a/thrust_corrected.csv").exists());
    assert!(fs::read_to_string(tmp.path().join("a/trajectory.gp"))
        .unwrap()
        .contains("multiplot"));

    // same config and seed, same bytes
    assert!(fipsed(tmp.path(), &[&args[..], &["b"]].concat()).status.success());
    for f in ["report.json", "trajectory.csv", "thrust_corrected.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn iteration_cap_exits_unconverged_and_keeps_artifacts() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "[solver]\nMaxIter = 2\n[mesh]\nn_in = 30\nmax_meshes = 1\n",
    )
    .unwrap();
    let out = fipsed(tmp.path(), &["--config", "run.toml", "solve-uav", "-o", "u"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&tmp.path().join("u/report.json"))["status"], "unconverged");
}

#[test]
fn csv_values_round_trip() {
    let tmp = TempDir::new().unwrap();
    assert!(fipsed(
        tmp.path(),
        &["solve-uav", "--n-in", "30", "--max-meshes", "1", "-o", "r"]
    )
    .status
    .success());
    let report = json(&tmp.path().join("r/report.json"));
    let rows = csv_rows(&tmp.path().join("r/trajectory.csv"));
    // V at the first node equals the reported initial speed bit for bit
    assert_eq!(rows[0][4], report["v0"].as_f64().unwrap());
}

#[test]
fn detect_edges_reads_sampled_data() {
    let tmp = TempDir::new().unwrap();
    let n = 100;
    let mut text = String::from("t,value\n");
    for j in 0..n {
        let t = TAU * j as f64 / n as f64;
        let v = if (0.45..1.97).contains(&t) { 3.0 } else { -1.0 };
        text.push_str(&format!("{t:.17e},{v}\n"));
    }
    fs::write(tmp.path().join("g.csv"), text).unwrap();
    let out = fipsed(
        tmp.path(),
        &[
            "detect-edges",
            "g.csv",
            "--m",
            "200",
            "--period",
            &TAU.to_string(),
            "-o",
            "d",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("d/edges.json"));
    let pts: Vec<f64> = report["ad_points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(pts.len(), 2);
    assert!((pts[0] - 0.45).abs() < 1e-2 && (pts[1] - 1.97).abs() < 1e-2);
    assert!(report["L2"].as_u64().unwrap() >= report["L1"].as_u64().unwrap());
    assert!(report["levels"]["upper"].is_number() && report["level_source"].is_string());
    assert_eq!(csv_rows(&tmp.path().join("d/corrected.csv")).len(), n);
}

#[test]
fn uneven_sample_times_are_rejected() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.csv"), "0,1\n0.5,1\n0.7,0\n2,0\n").unwrap();
    let out = fipsed(tmp.path(), &["detect-edges", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convergence_study_writes_fits() {
    let tmp = TempDir::new().unwrap();
    let out = fipsed(tmp.path(), &["fim-convergence", "--dump-fim", "8", "-o", "c"]);
    assert!(out.status.success());
    let report = json(&tmp.path().join("c/convergence.json"));
    for a in report["algebraic"].as_array().unwrap() {
        let (fit, want) = (
            a["interpolation_order"].as_f64().unwrap(),
            a["predicted_order"].as_f64().unwrap(),
        );
        assert!((fit - want).abs() <= 0.3);
    }
    let fim = csv_rows_no_header(&tmp.path().join("c/fim_8.csv"));
    assert_eq!(fim.len(), 8);
    assert!(fim[0].iter().all(|v| *v == 0.0));
}
