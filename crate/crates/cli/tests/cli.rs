use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hodge-proj"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn pair(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn square_lattice_dump_has_closed_form_correction() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("genus1.json");
    let o = run(&["compute-eta", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dump = read_json(&dir.path().join("square.kernel.json"));
    assert_eq!(dump["kernel"]["stage"], "hodge-corrected");
    let (re, im) = pair(&dump["kernel"]["correction"][0][0]);
    // -pi / Im tau with tau = i
    assert!((re + PI).abs() < 1e-12 && im.abs() < 1e-12);
    for p in dump["diagnostics"]["points"].as_array().unwrap() {
        // eta1(i) = pi, so the connection vanishes.
        let (h, _) = pair(&p["finite_part"]);
        assert!(h.abs() < 1e-7);
    }
    assert!(dump["timestamp"].as_str().unwrap().ends_with('Z'));
    assert!(dir.path().join("square.connection.csv").exists());
}

#[test]
fn genus2_obstruction_norms_vanish() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("genus2.json");
    let o = run(&["compute-eta", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dump = read_json(&dir.path().join("genus2.kernel.json"));
    let points = dump["diagnostics"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 5);
    for p in points {
        assert!(p["obstruction_norm"].as_f64().unwrap() < 1e-6);
        let (b, _) = pair(&p["biresidue"]);
        assert!((b - 1.0).abs() < 1e-8);
    }
    assert_eq!(dump["diagnostics"]["cup_sign"].as_f64(), Some(-1.0));
    assert_eq!(dump["kernel"]["genus"].as_u64(), Some(2));
}

#[test]
fn malformed_config_exits_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "{\"curves\": [");
    let o = run(&["compute-eta", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot parse"));

    let cfg = write_config(dir.path(), r#"{"curves": [{"kind": "elliptic", "tau": [0, -1]}]}"#);
    let o = run(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["verify", "--tol-override", "cup=0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["verify", "--tol-override", "nonsense=1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn default_suite_passes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify", "--threads", "2"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let report = read_json(&dir.path().join("verify.report.json"));
    assert_eq!(report["passed"], true);
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for expected in ["pure type", "uniqueness", "cup identity", "connection cocycle", "holomorphy"] {
        assert!(names.contains(&expected), "{expected} missing");
    }
    assert!(dir.path().join("verify.report.txt").exists());
}

#[test]
fn example_suite_with_genus_three_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("verify.json");
    let o = run(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn perturbed_kernel_fails_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("perturbed.json");
    let o = run(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let report = read_json(&dir.path().join("perturbed.report.json"));
    assert_eq!(report["passed"], false);
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"pure type"));
    assert!(failed.contains(&"uniqueness"));
    // The diagonal behaviour is untouched by a holomorphic perturbation.
    assert!(!failed.contains(&"diagonal contract"));
}

#[test]
fn unreachable_quadrature_tolerance_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify", "--tol-override", "quadrature=1e-16"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
}

fn scan_rows(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect()
}

#[test]
fn moduli_scan_kappa_is_constant() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("scan.json");
    let o = run(&["moduli-scan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.path().join("kappa.scan.csv");
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with(
        "tau_re,tau_im,c_re,c_im,dbar_c_re,dbar_c_im,kappa_re,kappa_im,richardson_residual"
    ));
    let rows = scan_rows(&path);
    assert_eq!(rows.len(), 5);
    for row in &rows {
        assert!(row[6].abs() < 1e-4 * 3.0 * PI);
        assert!((row[7] - 3.0 * PI).abs() < 1e-4 * 3.0 * PI);
    }
}

#[test]
fn moduli_scan_at_square_lattice_has_vanishing_coefficient() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"name": "i", "grid": [[0, 1]]}"#);
    let o = run(&["moduli-scan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = scan_rows(&dir.path().join("i.scan.csv"));
    assert!(rows[0][2].hypot(rows[0][3]) < 1e-7);

    let cfg = write_config(dir.path(), r#"{"grid": []}"#);
    let o = run(&["moduli-scan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn genus2_trace_reports_dbar_or_inconclusive() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("trace.json");
    let o = run(&["genus2-trace", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&dir.path().join("trace.trace.json"));
    assert_eq!(summary["inconclusive"], false);
    assert!(summary["richardson_residual"].as_f64().unwrap() < 0.1);

    let real = write_config(
        dir.path(),
        r#"{"name": "real", "trace": {"roots": [[-2, 0], [-1, 0], [0, 0], [1, 0], [2, 0]],
            "root_index": 2, "point": [0.5, 1.2], "kind": "real"}}"#,
    );
    let o = run(&["genus2-trace", "--config", real.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("real.trace.json"))["inconclusive"], true);

    let o = run(&["genus2-trace"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    // Moving the middle branch point past its neighbour reorders the cuts.
    let far = write_config(
        dir.path(),
        r#"{"trace": {"roots": [[-2, 0], [-1, 0], [0, 0], [1, 0], [2, 0]],
            "root_index": 2, "point": [0.5, 1.2]}, "tolerances": {"step": 0.3}}"#,
    );
    let o = run(&["genus2-trace", "--config", far.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic_up_to_timestamp() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = configs().join("genus2.json");
    for dir in [&a, &b] {
        let o = run(&["compute-eta", "--config", cfg.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let strip = |p: &Path| {
        let mut v = read_json(p);
        v.as_object_mut().unwrap().remove("timestamp");
        v
    };
    assert_eq!(
        strip(&a.path().join("genus2.kernel.json")),
        strip(&b.path().join("genus2.kernel.json"))
    );
    assert_eq!(
        std::fs::read(a.path().join("genus2.connection.csv")).unwrap(),
        std::fs::read(b.path().join("genus2.connection.csv")).unwrap()
    );
}
