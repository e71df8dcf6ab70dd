use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpresp"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn qpresp(cfg: &Path, out: &Path, args: &[&str]) -> (i32, String) {
    let o = bin().arg("--config").arg(cfg).arg("--out").arg(out).args(args).output().unwrap();
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn run_elliptic_converges_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = qpresp(&config("elliptic.json"), dir.path(), &["run"]);
    assert_eq!(code, 0, "{err}");
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["converged"], true);
    assert_eq!(report["residual"]["passed"], true);
    assert!(report["residual"]["value"].as_f64().unwrap() <= 1e-8);
    assert!(report["oracle"]["coefficient_distance"].as_f64().unwrap() <= 1e-10);
    assert_eq!(report["shadowing"]["passed"], true);

    let m_final = report["m_final"].as_u64().unwrap() as usize;
    let mut rdr = csv::Reader::from_path(dir.path().join("iterations.csv")).unwrap();
    assert_eq!(rdr.records().count(), m_final + 1);

    let (code, err) = qpresp(&config("elliptic.json"), dir.path(), &["verify", "--response", dir.path().join("report.json").to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read_json(&dir.path().join("verify.json"))["residual"]["passed"], true);
}

#[test]
fn tampered_response_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qpresp(&config("elliptic.json"), dir.path(), &["run"]).0, 0);
    let mut report = read_json(&dir.path().join("report.json"));
    let coeffs = report["response"]["coeffs"].as_array_mut().unwrap();
    let c = coeffs.iter_mut().find(|c| c["k"] == serde_json::json!([1, 0])).unwrap();
    let im = c["im"][0].as_f64().unwrap();
    c["im"][0] = Value::from(im * 1.01);
    let tampered = write_config(dir.path(), "tampered.json", &report);
    let (code, _) = qpresp(&config("elliptic.json"), dir.path(), &["verify", "--response", tampered.to_str().unwrap()]);
    assert_eq!(code, qpresp_cli::EXIT_VERIFICATION);
    assert_eq!(read_json(&dir.path().join("verify.json"))["residual"]["passed"], false);
}

#[test]
fn run_is_deterministic_up_to_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(qpresp(&config("nonlinear.json"), a.path(), &["run"]).0, 0);
    assert_eq!(qpresp(&config("nonlinear.json"), b.path(), &["--threads", "2", "run"]).0, 0);
    assert_eq!(without_timing(read_json(&a.path().join("report.json"))), without_timing(read_json(&b.path().join("report.json"))));
    assert_eq!(std::fs::read(a.path().join("iterations.csv")).unwrap(), std::fs::read(b.path().join("iterations.csv")).unwrap());
}

#[test]
fn sweep_table_accounts_for_the_measure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = read_json(&config("sweep.json"));
    cfg["epsilon"]["cells"] = Value::from(64);
    let path = write_config(dir.path(), "sweep64.json", &cfg);
    let (code, err) = qpresp(&path, dir.path(), &["--threads", "2", "sweep"]);
    assert_eq!(code, 0, "{err}");
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["eps_lo", "eps_hi", "m", "worst_k", "lhs", "rhs", "flagged", "excluded"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 64);
    let total: f64 = rows.iter().map(|r| r[7].parse::<f64>().unwrap()).sum();
    let summary = read_json(&dir.path().join("sweep.json"));
    assert!((total - summary["excluded_measure"].as_f64().unwrap()).abs() <= 1e-12);
    assert_eq!(rows.last().unwrap()[1].parse::<f64>().unwrap(), 0.1);
}

#[test]
fn malformed_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", &serde_json::json!({"system": {"demo": "elliptic"}, "epsilon": 0.001, "truncation": {"k_trunk": 4}}));
    let (code, err) = qpresp(&bad, dir.path(), &["run"]);
    assert_eq!(code, qpresp_cli::EXIT_CONFIG);
    assert!(err.contains("truncation") && err.contains("k_trunk"), "{err}");

    let unknown = write_config(dir.path(), "unknown.json", &serde_json::json!({"system": {"demo": "parabolic"}, "epsilon": 0.001}));
    assert_eq!(qpresp(&unknown, dir.path(), &["run"]).0, qpresp_cli::EXIT_CONFIG);
    assert_eq!(qpresp(&dir.path().join("missing.json"), dir.path(), &["run"]).0, qpresp_cli::EXIT_CONFIG);
    assert_eq!(qpresp(&config("elliptic.json"), dir.path(), &["sweep"]).0, qpresp_cli::EXIT_CONFIG);
}

#[test]
fn resonant_parameter_exits_with_resonance_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = read_json(&config("elliptic.json"));
    cfg["epsilon"] = Value::from(0.0274);
    let path = write_config(dir.path(), "resonant.json", &cfg);
    let (code, err) = qpresp(&path, dir.path(), &["run"]);
    assert_eq!(code, qpresp_cli::EXIT_RESONANT, "{err}");
    assert!(err.contains("-13, 8"), "{err}");
}

#[test]
fn exhausted_iteration_exits_with_divergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = read_json(&config("nonlinear.json"));
    cfg["schedule"] = serde_json::json!({"m_max": 1, "p_tol": 0.0});
    let path = write_config(dir.path(), "short.json", &cfg);
    let (code, err) = qpresp(&path, dir.path(), &["run"]);
    assert_eq!(code, qpresp_cli::EXIT_DIVERGENCE, "{err}");
}

#[test]
fn every_bundled_config_reduces_and_bounds() {
    for name in ["elliptic.json", "nonlinear.json", "hyperbolic.json", "second-order.json", "degenerate.json"] {
        let dir = tempfile::tempdir().unwrap();
        for cmd in ["average", "normal-form", "reduce", "bounds", "run"] {
            let (code, err) = qpresp(&config(name), dir.path(), &[cmd]);
            assert_eq!(code, 0, "{name} {cmd}: {err}");
        }
        let reduce = read_json(&dir.path().join("reduce.json"));
        assert!(reduce["identity_defect"].as_f64().unwrap() <= 1e-10, "{name}: {reduce}");
        assert_eq!(read_json(&dir.path().join("report.json"))["converged"], true, "{name}");
    }
}

#[test]
fn second_order_reduction_reports_branches() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qpresp(&config("second-order.json"), dir.path(), &["reduce"]).0, 0);
    let reduce = read_json(&dir.path().join("reduce.json"));
    assert_eq!(reduce["kind"], "second_order");
    let b = &reduce["branches"];
    assert!(b["max_branch_error"].as_f64().unwrap() <= 1e-10, "{reduce}");
    let doubled: Vec<(f64, f64)> = b["doubled_eigenvalues"].as_array().unwrap().iter().map(|z| (z[0].as_f64().unwrap(), z[1].as_f64().unwrap())).collect();
    assert_eq!(doubled.len(), 2);
    assert!(doubled.iter().all(|(re, im)| re.abs() <= 1e-12 && (im.abs() - 1.0).abs() <= 1e-12), "{doubled:?}");
}
