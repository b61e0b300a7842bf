use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use transduction::cli::output::check_header;

const BIN: &str = env!("CARGO_BIN_EXE_transduce");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_with(sub: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let dir = out.parent().unwrap();
    let cfg = dir.join(format!("{sub}.toml"));
    fs::write(&cfg, config).unwrap();
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

const DYNAMICS: &str = "kind = \"resonant\"\nlambda_mhz = 8.0\nomega_mhz = 24.0\ntheta_rad = 1.0\nfock_dim = 3\n";

#[test]
fn dynamics_writes_csv_summary_and_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dyn");
    let o = run_with("dynamics", DYNAMICS, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("dynamics.csv")).unwrap();
    check_header(&csv, &["t_us", "fidelity", "n_mean", "p_g", "p_e", "p_r", "p_s"]).unwrap();
    let data = rows(&csv);
    assert_eq!(data.len(), 401);
    assert!(data.windows(2).all(|w| w[1][0] > w[0][0]));

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let f = summary["final_fidelity"].as_f64().unwrap();
    assert!((f - data.last().unwrap()[1]).abs() < 1e-11);
    assert_eq!(summary["command"], "dynamics");
    assert_eq!(summary["params"]["fock_dim"], 3);
    for key in ["conventions", "diagnostics", "code_version"] {
        assert!(summary.get(key).is_some(), "{key}");
    }

    let again = tmp.path().join("again");
    let echo = fs::read_to_string(out.join("config.toml")).unwrap();
    let o = run_with("dynamics", &echo, &again, &[]);
    assert!(o.status.success());
    assert_eq!(csv, fs::read_to_string(again.join("dynamics.csv")).unwrap());
}

#[test]
fn bloch_sweep_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bloch");
    let cfg = "kind = \"dispersive\"\nlambda_mhz = 8.0\nomega_mhz = 4.8\nfock_dim = 3\ntheta_steps = 3\nphi_steps = 4\n";
    let o = run_with("bloch-sweep", cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("bloch.csv")).unwrap();
    check_header(&csv, &["theta_rad", "phi_rad", "fidelity"]).unwrap();
    assert_eq!(rows(&csv).len(), 12);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let min = rows(&csv).iter().map(|r| r[2]).fold(f64::MAX, f64::min);
    assert!((summary["extremum"]["value"].as_f64().unwrap() - min).abs() < 1e-11);
}

#[test]
fn heatmap_is_deterministic_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "kind = \"resonant\"\nfock_dim = 3\nkappa_mhz = 1.0\ngamma_phi_khz = 130.0\n\
               lambda_over_kappa_min = 1.0\nlambda_over_kappa_max = 4.0\nlambda_over_kappa_points = 3\n\
               omega_over_kappa_min = 2.0\nomega_over_kappa_max = 5.0\nomega_over_kappa_points = 2\n";
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_with("noise-heatmap", cfg, &a, &["--workers", "1"]).status.success());
    assert!(run_with("noise-heatmap", cfg, &b, &["--workers", "3"]).status.success());
    let csv = fs::read_to_string(a.join("heatmap.csv")).unwrap();
    check_header(&csv, &["lambda_over_kappa", "omega_over_kappa", "fidelity"]).unwrap();
    assert_eq!(rows(&csv).len(), 6);
    assert_eq!(csv, fs::read_to_string(b.join("heatmap.csv")).unwrap());
}

#[test]
fn thermal_sweep_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("thermal");
    let cfg = "kind = \"dispersive\"\nfock_dim = 5\nkappa_mhz = 1.0\nnbar_list = [0.0, 0.6]\n\
               lambda_over_kappa_min = 2.0\nlambda_over_kappa_max = 4.0\nlambda_over_kappa_points = 2\n";
    let o = run_with("thermal-sweep", cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("thermal.csv")).unwrap();
    check_header(&csv, &["nbar", "lambda_over_kappa", "fidelity"]).unwrap();
    let data = rows(&csv);
    assert_eq!(data.len(), 4);
    assert!(data.iter().all(|r| (0.0..=1.0).contains(&r[2])));
}

#[test]
fn validate_reports_failures_with_exit_four() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = run_with("validate", "kind = \"dispersive\"\nlambda_mhz = 8.0\nomega_mhz = 4.8\nfock_dim = 3\n", &tmp.path().join("ok"), &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = run_with("validate", "kind = \"dispersive\"\nlambda_mhz = 8.0\nomega_mhz = 24.0\nfock_dim = 3\n", &tmp.path().join("bad"), &[]);
    assert_eq!(bad.status.code(), Some(4));
    assert!(tmp.path().join("bad/summary.json").exists());
}

#[test]
fn configuration_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    for cfg in [
        "kind = \"resonant\"\nlambda_mhz = 8.0\nomega_mhz = -1.0\n",
        "kind = \"resonant\"\nlambda_mhz = 8.0\nomega_mhz = 1.0\nbogus = 3\n",
        "kind = \"resonant\"\nlambda_mhz = 8.0\n",
        "lambda_mhz = 8.0\nomega_mhz = 1.0\n",
        "kind = \"sideways\"\nlambda_mhz = 8.0\nomega_mhz = 1.0\n",
    ] {
        let o = run_with("dynamics", cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(run(&["dynamics", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(run(&["plot"]).status.code(), Some(2));
    let o = run_with("dynamics", DYNAMICS, &out, &["--set", "fock_dim=zero"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_five() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let cfg = tmp.path().join("dyn.toml");
    fs::write(&cfg, DYNAMICS).unwrap();
    let out = blocker.join("sub");
    let o = run(&["dynamics", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
}
