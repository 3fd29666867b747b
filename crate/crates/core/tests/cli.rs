use std::path::Path;
use std::process::{Command, Output};

fn upwind(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upwind"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stationary_ou_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["stationary"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&dir.path().join("stationary.csv"));
    assert_eq!(header, ["x", "pi_h_over_h", "pi_reference", "abs_error"]);
    assert_eq!(rows.len(), 121);
    assert!(rows.iter().all(|r| r.len() == 4 && (r[1] - r[2]).abs() == r[3]));
    let text = std::fs::read_to_string(dir.path().join("stationary.csv")).unwrap();
    // 17 significant digits.
    assert!(text.lines().nth(1).unwrap().starts_with("-6.0000000000000000e0,"));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "stationary");
    assert_eq!(manifest["config"]["coeff.preset"], "ou");
    assert_eq!(manifest["config"]["grid.N"], "121");
}

#[test]
fn torus_stationary_reports_linf_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["stationary", "--set", "coeff.preset=torus_sin"], dir.path());
    assert!(o.status.success());
    let s = json(&dir.path().join("stationary.json"));
    assert_eq!(s["N"], 64);
    let e = s["linf_error"].as_f64().unwrap();
    assert!(e > 0.0 && e < 0.05, "{e}");
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["stationary", "--set", "coeff.preset=heat"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("coeff.preset"));

    let o = upwind(&["gap", "--set", "grid.nodes=10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.nodes"));

    let o = upwind(&["evolve", "--set", "coeff.b=x*("], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("coeff.b"));

    let o = upwind(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cfl_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(
        &["evolve", "--set", "evolve.method=euler", "--set", "evolve.dt=0.1", "--set", "evolve.T=1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));
}

#[test]
fn evolve_snapshots_conserve_mass_and_approach_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["evolve", "--set", "coeff.preset=torus_sin", "--set", "grid.N=32"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&dir.path().join("evolve.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for name in ["t", "mass", "tv_seminorm", "l1_error_vs_reference", "F_h", "relative_entropy"] {
        col(name);
    }
    let times: Vec<f64> = rows.iter().map(|r| r[col("t")]).collect();
    assert_eq!(times, [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]);
    for r in &rows {
        assert!((r[col("mass")] - 1.0).abs() < 1e-12);
    }
    let tv: Vec<f64> = rows.iter().map(|r| r[col("tv_to_stationary")]).collect();
    assert!(tv.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{tv:?}");
    let summary = json(&dir.path().join("evolve.json"));
    assert!(summary["decay_rate_F_h"].as_f64().unwrap() > 0.0);
}

#[test]
fn gap_torus_has_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["gap", "--set", "coeff.preset=torus_sin"], dir.path());
    assert!(o.status.success());
    let g = json(&dir.path().join("gap.json"));
    assert!(g["torus_kappa"].as_f64().unwrap() > 0.0);
    assert!(g.get("B").is_none());
    let o = upwind(&["gap"], dir.path());
    assert!(o.status.success());
    let g = json(&dir.path().join("gap.json"));
    assert!(g["B"].as_f64().unwrap() > 0.0);
    assert!(g["kappa_lower"].as_f64().unwrap() <= g["exact_gap"].as_f64().unwrap());
}

#[test]
fn order_reports_first_order_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["order"], dir.path());
    assert!(o.status.success());
    let s = json(&dir.path().join("order.json"));
    let slope = s["l1_order"].as_f64().unwrap();
    assert!((0.8..=1.3).contains(&slope), "{slope}");
    let (_, rows) = csv(&dir.path().join("order.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn mc_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["mc", "--seed", "42", "--set", "mc.M=20000", "--set", "coeff.preset=torus_sin", "--set", "grid.N=16"];
    assert!(upwind(&args, a.path()).status.success());
    assert!(upwind(&args, b.path()).status.success());
    for f in ["mc.csv", "mc.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let (header, rows) = csv(&a.path().join("mc.csv"));
    assert_eq!(header, ["x", "rho_tilde", "rho_deterministic", "stderr_band"]);
    assert_eq!(rows.len(), 16);
    let h = 2.0 * std::f64::consts::PI / 16.0;
    let mass: f64 = rows.iter().map(|r| h * r[1]).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    let summary = json(&a.path().join("mc.json"));
    assert_eq!(summary["seed"], 42);
    assert_eq!(summary["M"], 20000);
}

#[test]
fn fig1_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["fig1", "--set", "fig1.M=2000"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&dir.path().join("fig1.csv"));
    assert_eq!(header, ["x", "pi_exact", "rho_t1", "rho_t4", "rho_t10", "rho_t12"]);
    assert_eq!(rows.len(), 64);
}

#[test]
fn config_file_with_sections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small torus run\n[coeff]\nb = 1 + 0.5*cos(x)\n[domain]\ntype = torus\n[grid]\nN = 24\n").unwrap();
    let o = upwind(&["stationary", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("stationary.json"));
    assert!(s["flux"].as_f64().unwrap() > 1e-3);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["config"]["coeff.sigma"], "1");
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = upwind(&["selftest"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[PASS]") && !text.contains("[FAIL]"));
}
