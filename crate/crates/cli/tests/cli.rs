use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use vibemu::units;
use vibemu_cli::files::{write_json, ConfigurationData, MoleculeFile, MoleculeUnits, Table};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn vibemu(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vibemu"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(output: &Output) {
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
}

/// Single-coordinate molecule with mass in amu, frequencies in meV, displacements in Å.
fn one_mode(dir: &Path, mass: f64, w0: f64, wf: f64, d0: f64, df: f64) -> PathBuf {
    let k = |w: f64| units::to_ev_per_angstrom2(units::amu(mass) * units::mev(w).powi(2));
    let file = MoleculeFile {
        schema_version: 1,
        units: MoleculeUnits::default(),
        labels: vec!["X".into()],
        masses: vec![mass],
        initial: ConfigurationData {
            hessian: vec![vec![k(w0)]],
            equilibrium: vec![d0],
        },
        final_: ConfigurationData {
            hessian: vec![vec![k(wf)]],
            equilibrium: vec![df],
        },
    };
    let path = dir.join("one_mode.json");
    write_json(&path, &file).unwrap();
    path
}

fn table_rows(path: &Path) -> Vec<(String, String, f64)> {
    let t = Table::read(path).unwrap();
    t.rows
        .iter()
        .map(|r| (r[0].clone(), r[1].clone(), r[2].parse().unwrap()))
        .collect()
}

fn range(path: &Path, quantity: &str) -> (f64, f64) {
    let t = Table::read(path).unwrap();
    let entry = t
        .meta
        .iter()
        .filter(|(k, _)| k == "range")
        .map(|(_, v)| v.split_whitespace().collect::<Vec<_>>())
        .find(|v| v[0] == quantity)
        .unwrap();
    (entry[1].parse().unwrap(), entry[2].parse().unwrap())
}

#[test]
fn compile_formic_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&vibemu(dir.path(), &["compile", data("formic_synthetic.json").to_str().unwrap()]));
    let csv = dir.path().join("circuit_table.csv");
    let (lo, hi) = range(&csv, "frequency");
    assert!((lo - 1.33).abs() <= 0.01 && (hi - 10.0).abs() <= 0.01, "{lo} {hi}");
    let (lo, hi) = range(&csv, "capacitance");
    assert!((lo - 0.5).abs() < 1e-12 && (hi - 8.0).abs() < 1e-12);
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["schema_version"], 1);
    assert_eq!(plan["units"]["capacitance"], "pF");
}

#[test]
fn compile_single_mode_gives_one_row_per_quantity() {
    let dir = tempfile::tempdir().unwrap();
    let molecule = one_mode(dir.path(), 1.0, 100.0, 100.0, 0.0, 0.0);
    ok(&vibemu(dir.path(), &["compile", molecule.to_str().unwrap()]));
    let rows = table_rows(&dir.path().join("circuit_table.csv"));
    let mut quantities: Vec<&str> = rows.iter().map(|r| r.1.as_str()).collect();
    let total = quantities.len();
    quantities.dedup();
    assert_eq!(quantities.len(), total);
    assert!(rows.iter().any(|r| r.1 == "frequency_initial" && (r.2 - 10.0).abs() < 1e-12));
}

#[test]
fn dynamical_range_violation_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("two_mode.json")).unwrap();
    let mut file: MoleculeFile = serde_json::from_str(&text).unwrap();
    file.initial.hessian[0][0] *= 1e-5;
    let path = dir.path().join("wide.json");
    write_json(&path, &file).unwrap();
    let out = vibemu(dir.path(), &["compile", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dynamical range"));
}

#[test]
fn quench_sweep_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(&vibemu(dir.path(), &["compile", data("two_mode.json").to_str().unwrap()]));
    let plan = dir.path().join("plan.json");
    ok(&vibemu(dir.path(), &["quench", plan.to_str().unwrap(), "--t-sw-omega", "0,0.001,0.003,0.01,0.03,0.1"]));
    let t = Table::read(&dir.path().join("quench_sweep.csv")).unwrap();
    let mean = t.column("mean_norm_diff").unwrap();
    assert_eq!(mean[0], 0.0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("quench_summary.json")).unwrap()).unwrap();
    let slope = summary["slope"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&slope), "{slope}");
}

#[test]
fn single_mode_quench_matches_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let molecule = one_mode(dir.path(), 12.0, 150.0, 150.0, 0.01, 0.01);
    ok(&vibemu(dir.path(), &["compile", molecule.to_str().unwrap()]));
    let plan = dir.path().join("plan.json");
    ok(&vibemu(dir.path(), &["quench", plan.to_str().unwrap(), "--t-sw-omega", "0.01,0.1,0.5,1,2"]));
    let t = Table::read(&dir.path().join("quench_sweep.csv")).unwrap();
    let theta = t.column("t_sw_times_omega_max").unwrap();
    let mean = t.column("mean_norm_diff").unwrap();
    for (th, m) in theta.iter().zip(&mean) {
        let exact = 2.0 * (0.5 * th).sin();
        assert!((m - exact).abs() <= 0.01 * exact, "{th}: {m} vs {exact}");
    }
}

#[test]
fn fcp_displaced_mode_is_poisson() {
    let dir = tempfile::tempdir().unwrap();
    let (mass, w) = (1.0, 100.0);
    // α² = mωd²/2 = 1
    let d = units::to_angstrom((2.0 / (units::amu(mass) * units::mev(w))).sqrt());
    let molecule = one_mode(dir.path(), mass, w, w, 0.0, d);
    ok(&vibemu(dir.path(), &["fcp", molecule.to_str().unwrap()]));
    let t = Table::read(&dir.path().join("spectrum.csv")).unwrap();
    let p = t.column("probability").unwrap();
    let e = t.column("energy_mev").unwrap();
    let mut factorial = 1.0;
    for n in 0..p.len() {
        if n > 0 {
            factorial *= n as f64;
        }
        assert!((p[n] - (-1.0f64).exp() / factorial).abs() < 1e-8, "n = {n}");
        assert!((e[n] - n as f64 * w).abs() < 1e-9 * w);
    }
}

#[test]
fn fcp_identical_configurations_give_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let molecule = one_mode(dir.path(), 16.0, 200.0, 200.0, 0.05, 0.05);
    ok(&vibemu(dir.path(), &["fcp", molecule.to_str().unwrap()]));
    let t = Table::read(&dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!((t.column("probability").unwrap()[0] - 1.0).abs() < 1e-12);
}

#[test]
fn fcp_two_mode_normalisation_and_moments() {
    let dir = tempfile::tempdir().unwrap();
    ok(&vibemu(dir.path(), &["fcp", data("two_mode.json").to_str().unwrap()]));
    let t = Table::read(&dir.path().join("spectrum.csv")).unwrap();
    let total: f64 = t.column("probability").unwrap().iter().sum();
    let tail: f64 = t.meta("truncation_tail").unwrap().parse().unwrap();
    assert!((total + tail - 1.0).abs() < 1e-10);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("moment_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn fcp_unconverged_quadrature_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"fcp": {"n_max": 8, "quadrature_order": 2}}"#).unwrap();
    let out = vibemu(
        dir.path(),
        &["--config", config.to_str().unwrap(), "fcp", data("two_mode.json").to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn squid_harmonic_targets() {
    let dir = tempfile::tempdir().unwrap();
    ok(&vibemu(dir.path(), &["squid-design", "--cubic", "0", "--quartic", "0"]));
    let design: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("squid_design.json")).unwrap()).unwrap();
    assert_eq!(design["l_over_lj"].as_f64().unwrap(), 0.0);
    assert!(Table::read(&dir.path().join("potential_curve.csv")).unwrap().rows.len() > 2);
    let out = vibemu(dir.path(), &["squid-design", "--cubic", "0", "--quartic", "-5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ghz_pipeline_recovers_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = dir.path().join("line.csv");
    std::fs::write(&spectrum, "energy_mev,probability\n300,1\n").unwrap();
    ok(&vibemu(dir.path(), &["forward", spectrum.to_str().unwrap()]));
    ok(&vibemu(dir.path(), &["reconstruct", "--p1", dir.path().join("p1.csv").to_str().unwrap()]));
    let peaks: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("peaks.json")).unwrap()).unwrap();
    let peaks = peaks["peaks"].as_array().unwrap();
    assert_eq!(peaks.len(), 1);
    // energy grid step is 0.5 meV
    assert!((peaks[0]["center_mev"].as_f64().unwrap() - 300.0).abs() < 0.5);
}

#[test]
fn chi_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"ghz": {"chi": 0.2}}"#).unwrap();
    let spectrum = dir.path().join("line.csv");
    std::fs::write(&spectrum, "energy_mev,probability\n300,1\n").unwrap();
    let out = vibemu(dir.path(), &["--config", config.to_str().unwrap(), "forward", spectrum.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = vibemu(dir.path(), &["fcp", "/nonexistent/molecule.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        ok(&vibemu(dir, &["fcp", data("two_mode.json").to_str().unwrap()]));
        ok(&vibemu(dir, &["--threads", "3", "reconstruct", "--spectrum", dir.join("spectrum.csv").to_str().unwrap()]));
    }
    for name in ["spectrum.csv", "moment_report.json", "reconstruction.csv", "peaks.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}
