//! Subcommand implementations. Each reads its inputs, converts to internal
//! units, calls the library and writes laboratory-unit outputs into `out`.

use anyhow::Result;
use serde::Serialize;
use std::path::{Path, PathBuf};
use vibemu::anharmonic::{design_anharmonicity, potential_curve, taylor_coefficients};
use vibemu::emulator::{circuit_table, default_capacitance, plan_protocol1, plan_protocol2, EmulatorModel, ProtocolPlan};
use vibemu::model::{ground_state, normal_modes, regulator_collisions, remove_null_space, ForceField};
use vibemu::quench::{diabatic_bound, diabaticity_report, error_scaling_sweep, QuenchSchedule};
use vibemu::readout::{find_peaks, ghz_forward, ghz_reconstruct, GhzSetup, Peak};
use vibemu::spectrum::{franck_condon_profile, moment_check, LineSpectrum};
use vibemu::{units, Error};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::files::{num, write_json, Csv, MoleculeFile, PlanFile, Table};

/// Raised when the spectrum disagrees with the Gaussian moments.
#[derive(Debug, thiserror::Error)]
#[error("moment check failed: spectral mean {spectral_mev} meV vs moment mean {moment_mev} meV")]
pub struct MomentCheckFailed {
    pub spectral_mev: f64,
    pub moment_mev: f64,
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

/// Force fields with zero modes regulated as configured.
fn regulated(molecule: &MoleculeFile, config: &RunConfig) -> Result<(ForceField, ForceField)> {
    let (ff0, fff) = molecule.force_fields()?;
    let lambdas: Vec<f64> = config.regulators_mev.iter().map(|&r| units::mev(r)).collect();
    let lift = |ff: ForceField| -> Result<ForceField> {
        if normal_modes(&ff)?.kernel_dim == 0 {
            return Ok(ff);
        }
        for w in regulator_collisions(&ff, &lambdas)? {
            warn(&w);
        }
        Ok(remove_null_space(&ff, &lambdas)?)
    };
    Ok((lift(ff0)?, lift(fff)?))
}

fn plan_for(molecule: &MoleculeFile, config: &RunConfig) -> Result<ProtocolPlan> {
    let (ff0, fff) = regulated(molecule, config)?;
    let c = default_capacitance(ff0.masses(), config.capacitance_pf_per_amu);
    let hw = config.hardware()?;
    let strategy = config.kappa_strategy()?;
    let plan = match config.protocol {
        1 => plan_protocol1(&ff0, &fff, &hw, &c, strategy)?,
        _ => plan_protocol2(&ff0, &fff, &hw, &c, strategy)?,
    };
    for w in &plan.warnings {
        warn(w);
    }
    Ok(plan)
}

pub fn compile(molecule: &Path, config: &RunConfig, out: &Path) -> Result<()> {
    let molecule = MoleculeFile::read(molecule)?;
    let plan = plan_for(&molecule, config)?;
    let table = circuit_table(&plan.start_model()?, &plan.end_model()?)?;

    let mut meta = vec![
        ("protocol", config.protocol.to_string()),
        ("kappa", num(plan.kappa)),
    ];
    for r in &table.ranges {
        meta.push(("range", format!("{} {} {} {}", r.quantity, num(r.min), num(r.max), r.unit)));
    }
    let mut csv = Csv::new(&meta, &["element", "quantity", "value", "unit"]);
    for row in &table.rows {
        csv.row(&[row.element.clone(), row.quantity.clone(), num(row.value), row.unit.clone()]);
    }
    csv.write(&out.join("circuit_table.csv"))?;
    write_json(&out.join("plan.json"), &PlanFile::from_plan(&plan))
}

#[derive(Serialize)]
struct BoundSummary {
    epsilon: f64,
    t_sw_ps: f64,
    norm_deviation: f64,
    drive_deviation: f64,
    empirical_constant: f64,
    magnus_converged: bool,
}

#[derive(Serialize)]
struct QuenchSummary {
    schema_version: u32,
    omega_max_ghz: f64,
    slope: f64,
    points: usize,
    bound: Option<BoundSummary>,
}

pub fn quench(plan: &Path, t_sw_omega: Option<Vec<f64>>, config: &RunConfig, out: &Path) -> Result<()> {
    let plan = PlanFile::read(plan)?.to_plan()?;
    let grid = t_sw_omega.unwrap_or_else(|| config.quench.t_sw_omega.clone());
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Argument("switch times must be non-negative".into()).into());
    }
    let omega = plan.omega_max()?;
    let t_sw: Vec<f64> = grid.iter().map(|x| x / omega).collect();
    let sweep = error_scaling_sweep(&plan, &t_sw, &config.quench.profile)?;

    let mut csv = Csv::new(
        &[("omega_max_ghz", num(units::to_ghz(omega))), ("slope", num(sweep.slope))],
        &["t_sw_ps", "t_sw_times_omega_max", "mean_norm_diff", "variance", "magnus_converged"],
    );
    for r in &sweep.rows {
        csv.row(&[
            num(units::to_picosecond(r.t_sw)),
            num(r.t_sw_times_omega_max),
            num(r.mean_norm_diff),
            num(r.variance),
            r.magnus_converged.to_string(),
        ]);
    }
    csv.write(&out.join("quench_sweep.csv"))?;

    let bound = match config.quench.epsilon {
        None => None,
        Some(epsilon) => {
            let t = diabatic_bound(&plan, epsilon)?;
            let report = diabaticity_report(&QuenchSchedule::new(plan.clone(), t, config.quench.profile.clone())?)?;
            Some(BoundSummary {
                epsilon,
                t_sw_ps: units::to_picosecond(t),
                norm_deviation: report.norm_deviation,
                drive_deviation: report.drive_deviation,
                empirical_constant: report.empirical_constant,
                magnus_converged: report.magnus_converged,
            })
        }
    };
    let summary = QuenchSummary {
        schema_version: SCHEMA_VERSION,
        omega_max_ghz: units::to_ghz(omega),
        slope: sweep.slope,
        points: sweep.rows.len(),
        bound,
    };
    write_json(&out.join("quench_summary.json"), &summary)
}

#[derive(Serialize)]
struct MomentSummary {
    schema_version: u32,
    spectral_mean_mev: f64,
    moment_mean_mev: f64,
    absolute_mev: f64,
    relative: f64,
    tolerance_mev: f64,
    passed: bool,
    total_probability: f64,
    truncation_tail: f64,
}

fn occupation_field(occupations: &[Vec<usize>]) -> String {
    occupations
        .iter()
        .map(|o| o.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn fcp(molecule: &Path, config: &RunConfig, out: &Path) -> Result<()> {
    let molecule = MoleculeFile::read(molecule)?;
    let (ff0, fff) = regulated(&molecule, config)?;
    let spectrum = franck_condon_profile(&ff0, &fff, config.fcp.n_max, config.fcp.quadrature_order)?;
    let frequencies: Vec<String> = spectrum.frequencies.iter().map(|&w| num(units::to_mev(w))).collect();
    let mut csv = Csv::new(
        &[
            ("zero_point_mev", num(units::to_mev(spectrum.zero_point))),
            ("truncation_tail", num(spectrum.truncation_tail)),
            ("n_max", config.fcp.n_max.to_string()),
            ("quadrature_order", spectrum.quadrature_order.to_string()),
            ("frequencies_mev", frequencies.join(" ")),
        ],
        &["energy_mev", "probability", "occupations"],
    );
    for line in &spectrum.lines {
        csv.row(&[
            num(units::to_mev(line.energy)),
            num(line.probability),
            occupation_field(&line.occupations),
        ]);
    }
    csv.write(&out.join("spectrum.csv"))?;

    let report = moment_check(
        &spectrum,
        &ground_state(&EmulatorModel::from_force_field(&ff0)?)?,
        &EmulatorModel::from_force_field(&fff)?,
    )?;
    let summary = MomentSummary {
        schema_version: SCHEMA_VERSION,
        spectral_mean_mev: units::to_mev(report.spectral_mean),
        moment_mean_mev: units::to_mev(report.moment_mean),
        absolute_mev: units::to_mev(report.absolute),
        relative: report.relative,
        tolerance_mev: units::to_mev(report.tolerance),
        passed: report.passed,
        total_probability: spectrum.total_probability(),
        truncation_tail: spectrum.truncation_tail,
    };
    write_json(&out.join("moment_report.json"), &summary)?;
    if !report.passed {
        return Err(MomentCheckFailed {
            spectral_mev: summary.spectral_mean_mev,
            moment_mev: summary.moment_mean_mev,
        }
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct DesignSummary {
    schema_version: u32,
    /// Ratios in units of `1/φ₀` and `1/φ₀²`, `φ₀ = ħ/2e`.
    target_cubic: f64,
    target_quartic: f64,
    achieved_cubic: f64,
    achieved_quartic: f64,
    residual_cubic: f64,
    residual_quartic: f64,
    l_nh: f64,
    lj_nh: f64,
    ej_ghz: f64,
    l_over_lj: f64,
    phi_ext_over_phi0: f64,
    phi_min_over_phi0: f64,
}

pub fn squid_design(cubic: f64, quartic: f64, config: &RunConfig, out: &Path) -> Result<()> {
    let phi0 = units::REDUCED_FLUX_QUANTUM;
    let l = units::nanohenry(config.squid.l_nh);
    let design = design_anharmonicity(cubic / phi0, quartic / (phi0 * phi0), phi0, l)?;
    let c = &design.circuit;
    let taylor = taylor_coefficients(c)?;
    let summary = DesignSummary {
        schema_version: SCHEMA_VERSION,
        target_cubic: cubic,
        target_quartic: quartic,
        achieved_cubic: design.achieved_cubic * phi0,
        achieved_quartic: design.achieved_quartic * phi0 * phi0,
        residual_cubic: design.residual_cubic,
        residual_quartic: design.residual_quartic,
        l_nh: units::to_nanohenry(c.l),
        lj_nh: units::to_nanohenry(c.lj()),
        ej_ghz: units::to_ghz_energy(c.ej),
        l_over_lj: c.ratio(),
        phi_ext_over_phi0: c.phi_ext / phi0,
        phi_min_over_phi0: taylor.phi_min / phi0,
    };
    write_json(&out.join("squid_design.json"), &summary)?;

    let n = config.squid.curve_points;
    let span = 2.0 * std::f64::consts::PI * phi0;
    let grid: Vec<f64> = (0..n)
        .map(|k| taylor.phi_min - span + 2.0 * span * k as f64 / (n - 1) as f64)
        .collect();
    let mut csv = Csv::new(&[("units", "phi=phi0 V=GHz".to_string())], &["phi", "V"]);
    for (phi, v) in potential_curve(c, &grid)? {
        csv.row(&[num(phi / phi0), num(units::to_ghz_energy(v))]);
    }
    csv.write(&out.join("potential_curve.csv"))
}

fn read_spectrum(path: &Path) -> Result<LineSpectrum> {
    let table = Table::read(path)?;
    let energy = table.column("energy_mev")?;
    let probability = table.column("probability")?;
    let pairs: Vec<(f64, f64)> = energy.iter().zip(&probability).map(|(&e, &p)| (units::mev(e), p)).collect();
    if pairs.iter().any(|&(e, p)| !(e.is_finite() && p.is_finite() && p >= 0.0)) {
        return Err(Error::Argument(format!("{}: invalid line", path.display())).into());
    }
    Ok(LineSpectrum::from_lines(&pairs))
}

fn ghz_setup(config: &RunConfig, tau: Vec<f64>) -> Result<GhzSetup> {
    Ok(GhzSetup::new(config.ghz.chi, tau, config.energy_grid(), config.ghz.window)?)
}

pub fn forward(spectrum: &Path, config: &RunConfig, out: &Path) -> Result<()> {
    let setup = ghz_setup(config, config.tau_grid())?;
    let p1 = ghz_forward(&read_spectrum(spectrum)?, &setup)?;
    write_p1(&setup, &p1, &out.join("p1.csv"))
}

fn write_p1(setup: &GhzSetup, p1: &[f64], path: &Path) -> Result<()> {
    let mut csv = Csv::new(&[("chi", num(setup.chi))], &["tau_ps", "p1"]);
    for (t, p) in setup.tau_grid.iter().zip(p1) {
        csv.row(&[num(units::to_picosecond(*t)), num(*p)]);
    }
    csv.write(path)
}

#[derive(Serialize)]
struct PeakRow {
    center_mev: f64,
    height_per_mev: f64,
    mass: f64,
}

#[derive(Serialize)]
struct PeakSummary {
    schema_version: u32,
    peaks: Vec<PeakRow>,
}

pub enum ReconstructInput {
    P1(PathBuf),
    Spectrum(PathBuf),
}

pub fn reconstruct(input: ReconstructInput, config: &RunConfig, out: &Path) -> Result<()> {
    let (setup, p1) = match input {
        ReconstructInput::P1(path) => {
            let table = Table::read(&path)?;
            let tau: Vec<f64> = table.column("tau_ps")?.into_iter().map(units::picosecond).collect();
            let p1 = table.column("p1")?;
            if let Some(chi) = table.meta("chi") {
                if chi.parse::<f64>().ok() != Some(config.ghz.chi) {
                    return Err(Error::Argument(format!(
                        "record was taken with chi = {chi}, config has {}",
                        config.ghz.chi
                    ))
                    .into());
                }
            }
            (ghz_setup(config, tau)?, p1)
        }
        ReconstructInput::Spectrum(path) => {
            let setup = ghz_setup(config, config.tau_grid())?;
            let p1 = ghz_forward(&read_spectrum(&path)?, &setup)?;
            (setup, p1)
        }
    };
    let density = ghz_reconstruct(&p1, &setup)?;
    let per_mev = units::mev(1.0);
    let mut csv = Csv::new(
        &[("chi", num(setup.chi)), ("window", format!("{:?}", setup.window).to_lowercase())],
        &["energy_mev", "density_per_mev"],
    );
    for (e, d) in setup.energy_grid.iter().zip(&density) {
        csv.row(&[num(units::to_mev(*e)), num(d * per_mev)]);
    }
    csv.write(&out.join("reconstruction.csv"))?;

    let peaks = find_peaks(&setup.energy_grid, &density, config.ghz.peak_threshold)?;
    let summary = PeakSummary {
        schema_version: SCHEMA_VERSION,
        peaks: peaks
            .iter()
            .map(|p: &Peak| PeakRow {
                center_mev: units::to_mev(p.center),
                height_per_mev: p.height * per_mev,
                mass: p.mass,
            })
            .collect(),
    };
    write_json(&out.join("peaks.json"), &summary)
}
