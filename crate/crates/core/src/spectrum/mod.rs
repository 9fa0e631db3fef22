//! Franck-Condon profiles by Gauss–Hermite overlap integrals.

pub mod quadrature;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{EmulatorModel, ProtocolPlan};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::{mean_energy, ForceField, GaussianState};

/// Largest number of enumerated (non-regulator) modes.
pub const MAX_MODES: usize = 4;
/// Largest change of any retained probability under order doubling.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
/// Relative energy tolerance for merging degenerate lines.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;
/// Regulator modes must carry less mean occupation than this.
pub const REGULATOR_OCCUPATION_LIMIT: f64 = 1e-10;
/// Lines with smaller probability are dropped from the spectrum.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

/// Harmonic well `½(y − c)ᵀF(y − c)` in unit-mass coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticWell {
    pub curvature: DMatrix<f64>,
    pub centre: DVector<f64>,
}

impl QuadraticWell {
    /// Mass-weighted coordinates `y = M^{1/2}x`.
    pub fn from_force_field(ff: &ForceField) -> Self {
        QuadraticWell {
            curvature: ff.mass_weighted_hessian(),
            centre: ff.weighted_equilibrium(),
        }
    }

    /// Balanced coordinates `X = C^{1/2}φ`; the centre is `C^{1/2}B⁻¹V`.
    pub fn from_model(model: &EmulatorModel) -> Result<Self> {
        let chol = model
            .coupling()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Model("coupling matrix is not positive definite".into()))?;
        Ok(QuadraticWell {
            curvature: model.weighted_curvature(),
            centre: model.capacitance_sqrt() * chol.solve(model.driving()),
        })
    }

    pub fn dim(&self) -> usize {
        self.centre.len()
    }
}

/// Overlaps `⟨n|Ψ₀⟩` of the initial ground state with final eigenstates.
#[derive(Clone, Debug, PartialEq)]
pub struct Amplitudes {
    /// Occupations over the enumerated final modes, lexicographic order.
    pub occupations: Vec<Vec<usize>>,
    pub values: Vec<f64>,
    /// Frequencies of the enumerated final modes (ascending).
    pub frequencies: Vec<f64>,
    /// `½ΣΩ` over all final modes, regulators included.
    pub zero_point: f64,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// Energy above the final zero point.
    pub energy: f64,
    pub probability: f64,
    /// All occupation vectors merged into this line.
    pub occupations: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpectrum {
    pub lines: Vec<Line>,
    /// `1 − Σp`.
    pub truncation_tail: f64,
    pub zero_point: f64,
    pub frequencies: Vec<f64>,
    pub quadrature_order: usize,
}

impl LineSpectrum {
    pub fn total_probability(&self) -> f64 {
        self.lines.iter().map(|l| l.probability).sum()
    }

    pub fn mean_energy(&self) -> f64 {
        self.lines.iter().map(|l| l.probability * l.energy).sum()
    }

    pub fn max_energy(&self) -> f64 {
        self.lines.iter().map(|l| l.energy).fold(0.0, f64::max)
    }

    /// A normalised spectrum from explicit `(energy, probability)` pairs.
    pub fn from_lines(pairs: &[(f64, f64)]) -> Self {
        let lines: Vec<Line> = pairs
            .iter()
            .map(|&(energy, probability)| Line {
                energy,
                probability,
                occupations: vec![],
            })
            .collect();
        let total: f64 = lines.iter().map(|l| l.probability).sum();
        LineSpectrum {
            lines,
            truncation_tail: 1.0 - total,
            zero_point: 0.0,
            frequencies: vec![],
            quadrature_order: 0,
        }
    }
}

fn log_det_cholesky(m: &DMatrix<f64>, what: &str) -> Result<(f64, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))?;
    let l = chol.l();
    let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((log_det, chol))
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Gauss–Hermite order that integrates every retained amplitude exactly.
pub fn exact_order(modes: usize, n_max: usize) -> usize {
    modes * n_max / 2 + 1
}

/// Amplitudes for occupations `0..=n_max` of every non-regulator final mode.
///
/// `regulators` are unit vectors along final modes that must stay in their
/// ground state; they are integrated out analytically.
pub fn overlap_amplitudes(
    initial: &QuadraticWell,
    final_: &QuadraticWell,
    regulators: &[DVector<f64>],
    n_max: usize,
    order: usize,
) -> Result<Amplitudes> {
    let n = initial.dim();
    check_dim(n, final_.dim())?;
    check_dim(n, initial.curvature.nrows())?;
    check_dim(n, final_.curvature.nrows())?;
    let (g, g_inv) = linalg::sqrt_and_inv_sqrt(&initial.curvature, "initial curvature")?;
    let (values, o) = linalg::sym_eigen(&final_.curvature);
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Model("final curvature must be positive definite".into()));
    }
    let omegas: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();

    let mut reg_idx = Vec::new();
    for nu in regulators {
        check_dim(n, nu.len())?;
        let proj = o.transpose() * nu;
        let (j, best) = proj
            .iter()
            .enumerate()
            .map(|(j, p)| (j, p.abs()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if best < 1.0 - 1e-6 * nu.norm().max(1.0) || reg_idx.contains(&j) {
            return Err(Error::Model(
                "regulator direction is not a distinct final normal mode".into(),
            ));
        }
        reg_idx.push(j);
    }
    let phys: Vec<usize> = (0..n).filter(|j| !reg_idx.contains(j)).collect();
    if phys.len() > MAX_MODES {
        return Err(Error::Argument(format!(
            "{} modes exceed the limit of {MAX_MODES} for exact profiles",
            phys.len()
        )));
    }

    let gp = o.transpose() * &g * &o;
    let gp_inv = o.transpose() * &g_inv * &o;
    let a = o.transpose() * (&initial.centre - &final_.centre);
    for &j in &reg_idx {
        let w = omegas[j];
        let occupation = w * gp_inv[(j, j)] / 4.0 + gp[(j, j)] / (4.0 * w) - 0.5 + w * a[j] * a[j] / 2.0;
        if occupation.abs() >= REGULATOR_OCCUPATION_LIMIT {
            return Err(Error::Model(format!(
                "regulator mode with frequency {w:.6e} would carry occupation {occupation:.3e}; \
                 initial and final regulators must agree"
            )));
        }
    }

    let gt = DMatrix::from_fn(n, n, |i, j| gp[(i, j)] / (omegas[i] * omegas[j]).sqrt());
    let b = DVector::from_fn(n, |i, _| omegas[i].sqrt() * a[i]);
    let k = DMatrix::identity(n, n) + &gt;
    let h = &gt * &b;
    let mut c0 = 0.5 * b.dot(&h);
    let (log_det_gt, _) = log_det_cholesky(&gt, "initial curvature")?;
    let mut log_pref = -(n as f64) / 2.0 * std::f64::consts::PI.ln() + 0.25 * log_det_gt;

    let (kp, hp) = if reg_idx.is_empty() {
        (k.clone(), h.clone())
    } else {
        let k_pp = submatrix(&k, &phys, &phys);
        let k_pr = submatrix(&k, &phys, &reg_idx);
        let k_rr = submatrix(&k, &reg_idx, &reg_idx);
        let h_p = subvector(&h, &phys);
        let h_r = subvector(&h, &reg_idx);
        let (log_det_rr, chol_rr) = log_det_cholesky(&k_rr, "regulator block")?;
        let kinv_h = chol_rr.solve(&h_r);
        c0 -= 0.5 * h_r.dot(&kinv_h);
        log_pref += reg_idx.len() as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det_rr;
        (
            linalg::symmetrize(&(&k_pp - &k_pr * chol_rr.solve(&k_pr.transpose()))),
            h_p - &k_pr * kinv_h,
        )
    };
    let p = phys.len();
    let (log_det_kp, chol) = log_det_cholesky(&kp, "overlap kernel")?;
    let mu = chol.solve(&hp);
    log_pref += p as f64 / 2.0 * 2f64.ln() - 0.5 * log_det_kp + 0.5 * mu.dot(&hp) - c0;
    let l_inv_t = chol
        .l()
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?
        * std::f64::consts::SQRT_2;

    let (nodes, weights) = quadrature::gauss_hermite(order)?;
    let tensor = contract(&l_inv_t, &mu, &nodes, &weights, n_max);
    let scale = log_pref.exp();
    let values = tensor.into_iter().map(|t| t * scale).collect();
    Ok(Amplitudes {
        occupations: occupation_vectors(p, n_max),
        values,
        frequencies: phys.iter().map(|&j| omegas[j]).collect(),
        zero_point: 0.5 * omegas.iter().sum::<f64>(),
        order,
    })
}

fn occupation_vectors(p: usize, n_max: usize) -> Vec<Vec<usize>> {
    let base = n_max + 1;
    (0..base.pow(p as u32))
        .map(|mut o| {
            let mut v = vec![0; p];
            for k in (0..p).rev() {
                v[k] = o % base;
                o /= base;
            }
            v
        })
        .collect()
}

/// `Σ_z w(z) Π_k hn_{n_k}(μ_k + (U z)_k)` for upper-triangular `U`,
/// summed one dimension at a time.
fn contract(u: &DMatrix<f64>, mu: &DVector<f64>, nodes: &[f64], weights: &[f64], n_max: usize) -> Vec<f64> {
    let p = mu.len();
    let q = nodes.len();
    let base = n_max + 1;
    let mut occ = 1usize;
    let mut qs = q.pow(p as u32);
    // None stands for the all-ones tensor of the first level
    let mut tensor: Option<Vec<f64>> = None;
    for k in 0..p {
        let next_qs = qs / q;
        let prev = tensor.as_deref();
        let columns: Vec<Vec<f64>> = (0..next_qs)
            .into_par_iter()
            .map(|s| {
                let mut shift = mu[k];
                let mut rest = s;
                for j in k + 1..p {
                    shift += u[(k, j)] * nodes[rest % q];
                    rest /= q;
                }
                let mut out = vec![0.0; occ * base];
                let mut herm = vec![0.0; base];
                for i in 0..q {
                    quadrature::normalized_hermite(shift + u[(k, k)] * nodes[i], &mut herm);
                    for o in 0..occ {
                        let t = weights[i] * prev.map_or(1.0, |t| t[o * qs + i + q * s]);
                        if t == 0.0 {
                            continue;
                        }
                        let row = &mut out[o * base..(o + 1) * base];
                        for (r, hv) in row.iter_mut().zip(&herm) {
                            *r += t * hv;
                        }
                    }
                }
                out
            })
            .collect();
        let mut next = vec![0.0; occ * base * next_qs];
        for (s, col) in columns.iter().enumerate() {
            for (idx, v) in col.iter().enumerate() {
                next[idx * next_qs + s] = *v;
            }
        }
        tensor = Some(next);
        occ *= base;
        qs = next_qs;
    }
    tensor.unwrap_or_else(|| vec![1.0])
}

/// Line spectrum between two wells, checked by doubling the quadrature order.
pub fn profile_from_wells(
    initial: &QuadraticWell,
    final_: &QuadraticWell,
    regulators: &[DVector<f64>],
    n_max: usize,
    quadrature_order: Option<usize>,
) -> Result<LineSpectrum> {
    if n_max == 0 {
        return Err(Error::Argument("occupation cutoff must be at least 1".into()));
    }
    let enumerated = initial.dim().saturating_sub(regulators.len());
    if enumerated > MAX_MODES {
        return Err(Error::Argument(format!(
            "{enumerated} modes exceed the limit of {MAX_MODES} for exact profiles"
        )));
    }
    let order = quadrature_order.unwrap_or_else(|| exact_order(enumerated, n_max));
    let coarse = overlap_amplitudes(initial, final_, regulators, n_max, order)?;
    let fine = overlap_amplitudes(initial, final_, regulators, n_max, 2 * order)?;
    let worst = coarse
        .values
        .iter()
        .zip(&fine.values)
        .map(|(a, b)| (a * a - b * b).abs())
        .fold(0.0, f64::max);
    if worst > CONVERGENCE_TOLERANCE {
        return Err(Error::Convergence(format!(
            "doubling the quadrature order from {order} changed a probability by {worst:.3e}"
        )));
    }
    Ok(lines_from_amplitudes(&fine))
}

fn lines_from_amplitudes(amps: &Amplitudes) -> LineSpectrum {
    let mut raw: Vec<(f64, f64, &Vec<usize>)> = amps
        .occupations
        .iter()
        .zip(&amps.values)
        .map(|(occ, a)| {
            let e: f64 = occ.iter().zip(&amps.frequencies).map(|(&n, w)| n as f64 * w).sum();
            (e, a * a, occ)
        })
        .collect();
    let total: f64 = raw.iter().map(|r| r.1).sum();
    raw.retain(|r| r.1 >= NEGLIGIBLE_PROBABILITY);
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.2.cmp(b.2)));
    let floor = amps.frequencies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lines: Vec<Line> = Vec::new();
    for (e, p, occ) in raw {
        match lines.last_mut() {
            Some(last) if (e - last.energy).abs() <= DEGENERACY_TOLERANCE * e.abs().max(floor) => {
                last.probability += p;
                last.occupations.push(occ.clone());
            }
            _ => lines.push(Line {
                energy: e,
                probability: p,
                occupations: vec![occ.clone()],
            }),
        }
    }
    LineSpectrum {
        lines,
        truncation_tail: 1.0 - total,
        zero_point: amps.zero_point,
        frequencies: amps.frequencies.clone(),
        quadrature_order: amps.order,
    }
}

/// Profile of the transition between two molecular force fields.
///
/// Regulator modes of the final force field are integrated out.
pub fn franck_condon_profile(
    initial: &ForceField,
    final_: &ForceField,
    n_max: usize,
    quadrature_order: Option<usize>,
) -> Result<LineSpectrum> {
    check_dim(initial.dim(), final_.dim())?;
    if initial.masses() != final_.masses() {
        return Err(Error::Model("initial and final configurations have different masses".into()));
    }
    let regulators: Vec<DVector<f64>> = final_.regulators().iter().map(|r| r.direction.clone()).collect();
    profile_from_wells(
        &QuadraticWell::from_force_field(initial),
        &QuadraticWell::from_force_field(final_),
        &regulators,
        n_max,
        quadrature_order,
    )
}

/// Profile of the quench encoded in an emulator plan (energies in emulator units).
pub fn franck_condon_profile_from_plan(
    plan: &ProtocolPlan,
    n_max: usize,
    quadrature_order: Option<usize>,
) -> Result<LineSpectrum> {
    let regulators: Vec<DVector<f64>> = plan.regulators.iter().map(|r| r.direction.clone()).collect();
    profile_from_wells(
        &QuadraticWell::from_model(&plan.start_model()?)?,
        &QuadraticWell::from_model(&plan.end_model()?)?,
        &regulators,
        n_max,
        quadrature_order,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// `Σ p·E`.
    pub spectral_mean: f64,
    /// `⟨H_f⟩ − zero point − classical minimum`.
    pub moment_mean: f64,
    pub absolute: f64,
    pub relative: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the mean line energy with the Gaussian-moment prediction.
pub fn moment_check(
    spectrum: &LineSpectrum,
    initial_state: &GaussianState,
    final_model: &EmulatorModel,
) -> Result<MomentReport> {
    let energy = mean_energy(initial_state, final_model)?;
    let moment_mean = energy - spectrum.zero_point - final_model.minimum_energy()?;
    let spectral_mean = spectrum.mean_energy();
    let absolute = (spectral_mean - moment_mean).abs();
    let relative = if moment_mean.abs() > 0.0 {
        absolute / moment_mean.abs()
    } else {
        absolute
    };
    let tolerance = (1e-6f64).max(3.0 * spectrum.truncation_tail * spectrum.max_energy());
    Ok(MomentReport {
        spectral_mean,
        moment_mean,
        absolute,
        relative,
        tolerance,
        passed: absolute < tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub mass: f64,
}

/// Histogram of line probabilities on contiguous bins `[k·w, (k+1)·w)`.
pub fn binned_profile(spectrum: &LineSpectrum, bin_width: f64) -> Result<Vec<Bin>> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Argument(format!("bin width must be positive, got {bin_width}")));
    }
    let index = |e: f64| (e / bin_width + 1e-9).floor().max(0.0) as usize;
    let count = spectrum.lines.iter().map(|l| index(l.energy)).max().map_or(0, |m| m + 1);
    let mut bins: Vec<Bin> = (0..count)
        .map(|k| Bin {
            lower: k as f64 * bin_width,
            upper: (k + 1) as f64 * bin_width,
            mass: 0.0,
        })
        .collect();
    for line in &spectrum.lines {
        bins[index(line.energy)].mass += line.probability;
    }
    Ok(bins)
}
