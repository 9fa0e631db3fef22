//! Time evolution through the quench window and diabaticity diagnostics.
//!
//! Phase-space vectors are `R = (X, P)` with balanced coordinates
//! `X = C^{1/2}φ`, `P = C^{-1/2}q`. During the switch the Hamiltonian is
//! `H(t) = ½XᵀF(t)X + ½PᵀP − Xᵀw(t)` and `dR/dt = σ(D(t)R − W(t))`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::ProtocolPlan;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::GaussianState;

/// Largest `Ω_max·Δt` accepted for one substep.
pub const STEP_CONTROL: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 1 << 22;

/// Interpolation `λ(s)` between start (`λ = 0`) and end (`λ = 1`), `s = t/T_sw`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "levels", rename_all = "snake_case")]
pub enum Profile {
    Linear,
    /// `3s² − 2s³`.
    Smoothstep,
    /// Piecewise-constant levels over equal sub-intervals.
    Staircase(Vec<f64>),
}

impl Profile {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Profile::Linear => s,
            Profile::Smoothstep => s * s * (3.0 - 2.0 * s),
            Profile::Staircase(levels) => {
                let k = ((s * levels.len() as f64).floor() as usize).min(levels.len() - 1);
                levels[k]
            }
        }
    }

    fn pieces(&self) -> usize {
        match self {
            Profile::Staircase(levels) => levels.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Profile::Staircase(levels) = self {
            if levels.len() < 2 || levels[0] != 0.0 || *levels.last().unwrap() != 1.0 {
                return Err(Error::Argument(
                    "staircase profile needs at least two levels, starting at 0 and ending at 1".into(),
                ));
            }
            if levels.iter().any(|l| !l.is_finite()) {
                return Err(Error::Argument("staircase levels must be finite".into()));
            }
        }
        Ok(())
    }
}

/// A quench of duration `t_sw` along `profile` between the plan's configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct QuenchSchedule {
    pub plan: ProtocolPlan,
    pub t_sw: f64,
    pub profile: Profile,
    /// Richardson tolerance on the balanced propagator.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl QuenchSchedule {
    pub fn new(plan: ProtocolPlan, t_sw: f64, profile: Profile) -> Result<Self> {
        if !(t_sw.is_finite() && t_sw >= 0.0) {
            return Err(Error::Argument(format!("switch time must be non-negative, got {t_sw}")));
        }
        profile.validate()?;
        Ok(QuenchSchedule {
            plan,
            t_sw,
            profile,
            tolerance: DEFAULT_TOLERANCE,
            max_steps: DEFAULT_MAX_STEPS,
        })
    }

    pub fn linear(plan: ProtocolPlan, t_sw: f64) -> Result<Self> {
        QuenchSchedule::new(plan, t_sw, Profile::Linear)
    }
}

/// Affine flow `R(T) = U R(0) + drive`.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    pub matrix: DMatrix<f64>,
    pub drive: DVector<f64>,
    /// Substeps used by the accepted solution.
    pub steps: usize,
}

impl Propagator {
    pub fn identity(modes: usize) -> Self {
        Propagator {
            matrix: DMatrix::identity(2 * modes, 2 * modes),
            drive: DVector::zeros(2 * modes),
            steps: 0,
        }
    }

    /// `later ∘ self`.
    pub fn then(&self, later: &Propagator) -> Propagator {
        Propagator {
            matrix: &later.matrix * &self.matrix,
            drive: &later.matrix * &self.drive + &later.drive,
            steps: self.steps + later.steps,
        }
    }

    /// `‖UᵀσU − σ‖₂` of the balanced matrix, so the value is independent of the unit system.
    pub fn symplectic_defect(&self, omega: f64) -> f64 {
        linalg::symplectic_defect(&self.balanced_matrix(omega))
    }

    /// `S U S⁻¹` with `S = diag(√Ω I, I/√Ω)`.
    pub fn balanced_matrix(&self, omega: f64) -> DMatrix<f64> {
        let (s, s_inv) = balance(self.matrix.nrows() / 2, omega);
        DMatrix::from_fn(self.matrix.nrows(), self.matrix.ncols(), |i, j| {
            s[i] * self.matrix[(i, j)] * s_inv[j]
        })
    }

    pub fn balanced_drive(&self, omega: f64) -> DVector<f64> {
        let (s, _) = balance(self.matrix.nrows() / 2, omega);
        self.drive.component_mul(&s)
    }
}

fn balance(n: usize, omega: f64) -> (DVector<f64>, DVector<f64>) {
    let omega = if omega > 0.0 { omega } else { 1.0 };
    let r = omega.sqrt();
    let s = DVector::from_fn(2 * n, |i, _| if i < n { r } else { 1.0 / r });
    let s_inv = s.map(|x| 1.0 / x);
    (s, s_inv)
}

struct Path<'a> {
    f0: DMatrix<f64>,
    ff: DMatrix<f64>,
    w0: DVector<f64>,
    wf: DVector<f64>,
    profile: &'a Profile,
}

impl Path<'_> {
    fn new(schedule: &QuenchSchedule) -> Result<Path<'_>> {
        let start = schedule.plan.start_model()?;
        let end = schedule.plan.end_model()?;
        Ok(Path {
            f0: start.weighted_curvature(),
            ff: end.weighted_curvature(),
            w0: start.weighted_drive(),
            wf: end.weighted_drive(),
            profile: &schedule.profile,
        })
    }

    fn at(&self, s: f64) -> (DMatrix<f64>, DVector<f64>) {
        let l = self.profile.value(s);
        (&self.f0 * (1.0 - l) + &self.ff * l, &self.w0 * (1.0 - l) + &self.wf * l)
    }

    /// Bound on the instantaneous frequency scale `sqrt(max |eig F(t)|)`.
    fn omega_bound(&self) -> f64 {
        let radius = |m: &DMatrix<f64>| {
            let (v, _) = linalg::sym_eigen(m);
            v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
        };
        let levels: Vec<f64> = match self.profile {
            Profile::Staircase(l) => l.clone(),
            _ => vec![0.0, 1.0],
        };
        levels
            .iter()
            .map(|&l| radius(&(&self.f0 * (1.0 - l) + &self.ff * l)))
            .fold(0.0, f64::max)
            .sqrt()
    }
}

/// Exact flow of `Ẋ = P, Ṗ = −FX + w` for frozen `F`, `w` over time `h`,
/// summed as power series in `h²F`.
fn frozen_step(f: &DMatrix<f64>, w: &DVector<f64>, h: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = f.nrows();
    let x = f * (-h * h);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut s = DMatrix::<f64>::zeros(n, n);
    let mut k2 = DMatrix::<f64>::zeros(n, n);
    // term = x^k; (2k)!, (2k+1)!, (2k+2)! built incrementally
    let mut fact_even = 1.0;
    for k in 0..40 {
        let fact_odd = fact_even * (2 * k + 1) as f64;
        let fact_next = fact_odd * (2 * k + 2) as f64;
        c += &term / fact_even;
        s += &term * (h / fact_odd);
        k2 += &term * (h * h / fact_next);
        let size = term.norm() / fact_even;
        if size < 1e-18 && k > 0 {
            break;
        }
        term = &term * &x;
        fact_even = fact_next;
    }
    let mut u = DMatrix::zeros(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(&c);
    u.view_mut((0, n), (n, n)).copy_from(&s);
    u.view_mut((n, 0), (n, n)).copy_from(&(-(f * &s)));
    u.view_mut((n, n), (n, n)).copy_from(&c);
    let mut d = DVector::zeros(2 * n);
    d.rows_mut(0, n).copy_from(&(&k2 * w));
    d.rows_mut(n, n).copy_from(&(&s * w));
    (u, d)
}

fn integrate(path: &Path, t0: f64, t1: f64, t_sw: f64, steps: usize) -> Propagator {
    let n = path.f0.nrows();
    let h = (t1 - t0) / steps as f64;
    let mut out = Propagator::identity(n);
    for k in 0..steps {
        let t_mid = t0 + (k as f64 + 0.5) * h;
        let (f, w) = path.at(t_mid / t_sw);
        let (u, d) = frozen_step(&f, &w, h);
        out.drive = &u * &out.drive + d;
        out.matrix = u * &out.matrix;
    }
    out.steps = steps;
    out
}

/// Propagator over the sub-window `[t0, t1] ⊂ [0, t_sw]`.
pub fn propagate_interval(schedule: &QuenchSchedule, t0: f64, t1: f64) -> Result<Propagator> {
    let n = schedule.plan.dim();
    if !(0.0 <= t0 && t0 <= t1 && t1 <= schedule.t_sw * (1.0 + 1e-15)) {
        return Err(Error::Argument(format!(
            "interval [{t0}, {t1}] is not inside [0, {}]",
            schedule.t_sw
        )));
    }
    if t1 == t0 {
        return Ok(Propagator::identity(n));
    }
    let path = Path::new(schedule)?;
    let omega = path.omega_bound();
    let pieces = schedule.profile.pieces();
    if pieces > 1 {
        // keep substeps aligned with the staircase pieces
        let mut out = Propagator::identity(n);
        let width = schedule.t_sw / pieces as f64;
        for p in 0..pieces {
            let a = (p as f64 * width).max(t0);
            let b = ((p + 1) as f64 * width).min(t1);
            if b > a {
                out = out.then(&refine(schedule, &path, omega, a, b)?);
            }
        }
        return Ok(out);
    }
    refine(schedule, &path, omega, t0, t1)
}

fn refine(schedule: &QuenchSchedule, path: &Path, omega: f64, t0: f64, t1: f64) -> Result<Propagator> {
    let mut steps = ((omega * (t1 - t0) / STEP_CONTROL).ceil() as usize).max(1);
    let mut coarse = integrate(path, t0, t1, schedule.t_sw, steps);
    loop {
        if 2 * steps > schedule.max_steps {
            return Err(Error::Numerical(format!(
                "propagator did not reach tolerance {:.1e} within {} substeps",
                schedule.tolerance, schedule.max_steps
            )));
        }
        steps *= 2;
        let fine = integrate(path, t0, t1, schedule.t_sw, steps);
        let diff = linalg::spectral_norm(&(fine.balanced_matrix(omega) - coarse.balanced_matrix(omega)))
            + (fine.balanced_drive(omega) - coarse.balanced_drive(omega)).norm();
        if diff <= schedule.tolerance {
            return Ok(fine);
        }
        coarse = fine;
    }
}

/// `U(T_sw, 0)` and the accumulated drive.
pub fn propagate(schedule: &QuenchSchedule) -> Result<Propagator> {
    propagate_interval(schedule, 0.0, schedule.t_sw)
}

/// `r' = U r + drive`, `Γ' = U Γ Uᵀ`.
pub fn evolve_state(state: &GaussianState, propagator: &Propagator) -> Result<GaussianState> {
    check_dim(propagator.drive.len(), state.mean.len())?;
    let u = &propagator.matrix;
    GaussianState::new(
        u * &state.mean + &propagator.drive,
        linalg::symmetrize(&(u * &state.second_moments * u.transpose())),
    )
}

/// `ε · min(1/Ω_max, 2/‖C^{-1/2} v_start‖)` with the order-one constant set to 1.
pub fn diabatic_bound(plan: &ProtocolPlan, epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    let omega = plan.omega_max()?;
    let drive = plan.start_model()?.weighted_drive().norm();
    let a = if omega > 0.0 { 1.0 / omega } else { f64::INFINITY };
    let b = if drive > 0.0 { 2.0 / drive } else { f64::INFINITY };
    let bound = a.min(b);
    if !bound.is_finite() {
        return Err(Error::Argument("plan has neither frequencies nor drive".into()));
    }
    Ok(epsilon * bound)
}

/// Advisory switch-time limit `1/(c_n ‖C^{-1/2}V‖^{n/2})` for an anharmonic term of order `n`.
pub fn nonlinear_bound(c_n: f64, order: u32, drive_norm: f64) -> f64 {
    1.0 / (c_n.abs() * drive_norm.powf(order as f64 / 2.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiabaticityReport {
    pub t_sw: f64,
    /// `diabatic_bound` at `ε = 1`.
    pub t_bound: f64,
    /// `t_sw / t_bound`.
    pub epsilon_effective: f64,
    /// `‖S(U − I)S⁻¹‖₂` in balanced coordinates.
    pub norm_deviation: f64,
    pub drive_deviation: f64,
    pub magnus_converged: bool,
    pub omega_max: f64,
    /// `norm_deviation / epsilon_effective`; zero for a sudden switch.
    pub empirical_constant: f64,
    pub steps: usize,
}

pub fn diabaticity_report(schedule: &QuenchSchedule) -> Result<DiabaticityReport> {
    let prop = propagate(schedule)?;
    let omega = schedule.plan.omega_max()?;
    let n = schedule.plan.dim();
    let norm_deviation =
        linalg::spectral_norm(&(prop.balanced_matrix(omega) - DMatrix::identity(2 * n, 2 * n)));
    let drive_deviation = prop.balanced_drive(omega).norm();
    let t_bound = diabatic_bound(&schedule.plan, 1.0)?;
    let epsilon_effective = schedule.t_sw / t_bound;
    Ok(DiabaticityReport {
        t_sw: schedule.t_sw,
        t_bound,
        epsilon_effective,
        norm_deviation,
        drive_deviation,
        magnus_converged: schedule.t_sw * omega < 1.0,
        omega_max: omega,
        empirical_constant: if epsilon_effective > 0.0 {
            norm_deviation / epsilon_effective
        } else {
            0.0
        },
        steps: prop.steps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_sw: f64,
    pub t_sw_times_omega_max: f64,
    pub mean_norm_diff: f64,
    pub variance: f64,
    pub magnus_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log(mean)` against `log(t_sw)` over converged rows.
    pub slope: f64,
    pub omega_max: f64,
}

/// Evolves the complete orthonormal set of balanced initial conditions for
/// each switch time and records the spread of `‖R(T_sw) − R(0)‖`.
pub fn error_scaling_sweep(plan: &ProtocolPlan, t_sw_grid: &[f64], profile: &Profile) -> Result<SweepResult> {
    let omega = plan.omega_max()?;
    let n2 = 2 * plan.dim();
    let rows = t_sw_grid
        .par_iter()
        .map(|&t| {
            let schedule = QuenchSchedule::new(plan.clone(), t, profile.clone())?;
            let prop = propagate(&schedule)?;
            let diff = prop.balanced_matrix(omega) - DMatrix::identity(n2, n2);
            let drive = prop.balanced_drive(omega);
            let norms: Vec<f64> = (0..n2).map(|k| (diff.column(k) + &drive).norm()).collect();
            let mean = norms.iter().sum::<f64>() / n2 as f64;
            let variance = norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n2 as f64;
            Ok(SweepRow {
                t_sw: t,
                t_sw_times_omega_max: t * omega,
                mean_norm_diff: mean,
                variance,
                magnus_converged: t * omega < 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.magnus_converged && r.t_sw > 0.0 && r.mean_norm_diff > 0.0)
        .map(|r| (r.t_sw.ln(), r.mean_norm_diff.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 positive switch times with t_sw·Omega_max < 1, got {}",
            points.len()
        )));
    }
    Ok(SweepResult {
        rows,
        slope: fit_slope(&points),
        omega_max: omega,
    })
}

pub(crate) fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
