//! Molecular harmonic force fields, normal-mode analysis and Gaussian states.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::emulator::EmulatorModel;
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Relative Frobenius tolerance on Hessian asymmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Eigenvalues of the mass-weighted Hessian down to `−NEGATIVE_TOLERANCE·‖K‖`
/// are accepted and clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// Eigenvalues below `KERNEL_THRESHOLD × λ_max` count as zero modes.
pub const KERNEL_THRESHOLD: f64 = 1e-9;

/// Which electronic configuration a force field describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Configuration {
    Initial,
    Final,
}

/// A regulator frequency added along a former zero mode.
///
/// `direction` is a unit vector in mass-weighted coordinates `M^{1/2} x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Regulator {
    pub frequency: f64,
    pub direction: DVector<f64>,
}

/// Harmonic force field of one electronic configuration:
/// `H = ½ pᵀM⁻¹p + ½ (x − v)ᵀ A (x − v)` in internal units.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceField {
    masses: DVector<f64>,
    hessian: DMatrix<f64>,
    equilibrium: DVector<f64>,
    label: Configuration,
    regulators: Vec<Regulator>,
}

impl ForceField {
    pub fn new(
        masses: DVector<f64>,
        hessian: DMatrix<f64>,
        equilibrium: DVector<f64>,
        label: Configuration,
    ) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::Model("force field has no coordinates".into()));
        }
        if hessian.nrows() != hessian.ncols() {
            return Err(Error::Model(format!(
                "hessian is {}x{}, not square",
                hessian.nrows(),
                hessian.ncols()
            )));
        }
        check_dim(n, hessian.nrows())?;
        check_dim(n, equilibrium.len())?;
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Model(format!("masses must be strictly positive, got {m}")));
        }
        if hessian.iter().chain(equilibrium.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Model("non-finite entries in force field".into()));
        }
        let asym = linalg::asymmetry(&hessian);
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::Model(format!(
                "hessian is not symmetric (relative asymmetry {asym:.3e})"
            )));
        }
        let ff = ForceField {
            masses,
            hessian: linalg::symmetrize(&hessian),
            equilibrium,
            label,
            regulators: Vec::new(),
        };
        // rejects Hessians that are negative beyond tolerance
        normal_modes(&ff)?;
        Ok(ff)
    }

    pub fn dim(&self) -> usize {
        self.masses.len()
    }
    pub fn masses(&self) -> &DVector<f64> {
        &self.masses
    }
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }
    pub fn equilibrium(&self) -> &DVector<f64> {
        &self.equilibrium
    }
    pub fn label(&self) -> Configuration {
        self.label
    }
    /// Regulators added by [`remove_null_space`].
    pub fn regulators(&self) -> &[Regulator] {
        &self.regulators
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.masses)
    }

    /// `M^{-1/2} A M^{-1/2}`.
    pub fn mass_weighted_hessian(&self) -> DMatrix<f64> {
        let inv_sqrt = self.masses.map(|m| 1.0 / m.sqrt());
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * self.hessian[(i, j)] * inv_sqrt[j])
    }

    /// Equilibrium in mass-weighted coordinates `M^{1/2} v`.
    pub fn weighted_equilibrium(&self) -> DVector<f64> {
        self.equilibrium.component_mul(&self.masses.map(f64::sqrt))
    }
}

/// Result of a normal-mode analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalModes {
    /// Ascending, non-negative angular frequencies.
    pub frequencies: Vec<f64>,
    /// Orthogonal matrix whose columns are the mass-weighted eigenvectors.
    pub modes: DMatrix<f64>,
    pub kernel_dim: usize,
}

impl NormalModes {
    pub fn max_frequency(&self) -> f64 {
        self.frequencies.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest frequency outside the kernel.
    pub fn min_nonzero_frequency(&self) -> Option<f64> {
        self.frequencies.get(self.kernel_dim).copied()
    }
}

/// Eigen-decomposition of the mass-weighted Hessian.
pub fn normal_modes(ff: &ForceField) -> Result<NormalModes> {
    let k = ff.mass_weighted_hessian();
    let scale = k.norm();
    let (values, modes) = linalg::sym_eigen(&k);
    if let Some(&worst) = values.iter().find(|&&v| v < -NEGATIVE_TOLERANCE * scale) {
        return Err(Error::Model(format!(
            "mass-weighted hessian has negative eigenvalue {worst:.6e}"
        )));
    }
    let largest = values.iter().copied().fold(0.0, f64::max);
    let kernel_dim = values
        .iter()
        .filter(|&&v| largest <= 0.0 || v < KERNEL_THRESHOLD * largest)
        .count();
    let frequencies = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(NormalModes {
        frequencies,
        modes,
        kernel_dim,
    })
}

/// Lifts the zero modes of `ff` to the regulator frequencies `lambdas`.
///
/// The rank-one updates `λ_j² ν_j ν_jᵀ` are applied to the mass-weighted
/// Hessian with an orthonormal kernel basis `ν_j`, so every nonzero
/// frequency of the input is left untouched. Residual near-zero kernel
/// eigenvalues are replaced, not shifted, so the regulator frequencies are
/// exactly `λ_j`.
pub fn remove_null_space(ff: &ForceField, lambdas: &[f64]) -> Result<ForceField> {
    let modes = normal_modes(ff)?;
    if lambdas.len() != modes.kernel_dim {
        return Err(Error::Argument(format!(
            "expected {} regulator frequencies (kernel dimension), got {}",
            modes.kernel_dim,
            lambdas.len()
        )));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Argument(format!("regulator frequencies must be positive, got {l}")));
    }
    if lambdas.is_empty() {
        return Ok(ff.clone());
    }
    let mut k = ff.mass_weighted_hessian();
    let mut regulators = ff.regulators.clone();
    for (j, &lambda) in lambdas.iter().enumerate() {
        let nu = modes.modes.column(j).into_owned();
        let residual = modes.frequencies[j].powi(2);
        k += (&nu * nu.transpose()) * (lambda * lambda - residual);
        regulators.push(Regulator {
            frequency: lambda,
            direction: nu,
        });
    }
    let sqrt_m = ff.masses.map(f64::sqrt);
    let n = ff.dim();
    let hessian = DMatrix::from_fn(n, n, |i, j| sqrt_m[i] * k[(i, j)] * sqrt_m[j]);
    Ok(ForceField {
        masses: ff.masses.clone(),
        hessian: linalg::symmetrize(&hessian),
        equilibrium: ff.equilibrium.clone(),
        label: ff.label,
        regulators,
    })
}

/// Regulator frequencies closer than 1% to a physical frequency of `ff`.
pub fn regulator_collisions(ff: &ForceField, lambdas: &[f64]) -> Result<Vec<String>> {
    let modes = normal_modes(ff)?;
    let physical = &modes.frequencies[modes.kernel_dim..];
    let mut warnings = Vec::new();
    for &lambda in lambdas {
        for &w in physical {
            if (lambda - w).abs() <= 0.01 * w {
                warnings.push(format!(
                    "regulator frequency {lambda:.6e} is within 1% of physical frequency {w:.6e}"
                ));
            }
        }
    }
    Ok(warnings)
}

/// First and second moments of a Gaussian state over `R = (X₁..X_N, P₁..P_N)`.
///
/// `second_moments` uses the anticommutator convention
/// `Γ_jk = ⟨{R_j − r_j, R_k − r_k}⟩`, so the vacuum of a unit oscillator has
/// `Γ = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub second_moments: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, second_moments: DMatrix<f64>) -> Result<Self> {
        if mean.len() % 2 != 0 {
            return Err(Error::Argument("state dimension must be even".into()));
        }
        check_dim(mean.len(), second_moments.nrows())?;
        check_dim(mean.len(), second_moments.ncols())?;
        if linalg::asymmetry(&second_moments) > 1e-10 {
            return Err(Error::Model("second-moment matrix is not symmetric".into()));
        }
        Ok(GaussianState {
            mean,
            second_moments: linalg::symmetrize(&second_moments),
        })
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    /// Smallest eigenvalue of the Hermitian matrix `Γ + iσ`; non-negative for
    /// physical states.
    pub fn uncertainty_margin(&self) -> f64 {
        let n2 = self.mean.len();
        let s = linalg::symplectic_form(self.modes());
        // real embedding of A + iB is [[A, −B], [B, A]]
        let mut big = DMatrix::zeros(2 * n2, 2 * n2);
        big.view_mut((0, 0), (n2, n2)).copy_from(&self.second_moments);
        big.view_mut((n2, n2), (n2, n2)).copy_from(&self.second_moments);
        big.view_mut((0, n2), (n2, n2)).copy_from(&(-&s));
        big.view_mut((n2, 0), (n2, n2)).copy_from(&s);
        linalg::sym_eigen(&big).0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues of `(Γσ⁻¹)²`, i.e. minus the squared symplectic
    /// eigenvalues (each twice). All equal `−1` for a pure state.
    pub fn squared_symplectic_spectrum(&self) -> Result<Vec<f64>> {
        let (sqrt, _) = linalg::sqrt_and_inv_sqrt(&self.second_moments, "second-moment matrix")?;
        let s = linalg::symplectic_form(self.modes());
        let a = &sqrt * s * &sqrt;
        let (values, _) = linalg::sym_eigen(&(&a * a.transpose()));
        Ok(values.iter().map(|v| -v).collect())
    }
}

/// Ground state of the emulator model.
pub fn ground_state(model: &EmulatorModel) -> Result<GaussianState> {
    equilibrium_state(model, 0.0)
}

/// Thermal state at `temperature` (energy units, `k_B = 1`).
pub fn thermal_state(model: &EmulatorModel, temperature: f64) -> Result<GaussianState> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::Argument(format!(
            "temperature must be non-negative, got {temperature}"
        )));
    }
    equilibrium_state(model, temperature)
}

fn equilibrium_state(model: &EmulatorModel, temperature: f64) -> Result<GaussianState> {
    let n = model.dim();
    let f = model.weighted_curvature();
    let (values, vectors) = linalg::sym_eigen(&f);
    let largest = values.iter().copied().fold(0.0, f64::max);
    if values.iter().any(|&v| v <= KERNEL_THRESHOLD * largest) || largest <= 0.0 {
        return Err(Error::Model(
            "coupling matrix is singular or indefinite; remove the null space first".into(),
        ));
    }
    let omegas: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
    let occupation_factor = |w: f64| {
        if temperature == 0.0 {
            1.0
        } else {
            1.0 / (w / (2.0 * temperature)).tanh()
        }
    };
    let xx: DMatrix<f64> = DMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| vectors[(i, k)] * vectors[(j, k)] * occupation_factor(omegas[k]) / omegas[k])
            .sum()
    });
    let pp: DMatrix<f64> = DMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| vectors[(i, k)] * vectors[(j, k)] * occupation_factor(omegas[k]) * omegas[k])
            .sum()
    });
    // stationary point: F X = C^{-1/2} V
    let inverse: DMatrix<f64> = DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| vectors[(i, k)] * vectors[(j, k)] / values[k]).sum()
    });
    let x0: DVector<f64> = inverse * model.weighted_drive();
    let mut mean = DVector::zeros(2 * n);
    mean.rows_mut(0, n).copy_from(&x0);
    GaussianState::new(mean, linalg::block_diag(&xx, &pp))
}

/// `⟨H⟩ = ¼Tr(DΓ) + ½rᵀDr − Wᵀr` for the quadratic Hamiltonian of `model`.
pub fn mean_energy(state: &GaussianState, model: &EmulatorModel) -> Result<f64> {
    check_dim(2 * model.dim(), state.mean.len())?;
    let (d, w) = model.phase_space_hamiltonian();
    let r = &state.mean;
    let trace = (&d * &state.second_moments).trace();
    Ok(0.25 * trace + 0.5 * r.dot(&(&d * r)) - w.dot(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_diagonal;

    fn ff(masses: &[f64], hessian: &[f64], eq: &[f64]) -> ForceField {
        let n = masses.len();
        ForceField::new(
            DVector::from_column_slice(masses),
            DMatrix::from_row_slice(n, n, hessian),
            DVector::from_column_slice(eq),
            Configuration::Initial,
        )
        .unwrap()
    }

    fn single(c: f64, b: f64, v: f64) -> EmulatorModel {
        EmulatorModel::new(from_diagonal(&[c]), from_diagonal(&[b]), DVector::from_element(1, v), 1.0)
            .unwrap()
    }

    #[test]
    fn two_body_spring_has_one_zero_mode() {
        let modes = normal_modes(&ff(&[1.0, 1.0], &[1.0, -1.0, -1.0, 1.0], &[0.0, 0.0])).unwrap();
        assert_eq!(modes.kernel_dim, 1);
        assert!(modes.frequencies[0].abs() < 1e-7);
        assert!((modes.frequencies[1] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn isotropic_hessian_gives_degenerate_frequencies() {
        let w: f64 = 1.7;
        let modes = normal_modes(&ff(&[1.0; 3], &[w * w, 0., 0., 0., w * w, 0., 0., 0., w * w], &[0.0; 3]))
            .unwrap();
        assert_eq!(modes.kernel_dim, 0);
        for f in modes.frequencies {
            assert!((f - w).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_weighting_divides_by_mass() {
        let modes = normal_modes(&ff(&[1.0, 4.0], &[2.0, 0.0, 0.0, 2.0], &[0.0, 0.0])).unwrap();
        assert!((modes.frequencies[0] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((modes.frequencies[1] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn invalid_force_fields_are_rejected() {
        let bad = |m: &[f64], h: &[f64]| {
            ForceField::new(
                DVector::from_column_slice(m),
                DMatrix::from_row_slice(2, 2, h),
                DVector::zeros(2),
                Configuration::Final,
            )
        };
        assert!(matches!(bad(&[1.0, 1.0], &[1.0, 0.5, 0.4, 1.0]), Err(Error::Model(_))));
        assert!(matches!(bad(&[1.0, -1.0], &[1.0, 0.0, 0.0, 1.0]), Err(Error::Model(_))));
        assert!(matches!(bad(&[1.0, 1.0], &[-1.0, 0.0, 0.0, 1.0]), Err(Error::Model(_))));
        let wrong_dim = ForceField::new(
            DVector::from_column_slice(&[1.0, 1.0]),
            DMatrix::identity(2, 2),
            DVector::zeros(3),
            Configuration::Final,
        );
        assert!(matches!(wrong_dim, Err(Error::Dimension { .. })));
    }

    #[test]
    fn rank_one_regulator_matches_hand_calculation() {
        let f = ff(&[1.0, 1.0], &[1.0, -1.0, -1.0, 1.0], &[0.0, 0.0]);
        let reg = remove_null_space(&f, &[1.0]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -0.5, 1.5]);
        assert!((reg.hessian() - expected).norm() < 1e-14);
        let modes = normal_modes(&reg).unwrap();
        assert_eq!(modes.kernel_dim, 0);
        assert!((modes.frequencies[0] - 1.0).abs() < 1e-14);
        assert!((modes.frequencies[1] - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(reg.regulators().len(), 1);
    }

    #[test]
    fn empty_kernel_is_left_alone() {
        let f = ff(&[1.0, 2.0], &[2.0, 0.3, 0.3, 1.0], &[0.1, 0.0]);
        assert_eq!(remove_null_space(&f, &[]).unwrap(), f);
        assert!(matches!(remove_null_space(&f, &[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn collisions_are_reported() {
        let f = ff(&[1.0, 1.0], &[1.0, -1.0, -1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(regulator_collisions(&f, &[1.0]).unwrap().len(), 0);
        assert_eq!(regulator_collisions(&f, &[1.41]).unwrap().len(), 1);
    }

    #[test]
    fn vacuum_moments_of_single_mode() {
        let w = 2.5;
        let state = ground_state(&single(1.0, w * w, 0.0)).unwrap();
        assert_eq!(state.mean, DVector::zeros(2));
        assert!((state.second_moments[(0, 0)] - 1.0 / w).abs() < 1e-15);
        assert!((state.second_moments[(1, 1)] - w).abs() < 1e-15);
        let e = mean_energy(&state, &single(1.0, w * w, 0.0)).unwrap();
        assert!((e - w / 2.0).abs() < 1e-14);
    }

    #[test]
    fn driven_vacuum_is_displaced() {
        let state = ground_state(&single(1.0, 1.0, 0.7)).unwrap();
        assert!((state.mean[0] - 0.7).abs() < 1e-15 && state.mean[1] == 0.0);
        assert!((state.second_moments.clone() - DMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn singular_coupling_is_rejected() {
        let m = EmulatorModel::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
            DVector::zeros(2),
            1.0,
        )
        .unwrap();
        assert!(matches!(ground_state(&m), Err(Error::Model(_))));
    }

    #[test]
    fn thermal_state_closed_forms() {
        let m = single(1.0, 1.0, 0.0);
        assert_eq!(thermal_state(&m, 0.0).unwrap(), ground_state(&m).unwrap());
        let t = thermal_state(&m, 1.0).unwrap();
        let coth = 1.0 / 0.5f64.tanh();
        assert!((t.second_moments[(0, 0)] - coth).abs() < 1e-14);
        assert!((coth - 2.1640).abs() < 1e-4);
        // Bose-Einstein occupation recovered from the moments
        let w = 1.0;
        let nbar = (t.second_moments[(0, 0)] * w + t.second_moments[(1, 1)] / w) / 4.0 - 0.5;
        assert!((nbar - 1.0 / (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!((mean_energy(&t, &m).unwrap() - 0.5 * coth).abs() < 1e-14);
        assert!(matches!(thermal_state(&m, -1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn vacuum_in_stiffer_hamiltonian() {
        let state = ground_state(&single(1.0, 1.0, 0.0)).unwrap();
        let e = mean_energy(&state, &single(1.0, 4.0, 0.0)).unwrap();
        assert!((e - 1.25).abs() < 1e-15);
        let wrong = EmulatorModel::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), DVector::zeros(2), 1.0)
            .unwrap();
        assert!(matches!(mean_energy(&state, &wrong), Err(Error::Dimension { .. })));
    }
}
