//! Mapping of molecular force fields onto resonator-array parameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::{normal_modes, ForceField, NormalModes, Regulator};
use crate::units;

/// Quadratic resonator-array Hamiltonian
/// `H = ½ qᵀC⁻¹q + ½ φᵀBφ − φᵀV`, built with frequency scale `κ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmulatorModel {
    capacitance: DMatrix<f64>,
    coupling: DMatrix<f64>,
    driving: DVector<f64>,
    kappa: f64,
    c_sqrt: DMatrix<f64>,
    c_inv_sqrt: DMatrix<f64>,
}

impl EmulatorModel {
    pub fn new(
        capacitance: DMatrix<f64>,
        coupling: DMatrix<f64>,
        driving: DVector<f64>,
        kappa: f64,
    ) -> Result<Self> {
        let n = capacitance.nrows();
        check_dim(n, capacitance.ncols())?;
        check_dim(n, coupling.nrows())?;
        check_dim(n, coupling.ncols())?;
        check_dim(n, driving.len())?;
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Argument(format!("kappa must be positive, got {kappa}")));
        }
        if linalg::asymmetry(&capacitance) > 1e-12 {
            return Err(Error::Model("capacitance matrix is not symmetric".into()));
        }
        if linalg::asymmetry(&coupling) > 1e-12 {
            return Err(Error::Model("coupling matrix is not symmetric".into()));
        }
        let capacitance = linalg::symmetrize(&capacitance);
        let (c_sqrt, c_inv_sqrt) = linalg::sqrt_and_inv_sqrt(&capacitance, "capacitance matrix")?;
        Ok(EmulatorModel {
            capacitance,
            coupling: linalg::symmetrize(&coupling),
            driving,
            kappa,
            c_sqrt,
            c_inv_sqrt,
        })
    }

    /// The molecule itself read as an emulator: `C = M`, `B = A`, `V = Av`, `κ = 1`.
    pub fn from_force_field(ff: &ForceField) -> Result<Self> {
        EmulatorModel::new(
            ff.mass_matrix(),
            ff.hessian().clone(),
            ff.hessian() * ff.equilibrium(),
            1.0,
        )
    }

    pub fn dim(&self) -> usize {
        self.capacitance.nrows()
    }
    pub fn capacitance(&self) -> &DMatrix<f64> {
        &self.capacitance
    }
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }
    pub fn driving(&self) -> &DVector<f64> {
        &self.driving
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn capacitance_sqrt(&self) -> &DMatrix<f64> {
        &self.c_sqrt
    }
    pub fn capacitance_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.c_inv_sqrt
    }

    /// `F = C^{-1/2} B C^{-1/2}`, the curvature in balanced coordinates `X = C^{1/2}φ`.
    pub fn weighted_curvature(&self) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.c_inv_sqrt * &self.coupling * &self.c_inv_sqrt))
    }

    /// `C^{-1/2} V`.
    pub fn weighted_drive(&self) -> DVector<f64> {
        &self.c_inv_sqrt * &self.driving
    }

    /// Ascending eigenfrequencies of the array.
    pub fn frequencies(&self) -> Vec<f64> {
        let (values, _) = linalg::sym_eigen(&self.weighted_curvature());
        values.iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// `(D, W)` with `H = ½RᵀDR − WᵀR` over `R = (X, P)`.
    pub fn phase_space_hamiltonian(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.dim();
        let d = linalg::block_diag(&self.weighted_curvature(), &DMatrix::identity(n, n));
        let mut w = DVector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(&self.weighted_drive());
        (d, w)
    }

    /// Classical minimum `−½VᵀB⁻¹V` of the potential.
    pub fn minimum_energy(&self) -> Result<f64> {
        let chol = self
            .coupling
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Model("coupling matrix is not positive definite".into()))?;
        Ok(-0.5 * self.driving.dot(&chol.solve(&self.driving)))
    }
}

/// Frequency window and limits of the resonator hardware (internal units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareConstraints {
    pub omega_min: f64,
    pub omega_max: f64,
    pub b_max: f64,
    pub t_cryo: f64,
}

impl HardwareConstraints {
    pub fn new(omega_min: f64, omega_max: f64, b_max: f64, t_cryo: f64) -> Result<Self> {
        let hw = HardwareConstraints {
            omega_min,
            omega_max,
            b_max,
            t_cryo,
        };
        hw.validate()?;
        Ok(hw)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega_min, self.omega_max, self.b_max, self.t_cryo];
        if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Argument("hardware constraints must be positive and finite".into()));
        }
        if self.omega_min >= self.omega_max {
            return Err(Error::Argument(format!(
                "hardware window is empty: omega_min {} >= omega_max {}",
                self.omega_min, self.omega_max
            )));
        }
        Ok(())
    }
}

impl Default for HardwareConstraints {
    /// 0.2–10 GHz resonators, 100 nH⁻¹ couplers, 20 mK cryostat.
    fn default() -> Self {
        HardwareConstraints {
            omega_min: units::ghz(0.2),
            omega_max: units::ghz(10.0),
            b_max: units::inverse_nanohenry(100.0),
            t_cryo: units::millikelvin(20.0),
        }
    }
}

/// How the global frequency scale `κ` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaStrategy {
    /// Highest molecular frequency lands on `omega_max`.
    FrequencyCap,
    /// Cryostat occupation matches a molecular temperature: `κ = T_cryo / T_molecule`.
    TemperatureMatch { t_molecule: f64 },
    /// Largest coupling `b_max` on a reference capacitance sets the frequency cap.
    CouplingCap { capacitance_scale: f64 },
}

/// Chooses `κ` for a pair of configurations and checks the rescaled
/// spectrum against the hardware window.
pub fn choose_kappa(
    initial: &NormalModes,
    final_: &NormalModes,
    hw: &HardwareConstraints,
    strategy: KappaStrategy,
) -> Result<f64> {
    hw.validate()?;
    let all = initial.frequencies.iter().chain(final_.frequencies.iter());
    let w_max = all.clone().copied().fold(0.0, f64::max);
    let w_min = all.copied().fold(f64::INFINITY, f64::min);
    if !(w_max > 0.0) {
        return Err(Error::Argument("molecular spectrum has no positive frequency".into()));
    }
    let window = hw.omega_max / hw.omega_min;
    if !(w_min > 0.0) {
        return Err(Error::Constraint(
            "dynamical range is infinite (zero frequency present); remove the null space first".into(),
        ));
    }
    let range = w_max / w_min;
    if range > window {
        return Err(Error::Constraint(format!(
            "dynamical range violated: molecular omega_max/omega_min = {range:.4} exceeds hardware \
             Omega_max/Omega_min = {window:.4}"
        )));
    }
    let kappa = match strategy {
        KappaStrategy::FrequencyCap => hw.omega_max / w_max,
        KappaStrategy::TemperatureMatch { t_molecule } => {
            if !(t_molecule.is_finite() && t_molecule > 0.0) {
                return Err(Error::Argument("molecular temperature must be positive".into()));
            }
            hw.t_cryo / t_molecule
        }
        KappaStrategy::CouplingCap { capacitance_scale } => {
            if !(capacitance_scale.is_finite() && capacitance_scale > 0.0) {
                return Err(Error::Argument("capacitance scale must be positive".into()));
            }
            (hw.b_max / capacitance_scale).sqrt() / w_max
        }
    };
    let slack = 1e-12;
    if kappa * w_max > hw.omega_max * (1.0 + slack) || kappa * w_min < hw.omega_min * (1.0 - slack) {
        return Err(Error::Constraint(format!(
            "rescaled spectrum [{:.6e}, {:.6e}] leaves the hardware window [{:.6e}, {:.6e}]",
            kappa * w_min,
            kappa * w_max,
            hw.omega_min,
            hw.omega_max
        )));
    }
    Ok(kappa)
}

/// `B = κ² C^{1/2}M^{-1/2}AM^{-1/2}C^{1/2}`, `V = κ^{3/2} C^{1/2}M^{-1/2}A v`.
pub fn rescale(ff: &ForceField, capacitance: &DMatrix<f64>, kappa: f64) -> Result<EmulatorModel> {
    check_dim(ff.dim(), capacitance.nrows())?;
    check_dim(ff.dim(), capacitance.ncols())?;
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::Argument(format!("kappa must be positive, got {kappa}")));
    }
    if linalg::asymmetry(capacitance) > 1e-12 {
        return Err(Error::Model("capacitance matrix is not symmetric".into()));
    }
    let (c_sqrt, _) = linalg::sqrt_and_inv_sqrt(capacitance, "capacitance matrix")?;
    let inv_sqrt_m = DMatrix::from_diagonal(&ff.masses().map(|m| 1.0 / m.sqrt()));
    let left = &c_sqrt * &inv_sqrt_m;
    let coupling = linalg::symmetrize(&(&left * ff.hessian() * left.transpose())) * kappa.powi(2);
    let driving = (&left * ff.hessian() * ff.equilibrium()) * kappa.powf(1.5);
    EmulatorModel::new(capacitance.clone(), coupling, driving, kappa)
}

/// Capacitance rule `C_jj = pf_per_amu · m_j` (0.5 pF per amu by default).
pub fn default_capacitance(masses: &DVector<f64>, pf_per_amu: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&masses.map(|m| units::picofarad(pf_per_amu * units::to_amu(m))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolMode {
    /// Protocol 1: couplings follow the force field directly.
    ForceField,
    /// Protocol 2: final configuration diagonal, initial one rotated.
    NormalMode,
}

/// Start and end parameters of a quench, in emulator variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolPlan {
    pub mode: ProtocolMode,
    pub capacitance: DMatrix<f64>,
    pub kappa: f64,
    pub b_start: DMatrix<f64>,
    pub v_start: DVector<f64>,
    pub b_end: DMatrix<f64>,
    pub v_end: DVector<f64>,
    /// Rotation applied to the balanced coordinates (normal-mode protocol only).
    pub basis: Option<DMatrix<f64>>,
    /// Regulators of the final configuration, as unit vectors in balanced coordinates.
    pub regulators: Vec<Regulator>,
    pub warnings: Vec<String>,
}

impl ProtocolPlan {
    pub fn dim(&self) -> usize {
        self.capacitance.nrows()
    }

    pub fn start_model(&self) -> Result<EmulatorModel> {
        EmulatorModel::new(self.capacitance.clone(), self.b_start.clone(), self.v_start.clone(), self.kappa)
    }

    pub fn end_model(&self) -> Result<EmulatorModel> {
        EmulatorModel::new(self.capacitance.clone(), self.b_end.clone(), self.v_end.clone(), self.kappa)
    }

    /// Largest eigenfrequency of either configuration.
    pub fn omega_max(&self) -> Result<f64> {
        let a = self.start_model()?.frequencies();
        let b = self.end_model()?.frequencies();
        Ok(a.iter().chain(b.iter()).copied().fold(0.0, f64::max))
    }
}

fn require_regular(ff: &ForceField, which: &str) -> Result<NormalModes> {
    let modes = normal_modes(ff)?;
    if modes.kernel_dim > 0 {
        return Err(Error::Model(format!(
            "{which} force field has {} zero modes; remove the null space first",
            modes.kernel_dim
        )));
    }
    Ok(modes)
}

/// Protocol 1: start at the initial couplings with the drive that centres the
/// final minimum at the origin, then switch to the undriven final couplings.
pub fn plan_protocol1(
    ff0: &ForceField,
    fff: &ForceField,
    hw: &HardwareConstraints,
    capacitance: &DMatrix<f64>,
    strategy: KappaStrategy,
) -> Result<ProtocolPlan> {
    check_dim(ff0.dim(), fff.dim())?;
    if ff0.masses() != fff.masses() {
        return Err(Error::Model("initial and final configurations have different masses".into()));
    }
    let modes0 = require_regular(ff0, "initial")?;
    let modesf = require_regular(fff, "final")?;
    let kappa = choose_kappa(&modes0, &modesf, hw, strategy)?;
    let start = rescale(ff0, capacitance, kappa)?;
    let end = rescale(fff, capacitance, kappa)?;
    let end_chol = end
        .coupling()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("final coupling matrix is not positive definite".into()))?;
    let v_start = start.driving() - start.coupling() * end_chol.solve(end.driving());

    // mass-weighted directions M^{1/2}x map to √κ·X, so unit vectors carry over
    let regulators = fff.regulators().to_vec();
    let mut warnings = Vec::new();
    if linalg::max_off_diagonal(capacitance) > 0.0 {
        warnings.push(
            "capacitance matrix has mutual terms; final resonators are decoupled only in balanced coordinates"
                .to_string(),
        );
    }
    Ok(ProtocolPlan {
        mode: ProtocolMode::ForceField,
        capacitance: start.capacitance().clone(),
        kappa,
        b_start: start.coupling().clone(),
        v_start,
        b_end: end.coupling().clone(),
        v_end: DVector::zeros(ff0.dim()),
        basis: None,
        regulators,
        warnings,
    })
}

/// Protocol 2: diagonalise the final configuration and express the initial
/// one in its normal-mode basis.
pub fn plan_protocol2(
    ff0: &ForceField,
    fff: &ForceField,
    hw: &HardwareConstraints,
    capacitance: &DMatrix<f64>,
    strategy: KappaStrategy,
) -> Result<ProtocolPlan> {
    let p1 = plan_protocol1(ff0, fff, hw, capacitance, strategy)?;
    let end = p1.end_model()?;
    let c_sqrt = end.capacitance_sqrt().clone();
    let c_inv_sqrt = end.capacitance_inv_sqrt().clone();
    let (values, o) = linalg::sym_eigen(&end.weighted_curvature());
    let f0 = p1.start_model()?.weighted_curvature();

    let b_start = linalg::symmetrize(&(&c_sqrt * o.transpose() * f0 * &o * &c_sqrt));
    let b_end = linalg::symmetrize(&(&c_sqrt * DMatrix::from_diagonal(&values) * &c_sqrt));
    let v_start = &c_sqrt * o.transpose() * &c_inv_sqrt * &p1.v_start;
    let regulators = p1
        .regulators
        .iter()
        .map(|r| Regulator {
            frequency: r.frequency,
            direction: o.transpose() * &r.direction,
        })
        .collect();
    Ok(ProtocolPlan {
        mode: ProtocolMode::NormalMode,
        b_start,
        v_start,
        b_end,
        basis: Some(o),
        regulators,
        ..p1
    })
}

/// Conversion of observables between molecular `(x, p)` and emulator `(φ, q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableMap {
    kappa: f64,
    sqrt_m: DVector<f64>,
    c_sqrt: DMatrix<f64>,
    c_inv_sqrt: DMatrix<f64>,
}

impl ObservableMap {
    pub fn new(masses: &DVector<f64>, capacitance: &DMatrix<f64>, kappa: f64) -> Result<Self> {
        check_dim(masses.len(), capacitance.nrows())?;
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Argument(format!("kappa must be positive, got {kappa}")));
        }
        let (c_sqrt, c_inv_sqrt) = linalg::sqrt_and_inv_sqrt(capacitance, "capacitance matrix")?;
        Ok(ObservableMap {
            kappa,
            sqrt_m: masses.map(f64::sqrt),
            c_sqrt,
            c_inv_sqrt,
        })
    }

    /// `φ = κ^{-1/2} C^{-1/2} M^{1/2} x`.
    pub fn position_to_flux(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c_inv_sqrt * x.component_mul(&self.sqrt_m) / self.kappa.sqrt()
    }

    /// `x = κ^{1/2} M^{-1/2} C^{1/2} φ`.
    pub fn flux_to_position(&self, phi: &DVector<f64>) -> DVector<f64> {
        (&self.c_sqrt * phi).component_div(&self.sqrt_m) * self.kappa.sqrt()
    }

    /// `q = κ^{1/2} C^{1/2} M^{-1/2} p`.
    pub fn momentum_to_charge(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.c_sqrt * p.component_div(&self.sqrt_m) * self.kappa.sqrt()
    }

    /// `p = κ^{-1/2} M^{1/2} C^{-1/2} q`.
    pub fn charge_to_momentum(&self, q: &DVector<f64>) -> DVector<f64> {
        (&self.c_inv_sqrt * q).component_mul(&self.sqrt_m) / self.kappa.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub element: String,
    pub quantity: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRange {
    pub quantity: String,
    pub min: f64,
    pub max: f64,
    pub unit: String,
}

/// Per-element circuit parameters in laboratory units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitTable {
    pub rows: Vec<TableRow>,
    pub ranges: Vec<TableRange>,
}

impl CircuitTable {
    pub fn range(&self, quantity: &str) -> Option<&TableRange> {
        self.ranges.iter().find(|r| r.quantity == quantity)
    }
}

/// Tabulates capacitances (pF), couplings (nH⁻¹), frequencies `Ω/2π` (GHz)
/// and drive shifts `|V⁽⁰⁾ − V⁽ᶠ⁾|` (nA) of a start/end model pair.
pub fn circuit_table(start: &EmulatorModel, end: &EmulatorModel) -> Result<CircuitTable> {
    check_dim(start.dim(), end.dim())?;
    if (start.capacitance() - end.capacitance()).norm() > 1e-12 * start.capacitance().norm()
        || (start.kappa() - end.kappa()).abs() > 1e-12 * start.kappa()
    {
        return Err(Error::Argument("models must share capacitance and kappa".into()));
    }
    let n = start.dim();
    let mut rows = Vec::new();
    let mut push = |element: String, quantity: &str, value: f64, unit: &str| {
        rows.push(TableRow {
            element,
            quantity: quantity.to_string(),
            value,
            unit: unit.to_string(),
        })
    };
    for i in 0..n {
        push(format!("C{}", i + 1), "capacitance", units::to_picofarad(start.capacitance()[(i, i)]), "pF");
        for j in i + 1..n {
            let c = start.capacitance()[(i, j)];
            if c != 0.0 {
                push(format!("C{}_{}", i + 1, j + 1), "mutual_capacitance", units::to_picofarad(c), "pF");
            }
        }
    }
    for (model, quantity) in [(start, "coupling_initial"), (end, "coupling_final")] {
        for i in 0..n {
            for j in i..n {
                let b = model.coupling()[(i, j)];
                if i == j || b != 0.0 {
                    push(format!("B{}_{}", i + 1, j + 1), quantity, units::to_inverse_nanohenry(b), "nH^-1");
                }
            }
        }
    }
    for (model, quantity) in [(start, "frequency_initial"), (end, "frequency_final")] {
        for (k, w) in model.frequencies().iter().enumerate() {
            push(format!("mode{}", k + 1), quantity, units::to_ghz(*w), "GHz");
        }
    }
    let shift = start.driving() - end.driving();
    for i in 0..n {
        push(format!("V{}", i + 1), "drive_shift", units::to_nanoampere(shift[i].abs()), "nA");
    }

    let span = |quantity: &str, unit: &str, values: Vec<f64>| TableRange {
        quantity: quantity.to_string(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        unit: unit.to_string(),
    };
    let freqs: Vec<f64> = start
        .frequencies()
        .into_iter()
        .chain(end.frequencies())
        .map(units::to_ghz)
        .collect();
    let couplings: Vec<f64> = [start, end]
        .iter()
        .flat_map(|m| m.coupling().iter().copied().filter(|b| *b != 0.0).collect::<Vec<_>>())
        .map(|b| units::to_inverse_nanohenry(b.abs()))
        .collect();
    let ranges = vec![
        span(
            "capacitance",
            "pF",
            (0..n).map(|i| units::to_picofarad(start.capacitance()[(i, i)])).collect(),
        ),
        span("coupling", "nH^-1", if couplings.is_empty() { vec![0.0] } else { couplings }),
        span("frequency", "GHz", freqs),
        span("drive_shift", "nA", shift.iter().map(|v| units::to_nanoampere(v.abs())).collect()),
    ];
    Ok(CircuitTable { rows, ranges })
}
