//! SQUID-plus-inductor potential: minima, Taylor coefficients and inverse design.
//!
//! `V(φ) = −E_J cos((φ − Φ)/φ₀) + φ²/2L` with a signed Josephson energy, so
//! `L_J = φ₀²/E_J` may be negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `|L/L_J|` accepted by [`design_anharmonicity`].
pub const VALIDITY_WINDOW: f64 = 0.9;
pub const DESIGN_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquidCircuit {
    pub ej: f64,
    pub l: f64,
    pub phi_ext: f64,
    pub phi0: f64,
}

impl SquidCircuit {
    pub fn new(ej: f64, l: f64, phi_ext: f64, phi0: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Argument(format!("inductance must be positive, got {l}")));
        }
        if !(phi0.is_finite() && phi0 > 0.0) {
            return Err(Error::Argument(format!("flux quantum must be positive, got {phi0}")));
        }
        if !(ej.is_finite() && phi_ext.is_finite()) {
            return Err(Error::Argument("Josephson energy and flux must be finite".into()));
        }
        Ok(SquidCircuit { ej, l, phi_ext, phi0 })
    }

    /// Circuit with `L/L_J = ratio` and external flux `Φ`.
    pub fn from_ratio(ratio: f64, phi_ext: f64, l: f64, phi0: f64) -> Result<Self> {
        SquidCircuit::new(ratio * phi0 * phi0 / l, l, phi_ext, phi0)
    }

    /// `L_J = φ₀²/E_J`; infinite without a junction.
    pub fn lj(&self) -> f64 {
        self.phi0 * self.phi0 / self.ej
    }

    /// `L/L_J`.
    pub fn ratio(&self) -> f64 {
        self.l * self.ej / (self.phi0 * self.phi0)
    }

    pub fn potential(&self, phi: f64) -> f64 {
        -self.ej * ((phi - self.phi_ext) / self.phi0).cos() + phi * phi / (2.0 * self.l)
    }

    /// `[V, V', V'', V''', V'''']` at `phi`.
    pub fn derivatives(&self, phi: f64) -> [f64; 5] {
        let theta = (phi - self.phi_ext) / self.phi0;
        let (s, c) = theta.sin_cos();
        let e = self.ej;
        let p = self.phi0;
        [
            self.potential(phi),
            e / p * s + phi / self.l,
            e / (p * p) * c + 1.0 / self.l,
            -e / (p * p * p) * s,
            -e / (p * p * p * p) * c,
        ]
    }

    /// Leading-order minimum `Φ/(1 + L_J/L)`.
    pub fn seed(&self) -> f64 {
        let u = self.ratio();
        if u == 0.0 {
            0.0
        } else {
            self.phi_ext * u / (1.0 + u)
        }
    }
}

/// Minimum of the potential closest to the leading-order seed.
pub fn find_minimum(circuit: &SquidCircuit) -> Result<f64> {
    let u = circuit.ratio();
    let p = circuit.phi0;
    // stationary points satisfy φ = −u φ₀ sin θ
    let reach = u.abs() * p;
    if reach == 0.0 || (circuit.phi_ext == 0.0 && u.abs() < 1.0) {
        // even potential with a single well
        return Ok(0.0);
    }
    let seed = circuit.seed();
    let seed = if seed.is_finite() { seed.clamp(-reach, reach) } else { 0.0 };
    let (lo, hi) = if u.abs() < 1.0 {
        (-reach, reach)
    } else {
        ((seed - std::f64::consts::PI * p).max(-reach), (seed + std::f64::consts::PI * p).min(reach))
    };
    let slope = |x: f64| circuit.derivatives(x)[1] * circuit.l;
    let samples = if u.abs() < 1.0 { 1 } else { 4096 };
    let mut best: Option<f64> = None;
    let mut prev = lo;
    let mut prev_val = slope(lo);
    for k in 1..=samples {
        let x = lo + (hi - lo) * k as f64 / samples as f64;
        let val = slope(x);
        if prev_val <= 0.0 && val >= 0.0 {
            let root = polish(circuit, bisect(&slope, prev, x));
            if circuit.derivatives(root)[2] > 0.0
                && best.is_none_or(|b| (root - seed).abs() < (b - seed).abs())
            {
                best = Some(root);
            }
        }
        prev = x;
        prev_val = val;
    }
    best.ok_or_else(|| Error::Design {
        message: "no potential minimum in the search window".into(),
        residual: prev_val.abs(),
    })
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn polish(circuit: &SquidCircuit, mut x: f64) -> f64 {
    for _ in 0..3 {
        let d = circuit.derivatives(x);
        if d[2] <= 0.0 {
            break;
        }
        let next = x - d[1] / d[2];
        if (circuit.derivatives(next)[1]).abs() >= d[1].abs() {
            break;
        }
        x = next;
    }
    x
}

/// Coefficients `c_n = V⁽ⁿ⁾(φ_min)/n!`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorExpansion {
    pub phi_min: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl TaylorExpansion {
    /// `V'''/V'' = 3c₃/c₂`.
    pub fn cubic_ratio(&self) -> f64 {
        3.0 * self.c3 / self.c2
    }

    /// `V''''/V'' = 12c₄/c₂`.
    pub fn quartic_ratio(&self) -> f64 {
        12.0 * self.c4 / self.c2
    }
}

pub fn taylor_coefficients(circuit: &SquidCircuit) -> Result<TaylorExpansion> {
    let phi_min = find_minimum(circuit)?;
    let d = circuit.derivatives(phi_min);
    Ok(TaylorExpansion {
        phi_min,
        c2: d[2] / 2.0,
        c3: d[3] / 6.0,
        c4: d[4] / 24.0,
    })
}

/// Stiff-inductor approximations `(Φ/((1 + L_J/L)φ₀²), −(L/L_J)/φ₀²)` of the
/// cubic and quartic derivative ratios.
pub fn leading_order_ratios(circuit: &SquidCircuit) -> (f64, f64) {
    let u = circuit.ratio();
    let p2 = circuit.phi0 * circuit.phi0;
    let cubic = if u == 0.0 { 0.0 } else { circuit.phi_ext * u / ((1.0 + u) * p2) };
    (cubic, -u / p2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquidDesign {
    pub circuit: SquidCircuit,
    /// `L/L_J` and `Φ` from inverting the leading-order formulas, when defined.
    pub seed_ratio: f64,
    pub seed_phi_ext: Option<f64>,
    pub achieved_cubic: f64,
    pub achieved_quartic: f64,
    pub residual_cubic: f64,
    pub residual_quartic: f64,
}

/// Circuit whose exact derivative ratios `V'''/V''` and `V''''/V''` at the
/// minimum equal the targets.
pub fn design_anharmonicity(target_cubic: f64, target_quartic: f64, phi0: f64, l: f64) -> Result<SquidDesign> {
    if !(target_cubic.is_finite() && target_quartic.is_finite()) {
        return Err(Error::Argument("targets must be finite".into()));
    }
    SquidCircuit::new(0.0, l, 0.0, phi0)?;
    let a = target_cubic * phi0;
    let b = target_quartic * phi0 * phi0;
    if b <= -1.0 {
        return Err(Error::Design {
            message: format!("quartic target {target_quartic} needs L/L_J beyond the validity window"),
            residual: f64::INFINITY,
        });
    }
    let uc = -b / (1.0 + b);
    let us = -a / (1.0 + b);
    let magnitude = uc.hypot(us);
    let u = if uc < 0.0 { -magnitude } else { magnitude };
    if u.abs() > VALIDITY_WINDOW {
        return Err(Error::Design {
            message: format!("required |L/L_J| = {:.4} exceeds the validity window {VALIDITY_WINDOW}", u.abs()),
            residual: u.abs() - VALIDITY_WINDOW,
        });
    }
    let theta = if u == 0.0 { 0.0 } else { (us / u).atan2(uc / u) };
    let mut params = [u, -phi0 * (theta + u * theta.sin())];

    let residual = |p: [f64; 2]| -> Result<[f64; 2]> {
        let t = taylor_coefficients(&SquidCircuit::from_ratio(p[0], p[1], l, phi0)?)?;
        Ok([(t.cubic_ratio() - target_cubic) * phi0, (t.quartic_ratio() - target_quartic) * phi0 * phi0])
    };
    let mut r = residual(params)?;
    for _ in 0..20 {
        if r[0].abs().max(r[1].abs()) < 1e-14 {
            break;
        }
        let steps = [1e-7, 1e-7 * phi0];
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut plus = params;
            let mut minus = params;
            plus[k] += steps[k];
            minus[k] -= steps[k];
            let (rp, rm) = (residual(plus)?, residual(minus)?);
            for i in 0..2 {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * steps[k]);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let candidate = [
            params[0] - (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            params[1] - (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let rc = residual(candidate)?;
        if rc[0].hypot(rc[1]) >= r[0].hypot(r[1]) {
            break;
        }
        params = candidate;
        r = rc;
    }

    let circuit = SquidCircuit::from_ratio(params[0], params[1], l, phi0)?;
    let t = taylor_coefficients(&circuit)?;
    let residual_cubic = (t.cubic_ratio() - target_cubic).abs() / target_cubic.abs().max(1.0 / phi0);
    let residual_quartic = (t.quartic_ratio() - target_quartic).abs() / target_quartic.abs().max(1.0 / (phi0 * phi0));
    if residual_cubic.max(residual_quartic) > DESIGN_TOLERANCE {
        return Err(Error::Design {
            message: "refinement did not reach the target ratios".into(),
            residual: residual_cubic.max(residual_quartic),
        });
    }
    let seed_ratio = -b;
    Ok(SquidDesign {
        circuit,
        seed_ratio,
        seed_phi_ext: (seed_ratio != 0.0).then(|| a * phi0 * (1.0 + 1.0 / seed_ratio)),
        achieved_cubic: t.cubic_ratio(),
        achieved_quartic: t.quartic_ratio(),
        residual_cubic,
        residual_quartic,
    })
}

/// Samples `(φ, V(φ))` of the potential.
pub fn potential_curve(circuit: &SquidCircuit, phi_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if phi_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("flux grid must be finite".into()));
    }
    Ok(phi_grid.iter().map(|&x| (x, circuit.potential(x))).collect())
}
