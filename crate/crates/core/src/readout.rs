//! Measurement models: dispersive photon-number resolution and GHZ-phase
//! spectroscopy with cosine-transform inversion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::LineSpectrum;

/// Largest `|g/Δ|` treated as dispersive.
pub const DISPERSIVE_LIMIT: f64 = 0.3;
/// Largest coupling fraction `χ`.
pub const CHI_LIMIT: f64 = 0.1;
/// Photon numbers below this trigger a warning (typical vibrational occupations reach about 3).
pub const PHOTON_WARNING: usize = 3;

/// Qubits dispersively coupled to each resonator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveSetup {
    pub g: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Bare qubit splitting per mode.
    pub omega_q: Vec<f64>,
    /// Readout cavity frequency.
    pub omega_r: f64,
}

impl DispersiveSetup {
    pub fn new(g: Vec<f64>, delta: Vec<f64>, gamma: Vec<f64>, omega_q: Vec<f64>, omega_r: f64) -> Result<Self> {
        let n = g.len();
        if delta.len() != n || gamma.len() != n || omega_q.len() != n {
            return Err(Error::Argument("dispersive setup vectors differ in length".into()));
        }
        for j in 0..n {
            if !(delta[j] != 0.0 && (g[j] / delta[j]).abs() < DISPERSIVE_LIMIT) {
                return Err(Error::Argument(format!(
                    "mode {j}: |g/delta| must stay below {DISPERSIVE_LIMIT}"
                )));
            }
            if !(gamma[j].is_finite() && gamma[j] > 0.0) {
                return Err(Error::Argument(format!("mode {j}: decay rate must be positive")));
            }
        }
        Ok(DispersiveSetup {
            g,
            delta,
            gamma,
            omega_q,
            omega_r,
        })
    }

    pub fn modes(&self) -> usize {
        self.g.len()
    }

    /// `ξ₀ = g²/Δ`.
    pub fn stark_shift(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        Ok(self.g[mode] * self.g[mode] / self.delta[mode])
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes() {
            return Err(Error::Argument(format!("mode {mode} out of range")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveShift {
    /// `Ω_n = Ω₀ + (2n + 1)g²/Δ`.
    pub qubit_splitting: f64,
    /// `ξ₀ = g²/Δ`.
    pub readout_shift: f64,
    /// Cavity frequency when the qubit is driven at `Ω_n` (excited).
    pub readout_driven: f64,
    /// Cavity frequency when the drive is off resonance.
    pub readout_idle: f64,
}

pub fn dispersive_shift(setup: &DispersiveSetup, mode: usize, n: usize) -> Result<DispersiveShift> {
    let xi = setup.stark_shift(mode)?;
    Ok(DispersiveShift {
        qubit_splitting: setup.omega_q[mode] + (2 * n + 1) as f64 * xi,
        readout_shift: xi,
        readout_driven: setup.omega_r,
        readout_idle: setup.omega_r - xi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonResolution {
    pub count: usize,
    pub warning: Option<String>,
}

/// `⌊2ξ₀/γ⌋`.
pub fn resolvable_photons(setup: &DispersiveSetup, mode: usize) -> Result<PhotonResolution> {
    let xi = setup.stark_shift(mode)?;
    let count = (2.0 * xi.abs() / setup.gamma[mode]).floor() as usize;
    let warning = (count < PHOTON_WARNING).then(|| {
        format!("mode {mode} resolves only {count} photons, fewer than the {PHOTON_WARNING} expected in vibrational spectra")
    });
    Ok(PhotonResolution { count, warning })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// `½(1 + cos(πτ/τ_max))`.
    Hann,
    Rectangular,
}

impl Window {
    fn weight(self, tau: f64, tau_max: f64) -> f64 {
        match self {
            Window::Hann => 0.5 * (1.0 + (std::f64::consts::PI * tau / tau_max).cos()),
            Window::Rectangular => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzSetup {
    pub chi: f64,
    pub tau_grid: Vec<f64>,
    pub energy_grid: Vec<f64>,
    pub window: Window,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|p| p[0] < p[1])
}

impl GhzSetup {
    pub fn new(chi: f64, tau_grid: Vec<f64>, energy_grid: Vec<f64>, window: Window) -> Result<Self> {
        if !(chi > 0.0 && chi <= CHI_LIMIT) {
            return Err(Error::Argument(format!("chi must lie in (0, {CHI_LIMIT}], got {chi}")));
        }
        if tau_grid.len() < 2 || !strictly_increasing(&tau_grid) {
            return Err(Error::Argument("tau grid must be strictly increasing with at least two points".into()));
        }
        if energy_grid.is_empty() || !strictly_increasing(&energy_grid) {
            return Err(Error::Argument("energy grid must be strictly increasing".into()));
        }
        Ok(GhzSetup {
            chi,
            tau_grid,
            energy_grid,
            window,
        })
    }

    /// Uniform grid `0, h, …, (n−1)h`.
    pub fn uniform(n: usize, step: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * step).collect()
    }
}

/// `P₁(τ) = Σ p_k sin²(χE_kτ)`.
pub fn ghz_forward(spectrum: &LineSpectrum, setup: &GhzSetup) -> Result<Vec<f64>> {
    if spectrum.truncation_tail.abs() >= 1e-6 {
        return Err(Error::Argument(format!(
            "spectrum is not normalised (tail {:.3e})",
            spectrum.truncation_tail
        )));
    }
    Ok(setup
        .tau_grid
        .par_iter()
        .map(|&tau| {
            spectrum
                .lines
                .iter()
                .map(|l| l.probability * (setup.chi * l.energy * tau).sin().powi(2))
                .sum()
        })
        .collect())
}

/// Windowed cosine transform `P(E) = −(8χ/π) ∫ w(τ) cos(2χEτ)(P₁(τ) − ⟨P₁⟩) dτ`
/// by the trapezoid rule on a uniform grid.
pub fn ghz_reconstruct(p1: &[f64], setup: &GhzSetup) -> Result<Vec<f64>> {
    let tau = &setup.tau_grid;
    if p1.len() != tau.len() {
        return Err(Error::Dimension {
            expected: tau.len(),
            actual: p1.len(),
        });
    }
    if p1.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("excitation probabilities must be finite".into()));
    }
    let step = (tau[tau.len() - 1] - tau[0]) / (tau.len() - 1) as f64;
    if tau.windows(2).any(|p| ((p[1] - p[0]) - step).abs() > 1e-9 * step) {
        return Err(Error::Argument("tau grid must be uniform".into()));
    }
    let mean = p1.iter().sum::<f64>() / p1.len() as f64;
    let tau_max = tau[tau.len() - 1];
    let last = tau.len() - 1;
    let weighted: Vec<f64> = (0..tau.len())
        .map(|i| {
            let trap = if i == 0 || i == last { 0.5 * step } else { step };
            trap * setup.window.weight(tau[i], tau_max) * (p1[i] - mean)
        })
        .collect();
    let prefactor = -8.0 * setup.chi / std::f64::consts::PI;
    Ok(setup
        .energy_grid
        .par_iter()
        .map(|&e| {
            let s: f64 = weighted
                .iter()
                .zip(tau)
                .map(|(w, t)| w * (2.0 * setup.chi * e * t).cos())
                .sum();
            prefactor * s
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Parabolic interpolation of the maximum.
    pub center: f64,
    pub height: f64,
    /// Trapezoid integral between the neighbouring minima.
    pub mass: f64,
}

/// Local maxima higher than `min_relative_height` times the global maximum.
pub fn find_peaks(energy: &[f64], density: &[f64], min_relative_height: f64) -> Result<Vec<Peak>> {
    if energy.len() != density.len() {
        return Err(Error::Dimension {
            expected: energy.len(),
            actual: density.len(),
        });
    }
    let n = density.len();
    let top = density.iter().copied().fold(0.0, f64::max);
    if n < 3 || top <= 0.0 {
        return Ok(vec![]);
    }
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(density[i] > density[i - 1] && density[i] >= density[i + 1]) || density[i] < min_relative_height * top {
            continue;
        }
        let mut lo = i;
        while lo > 0 && density[lo - 1] < density[lo] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && density[hi + 1] < density[hi] {
            hi += 1;
        }
        let mass: f64 = (lo..hi)
            .map(|k| 0.5 * (density[k] + density[k + 1]) * (energy[k + 1] - energy[k]))
            .sum();
        let (a, b, c) = (density[i - 1], density[i], density[i + 1]);
        let curvature = a - 2.0 * b + c;
        let offset = if curvature < 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
        let h = 0.5 * (energy[i + 1] - energy[i - 1]);
        peaks.push(Peak {
            center: energy[i] + offset.clamp(-1.0, 1.0) * h,
            height: b,
            mass,
        });
    }
    Ok(peaks)
}
