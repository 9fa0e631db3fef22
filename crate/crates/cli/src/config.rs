//! Run configuration in laboratory units and its validated internal form.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use vibemu::emulator::{HardwareConstraints, KappaStrategy};
use vibemu::quench::Profile;
use vibemu::readout::Window;
use vibemu::{units, Error};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub hardware: HardwareConfig,
    pub kappa: KappaConfig,
    /// Diagonal capacitance per atomic mass unit.
    pub capacitance_pf_per_amu: f64,
    /// Regulator frequencies for zero modes, one per kernel direction.
    pub regulators_mev: Vec<f64>,
    /// 1 = force-field protocol, 2 = normal-mode protocol.
    pub protocol: u8,
    pub quench: QuenchConfig,
    pub fcp: FcpConfig,
    pub ghz: GhzConfig,
    pub squid: SquidConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub omega_min_ghz: f64,
    pub omega_max_ghz: f64,
    pub b_max_inv_nh: f64,
    pub t_cryo_mk: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaConfig {
    #[default]
    FrequencyCap,
    TemperatureMatch { t_molecule_k: f64 },
    CouplingCap { capacitance_scale_pf: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchConfig {
    /// Switch times as multiples of `1/Ω_max`.
    pub t_sw_omega: Vec<f64>,
    pub profile: Profile,
    /// Target diabaticity for the bound report; `null` skips it.
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcpConfig {
    pub n_max: usize,
    pub quadrature_order: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhzConfig {
    pub chi: f64,
    pub tau_max_ps: f64,
    pub tau_points: usize,
    pub energy_max_mev: f64,
    pub energy_points: usize,
    pub window: Window,
    /// Peaks below this fraction of the highest one are not reported.
    pub peak_threshold: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SquidConfig {
    pub l_nh: f64,
    pub curve_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            hardware: HardwareConfig::default(),
            kappa: KappaConfig::FrequencyCap,
            capacitance_pf_per_amu: 0.5,
            regulators_mev: Vec::new(),
            protocol: 1,
            quench: QuenchConfig::default(),
            fcp: FcpConfig::default(),
            ghz: GhzConfig::default(),
            squid: SquidConfig::default(),
        }
    }
}

impl Default for HardwareConfig {
    fn default() -> Self {
        HardwareConfig {
            omega_min_ghz: 0.2,
            omega_max_ghz: 10.0,
            b_max_inv_nh: 100.0,
            t_cryo_mk: 20.0,
        }
    }
}

impl Default for QuenchConfig {
    fn default() -> Self {
        QuenchConfig {
            t_sw_omega: (0..9).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect(),
            profile: Profile::Linear,
            epsilon: None,
        }
    }
}

impl Default for FcpConfig {
    fn default() -> Self {
        FcpConfig {
            n_max: 8,
            quadrature_order: None,
        }
    }
}

impl Default for GhzConfig {
    fn default() -> Self {
        GhzConfig {
            chi: 0.05,
            tau_max_ps: 50.0,
            tau_points: 4001,
            energy_max_mev: 1000.0,
            energy_points: 2001,
            window: Window::Hann,
            peak_threshold: 0.05,
        }
    }
}

impl Default for SquidConfig {
    fn default() -> Self {
        SquidConfig {
            l_nh: 1.0,
            curve_points: 201,
        }
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Argument(format!("{name} must be positive and finite, got {x}")).into());
    }
    Ok(x)
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let config = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Argument(format!("config {}: {e}", p.display())))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    /// Range checks on every field, before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "unsupported config schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ))
            .into());
        }
        self.hardware()?;
        self.kappa_strategy()?;
        positive("capacitance_pf_per_amu", self.capacitance_pf_per_amu)?;
        for &r in &self.regulators_mev {
            positive("regulator frequency", r)?;
        }
        if !matches!(self.protocol, 1 | 2) {
            return Err(Error::Argument(format!("protocol must be 1 or 2, got {}", self.protocol)).into());
        }
        if self.quench.t_sw_omega.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Argument("t_sw_omega entries must be non-negative".into()).into());
        }
        if let Some(eps) = self.quench.epsilon {
            positive("epsilon", eps)?;
        }
        if self.fcp.n_max == 0 {
            return Err(Error::Argument("fcp.n_max must be at least 1".into()).into());
        }
        if self.fcp.quadrature_order == Some(0) {
            return Err(Error::Argument("fcp.quadrature_order must be at least 1".into()).into());
        }
        let g = &self.ghz;
        if !(g.chi > 0.0 && g.chi <= vibemu::readout::CHI_LIMIT) {
            return Err(Error::Argument(format!(
                "ghz.chi must lie in (0, {}], got {}",
                vibemu::readout::CHI_LIMIT,
                g.chi
            ))
            .into());
        }
        positive("ghz.tau_max_ps", g.tau_max_ps)?;
        positive("ghz.energy_max_mev", g.energy_max_mev)?;
        if g.tau_points < 2 || g.energy_points < 2 {
            return Err(Error::Argument("ghz grids need at least two points".into()).into());
        }
        if !(0.0..1.0).contains(&g.peak_threshold) {
            return Err(Error::Argument("ghz.peak_threshold must lie in [0, 1)".into()).into());
        }
        positive("squid.l_nh", self.squid.l_nh)?;
        if self.squid.curve_points < 2 {
            return Err(Error::Argument("squid.curve_points must be at least 2".into()).into());
        }
        Ok(())
    }

    pub fn hardware(&self) -> Result<HardwareConstraints> {
        let h = &self.hardware;
        Ok(HardwareConstraints::new(
            units::ghz(h.omega_min_ghz),
            units::ghz(h.omega_max_ghz),
            units::inverse_nanohenry(h.b_max_inv_nh),
            units::millikelvin(h.t_cryo_mk),
        )?)
    }

    pub fn kappa_strategy(&self) -> Result<KappaStrategy> {
        Ok(match self.kappa {
            KappaConfig::FrequencyCap => KappaStrategy::FrequencyCap,
            KappaConfig::TemperatureMatch { t_molecule_k } => KappaStrategy::TemperatureMatch {
                t_molecule: units::kelvin(positive("kappa.t_molecule_k", t_molecule_k)?),
            },
            KappaConfig::CouplingCap { capacitance_scale_pf } => KappaStrategy::CouplingCap {
                capacitance_scale: units::picofarad(positive("kappa.capacitance_scale_pf", capacitance_scale_pf)?),
            },
        })
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        let g = &self.ghz;
        let step = units::picosecond(g.tau_max_ps) / (g.tau_points - 1) as f64;
        (0..g.tau_points).map(|k| k as f64 * step).collect()
    }

    pub fn energy_grid(&self) -> Vec<f64> {
        let g = &self.ghz;
        let step = units::mev(g.energy_max_mev) / (g.energy_points - 1) as f64;
        (0..g.energy_points).map(|k| k as f64 * step).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let partial: RunConfig = serde_json::from_str(r#"{"protocol": 2}"#).unwrap();
        assert_eq!(partial.protocol, 2);
        assert_eq!(partial.ghz.chi, 0.05);
    }

    #[test]
    fn validation_failures() {
        let mut c = RunConfig::default();
        c.ghz.chi = 0.2;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.protocol = 3;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.hardware.omega_min_ghz = 20.0;
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn grids() {
        let c = RunConfig::default();
        let tau = c.tau_grid();
        assert_eq!(tau.len(), c.ghz.tau_points);
        assert!((units::to_picosecond(tau[tau.len() - 1]) - c.ghz.tau_max_ps).abs() < 1e-9);
        assert_eq!(c.energy_grid()[0], 0.0);
    }
}
