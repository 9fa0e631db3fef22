//! Unit conversions between laboratory units and the internal unit system.
//!
//! Internally every quantity is expressed in one coherent system with
//! `ħ = k_B = 1`, energy in electronvolts, length in ångström and charge in
//! units of the elementary charge. All frequencies are angular frequencies
//! and coincide numerically with energies (`E = ħω`). The derived units are
//!
//! | quantity    | internal unit         | SI value                  |
//! |-------------|-----------------------|---------------------------|
//! | time        | ħ / eV                | 6.582119569e-16 s         |
//! | mass        | ħ² / (eV Å²)          | 6.941e-30 kg              |
//! | capacitance | e / V                 | 1.602176634e-19 F         |
//! | current     | e / (ħ/eV)            | 2.434134807e-4 A          |
//! | flux        | V · (ħ/eV)            | 6.582119569e-16 Wb        |
//! | inductance  | (ħ/eV)² / e           | 2.704e-12 H               |
//! | temperature | eV / k_B              | 11604.51812 K             |
//!
//! Conversions only happen at the I/O boundary; the numerical core never
//! sees laboratory units.

/// Reduced Planck constant (J s), CODATA 2018.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K), exact.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass constant (kg), CODATA 2018.
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;
/// One electronvolt in joule, exact.
pub const ELECTRONVOLT: f64 = ELEMENTARY_CHARGE;
const ANGSTROM: f64 = 1e-10;

/// Internal time unit in seconds.
pub const TIME_UNIT: f64 = HBAR / ELECTRONVOLT;
/// Internal mass unit in kilograms.
pub const MASS_UNIT: f64 = HBAR * HBAR / (ELECTRONVOLT * ANGSTROM * ANGSTROM);
/// Internal capacitance unit in farad.
pub const CAPACITANCE_UNIT: f64 = ELEMENTARY_CHARGE / (ELECTRONVOLT / ELEMENTARY_CHARGE);
/// Internal current unit in ampere.
pub const CURRENT_UNIT: f64 = ELEMENTARY_CHARGE / TIME_UNIT;
/// Internal magnetic flux unit in weber.
pub const FLUX_UNIT: f64 = (ELECTRONVOLT / ELEMENTARY_CHARGE) * TIME_UNIT;
/// Internal inductance unit in henry.
pub const INDUCTANCE_UNIT: f64 = FLUX_UNIT / CURRENT_UNIT;
/// Internal temperature unit in kelvin.
pub const TEMPERATURE_UNIT: f64 = ELECTRONVOLT / BOLTZMANN;

/// Reduced flux quantum ħ/2e in internal units.
pub const REDUCED_FLUX_QUANTUM: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE) / FLUX_UNIT;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub fn amu(m: f64) -> f64 {
    m * ATOMIC_MASS / MASS_UNIT
}
pub fn to_amu(m: f64) -> f64 {
    m * MASS_UNIT / ATOMIC_MASS
}

/// Force constants in eV/Å² are already internal.
pub fn ev_per_angstrom2(k: f64) -> f64 {
    k
}
pub fn to_ev_per_angstrom2(k: f64) -> f64 {
    k
}

pub fn angstrom(x: f64) -> f64 {
    x
}
pub fn to_angstrom(x: f64) -> f64 {
    x
}
pub fn picometre(x: f64) -> f64 {
    x * 1e-2
}

pub fn mev(e: f64) -> f64 {
    e * 1e-3
}
pub fn to_mev(e: f64) -> f64 {
    e * 1e3
}

/// Cyclic frequency in GHz to internal angular frequency.
pub fn ghz(f: f64) -> f64 {
    TWO_PI * f * 1e9 * TIME_UNIT
}
/// Internal angular frequency to cyclic frequency in GHz.
pub fn to_ghz(omega: f64) -> f64 {
    omega / (TWO_PI * 1e9 * TIME_UNIT)
}

pub fn picofarad(c: f64) -> f64 {
    c * 1e-12 / CAPACITANCE_UNIT
}
pub fn to_picofarad(c: f64) -> f64 {
    c * CAPACITANCE_UNIT / 1e-12
}

/// Inverse inductance in nH⁻¹.
pub fn inverse_nanohenry(b: f64) -> f64 {
    b * 1e9 * INDUCTANCE_UNIT
}
pub fn to_inverse_nanohenry(b: f64) -> f64 {
    b / (1e9 * INDUCTANCE_UNIT)
}

pub fn nanohenry(l: f64) -> f64 {
    l * 1e-9 / INDUCTANCE_UNIT
}
pub fn to_nanohenry(l: f64) -> f64 {
    l * INDUCTANCE_UNIT / 1e-9
}

pub fn nanoampere(i: f64) -> f64 {
    i * 1e-9 / CURRENT_UNIT
}
pub fn to_nanoampere(i: f64) -> f64 {
    i * CURRENT_UNIT / 1e-9
}

pub fn millikelvin(t: f64) -> f64 {
    t * 1e-3 / TEMPERATURE_UNIT
}
pub fn kelvin(t: f64) -> f64 {
    t / TEMPERATURE_UNIT
}
pub fn to_millikelvin(t: f64) -> f64 {
    t * TEMPERATURE_UNIT / 1e-3
}

pub fn picosecond(t: f64) -> f64 {
    t * 1e-12 / TIME_UNIT
}
pub fn to_picosecond(t: f64) -> f64 {
    t * TIME_UNIT / 1e-12
}
pub fn to_second(t: f64) -> f64 {
    t * TIME_UNIT
}

/// Energy expressed as h·f in GHz (the usual way to quote E_J).
pub fn to_ghz_energy(e: f64) -> f64 {
    to_ghz(e)
}
pub fn ghz_energy(f: f64) -> f64 {
    ghz(f)
}
