#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vibemu::model::{Configuration, ForceField};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random symmetric positive-definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut StdRng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.gen_range(lo..hi)));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_orthogonal(rng: &mut StdRng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

pub fn random_vector(rng: &mut StdRng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

pub fn random_force_field(rng: &mut StdRng, n: usize, label: Configuration) -> ForceField {
    let masses = DVector::from_fn(n, |_, _| rng.gen_range(0.5..4.0));
    let k = random_spd(rng, n, 0.3, 3.0);
    let sqrt_m = masses.map(f64::sqrt);
    let a = DMatrix::from_fn(n, n, |i, j| sqrt_m[i] * k[(i, j)] * sqrt_m[j]);
    let a = (&a + a.transpose()) * 0.5;
    ForceField::new(masses, a, random_vector(rng, n, 0.5), label).unwrap()
}

/// A pair sharing masses, as produced by one molecule in two electronic states.
pub fn random_pair(rng: &mut StdRng, n: usize, shift: f64) -> (ForceField, ForceField) {
    let a = random_force_field(rng, n, Configuration::Initial);
    let k = random_spd(rng, n, 0.3, 3.0);
    let sqrt_m = a.masses().map(f64::sqrt);
    let h = DMatrix::from_fn(n, n, |i, j| sqrt_m[i] * k[(i, j)] * sqrt_m[j]);
    let b = ForceField::new(
        a.masses().clone(),
        (&h + h.transpose()) * 0.5,
        a.equilibrium() + random_vector(rng, n, shift),
        Configuration::Final,
    )
    .unwrap();
    (a, b)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
