use proptest::prelude::*;
use std::f64::consts::PI;
use vibemu::readout::*;
use vibemu::spectrum::LineSpectrum;

const CHI: f64 = 0.05;

fn setup(tau_max: f64, n_tau: usize, e_max: f64, n_e: usize) -> GhzSetup {
    let tau = GhzSetup::uniform(n_tau, tau_max / (n_tau - 1) as f64);
    let energy = GhzSetup::uniform(n_e, e_max / (n_e - 1) as f64);
    GhzSetup::new(CHI, tau, energy, Window::Hann).unwrap()
}

fn reconstruct(lines: &[(f64, f64)], s: &GhzSetup) -> Vec<f64> {
    let p1 = ghz_forward(&LineSpectrum::from_lines(lines), s).unwrap();
    ghz_reconstruct(&p1, s).unwrap()
}

fn full_width_half_max(energy: &[f64], density: &[f64]) -> f64 {
    let (imax, &top) = density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let half = 0.5 * top;
    let crossing = |range: Box<dyn Iterator<Item = usize>>, step: isize| {
        for i in range {
            let j = (i as isize + step) as usize;
            if density[j] < half {
                let f = (density[i] - half) / (density[i] - density[j]);
                return energy[i] + f * (energy[j] - energy[i]);
            }
        }
        panic!("peak does not fall to half maximum");
    };
    let right = crossing(Box::new(imax..density.len() - 1), 1);
    let left = crossing(Box::new((1..=imax).rev()), -1);
    right - left
}

#[test]
fn single_line_is_recovered() {
    let e0 = 1.0;
    let tau_max = 40.0 * PI / (CHI * e0);
    let s = setup(tau_max, 4001, 2.0, 2001);
    let density = reconstruct(&[(e0, 1.0)], &s);
    let peaks = find_peaks(&s.energy_grid, &density, 0.2).unwrap();
    assert_eq!(peaks.len(), 1, "{peaks:?}");
    let step = s.energy_grid[1] - s.energy_grid[0];
    assert!((peaks[0].center - e0).abs() < step, "{}", peaks[0].center);
    assert!((peaks[0].mass - 1.0).abs() < 0.05, "{}", peaks[0].mass);
}

#[test]
fn two_lines_are_separated() {
    let tau_max = 40.0 * PI / CHI;
    let s = setup(tau_max, 4001, 2.0, 2001);
    let density = reconstruct(&[(0.8, 0.6), (1.2, 0.4)], &s);
    let peaks = find_peaks(&s.energy_grid, &density, 0.2).unwrap();
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    assert!((peaks[0].center - 0.8).abs() < 2e-3 && (peaks[1].center - 1.2).abs() < 2e-3);
    assert!((peaks[0].mass - 0.6).abs() < 0.05 && (peaks[1].mass - 0.4).abs() < 0.05);
}

#[test]
fn round_trip_mass() {
    let s = setup(60.0 * PI / CHI, 6001, 3.0, 3001);
    let lines = [(0.5, 0.3), (1.1, 0.45), (2.0, 0.25)];
    let density = reconstruct(&lines, &s);
    let step = s.energy_grid[1] - s.energy_grid[0];
    let mass: f64 = density.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum();
    assert!((0.9..=1.1).contains(&mass), "{mass}");
}

#[test]
fn resolution_scales_inversely_with_window() {
    let mut points = Vec::new();
    for k in 0..4 {
        let tau_max = 20.0 * PI / CHI * 2f64.powi(k);
        let s = setup(tau_max, 1000 * 2usize.pow(k as u32) + 1, 2.0, 8001);
        let density = reconstruct(&[(1.0, 1.0)], &s);
        points.push((tau_max.ln(), full_width_half_max(&s.energy_grid, &density).ln()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() <= 0.1, "{slope}");
}

fn random_lines() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..3.0, 0.01f64..1.0), 1..6).prop_map(|v| {
        let total: f64 = v.iter().map(|l| l.1).sum();
        v.into_iter().map(|(e, w)| (e, w / total)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_a_probability(lines in random_lines(), chi in 0.001f64..0.1) {
        let s = GhzSetup::new(chi, GhzSetup::uniform(200, 0.37), vec![1.0], Window::Hann).unwrap();
        let p = ghz_forward(&LineSpectrum::from_lines(&lines), &s).unwrap();
        prop_assert!(p.iter().all(|&x| (-1e-15..=1.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn reconstruction_is_linear(
        p in prop::collection::vec(0.0f64..1.0, 64),
        q in prop::collection::vec(0.0f64..1.0, 64),
        a in -2.0f64..2.0, b in -2.0f64..2.0,
    ) {
        let s = GhzSetup::new(CHI, GhzSetup::uniform(64, 3.0), GhzSetup::uniform(40, 0.05), Window::Hann).unwrap();
        let mix: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
        let (rp, rq, rm) = (ghz_reconstruct(&p, &s).unwrap(), ghz_reconstruct(&q, &s).unwrap(), ghz_reconstruct(&mix, &s).unwrap());
        let scale = rp.iter().chain(&rq).fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..rm.len() {
            prop_assert!((rm[i] - (a * rp[i] + b * rq[i])).abs() <= 1e-12 * scale);
        }
    }
}
