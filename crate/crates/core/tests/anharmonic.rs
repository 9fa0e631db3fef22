use proptest::prelude::*;
use vibemu::anharmonic::*;

/// Richardson-extrapolated central difference of order `k` at `x`.
fn finite_difference(f: &impl Fn(f64) -> f64, x: f64, k: usize, h: f64) -> f64 {
    let stencil = |h: f64| match k {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        3 => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h.powi(3)),
        4 => (f(x + 2.0 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / h.powi(4),
        _ => unreachable!(),
    };
    (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn leading_order_error_is_linear_in_ratio() {
    let mut quartic = Vec::new();
    let mut cubic = Vec::new();
    for k in 0..8 {
        let u = 0.2 * 0.5f64.powi(k);
        let even = SquidCircuit::from_ratio(u, 0.0, 1.0, 1.0).unwrap();
        let t = taylor_coefficients(&even).unwrap();
        let (_, lo4) = leading_order_ratios(&even);
        quartic.push((u.ln(), ((t.quartic_ratio() - lo4) / lo4).abs().ln()));
        let biased = SquidCircuit::from_ratio(u, u, 1.0, 1.0).unwrap();
        let t = taylor_coefficients(&biased).unwrap();
        let (lo3, _) = leading_order_ratios(&biased);
        cubic.push((u.ln(), ((t.cubic_ratio() - lo3) / lo3).abs().ln()));
    }
    assert!(fit_slope(&quartic) >= 0.9, "{}", fit_slope(&quartic));
    assert!(fit_slope(&cubic) >= 0.9, "{}", fit_slope(&cubic));
}

#[test]
fn design_grid_round_trip() {
    for i in 0..10 {
        for j in 0..10 {
            let r3 = -0.3 + 0.6 * i as f64 / 9.0;
            let r4 = -0.3 + 0.6 * j as f64 / 9.0;
            let d = design_anharmonicity(r3, r4, 1.0, 1.0).unwrap();
            let t = taylor_coefficients(&d.circuit).unwrap();
            assert!((t.cubic_ratio() - r3).abs() <= 1e-6 * r3.abs().max(1.0), "{r3} {r4}");
            assert!((t.quartic_ratio() - r4).abs() <= 1e-6 * r4.abs().max(1.0), "{r3} {r4}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_derivatives_match_finite_differences(
        u in -0.9f64..0.9, phi_ext in -3.0f64..3.0, phi0 in 0.5f64..2.0, l in 0.5f64..2.0, x in -1.0f64..1.0,
    ) {
        let c = SquidCircuit::from_ratio(u, phi_ext * phi0, l, phi0).unwrap();
        let d = c.derivatives(x * phi0);
        let f = |y: f64| c.potential(y);
        let steps = [1e-4, 1e-3, 4e-3, 2e-2];
        for k in 1..=4 {
            let fd = finite_difference(&f, x * phi0, k, steps[k - 1] * phi0);
            let scale = (1.0 / l) * phi0.powi(2 - k as i32) + c.ej.abs() / phi0.powi(k as i32);
            prop_assert!((fd - d[k]).abs() <= 1e-6 * scale.max(d[k].abs()), "order {} fd {} exact {}", k, fd, d[k]);
        }
    }

    #[test]
    fn flux_reversal_symmetry(u in -0.9f64..0.9, phi_ext in 0.0f64..3.0) {
        let a = taylor_coefficients(&SquidCircuit::from_ratio(u, phi_ext, 1.0, 1.0).unwrap()).unwrap();
        let b = taylor_coefficients(&SquidCircuit::from_ratio(u, -phi_ext, 1.0, 1.0).unwrap()).unwrap();
        prop_assert!((a.phi_min + b.phi_min).abs() < 1e-12);
        prop_assert!((a.c3 + b.c3).abs() < 1e-12);
        prop_assert!((a.c2 - b.c2).abs() < 1e-12 && (a.c4 - b.c4).abs() < 1e-12);
    }

    #[test]
    fn design_round_trip(r3 in -1.0f64..1.0, r4 in -0.45f64..2.0, phi0 in 0.3f64..3.0, l in 0.1f64..10.0) {
        let (t3, t4) = (r3 / phi0, r4 / (phi0 * phi0));
        match design_anharmonicity(t3, t4, phi0, l) {
            Ok(d) => {
                prop_assert!(d.circuit.ratio().abs() <= VALIDITY_WINDOW);
                prop_assert!(d.residual_cubic.max(d.residual_quartic) < DESIGN_TOLERANCE);
                let t = taylor_coefficients(&d.circuit).unwrap();
                prop_assert!(t.c2 > 0.0);
            }
            Err(vibemu::Error::Design { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected {}", e),
        }
    }
}
