//! Property tests for the estimator axioms and operator invariants.

use proptest::collection::vec;
use proptest::prelude::*;

use gmsde::convex::{self, ConvexPotential};
use gmsde::gexp::{self, VolatilityBand};
use gmsde::harness::rho_eta;
use gmsde::{coeffs, g_function};

fn sample_matrix(max_scen: usize, max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(
        vec(-1e6..1e6f64, 1..max_len),
        1..max_scen,
    )
}

proptest! {
    #[test]
    fn expectation_monotone_and_subadditive(x in sample_matrix(6, 24), shift in 0.0..1e3f64) {
        // Pad/truncate a second matrix to the same shape by shifting down.
        let y: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v - shift).collect()).collect();
        let ex = gexp::sublinear_expectation(&x).unwrap().value;
        let ey = gexp::sublinear_expectation(&y).unwrap().value;
        prop_assert!(ex >= ey);

        let sum: Vec<Vec<f64>> = x.iter().zip(&y)
            .map(|(rx, ry)| rx.iter().zip(ry).map(|(a, b)| a + b).collect())
            .collect();
        let es = gexp::sublinear_expectation(&sum).unwrap().value;
        prop_assert!(es <= ex + ey + 1e-6 * (1.0 + ex.abs() + ey.abs()));
    }

    #[test]
    fn expectation_positively_homogeneous(x in sample_matrix(5, 16), lambda in 0.0..100.0f64) {
        let ex = gexp::sublinear_expectation(&x).unwrap().value;
        let scaled: Vec<Vec<f64>> = x.iter()
            .map(|r| r.iter().map(|v| lambda * v).collect())
            .collect();
        let es = gexp::sublinear_expectation(&scaled).unwrap().value;
        prop_assert!((es - lambda * ex).abs() <= 1e-9 * (1.0 + es.abs() + lambda * ex.abs()));
    }

    #[test]
    fn capacity_in_unit_interval_and_monotone(bits in vec(vec(0u8..2, 1..32), 1..5)) {
        let small: Vec<Vec<f64>> = bits.iter()
            .map(|r| r.iter().map(|&b| f64::from(b)).collect())
            .collect();
        let large: Vec<Vec<f64>> = bits.iter()
            .map(|r| r.iter().enumerate()
                .map(|(i, &b)| if i % 3 == 0 { 1.0 } else { f64::from(b) })
                .collect())
            .collect();
        let cs = gexp::capacity(&small).unwrap();
        let cl = gexp::capacity(&large).unwrap();
        prop_assert!((0.0..=1.0).contains(&cs));
        prop_assert!(cs <= cl);
    }

    #[test]
    fn g_function_homogeneous_monotone(a in -1e3..1e3f64, b in -1e3..1e3f64,
                                       lo in 0.0..4.0f64, span in 0.001..4.0f64,
                                       lambda in 0.0..50.0f64) {
        let band = VolatilityBand::new(lo, lo + span).unwrap();
        let ga = g_function(a, &band);
        prop_assert!((g_function(lambda * a, &band) - lambda * ga).abs() <= 1e-9 * (1.0 + lambda * ga.abs()));
        if a <= b {
            prop_assert!(ga <= g_function(b, &band) + 1e-12);
        }
    }

    #[test]
    fn projection_nonexpansive_idempotent(x in -50.0..50.0f64, y in -50.0..50.0f64,
                                          lo in -20.0..-0.01f64, hi in 0.01..20.0f64) {
        let pot = ConvexPotential::indicator_interval(lo, hi).unwrap();
        let px = convex::project(&[x], &pot);
        let py = convex::project(&[y], &pot);
        prop_assert_eq!(convex::project(&px, &pot), px.clone());
        prop_assert!((px[0] - py[0]).abs() <= (x - y).abs() + 1e-12);
    }

    #[test]
    fn yosida_gradient_lipschitz_monotone(x in -30.0..30.0f64, y in -30.0..30.0f64,
                                          eps in 0.001..2.0f64,
                                          hi in 0.01..10.0f64) {
        let pot = ConvexPotential::indicator_interval(-1.0, hi).unwrap();
        let gx = convex::yosida_gradient(&[x], eps, &pot).unwrap()[0];
        let gy = convex::yosida_gradient(&[y], eps, &pot).unwrap()[0];
        prop_assert!((gx - gy).abs() <= (x - y).abs() / eps + 1e-9);
        prop_assert!((gx - gy) * (x - y) >= -1e-9);
    }

    #[test]
    fn rho_eta_monotone_concave(a in 0.0..3.0f64, b in 0.0..3.0f64, eta in 0.01..0.36f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rho_eta(lo, eta).unwrap() <= rho_eta(hi, eta).unwrap() + 1e-12);
        let mid = rho_eta(0.5 * (a + b), eta).unwrap();
        let avg = 0.5 * (rho_eta(a, eta).unwrap() + rho_eta(b, eta).unwrap());
        prop_assert!(mid >= avg - 1e-12);
    }

    #[test]
    fn kappa_continuous_and_positive(eta in 0.02..0.35f64, scale in 0.1..5.0f64, x in 1e-6..50.0f64) {
        for variant in [coeffs::KappaVariant::Kappa1Log, coeffs::KappaVariant::Kappa2LogsqPatch] {
            let m = coeffs::ModulusKappa::new(variant, eta, scale).unwrap();
            let v = coeffs::kappa_eval(&m, x).unwrap();
            prop_assert!(v > 0.0 && v.is_finite());
            let left = coeffs::kappa_eval(&m, eta).unwrap();
            let right = coeffs::kappa_eval(&m, eta * (1.0 + 1e-13)).unwrap();
            prop_assert!((left - right).abs() <= 1e-10 * (1.0 + left.abs()));
        }
    }

    #[test]
    fn sine_series_truncation_tail(x in -6.0..6.0f64, n in 8usize..128) {
        let ta = coeffs::example4_triple(n, 1).unwrap();
        let tb = coeffs::example4_triple(2 * n, 1).unwrap();
        let gap = (ta.f_at(0.9, &[x])[0] - tb.f_at(0.9, &[x])[0]).abs();
        prop_assert!(gap <= 1.0 / n as f64 + 1e-12);
    }
}
