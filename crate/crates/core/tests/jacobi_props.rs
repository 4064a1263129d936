use conelab::cone::{critical_rate, spectrum, IndicialEntry};
use conelab::jacobi::*;
use conelab::profile::{normalize_foliate, shoot_foliate, Sign, DEFAULT_TOL};
use conelab::ConeSpec;
use proptest::prelude::*;

fn simons() -> ConeSpec {
    ConeSpec::new(3, 3).unwrap()
}

#[test]
fn three_annulus_implication_on_random_fields() {
    let rho0 = 0.5;
    let annuli = 6;
    let mut violations = 0;
    let mut hypotheses = 0;
    for (i, (p, q)) in [(3, 3), (2, 4), (1, 6)].into_iter().enumerate() {
        let cone = ConeSpec::new(p, q).unwrap();
        for seed in 0..1000u64 {
            let field = random_field(&cone, 3, rho0, annuli, 1000 * i as u64 + seed).unwrap();
            for k in 0..=annuli - 3 {
                let out = three_annulus_check(&field, rho0, k).unwrap();
                hypotheses += out.hypothesis_holds as u32;
                violations += !out.implication_holds() as u32;
            }
        }
    }
    assert_eq!(violations, 0);
    // the suite must actually exercise the implication
    assert!(hypotheses > 100);
}

proptest! {
    #[test]
    fn dirichlet_solve_is_linear(g1 in prop::collection::vec(-5.0f64..5.0, 4), g2 in prop::collection::vec(-5.0f64..5.0, 4)) {
        let cone = simons();
        let entries: Vec<IndicialEntry> = spectrum(&cone, 1).unwrap();
        let data = |g: &[f64]| -> Vec<(IndicialEntry, u64, f64)> {
            entries.iter().zip(g).map(|(e, &x)| (*e, 0, x)).collect()
        };
        let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let a = solve_dirichlet_ball_bounded(&cone, &data(&g1)).unwrap();
        let b = solve_dirichlet_ball_bounded(&cone, &data(&g2)).unwrap();
        let c = solve_dirichlet_ball_bounded(&cone, &data(&sum)).unwrap();
        for ((ma, mb), mc) in a.modes.iter().zip(&b.modes).zip(&c.modes) {
            prop_assert_eq!(ma.c_plus + mb.c_plus, mc.c_plus);
            prop_assert_eq!(mc.c_minus, 0.0);
        }
    }

    #[test]
    fn annulus_solve_round_trip(inner in -10.0f64..10.0, outer in -10.0f64..10.0, r0 in 0.05f64..0.9, deg in 0u32..3) {
        let cone = ConeSpec::new(2, 4).unwrap();
        let entry = IndicialEntry::new(&cone, deg, 1).unwrap();
        let (cp, cm) = solve_mode_annulus(&entry, inner, outer, r0, 1.0).unwrap();
        let m = JacobiMode { entry, index: 0, c_plus: cp, c_minus: cm };
        let scale = 1.0 + inner.abs() + outer.abs();
        prop_assert!((m.amplitude(r0) - inner).abs() < 1e-12 * scale);
        prop_assert!((m.amplitude(1.0) - outer).abs() < 1e-12 * scale);
    }

    #[test]
    fn pure_mode_norm_identity(deg in 0u32..4, l in 0u32..4, rho0 in 0.1f64..0.9, k in 0i32..4, plus in any::<bool>()) {
        let cone = simons();
        let entry = IndicialEntry::new(&cone, deg, l).unwrap();
        let a = if plus { entry.gamma_plus } else { entry.gamma_minus };
        let mode = JacobiMode { entry, index: 0, c_plus: plus as u8 as f64, c_minus: !plus as u8 as f64 };
        let field = SpectralJacobiField::new(cone, vec![mode], (0.0, 1.0)).unwrap();
        let norm = annulus_norm(&field, rho0, k).unwrap();
        let oracle = if a == 0.0 {
            (1.0 / rho0).ln().sqrt()
        } else {
            ((rho0.powf(2.0 * a * k as f64) - rho0.powf(2.0 * a * (k + 1) as f64)) / (2.0 * a)).sqrt()
        };
        prop_assert!((norm / oracle - 1.0).abs() < 1e-12);
        let next = annulus_norm(&field, rho0, k + 1).unwrap();
        prop_assert!((next / norm / rho0.powf(a) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn scaling_field_solves_the_jacobi_equation() {
    let f = normalize_foliate(&shoot_foliate(&simons(), Sign::Plus, 1200.0, DEFAULT_TOL).unwrap()).unwrap();
    let chk = scaling_field_check(&f, 1e-3, 100.0, 1000.0).unwrap();
    assert!(chk.residual < 1e-4, "{chk:?}");
    assert!(chk.rate_error() < 0.02, "{chk:?}");
}

#[test]
fn regular_axis_data_never_matches_critical_decay() {
    let cone = ConeSpec::new(2, 4).unwrap();
    let unit = shoot_foliate(&cone, Sign::Plus, 1100.0, DEFAULT_TOL).unwrap();
    let lambdas: Vec<f64> = (0..=10).map(|i| 10f64.powf(-0.5 + i as f64 / 10.0)).collect();
    let scan = mismatch_scan(&unit, &lambdas, 100.0).unwrap();
    assert_eq!(scan.mismatches.len(), lambdas.len());
    assert!(scan.min_mismatch() > 0.1, "{scan:?}");
}

#[test]
fn zero_boundary_data_gives_zero_field() {
    for (p, q) in [(3, 3), (2, 4), (1, 6)] {
        let cone = ConeSpec::new(p, q).unwrap();
        let data: Vec<_> = spectrum(&cone, 3).unwrap().into_iter().map(|e| (e, 0, 0.0)).collect();
        let field = solve_dirichlet_ball_bounded(&cone, &data).unwrap();
        assert!(field.is_zero());
        let beta = critical_rate(&cone);
        assert!(field.modes.iter().all(|m| m.entry.gamma_plus > beta && m.c_minus == 0.0));
    }
}
