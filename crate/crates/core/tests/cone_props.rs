use std::f64::consts::PI;

use conelab::cone::*;
use conelab::ConeSpec;
use proptest::prelude::*;

fn minimizing_cones(max_n: u32) -> Vec<ConeSpec> {
    let mut out = Vec::new();
    for p in 1..max_n {
        for q in 1..max_n {
            if p + q < max_n && satisfies_minimizing_criterion(p, q).unwrap() {
                out.push(ConeSpec::new(p, q).unwrap());
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn roots_sum_and_product(p in 1u32..12, q in 1u32..12, k in 0u32..6, l in 0u32..6) {
        let cone = ConeSpec::new(p, q).unwrap();
        let mu = link_eigenvalue(&cone, k, l);
        let n = cone.n() as f64;
        match indicial_roots(&cone, mu) {
            Ok((gp, gm)) => {
                prop_assert!(gp >= gm);
                prop_assert!((gp + gm - (2.0 - n)).abs() < 1e-12 * n);
                prop_assert!((gp * gm + mu).abs() < 1e-10 * (1.0 + mu.abs()));
                for g in [gp, gm] {
                    prop_assert!((g * g + (n - 2.0) * g - mu).abs() < 1e-9 * (1.0 + mu.abs()));
                }
            }
            Err(_) => prop_assert!((n - 2.0).powi(2) + 4.0 * mu < 0.0),
        }
    }

    #[test]
    fn density_is_swap_invariant(p in 1u32..15, q in 1u32..15) {
        let a = cone_density(&ConeSpec::new(p, q).unwrap()).theta_c;
        let b = cone_density(&ConeSpec::new(q, p).unwrap()).theta_c;
        prop_assert!((a - b).abs() < 1e-12 * a);
        prop_assert!(a > 1.0);
    }

    #[test]
    fn geometry_identities(p in 1u32..20, q in 1u32..20) {
        let cone = ConeSpec::new(p, q).unwrap();
        let th = cone.cone_angle();
        prop_assert!(th > 0.0 && th < PI / 2.0);
        prop_assert!((th.tan().powi(2) * p as f64 - q as f64).abs() < 1e-12 * q as f64);
        let (rp, rq) = cone.link_radii();
        prop_assert!((rp * rp + rq * rq - 1.0).abs() < 1e-14);
        prop_assert_eq!(cone.n(), p + q + 1);
    }
}

#[test]
fn geometric_modes_for_all_cones() {
    for p in 1..8 {
        for q in 1..8 {
            let cone = ConeSpec::new(p, q).unwrap();
            let n = cone.n() as f64;
            assert_eq!(link_eigenvalue(&cone, 0, 0), -(n - 1.0));
            assert!(link_eigenvalue(&cone, 1, 0).abs() < 1e-12);
            assert!(link_eigenvalue(&cone, 0, 1).abs() < 1e-12);
            assert!((link_eigenvalue(&cone, 1, 1) - (n - 1.0)).abs() < 1e-12);
        }
    }
}

#[test]
fn minimizing_cones_are_strictly_stable() {
    let cones = minimizing_cones(12);
    assert!(cones.len() > 20);
    for cone in cones {
        let n = cone.n() as f64;
        let disc = (n - 2.0).powi(2) - 4.0 * (n - 1.0);
        assert!(disc >= 1.0, "{cone:?}");
        let k = cone_density(&cone);
        assert!(k.gamma > (2.0 - n) / 2.0 && k.gamma < -1.0, "{cone:?}");
        assert!(k.growth_gap > 0.0);
        assert!((k.growth_gap - growth_gap(&cone, DEFAULT_MAX_DEGREE).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn density_matches_ball_volume_identity() {
    // Θ(C) = |Σ| / (n ω_n) = |Σ| / |S^{n-1}|
    for cone in minimizing_cones(10) {
        let k = cone_density(&cone);
        let n = cone.n();
        let via_sphere = k.link_volume / unit_sphere_area(n - 1);
        assert!((k.theta_c - via_sphere).abs() < 1e-12 * k.theta_c);
    }
}

#[test]
fn simons_cone_csv_row() {
    let cone = ConeSpec::new(3, 3).unwrap();
    let csv = spectrum_csv(&spectrum(&cone, 3).unwrap());
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "k,l,degeneracy,mu,gamma_plus,gamma_minus");
    assert_eq!(lines.next().unwrap(), "0,0,1,-6,-2,-3");
}

#[test]
fn degeneracies_sum_to_product_dimensions() {
    let cone = ConeSpec::new(2, 4).unwrap();
    let entries = spectrum(&cone, 2).unwrap();
    let total: u64 = entries.iter().map(|e| e.degeneracy).sum();
    let sx: u64 = (0..=2).map(|k| harmonic_dimension(2, k)).sum();
    let sy: u64 = (0..=2).map(|l| harmonic_dimension(4, l)).sum();
    assert_eq!(total, sx * sy);
}
