use conelab::cone::{cone_density, unit_ball_volume, unit_sphere_area};
use conelab::measures::*;
use conelab::plateau::{solve_equivariant_plateau, BoundaryOffset};
use conelab::profile::*;
use conelab::quad::adaptive;
use conelab::ConeSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn simons() -> ConeSpec {
    ConeSpec::new(3, 3).unwrap()
}

fn unit_leaf() -> ProfileCurve {
    normalize_foliate(&shoot_foliate(&simons(), Sign::Plus, 1000.0, DEFAULT_TOL).unwrap()).unwrap()
}

/// Monte Carlo over arclength and the x-sphere, with no cap formula involved.
#[test]
fn off_axis_mass_matches_monte_carlo() {
    let cone = simons();
    let leaf = shoot_foliate(&cone, Sign::Plus, 20.0, DEFAULT_TOL).unwrap();
    let (rho, radius) = (1.2, 1.0);
    let piece = leaf.truncated(rho + radius + 0.5);
    let exact = mass_in_ball(&piece, Center::XAxis(rho), radius).unwrap();
    assert!((exact - mass_in_ball(&leaf, Center::XAxis(rho), radius).unwrap()).abs() < 1e-12 * exact);

    let (s0, len) = (piece.first().s, piece.length());
    let orbit = unit_sphere_area(3) * unit_sphere_area(3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 1_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let s = s0 + len * rng.random::<f64>();
        let ((u, v), (du, dv)) = piece.point_at(s);
        let xi: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let d2 = (u * xi[0] / norm - rho).powi(2) + u * u * (1.0 - (xi[0] / norm).powi(2)) + v * v;
        let x = if d2 < radius * radius {
            orbit * len * u.powi(3) * v.powi(3) * du.hypot(dv)
        } else {
            0.0
        };
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!(exact > 0.0);
    assert!((mean - exact).abs() < 3.0 * se, "mc {mean} ± {se} vs {exact}");
}

#[test]
fn cap_fraction_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (k, t) in [(2u32, 0.3), (3, -0.4), (6, 0.1)] {
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let xi: Vec<f64> = (0..=k).map(|_| rng.sample(StandardNormal)).collect();
                let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                xi[0] / norm > t
            })
            .count();
        let est = hits as f64 / n as f64;
        let exact = cap_fraction(k, t);
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((est - exact).abs() < 3.0 * se, "k={k} t={t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn density_is_scale_equivariant(lambda in 0.3f64..3.0, r in 0.5f64..20.0, which in 0u8..3, rho in 0.5f64..3.0) {
        let leaf = shoot_foliate(&ConeSpec::new(2, 4).unwrap(), Sign::Plus, 100.0, DEFAULT_TOL).unwrap();
        let big = scale_curve(&leaf, lambda).unwrap();
        let center = match which { 0 => Center::Origin, 1 => Center::XAxis(rho), _ => Center::YAxis(rho) };
        let a = density_ratio(&leaf, center, r).unwrap();
        let b = density_ratio(&big, scale_center(center, lambda), lambda * r).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-300), "{} vs {}", a, b);
    }
}

#[test]
fn density_is_monotone_on_stationary_profiles() {
    let leaf = shoot_foliate(&simons(), Sign::Minus, 1000.0, DEFAULT_TOL).unwrap();
    let radii = log_radii(1e-2, 500.0, 150);
    for center in [Center::Origin, Center::XAxis(0.7), Center::YAxis(1.5), Center::YAxis(-2.0)] {
        let d = density(&leaf, center, &radii).unwrap();
        assert!(d.is_monotone(1e-8), "{center:?}: {:e}", d.monotonicity_violation);
    }
    // Plateau solutions: balls must stay away from the boundary sphere
    let sol = solve_equivariant_plateau(&simons(), BoundaryOffset::new(-0.03).unwrap(), 1e-9).unwrap();
    for (center, r_hi) in [(Center::Origin, 0.999), (Center::XAxis(0.3), 0.69), (Center::YAxis(0.2), 0.79)] {
        let d = density(&sol, center, &log_radii(1e-3, r_hi, 80)).unwrap();
        assert!(d.is_monotone(1e-8), "{center:?}: {:e}", d.monotonicity_violation);
    }
    let cone_piece = cone_segment(&simons(), 10.0, 201).unwrap();
    let d = density(&cone_piece, Center::Origin, &log_radii(0.01, 9.0, 40)).unwrap();
    let theta_c = cone_density(&simons()).theta_c;
    assert!(d.theta.iter().all(|t| (t - theta_c).abs() < 1e-12));
}

#[test]
fn foliate_density_approaches_cone_density() {
    for (p, q) in [(3, 3), (2, 4), (1, 6)] {
        let cone = ConeSpec::new(p, q).unwrap();
        let theta_c = cone_density(&cone).theta_c;
        for sign in [Sign::Plus, Sign::Minus] {
            let f = shoot_foliate(&cone, sign, 1000.0, DEFAULT_TOL).unwrap();
            let th = density_ratio(&f, Center::Origin, 1000.0).unwrap();
            assert!((th / theta_c - 1.0).abs() < 0.005);
        }
    }
}

#[test]
fn density_radius_is_scale_equivariant() {
    let leaf = unit_leaf();
    let base = density_radius(&leaf, Center::Origin, DEFAULT_TAU, f64::INFINITY).unwrap().unwrap();
    assert!(base > 0.0);
    for lambda in [0.5, 2.0] {
        let scaled = scale_curve(&leaf, lambda).unwrap();
        let r = density_radius(&scaled, Center::Origin, DEFAULT_TAU, f64::INFINITY).unwrap().unwrap();
        assert!((r / (lambda * base) - 1.0).abs() < 1e-8, "λ = {lambda}");
    }
}

#[test]
fn density_radius_is_the_threshold_root() {
    let leaf = unit_leaf();
    let theta_c = cone_density(&simons()).theta_c;
    let r = density_radius(&leaf, Center::Origin, 0.01, f64::INFINITY).unwrap().unwrap();
    let th = density_ratio(&leaf, Center::Origin, r / 4.0).unwrap();
    assert!((th - (theta_c - 0.01)).abs() < 1e-8, "{th}");
    // the default cap excludes every scale for the unit leaf
    assert_eq!(density_radius(&leaf, Center::Origin, 0.01, DEFAULT_DENSITY_RADIUS_CAP).unwrap(), None);
}

/// Annulus mass as an independent arclength integral.
#[test]
fn mass_is_additive_over_annuli() {
    let cone = simons();
    let leaf = shoot_foliate(&cone, Sign::Plus, 50.0, DEFAULT_TOL).unwrap();
    let (r1, r2) = (2.0, 7.5);
    let s_at = |target: f64| {
        let i = leaf.samples.partition_point(|x| x.r() < target);
        let (mut lo, mut hi) = (leaf.samples[i - 1].s, leaf.samples[i].s);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            let ((u, v), _) = leaf.point_at(m);
            if u.hypot(v) < target {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    };
    let f = |s: f64| {
        let ((u, v), (du, dv)) = leaf.point_at(s);
        u.powi(3) * v.powi(3) * du.hypot(dv)
    };
    // integrate node to node so the oracle sees smooth pieces
    let (a, b) = (s_at(r1), s_at(r2));
    let mut knots = vec![a];
    knots.extend(leaf.samples.iter().map(|x| x.s).filter(|&s| s > a && s < b));
    knots.push(b);
    let annulus: f64 = knots
        .windows(2)
        .map(|w| adaptive(&f, w[0], w[1], 1e-13, 0.0).unwrap())
        .sum::<f64>()
        * unit_sphere_area(3).powi(2);
    let diff = mass_in_ball(&leaf, Center::Origin, r2).unwrap() - mass_in_ball(&leaf, Center::Origin, r1).unwrap();
    assert!((diff / annulus - 1.0).abs() < 1e-10, "{diff} vs {annulus}");
}

#[test]
fn cone_mass_closed_form() {
    let cone = ConeSpec::new(1, 6).unwrap();
    let seg = cone_segment(&cone, 5.0, 101).unwrap();
    let k = cone_density(&cone);
    for r in [0.3, 1.0, 4.0] {
        let m = mass_in_ball(&seg, Center::Origin, r).unwrap();
        let oracle = k.theta_c * unit_ball_volume(cone.n()) * r.powi(cone.n() as i32);
        assert!((m / oracle - 1.0).abs() < 1e-12);
    }
}

#[test]
fn graphicality_refines_and_shrinks_with_scale() {
    let leaf = unit_leaf();
    let small = scale_curve(&leaf, 0.1).unwrap();
    let coarse = graphicality_radius_with(&small, 0.1, GRAPHICALITY_PER_OCTAVE).unwrap();
    let fine = graphicality_radius_with(&small, 0.1, 2 * GRAPHICALITY_PER_OCTAVE).unwrap();
    assert!(coarse > 0.0 && coarse < 1.0, "{coarse}");
    assert!((fine / coarse - 1.0).abs() < 0.02, "{coarse} vs {fine}");

    let radii: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&l| graphicality_radius(&scale_curve(&leaf, l).unwrap(), 0.1).unwrap())
        .collect();
    assert!(radii[0] > radii[1] && radii[1] > radii[2], "{radii:?}");
    let cone_piece = cone_segment(&simons(), 2.0, 101).unwrap();
    assert_eq!(graphicality_radius(&cone_piece, 0.1).unwrap(), 0.0);
}

#[test]
fn summary_and_mass_bound() {
    let leaf = scale_curve(&unit_leaf(), 0.1).unwrap();
    let s = diagnostic_summary(&leaf, DEFAULT_TAU, 0.1, DEFAULT_DENSITY_RADIUS_CAP).unwrap();
    assert!(s.mass_bound_ok);
    assert!(s.theta_at_1 < 1.5 * cone_density(&simons()).theta_c);
    let both = UnionSurface::new(vec![cone_segment(&simons(), 2.0, 101).unwrap(), scale_curve(&unit_leaf(), 0.5).unwrap()]).unwrap();
    assert!(!mass_bound_check(&both).unwrap());
}
