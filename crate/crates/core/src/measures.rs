//! Mass and density ratios of equivariant hypersurfaces.
//!
//! A profile point `(u, v)` stands for the orbit `S^p(u) x S^q(v)` of area
//! `c_p c_q u^p v^q`. Balls centered at the origin contain whole orbits or
//! none; balls centered on a symmetry axis cut each orbit in a spherical cap
//! of one factor, whose relative measure is a regularized incomplete beta
//! function.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::cone::{cone_density, unit_ball_volume, unit_sphere_area, ConeSpec};
use crate::error::{invalid, Error, Result};
use crate::profile::{graph_over_cone, hermite_segment, ProfileCurve, ProfileSample};
use crate::quad::{adaptive, gauss_legendre};

/// Default density deficit threshold.
pub const DEFAULT_TAU: f64 = 0.01;
/// Default upper cap on density radii.
pub const DEFAULT_DENSITY_RADIUS_CAP: f64 = 0.5;

/// Supported ball centers: the origin and points on the first coordinate
/// axis of either factor, `(ρ e_1, 0)` or `(0, ρ e_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Center {
    Origin,
    XAxis(f64),
    YAxis(f64),
}

impl Center {
    /// Classify a point `(x, y) ∈ R^{p+1} x R^{q+1}`.
    pub fn from_point(x: &[f64], y: &[f64]) -> Result<Center> {
        let off_axis = |z: &[f64]| z.iter().skip(1).any(|c| *c != 0.0);
        let x1 = x.first().copied().unwrap_or(0.0);
        let y1 = y.first().copied().unwrap_or(0.0);
        if off_axis(x) || off_axis(y) || (x1 != 0.0 && y1 != 0.0) {
            return Err(Error::UnsupportedCenter(
                "only the origin and points on a factor's first axis are supported".into(),
            ));
        }
        Ok(if x1 != 0.0 {
            Center::XAxis(x1)
        } else if y1 != 0.0 {
            Center::YAxis(y1)
        } else {
            Center::Origin
        })
    }

    fn norm(&self) -> f64 {
        match *self {
            Center::Origin => 0.0,
            Center::XAxis(r) | Center::YAxis(r) => r.abs(),
        }
    }

    fn scaled(&self, f: f64) -> Center {
        match *self {
            Center::Origin => Center::Origin,
            Center::XAxis(r) => Center::XAxis(r * f),
            Center::YAxis(r) => Center::YAxis(r * f),
        }
    }
}

/// A hypersurface made of one or more equivariant pieces; mass is additive.
pub trait Surface {
    fn pieces(&self) -> &[ProfileCurve];

    fn cone(&self) -> ConeSpec {
        self.pieces()[0].cone
    }
}

impl Surface for ProfileCurve {
    fn pieces(&self) -> &[ProfileCurve] {
        std::slice::from_ref(self)
    }
}

/// Union of profile curves of the same cone, counted with multiplicity one each.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionSurface {
    pieces: Vec<ProfileCurve>,
}

impl UnionSurface {
    pub fn new(pieces: Vec<ProfileCurve>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(invalid("pieces", "at least one curve"));
        }
        if pieces.iter().any(|c| c.cone != pieces[0].cone) {
            return Err(invalid("pieces", "all pieces must share a cone"));
        }
        Ok(Self { pieces })
    }
}

impl Surface for UnionSurface {
    fn pieces(&self) -> &[ProfileCurve] {
        &self.pieces
    }
}

/// Relative measure of `{ξ ∈ S^k : ξ_1 > t}`.
pub fn cap_fraction(k: u32, t: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    if t <= -1.0 {
        return 1.0;
    }
    let half = 0.5 * beta_reg(k as f64 / 2.0, 0.5, 1.0 - t * t);
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// Fraction of the orbit through `(u, v)` inside `B_r(center)`.
fn orbit_fraction(cone: &ConeSpec, center: Center, u: f64, v: f64, r: f64) -> f64 {
    let (k, a, b, rho) = match center {
        Center::Origin => {
            return if u * u + v * v < r * r { 1.0 } else { 0.0 };
        }
        Center::XAxis(rho) => (cone.p(), u, v, rho),
        Center::YAxis(rho) => (cone.q(), v, u, rho),
    };
    if a == 0.0 {
        return if rho * rho + b * b < r * r { 1.0 } else { 0.0 };
    }
    let t = (a * a + rho * rho + b * b - r * r) / (2.0 * rho * a);
    cap_fraction(k, if rho > 0.0 { t } else { -t })
}

/// Centers of the circles in the profile plane where the orbit fraction
/// switches regime.
fn break_circles(center: Center) -> Vec<(f64, f64)> {
    match center {
        Center::Origin => vec![(0.0, 0.0)],
        Center::XAxis(rho) => vec![(rho, 0.0), (-rho, 0.0)],
        Center::YAxis(rho) => vec![(0.0, rho), (0.0, -rho)],
    }
}

fn segment_mass(
    cone: &ConeSpec,
    a: &ProfileSample,
    b: &ProfileSample,
    center: Center,
    r: f64,
) -> Result<f64> {
    let (p, q) = (cone.p() as i32, cone.q() as i32);
    let integrand = |s: f64| {
        let ((u, v), (du, dv)) = hermite_segment(a, b, s);
        let (u, v) = (u.max(0.0), v.max(0.0));
        u.powi(p) * v.powi(q) * du.hypot(dv) * orbit_fraction(cone, center, u, v, r)
    };
    // quick rejection: whole segment far outside the ball
    let c_norm = center.norm();
    let seg_len = b.s - a.s;
    if a.r().min(b.r()) - seg_len > r + c_norm {
        return Ok(0.0);
    }
    let mut cuts = vec![a.s, b.s];
    for (cu, cv) in break_circles(center) {
        let g = |s: f64| {
            let ((u, v), _) = hermite_segment(a, b, s);
            (u - cu).powi(2) + (v - cv).powi(2) - r * r
        };
        let m = 0.5 * (a.s + b.s);
        let (ga, gm, gb) = (g(a.s), g(m), g(b.s));
        if (ga > 0.0) != (gm > 0.0) {
            cuts.push(crate::profile::bisect(&g, a.s, m));
        }
        if (gm > 0.0) != (gb > 0.0) {
            cuts.push(crate::profile::bisect(&g, m, b.s));
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let ((um, vm), _) = hermite_segment(a, b, mid);
        let frac = orbit_fraction(cone, center, um.max(0.0), vm.max(0.0), r);
        total += if frac == 0.0 {
            0.0
        } else if frac == 1.0 || matches!(center, Center::Origin) {
            gauss_legendre(&integrand, lo, hi)
        } else {
            adaptive(&integrand, lo, hi, 1e-12, 1e-300)?
        };
    }
    Ok(total)
}

/// `H^n` measure of the surface inside `B_r(center)`.
pub fn mass_in_ball<S: Surface + ?Sized>(surface: &S, center: Center, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid("r", "> 0"));
    }
    let cone = surface.cone();
    let orbit = unit_sphere_area(cone.p()) * unit_sphere_area(cone.q());
    let mut total = 0.0;
    for piece in surface.pieces() {
        for w in piece.samples.windows(2) {
            total += segment_mass(&cone, &w[0], &w[1], center, r)?;
        }
    }
    Ok(orbit * total)
}

/// `Θ(r, center) = μ(B_r(center)) / (ω_n r^n)`.
pub fn density_ratio<S: Surface + ?Sized>(surface: &S, center: Center, r: f64) -> Result<f64> {
    let n = surface.cone().n();
    Ok(mass_in_ball(surface, center, r)? / (unit_ball_volume(n) * r.powi(n as i32)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub center: Center,
    pub radii: Vec<f64>,
    pub mass: Vec<f64>,
    pub theta: Vec<f64>,
    /// Largest relative decrease `(Θ_j - Θ_{j+1}) / Θ_j` between consecutive radii.
    pub monotonicity_violation: f64,
}

impl DensityProfile {
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.monotonicity_violation <= rel_tol
    }

    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::from("# conelab density v1\n");
        for (k, v) in meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("r,mass,theta\n");
        for ((r, m), t) in self.radii.iter().zip(&self.mass).zip(&self.theta) {
            let _ = writeln!(out, "{r},{m},{t}");
        }
        out
    }
}

/// Tabulate the density ratio on increasing radii.
pub fn density<S: Surface + ?Sized>(surface: &S, center: Center, radii: &[f64]) -> Result<DensityProfile> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(invalid("radii", "positive and strictly increasing"));
    }
    let n = surface.cone().n();
    let wn = unit_ball_volume(n);
    let mut mass = Vec::with_capacity(radii.len());
    let mut theta = Vec::with_capacity(radii.len());
    for &r in radii {
        let m = mass_in_ball(surface, center, r)?;
        mass.push(m);
        theta.push(m / (wn * r.powi(n as i32)));
    }
    let monotonicity_violation = theta
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| (w[0] - w[1]) / w[0])
        .fold(0.0, f64::max);
    Ok(DensityProfile {
        center,
        radii: radii.to_vec(),
        mass,
        theta,
        monotonicity_violation,
    })
}

/// `n_points` log-spaced radii from `r_lo` to `r_hi` inclusive.
pub fn log_radii(r_lo: f64, r_hi: f64, n_points: usize) -> Vec<f64> {
    let n = n_points.max(2);
    (0..n)
        .map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn distance_to_center<S: Surface + ?Sized>(surface: &S, center: Center) -> f64 {
    let (cu, cv) = match center {
        Center::Origin => (0.0, 0.0),
        Center::XAxis(r) => (r.abs(), 0.0),
        Center::YAxis(r) => (0.0, r.abs()),
    };
    surface
        .pieces()
        .iter()
        .map(|c| c.nearest((cu, cv)).0)
        .fold(f64::INFINITY, f64::min)
}

fn outer_extent<S: Surface + ?Sized>(surface: &S) -> f64 {
    surface
        .pieces()
        .iter()
        .flat_map(|c| c.samples.iter().map(|s| s.r()))
        .fold(0.0, f64::max)
}

/// Infimum of `r < r_cap` with `Θ(C) - τ ≤ Θ(r/4, center) ≤ (3/2) Θ(C)`.
///
/// `Some(0)` when the condition holds down to the smallest scale and the
/// center lies on the surface's vertex; `None` when it never holds. The scan
/// grid is tied to the distance from the center to the surface, so the
/// result is exactly scale-equivariant when `r_cap` is infinite.
pub fn density_radius<S: Surface + ?Sized>(
    surface: &S,
    center: Center,
    tau: f64,
    r_cap: f64,
) -> Result<Option<f64>> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "> 0"));
    }
    if !(r_cap > 0.0) {
        return Err(invalid("r_cap", "> 0"));
    }
    let theta_c = cone_density(&surface.cone()).theta_c;
    let cond = |r: f64| -> Result<bool> {
        let th = density_ratio(surface, center, r / 4.0)?;
        Ok(theta_c - tau <= th && th <= 1.5 * theta_c)
    };
    // mass is only known inside the computed part of the surface
    let r_max = (4.0 * (outer_extent(surface) - center.norm())).min(r_cap);
    let d = distance_to_center(surface, center);
    let base = if d > 1e-12 * outer_extent(surface) {
        d
    } else {
        r_max * 1e-6
    };
    let mut grid = Vec::new();
    let mut j = -16i32;
    loop {
        let r = 4.0 * base * 2f64.powf(j as f64 / 8.0);
        if r >= r_max {
            break;
        }
        grid.push(r);
        j += 1;
    }
    if grid.is_empty() {
        return Ok(None);
    }
    let flags = grid.iter().map(|&r| cond(r)).collect::<Result<Vec<_>>>()?;
    let Some(first) = flags.iter().position(|f| *f) else {
        return Ok(None);
    };
    if first == 0 {
        // holds at every probed small scale
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (grid[first - 1], grid[first]);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if cond(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Discrete weighted `C^1` size of the graph over the cone on `[r_lo, r_hi]`:
/// `sup |h|/r + sup |dh/dr|` over the graph samples in the window.
pub fn weighted_c1_norm(curve: &ProfileCurve, r_lo: f64, r_hi: f64) -> Result<f64> {
    let g = graph_over_cone(curve)?;
    window_c1(&g.r_values, &g.h_values, &g.slopes, r_lo, r_hi)
        .ok_or_else(|| Error::EmptyRange(format!("no graph samples in [{r_lo}, {r_hi}]")))
}

fn window_c1(r: &[f64], h: &[f64], dh: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let n = r.len();
    if n < 2 || lo < r[0] || hi > r[n - 1] || hi < lo {
        return None;
    }
    let lerp = |y: &[f64], x: f64| -> f64 {
        let i = r.partition_point(|v| *v <= x).clamp(1, n - 1);
        let t = (x - r[i - 1]) / (r[i] - r[i - 1]);
        y[i - 1] + t * (y[i] - y[i - 1])
    };
    let i0 = r.partition_point(|x| *x <= lo);
    let i1 = r.partition_point(|x| *x < hi);
    let mut a = (lerp(h, lo) / lo).abs().max((lerp(h, hi) / hi).abs());
    let mut b = lerp(dh, lo).abs().max(lerp(dh, hi).abs());
    for i in i0..i1 {
        a = a.max((h[i] / r[i]).abs());
        b = b.max(dh[i].abs());
    }
    Some(a + b)
}

/// Default number of window positions per octave for [`graphicality_radius`].
pub const GRAPHICALITY_PER_OCTAVE: u32 = 32;

/// Smallest `r0` such that every dyadic window `[r, 2r] ∩ B_1` with
/// `r >= r0` satisfies `sup |h|/r + sup |dh/dr| <= eps`, scanning window
/// positions log-uniformly with `per_octave` steps per octave. Returns `1`
/// when the outermost window already fails, and never less than the inner
/// end of the graph's valid range.
pub fn graphicality_radius_with(curve: &ProfileCurve, eps: f64, per_octave: u32) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "> 0"));
    }
    if per_octave < 1 {
        return Err(invalid("per_octave", "≥ 1"));
    }
    let g = match graph_over_cone(curve) {
        Ok(g) => g,
        Err(Error::EmptyRange(_)) => return Ok(1.0),
        Err(e) => return Err(e),
    };
    let r_min = g.valid_range.0;
    let mut r0: f64 = 1.0;
    let mut j = per_octave as i32;
    loop {
        let r = 2f64.powf(-(j as f64) / per_octave as f64);
        if r < r_min || r <= 0.0 {
            return Ok(r0.max(r_min));
        }
        let ok = match window_c1(&g.r_values, &g.h_values, &g.slopes, r, (2.0 * r).min(1.0)) {
            Some(v) => v <= eps,
            None => return Ok(r0.max(r_min)),
        };
        if !ok {
            return Ok(r0.max(r_min));
        }
        r0 = r;
        j += 1;
        if j > 64 * per_octave as i32 {
            return Ok(r_min);
        }
    }
}

pub fn graphicality_radius(curve: &ProfileCurve, eps: f64) -> Result<f64> {
    graphicality_radius_with(curve, eps, GRAPHICALITY_PER_OCTAVE)
}

/// `Θ(1, 0) < (3/2) Θ(C)`.
pub fn mass_bound_check<S: Surface + ?Sized>(surface: &S) -> Result<bool> {
    if outer_extent(surface) < 1.0 - 1e-9 {
        return Err(invalid("surface", "must reach the unit sphere"));
    }
    let theta_c = cone_density(&surface.cone()).theta_c;
    Ok(density_ratio(surface, Center::Origin, 1.0)? < 1.5 * theta_c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub theta_at_1: f64,
    pub density_radius: Option<f64>,
    pub graphicality_radius: f64,
    pub mass_bound_ok: bool,
}

pub fn diagnostic_summary(curve: &ProfileCurve, tau: f64, eps: f64, r_cap: f64) -> Result<DiagnosticSummary> {
    Ok(DiagnosticSummary {
        theta_at_1: density_ratio(curve, Center::Origin, 1.0)?,
        density_radius: density_radius(curve, Center::Origin, tau, r_cap)?,
        graphicality_radius: graphicality_radius(curve, eps)?,
        mass_bound_ok: mass_bound_check(curve)?,
    })
}

/// Dilate a center along with the surface.
pub fn scale_center(center: Center, factor: f64) -> Center {
    center.scaled(factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{cone_segment, scale_curve, shoot_foliate, Sign};

    fn simons() -> ConeSpec {
        ConeSpec::new(3, 3).unwrap()
    }

    #[test]
    fn cap_fraction_closed_forms() {
        // circle: arccos(t)/π ; 2-sphere: (1-t)/2 (Archimedes)
        for t in [-0.9, -0.3, 0.0, 0.4, 0.99] {
            assert!((cap_fraction(1, t) - f64::acos(t) / std::f64::consts::PI).abs() < 1e-13);
            assert!((cap_fraction(2, t) - (1.0 - t) / 2.0).abs() < 1e-13);
        }
        assert_eq!(cap_fraction(3, 1.5), 0.0);
        assert_eq!(cap_fraction(3, -1.5), 1.0);
    }

    #[test]
    fn cone_mass_is_exact() {
        let c = simons();
        let seg = cone_segment(&c, 3.0, 7).unwrap();
        let k = cone_density(&c);
        for r in [0.1, 1.0, 2.5] {
            let m = mass_in_ball(&seg, Center::Origin, r).unwrap();
            let exact = k.link_volume / c.n() as f64 * r.powi(c.n() as i32);
            assert!((m - exact).abs() < 1e-12 * exact, "{r}: {m} vs {exact}");
            assert!((density_ratio(&seg, Center::Origin, r).unwrap() - k.theta_c).abs() < 1e-12);
        }
    }

    #[test]
    fn foliate_misses_small_balls() {
        let f = shoot_foliate(&simons(), Sign::Plus, 20.0, 1e-10).unwrap();
        assert_eq!(mass_in_ball(&f, Center::Origin, 0.99).unwrap(), 0.0);
        assert!(mass_in_ball(&f, Center::Origin, 1.01).unwrap() > 0.0);
    }

    #[test]
    fn unsupported_centers() {
        assert!(matches!(
            Center::from_point(&[1.0, 1.0, 0.0, 0.0], &[0.0; 4]),
            Err(Error::UnsupportedCenter(_))
        ));
        assert_eq!(Center::from_point(&[0.5, 0.0], &[0.0; 3]).unwrap(), Center::XAxis(0.5));
        assert_eq!(Center::from_point(&[0.0; 2], &[0.0; 3]).unwrap(), Center::Origin);
    }

    #[test]
    fn smooth_point_has_unit_density() {
        let f = shoot_foliate(&simons(), Sign::Plus, 20.0, 1e-10).unwrap();
        let th = density_ratio(&f, Center::XAxis(1.0), 1e-2).unwrap();
        assert!((th - 1.0).abs() < 0.01, "{th}");
    }

    #[test]
    fn cone_density_radius_is_zero() {
        let seg = cone_segment(&simons(), 2.0, 50).unwrap();
        assert_eq!(density_radius(&seg, Center::Origin, 0.01, 0.5).unwrap(), Some(0.0));
    }

    #[test]
    fn graphicality_of_cone_and_scaled_foliates() {
        let seg = cone_segment(&simons(), 2.0, 50).unwrap();
        assert_eq!(graphicality_radius(&seg, 0.1).unwrap(), 0.0);
        let f = shoot_foliate(&simons(), Sign::Plus, 50.0, 1e-10).unwrap();
        let radii: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&l| graphicality_radius(&scale_curve(&f, l).unwrap(), 0.1).unwrap())
            .collect();
        assert!(radii[0] > radii[1] && radii[1] > radii[2] && radii[2] > 0.0, "{radii:?}");
    }

    #[test]
    fn doubled_surface_breaks_mass_bound() {
        let c = simons();
        let seg = cone_segment(&c, 2.0, 50).unwrap();
        assert!(mass_bound_check(&seg).unwrap());
        let f = scale_curve(&shoot_foliate(&c, Sign::Plus, 20.0, 1e-10).unwrap(), 0.5).unwrap();
        let u = UnionSurface::new(vec![seg.clone(), f.clone()]).unwrap();
        let sum = mass_in_ball(&seg, Center::Origin, 1.0).unwrap() + mass_in_ball(&f, Center::Origin, 1.0).unwrap();
        assert!((mass_in_ball(&u, Center::Origin, 1.0).unwrap() - sum).abs() < 1e-12 * sum);
        assert!(!mass_bound_check(&u).unwrap());
    }
}
