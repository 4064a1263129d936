//! Equivariant Plateau problems in the unit ball with boundary a rotated
//! copy of the link.
//!
//! The boundary is the orbit through the unit-circle point at angle
//! `cone_angle + t`. For `t < 0` the solution caps off on the `u` axis inside
//! `E_+`, for `t > 0` on the `v` axis inside `E_-`, and for `t = 0` it is the
//! cone itself. Solutions are found by shooting on the axis intercept.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{invalid, Error, Result};
use crate::measures::{density_ratio, mass_bound_check, Center};
use crate::profile::{
    cone_segment, shoot_from_axis, Axis, CurveKind, PolarGraph, ProfileCurve, ProfileSample,
    ShootOptions,
};

/// Samples of the `t = 0` cone segment.
const CONE_SAMPLES: usize = 201;
/// Intercept bracket searched by the shooting solver.
const INTERCEPT_MIN: f64 = 1e-4;
const INTERCEPT_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOffset {
    t: f64,
}

impl BoundaryOffset {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.abs() < FRAC_PI_8) {
            return Err(invalid("t", "|t| < π/8"));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Polar angle of the boundary point, checked to lie inside the quarter plane.
    pub fn boundary_angle(&self, cone: &ConeSpec) -> Result<f64> {
        let a = cone.cone_angle() + self.t;
        if !(a > 0.0 && a < FRAC_PI_2) {
            return Err(invalid("t", "cone_angle + t must lie in (0, π/2)"));
        }
        Ok(a)
    }
}

fn integrator_options(tol: f64) -> ShootOptions {
    ShootOptions::with_tol((tol * 1e-2).clamp(1e-12, 1e-9))
}

/// Polar angle at which the regular profile from the `u` axis at intercept
/// `a` meets the unit circle.
fn hit_angle(cone: &ConeSpec, a: f64, opts: &ShootOptions) -> Result<(f64, Vec<ProfileSample>)> {
    let samples = shoot_from_axis(cone, a, Axis::U, 1.0, opts)?;
    let last = samples.last().expect("nonempty");
    Ok((last.theta(), samples))
}

/// Newton-type iteration in `log a` from `a_start`, without bracketing.
/// Returns `None` when the iterate leaves the admissible bracket or stalls.
fn secant_from(cone: &ConeSpec, target: f64, a_start: f64, tol: f64, opts: &ShootOptions) -> Option<f64> {
    let m = |x: f64| hit_angle(cone, x.exp(), opts).ok().map(|(th, _)| th - target);
    let (lo, hi) = (INTERCEPT_MIN.ln(), INTERCEPT_MAX.ln());
    let mut x0 = a_start.ln();
    let mut x1 = x0 + 1e-3;
    let mut f0 = m(x0)?;
    let mut f1 = m(x1)?;
    for _ in 0..100 {
        // the hit angle is flat in the intercept for small |t|, so also ask
        // for a settled iterate
        if f1.abs() < tol && (x1 - x0).abs() < tol {
            return Some(x1.exp());
        }
        if f1 == f0 {
            return (f1.abs() < tol).then(|| x1.exp());
        }
        let mut x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        // damp steps that would jump out of the bracket
        if x2 < lo {
            x2 = 0.5 * (x1 + lo);
        } else if x2 > hi {
            x2 = 0.5 * (x1 + hi);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = m(x1)?;
    }
    None
}

/// Bracketed solve: log-spaced scan of the intercept followed by Illinois
/// iterations. Returns the intercept and its profile.
fn bracketed_solve(cone: &ConeSpec, target: f64, tol: f64, opts: &ShootOptions) -> Result<f64> {
    let (lo, hi) = (INTERCEPT_MIN.ln(), INTERCEPT_MAX.ln());
    let n = 40;
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for &x in &xs {
        let f = hit_angle(cone, x.exp(), opts)?.0 - target;
        if let Some((xp, fp)) = prev {
            if (fp > 0.0) != (f > 0.0) {
                bracket = Some((xp, fp, x, f));
                break;
            }
        }
        prev = Some((x, f));
    }
    let Some((mut a, mut fa, mut b, mut fb)) = bracket else {
        return Err(Error::NonConvergence(format!(
            "no sign change of the boundary mismatch for intercepts in [{INTERCEPT_MIN}, {INTERCEPT_MAX}]"
        )));
    };
    let mut side = 0;
    let mut c_prev = f64::NAN;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = hit_angle(cone, c.exp(), opts)?.0 - target;
        if fc == 0.0 || (fc.abs() < tol && (c - c_prev).abs() < tol) {
            return Ok(c.exp());
        }
        c_prev = c;
        if (fc > 0.0) == (fa > 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    Err(Error::NonConvergence(format!(
        "boundary match stalled in intercept bracket [{}, {}]",
        a.exp(),
        b.exp()
    )))
}

fn assemble(cone: &ConeSpec, t: f64, intercept: f64, opts: &ShootOptions) -> Result<ProfileCurve> {
    if t < 0.0 {
        let (_, samples) = hit_angle(cone, intercept, opts)?;
        Ok(ProfileCurve {
            cone: *cone,
            kind: CurveKind::PlateauSolution,
            samples,
            lambda: intercept,
            u0: intercept,
            axis: Some(Axis::U),
            tolerance: opts.rtol,
        })
    } else {
        let mut c = assemble(&cone.swapped(), -t, intercept, opts)?;
        c.cone = *cone;
        c.samples = c.samples.iter().map(swap_sample).collect();
        c.axis = Some(Axis::V);
        c.lambda = -intercept;
        Ok(c)
    }
}

fn swap_sample(s: &ProfileSample) -> ProfileSample {
    ProfileSample {
        s: s.s,
        u: s.v,
        v: s.u,
        alpha: FRAC_PI_2 - s.alpha,
    }
}

fn cone_solution(cone: &ConeSpec) -> Result<ProfileCurve> {
    let mut c = cone_segment(cone, 1.0, CONE_SAMPLES)?;
    c.kind = CurveKind::PlateauSolution;
    Ok(c)
}

/// The equivariant minimal hypersurface in `B_1` bounded by the orbit at
/// angle `cone_angle + t`, matched to within `tol` in boundary angle.
pub fn solve_equivariant_plateau(cone: &ConeSpec, t: BoundaryOffset, tol: f64) -> Result<ProfileCurve> {
    if !(tol > 0.0) {
        return Err(invalid("tol", "> 0"));
    }
    let target = t.boundary_angle(cone)?;
    if t.t() == 0.0 {
        return cone_solution(cone);
    }
    let opts = integrator_options(tol);
    let (shoot_cone, shoot_target) = if t.t() < 0.0 {
        (*cone, target)
    } else {
        (cone.swapped(), FRAC_PI_2 - target)
    };
    let a = bracketed_solve(&shoot_cone, shoot_target, tol, &opts)?;
    assemble(cone, t.t(), a, &opts)
}

/// Boundary-angle mismatch of a solution: `|θ(end) - (cone_angle + t)|`.
pub fn boundary_residual(curve: &ProfileCurve, t: BoundaryOffset) -> Result<f64> {
    Ok((curve.last().theta() - t.boundary_angle(&curve.cone)?).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub clusters: Vec<ProfileCurve>,
    /// Number of starts that converged.
    pub converged: usize,
    /// Whether the scanned mismatch was strictly monotone in the intercept.
    pub scan_monotone: bool,
}

/// Shoot from `n_starts` intercepts spread over `(0, 1)` and cluster the
/// converged solutions by sup-distance `< 10 tol`.
pub fn uniqueness_probe(cone: &ConeSpec, t: BoundaryOffset, n_starts: usize, tol: f64) -> Result<UniquenessReport> {
    if n_starts < 3 {
        return Err(invalid("n_starts", "≥ 3"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "> 0"));
    }
    let target = t.boundary_angle(cone)?;
    if t.t() == 0.0 {
        return Ok(UniquenessReport {
            clusters: vec![cone_solution(cone)?],
            converged: n_starts,
            scan_monotone: true,
        });
    }
    let opts = integrator_options(tol);
    let (shoot_cone, shoot_target) = if t.t() < 0.0 {
        (*cone, target)
    } else {
        (cone.swapped(), FRAC_PI_2 - target)
    };
    let mut found: Vec<ProfileCurve> = Vec::new();
    for j in 0..n_starts {
        // starts spread log-uniformly, since solutions have small intercepts for small |t|
        let frac = (j as f64 + 0.5) / n_starts as f64;
        let start = (INTERCEPT_MIN.ln() * 0.5 * (1.0 - frac) + INTERCEPT_MAX.ln() * frac).exp();
        if let Some(a) = secant_from(&shoot_cone, shoot_target, start, tol, &opts) {
            found.push(assemble(cone, t.t(), a, &opts)?);
        }
    }
    let converged = found.len();
    let mut clusters: Vec<ProfileCurve> = Vec::new();
    for c in found {
        if !clusters.iter().any(|rep| rep.sup_distance(&c) < 10.0 * tol) {
            clusters.push(c);
        }
    }
    Ok(UniquenessReport {
        clusters,
        converged,
        scan_monotone: scan_is_monotone(&shoot_cone, &opts)?,
    })
}

/// Hit angle on a log-spaced intercept grid; the regular profiles form a
/// foliation iff this is strictly monotone.
pub fn intercept_scan(cone: &ConeSpec, n_points: usize, tol: f64) -> Result<Vec<(f64, f64)>> {
    let opts = integrator_options(tol);
    let (lo, hi) = (INTERCEPT_MIN.ln(), INTERCEPT_MAX.ln());
    (0..n_points.max(2))
        .map(|i| {
            let a = (lo + (hi - lo) * i as f64 / (n_points.max(2) - 1) as f64).exp();
            Ok((a, hit_angle(cone, a, &opts)?.0))
        })
        .collect()
}

fn scan_is_monotone(cone: &ConeSpec, opts: &ShootOptions) -> Result<bool> {
    let (lo, hi) = (INTERCEPT_MIN.ln(), INTERCEPT_MAX.ln());
    let n = 48;
    let mut prev = f64::INFINITY;
    for i in 0..=n {
        let a = (lo + (hi - lo) * i as f64 / n as f64).exp();
        let th = hit_angle(cone, a, opts)?.0;
        if !(th < prev) {
            return Ok(false);
        }
        prev = th;
    }
    Ok(true)
}

/// Normalized foliates used as barriers, with their polar representations.
#[derive(Debug, Clone)]
pub struct FoliateFamily {
    pub plus: ProfileCurve,
    pub minus: ProfileCurve,
    plus_polar: PolarGraph,
    minus_polar: PolarGraph,
}

impl FoliateFamily {
    pub fn new(plus: ProfileCurve, minus: ProfileCurve) -> Result<Self> {
        if plus.kind != CurveKind::FoliatePlus || minus.kind != CurveKind::FoliateMinus {
            return Err(invalid("foliates", "need S_+ and S_- in that order"));
        }
        Ok(Self {
            plus_polar: PolarGraph::new(&plus)?,
            minus_polar: PolarGraph::new(&minus)?,
            plus,
            minus,
        })
    }

    /// Normalized `S_±` integrated out to `r_max`.
    pub fn normalized(cone: &ConeSpec, r_max: f64, tol: f64) -> Result<Self> {
        use crate::profile::{normalize_foliate, shoot_foliate, Sign};
        let plus = normalize_foliate(&shoot_foliate(cone, Sign::Plus, r_max, tol)?)?;
        let minus = normalize_foliate(&shoot_foliate(cone, Sign::Minus, r_max, tol)?)?;
        Self::new(plus, minus)
    }
}

/// Leaf bounds `(λ_lower, λ_upper)` squeezing a solution between two leaves
/// of the foliation on its side of the cone: every point of the solution lies
/// on a leaf `λ S_±` with `λ_lower <= λ <= λ_upper`. Both are magnitudes; the
/// cone gives `(0, 0)`.
pub fn barrier_squeeze(solution: &ProfileCurve, family: &FoliateFamily) -> Result<(f64, f64)> {
    let polar = match solution.axis {
        None => return Ok((0.0, 0.0)),
        Some(Axis::U) => &family.plus_polar,
        Some(Axis::V) => &family.minus_polar,
    };
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for smp in &solution.samples {
        let lam = smp.r() / polar.radius_at(smp.theta())?;
        lo = lo.min(lam);
        hi = hi.max(lam);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub axis_intercept: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub theta_at_1: f64,
    pub sup_distance_to_cone: f64,
    pub mass_bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cone: ConeSpec,
    pub offsets: Vec<f64>,
    pub solutions: Vec<ProfileCurve>,
    pub rows: Vec<SweepRow>,
    pub barrier_bounds: Vec<(f64, f64)>,
    /// Max over consecutive solved offsets of sup-distance / Δt.
    pub continuity_modulus: f64,
    /// Smallest planar distance between solutions of distinct offsets.
    pub min_pairwise_distance: f64,
    /// Offsets that failed, with the error message.
    pub failures: Vec<(f64, String)>,
}

impl SweepResult {
    pub fn pairwise_disjoint(&self) -> bool {
        self.min_pairwise_distance > 0.0
    }

    pub fn all_mass_bounds_ok(&self) -> bool {
        self.rows.iter().all(|r| r.mass_bound_ok)
    }

    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::from("# conelab sweep v1\n");
        for (k, v) in meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("t,axis_intercept,lambda_lower,lambda_upper,theta_at_1,sup_distance_to_cone\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t, r.axis_intercept, r.lambda_lower, r.lambda_upper, r.theta_at_1, r.sup_distance_to_cone
            );
        }
        out
    }
}

/// Evenly spaced offsets in `[t_min, t_max]`; a single offset when equal.
pub fn sweep_offsets(t_min: f64, t_max: f64, n_samples: usize) -> Vec<f64> {
    if t_min == t_max {
        return vec![t_min];
    }
    (0..n_samples)
        .map(|i| {
            let x = t_min + (t_max - t_min) * i as f64 / (n_samples - 1) as f64;
            // land exactly on 0 when the grid crosses it
            if x.abs() < 1e-14 * (t_max - t_min) {
                0.0
            } else {
                x
            }
        })
        .collect()
}

/// Solve for every offset and assemble disjointness, continuity, barrier
/// and mass-bound diagnostics. Failed offsets are collected, not fatal.
pub fn sweep_boundary(
    cone: &ConeSpec,
    t_min: f64,
    t_max: f64,
    n_samples: usize,
    tol: f64,
    family: &FoliateFamily,
) -> Result<SweepResult> {
    if t_min != t_max && n_samples < 5 {
        return Err(invalid("n_samples", "≥ 5"));
    }
    if !(t_min <= t_max) {
        return Err(invalid("t_min", "≤ t_max"));
    }
    BoundaryOffset::new(t_min)?;
    BoundaryOffset::new(t_max)?;
    let cone_piece = cone_segment(cone, 1.0, CONE_SAMPLES)?;
    let mut offsets = Vec::new();
    let mut solutions = Vec::new();
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut failures = Vec::new();
    for t in sweep_offsets(t_min, t_max, n_samples) {
        let attempt = (|| -> Result<(ProfileCurve, SweepRow, (f64, f64))> {
            let off = BoundaryOffset::new(t)?;
            let sol = solve_equivariant_plateau(cone, off, tol)?;
            let (lo, hi) = barrier_squeeze(&sol, family)?;
            let row = SweepRow {
                t,
                axis_intercept: sol.u0,
                lambda_lower: lo,
                lambda_upper: hi,
                theta_at_1: density_ratio(&sol, Center::Origin, 1.0)?,
                sup_distance_to_cone: sol.sup_distance(&cone_piece),
                mass_bound_ok: mass_bound_check(&sol)?,
            };
            Ok((sol, row, (lo, hi)))
        })();
        match attempt {
            Ok((sol, row, b)) => {
                offsets.push(t);
                solutions.push(sol);
                rows.push(row);
                bounds.push(b);
            }
            Err(e) => failures.push((t, e.to_string())),
        }
    }
    let mut continuity_modulus: f64 = 0.0;
    for i in 1..solutions.len() {
        let d = solutions[i].sup_distance(&solutions[i - 1]);
        continuity_modulus = continuity_modulus.max(d / (offsets[i] - offsets[i - 1]));
    }
    let mut min_pairwise_distance = f64::INFINITY;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            min_pairwise_distance = min_pairwise_distance.min(solutions[i].min_distance(&solutions[j]));
        }
    }
    Ok(SweepResult {
        cone: *cone,
        offsets,
        solutions,
        rows,
        barrier_bounds: bounds,
        continuity_modulus,
        min_pairwise_distance,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simons() -> ConeSpec {
        ConeSpec::new(3, 3).unwrap()
    }

    #[test]
    fn offsets_are_validated() {
        assert!(BoundaryOffset::new(0.4).is_err());
        assert!(BoundaryOffset::new(-0.39).is_ok());
        // (1,6): cone angle atan(sqrt 6) ≈ 1.183, so t = 0.39 leaves the quarter plane
        let c = ConeSpec::new(1, 6).unwrap();
        assert!(BoundaryOffset::new(0.39).unwrap().boundary_angle(&c).is_err());
    }

    #[test]
    fn zero_offset_is_the_cone() {
        let s = solve_equivariant_plateau(&simons(), BoundaryOffset::new(0.0).unwrap(), 1e-10).unwrap();
        assert!(s.axis.is_none());
        assert!((s.last().r() - 1.0).abs() < 1e-15);
        assert!(s.samples.iter().all(|x| x.alpha == simons().cone_angle()));
    }

    #[test]
    fn positive_offset_caps_on_the_v_axis() {
        let c = simons();
        let t = BoundaryOffset::new(0.02).unwrap();
        let s = solve_equivariant_plateau(&c, t, 1e-10).unwrap();
        assert_eq!(s.axis, Some(Axis::V));
        assert!(s.u0 > 0.0 && s.u0 < 1.0);
        assert!(boundary_residual(&s, t).unwrap() < 1e-8);
        assert!((s.last().r() - 1.0).abs() < 1e-10);
        assert!(s.respects_containment());
    }

    #[test]
    fn symmetric_cone_mirror() {
        let c = simons();
        let a = solve_equivariant_plateau(&c, BoundaryOffset::new(0.02).unwrap(), 1e-10).unwrap();
        let b = solve_equivariant_plateau(&c, BoundaryOffset::new(-0.02).unwrap(), 1e-10).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!((x.u, x.v), (y.v, y.u));
        }
    }

    #[test]
    fn probe_finds_one_cluster() {
        let r = uniqueness_probe(&simons(), BoundaryOffset::new(0.02).unwrap(), 8, 1e-10).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert!(r.converged >= 1);
        assert!(r.scan_monotone);
    }

    #[test]
    fn squeeze_brackets_a_single_leaf() {
        let c = simons();
        let fam = FoliateFamily::normalized(&c, 1e3, 1e-10).unwrap();
        let s = solve_equivariant_plateau(&c, BoundaryOffset::new(0.02).unwrap(), 1e-10).unwrap();
        let (lo, hi) = barrier_squeeze(&s, &fam).unwrap();
        assert!(lo > 0.0 && lo <= hi);
        assert!(hi - lo < 1e-6, "{lo} {hi}");
        // the leaf through the axis point
        let lam = s.u0 / fam.minus.samples[0].v;
        assert!((lam - lo).abs() < 1e-6);
        let cone = solve_equivariant_plateau(&c, BoundaryOffset::new(0.0).unwrap(), 1e-10).unwrap();
        assert_eq!(barrier_squeeze(&cone, &fam).unwrap(), (0.0, 0.0));
    }
}
