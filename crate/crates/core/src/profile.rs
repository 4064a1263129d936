//! Equivariant hypersurfaces as profile curves in the `(u, v) = (|x|, |y|)`
//! quarter plane.
//!
//! An `O(p+1) x O(q+1)`-invariant hypersurface is minimal iff its profile is a
//! geodesic for the weighted length `∫ u^p v^q ds`. In unit-speed variables
//! `(u, v, α)` this reads
//!
//! ```text
//! u' = cos α,   v' = sin α,   α' = (q/v) cos α - (p/u) sin α.
//! ```
//!
//! The system is integrated in the scale-invariant parameter `σ` with
//! `ds = r dσ`, so that step sizes stay proportional to the distance from
//! the origin and the leaves `λ S_±` are all resolved with the same relative
//! accuracy.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cone::{cone_density, indicial_roots, link_eigenvalue, ConeSpec, Region};
use crate::error::{invalid, Error, Result};
use crate::ode::{integrate, OdeOptions, Termination};

/// Step-off distance from the axis, relative to the intercept.
pub const AXIS_STEP_OFF: f64 = 1e-3;
/// Default relative tolerance of profile integrations.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Largest step in the scale-invariant parameter `σ`.
pub const DEFAULT_MAX_SIGMA_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// `v = 0`, i.e. the orbit collapses the `S^q` factor.
    U,
    /// `u = 0`.
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    FoliatePlus,
    FoliateMinus,
    ConeSegment,
    PlateauSolution,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::FoliatePlus => "foliate_plus",
            CurveKind::FoliateMinus => "foliate_minus",
            CurveKind::ConeSegment => "cone_segment",
            CurveKind::PlateauSolution => "plateau_solution",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "foliate_plus" => CurveKind::FoliatePlus,
            "foliate_minus" => CurveKind::FoliateMinus,
            "cone_segment" => CurveKind::ConeSegment,
            "plateau_solution" => CurveKind::PlateauSolution,
            other => return Err(Error::Parse(format!("unknown curve kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
}

impl ProfileSample {
    pub fn r(&self) -> f64 {
        self.u.hypot(self.v)
    }

    /// Polar angle in the quarter plane.
    pub fn theta(&self) -> f64 {
        self.v.atan2(self.u)
    }

    fn swapped(&self) -> Self {
        ProfileSample {
            s: self.s,
            u: self.v,
            v: self.u,
            alpha: FRAC_PI_2 - self.alpha,
        }
    }
}

/// An arclength-sampled profile curve.
///
/// `lambda` is the scale label: `±1` for the unit-intercept (or normalized)
/// representatives of `S_±`, multiplied by every [`scale_curve`], `0` for the
/// cone. `u0` is the axis intercept (`0` for cone segments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub cone: ConeSpec,
    pub kind: CurveKind,
    pub samples: Vec<ProfileSample>,
    pub lambda: f64,
    pub u0: f64,
    pub axis: Option<Axis>,
    pub tolerance: f64,
}

/// Options for integrating a profile from an axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_sigma_step: f64,
}

impl ShootOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 1e-3,
            max_sigma_step: DEFAULT_MAX_SIGMA_STEP,
        }
    }
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self::with_tol(DEFAULT_TOL)
    }
}

/// Profile curvature `dα/ds = (q/v) cos α - (p/u) sin α` of a minimal orbit.
pub fn curvature_rhs(cone: &ConeSpec, u: f64, v: f64, alpha: f64) -> Result<f64> {
    if u <= 0.0 || v <= 0.0 {
        return Err(Error::Domain(format!(
            "profile equation is singular on the axes (u = {u}, v = {v})"
        )));
    }
    Ok(cone.q() as f64 * alpha.cos() / v - cone.p() as f64 * alpha.sin() / u)
}

/// Quadratic coefficient `c2` of the regular profile leaving the axis at
/// distance `u0`: `u(v) = u0 + c2 v^2 + O(v^4)` for the `u` axis, and the
/// `(p, u) <-> (q, v)` mirror for the `v` axis.
pub fn axis_start_expansion(cone: &ConeSpec, u0: f64, axis: Axis) -> Result<f64> {
    if !(u0 > 0.0) {
        return Err(invalid("u0", "> 0"));
    }
    let (p, q) = match axis {
        Axis::U => (cone.p() as f64, cone.q() as f64),
        Axis::V => (cone.q() as f64, cone.p() as f64),
    };
    Ok(p / (2.0 * u0 * (q + 1.0)))
}

/// Squared norm of the second fundamental form of the orbit hypersurface
/// through a profile point with profile curvature `kappa`.
pub fn second_fundamental_sq(cone: &ConeSpec, u: f64, v: f64, alpha: f64, kappa: f64) -> Result<f64> {
    if u <= 0.0 || v <= 0.0 {
        return Err(Error::Domain(format!(
            "orbit curvatures are singular on the axes (u = {u}, v = {v})"
        )));
    }
    let a = alpha.sin() / u;
    let b = alpha.cos() / v;
    Ok(kappa * kappa + cone.p() as f64 * a * a + cone.q() as f64 * b * b)
}

/// Regular start data at the step-off point from the `u` axis.
fn u_axis_start(cone: &ConeSpec, u0: f64) -> ProfileSample {
    let c2 = axis_start_expansion(cone, u0, Axis::U).expect("u0 > 0 checked by callers");
    let v = AXIS_STEP_OFF * u0;
    let slope = 2.0 * c2 * v;
    ProfileSample {
        s: v + 2.0 / 3.0 * c2 * c2 * v * v * v,
        u: u0 + c2 * v * v,
        v,
        alpha: 1.0f64.atan2(slope),
    }
}

/// Integrate the regular profile leaving `axis` at intercept `u0` until the
/// distance from the origin reaches `r_stop`.
///
/// The returned samples start with the axis point itself. Leaving the open
/// quarter plane or the region `E_±` adjacent to the starting axis is
/// reported as [`Error::NonConvergence`].
pub fn shoot_from_axis(
    cone: &ConeSpec,
    u0: f64,
    axis: Axis,
    r_stop: f64,
    opts: &ShootOptions,
) -> Result<Vec<ProfileSample>> {
    if !(u0 > 0.0) {
        return Err(invalid("u0", "> 0"));
    }
    if axis == Axis::V {
        let swapped = shoot_from_axis(&cone.swapped(), u0, Axis::U, r_stop, opts)?;
        return Ok(swapped.iter().map(ProfileSample::swapped).collect());
    }
    let start = u_axis_start(cone, u0);
    if !(r_stop > start.r()) {
        return Err(invalid("r_stop", format!("> {} (start radius)", start.r())));
    }
    let (p, q) = (cone.p() as f64, cone.q() as f64);
    let rhs = |_sigma: f64, y: &[f64; 4]| -> [f64; 4] {
        let (u, v, a) = (y[1], y[2], y[3]);
        let r = u.hypot(v);
        let (sa, ca) = a.sin_cos();
        [r, r * ca, r * sa, r * (q * ca / v - p * sa / u)]
    };
    let event = |_sigma: f64, y: &[f64; 4]| y[1].hypot(y[2]) - r_stop;
    let guard = |_sigma: f64, y: &[f64; 4]| -> std::result::Result<(), String> {
        if !(y[1] > 0.0 && y[2] > 0.0) {
            return Err(format!("profile left the quarter plane at (u, v) = ({}, {})", y[1], y[2]));
        }
        // rounding tolerance: far out the leaves are numerically on the cone
        if cone.side_function(y[1], y[2]) <= -1e-12 * (y[1] * y[1] + y[2] * y[2]) {
            return Err(format!("profile left E_+ at (u, v) = ({}, {})", y[1], y[2]));
        }
        Ok(())
    };
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        h_init: 1e-4,
        h_max: opts.max_sigma_step,
        h_min: 1e-15,
        max_steps: 5_000_000,
    };
    let sigma_span = 2.0 * (r_stop / u0).ln().abs() + 50.0;
    let traj = integrate(
        &rhs,
        0.0,
        [start.s, start.u, start.v, start.alpha],
        sigma_span,
        &ode,
        Some(&event),
        &guard,
    )?;
    if traj.termination != Termination::Event {
        return Err(Error::NonConvergence(format!(
            "profile did not reach radius {r_stop}"
        )));
    }
    let mut samples = Vec::with_capacity(traj.y.len() + 1);
    samples.push(ProfileSample {
        s: 0.0,
        u: u0,
        v: 0.0,
        alpha: FRAC_PI_2,
    });
    samples.extend(traj.y.iter().map(|y| ProfileSample {
        s: y[0],
        u: y[1],
        v: y[2],
        alpha: y[3],
    }));
    Ok(samples)
}

/// Unit-intercept representative of the foliate `S_±`, integrated
/// out to radius `r_max`.
///
/// `S_+` leaves the `u` axis at `u0 = 1`; `S_-` is the `(p, u) <-> (q, v)`
/// mirror of `S_+` of the swapped cone.
pub fn shoot_foliate(cone: &ConeSpec, sign: Sign, r_max: f64, tol: f64) -> Result<ProfileCurve> {
    if !(r_max > 10.0) {
        return Err(invalid("r_max", "> 10"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "> 0"));
    }
    foliate_with(cone, sign, r_max, &ShootOptions::with_tol(tol))
}

/// [`shoot_foliate`] with explicit integrator options and no lower bound on `r_max`.
pub fn foliate_with(cone: &ConeSpec, sign: Sign, r_max: f64, opts: &ShootOptions) -> Result<ProfileCurve> {
    let (axis, kind, lambda) = match sign {
        Sign::Plus => (Axis::U, CurveKind::FoliatePlus, 1.0),
        Sign::Minus => (Axis::V, CurveKind::FoliateMinus, -1.0),
    };
    let samples = shoot_from_axis(cone, 1.0, axis, r_max, opts)?;
    Ok(ProfileCurve {
        cone: *cone,
        kind,
        samples,
        lambda,
        u0: 1.0,
        axis: Some(axis),
        tolerance: opts.rtol,
    })
}

/// The straight cone profile from the origin out to `r_max`.
pub fn cone_segment(cone: &ConeSpec, r_max: f64, n_samples: usize) -> Result<ProfileCurve> {
    if !(r_max > 0.0) {
        return Err(invalid("r_max", "> 0"));
    }
    if n_samples < 2 {
        return Err(invalid("n_samples", "≥ 2"));
    }
    let theta = cone.cone_angle();
    let (st, ct) = theta.sin_cos();
    let samples = (0..n_samples)
        .map(|i| {
            let s = r_max * i as f64 / (n_samples - 1) as f64;
            ProfileSample {
                s,
                u: s * ct,
                v: s * st,
                alpha: theta,
            }
        })
        .collect();
    Ok(ProfileCurve {
        cone: *cone,
        kind: CurveKind::ConeSegment,
        samples,
        lambda: 0.0,
        u0: 0.0,
        axis: None,
        tolerance: 0.0,
    })
}

/// Dilate a curve about the origin.
pub fn scale_curve(curve: &ProfileCurve, factor: f64) -> Result<ProfileCurve> {
    if !(factor > 0.0) {
        return Err(invalid("factor", "> 0"));
    }
    let mut out = curve.clone();
    for smp in &mut out.samples {
        smp.s *= factor;
        smp.u *= factor;
        smp.v *= factor;
    }
    out.lambda *= factor;
    out.u0 *= factor;
    Ok(out)
}

impl ProfileCurve {
    pub fn first(&self) -> &ProfileSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &ProfileSample {
        self.samples.last().expect("curves are never empty")
    }

    pub fn length(&self) -> f64 {
        self.last().s - self.first().s
    }

    /// `|α - cone_angle|` at the last sample.
    pub fn tangent_defect(&self) -> f64 {
        (self.last().alpha - self.cone.cone_angle()).abs()
    }

    /// Whether every sample lies in the region the curve kind requires.
    /// Axis points and the cone's vertex are exempt.
    pub fn respects_containment(&self) -> bool {
        let want = match self.kind {
            CurveKind::FoliatePlus => Region::Plus,
            CurveKind::FoliateMinus => Region::Minus,
            CurveKind::ConeSegment => return true,
            CurveKind::PlateauSolution => match self.axis {
                Some(Axis::U) => Region::Plus,
                Some(Axis::V) => Region::Minus,
                None => return true,
            },
        };
        self.samples.iter().all(|s| self.cone.region(s.u, s.v) == want)
    }

    fn segment_index(&self, s: f64) -> usize {
        let n = self.samples.len();
        match self
            .samples
            .binary_search_by(|smp| smp.s.total_cmp(&s))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite interpolation of `(u, v)` at arclength `s`, together
    /// with the interpolated tangent `(du/ds, dv/ds)`.
    pub fn point_at(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        let i = self.segment_index(s);
        hermite_segment(&self.samples[i], &self.samples[i + 1], s)
    }

    /// Distance from `point` to the curve and the arclength of the foot point.
    pub fn nearest(&self, point: (f64, f64)) -> (f64, f64) {
        let dist2 = |smp: &ProfileSample| (smp.u - point.0).powi(2) + (smp.v - point.1).powi(2);
        let (i_best, _) = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, smp)| (i, dist2(smp)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let n = self.samples.len();
        let mut best = (dist2(&self.samples[i_best]).sqrt(), self.samples[i_best].s);
        let lo = i_best.saturating_sub(1);
        let hi = (i_best + 1).min(n - 1);
        for j in lo..hi {
            let (a, b) = (&self.samples[j], &self.samples[j + 1]);
            let d = |s: f64| {
                let ((u, v), _) = hermite_segment(a, b, s);
                ((u - point.0).powi(2) + (v - point.1).powi(2)).sqrt()
            };
            let s = golden_min(&d, a.s, b.s);
            let ds = d(s);
            if ds < best.0 {
                best = (ds, s);
            }
        }
        best
    }

    /// Signed distance, positive on the left of the direction of travel.
    pub fn signed_distance(&self, point: (f64, f64)) -> f64 {
        let (d, s) = self.nearest(point);
        let ((u, v), (tu, tv)) = self.point_at(s);
        let cross = tu * (point.1 - v) - tv * (point.0 - u);
        if cross >= 0.0 {
            d
        } else {
            -d
        }
    }

    /// Largest distance from a sample of `self` to `other`.
    pub fn sup_distance_to(&self, other: &ProfileCurve) -> f64 {
        self.samples
            .iter()
            .map(|smp| other.nearest((smp.u, smp.v)).0)
            .fold(0.0, f64::max)
    }

    /// Symmetric sup distance between two curves.
    pub fn sup_distance(&self, other: &ProfileCurve) -> f64 {
        self.sup_distance_to(other).max(other.sup_distance_to(self))
    }

    /// Smallest distance between the two curves, measured from the samples
    /// of each to the interpolated other.
    pub fn min_distance(&self, other: &ProfileCurve) -> f64 {
        let a = self
            .samples
            .iter()
            .map(|smp| other.nearest((smp.u, smp.v)).0)
            .fold(f64::INFINITY, f64::min);
        let b = other
            .samples
            .iter()
            .map(|smp| self.nearest((smp.u, smp.v)).0)
            .fold(f64::INFINITY, f64::min);
        a.min(b)
    }

    /// Restrict to the part with `r <= r_max`, ending exactly on that
    /// circle when the curve crosses it.
    pub fn truncated(&self, r_max: f64) -> ProfileCurve {
        let mut out = self.clone();
        out.samples.clear();
        for (i, smp) in self.samples.iter().enumerate() {
            if smp.r() <= r_max {
                out.samples.push(*smp);
                continue;
            }
            if i > 0 {
                let a = &self.samples[i - 1];
                let g = |s: f64| {
                    let ((u, v), _) = hermite_segment(a, smp, s);
                    u.hypot(v) - r_max
                };
                let s = bisect(&g, a.s, smp.s);
                let ((u, v), (tu, tv)) = hermite_segment(a, smp, s);
                out.samples.push(ProfileSample {
                    s,
                    u,
                    v,
                    alpha: tv.atan2(tu),
                });
            }
            break;
        }
        out
    }

    /// CSV with `#`-prefixed metadata lines and columns `s,u,v,alpha`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# conelab profile v1");
        let _ = writeln!(out, "# p={}", self.cone.p());
        let _ = writeln!(out, "# q={}", self.cone.q());
        let _ = writeln!(out, "# kind={}", self.kind.as_str());
        let _ = writeln!(out, "# lambda={}", self.lambda);
        let _ = writeln!(out, "# u0={}", self.u0);
        let axis = match self.axis {
            Some(Axis::U) => "u",
            Some(Axis::V) => "v",
            None => "none",
        };
        let _ = writeln!(out, "# axis={axis}");
        let _ = writeln!(out, "# tolerance={}", self.tolerance);
        out.push_str("s,u,v,alpha\n");
        for smp in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", smp.s, smp.u, smp.v, smp.alpha);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ProfileCurve> {
        let mut meta = std::collections::HashMap::new();
        let mut samples = Vec::new();
        let mut saw_header = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !saw_header {
                if line != "s,u,v,alpha" {
                    return Err(Error::Parse(format!("unexpected column header `{line}`")));
                }
                saw_header = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("row `{line}`: {e}")))?;
            if vals.len() != 4 {
                return Err(Error::Parse(format!("row `{line}` has {} columns", vals.len())));
            }
            samples.push(ProfileSample {
                s: vals[0],
                u: vals[1],
                v: vals[2],
                alpha: vals[3],
            });
        }
        let get = |k: &str| -> Result<&String> {
            meta.get(k)
                .ok_or_else(|| Error::Parse(format!("missing metadata `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("metadata `{k}`: {e}")))
        };
        let int = |k: &str| -> Result<u32> {
            get(k)?
                .parse::<u32>()
                .map_err(|e| Error::Parse(format!("metadata `{k}`: {e}")))
        };
        if samples.len() < 2 {
            return Err(Error::Parse("a profile needs at least two samples".into()));
        }
        let axis = match get("axis")?.as_str() {
            "u" => Some(Axis::U),
            "v" => Some(Axis::V),
            "none" => None,
            other => return Err(Error::Parse(format!("unknown axis `{other}`"))),
        };
        Ok(ProfileCurve {
            cone: ConeSpec::new(int("p")?, int("q")?)?,
            kind: CurveKind::parse(get("kind")?)?,
            samples,
            lambda: num("lambda")?,
            u0: num("u0")?,
            axis,
            tolerance: num("tolerance")?,
        })
    }
}

pub(crate) fn hermite_segment(
    a: &ProfileSample,
    b: &ProfileSample,
    s: f64,
) -> ((f64, f64), (f64, f64)) {
    let h = b.s - a.s;
    if h <= 0.0 {
        return ((a.u, a.v), (a.alpha.cos(), a.alpha.sin()));
    }
    let t = (s - a.s) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let d00 = (6.0 * t2 - 6.0 * t) / h;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * t) / h;
    let d11 = 3.0 * t2 - 2.0 * t;
    let (ca, sa) = (a.alpha.cos(), a.alpha.sin());
    let (cb, sb) = (b.alpha.cos(), b.alpha.sin());
    let u = h00 * a.u + h10 * h * ca + h01 * b.u + h11 * h * cb;
    let v = h00 * a.v + h10 * h * sa + h01 * b.v + h11 * h * sb;
    let du = d00 * a.u + d10 * ca + d01 * b.u + d11 * cb;
    let dv = d00 * a.v + d10 * sa + d01 * b.v + d11 * sb;
    ((u, v), (du, dv))
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub(crate) fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Largest scale-invariant defect between consecutive samples: each interval
/// is re-integrated with a fine classical RK4 in arclength and compared with
/// the stored endpoint (`|Δu|/r`, `|Δv|/r`, `|Δα|`).
///
/// Intervals touching an axis or the cone's vertex are skipped.
pub fn ode_defect(curve: &ProfileCurve) -> f64 {
    let cone = curve.cone;
    let f = |y: [f64; 3]| -> [f64; 3] {
        let (u, v, a) = (y[0], y[1], y[2]);
        let k = cone.q() as f64 * a.cos() / v - cone.p() as f64 * a.sin() / u;
        [a.cos(), a.sin(), k]
    };
    let mut worst: f64 = 0.0;
    for w in curve.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.u <= 0.0 || a.v <= 0.0 || b.u <= 0.0 || b.v <= 0.0 {
            continue;
        }
        let substeps = 64;
        let h = (b.s - a.s) / substeps as f64;
        let mut y = [a.u, a.v, a.alpha];
        for _ in 0..substeps {
            let k1 = f(y);
            let k2 = f(add(y, k1, h / 2.0));
            let k3 = f(add(y, k2, h / 2.0));
            let k4 = f(add(y, k3, h));
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let r = b.r();
        worst = worst
            .max((y[0] - b.u).abs() / r)
            .max((y[1] - b.v).abs() / r)
            .max((y[2] - b.alpha).abs());
    }
    worst
}

fn add(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// A profile written as a normal graph over the cone line.
///
/// `r_values` is the distance of the foot point from the origin along the
/// cone, `h_values` the signed normal offset (positive toward `E_+`), and
/// `slopes` the exact `dh/dr` from the tangent angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOverCone {
    pub r_values: Vec<f64>,
    pub h_values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub valid_range: (f64, f64),
}

/// Graph of `curve` over the cone on the largest outer interval where the
/// foot point moves monotonically and `|h|/r < 1/2`.
pub fn graph_over_cone(curve: &ProfileCurve) -> Result<GraphOverCone> {
    let theta = curve.cone.cone_angle();
    let (st, ct) = theta.sin_cos();
    let pts: Vec<(f64, f64, f64, f64)> = curve
        .samples
        .iter()
        .map(|smp| {
            let rho = smp.u * ct + smp.v * st;
            let h = smp.u * st - smp.v * ct;
            let c = (smp.alpha - theta).cos();
            (rho, h, c, -(smp.alpha - theta).tan())
        })
        .collect();
    let ok = |x: &(f64, f64, f64, f64)| x.2 > 0.0 && (x.1 == 0.0 || x.1.abs() < 0.5 * x.0);
    let n = pts.len();
    let mut first = n;
    for i in (0..n).rev() {
        if !ok(&pts[i]) {
            break;
        }
        if i + 1 < n && !(pts[i].0 < pts[i + 1].0) {
            break;
        }
        first = i;
    }
    if n - first < 2 {
        return Err(Error::EmptyRange(
            "curve is not graphical over the cone on any outer interval".into(),
        ));
    }
    let kept = &pts[first..];
    Ok(GraphOverCone {
        r_values: kept.iter().map(|x| x.0).collect(),
        h_values: kept.iter().map(|x| x.1).collect(),
        slopes: kept.iter().map(|x| x.3).collect(),
        valid_range: (kept[0].0, kept[kept.len() - 1].0),
    })
}

impl GraphOverCone {
    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::from("# conelab graph v1\n");
        for (k, v) in meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("r,h\n");
        for (r, h) in self.r_values.iter().zip(&self.h_values) {
            let _ = writeln!(out, "{r},{h}");
        }
        out
    }
}

/// Power law `h ≈ coefficient · r^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub coefficient: f64,
    pub exponent: f64,
    /// Largest `|h - fit| / |h|` over the window.
    pub residual: f64,
    pub samples: usize,
}

fn window(graph: &GraphOverCone, r_lo: f64, r_hi: f64) -> Result<Vec<(f64, f64)>> {
    if !(r_lo > 0.0 && r_hi >= 4.0 * r_lo) {
        return Err(invalid("window", "0 < r_lo and r_hi ≥ 4 r_lo"));
    }
    let (lo, hi) = graph.valid_range;
    let slack = 1e-9 * hi;
    if r_lo < lo || r_hi > hi + slack {
        return Err(Error::OutOfDomain(format!(
            "window [{r_lo}, {r_hi}] not inside valid range [{lo}, {hi}]"
        )));
    }
    let pts: Vec<(f64, f64)> = graph
        .r_values
        .iter()
        .zip(&graph.h_values)
        .filter(|(r, _)| **r >= r_lo && **r <= r_hi)
        .map(|(r, h)| (*r, *h))
        .collect();
    if pts.len() < 16 {
        return Err(Error::EmptyRange(format!(
            "only {} samples in [{r_lo}, {r_hi}], need 16",
            pts.len()
        )));
    }
    if pts.iter().any(|(_, h)| *h == 0.0) {
        return Err(Error::Domain("h vanishes inside the fit window".into()));
    }
    let sign = pts[0].1.signum();
    if pts.iter().any(|(_, h)| h.signum() != sign) {
        return Err(Error::Domain("h changes sign inside the fit window".into()));
    }
    Ok(pts)
}

/// Least-squares fit of `log|h|` against `log r` on `[r_lo, r_hi]`.
pub fn fit_decay(graph: &GraphOverCone, r_lo: f64, r_hi: f64) -> Result<DecayFit> {
    let pts = window(graph, r_lo, r_hi)?;
    let sign = pts[0].1.signum();
    let m = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, h)| h.abs().ln()).collect();
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let exponent = sxy / sxx;
    let coefficient = sign * (ym - exponent * xm).exp();
    let residual = pts
        .iter()
        .map(|(r, h)| ((h - coefficient * r.powf(exponent)) / h).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        coefficient,
        exponent,
        residual,
        samples: pts.len(),
    })
}

/// Coefficient of `r^γ` in a two-term least-squares model
/// `h = c r^γ + d r^{γ_1^-}` on `[r_lo, r_hi]`.
pub fn leading_coefficient(graph: &GraphOverCone, cone: &ConeSpec, r_lo: f64, r_hi: f64) -> Result<f64> {
    let pts = window(graph, r_lo, r_hi)?;
    let (gp, gm) = indicial_roots(cone, link_eigenvalue(cone, 0, 0))?;
    // normalize the basis at r_hi to keep the normal equations well scaled
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, h) in &pts {
        let x = r / r_hi;
        let w = 1.0 / h.abs();
        let f1 = x.powf(gp) * w;
        let f2 = x.powf(gm) * w;
        let y = h * w;
        a11 += f1 * f1;
        a12 += f1 * f2;
        a22 += f2 * f2;
        b1 += f1 * y;
        b2 += f2 * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-14 * a11 * a22 {
        return Err(Error::NonConvergence("two-term fit is singular".into()));
    }
    let c = (b1 * a22 - b2 * a12) / det;
    Ok(c * r_hi.powf(-gp))
}

/// Factor by which `curve` must be dilated so that its leading coefficient
/// becomes `±1`.
pub fn normalization_factor(curve: &ProfileCurve) -> Result<f64> {
    if !matches!(curve.kind, CurveKind::FoliatePlus | CurveKind::FoliateMinus) {
        return Err(invalid("curve", "must be a foliate"));
    }
    let graph = graph_over_cone(curve)?;
    let r_hi = graph.valid_range.1;
    let r_lo = r_hi / 10.0;
    fit_decay(&graph, r_lo, r_hi)?;
    let gamma = cone_density(&curve.cone).gamma;
    let c = leading_coefficient(&graph, &curve.cone, r_lo, r_hi)?;
    // coefficient of λ S scales as λ^{1-γ}
    Ok(c.abs().powf(-1.0 / (1.0 - gamma)))
}

/// Rescale a foliate so that the coefficient of `r^γ` in its graph is `±1`;
/// the result is labelled `lambda = ±1`.
pub fn normalize_foliate(curve: &ProfileCurve) -> Result<ProfileCurve> {
    let factor = normalization_factor(curve)?;
    let mut out = scale_curve(curve, factor)?;
    out.lambda = if curve.kind == CurveKind::FoliatePlus {
        1.0
    } else {
        -1.0
    };
    Ok(out)
}

/// A profile written as a polar graph `r = R(θ)`, valid for curves whose
/// polar angle is strictly monotone (e.g. foliates, which are transverse to
/// the dilation field).
#[derive(Debug, Clone)]
pub struct PolarGraph {
    theta: Vec<f64>,
    radius: Vec<f64>,
    slope: Vec<f64>,
}

impl PolarGraph {
    pub fn new(curve: &ProfileCurve) -> Result<Self> {
        let mut pts: Vec<(f64, f64, f64)> = curve
            .samples
            .iter()
            .map(|smp| {
                let th = smp.theta();
                let r = smp.r();
                let phi = smp.alpha - th;
                (th, r, r * phi.cos() / phi.sin())
            })
            .collect();
        let increasing = pts.windows(2).all(|w| w[1].0 > w[0].0);
        let decreasing = pts.windows(2).all(|w| w[1].0 < w[0].0);
        if !(increasing || decreasing) {
            return Err(Error::Domain(
                "polar angle is not monotone along the curve".into(),
            ));
        }
        if decreasing {
            pts.reverse();
        }
        Ok(Self {
            theta: pts.iter().map(|x| x.0).collect(),
            radius: pts.iter().map(|x| x.1).collect(),
            slope: pts.iter().map(|x| x.2).collect(),
        })
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.theta[0], *self.theta.last().unwrap())
    }

    pub fn radius_at(&self, theta: f64) -> Result<f64> {
        let (lo, hi) = self.theta_range();
        if theta < lo || theta > hi {
            return Err(Error::OutOfDomain(format!(
                "angle {theta} outside [{lo}, {hi}]"
            )));
        }
        let n = self.theta.len();
        let i = match self.theta.binary_search_by(|t| t.total_cmp(&theta)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.theta[i + 1] - self.theta[i];
        let t = (theta - self.theta[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.radius[i]
            + (t3 - 2.0 * t2 + t) * h * self.slope[i]
            + (-2.0 * t3 + 3.0 * t2) * self.radius[i + 1]
            + (t3 - t2) * h * self.slope[i + 1])
    }
}
