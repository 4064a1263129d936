//! Jacobi fields: exact spectral fields on cone annuli, Dirichlet problems
//! with a growth bound, scaled annulus norms, and the equivariant Jacobi ODE
//! along a foliate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{critical_rate, link_volume, spectrum, ConeSpec, IndicialEntry};
use crate::error::{invalid, Error, Result};
use crate::ode::{integrate, OdeOptions, Termination};
use crate::profile::{
    axis_start_expansion, scale_curve, Axis, ProfileCurve, ShootOptions, AXIS_STEP_OFF,
    DEFAULT_MAX_SIGMA_STEP,
};

/// One harmonic of a spectral field: amplitude `c+ r^{γ+} + c- r^{γ-}` times
/// the `index`-th orthonormal eigenfunction of the `(k, l)` eigenspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiMode {
    pub entry: IndicialEntry,
    pub index: u64,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl JacobiMode {
    pub fn amplitude(&self, r: f64) -> f64 {
        self.c_plus * r.powf(self.entry.gamma_plus) + self.c_minus * r.powf(self.entry.gamma_minus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralJacobiField {
    pub cone: ConeSpec,
    pub modes: Vec<JacobiMode>,
    /// `(r_inner, r_outer)`; `r_inner = 0` means a punctured ball.
    pub annulus: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct FieldRecord {
    p: u32,
    q: u32,
    modes: Vec<(u32, u32, u64, f64, f64)>,
    r_inner: f64,
    r_outer: f64,
}

impl SpectralJacobiField {
    pub fn new(cone: ConeSpec, modes: Vec<JacobiMode>, annulus: (f64, f64)) -> Result<Self> {
        if !(annulus.0 >= 0.0 && annulus.1 > annulus.0) {
            return Err(invalid("annulus", "0 ≤ r_inner < r_outer"));
        }
        for m in &modes {
            if m.index >= m.entry.degeneracy {
                return Err(invalid("index", format!("< degeneracy {}", m.entry.degeneracy)));
            }
        }
        Ok(Self { cone, modes, annulus })
    }

    pub fn zero(cone: ConeSpec, annulus: (f64, f64)) -> Result<Self> {
        Self::new(cone, Vec::new(), annulus)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.c_plus == 0.0 && m.c_minus == 0.0)
    }

    pub fn to_json(&self) -> String {
        let rec = FieldRecord {
            p: self.cone.p(),
            q: self.cone.q(),
            modes: self
                .modes
                .iter()
                .map(|m| (m.entry.k, m.entry.l, m.index, m.c_plus, m.c_minus))
                .collect(),
            r_inner: self.annulus.0,
            r_outer: self.annulus.1,
        };
        serde_json::to_string(&rec).expect("plain record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FieldRecord = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let cone = ConeSpec::new(rec.p, rec.q)?;
        let modes = rec
            .modes
            .iter()
            .map(|&(k, l, index, c_plus, c_minus)| {
                Ok(JacobiMode {
                    entry: IndicialEntry::new(&cone, k, l)?,
                    index,
                    c_plus,
                    c_minus,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cone, modes, (rec.r_inner, rec.r_outer))
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        let (lo, hi) = self.annulus;
        if !(r > 0.0 && r >= lo && r <= hi) {
            return Err(Error::OutOfDomain(format!("radius {r} outside [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Radial amplitudes `a_i(r)` of every mode.
pub fn evaluate_field(field: &SpectralJacobiField, r: f64) -> Result<Vec<f64>> {
    field.check_radius(r)?;
    Ok(field.modes.iter().map(|m| m.amplitude(r)).collect())
}

/// `L^2(Σ)`-orthonormal product harmonic of bidegree `(k, l) <= (1, 1)` at
/// the link point `(x, y)`, `|x|, |y|` the link radii.
///
/// Degree-one harmonics are indexed by coordinate: `x_i` for `(1, 0)`,
/// `y_j` for `(0, 1)`, and `x_i y_j` with index `i (q+1) + j` for `(1, 1)`.
pub fn harmonic_value(cone: &ConeSpec, k: u32, l: u32, index: u64, x: &[f64], y: &[f64]) -> Result<f64> {
    let (p1, q1) = (cone.p() as usize + 1, cone.q() as usize + 1);
    if x.len() != p1 || y.len() != q1 {
        return Err(invalid("point", format!("x in R^{p1}, y in R^{q1}")));
    }
    let (a, b) = cone.link_radii();
    let norm = link_volume(cone).sqrt();
    let idx = index as usize;
    match (k, l) {
        (0, 0) if idx == 0 => Ok(1.0 / norm),
        (1, 0) if idx < p1 => Ok((p1 as f64).sqrt() * x[idx] / a / norm),
        (0, 1) if idx < q1 => Ok((q1 as f64).sqrt() * y[idx] / b / norm),
        (1, 1) if idx < p1 * q1 => {
            let (i, j) = (idx / q1, idx % q1);
            Ok(((p1 * q1) as f64).sqrt() * x[i] / a * y[j] / b / norm)
        }
        _ => Err(Error::OutOfDomain(format!(
            "pointwise harmonic ({k}, {l}) index {index} not available"
        ))),
    }
}

/// Pointwise value of the field at `r ω`, `ω = (x, y)` on the link.
pub fn evaluate_pointwise(field: &SpectralJacobiField, r: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let amps = evaluate_field(field, r)?;
    let mut acc = 0.0;
    for (m, a) in field.modes.iter().zip(amps) {
        acc += a * harmonic_value(&field.cone, m.entry.k, m.entry.l, m.index, x, y)?;
    }
    Ok(acc)
}

/// Coefficients `(c+, c-)` of the mode taking the given amplitudes on the
/// two boundary spheres of an annulus.
pub fn solve_mode_annulus(
    entry: &IndicialEntry,
    inner_value: f64,
    outer_value: f64,
    r_inner: f64,
    r_outer: f64,
) -> Result<(f64, f64)> {
    if !(r_inner > 0.0 && r_outer > r_inner) {
        return Err(invalid("annulus", "0 < r_inner < r_outer"));
    }
    let (gp, gm) = (entry.gamma_plus, entry.gamma_minus);
    if gp == gm {
        return Err(Error::Domain("indicial roots coincide".into()));
    }
    // basis rescaled to 1 at the outer radius
    let x = r_inner / r_outer;
    let (a, b) = (x.powf(gp), x.powf(gm));
    let det = a - b;
    let cp = (inner_value - b * outer_value) / det;
    let cm = (a * outer_value - inner_value) / det;
    Ok((cp * r_outer.powf(-gp), cm * r_outer.powf(-gm)))
}

/// Jacobi field on `C ∩ B_1` with boundary data `g_i` on the listed modes and
/// amplitude bounded by `C r^{(2-n)/2}`: every `r^{γ-}` coefficient must vanish.
pub fn solve_dirichlet_ball_bounded(
    cone: &ConeSpec,
    boundary_modes: &[(IndicialEntry, u64, f64)],
) -> Result<SpectralJacobiField> {
    let beta = critical_rate(cone);
    let modes = boundary_modes
        .iter()
        .map(|&(entry, index, g)| {
            debug_assert!(entry.gamma_plus > beta && entry.gamma_minus < beta);
            JacobiMode {
                entry,
                index,
                c_plus: g,
                c_minus: 0.0,
            }
        })
        .collect();
    SpectralJacobiField::new(*cone, modes, (0.0, 1.0))
}

fn check_rho0(rho0: f64) -> Result<()> {
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(invalid("rho0", "in (0,1)"));
    }
    Ok(())
}

/// `∫_lo^hi r^{e-1} dr`.
fn power_integral(e: f64, lo: f64, hi: f64) -> f64 {
    if e == 0.0 {
        (hi / lo).ln()
    } else {
        (hi.powf(e) - lo.powf(e)) / e
    }
}

/// `‖u‖_{ρ0,k}`: the `L^2` norm of `u r^{-n/2}` over `C ∩ (B_{ρ0^k} \ B_{ρ0^{k+1}})`,
/// in closed form.
pub fn annulus_norm(field: &SpectralJacobiField, rho0: f64, k: i32) -> Result<f64> {
    check_rho0(rho0)?;
    let hi = rho0.powi(k);
    let lo = rho0.powi(k + 1);
    let (a, b) = field.annulus;
    if lo < a || hi > b * (1.0 + 1e-15) || lo <= 0.0 {
        return Err(Error::OutOfDomain(format!(
            "annulus [{lo}, {hi}] outside field domain [{a}, {b}]"
        )));
    }
    let mut total = 0.0;
    for m in &field.modes {
        let (gp, gm) = (m.entry.gamma_plus, m.entry.gamma_minus);
        total += m.c_plus * m.c_plus * power_integral(2.0 * gp, lo, hi)
            + 2.0 * m.c_plus * m.c_minus * power_integral(gp + gm, lo, hi)
            + m.c_minus * m.c_minus * power_integral(2.0 * gm, lo, hi);
    }
    Ok(total.max(0.0).sqrt())
}

/// Same norm for a radial function given by `sq(r) = ‖u(r ·)‖^2_{L^2(Σ)}`,
/// by adaptive quadrature in `log r`.
pub fn annulus_norm_quadrature<F: Fn(f64) -> f64>(sq: &F, rho0: f64, k: i32) -> Result<f64> {
    check_rho0(rho0)?;
    let lo = (rho0.powi(k + 1)).ln();
    let hi = (rho0.powi(k)).ln();
    let g = |t: f64| sq(t.exp());
    Ok(crate::quad::adaptive(&g, lo, hi, 1e-13, 1e-300)?.max(0.0).sqrt())
}

/// Same norm for sampled data `(r_j, sq_j)`, trapezoidal in `log r` with
/// linear interpolation at the annulus ends.
pub fn annulus_norm_sampled(r: &[f64], sq: &[f64], rho0: f64, k: i32) -> Result<f64> {
    check_rho0(rho0)?;
    if r.len() != sq.len() || r.len() < 2 {
        return Err(invalid("samples", "matching lengths ≥ 2"));
    }
    let (lo, hi) = (rho0.powi(k + 1), rho0.powi(k));
    if lo < r[0] || hi > r[r.len() - 1] {
        return Err(Error::OutOfDomain(format!(
            "annulus [{lo}, {hi}] not covered by samples"
        )));
    }
    let at = |x: f64| -> f64 {
        let i = r.partition_point(|&v| v <= x).clamp(1, r.len() - 1);
        let t = (x.ln() - r[i - 1].ln()) / (r[i].ln() - r[i - 1].ln());
        sq[i - 1] + t * (sq[i] - sq[i - 1])
    };
    let mut pts = vec![(lo.ln(), at(lo))];
    pts.extend(
        r.iter()
            .zip(sq)
            .filter(|(x, _)| **x > lo && **x < hi)
            .map(|(x, y)| (x.ln(), *y)),
    );
    pts.push((hi.ln(), at(hi)));
    let total: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    Ok(total.max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusNorms {
    pub rho0: f64,
    pub values: BTreeMap<i32, f64>,
}

impl AnnulusNorms {
    pub fn compute(field: &SpectralJacobiField, rho0: f64, ks: impl IntoIterator<Item = i32>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for k in ks {
            values.insert(k, annulus_norm(field, rho0, k)?);
        }
        Ok(Self { rho0, values })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,norm\n");
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreeAnnulusOutcome {
    pub hypothesis_holds: bool,
    pub conclusion_holds: bool,
}

impl ThreeAnnulusOutcome {
    pub fn implication_holds(&self) -> bool {
        !self.hypothesis_holds || self.conclusion_holds
    }
}

/// Both inequalities of the three-annulus dichotomy at annuli `k, k+1, k+2`:
/// hypothesis `‖u‖_{k+1} ≥ ρ0^{(2-n)/2} ‖u‖_k`, conclusion
/// `‖u‖_{k+2} ≥ ρ0^{(2-n)/2} ‖u‖_{k+1}`.
pub fn three_annulus_check(field: &SpectralJacobiField, rho0: f64, k: i32) -> Result<ThreeAnnulusOutcome> {
    let f = rho0.powf(critical_rate(&field.cone));
    let n0 = annulus_norm(field, rho0, k)?;
    let n1 = annulus_norm(field, rho0, k + 1)?;
    let n2 = annulus_norm(field, rho0, k + 2)?;
    Ok(ThreeAnnulusOutcome {
        hypothesis_holds: n1 >= f * n0,
        conclusion_holds: n2 >= f * n1,
    })
}

/// Seeded random field on the annulus `(ρ0^annuli, 1)`: every mode with
/// `k, l <= max_degree` (the first two harmonics of each eigenspace), both
/// coefficients uniform in `[-1, 1]`.
pub fn random_field(
    cone: &ConeSpec,
    max_degree: u32,
    rho0: f64,
    annuli: i32,
    seed: u64,
) -> Result<SpectralJacobiField> {
    check_rho0(rho0)?;
    if annuli < 3 {
        return Err(invalid("annuli", "≥ 3"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for entry in spectrum(cone, max_degree)? {
        for index in 0..entry.degeneracy.min(2) {
            modes.push(JacobiMode {
                entry,
                index,
                c_plus: rng.random_range(-1.0..=1.0),
                c_minus: rng.random_range(-1.0..=1.0),
            });
        }
    }
    SpectralJacobiField::new(*cone, modes, (rho0.powi(annuli), 1.0))
}

/// Drift `W'/W` and potential `|A|^2` of the equivariant Jacobi operator
/// `w'' + (W'/W) w' + |A|^2 w` at a profile point.
pub fn jacobi_coefficients(cone: &ConeSpec, u: f64, v: f64, alpha: f64) -> Result<(f64, f64)> {
    let kappa = crate::profile::curvature_rhs(cone, u, v, alpha)?;
    let (sa, ca) = alpha.sin_cos();
    let drift = cone.p() as f64 * ca / u + cone.q() as f64 * sa / v;
    let a2 = crate::profile::second_fundamental_sq(cone, u, v, alpha, kappa)?;
    Ok((drift, a2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiSample {
    pub s: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    /// `dw/ds`.
    pub dw: f64,
}

impl JacobiSample {
    pub fn r(&self) -> f64 {
        self.u.hypot(self.v)
    }
}

/// An equivariant Jacobi field along a foliate profile.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSolution {
    pub samples: Vec<JacobiSample>,
}

impl JacobiSolution {
    /// Cubic Hermite interpolation of `w` in arclength.
    pub fn value_at(&self, s: f64) -> f64 {
        let n = self.samples.len();
        let i = self
            .samples
            .partition_point(|x| x.s <= s)
            .clamp(1, n - 1)
            - 1;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let h = b.s - a.s;
        let t = (s - a.s) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * a.w
            + (t3 - 2.0 * t2 + t) * h * a.dw
            + (-2.0 * t3 + 3.0 * t2) * b.w
            + (t3 - t2) * h * b.dw
    }
}

/// Condition imposed at the axis end of the foliate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerData {
    /// Regular (`w' = 0`) with the given axis value.
    Axis(f64),
    /// Regular, amplitude fixed by the outer value.
    AxisFree,
}

/// Solve `(W w')'/W + |A|^2 w = 0` along a foliate, jointly integrating the
/// profile from its axis point out to the foliate's last radius.
pub fn equivariant_jacobi_solve(
    foliate: &ProfileCurve,
    inner: InnerData,
    outer_value: Option<f64>,
) -> Result<JacobiSolution> {
    let axis = foliate
        .axis
        .ok_or_else(|| invalid("foliate", "must start on an axis"))?;
    let w0 = match (inner, outer_value) {
        (InnerData::Axis(w0), None) => w0,
        (InnerData::AxisFree, Some(_)) => 1.0,
        (InnerData::Axis(_), Some(_)) => {
            return Err(invalid("data", "axis value and outer value overdetermine the field"))
        }
        (InnerData::AxisFree, None) => return Err(invalid("data", "no condition fixes the amplitude")),
    };
    let r_stop = foliate.last().r();
    let tol = if foliate.tolerance > 0.0 {
        foliate.tolerance
    } else {
        crate::profile::DEFAULT_TOL
    };
    let opts = ShootOptions::with_tol(tol);
    let mut sol = match axis {
        Axis::U => regular_jacobi(&foliate.cone, foliate.u0, w0, r_stop, &opts)?,
        Axis::V => {
            let mut s = regular_jacobi(&foliate.cone.swapped(), foliate.u0, w0, r_stop, &opts)?;
            for x in &mut s.samples {
                std::mem::swap(&mut x.u, &mut x.v);
            }
            s
        }
    };
    if let Some(target) = outer_value {
        let end = sol.samples.last().expect("nonempty").w;
        if end == 0.0 {
            return Err(Error::NonConvergence("regular solution vanishes at the outer radius".into()));
        }
        let c = target / end;
        for x in &mut sol.samples {
            x.w *= c;
            x.dw *= c;
        }
    }
    Ok(sol)
}

fn regular_jacobi(cone: &ConeSpec, u0: f64, w0: f64, r_stop: f64, opts: &ShootOptions) -> Result<JacobiSolution> {
    let c2 = axis_start_expansion(cone, u0, Axis::U)?;
    let (p, q) = (cone.p() as f64, cone.q() as f64);
    let v = AXIS_STEP_OFF * u0;
    let slope = 2.0 * c2 * v;
    let a2_axis = 4.0 * (q + 1.0) * c2 * c2 + p / (u0 * u0);
    let y0 = [
        v + 2.0 / 3.0 * c2 * c2 * v * v * v,
        u0 + c2 * v * v,
        v,
        1.0f64.atan2(slope),
        w0 * (1.0 - a2_axis * v * v / (2.0 * (q + 1.0))),
        -w0 * a2_axis * v / (q + 1.0),
    ];
    let rhs = |_t: f64, y: &[f64; 6]| -> [f64; 6] {
        let (u, v, a) = (y[1], y[2], y[3]);
        let r = u.hypot(v);
        let (sa, ca) = a.sin_cos();
        let kappa = q * ca / v - p * sa / u;
        let drift = p * ca / u + q * sa / v;
        let a2 = kappa * kappa + p * sa * sa / (u * u) + q * ca * ca / (v * v);
        [
            r,
            r * ca,
            r * sa,
            r * kappa,
            r * y[5],
            -r * (drift * y[5] + a2 * y[4]),
        ]
    };
    let event = |_t: f64, y: &[f64; 6]| y[1].hypot(y[2]) - r_stop;
    let guard = |_t: f64, y: &[f64; 6]| -> std::result::Result<(), String> {
        if y[1] > 0.0 && y[2] > 0.0 {
            Ok(())
        } else {
            Err("profile left the quarter plane".into())
        }
    };
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        h_init: 1e-4,
        h_max: DEFAULT_MAX_SIGMA_STEP,
        h_min: 1e-15,
        max_steps: 5_000_000,
    };
    let span = 2.0 * (r_stop / u0).ln().abs() + 50.0;
    let traj = integrate(&rhs, 0.0, y0, span, &ode, Some(&event), &guard)?;
    if traj.termination != Termination::Event {
        return Err(Error::NonConvergence(format!("Jacobi shot did not reach radius {r_stop}")));
    }
    let mut samples = vec![JacobiSample {
        s: 0.0,
        u: u0,
        v: 0.0,
        w: w0,
        dw: 0.0,
    }];
    samples.extend(traj.y.iter().map(|y| JacobiSample {
        s: y[0],
        u: y[1],
        v: y[2],
        w: y[4],
        dw: y[5],
    }));
    Ok(JacobiSolution { samples })
}

/// The scaling field `d/dλ|_{λ=1}` of the family `λ S` as a normal
/// displacement of `S` (left normal), by centered differences of scaled
/// copies. Returned at the samples of `S` with `r <= 0.9 r_max`, as
/// `(s, r, w)`.
pub fn scaling_field_fd(foliate: &ProfileCurve, delta: f64) -> Result<Vec<(f64, f64, f64)>> {
    if !(delta > 0.0 && delta < 0.1) {
        return Err(invalid("delta", "in (0, 0.1)"));
    }
    let up = scale_curve(foliate, 1.0 + delta)?;
    let down = scale_curve(foliate, 1.0 - delta)?;
    let r_cap = 0.9 * foliate.last().r();
    Ok(foliate
        .samples
        .iter()
        .filter(|smp| smp.r() <= r_cap)
        .map(|smp| {
            let pt = (smp.u, smp.v);
            let w = -(up.signed_distance(pt) - down.signed_distance(pt)) / (2.0 * delta);
            (smp.s, smp.r(), w)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFieldCheck {
    /// Sup over samples of `|w_fd - c w_ode| / |w_fd|`, `c` matched at the axis.
    pub residual: f64,
    pub fitted_rate: f64,
    pub gamma: f64,
}

impl ScalingFieldCheck {
    pub fn rate_error(&self) -> f64 {
        ((self.fitted_rate - self.gamma) / self.gamma).abs()
    }
}

/// Compare the finite-difference scaling field of a foliate with the regular
/// solution of the equivariant Jacobi ODE, and fit its decay rate on
/// `[r_lo, r_hi]`.
pub fn scaling_field_check(foliate: &ProfileCurve, delta: f64, r_lo: f64, r_hi: f64) -> Result<ScalingFieldCheck> {
    let fd = scaling_field_fd(foliate, delta)?;
    let ode = equivariant_jacobi_solve(foliate, InnerData::Axis(1.0), None)?;
    let c = fd[0].2 / ode.value_at(fd[0].0);
    let residual = fd
        .iter()
        .map(|&(s, _, w)| ((w - c * ode.value_at(s)) / w).abs())
        .fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = fd
        .iter()
        .filter(|(_, r, _)| *r >= r_lo && *r <= r_hi)
        .map(|&(_, r, w)| (r.ln(), w.abs().ln()))
        .collect();
    if pts.len() < 16 {
        return Err(Error::EmptyRange(format!(
            "only {} samples in [{r_lo}, {r_hi}]",
            pts.len()
        )));
    }
    Ok(ScalingFieldCheck {
        residual,
        fitted_rate: slope(&pts),
        gamma: crate::cone::cone_density(&foliate.cone).gamma,
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchScan {
    pub r_match: f64,
    pub lambdas: Vec<f64>,
    pub mismatches: Vec<f64>,
}

impl MismatchScan {
    pub fn min_mismatch(&self) -> f64 {
        self.mismatches.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// For each leaf `λ S` of the given (unit) foliate, rescale the regular
/// Jacobi field so that `w(r_match) = r_match^{(2-n)/2}` and record the sup
/// of `|w - r^{(2-n)/2}| / r^{(2-n)/2}` over `[r_match/10, r_match]`.
///
/// The foliate must reach `r_match / min(λ)`.
pub fn mismatch_scan(foliate: &ProfileCurve, lambdas: &[f64], r_match: f64) -> Result<MismatchScan> {
    let sol = equivariant_jacobi_solve(foliate, InnerData::Axis(1.0), None)?;
    let beta = critical_rate(&foliate.cone);
    let r_end = sol.samples.last().expect("nonempty").r();
    let mut mismatches = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        if !(lam > 0.0) {
            return Err(invalid("lambda", "> 0"));
        }
        // the leaf λS at radius r is S at radius r/λ; w is scale invariant
        let (lo, hi) = (r_match / (10.0 * lam), r_match / lam);
        if hi > r_end * (1.0 + 1e-12) || lo <= foliate.u0 {
            return Err(Error::OutOfDomain(format!(
                "window [{lo}, {hi}] not covered by the foliate"
            )));
        }
        let s_hi = s_at_radius(&sol, hi);
        let scale = r_match.powf(beta) / sol.value_at(s_hi);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for x in sol.samples.iter().filter(|x| x.r() >= lo && x.r() <= hi) {
            let target = (lam * x.r()).powf(beta);
            worst = worst.max((scale * x.w - target).abs() / target);
            count += 1;
        }
        if count < 16 {
            return Err(Error::EmptyRange(format!("only {count} samples in scan window")));
        }
        mismatches.push(worst);
    }
    Ok(MismatchScan {
        r_match,
        lambdas: lambdas.to_vec(),
        mismatches,
    })
}

fn s_at_radius(sol: &JacobiSolution, r: f64) -> f64 {
    let i = sol.samples.partition_point(|x| x.r() < r).clamp(1, sol.samples.len() - 1);
    let (a, b) = (&sol.samples[i - 1], &sol.samples[i]);
    a.s + (r - a.r()) / (b.r() - a.r()) * (b.s - a.s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::IndicialEntry;

    fn simons() -> ConeSpec {
        ConeSpec::new(3, 3).unwrap()
    }

    fn pure(cone: &ConeSpec, k: u32, l: u32, cp: f64, cm: f64, annulus: (f64, f64)) -> SpectralJacobiField {
        let entry = IndicialEntry::new(cone, k, l).unwrap();
        SpectralJacobiField::new(
            *cone,
            vec![JacobiMode {
                entry,
                index: 0,
                c_plus: cp,
                c_minus: cm,
            }],
            annulus,
        )
        .unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let c = simons();
        let f = pure(&c, 0, 0, 1.0, 0.0, (0.1, 10.0));
        assert_eq!(evaluate_field(&f, 1.0).unwrap(), vec![1.0]);
        assert!((evaluate_field(&f, 2.0).unwrap()[0] - 0.25).abs() < 1e-15);
        assert!(matches!(evaluate_field(&f, 20.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn radial_equation_by_finite_differences() {
        let c = ConeSpec::new(2, 4).unwrap();
        let n = c.n() as f64;
        for entry in spectrum(&c, 3).unwrap() {
            let f = SpectralJacobiField::new(
                c,
                vec![JacobiMode {
                    entry,
                    index: 0,
                    c_plus: 0.7,
                    c_minus: -1.3,
                }],
                (0.5, 2.0),
            )
            .unwrap();
            let a = |r: f64| evaluate_field(&f, r).unwrap()[0];
            let h = 1e-4;
            for r in [0.6, 1.0, 1.7] {
                let d1 = (a(r + h) - a(r - h)) / (2.0 * h);
                let d2 = (a(r + h) - 2.0 * a(r) + a(r - h)) / (h * h);
                let res = d2 + (n - 1.0) * d1 / r - entry.mu * a(r) / (r * r);
                let scale = d2.abs() + ((n - 1.0) * d1 / r).abs() + (entry.mu * a(r) / (r * r)).abs();
                assert!(res.abs() < 1e-6 * scale.max(1.0), "{entry:?} r={r} res={res}");
            }
        }
    }

    #[test]
    fn mode_annulus_solve() {
        let c = simons();
        let e = IndicialEntry::new(&c, 0, 0).unwrap();
        assert_eq!(solve_mode_annulus(&e, 0.0, 0.0, 0.5, 1.0).unwrap(), (0.0, 0.0));
        let (cp, cm) = solve_mode_annulus(&e, 4.0, 1.0, 0.5, 1.0).unwrap();
        assert!((cp - 1.0).abs() < 1e-13 && cm.abs() < 1e-13);
        for (k, l) in [(1, 0), (2, 3), (3, 3)] {
            let e = IndicialEntry::new(&c, k, l).unwrap();
            let (cp, cm) = solve_mode_annulus(&e, 0.3, -2.2, 0.2, 3.0).unwrap();
            let m = JacobiMode {
                entry: e,
                index: 0,
                c_plus: cp,
                c_minus: cm,
            };
            assert!((m.amplitude(0.2) - 0.3).abs() < 1e-12 * 0.3);
            assert!((m.amplitude(3.0) + 2.2).abs() < 1e-12 * 2.2);
        }
        assert!(solve_mode_annulus(&e, 1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn dirichlet_ball_bounded() {
        let c = simons();
        let e = IndicialEntry::new(&c, 0, 0).unwrap();
        let zero = solve_dirichlet_ball_bounded(&c, &[(e, 0, 0.0)]).unwrap();
        assert!(zero.is_zero());
        let f = solve_dirichlet_ball_bounded(&c, &[(e, 0, 1.0)]).unwrap();
        assert_eq!((f.modes[0].c_plus, f.modes[0].c_minus), (1.0, 0.0));
        assert!((evaluate_field(&f, 0.5).unwrap()[0] - 4.0).abs() < 1e-13);
        assert_eq!(f.annulus, (0.0, 1.0));
    }

    #[test]
    fn norm_examples() {
        let c = simons();
        let f = pure(&c, 0, 0, 1.0, 0.0, (0.0, 1.0));
        let n0 = annulus_norm(&f, 0.5, 0).unwrap();
        assert!((n0 - 3.75f64.sqrt()).abs() < 1e-14);
        let n1 = annulus_norm(&f, 0.5, 1).unwrap();
        assert!((n1 / n0 - 4.0).abs() < 1e-12);
        let z = SpectralJacobiField::zero(c, (0.0, 1.0)).unwrap();
        assert_eq!(annulus_norm(&z, 0.5, 0).unwrap(), 0.0);
        assert!(matches!(annulus_norm(&f, 1.5, 0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn norm_closed_form_matches_quadrature() {
        let c = ConeSpec::new(2, 4).unwrap();
        let f = random_field(&c, 3, 0.5, 6, 7).unwrap();
        for k in 0..5 {
            let sq = |r: f64| {
                evaluate_field(&f, r)
                    .unwrap()
                    .iter()
                    .map(|a| a * a)
                    .sum::<f64>()
            };
            let closed = annulus_norm(&f, 0.5, k).unwrap();
            let quad = annulus_norm_quadrature(&sq, 0.5, k).unwrap();
            assert!((closed - quad).abs() < 1e-10 * closed, "{k}: {closed} vs {quad}");
        }
    }

    #[test]
    fn sampled_norm_converges() {
        let c = simons();
        let f = pure(&c, 0, 0, 1.0, 0.3, (0.0, 1.0));
        let r: Vec<f64> = (0..=4000).map(|i| (0.1f64).powf(1.0 - i as f64 / 4000.0)).collect();
        let sq: Vec<f64> = r.iter().map(|&x| evaluate_field(&f, x).unwrap()[0].powi(2)).collect();
        let a = annulus_norm_sampled(&r, &sq, 0.5, 1).unwrap();
        let b = annulus_norm(&f, 0.5, 1).unwrap();
        assert!((a - b).abs() < 1e-5 * b);
    }

    #[test]
    fn three_annulus_examples() {
        let c = simons();
        let e = IndicialEntry::new(&c, 0, 0).unwrap();
        let decaying = SpectralJacobiField::new(
            c,
            vec![JacobiMode {
                entry: e,
                index: 0,
                c_plus: 0.0,
                c_minus: 1.0,
            }],
            (1e-3, 1.0),
        )
        .unwrap();
        let out = three_annulus_check(&decaying, 0.5, 0).unwrap();
        assert!(out.hypothesis_holds && out.conclusion_holds);
        let growing = pure(&c, 0, 0, 1.0, 0.0, (1e-3, 1.0));
        let out = three_annulus_check(&growing, 0.5, 0).unwrap();
        assert!(!out.hypothesis_holds && out.implication_holds());
    }

    #[test]
    fn json_round_trip() {
        let f = random_field(&simons(), 2, 0.5, 5, 11).unwrap();
        let back = SpectralJacobiField::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        assert!(SpectralJacobiField::from_json("{").is_err());
    }

    #[test]
    fn random_fields_are_seeded() {
        let c = simons();
        assert_eq!(random_field(&c, 3, 0.5, 6, 1).unwrap(), random_field(&c, 3, 0.5, 6, 1).unwrap());
        assert_ne!(random_field(&c, 3, 0.5, 6, 1).unwrap(), random_field(&c, 3, 0.5, 6, 2).unwrap());
    }

    #[test]
    fn harmonics_addition_theorem() {
        // Σ_i φ_i(ω)^2 = dim / |Σ| for each eigenspace
        let c = ConeSpec::new(2, 3).unwrap();
        let (a, b) = c.link_radii();
        let x = [a * 0.6, a * 0.0, a * 0.8];
        let y = [b * 0.5, -b * 0.5, b * 0.5, b * 0.5];
        let vol = link_volume(&c);
        for (k, l, dim) in [(0u32, 0u32, 1u64), (1, 0, 3), (0, 1, 4), (1, 1, 12)] {
            let s: f64 = (0..dim)
                .map(|i| harmonic_value(&c, k, l, i, &x, &y).unwrap().powi(2))
                .sum();
            assert!((s - dim as f64 / vol).abs() < 1e-13, "({k},{l})");
        }
        assert!(harmonic_value(&c, 2, 0, 0, &x, &y).is_err());
    }

    #[test]
    fn jacobi_operator_on_cone_reduces_to_radial_equation() {
        for (p, q) in [(3, 3), (2, 4), (1, 6)] {
            let c = ConeSpec::new(p, q).unwrap();
            let th = c.cone_angle();
            let e = IndicialEntry::new(&c, 0, 0).unwrap();
            for g in [e.gamma_plus, e.gamma_minus] {
                for r in [0.3, 1.0, 4.0] {
                    let (drift, a2) = jacobi_coefficients(&c, r * th.cos(), r * th.sin(), th).unwrap();
                    let w = r.powf(g);
                    let res = g * (g - 1.0) * r.powf(g - 2.0) + drift * g * r.powf(g - 1.0) + a2 * w;
                    assert!(res.abs() < 1e-8 * r.powf(g - 2.0), "({p},{q}) g={g} r={r}");
                }
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let f = crate::profile::shoot_foliate(&simons(), crate::profile::Sign::Plus, 20.0, 1e-10).unwrap();
        let s = equivariant_jacobi_solve(&f, InnerData::Axis(0.0), None).unwrap();
        assert!(s.samples.iter().all(|x| x.w == 0.0 && x.dw == 0.0));
        assert!(equivariant_jacobi_solve(&f, InnerData::AxisFree, None).is_err());
    }

    #[test]
    fn regular_solution_is_the_scaling_field() {
        // oracle: <x, ν> with ν the left unit normal
        let f = crate::profile::shoot_foliate(&simons(), crate::profile::Sign::Plus, 50.0, 1e-10).unwrap();
        let sol = equivariant_jacobi_solve(&f, InnerData::Axis(-1.0), None).unwrap();
        for smp in f.samples.iter().skip(1).step_by(7) {
            let exact = -smp.u * smp.alpha.sin() + smp.v * smp.alpha.cos();
            let got = sol.value_at(smp.s);
            assert!((got - exact).abs() < 1e-6 * exact.abs(), "r={} {got} vs {exact}", smp.r());
        }
    }
}
