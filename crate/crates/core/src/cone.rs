//! Quadratic cones `C(S^p x S^q) = {q|x|^2 = p|y|^2}` in `R^{p+1} x R^{q+1}`.
//!
//! Everything here is closed form: the link is the product of round spheres
//! `S^p(sqrt(p/(n-1))) x S^q(sqrt(q/(n-1)))`, so the spectrum of the link
//! Jacobi operator `L = Δ + (n-1)` follows from the spherical-harmonic
//! spectrum of each factor.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default harmonic degree cutoff used for spectral bookkeeping.
pub const DEFAULT_MAX_DEGREE: u32 = 3;

/// Side of the cone in `R^{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `q|x|^2 > p|y|^2`.
    Plus,
    /// `q|x|^2 < p|y|^2`.
    Minus,
    OnCone,
}

/// Orientation convention of the cone's unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    /// The unit normal points into `E_+ = {q|x|^2 > p|y|^2}`.
    IntoPlus,
}

/// A quadratic cone, identified by its sphere dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConeSpec {
    p: u32,
    q: u32,
}

impl ConeSpec {
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if p < 1 {
            return Err(invalid("p", "≥ 1"));
        }
        if q < 1 {
            return Err(invalid("q", "≥ 1"));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Hypersurface dimension `n = p + q + 1`.
    pub fn n(&self) -> u32 {
        self.p + self.q + 1
    }

    pub fn orientation(&self) -> Orientation {
        Orientation::IntoPlus
    }

    /// Angle of the cone line in the `(u, v) = (|x|, |y|)` quarter plane.
    pub fn cone_angle(&self) -> f64 {
        (self.q as f64 / self.p as f64).sqrt().atan()
    }

    /// The cone with the roles of the two sphere factors exchanged.
    pub fn swapped(&self) -> ConeSpec {
        ConeSpec {
            p: self.q,
            q: self.p,
        }
    }

    /// Radii `(r_p, r_q)` of the link factors inside the unit sphere.
    pub fn link_radii(&self) -> (f64, f64) {
        let m = (self.n() - 1) as f64;
        ((self.p as f64 / m).sqrt(), (self.q as f64 / m).sqrt())
    }

    /// Which side of the cone the orbit through `(u, v)` lies on.
    pub fn region(&self, u: f64, v: f64) -> Region {
        let s = self.side_function(u, v);
        if s > 0.0 {
            Region::Plus
        } else if s < 0.0 {
            Region::Minus
        } else {
            Region::OnCone
        }
    }

    /// `q u^2 - p v^2`; positive in `E_+`.
    pub fn side_function(&self, u: f64, v: f64) -> f64 {
        self.q as f64 * u * u - self.p as f64 * v * v
    }

    /// Unit normal of the cone line in the `(u, v)` plane, pointing into `E_+`.
    pub fn plane_normal(&self) -> (f64, f64) {
        let theta = self.cone_angle();
        (theta.sin(), -theta.cos())
    }
}

/// Sufficient condition for `C(S^p x S^q)` to be area minimizing: `p + q > 6`
/// or `(p, q)` one of `(3,3)`, `(2,4)`, `(4,2)`.
///
/// This is the known sufficient condition, not an equivalence.
pub fn satisfies_minimizing_criterion(p: u32, q: u32) -> Result<bool> {
    ConeSpec::new(p, q)?;
    Ok(p + q > 6 || matches!((p, q), (3, 3) | (2, 4) | (4, 2)))
}

/// `H^k` measure of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn unit_sphere_area(k: u32) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_area(k - 2),
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    unit_sphere_area(n - 1) / n as f64
}

/// Dimension of the degree-`k` spherical harmonics on `S^p`.
pub fn harmonic_dimension(p: u32, k: u32) -> u64 {
    let binom = |a: u64, b: u64| -> u64 {
        if b > a {
            return 0;
        }
        let b = b.min(a - b);
        (0..b).fold(1u64, |acc, i| acc * (a - i) / (i + 1))
    };
    let (p, k) = (p as u64, k as u64);
    let lead = binom(k + p, p);
    if k >= 2 {
        lead - binom(k + p - 2, p)
    } else {
        lead
    }
}

/// Eigenvalue `mu` of `-(Δ_Σ + (n-1))` on product harmonics of bidegree `(k, l)`.
pub fn link_eigenvalue(cone: &ConeSpec, k: u32, l: u32) -> f64 {
    let m = (cone.n() - 1) as f64;
    let (p, q) = (cone.p as f64, cone.q as f64);
    let (k, l) = (k as f64, l as f64);
    m / p * k * (k + p - 1.0) + m / q * l * (l + q - 1.0) - m
}

/// Roots of `γ^2 + (n-2)γ - μ = 0`, returned as `(γ+, γ-)`.
pub fn indicial_roots(cone: &ConeSpec, mu: f64) -> Result<(f64, f64)> {
    let nm2 = cone.n() as f64 - 2.0;
    let discriminant = nm2 * nm2 + 4.0 * mu;
    if discriminant < 0.0 {
        return Err(Error::ComplexRoots { discriminant });
    }
    let root = discriminant.sqrt();
    Ok(((-nm2 + root) / 2.0, (-nm2 - root) / 2.0))
}

/// The critical rate `(2-n)/2` separating the two roots of every mode.
pub fn critical_rate(cone: &ConeSpec) -> f64 {
    (2.0 - cone.n() as f64) / 2.0
}

/// A link eigenmode together with its indicial roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicialEntry {
    pub k: u32,
    pub l: u32,
    pub mu: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub degeneracy: u64,
}

impl IndicialEntry {
    pub fn new(cone: &ConeSpec, k: u32, l: u32) -> Result<Self> {
        let mu = link_eigenvalue(cone, k, l);
        let (gamma_plus, gamma_minus) = indicial_roots(cone, mu)?;
        Ok(Self {
            k,
            l,
            mu,
            gamma_plus,
            gamma_minus,
            degeneracy: harmonic_dimension(cone.p, k) * harmonic_dimension(cone.q, l),
        })
    }
}

/// All modes with `k, l <= max_degree`, sorted by eigenvalue (ties by `(k, l)`).
///
/// Fails with [`Error::ComplexRoots`] if any mode in range is not strictly stable.
pub fn spectrum(cone: &ConeSpec, max_degree: u32) -> Result<Vec<IndicialEntry>> {
    let mut entries = Vec::new();
    for k in 0..=max_degree {
        for l in 0..=max_degree {
            entries.push(IndicialEntry::new(cone, k, l)?);
        }
    }
    entries.sort_by(|a, b| {
        a.mu.total_cmp(&b.mu)
            .then(a.k.cmp(&b.k))
            .then(a.l.cmp(&b.l))
    });
    Ok(entries)
}

/// Smallest distance from any indicial root (modes with `k, l <= max_degree`)
/// to the critical rate `(2-n)/2`.
///
/// A mode with complex roots has real part exactly `(2-n)/2`, so an unstable
/// cone yields `0`.
pub fn growth_gap(cone: &ConeSpec, max_degree: u32) -> Result<f64> {
    if max_degree < 1 {
        return Err(invalid("max_degree", "≥ 1"));
    }
    let nm2 = cone.n() as f64 - 2.0;
    let mut gap = f64::INFINITY;
    for k in 0..=max_degree {
        for l in 0..=max_degree {
            let disc = nm2 * nm2 + 4.0 * link_eigenvalue(cone, k, l);
            gap = gap.min(disc.max(0.0).sqrt() / 2.0);
        }
    }
    Ok(gap)
}

/// Density and spectral constants of a cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants {
    /// `Θ(C) = |Σ| / (n ω_n)`.
    pub theta_c: f64,
    /// `H^{n-1}` measure of the link.
    pub link_volume: f64,
    /// `γ = γ_1^+`; equals `(2-n)/2` when the lowest mode is unstable.
    pub gamma: f64,
    pub growth_gap: f64,
}

pub fn link_volume(cone: &ConeSpec) -> f64 {
    let (rp, rq) = cone.link_radii();
    unit_sphere_area(cone.p) * rp.powi(cone.p as i32) * unit_sphere_area(cone.q) * rq.powi(cone.q as i32)
}

pub fn cone_density(cone: &ConeSpec) -> ConeConstants {
    let link_volume = link_volume(cone);
    let n = cone.n();
    let gamma = indicial_roots(cone, link_eigenvalue(cone, 0, 0))
        .map(|(g, _)| g)
        .unwrap_or_else(|_| critical_rate(cone));
    ConeConstants {
        theta_c: link_volume / (n as f64 * unit_ball_volume(n)),
        link_volume,
        gamma,
        growth_gap: growth_gap(cone, DEFAULT_MAX_DEGREE).expect("default degree is positive"),
    }
}

/// CSV rendering of a spectrum table: `k,l,degeneracy,mu,gamma_plus,gamma_minus`.
pub fn spectrum_csv(entries: &[IndicialEntry]) -> String {
    let mut out = String::from("k,l,degeneracy,mu,gamma_plus,gamma_minus\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.k, e.l, e.degeneracy, e.mu, e.gamma_plus, e.gamma_minus
        );
    }
    out
}
