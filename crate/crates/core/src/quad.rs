//! Gauss–Legendre quadrature, fixed and adaptive.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

const NODES: [f64; 5] = [
    0.14887433898163122,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];
const WEIGHTS: [f64; 5] = [
    0.295524224714753,
    0.2692667193099965,
    0.219086362515982,
    0.14945134915058036,
    0.06667134430868807,
];

/// Ten-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Adaptive bisection on the ten-point rule until panel estimates agree to
/// `abs_tol + rel_tol * |I|`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        rel_tol: f64,
        abs_tol: f64,
        depth: u32,
    ) -> Option<f64> {
        let m = 0.5 * (a + b);
        let left = gauss_legendre(f, a, m);
        let right = gauss_legendre(f, m, b);
        let refined = left + right;
        if (refined - whole).abs() <= abs_tol + rel_tol * refined.abs() {
            return Some(refined);
        }
        if depth == 0 {
            return None;
        }
        Some(
            recurse(f, a, m, left, rel_tol, abs_tol * FRAC_1_SQRT_2, depth - 1)?
                + recurse(f, m, b, right, rel_tol, abs_tol * FRAC_1_SQRT_2, depth - 1)?,
        )
    }
    if a == b {
        return Ok(0.0);
    }
    let whole = gauss_legendre(f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    recurse(f, a, b, whole, 0.0, tol, 60)
        .ok_or_else(|| Error::NonConvergence(format!("quadrature on [{a}, {b}]")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let f = |x: f64| x.powi(19) - 3.0 * x.powi(4) + 1.0;
        let exact = 1.0 / 20.0 - 3.0 / 5.0 + 1.0;
        assert!((gauss_legendre(&f, 0.0, 1.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let f = |x: f64| x.sqrt();
        let v = adaptive(&f, 0.0, 1.0, 1e-13, 1e-15).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }
}
