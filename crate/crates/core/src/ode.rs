//! Dormand–Prince 5(4) integrator with terminal event location.
//!
//! Events are located by re-stepping from the last accepted state with a
//! shortened step (Illinois iteration on the step length), so the located
//! point carries the full order of the method.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `0` selects `h_max / 100`.
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 0.0,
            h_max: 1e-2,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EndReached,
    Event,
}

/// Accepted states of an integration, including the initial state.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub termination: Termination,
}

pub type Rhs<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> [f64; N];
pub type EventFn<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> f64;
pub type Guard<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> std::result::Result<(), String>;

struct Step<const N: usize> {
    y: [f64; N],
    err: f64,
}

fn try_step<const N: usize>(
    f: Rhs<'_, N>,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    opts: &OdeOptions,
) -> Step<N> {
    let mut k = [[0.0; N]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for (i, yi) in ys.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..s {
                acc += A[s][j] * k[j][i];
            }
            *yi += h * acc;
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y_new = *y;
    for (i, yi) in y_new.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..6 {
            acc += A[6][j] * k[j][i];
        }
        *yi += h * acc;
    }
    let mut sum = 0.0;
    for i in 0..N {
        let mut e = 0.0;
        for j in 0..7 {
            e += E[j] * k[j][i];
        }
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        sum += (h * e / sc).powi(2);
    }
    let err = (sum / N as f64).sqrt();
    let err = if y_new.iter().all(|v| v.is_finite()) && err.is_finite() {
        err
    } else {
        f64::INFINITY
    };
    Step { y: y_new, err }
}

/// Integrate `y' = f(t, y)` from `t0` toward `t_end`.
///
/// Integration stops early at the first zero of `event` (sign change relative
/// to its value at `t0`). `guard` is checked on every accepted state; a
/// violation aborts with [`Error::NonConvergence`].
pub fn integrate<const N: usize>(
    f: Rhs<'_, N>,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    event: Option<EventFn<'_, N>>,
    guard: Guard<'_, N>,
) -> Result<Trajectory<N>> {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut traj = Trajectory {
        t: vec![t0],
        y: vec![y0],
        termination: Termination::EndReached,
    };
    let event_sign = event
        .map(|g| g(t0, &y0).signum())
        .filter(|s| *s != 0.0);
    let mut t = t0;
    let mut y = y0;
    let mut h = if opts.h_init > 0.0 {
        opts.h_init
    } else {
        opts.h_max / 100.0
    }
    .min(opts.h_max);
    let mut k1 = f(t, &y);
    let mut steps = 0usize;

    while dir * (t_end - t) > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::NonConvergence(format!(
                "step budget of {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        let last = h >= (t_end - t).abs();
        let h_try = if last { (t_end - t).abs() } else { h };
        let step = try_step(f, t, &y, &k1, dir * h_try, opts);
        if step.err > 1.0 {
            h = h_try * (0.9 * step.err.powf(-0.2)).clamp(0.1, 0.9);
            if h < opts.h_min {
                return Err(Error::NonConvergence(format!(
                    "step size underflow at t = {t}"
                )));
            }
            continue;
        }

        if let (Some(g), Some(s0)) = (event, event_sign) {
            let g1 = g(t + dir * h_try, &step.y);
            if s0 * g1 <= 0.0 {
                let (te, ye) = locate_event(f, g, t, &y, &k1, dir, h_try, s0, opts)?;
                guard(te, &ye).map_err(Error::NonConvergence)?;
                traj.t.push(te);
                traj.y.push(ye);
                traj.termination = Termination::Event;
                return Ok(traj);
            }
        }

        t = if last { t_end } else { t + dir * h_try };
        y = step.y;
        guard(t, &y).map_err(Error::NonConvergence)?;
        traj.t.push(t);
        traj.y.push(y);
        k1 = f(t, &y);
        let fac = if step.err == 0.0 {
            5.0
        } else {
            (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h_try * fac).min(opts.h_max);
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn locate_event<const N: usize>(
    f: Rhs<'_, N>,
    g: EventFn<'_, N>,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    dir: f64,
    h: f64,
    s0: f64,
    opts: &OdeOptions,
) -> Result<(f64, [f64; N])> {
    let eval = |hh: f64| -> (f64, [f64; N]) {
        let st = try_step(f, t, y, k1, dir * hh, opts);
        (s0 * g(t + dir * hh, &st.y), st.y)
    };
    let (mut a, mut ga) = (0.0, s0 * g(t, y));
    let (mut b, (mut gb, mut yb)) = (h, eval(h));
    let mut side = 0i8;
    for _ in 0..200 {
        if gb == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * (t.abs() + h) {
            return Ok((t + dir * b, yb));
        }
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let (gc, yc) = eval(c);
        if gc.abs() < 1e-15 {
            return Ok((t + dir * c, yc));
        }
        if gc > 0.0 {
            // still on the starting side
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            gb = gc;
            yb = yc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::NonConvergence("event location did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_guard<const N: usize>(_: f64, _: &[f64; N]) -> std::result::Result<(), String> {
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let opts = OdeOptions {
            h_max: 0.5,
            ..Default::default()
        };
        let tr = integrate(&f, 0.0, [1.0], 5.0, &opts, None, &no_guard).unwrap();
        let y = tr.y.last().unwrap()[0];
        assert_eq!(*tr.t.last().unwrap(), 5.0);
        assert!((y - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_event() {
        // first zero of cos t
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let g = |_t: f64, y: &[f64; 2]| y[0];
        let tr = integrate(
            &f,
            0.0,
            [1.0, 0.0],
            10.0,
            &OdeOptions::default(),
            Some(&g),
            &no_guard,
        )
        .unwrap();
        assert_eq!(tr.termination, Termination::Event);
        let t = *tr.t.last().unwrap();
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-12, "{t}");
    }

    #[test]
    fn guard_aborts() {
        let f = |_t: f64, _y: &[f64; 1]| [1.0];
        let guard = |_t: f64, y: &[f64; 1]| {
            if y[0] > 0.5 {
                Err("left the box".to_string())
            } else {
                Ok(())
            }
        };
        let r = integrate(&f, 0.0, [0.0], 1.0, &OdeOptions::default(), None, &guard);
        assert!(matches!(r, Err(Error::NonConvergence(_))));
    }

    #[test]
    fn backward_integration() {
        let f = |t: f64, _y: &[f64; 1]| [2.0 * t];
        let tr = integrate(&f, 1.0, [1.0], 0.0, &OdeOptions::default(), None, &no_guard).unwrap();
        assert!(tr.y.last().unwrap()[0].abs() < 1e-12);
    }
}
