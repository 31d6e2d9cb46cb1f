//! Adaptive Dormand–Prince 5(4) integration of planar fields up to the next
//! crossing of the switching line `x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and budgets for one half-orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Events are located to this accuracy in time.
    pub event_tol: f64,
    pub max_time: f64,
    pub max_steps: usize,
    /// The orbit is abandoned once it leaves `[-bound, bound]^2`.
    pub bound: f64,
    /// `|dx/dt|` at the event below this counts as a tangential return.
    pub tangency_tol: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            event_tol: 1e-11,
            max_time: 1e3,
            max_steps: 200_000,
            bound: 1e3,
            tangency_tol: 1e-12,
        }
    }
}

/// Where and when an orbit met `x = 0` again.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionHit {
    pub y: f64,
    pub time: f64,
    /// `dx/dt` at the hit, in the integration direction.
    pub speed: f64,
    pub steps: usize,
}

type State = [f64; 2];

// autonomous fields only, so the stage nodes c_i are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(s: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *s;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One Dormand–Prince step of size `h` from `s` with `k1 = f(s)`.
/// Returns the 5th-order state, its derivative and the error estimate.
fn dp_step<F: Fn(State) -> State>(f: &F, s: &State, k1: &State, h: f64) -> (State, State, State) {
    let k2 = f(axpy(s, h, &[(A21, k1)]));
    let k3 = f(axpy(s, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(axpy(s, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(axpy(s, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(axpy(s, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let next = axpy(s, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(next);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (next, k7, err)
}

/// Integrates `s' = direction * f(s)` from `(0, y0)` into the half-plane
/// `side * x > 0` and stops at the next crossing of `x = 0`.
///
/// `monitor` sees every accepted state, which is how callers track
/// conserved quantities.
pub fn flow_to_section<F>(
    f: F,
    y0: f64,
    side: f64,
    direction: f64,
    opts: &IntegratorOptions,
    mut monitor: Option<&mut dyn FnMut(State)>,
) -> Result<SectionHit>
where
    F: Fn(State) -> State,
{
    let side_name = if side > 0.0 { "plus" } else { "minus" };
    let g = |s: State| {
        let v = f(s);
        [direction * v[0], direction * v[1]]
    };
    let mut s: State = [0.0, y0];
    let mut k1 = g(s);
    if side * k1[0] <= 0.0 {
        return Err(Error::WrongSide { y: y0, side: side_name });
    }
    let speed0 = k1[0].abs().max(k1[1].abs());
    // a small opening step keeps the orbit from skipping over a tiny excursion
    let length_scale = y0.abs().max(1e-3);
    let mut h = (1e-4 * length_scale / speed0).min(1e-2);
    let mut t = 0.0;
    let mut steps = 0usize;
    if let Some(m) = monitor.as_deref_mut() {
        m(s);
    }
    loop {
        if steps >= opts.max_steps || t > opts.max_time {
            return Err(Error::NoReturn { y: y0 });
        }
        let (next, k_next, err) = dp_step(&g, &s, &k1, h);
        let mut norm = 0.0;
        for i in 0..2 {
            let sc = opts.atol + opts.rtol * s[i].abs().max(next[i].abs());
            norm += (err[i] / sc).powi(2);
        }
        let norm = (norm / 2.0).sqrt();
        if !norm.is_finite() {
            h *= 0.1;
            if h < 1e-300 {
                return Err(Error::NoReturn { y: y0 });
            }
            continue;
        }
        if norm > 1.0 {
            h *= (0.9 * norm.powf(-0.2)).max(0.1);
            continue;
        }
        steps += 1;
        if side * next[0] <= 0.0 {
            return locate_event(&g, &s, &k1, t, h, opts, steps, y0);
        }
        t += h;
        s = next;
        k1 = k_next;
        if let Some(m) = monitor.as_deref_mut() {
            m(s);
        }
        if s[0].abs() > opts.bound || s[1].abs() > opts.bound {
            return Err(Error::NoReturn { y: y0 });
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
}

/// Regula falsi (Illinois variant) on the step length: the state at the
/// trial length comes from a fresh Runge–Kutta step from the last accepted
/// state, so the event inherits the integrator's accuracy. The initial
/// guess comes from cubic Hermite interpolation of `x`.
#[allow(clippy::too_many_arguments)]
fn locate_event<G: Fn(State) -> State>(
    g: &G,
    s0: &State,
    k0: &State,
    t0: f64,
    h: f64,
    opts: &IntegratorOptions,
    steps: usize,
    y0: f64,
) -> Result<SectionHit> {
    let x_at = |tau: f64| -> (f64, State) {
        let (st, _, _) = dp_step(g, s0, k0, tau);
        (st[0], st)
    };
    let (mut a, mut fa) = (0.0, s0[0]);
    let (x_end, end_state) = x_at(h);
    let (mut b, mut fb) = (h, x_end);
    if fb == 0.0 {
        return finish(g, end_state, t0 + h, opts, steps, y0);
    }
    let x_tol = 1e-15 * (1.0 + y0.abs());
    // Hermite guess from x(0), x'(0), x(h), x'(h)
    let k_end = g(end_state);
    let mut next = hermite_root(fa, k0[0], fb, k_end[0], h);
    let mut best = (b, end_state, fb.abs());
    let mut last_side = 0i32;
    for _ in 0..100 {
        let m = match next.take() {
            Some(m) if m > a && m < b => m,
            _ => {
                let secant = b - fb * (b - a) / (fb - fa);
                if secant > a && secant < b {
                    secant
                } else {
                    0.5 * (a + b)
                }
            }
        };
        let (fm, st) = x_at(m);
        if fm.abs() < best.2 {
            best = (m, st, fm.abs());
        }
        if fm.abs() <= x_tol {
            break;
        }
        if fm.signum() == fb.signum() {
            b = m;
            fb = fm;
            if last_side == -1 {
                fa *= 0.5;
            }
            last_side = -1;
        } else {
            a = m;
            fa = fm;
            if last_side == 1 {
                fb *= 0.5;
            }
            last_side = 1;
        }
        if (b - a).abs() <= opts.event_tol {
            let mid = 0.5 * (a + b);
            let (fmid, st) = x_at(mid);
            if fmid.abs() < best.2 {
                best = (mid, st, fmid.abs());
            }
            break;
        }
    }
    finish(g, best.1, t0 + best.0, opts, steps, y0)
}

fn finish<G: Fn(State) -> State>(
    g: &G,
    s: State,
    time: f64,
    opts: &IntegratorOptions,
    steps: usize,
    y0: f64,
) -> Result<SectionHit> {
    let v = g(s);
    if v[0].abs() < opts.tangency_tol {
        return Err(Error::TangentialReturn { y: y0, speed: v[0] });
    }
    Ok(SectionHit { y: s[1], time, speed: v[0], steps })
}

/// Root of the cubic Hermite interpolant on `[0, h]`, if it changes sign.
fn hermite_root(x0: f64, d0: f64, x1: f64, d1: f64, h: f64) -> Option<f64> {
    let eval = |tau: f64| {
        let s = tau / h;
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1
    };
    let (mut a, mut b) = (0.0, h);
    let (mut fa, fb) = (x0, x1);
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = eval(m);
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}
