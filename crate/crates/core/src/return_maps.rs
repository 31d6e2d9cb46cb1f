//! Half-return maps to the switching line, displacement functions and
//! composed first-return maps.
//!
//! The algebraic half-return solves `h(y1) = h(y)` for the restriction
//! `h(y) = H(0, y)`. Cycles of the recursive family are organised by the
//! level `m` at which they surround the origin: pushed through
//! `phi^(k-m)` they become near-symmetric pairs `(Y, -Y + eta)` of level `m`.
//! Solving for `eta` instead of `y1` keeps every term of the equation small,
//! so displacements far below `1e-12` keep full relative precision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PiecewiseField, Side};
use crate::hamiltonian_family::HamiltonianLevel;
use crate::ode::{flow_to_section, IntegratorOptions};
use crate::poly::{phi_iterate, phi_polynomial, UniPolynomial};

pub const NEWTON_MAX_ITER: usize = 50;
pub const DERIVATIVE_FLOOR: f64 = 1e-10;
pub const BRANCH_RADIUS: f64 = 0.5;

/// `F(y1, y2) = (H(0,y1) - H(0,y2)) / (y1 - y2)`, with `H'(0, y1)` on the
/// diagonal.
pub fn divided_difference(level: &HamiltonianLevel, side: Side, y1: f64, y2: f64) -> f64 {
    level
        .hamiltonian(side == Side::Plus)
        .restrict_x0()
        .divided_difference(y1, y2)
        .0
}

/// `dF/dy2` at `(y1, y2)`.
pub fn divided_difference_dy2(level: &HamiltonianLevel, side: Side, y1: f64, y2: f64) -> f64 {
    level
        .hamiltonian(side == Side::Plus)
        .restrict_x0()
        .divided_difference(y1, y2)
        .1
}

#[derive(Debug, Clone)]
struct SideProfile {
    /// `P_j` for `j = 0..=k`.
    perturbations: Vec<UniPolynomial>,
    /// Even and odd parts of `sum_{i<=m} eps_i P_i(phi^(m-i)(Y))`, per `m`.
    pert_even: Vec<UniPolynomial>,
    pert_odd: Vec<UniPolynomial>,
}

/// The restriction of `H_k±` to the switching line, split as
/// `base(Y) + eps * pert(Y)` at every intermediate level so that `eps` can
/// vary without rebuilding.
#[derive(Debug, Clone)]
pub struct SigmaProfile {
    pub level: usize,
    /// `(1, eps_1, ..., eps_k)`.
    pub weights: Vec<f64>,
    /// `(1 - phi^m(Y)^2) / 2` for `m = 0..=k`.
    base: Vec<UniPolynomial>,
    plus: SideProfile,
    minus: SideProfile,
}

/// One solved half-return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfReturn {
    pub y1: f64,
    /// `phi^(k-m)(y1) + phi^(k-m)(y)`.
    pub eta: f64,
    /// `|h(y1) - h(y)|` in the rescaled form.
    pub residual: f64,
    /// `dF/dy2` at `(y, y1)`.
    pub dfdy2: f64,
}

impl SigmaProfile {
    pub fn new(level: &HamiltonianLevel) -> Self {
        let k = level.level;
        let weights = level.level_weights();
        let phi = phi_polynomial();
        let mut iterates = vec![UniPolynomial::identity()];
        for m in 1..=k {
            let next = iterates[m - 1].compose(&phi);
            iterates.push(next);
        }
        let base = iterates
            .iter()
            .map(|p| &UniPolynomial::constant(0.5) - &(p * p).scaled(0.5))
            .collect();
        let side = |plus: bool| {
            let perturbations = level.perturbations(plus);
            let mut pert_even = Vec::new();
            let mut pert_odd = Vec::new();
            for m in 0..=k {
                let total = (0..=m).fold(UniPolynomial::zero(), |acc, i| {
                    &acc + &perturbations[i].compose(&iterates[m - i]).scaled(weights[i])
                });
                pert_even.push(total.even_part());
                pert_odd.push(total.odd_part());
            }
            SideProfile { perturbations, pert_even, pert_odd }
        };
        let (plus, minus) = (side(true), side(false));
        SigmaProfile { level: k, weights, plus, minus, base }
    }

    fn side(&self, side: Side) -> &SideProfile {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    /// `H±(0, y)` at level `k`, evaluated without expansion.
    pub fn value(&self, side: Side, y: f64, eps: f64) -> f64 {
        let k = self.level;
        let sp = self.side(side);
        let top = phi_iterate(k, y);
        let pert: f64 = (0..=k)
            .map(|i| self.weights[i] * sp.perturbations[i].eval(phi_iterate(k - i, y)))
            .sum();
        0.5 * (1.0 - top * top) + eps * pert
    }

    /// `dH±/dy (0, y)`, which is also `P±(0, y)` of the Hamiltonian field.
    pub fn slope(&self, side: Side, y: f64, eps: f64) -> f64 {
        let k = self.level;
        let sp = self.side(side);
        // chain[i] = phi^i(y), dchain[i] = (phi^i)'(y)
        let mut chain = vec![y];
        let mut dchain = vec![1.0];
        for i in 0..k {
            dchain.push(2.0 * chain[i] * dchain[i]);
            chain.push(phi_iterate(1, chain[i]));
        }
        let pert: f64 = (0..=k)
            .map(|i| {
                self.weights[i] * sp.perturbations[i].eval_with_derivative(chain[k - i]).1 * dchain[k - i]
            })
            .sum();
        -chain[k] * dchain[k] + eps * pert
    }

    /// Branch signs `sign(phi^i(y))`, `i < k - m`, of a level-`m` family.
    fn branch_signs(&self, y: f64, born: usize) -> Vec<f64> {
        (0..self.level - born)
            .map(|i| if phi_iterate(i, y) >= 0.0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// `v[i] = phi^i(y1)` from `v[k-m] = w` down the square-root branches.
    fn unwind(&self, w: f64, signs: &[f64]) -> Result<Vec<f64>> {
        let n = signs.len();
        let mut v = vec![0.0; n + 1];
        v[n] = w;
        for i in (0..n).rev() {
            let r = v[i + 1] + 2.0;
            if r < 0.0 {
                return Err(Error::Branch { value: r });
            }
            v[i] = signs[i] * r.sqrt();
        }
        Ok(v)
    }

    /// Solves `h(y1) = h(y)` on the branch of the level-`born` family
    /// through `y`, Newton in `eta` from `eta = 0`.
    pub fn half_return(&self, side: Side, y: f64, eps: f64, born: usize) -> Result<HalfReturn> {
        if born > self.level {
            return Err(Error::InvalidArgument(format!(
                "family level {born} above construction level {}",
                self.level
            )));
        }
        let k = self.level;
        let n = k - born;
        let sp = self.side(side);
        let signs = self.branch_signs(y, born);
        let big_y = phi_iterate(n, y);
        let seed = *self.unwind(-big_y, &signs)?.first().unwrap();
        let base = &self.base[born];
        let pe = &sp.pert_even[born];
        let po = &sp.pert_odd[born];
        let po_y = po.eval(big_y);
        let top_at_y: Vec<f64> = (born + 1..=k)
            .map(|j| sp.perturbations[j].eval(phi_iterate(k - j, y)))
            .collect();
        let eval = |eta: f64| -> Result<(f64, f64, Vec<f64>)> {
            let u = big_y - eta;
            let (db, db_u) = base.divided_difference(big_y, u);
            let (dp, dp_u) = pe.divided_difference(big_y, u);
            let de = db + eps * dp;
            let de_u = db_u + eps * dp_u;
            let (po_u, dpo_u) = po.eval_with_derivative(u);
            let mut g = eta * de + eps * (po_y + po_u);
            let mut dg = de - eta * de_u - eps * dpo_u;
            let v = self.unwind(eta - big_y, &signs)?;
            if n > 0 {
                // dv[i]/d eta, from dv[n] = 1 and v[i] = s sqrt(v[i+1] + 2)
                let mut dv = vec![1.0; n + 1];
                for i in (0..n).rev() {
                    dv[i] = dv[i + 1] / (2.0 * v[i]);
                }
                for (idx, j) in (born + 1..=k).enumerate() {
                    let (p, dp) = sp.perturbations[j].eval_with_derivative(v[k - j]);
                    let w = eps * self.weights[j];
                    g -= w * (p - top_at_y[idx]);
                    dg -= w * dp * dv[k - j];
                }
            }
            Ok((g, dg, v))
        };
        // absolute noise level of eta: perturbation terms over the slope
        let noise_sum = eps
            * (po_y.abs()
                + (born + 1..=k)
                    .zip(&top_at_y)
                    .map(|(j, t)| self.weights[j] * t.abs())
                    .sum::<f64>());
        let mut eta = 0.0;
        let mut converged = false;
        let mut last = eval(eta)?;
        for _ in 0..NEWTON_MAX_ITER {
            let (g, dg, _) = &last;
            if *g == 0.0 {
                converged = true;
                break;
            }
            if !dg.is_finite() || *dg == 0.0 {
                return Err(Error::DerivativeUnderflow { y2: eta - big_y, value: *dg });
            }
            let step = g / dg;
            let floor = noise_sum / dg.abs();
            eta -= step;
            last = eval(eta)?;
            if step.abs() <= 16.0 * f64::EPSILON * (eta.abs() + floor) || !step.is_finite() {
                converged = step.is_finite();
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { y, iterations: NEWTON_MAX_ITER });
        }
        let (g, dg, v) = last;
        let y1 = v[0];
        if (y1 - seed).abs() > BRANCH_RADIUS {
            return Err(Error::BranchJump { y, seed, found: y1 });
        }
        // dF/dy2 at a root equals -h'(y1) / (y - y1), and h'(y1) = -G' (phi^n)'(y1)
        let dphi: f64 = v[..n].iter().map(|vi| 2.0 * vi).product();
        let dfdy2 = if y == y1 { f64::NAN } else { dg * dphi / (y - y1) };
        if dfdy2.abs() < DERIVATIVE_FLOOR {
            return Err(Error::DerivativeUnderflow { y2: y1, value: dfdy2 });
        }
        Ok(HalfReturn { y1, eta, residual: g.abs(), dfdy2 })
    }

    /// `y1+(y) - y1-(y)` on the level-`born` family, computed from the two
    /// `eta` values so that no cancellation of O(1) ordinates occurs.
    pub fn displacement(&self, y: f64, eps: f64, born: usize) -> Result<f64> {
        let p = self.half_return(Side::Plus, y, eps, born)?;
        let m = self.half_return(Side::Minus, y, eps, born)?;
        let n = self.level - born;
        let signs = self.branch_signs(y, born);
        let big_y = phi_iterate(n, y);
        let vp = self.unwind(p.eta - big_y, &signs)?;
        let vm = self.unwind(m.eta - big_y, &signs)?;
        let mut diff = p.eta - m.eta;
        for i in (0..n).rev() {
            // sqrt(a + 2) - sqrt(b + 2) = (a - b) / (sqrt(a + 2) + sqrt(b + 2))
            diff = signs[i] * diff / ((vp[i + 1] + 2.0).sqrt() + (vm[i + 1] + 2.0).sqrt());
        }
        Ok(diff)
    }

    /// Central-difference `d delta / dy`.
    pub fn displacement_slope(&self, y: f64, eps: f64, born: usize) -> Result<f64> {
        let h = 1e-6 * y.abs().max(1e-2);
        Ok((self.displacement(y + h, eps, born)? - self.displacement(y - h, eps, born)?) / (2.0 * h))
    }

    /// Level at which the orbit through `y` and `y1` surrounds the origin:
    /// the first `i` where `phi^i(y)` and `phi^i(y1)` fall on opposite sides
    /// of zero gives `m = k - i`.
    pub fn classify_family(&self, y: f64, y1: f64) -> Option<usize> {
        let (mut a, mut b) = (y, y1);
        for i in 0..=self.level {
            if a * b < 0.0 {
                return Some(self.level - i);
            }
            a = a * a - 2.0;
            b = b * b - 2.0;
        }
        None
    }
}

/// Half-return of the level field through the origin-surrounding family,
/// Newton from `-y`.
pub fn half_return_algebraic(level: &HamiltonianLevel, side: Side, y: f64, eps: f64) -> Result<f64> {
    SigmaProfile::new(level).half_return(side, y, eps, level.level).map(|r| r.y1)
}

/// Time direction in which the `side` piece leaves `(0, y)` into its own
/// half-plane.
pub fn entry_direction(z: &PiecewiseField, side: Side, y: f64) -> Result<f64> {
    let p = z.lie_first(side, y);
    if p == 0.0 {
        return Err(Error::TangentialReturn { y, speed: 0.0 });
    }
    Ok(if side.sign() * p > 0.0 { 1.0 } else { -1.0 })
}

/// Return ordinate of the orbit of the `side` piece from `(0, y)`.
pub fn half_return_numeric(
    z: &PiecewiseField,
    side: Side,
    y: f64,
    direction: f64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    z.half_return(side, y, direction, opts)
}

/// Numeric half-return of a Hamiltonian piece together with the largest
/// drift `|H(x(t), y(t)) - H(0, y)|` seen along the orbit.
pub fn half_return_conservation(
    level: &HamiltonianLevel,
    side: Side,
    y: f64,
    opts: &IntegratorOptions,
) -> Result<(f64, f64)> {
    let z = level.field();
    let h = level.hamiltonian(side == Side::Plus);
    let h0 = h.eval(0.0, y);
    let dir = entry_direction(&z, side, y)?;
    let mut drift = 0.0f64;
    let mut monitor = |s: [f64; 2]| drift = drift.max((h.eval(s[0], s[1]) - h0).abs());
    let f = |s: [f64; 2]| z.eval_side(side, s[0], s[1]);
    let hit = flow_to_section(f, y, side.sign(), dir, opts, Some(&mut monitor))?;
    drift = drift.max((h.eval(0.0, hit.y) - h0).abs());
    Ok((hit.y, drift))
}

/// `y1+ - y1-` of the Hamiltonian level through the origin family.
pub fn displacement(level: &HamiltonianLevel, y: f64, eps: f64) -> Result<f64> {
    SigmaProfile::new(level).displacement(y, eps, level.level)
}

/// `R+(y) - R-(y)` by integration: each piece from `(0, y)` in the time
/// direction that enters its half-plane.
pub fn numeric_displacement(z: &PiecewiseField, y: f64, opts: &IntegratorOptions) -> Result<f64> {
    let rp = z.half_return(Side::Plus, y, entry_direction(z, Side::Plus, y)?, opts)?;
    let rm = z.half_return(Side::Minus, y, entry_direction(z, Side::Minus, y)?, opts)?;
    Ok(rp - rm)
}

/// Displacement near a doubled copy of a parent cycle, both through the
/// square-root conjugation of the parent's half-returns (exact when
/// `eps_{k+1} = 0`) and directly at level `k+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LiftedDisplacement {
    pub conjugated: f64,
    pub direct: f64,
}

/// `parent` is the level-`k` profile, `child` the level-`(k+1)` one;
/// `parent_born` is the family level of the parent cycle.
pub fn lifted_displacement(
    parent: &SigmaProfile,
    child: &SigmaProfile,
    y: f64,
    eps: f64,
    parent_born: usize,
) -> Result<LiftedDisplacement> {
    let big_y = phi_iterate(1, y);
    let rp = parent.half_return(Side::Plus, big_y, eps, parent_born)?.y1;
    let rm = parent.half_return(Side::Minus, big_y, eps, parent_born)?.y1;
    for r in [rp, rm] {
        if r + 2.0 < 0.0 {
            return Err(Error::Branch { value: r + 2.0 });
        }
    }
    let s = if y >= 0.0 { 1.0 } else { -1.0 };
    let parent_delta = parent.displacement(big_y, eps, parent_born)?;
    let conjugated = s * parent_delta / ((rp + 2.0).sqrt() + (rm + 2.0).sqrt());
    let direct = child.displacement(y, eps, parent_born)?;
    Ok(LiftedDisplacement { conjugated, direct })
}

/// Seeds `±sqrt(y + 2)` of the two copies of a parent ordinate.
pub fn doubled_seeds(parent_ordinate: f64) -> Result<[f64; 2]> {
    let r = parent_ordinate + 2.0;
    if r < 0.0 {
        return Err(Error::Branch { value: r });
    }
    Ok([r.sqrt(), -r.sqrt()])
}

/// One half-map of a chain: the flow of one piece from the switching line
/// through its own half-plane, forward in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HalfMap {
    pub side: Side,
    /// Arguments outside this window are rejected.
    pub window: (f64, f64),
}

/// Half-maps in application order: `maps[0]` acts first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReturnChain {
    pub maps: Vec<HalfMap>,
    pub shift_b: f64,
}

impl ReturnChain {
    pub fn new(maps: Vec<HalfMap>) -> Result<Self> {
        if maps.is_empty() || maps.len() % 2 != 0 {
            return Err(Error::InvalidArgument("a closed chain needs an even number of half-maps".into()));
        }
        if maps.windows(2).any(|w| w[0].side == w[1].side) {
            return Err(Error::InvalidArgument("sides must alternate along the chain".into()));
        }
        Ok(ReturnChain { maps, shift_b: 0.0 })
    }

    /// Minus piece then plus piece, unrestricted windows.
    pub fn single_loop(first: Side) -> Self {
        let w = (f64::NEG_INFINITY, f64::INFINITY);
        ReturnChain {
            maps: vec![HalfMap { side: first, window: w }, HalfMap { side: first.other(), window: w }],
            shift_b: 0.0,
        }
    }
}

/// The ordinate among `ordinates` where both pieces push into `x < 0`, the
/// natural start of a `[minus, plus]` chain.
pub fn leftward_crossing(z: &PiecewiseField, ordinates: [f64; 2]) -> Option<f64> {
    ordinates
        .into_iter()
        .find(|&y| z.lie_first(Side::Plus, y) < 0.0 && z.lie_first(Side::Minus, y) < 0.0)
}

/// `pi_C(y; b)`: the chain applied to `y`, upper half-maps replaced by
/// `phi+(y - b) + b` (the flow of the upper piece shifted by `b`).
pub fn composed_return(
    chain: &ReturnChain,
    z: &PiecewiseField,
    y: f64,
    b: f64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let shifted = z.apply_shift(chain.shift_b + b);
    let mut t = y;
    for (position, map) in chain.maps.iter().enumerate() {
        if t < map.window.0 || t > map.window.1 {
            return Err(Error::Chain {
                position,
                source: Box::new(Error::Domain(format!("argument {t} outside {:?}", map.window))),
            });
        }
        t = shifted
            .half_return(map.side, t, 1.0, opts)
            .map_err(|e| Error::Chain { position, source: Box::new(e) })?;
    }
    Ok(t)
}

/// Central difference of `composed_return` in `b`.
pub fn shift_derivative(
    chain: &ReturnChain,
    z: &PiecewiseField,
    y: f64,
    b: f64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let h = 1e-5;
    let up = composed_return(chain, z, y, b + h, opts)?;
    let down = composed_return(chain, z, y, b - h, opts)?;
    Ok((up - down) / (2.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnfoldingClass {
    O,
    Eplus,
    Eminus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Unfolding {
    pub class: UnfoldingClass,
    pub multiplicity: usize,
    pub leading: f64,
}

pub const MAX_MULTIPLICITY: usize = 6;

/// Multiplicity and leading coefficient of the zero `y_c` of `delta`, from
/// central finite differences of increasing order with step `h`.
pub fn unfolding_type<F: Fn(f64) -> f64>(delta: F, y_c: f64, h: f64) -> Result<Unfolding> {
    let reach = (MAX_MULTIPLICITY as f64 / 2.0 + 1.0) * h;
    let scale = (0..=20)
        .map(|i| delta(y_c - reach + 2.0 * reach * i as f64 / 20.0).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Indeterminate { max_order: MAX_MULTIPLICITY });
    }
    let mut factorial = 1.0;
    for n in 0..=MAX_MULTIPLICITY {
        if n > 0 {
            factorial *= n as f64;
        }
        // n-th central difference: sum_i (-1)^i C(n,i) f(y_c + (n/2 - i) h)
        let mut binom = 1.0;
        let mut diff = 0.0;
        for i in 0..=n {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            diff += sign * binom * delta(y_c + (n as f64 / 2.0 - i as f64) * h);
            binom = binom * (n - i) as f64 / (i + 1) as f64;
        }
        // diff ~ f^(n) h^n = n! a_n h^n
        if diff.abs() > 1e-7 * scale {
            let leading = diff / (factorial * h.powi(n as i32));
            let class = if n % 2 == 1 {
                UnfoldingClass::O
            } else if leading > 0.0 {
                UnfoldingClass::Eplus
            } else {
                UnfoldingClass::Eminus
            };
            return Ok(Unfolding { class, multiplicity: n, leading });
        }
    }
    Err(Error::Indeterminate { max_order: MAX_MULTIPLICITY })
}

/// CSV with columns `y,delta,reducedDelta` on the origin family.
pub fn displacement_csv(level: &HamiltonianLevel, ys: &[f64], eps: f64) -> Result<String> {
    let profile = SigmaProfile::new(level);
    let mut out = String::from("y,delta,reducedDelta\n");
    for &y in ys {
        let d = profile.displacement(y, eps, level.level)?;
        let reduced = if eps != 0.0 { d / eps } else { f64::NAN };
        writeln!(out, "{y},{d:e},{reduced:e}").expect("writing to a String");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian_family::{build_h0, build_level, default_tables, PerturbationCoeffs};
    use crate::poly::BiPolynomial;

    fn level0(eps: f64) -> HamiltonianLevel {
        build_h0(&PerturbationCoeffs::canonical_level0(), eps).unwrap()
    }

    #[test]
    fn level0_divided_difference() {
        let l = level0(0.0);
        for y in [0.1, 0.5, 0.9] {
            assert!(divided_difference(&l, Side::Plus, y, -y).abs() < 1e-15);
            assert!((divided_difference_dy2(&l, Side::Minus, y, -y) + 0.5).abs() < 1e-15);
        }
        assert!((divided_difference(&l, Side::Plus, 0.5, -0.3) + 0.1).abs() < 1e-15);
        let l = level0(0.3);
        let (a, b) = (0.7, -0.2);
        let eps = 0.3;
        let expected = -(a + b) / 2.0 + eps * (-0.125 + 0.5 * (a * a + a * b + b * b));
        assert!((divided_difference(&l, Side::Plus, a, b) - expected).abs() < 1e-15);
    }

    #[test]
    fn product_formula_for_dfdy2() {
        // dF_{k+1}/dy2 (y, -y, 0) = -2^k prod_{i=1}^{k+1} phi^i(y)
        let tables = default_tables(2).unwrap();
        for k in 0..2 {
            let l = build_level(k + 1, 0.0, &vec![1e-3; k + 1], &tables).unwrap();
            for y in [0.1, 0.3] {
                let prod: f64 = (1..=k + 1).map(|i| phi_iterate(i, y)).product();
                let expected = -((1u32 << k) as f64) * prod;
                let got = divided_difference_dy2(&l, Side::Plus, y, -y);
                assert!((got - expected).abs() < 1e-11 * expected.abs(), "{got} {expected}");
            }
        }
        // level 2 (k = 1) at y = 0.3: -2 phi(0.3) phi^2(0.3)
        let l = build_level(2, 0.0, &[1e-3, 1e-9], &tables).unwrap();
        assert!((divided_difference_dy2(&l, Side::Plus, 0.3, -0.3) - 6.295_742).abs() < 1e-9);
    }

    #[test]
    fn symmetric_returns_at_zero_epsilon() {
        let tables = default_tables(2).unwrap();
        for k in 0..=2 {
            let l = build_level(k, 0.0, &vec![1e-3; k], &tables).unwrap();
            let upper = if k == 0 { 1.0 } else { crate::hamiltonian_family::interval_ik(k).unwrap() };
            for i in 1..10 {
                let y = upper * i as f64 / 10.0;
                for side in [Side::Plus, Side::Minus] {
                    let r = half_return_algebraic(&l, side, y, 0.0).unwrap();
                    assert!((r + y).abs() <= 1e-12);
                    let back = half_return_algebraic(&l, side.other(), r, 0.0).unwrap();
                    assert!((back - y).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn epsilon_slope_of_half_return() {
        let l = level0(0.0);
        let h = 1e-7;
        for y in [0.3, 0.5, 0.8] {
            let r = half_return_algebraic(&l, Side::Plus, y, h).unwrap();
            let slope = (r + y) / h;
            let expected = 2.0 * (-0.125 + 0.5 * y * y);
            assert!((slope - expected).abs() < 1e-5, "{slope} {expected}");
        }
    }

    #[test]
    fn displacement_matches_melnikov_at_small_epsilon() {
        let l = level0(1e-3);
        let d = displacement(&l, 0.8, 1e-3).unwrap();
        let m = 2.0 * (-0.125 + 0.32);
        assert!((d - 1e-3 * m).abs() <= 0.05 * 1e-3 * m);
        assert_eq!(displacement(&l, 0.8, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn algebraic_and_numeric_agree() {
        let eps = 1e-3;
        let l = level0(eps);
        let z = l.field();
        let opts = IntegratorOptions::default();
        for i in 0..20 {
            let y = 0.05 + 0.9 * i as f64 / 19.0;
            for side in [Side::Plus, Side::Minus] {
                let a = half_return_algebraic(&l, side, y, eps).unwrap();
                let dir = entry_direction(&z, side, y).unwrap();
                let n = half_return_numeric(&z, side, y, dir, &opts).unwrap();
                assert!((a - n).abs() <= 1e-8, "y = {y}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn conservation_along_orbits() {
        let l = level0(1e-2);
        for y in [0.2, 0.5, 0.9] {
            for side in [Side::Plus, Side::Minus] {
                let (_, drift) =
                    half_return_conservation(&l, side, y, &IntegratorOptions::default()).unwrap();
                assert!(drift <= 1e-9, "{drift}");
            }
        }
    }

    #[test]
    fn centre_piece_reflects() {
        let z = PiecewiseField::smooth(-&BiPolynomial::y(), BiPolynomial::x());
        let opts = IntegratorOptions::default();
        let r = half_return_numeric(&z, Side::Minus, 0.6, 1.0, &opts).unwrap();
        assert!((r + 0.6).abs() < 1e-10);
    }

    #[test]
    fn shift_derivative_of_paired_centres() {
        // both half-maps are y -> -y; with the upper piece last the b-slope is 1 - (-1)
        let z = PiecewiseField::smooth(-&BiPolynomial::y(), BiPolynomial::x());
        let opts = IntegratorOptions::default();
        let chain = ReturnChain::single_loop(Side::Minus);
        assert!((composed_return(&chain, &z, 0.4, 0.0, &opts).unwrap() - 0.4).abs() < 1e-10);
        let d = shift_derivative(&chain, &z, 0.4, 0.0, &opts).unwrap();
        assert!((d - 2.0).abs() < 1e-6, "{d}");
        // two loops: 2 + (-1)(-1) 2
        let w = (f64::NEG_INFINITY, f64::INFINITY);
        let double = ReturnChain::new(
            [Side::Minus, Side::Plus, Side::Minus, Side::Plus].map(|side| HalfMap { side, window: w }).to_vec(),
        )
        .unwrap();
        assert!((shift_derivative(&double, &z, 0.4, 0.0, &opts).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn shift_derivative_at_level0_cycle() {
        let eps = 1e-3;
        let z = level0(eps).field();
        let opts = IntegratorOptions::default();
        let rec = &crate::certify::certify_level0(eps).unwrap().records[0];
        let start = leftward_crossing(&z, [rec.upper_ordinate, rec.lower_ordinate]).unwrap();
        let chain = ReturnChain::single_loop(Side::Minus);
        let fixed = composed_return(&chain, &z, start, 0.0, &opts).unwrap();
        assert!((fixed - start).abs() < 1e-7, "{fixed} {start}");
        for b in [-1e-3, 0.0, 1e-3] {
            assert!(shift_derivative(&chain, &z, start, b, &opts).unwrap() >= 1.0 - 1e-4);
        }
    }

    #[test]
    fn family_classification() {
        let tables = default_tables(2).unwrap();
        let l = build_level(2, 0.0, &[1e-3, 1e-9], &tables).unwrap();
        let p = SigmaProfile::new(&l);
        assert_eq!(p.classify_family(0.3, -0.3), Some(2));
        // both in y > 0 but phi sends them to opposite signs
        let y = (0.5f64 + 2.0).sqrt();
        let y1 = (-0.5f64 + 2.0).sqrt();
        assert_eq!(p.classify_family(y, y1), Some(1));
    }

    #[test]
    fn doubled_family_round_trip() {
        let tables = default_tables(1).unwrap();
        let l = build_level(1, 0.0, &[1e-3], &tables).unwrap();
        let p = SigmaProfile::new(&l);
        let [up, down] = doubled_seeds(0.5).unwrap();
        let r = p.half_return(Side::Plus, up, 0.0, 0).unwrap();
        assert!((r.y1 - (1.5f64).sqrt()).abs() < 1e-14);
        let r = p.half_return(Side::Minus, down, 0.0, 0).unwrap();
        assert!((r.y1 + (1.5f64).sqrt()).abs() < 1e-14);
        assert!(doubled_seeds(-2.5).is_err());
    }

    #[test]
    fn lifted_displacement_conjugation() {
        let tables = default_tables(1).unwrap();
        let eps = 1e-3;
        let parent = SigmaProfile::new(&build_level(0, eps, &[], &tables).unwrap());
        let child0 = SigmaProfile::new(&build_level(1, eps, &[0.0], &tables).unwrap());
        let y = (0.7f64 + 2.0).sqrt();
        let lifted = lifted_displacement(&parent, &child0, y, eps, 0).unwrap();
        assert!((lifted.conjugated - lifted.direct).abs() <= 1e-12 * lifted.direct.abs());
        let flat = lifted_displacement(&parent, &child0, y, 0.0, 0).unwrap();
        assert_eq!(flat.conjugated, 0.0);
        assert_eq!(flat.direct, 0.0);
    }

    #[test]
    fn unfolding_examples() {
        let u = unfolding_type(|y| 2.0 * (y - 0.3), 0.3, 1e-2).unwrap();
        assert_eq!((u.class, u.multiplicity), (UnfoldingClass::O, 1));
        assert!((u.leading - 2.0).abs() < 1e-8);
        let u = unfolding_type(|y| (y - 0.3).powi(2), 0.3, 1e-2).unwrap();
        assert_eq!((u.class, u.multiplicity), (UnfoldingClass::Eplus, 2));
        assert!((u.leading - 1.0).abs() < 1e-6);
        let u = unfolding_type(|y| -3.0 * (y - 0.3).powi(2), 0.3, 1e-2).unwrap();
        assert_eq!((u.class, u.multiplicity), (UnfoldingClass::Eminus, 2));
        assert!((u.leading + 3.0).abs() < 1e-6);
        assert!(unfolding_type(|_| 0.0, 0.3, 1e-2).is_err());
    }

    #[test]
    fn chain_validation() {
        let w = (f64::NEG_INFINITY, f64::INFINITY);
        assert!(ReturnChain::new(vec![HalfMap { side: Side::Plus, window: w }]).is_err());
        assert!(ReturnChain::new(vec![
            HalfMap { side: Side::Plus, window: w },
            HalfMap { side: Side::Plus, window: w }
        ])
        .is_err());
    }

    #[test]
    fn csv_layout() {
        let l = level0(1e-3);
        let csv = displacement_csv(&l, &[0.25, 0.5], 1e-3).unwrap();
        assert!(csv.starts_with("y,delta,reducedDelta\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
