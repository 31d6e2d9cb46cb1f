//! Piecewise planar fields split by the switching line `x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{flow_to_section, IntegratorOptions};
use crate::poly::{BiPolynomial, Variable};

/// `Z+ = (plusP, plusQ)` on `x > 0`, `Z- = (minusP, minusQ)` on `x < 0`.
///
/// The upper piece is evaluated at `(x, y - shiftB)`; the stored
/// polynomials are the unshifted ones so that shifts compose exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PiecewiseField {
    pub plus_p: BiPolynomial,
    pub plus_q: BiPolynomial,
    pub minus_p: BiPolynomial,
    pub minus_q: BiPolynomial,
    #[serde(default)]
    pub shift_b: f64,
}

/// Which half-plane a piece lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// `(dH/dy, -dH/dx)`.
pub fn hamiltonian_field(h: &BiPolynomial) -> (BiPolynomial, BiPolynomial) {
    (h.differentiate(Variable::Y), -&h.differentiate(Variable::X))
}

impl PiecewiseField {
    pub fn new(
        plus_p: BiPolynomial,
        plus_q: BiPolynomial,
        minus_p: BiPolynomial,
        minus_q: BiPolynomial,
    ) -> Self {
        PiecewiseField { plus_p, plus_q, minus_p, minus_q, shift_b: 0.0 }
    }

    /// The same smooth field on both sides.
    pub fn smooth(p: BiPolynomial, q: BiPolynomial) -> Self {
        Self::new(p.clone(), q.clone(), p, q)
    }

    pub fn from_hamiltonians(h_plus: &BiPolynomial, h_minus: &BiPolynomial) -> Self {
        let (pp, qp) = hamiltonian_field(h_plus);
        let (pm, qm) = hamiltonian_field(h_minus);
        Self::new(pp, qp, pm, qm)
    }

    /// Maximum total degree of the four components.
    pub fn degree(&self) -> usize {
        [&self.plus_p, &self.plus_q, &self.minus_p, &self.minus_q]
            .iter()
            .map(|p| p.total_degree())
            .max()
            .unwrap_or(0)
    }

    /// Upper piece replaced by `Z+(x, y - b)`; shifts accumulate.
    pub fn apply_shift(&self, b: f64) -> Self {
        PiecewiseField { shift_b: self.shift_b + b, ..self.clone() }
    }

    /// The shift written into the upper polynomials, leaving `shift_b = 0`.
    pub fn expanded(&self) -> Self {
        PiecewiseField {
            plus_p: self.plus_p.shift_y(self.shift_b),
            plus_q: self.plus_q.shift_y(self.shift_b),
            minus_p: self.minus_p.clone(),
            minus_q: self.minus_q.clone(),
            shift_b: 0.0,
        }
    }

    pub fn components(&self, side: Side) -> (&BiPolynomial, &BiPolynomial) {
        match side {
            Side::Plus => (&self.plus_p, &self.plus_q),
            Side::Minus => (&self.minus_p, &self.minus_q),
        }
    }

    fn local_y(&self, side: Side, y: f64) -> f64 {
        match side {
            Side::Plus => y - self.shift_b,
            Side::Minus => y,
        }
    }

    /// The piece on `side`, evaluated anywhere in the plane.
    pub fn eval_side(&self, side: Side, x: f64, y: f64) -> [f64; 2] {
        let (p, q) = self.components(side);
        let yl = self.local_y(side, y);
        [p.eval(x, yl), q.eval(x, yl)]
    }

    /// Filippov-free evaluation away from the line: `x > 0` uses the upper piece.
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        if x > 0.0 {
            self.eval_side(Side::Plus, x, y)
        } else {
            self.eval_side(Side::Minus, x, y)
        }
    }

    /// `Z±h` on the line, `h(x, y) = x`.
    pub fn lie_first(&self, side: Side, y: f64) -> f64 {
        self.eval_side(side, 0.0, y)[0]
    }

    /// `(Z±)^2 h = grad P± . Z±` on the line.
    pub fn lie_second(&self, side: Side, y: f64) -> f64 {
        let (p, _) = self.components(side);
        let yl = self.local_y(side, y);
        let v = self.eval_side(side, 0.0, y);
        p.differentiate(Variable::X).eval(0.0, yl) * v[0]
            + p.differentiate(Variable::Y).eval(0.0, yl) * v[1]
    }

    pub fn divergence(&self, side: Side) -> BiPolynomial {
        let (p, q) = self.components(side);
        &p.differentiate(Variable::X) + &q.differentiate(Variable::Y)
    }

    /// Coefficient scale used to turn absolute thresholds into relative ones.
    pub fn scale(&self) -> f64 {
        [&self.plus_p, &self.plus_q, &self.minus_p, &self.minus_q]
            .iter()
            .map(|p| p.scale())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    /// Half-return of one piece, integrated numerically.
    pub fn half_return(
        &self,
        side: Side,
        y: f64,
        direction: f64,
        opts: &IntegratorOptions,
    ) -> Result<f64> {
        let f = |s: [f64; 2]| self.eval_side(side, s[0], s[1]);
        flow_to_section(f, y, side.sign(), direction, opts, None).map(|h| h.y)
    }
}

/// Filippov type of a point of the switching line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BoundaryClass {
    Crossing,
    AttractingSliding,
    RepellingSliding,
    VisibleFoldPlus,
    InvisibleFoldPlus,
    VisibleFoldMinus,
    InvisibleFoldMinus,
    TwoFoldII,
    TwoFoldVV,
    TwoFoldVI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FoldCertificate {
    pub point: f64,
    pub lie_first_plus: f64,
    pub lie_first_minus: f64,
    pub lie_second_plus: f64,
    pub lie_second_minus: f64,
    pub classification: BoundaryClass,
    pub monodromy_flag: bool,
    /// `-1` attracting, `+1` repelling, `0` undetermined or not monodromic.
    pub ell_sign: i32,
    /// `+1` counterclockwise, `-1` clockwise.
    pub rotation_sign: i32,
}

/// Relative threshold below which a Lie derivative counts as zero.
pub const LIE_ZERO_TOL: f64 = 1e-12;

pub fn classify_boundary_point(z: &PiecewiseField, y: f64) -> Result<FoldCertificate> {
    classify_boundary_point_with_tol(z, y, LIE_ZERO_TOL)
}

pub fn classify_boundary_point_with_tol(
    z: &PiecewiseField,
    y: f64,
    tol: f64,
) -> Result<FoldCertificate> {
    let zero = tol * z.scale().max(1.0);
    let f_plus = z.lie_first(Side::Plus, y);
    let f_minus = z.lie_first(Side::Minus, y);
    let g_plus = z.lie_second(Side::Plus, y);
    let g_minus = z.lie_second(Side::Minus, y);
    let fold_plus = f_plus.abs() <= zero;
    let fold_minus = f_minus.abs() <= zero;
    if fold_plus && g_plus.abs() <= zero {
        return Err(Error::TangencyDegenerate { side: "plus", y });
    }
    if fold_minus && g_minus.abs() <= zero {
        return Err(Error::TangencyDegenerate { side: "minus", y });
    }
    let classification = match (fold_plus, fold_minus) {
        (false, false) if f_plus * f_minus > 0.0 => BoundaryClass::Crossing,
        (false, false) if f_plus < 0.0 => BoundaryClass::AttractingSliding,
        (false, false) => BoundaryClass::RepellingSliding,
        (true, false) if g_plus > 0.0 => BoundaryClass::VisibleFoldPlus,
        (true, false) => BoundaryClass::InvisibleFoldPlus,
        (false, true) if g_minus < 0.0 => BoundaryClass::VisibleFoldMinus,
        (false, true) => BoundaryClass::InvisibleFoldMinus,
        (true, true) => match (g_plus < 0.0, g_minus > 0.0) {
            (true, true) => BoundaryClass::TwoFoldII,
            (false, false) => BoundaryClass::TwoFoldVV,
            _ => BoundaryClass::TwoFoldVI,
        },
    };
    let q_plus = z.eval_side(Side::Plus, 0.0, y)[1];
    let q_minus = z.eval_side(Side::Minus, 0.0, y)[1];
    let monodromy_flag = classification == BoundaryClass::TwoFoldII && q_plus * q_minus < 0.0;
    let rotation_sign = if q_plus >= 0.0 { 1 } else { -1 };
    let ell_sign = if monodromy_flag {
        fold_stability(z, y, [g_plus, g_minus], [q_plus, q_minus])
    } else {
        0
    };
    Ok(FoldCertificate {
        point: y,
        lie_first_plus: f_plus,
        lie_first_minus: f_minus,
        lie_second_plus: g_plus,
        lie_second_minus: g_minus,
        classification,
        monodromy_flag,
        ell_sign,
        rotation_sign,
    })
}

/// Stability of a monodromic two-fold from full returns of small orbits.
///
/// Probe radii are fixed fractions of the fold length `Q^2 / |(Z)^2 h|` of
/// the shorter side; the sign must agree across probes.
fn fold_stability(z: &PiecewiseField, yf: f64, g: [f64; 2], q: [f64; 2]) -> i32 {
    let fold_len = (q[0] * q[0] / g[0].abs()).min(q[1] * q[1] / g[1].abs());
    let opts = IntegratorOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
    let mut signs = Vec::new();
    for frac in [1e-2, 3e-2] {
        let r = frac * fold_len.min(1.0);
        // start on the side of the fold where the upper piece points into x > 0
        let y0 = if z.lie_first(Side::Plus, yf + r) > 0.0 { yf + r } else { yf - r };
        let Ok(y1) = z.half_return(Side::Plus, y0, 1.0, &opts) else {
            return 0;
        };
        let Ok(y2) = z.half_return(Side::Minus, y1, 1.0, &opts) else {
            return 0;
        };
        let gain = (y2 - yf).abs() - (y0 - yf).abs();
        if gain.abs() <= 1e-9 * r {
            return 0;
        }
        signs.push(if gain > 0.0 { 1 } else { -1 });
    }
    if signs.windows(2).all(|w| w[0] == w[1]) {
        signs[0]
    } else {
        0
    }
}

/// Maximal subintervals of `[y_lo, y_hi]` on which `P+(0,y) P-(0,y) < 0`.
pub fn sliding_segments(
    z: &PiecewiseField,
    y_lo: f64,
    y_hi: f64,
    resolution: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(y_lo < y_hi) {
        return Err(Error::InvalidArgument(format!("empty window [{y_lo}, {y_hi}]")));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    let sliding = |y: f64| z.lie_first(Side::Plus, y) * z.lie_first(Side::Minus, y) < 0.0;
    let tol = 1e-14 * (1.0 + y_lo.abs().max(y_hi.abs()));
    // boundary between non-sliding `a` and sliding `b` (or the reverse)
    let refine = |mut a: f64, mut b: f64| {
        let target = sliding(b);
        while (b - a).abs() > tol {
            let m = 0.5 * (a + b);
            if sliding(m) == target {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    };
    let step = (y_hi - y_lo) / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|i| y_lo + step * i as f64).collect();
    let mut out = Vec::new();
    let mut start = if sliding(grid[0]) { Some(y_lo) } else { None };
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        match (sliding(a), sliding(b)) {
            (false, true) => start = Some(refine(a, b)),
            (true, false) => {
                out.push((start.take().unwrap_or(a), refine(b, a)));
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, y_hi));
    }
    Ok(out)
}
