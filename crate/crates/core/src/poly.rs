//! Dense univariate and bivariate polynomials with real root isolation.
//!
//! Every Hamiltonian, vector field component and Melnikov numerator in the
//! crate is one of these two types. Coefficients are `f64`; degrees stay
//! small (at most 24 for the deepest supported level), so dense storage and
//! Horner evaluation are the right tools.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial in one variable, `coeffs[n]` multiplying `t^n`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "UniRepr", try_from = "UniRepr")]
pub struct UniPolynomial {
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct UniRepr {
    coeffs: Vec<f64>,
}

impl From<UniPolynomial> for UniRepr {
    fn from(p: UniPolynomial) -> Self {
        UniRepr { coeffs: p.coeffs }
    }
}

impl TryFrom<UniRepr> for UniPolynomial {
    type Error = Error;
    fn try_from(r: UniRepr) -> Result<Self> {
        if r.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(UniPolynomial::new(r.coeffs))
    }
}

impl fmt::Debug for UniPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UniPolynomial{:?}", self.coeffs)
    }
}

impl UniPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        UniPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        UniPolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The identity polynomial `t`.
    pub fn identity() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Self::constant(1.0), |acc, &r| {
            &acc * &Self::new(vec![-r, 1.0])
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `t^n`, zero beyond the stored range.
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Largest absolute coefficient (1 for the zero polynomial).
    pub fn scale(&self) -> f64 {
        let m = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in self.coeffs.iter().rev() {
            dp = dp * t + p;
            p = p * t + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, c)| n as f64 * c)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `self(inner(t))`.
    pub fn compose(&self, inner: &UniPolynomial) -> Self {
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, &c| &(&acc * inner) + &Self::constant(c))
    }

    /// Even part, keeping only the coefficients of even powers.
    pub fn even_part(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(n, &c)| if n % 2 == 0 { c } else { 0.0 })
                .collect(),
        )
    }

    /// Odd part, keeping only the coefficients of odd powers.
    pub fn odd_part(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(n, &c)| if n % 2 == 1 { c } else { 0.0 })
                .collect(),
        )
    }

    /// The divided difference `(p(a) - p(b)) / (a - b)`, evaluated from the
    /// coefficients through complete homogeneous sums so that `a == b` yields
    /// `p'(a)` without a special case. Also returns the partial derivative
    /// with respect to `b`.
    pub fn divided_difference(&self, a: f64, b: f64) -> (f64, f64) {
        // s_m = sum_{i=0}^{m} a^i b^{m-i}, ds_m = d s_m / d b
        let mut s = 1.0;
        let mut ds = 0.0;
        let mut a_pow = 1.0;
        let mut value = 0.0;
        let mut dvalue = 0.0;
        for n in 1..self.coeffs.len() {
            // s currently holds s_{n-1}
            let c = self.coeffs[n];
            value += c * s;
            dvalue += c * ds;
            a_pow *= a;
            let next_ds = s + b * ds;
            s = a_pow + b * s;
            ds = next_ds;
        }
        (value, dvalue)
    }

    /// Real roots in `[lo, hi]`; see [`real_roots`].
    pub fn real_roots(&self, lo: f64, hi: f64, tol: f64) -> Result<Vec<RealRoot>> {
        real_roots(self, lo, hi, tol)
    }
}

impl Add for &UniPolynomial {
    type Output = UniPolynomial;
    fn add(self, rhs: &UniPolynomial) -> UniPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPolynomial::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &UniPolynomial {
    type Output = UniPolynomial;
    fn sub(self, rhs: &UniPolynomial) -> UniPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPolynomial::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &UniPolynomial {
    type Output = UniPolynomial;
    fn mul(self, rhs: &UniPolynomial) -> UniPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return UniPolynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPolynomial::new(out)
    }
}

impl Neg for &UniPolynomial {
    type Output = UniPolynomial;
    fn neg(self) -> UniPolynomial {
        self.scaled(-1.0)
    }
}

/// A root returned by [`real_roots`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealRoot {
    pub value: f64,
    pub simple: bool,
}

/// Threshold on `|p'|`, relative to `max |p| / (hi - lo)` on the window,
/// below which a root is reported as multiple.
pub const SIMPLICITY_FACTOR: f64 = 1e-8;

/// Isolates the real roots of `p` in `[lo, hi]`.
///
/// Sign changes are bracketed on a uniform grid and polished by bisection
/// followed by guarded Newton steps. Even-multiplicity roots, which do not
/// change sign, are picked up at local minima of `|p|` on the grid whose
/// refined value is below `tol` times the peak of `|p|` on the window. Roots come back sorted.
pub fn real_roots(p: &UniPolynomial, lo: f64, hi: f64, tol: f64) -> Result<Vec<RealRoot>> {
    if !(hi - lo >= tol) || !(tol > 0.0) {
        return Err(Error::DegenerateInterval { lo, hi, tol });
    }
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let dp = p.derivative();
    if p.degree() == 0 {
        return Ok(Vec::new());
    }
    let n = (400 * p.degree()).max(2000);
    let step = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| p.eval(t)).collect();
    // size of p on the window, so that thresholds do not depend on how
    // large the coefficients are away from it
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    let mut found: Vec<f64> = Vec::new();
    for i in 0..n {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            found.push(a);
            continue;
        }
        if fa.signum() != fb.signum() && fb != 0.0 {
            found.push(polish_bracketed(p, &dp, a, b, fa, tol));
        }
    }
    if values[n] == 0.0 {
        found.push(grid[n]);
    }

    // touching roots: interior local minima of |p| without a sign change
    let zero_tol = tol * scale;
    for i in 1..n {
        let (l, m, r) = (values[i - 1].abs(), values[i].abs(), values[i + 1].abs());
        if m <= l && m <= r && values[i - 1].signum() == values[i + 1].signum() && m < 1e3 * zero_tol
        {
            let t = refine_extremum(&dp, grid[i - 1], grid[i + 1], tol);
            if p.eval(t).abs() <= zero_tol {
                found.push(t);
            }
        }
    }

    found.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut roots: Vec<RealRoot> = Vec::new();
    for t in found {
        if let Some(last) = roots.last() {
            if (t - last.value).abs() <= 10.0 * tol.max(step * 1e-3) {
                continue;
            }
        }
        let simple = dp.eval(t).abs() > SIMPLICITY_FACTOR * scale / (hi - lo);
        roots.push(RealRoot { value: t, simple });
    }
    Ok(roots)
}

fn polish_bracketed(p: &UniPolynomial, dp: &UniPolynomial, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if b - a <= tol * 1e-3 {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = p.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    // a few Newton steps, kept inside the bracket
    let mut t = 0.5 * (a + b);
    for _ in 0..4 {
        let d = dp.eval(t);
        if d == 0.0 {
            break;
        }
        let next = t - p.eval(t) / d;
        if next < a || next > b {
            break;
        }
        t = next;
    }
    t
}

/// Zero of `dp` (extremum of `p`) between `a` and `b` by bisection when
/// bracketed, otherwise the midpoint.
fn refine_extremum(dp: &UniPolynomial, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = dp.eval(a);
    let fb = dp.eval(b);
    if fa.signum() == fb.signum() {
        return 0.5 * (a + b);
    }
    while b - a > tol * 1e-3 {
        let m = 0.5 * (a + b);
        let fm = dp.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Which coordinate to differentiate in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    X,
    Y,
}

/// Polynomial in `(x, y)`; `coeffs[i][j]` multiplies `x^i y^j`.
///
/// The grid is kept rectangular and trimmed so that the last row and the
/// last column each contain a nonzero entry.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BiRepr", try_from = "BiRepr")]
pub struct BiPolynomial {
    coeffs: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct BiRepr {
    coeffs: Vec<Vec<f64>>,
}

impl From<BiPolynomial> for BiRepr {
    fn from(p: BiPolynomial) -> Self {
        BiRepr { coeffs: p.coeffs }
    }
}

impl TryFrom<BiRepr> for BiPolynomial {
    type Error = Error;
    fn try_from(r: BiRepr) -> Result<Self> {
        if r.coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(BiPolynomial::new(r.coeffs))
    }
}

impl fmt::Debug for BiPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BiPolynomial{:?}", self.coeffs)
    }
}

impl BiPolynomial {
    /// Builds from a possibly ragged grid; missing entries are zero.
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut coeffs: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|mut r| {
                r.resize(width, 0.0);
                r
            })
            .collect();
        while coeffs.last().is_some_and(|r| r.iter().all(|&c| c == 0.0)) {
            coeffs.pop();
        }
        let mut width = coeffs.first().map_or(0, Vec::len);
        while width > 0 && coeffs.iter().all(|r| r[width - 1] == 0.0) {
            width -= 1;
        }
        for r in &mut coeffs {
            r.truncate(width);
        }
        if width == 0 {
            coeffs.clear();
        }
        BiPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        BiPolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![vec![c]])
    }

    /// Single monomial `c x^i y^j`.
    pub fn monomial(c: f64, i: usize, j: usize) -> Self {
        let mut rows = vec![vec![0.0; j + 1]; i + 1];
        rows[i][j] = c;
        Self::new(rows)
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn y() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    /// Lifts a polynomial in `y` alone.
    pub fn from_y(p: &UniPolynomial) -> Self {
        Self::new(vec![p.coeffs().to_vec()])
    }

    /// Lifts a polynomial in `x` alone.
    pub fn from_x(p: &UniPolynomial) -> Self {
        Self::new(p.coeffs().iter().map(|&c| vec![c]).collect())
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeffs.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree_x(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn degree_y(&self) -> usize {
        self.coeffs.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    /// `max{i + j : c[i][j] != 0}`, 0 for the zero polynomial.
    pub fn total_degree(&self) -> usize {
        self.coeffs
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0.0)
                    .map(move |(j, _)| i + j)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self) -> f64 {
        let m = self.coeffs.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, row| {
            acc * x + row.iter().rev().fold(0.0, |a, &c| a * y + c)
        })
    }

    /// Formal partial derivative.
    pub fn differentiate(&self, var: Variable) -> Self {
        match var {
            Variable::X => Self::new(
                self.coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, r)| r.iter().map(|c| c * i as f64).collect())
                    .collect(),
            ),
            Variable::Y => Self::new(
                self.coeffs
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .skip(1)
                            .map(|(j, c)| c * j as f64)
                            .collect()
                    })
                    .collect(),
            ),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|r| r.iter().map(|c| c * s).collect())
                .collect(),
        )
    }

    /// The rows as polynomials in `y`.
    fn rows_in_y(&self) -> impl Iterator<Item = UniPolynomial> + '_ {
        self.coeffs.iter().map(|r| UniPolynomial::new(r.clone()))
    }

    /// `self(x, inner(y))`.
    pub fn compose_y(&self, inner: &UniPolynomial) -> Self {
        Self::new(
            self.rows_in_y()
                .map(|r| r.compose(inner).coeffs().to_vec())
                .collect(),
        )
    }

    /// Pullback by the singular map `(x, y) -> (x, y^2 - 2)`.
    pub fn pullback_phi(&self) -> Self {
        self.compose_y(&phi_polynomial())
    }

    /// `self(x, y - b)`, expanded.
    pub fn shift_y(&self, b: f64) -> Self {
        if b == 0.0 {
            return self.clone();
        }
        self.compose_y(&UniPolynomial::new(vec![-b, 1.0]))
    }

    /// `self(0, y)` as a polynomial in `y`.
    pub fn restrict_x0(&self) -> UniPolynomial {
        self.coeffs
            .first()
            .map_or_else(UniPolynomial::zero, |r| UniPolynomial::new(r.clone()))
    }

    /// Largest coefficient-wise absolute difference.
    pub fn max_coeff_diff(&self, other: &BiPolynomial) -> f64 {
        let rows = self.coeffs.len().max(other.coeffs.len());
        let cols = self.degree_y().max(other.degree_y()) + 1;
        let mut m = 0.0f64;
        for i in 0..rows {
            for j in 0..cols {
                m = m.max((self.coeff(i, j) - other.coeff(i, j)).abs());
            }
        }
        m
    }
}

impl Add for &BiPolynomial {
    type Output = BiPolynomial;
    fn add(self, rhs: &BiPolynomial) -> BiPolynomial {
        let rows = self.coeffs.len().max(rhs.coeffs.len());
        let cols = self.degree_y().max(rhs.degree_y()) + 1;
        BiPolynomial::new(
            (0..rows)
                .map(|i| (0..cols).map(|j| self.coeff(i, j) + rhs.coeff(i, j)).collect())
                .collect(),
        )
    }
}

impl Sub for &BiPolynomial {
    type Output = BiPolynomial;
    fn sub(self, rhs: &BiPolynomial) -> BiPolynomial {
        self + &rhs.scaled(-1.0)
    }
}

impl Neg for &BiPolynomial {
    type Output = BiPolynomial;
    fn neg(self) -> BiPolynomial {
        self.scaled(-1.0)
    }
}

impl Mul for &BiPolynomial {
    type Output = BiPolynomial;
    fn mul(self, rhs: &BiPolynomial) -> BiPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return BiPolynomial::zero();
        }
        let rows = self.coeffs.len() + rhs.coeffs.len() - 1;
        let cols = self.degree_y() + rhs.degree_y() + 1;
        let mut out = vec![vec![0.0; cols]; rows];
        for (i1, r1) in self.coeffs.iter().enumerate() {
            for (j1, &a) in r1.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (i2, r2) in rhs.coeffs.iter().enumerate() {
                    for (j2, &b) in r2.iter().enumerate() {
                        out[i1 + i2][j1 + j2] += a * b;
                    }
                }
            }
        }
        BiPolynomial::new(out)
    }
}

/// `phi(t) = t^2 - 2`, the second coordinate of the singular transformation.
pub fn phi_polynomial() -> UniPolynomial {
    UniPolynomial::new(vec![-2.0, 0.0, 1.0])
}

/// `phi(t) = t^2 - 2` evaluated directly.
pub fn phi(t: f64) -> f64 {
    t * t - 2.0
}

/// The `i`-fold iterate `phi^i(t)` (`phi^0(t) = t`).
pub fn phi_iterate(i: usize, t: f64) -> f64 {
    (0..i).fold(t, |acc, _| phi(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn saddle_plus() -> BiPolynomial {
        // ((x - 1)^2 - y^2) / 2
        BiPolynomial::new(vec![vec![0.5, 0.0, -0.5], vec![-1.0], vec![0.5]])
    }

    #[test]
    fn evaluate_examples() {
        let p = BiPolynomial::new(vec![vec![-2.0, 0.0, 1.0]]);
        assert_abs_diff_eq!(p.eval(0.0, 2f64.sqrt()), 0.0, epsilon = 1e-15);
        let h = saddle_plus();
        assert_eq!(h.eval(1.0, 0.0), 0.0);
        assert_eq!(h.eval(0.0, 1.0), 0.0);
    }

    #[test]
    fn differentiate_examples() {
        let h = saddle_plus();
        assert_eq!(h.differentiate(Variable::Y), BiPolynomial::monomial(-1.0, 0, 1));
        assert_eq!(
            h.differentiate(Variable::X),
            &BiPolynomial::x() - &BiPolynomial::constant(1.0)
        );
        let y3 = BiPolynomial::monomial(1.0, 0, 3);
        assert_eq!(y3.differentiate(Variable::Y), BiPolynomial::monomial(3.0, 0, 2));
        assert!(BiPolynomial::constant(4.0).differentiate(Variable::X).is_zero());
    }

    #[test]
    fn pullback_examples() {
        assert_eq!(
            BiPolynomial::y().pullback_phi(),
            BiPolynomial::new(vec![vec![-2.0, 0.0, 1.0]])
        );
        assert_eq!(BiPolynomial::constant(3.5).pullback_phi(), BiPolynomial::constant(3.5));
        let cubic = &saddle_plus() + &BiPolynomial::monomial(0.5, 0, 3);
        assert_eq!(cubic.total_degree(), 3);
        assert_eq!(cubic.pullback_phi().total_degree(), 6);
        assert_eq!(cubic.pullback_phi().degree_x(), cubic.degree_x());
    }

    #[test]
    fn shift_is_substitution() {
        let p = &BiPolynomial::monomial(-1.0, 0, 1) + &BiPolynomial::monomial(0.3, 1, 2);
        let q = p.shift_y(0.1);
        for &(x, y) in &[(0.2, -0.4), (1.0, 1.5), (-0.7, 0.05)] {
            assert_abs_diff_eq!(q.eval(x, y), p.eval(x, y - 0.1), epsilon = 1e-14);
        }
    }

    #[test]
    fn roots_of_quadratic() {
        let p = UniPolynomial::new(vec![-2.0, 0.0, 1.0]);
        let roots = p.real_roots(-2.0, 2.0, 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        assert_abs_diff_eq!(roots[0].value, -(2f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(roots[1].value, 2f64.sqrt(), epsilon = 1e-12);
        assert!(roots.iter().all(|r| r.simple));
    }

    #[test]
    fn roots_of_designed_melnikov_numerator() {
        let p = UniPolynomial::new(vec![-0.125, 0.0, 0.5]);
        let roots = p.real_roots(0.0, 1.0, 1e-12).unwrap();
        assert_eq!(roots.len(), 1);
        assert_abs_diff_eq!(roots[0].value, 0.5, epsilon = 1e-12);
        assert!(roots[0].simple);
    }

    #[test]
    fn roots_of_phi_squared_are_nested_radicals() {
        let phi2 = phi_polynomial().compose(&phi_polynomial());
        let roots = phi2.real_roots(0.0, 2.0, 1e-12).unwrap();
        let expected = [(2.0 - 2f64.sqrt()).sqrt(), (2.0 + 2f64.sqrt()).sqrt()];
        assert_eq!(roots.len(), 2);
        for (r, e) in roots.iter().zip(expected) {
            assert_abs_diff_eq!(r.value, e, epsilon = 1e-11);
        }
    }

    #[test]
    fn double_root_is_flagged() {
        let p = UniPolynomial::from_roots(&[0.3, 0.3, -0.5]);
        let roots = p.real_roots(-1.0, 1.0, 1e-10).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots[0].simple);
        assert!(!roots[1].simple);
        assert_abs_diff_eq!(roots[1].value, 0.3, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_interval_is_rejected() {
        let p = UniPolynomial::new(vec![1.0, 1.0]);
        assert!(matches!(
            p.real_roots(0.0, 1e-14, 1e-12),
            Err(Error::DegenerateInterval { .. })
        ));
        assert!(matches!(
            UniPolynomial::zero().real_roots(0.0, 1.0, 1e-12),
            Err(Error::ZeroPolynomial)
        ));
    }

    #[test]
    fn divided_difference_matches_definition() {
        let p = UniPolynomial::new(vec![0.3, -1.0, 0.25, 2.0, -0.5]);
        let (a, b) = (0.7, -0.45);
        let (dd, ddb) = p.divided_difference(a, b);
        assert_abs_diff_eq!(dd, (p.eval(a) - p.eval(b)) / (a - b), epsilon = 1e-14);
        let h = 1e-6;
        let fd = (p.divided_difference(a, b + h).0 - p.divided_difference(a, b - h).0) / (2.0 * h);
        assert_abs_diff_eq!(ddb, fd, epsilon = 1e-8);
        // continuity fill-in
        let (d_same, _) = p.divided_difference(a, a);
        assert_abs_diff_eq!(d_same, p.derivative().eval(a), epsilon = 1e-14);
    }

    #[test]
    fn json_layout() {
        let p = saddle_plus();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"coeffs":[[0.5,0.0,-0.5],[-1.0,0.0,0.0],[0.5,0.0,0.0]]}"#);
        let back: BiPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
