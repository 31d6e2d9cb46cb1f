//! Pseudo-Hopf bifurcations of monodromic points on the switching line, the
//! degree-lifting construction and the sign of the second Lyapunov
//! coefficient at the lifted two-fold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{sweep_count_field, CountReport, CycleRecord, NumericCycle, Provenance, Tolerances};
use crate::error::{Error, Result};
use crate::field::{classify_boundary_point, sliding_segments, BoundaryClass, FoldCertificate, PiecewiseField, Side};
use crate::ode::IntegratorOptions;
use crate::poly::{BiPolynomial, Variable};

/// Decreasing schedule of shift magnitudes tried by default.
pub const B_SCHEDULE: [f64; 4] = [1e-1, 5e-2, 1e-2, 5e-3];

/// Leading `1/eps` term of `V_2` at the lifted origin:
/// `(2 delta / (3 eps)) (Pp Qp + Pm Qm) / (Pp Qp Pm Qm)`, `delta = sign(Pp)`.
pub fn lyapunov_v2_leading(pp: f64, qp: f64, pm: f64, qm: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("epsilon {eps} must be positive")));
    }
    if qp * qm == 0.0 {
        return Err(Error::ConditionB("Q+(0,0) Q-(0,0) = 0".into()));
    }
    let sum = pp * qp + pm * qm;
    if sum == 0.0 {
        return Err(Error::ConditionB("P+(0,0) Q+(0,0) + P-(0,0) Q-(0,0) = 0".into()));
    }
    let prod = pp * qp * pm * qm;
    if prod == 0.0 {
        return Err(Error::ConditionA("the origin is not a crossing point".into()));
    }
    let delta = pp.signum();
    Ok(2.0 * delta / (3.0 * eps) * sum / prod)
}

/// `(P+, Q+, P-, Q-)` at the origin.
fn origin_values(z: &PiecewiseField) -> [f64; 4] {
    let p = z.eval_side(Side::Plus, 0.0, 0.0);
    let m = z.eval_side(Side::Minus, 0.0, 0.0);
    [p[0], p[1], m[0], m[1]]
}

/// Conditions (A) and (B) at the origin; `cycles` are the `(upper, lower)`
/// ordinates of the crossing cycles to be preserved, which must lie in
/// `y < 0`.
pub fn check_conditions(z: &PiecewiseField, cycles: &[(f64, f64)]) -> Result<[f64; 4]> {
    let v = origin_values(z);
    let [pp, qp, pm, qm] = v;
    if !(pp * pm > 0.0) {
        return Err(Error::ConditionA(format!("origin is not a crossing point: P+ = {pp}, P- = {pm}")));
    }
    if let Some(c) = cycles.iter().find(|c| !(c.0 < 0.0 && c.1 < 0.0)) {
        return Err(Error::ConditionA(format!("cycle through {} and {} leaves y < 0", c.0, c.1)));
    }
    if qp * qm == 0.0 {
        return Err(Error::ConditionB(format!("Q+(0,0) Q-(0,0) = {}", qp * qm)));
    }
    if pp * qp + pm * qm == 0.0 {
        return Err(Error::ConditionB("P+(0,0) Q+(0,0) + P-(0,0) Q-(0,0) = 0".into()));
    }
    Ok(v)
}

/// `Z_eps = (y P, Q_eps)` with `Q+_eps = (y - eps P+ Q+) Q+` and
/// `Q-_eps = (y + eps P- Q-) Q-`, the products taken at the origin.
pub fn lifted_field(z: &PiecewiseField, eps: f64) -> PiecewiseField {
    let z = z.expanded();
    let [pp, qp, pm, qm] = origin_values(&z);
    let y = BiPolynomial::y();
    let factor = |c: f64| &y + &BiPolynomial::constant(c);
    PiecewiseField::new(
        &y * &z.plus_p,
        &factor(-eps * pp * qp) * &z.plus_q,
        &y * &z.minus_p,
        &factor(eps * pm * qm) * &z.minus_q,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LiftResult {
    pub base: PiecewiseField,
    pub epsilon: f64,
    pub lifted: PiecewiseField,
    pub v2_leading: f64,
    pub v2_leading_sign: i32,
    /// `sign(P+(0,0))`.
    pub delta_sign: i32,
    pub origin_certificate: FoldCertificate,
    pub base_degree: usize,
    pub lifted_degree: usize,
}

impl LiftResult {
    /// The lifted family at another `eps`.
    pub fn at(&self, eps: f64) -> PiecewiseField {
        lifted_field(&self.base, eps)
    }

    /// `sign(delta V_2)`, the shift sign that creates the extra cycle.
    pub fn admissible_b_sign(&self) -> i32 {
        self.delta_sign * self.v2_leading_sign
    }
}

/// Lifts `z` by one degree and certifies that the origin became an
/// invisible two-fold with `Q+_eps Q-_eps < 0`.
pub fn lift_degree(z: &PiecewiseField, eps: f64, cycles: &[(f64, f64)]) -> Result<LiftResult> {
    let base = z.expanded();
    let [pp, qp, pm, qm] = check_conditions(&base, cycles)?;
    let v2 = lyapunov_v2_leading(pp, qp, pm, qm, eps)?;
    let lifted = lifted_field(&base, eps);
    let cert = classify_boundary_point(&lifted, 0.0)?;
    if cert.classification != BoundaryClass::TwoFoldII {
        return Err(Error::Precondition(format!(
            "lifted origin is {:?}, not an invisible two-fold",
            cert.classification
        )));
    }
    let q_prod = lifted.eval_side(Side::Plus, 0.0, 0.0)[1] * lifted.eval_side(Side::Minus, 0.0, 0.0)[1];
    if !(q_prod < 0.0) {
        return Err(Error::Precondition(format!("Q+_eps Q-_eps = {q_prod} at the origin is not negative")));
    }
    Ok(LiftResult {
        base_degree: base.degree(),
        lifted_degree: lifted.degree(),
        base,
        epsilon: eps,
        lifted,
        v2_leading: v2,
        v2_leading_sign: if v2 > 0.0 { 1 } else { -1 },
        delta_sign: if pp > 0.0 { 1 } else { -1 },
        origin_certificate: cert,
    })
}

/// `Z+ = (-y + alpha x, 1)`, `Z- = (-y, -1)`: an invisible two-fold at the
/// origin, attracting for `alpha < 0`.
pub fn two_fold_demo(alpha: f64) -> PiecewiseField {
    PiecewiseField::new(
        &BiPolynomial::monomial(-1.0, 0, 1) + &BiPolynomial::monomial(alpha, 1, 0),
        BiPolynomial::constant(1.0),
        BiPolynomial::monomial(-1.0, 0, 1),
        BiPolynomial::constant(-1.0),
    )
}

/// Coefficient of the demonstration two-fold.
pub const DEMO_ALPHA: f64 = -0.2;

/// A monodromic point of the line and the data fixing the pseudo-Hopf sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PseudoHopfSetup {
    pub base_field: PiecewiseField,
    pub fold_ordinate: f64,
    /// `-1` attracting, `+1` repelling.
    pub ell_sign: i32,
    /// `+1` counterclockwise.
    pub rotation_sign: i32,
    pub admissible_b_sign: i32,
    /// Crossing orbits are searched up to this distance from the point.
    pub search_radius: f64,
}

impl PseudoHopfSetup {
    fn with_signs(z: &PiecewiseField, y: f64, ell: i32, a: i32, radius: f64) -> Result<Self> {
        if ell == 0 {
            return Err(Error::MonodromyMissing);
        }
        Ok(PseudoHopfSetup {
            base_field: z.clone(),
            fold_ordinate: y,
            ell_sign: ell,
            rotation_sign: a,
            admissible_b_sign: -a * ell,
            search_radius: radius,
        })
    }

    /// An invisible two-fold at `(0, y)`; stability from small returns.
    pub fn from_two_fold(z: &PiecewiseField, y: f64, radius: f64) -> Result<Self> {
        let cert = classify_boundary_point(z, y)?;
        if !cert.monodromy_flag {
            return Err(Error::MonodromyMissing);
        }
        Self::with_signs(z, y, cert.ell_sign, cert.rotation_sign, radius)
    }

    /// A focus of a field continuous at `(0, y)`: stability from the sign
    /// of the divergence, rotation from the sign of `Qx - Py`.
    pub fn from_focus(z: &PiecewiseField, y: f64, radius: f64) -> Result<Self> {
        let at = |p: &BiPolynomial| p.eval(0.0, y - z.shift_b);
        let div = at(&z.divergence(Side::Plus));
        let curl = at(&z.plus_q.differentiate(Variable::X)) - at(&z.plus_p.differentiate(Variable::Y));
        let div_minus = z.divergence(Side::Minus).eval(0.0, y);
        if div * div_minus <= 0.0 {
            return Err(Error::MonodromyMissing);
        }
        if curl == 0.0 {
            return Err(Error::MonodromyMissing);
        }
        let ell = if div > 0.0 { 1 } else { -1 };
        let a = if curl > 0.0 { 1 } else { -1 };
        Self::with_signs(z, y, ell, a, radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PseudoHopfOutcome {
    pub b: f64,
    /// `+1` for the admissible sign.
    pub sign: i32,
    pub found: bool,
    pub cycle: Option<NumericCycle>,
    pub sliding_segment: Option<(f64, f64)>,
    pub encloses_segment: bool,
    /// No sign change was found, and wherever the orbit returned as a
    /// crossing orbit the return was increasing with a displacement of one
    /// strict sign.
    pub absence_certified: bool,
}

/// Full return from a crossing point `y`: the piece the orbit enters first,
/// then the other, both forward in time.
pub fn loop_return(z: &PiecewiseField, y: f64, opts: &IntegratorOptions) -> Result<f64> {
    let fp = z.lie_first(Side::Plus, y);
    let fm = z.lie_first(Side::Minus, y);
    if !(fp * fm > 0.0) {
        return Err(Error::WrongSide { y, side: "sliding" });
    }
    let first = if fp < 0.0 { Side::Minus } else { Side::Plus };
    let y1 = z.half_return(first, y, 1.0, opts)?;
    let (gp, gm) = (z.lie_first(Side::Plus, y1), z.lie_first(Side::Minus, y1));
    let enters_other = match first.other() {
        Side::Plus => gp > 0.0 && gm > 0.0,
        Side::Minus => gp < 0.0 && gm < 0.0,
    };
    if !enters_other {
        return Err(Error::WrongSide { y: y1, side: "sliding" });
    }
    z.half_return(first.other(), y1, 1.0, opts)
}

/// Samples on one side of the segment, used for both existence and absence.
const PH_GRID: usize = 400;

fn search_shift(setup: &PseudoHopfSetup, b: f64, opts: &IntegratorOptions) -> Result<PseudoHopfOutcome> {
    let sign = if (b > 0.0) == (setup.admissible_b_sign > 0) { 1 } else { -1 };
    let z = setup.base_field.apply_shift(b);
    let yf = setup.fold_ordinate;
    let reach = 4.0 * b.abs() + 1e-9;
    let segment = sliding_segments(&z, yf - reach, yf + reach, 4001)?
        .into_iter()
        .min_by(|a, c| {
            let da = (0.5 * (a.0 + a.1) - yf).abs();
            let dc = (0.5 * (c.0 + c.1) - yf).abs();
            da.total_cmp(&dc)
        });
    let top = segment.map_or(yf, |s| s.1);
    // crossing points above the segment, out to the search radius
    let lo = top + 1e-6 * setup.search_radius;
    let hi = yf + setup.search_radius;
    let ys: Vec<f64> = (0..PH_GRID).map(|i| lo + (hi - lo) * i as f64 / (PH_GRID - 1) as f64).collect();
    let raw: Vec<Result<f64>> = ys.par_iter().map(|&y| loop_return(&z, y, opts).map(|r| r - y)).collect();
    // an orbit that lands on the sliding set or never returns closes no crossing cycle
    let excluded = raw
        .iter()
        .all(|r| !matches!(r, Err(e) if !matches!(e, Error::WrongSide { .. } | Error::NoReturn { .. })));
    let d: Vec<Option<f64>> = raw.into_iter().map(|r| r.ok()).collect();
    let mut bracket = None;
    for i in 0..PH_GRID - 1 {
        if let (Some(a), Some(c)) = (d[i], d[i + 1]) {
            if a != 0.0 && c != 0.0 && a.signum() != c.signum() {
                bracket = Some((ys[i], ys[i + 1], a));
                break;
            }
        }
    }
    let mut outcome = PseudoHopfOutcome {
        b,
        sign,
        found: false,
        cycle: None,
        sliding_segment: segment,
        encloses_segment: false,
        absence_certified: false,
    };
    match bracket {
        Some((a, c, da)) => {
            let (mut l, mut h, mut fl) = (a, c, da);
            for _ in 0..60 {
                let m = 0.5 * (l + h);
                let fm = loop_return(&z, m, opts)? - m;
                if fm.signum() == fl.signum() {
                    l = m;
                    fl = fm;
                } else {
                    h = m;
                }
            }
            let y = 0.5 * (l + h);
            let residual = (loop_return(&z, y, opts)? - y).abs();
            let first = if z.lie_first(Side::Plus, y) < 0.0 { Side::Minus } else { Side::Plus };
            let other = z.half_return(first, y, 1.0, opts)?;
            let step = 1e-6 * (hi - lo);
            let slope = ((loop_return(&z, y + step, opts)? - y - step)
                - (loop_return(&z, y - step, opts)? - y + step))
                / (2.0 * step);
            let cycle = NumericCycle {
                upper_ordinate: y.max(other),
                lower_ordinate: y.min(other),
                solved_ordinate: y,
                residual,
                hyperbolicity_margin: slope.abs(),
            };
            outcome.encloses_segment = segment
                .is_some_and(|s| cycle.lower_ordinate < s.0 && cycle.upper_ordinate > s.1);
            outcome.found = true;
            outcome.cycle = Some(cycle);
        }
        None => {
            let defined: Vec<f64> = d.iter().flatten().copied().collect();
            // the return itself must be increasing where defined
            let returns: Vec<f64> = ys.iter().zip(&d).filter_map(|(y, v)| v.map(|v| v + y)).collect();
            outcome.absence_certified = excluded
                && !defined.is_empty()
                && returns.windows(2).all(|w| w[1] > w[0])
                && (defined.iter().all(|&v| v > 0.0) || defined.iter().all(|&v| v < 0.0));
        }
    }
    Ok(outcome)
}

/// For each magnitude, the admissible and the opposite shift.
pub fn pseudo_hopf_search(
    setup: &PseudoHopfSetup,
    b_magnitudes: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<PseudoHopfOutcome>> {
    if setup.ell_sign == 0 {
        return Err(Error::MonodromyMissing);
    }
    if b_magnitudes.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument("shift magnitudes must be positive".into()));
    }
    let s = setup.admissible_b_sign as f64;
    let shifts: Vec<f64> = b_magnitudes.iter().flat_map(|&m| [s * m, -s * m]).collect();
    shifts.par_iter().map(|&b| search_shift(setup, b, opts)).collect()
}

/// Existence persists when `|b|` shrinks: checked per sign over a schedule.
pub fn existence_is_monotone(outcomes: &[PseudoHopfOutcome]) -> bool {
    [1, -1].iter().all(|&sign| {
        let mut by_mag: Vec<&PseudoHopfOutcome> = outcomes.iter().filter(|o| o.sign == sign).collect();
        by_mag.sort_by(|a, b| b.b.abs().total_cmp(&a.b.abs()));
        by_mag.windows(2).all(|w| !w[0].found || w[1].found)
    })
}

/// Shifts `z` by `b` and looks for one new cycle around each monodromic
/// point in `foci`; all of them must share stability and rotation.
pub fn simultaneous_pseudo_hopf(
    z: &PiecewiseField,
    foci: &[f64],
    b: f64,
    radius: f64,
    opts: &IntegratorOptions,
) -> Result<usize> {
    let setups: Vec<PseudoHopfSetup> = foci
        .iter()
        .map(|&y| {
            PseudoHopfSetup::from_focus(z, y, radius).or_else(|_| PseudoHopfSetup::from_two_fold(z, y, radius))
        })
        .collect::<Result<_>>()?;
    if let Some(first) = setups.first() {
        if setups
            .iter()
            .any(|s| s.ell_sign != first.ell_sign || s.rotation_sign != first.rotation_sign)
        {
            return Err(Error::Precondition("foci differ in stability or rotation".into()));
        }
    }
    let results: Vec<Result<PseudoHopfOutcome>> = setups.par_iter().map(|s| search_shift(s, b, opts)).collect();
    let mut found = 0;
    let mut errors = Vec::new();
    for (y, r) in foci.iter().zip(results) {
        match r {
            Ok(o) if o.found && o.encloses_segment => found += 1,
            Ok(_) => {}
            Err(e) => errors.push(format!("focus at {y}: {e}")),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Precondition(errors.join("; ")));
    }
    Ok(found)
}

/// Base ordinate shift of [`default_monotonicity_input`].
const DEMO_OFFSET: f64 = 1.0;

/// The level-0 field moved down by one unit with its lower piece doubled, so
/// that the origin is a crossing point with `P+ Q+ + P- Q- != 0`, together
/// with its swept cycles.
pub fn default_monotonicity_input(base_eps: f64, tol: &Tolerances) -> Result<MonotonicityInput> {
    let level = crate::hamiltonian_family::build_h0(
        &crate::hamiltonian_family::PerturbationCoeffs::canonical_level0(),
        base_eps,
    )?;
    let f = level.field();
    let field = PiecewiseField::new(
        f.plus_p.shift_y(-DEMO_OFFSET),
        f.plus_q.shift_y(-DEMO_OFFSET),
        f.minus_p.shift_y(-DEMO_OFFSET).scaled(2.0),
        f.minus_q.shift_y(-DEMO_OFFSET).scaled(2.0),
    );
    let window = (-2.0 * DEMO_OFFSET, 0.5 * DEMO_OFFSET);
    let cycles = sweep_count_field(&field, window, 2000, &tol.integrator)?;
    Ok(MonotonicityInput { field, cycles, window })
}

/// Inputs of the degree-lifting demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityInput {
    pub field: PiecewiseField,
    /// The certified cycles of `field`.
    pub cycles: Vec<NumericCycle>,
    /// Window of the line searched for cycles of the lifted field.
    pub window: (f64, f64),
}

impl MonotonicityInput {
    pub fn ordinates(&self) -> Vec<(f64, f64)> {
        self.cycles.iter().map(|c| (c.upper_ordinate, c.lower_ordinate)).collect()
    }
}

/// Parent cycles against their continuations under the unshifted lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PersistenceCheck {
    pub epsilon: f64,
    pub lifted: Vec<NumericCycle>,
    /// Per parent, the larger ordinate distance to its nearest lifted cycle.
    pub distances: Vec<f64>,
    /// Per parent, `10 eps / margin`.
    pub bounds: Vec<f64>,
}

impl PersistenceCheck {
    pub fn passed(&self) -> bool {
        self.lifted.len() == self.distances.len()
            && self.distances.iter().zip(&self.bounds).all(|(d, b)| d <= b)
    }
}

/// Sweeps the lift at `eps` with no shift and matches each parent cycle to
/// the nearest lifted one. A weakly hyperbolic parent moves further, so the
/// allowed distance is scaled by the inverse of its margin.
pub fn lift_persistence(input: &MonotonicityInput, eps: f64, grid: usize, tol: &Tolerances) -> Result<PersistenceCheck> {
    let lift = lift_degree(&input.field, eps, &input.ordinates())?;
    let lifted = sweep_count_field(&lift.lifted, input.window, grid, &tol.integrator)?;
    let distances = input
        .cycles
        .iter()
        .map(|p| {
            lifted
                .iter()
                .map(|c| (c.upper_ordinate - p.upper_ordinate).abs().max((c.lower_ordinate - p.lower_ordinate).abs()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let bounds = input.cycles.iter().map(|p| 10.0 * eps / p.hyperbolicity_margin).collect();
    Ok(PersistenceCheck { epsilon: eps, lifted, distances, bounds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityReport {
    pub epsilon: f64,
    pub b: f64,
    pub lift: Option<LiftResult>,
    /// Cycles of the result lying in `y < 0`.
    pub persisted: usize,
    pub count: CountReport,
}

/// Lifts the field of `input`, shifts the upper piece by `b` with
/// `sign(b) = sign(delta V_2)` (or `b_sign` when given), and counts the
/// crossing cycles of the result.
///
/// At `eps = 0` the lift is `y Z` and no shift is applied.
pub fn monotonicity_demo(
    input: &MonotonicityInput,
    eps: f64,
    b_magnitude: f64,
    b_sign: Option<i32>,
    grid: usize,
    tol: &Tolerances,
) -> Result<MonotonicityReport> {
    let started = std::time::Instant::now();
    let parents = input.ordinates();
    let (lift, field, b) = if eps == 0.0 {
        check_conditions(&input.field.expanded(), &parents)?;
        (None, lifted_field(&input.field, 0.0), 0.0)
    } else {
        let lift = lift_degree(&input.field, eps, &parents)?;
        let sign = b_sign.unwrap_or(lift.admissible_b_sign());
        let b = sign as f64 * b_magnitude;
        let field = lift.lifted.apply_shift(b);
        (Some(lift), field, b)
    };
    let cycles = sweep_count_field(&field, input.window, grid, &tol.integrator)?;
    let m = input.cycles.len();
    // continuations of the parent cycles stay below the line y = 0
    let persisted = cycles.iter().filter(|c| c.upper_ordinate < 0.0).count();
    let records: Vec<CycleRecord> = cycles
        .iter()
        .map(|c| {
            let near = c.lower_ordinate < 0.0 && c.upper_ordinate > 0.0;
            numeric_record(c, 0, eps, vec![b], near, 1.0, tol)
        })
        .collect();
    let found = records.iter().filter(|r| r.certified()).count() as u64;
    let count = CountReport {
        level: 0,
        expected: (m + 1) as u64,
        found,
        field_degree: field.degree(),
        records,
        epsilon_used: eps,
        epsilon_vector_used: vec![b],
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        unresolved: Vec::new(),
    };
    Ok(MonotonicityReport { epsilon: eps, b, lift, persisted, count })
}

/// A swept cycle as a record; only the margin is checked, relative to `scale`.
fn numeric_record(
    c: &NumericCycle,
    level: usize,
    eps: f64,
    evec: Vec<f64>,
    new: bool,
    scale: f64,
    tol: &Tolerances,
) -> CycleRecord {
    let mut violations = Vec::new();
    if c.hyperbolicity_margin <= tol.margin * scale {
        violations.push(format!("margin {:e} below {:e}", c.hyperbolicity_margin, tol.margin * scale));
    }
    CycleRecord {
        level,
        epsilon: eps,
        epsilon_vector: evec,
        upper_ordinate: c.upper_ordinate,
        lower_ordinate: c.lower_ordinate,
        limit_ordinate: f64::NAN,
        solved_ordinate: c.solved_ordinate,
        residual: c.residual,
        hyperbolicity_margin: c.hyperbolicity_margin,
        scale,
        family_level: level,
        surrounds_origin: new,
        provenance: if new { Provenance::PseudoHopf } else { Provenance::Sweep },
        violations,
    }
}

/// Root of `P(0, y)` nearest to `y = 0` within `|y| < 1/2`.
fn fold_near_origin(p: &BiPolynomial) -> Option<f64> {
    let roots = crate::poly::real_roots(&p.restrict_x0(), -0.5, 0.5, 1e-14).ok()?;
    roots.into_iter().map(|r| r.value).min_by(|a, b| a.abs().total_cmp(&b.abs()))
}

/// Extra pseudo-Hopf step at level `k <= 1`: the upper piece is shifted so
/// that the folds of the two pieces nearest the origin coincide, then by a
/// further `b_magnitude` in the admissible direction, and the crossing
/// cycles of the result are swept over `(-2, 2)`. The expected count is
/// [`pseudo_hopf_cycles`](crate::hamiltonian_family::pseudo_hopf_cycles).
///
/// A fold pair that does not form a monodromic two-fold once aligned is
/// reported in `unresolved`, and the unshifted field is counted instead.
pub fn pseudo_hopf_mode(
    k: usize,
    eps: f64,
    epsilon_vector: &[f64],
    tables: &[crate::hamiltonian_family::PerturbationCoeffs],
    b_magnitude: f64,
    grid: usize,
    tol: &Tolerances,
) -> Result<CountReport> {
    use crate::hamiltonian_family::{build_h0, build_level, pseudo_hopf_cycles};
    if k > 1 {
        return Err(Error::Precondition(format!("pseudo-Hopf mode runs at k <= 1, not {k}")));
    }
    if !(b_magnitude > 0.0) {
        return Err(Error::InvalidArgument("shift magnitude must be positive".into()));
    }
    let started = std::time::Instant::now();
    let level = if k == 0 {
        let t = tables.first().ok_or_else(|| Error::InvalidArgument("missing level-0 table".into()))?;
        build_h0(t, eps)?
    } else {
        build_level(k, eps, epsilon_vector, tables)?
    };
    let base = level.field();
    let mut unresolved = Vec::new();
    let setup = match (fold_near_origin(&base.plus_p), fold_near_origin(&base.minus_p)) {
        (Some(yp), Some(ym)) => PseudoHopfSetup::from_two_fold(&base.apply_shift(ym - yp), ym, 1.0)
            .map_err(|e| format!("aligned folds at y = {ym}: {e}")),
        _ => Err("no fold of both pieces near the origin".to_string()),
    };
    let (field, fold, b) = match setup {
        Ok(s) => {
            let b = s.admissible_b_sign as f64 * b_magnitude;
            (s.base_field.apply_shift(b), Some(s.fold_ordinate), s.base_field.shift_b + b)
        }
        Err(e) => {
            unresolved.push(e);
            (base.clone(), None, 0.0)
        }
    };
    let cycles = sweep_count_field(&field, (-2.0, 2.0), grid, &tol.integrator)?;
    // the smallest cycles of the family live at scale eps * eps_k
    let scale = eps * epsilon_vector.iter().product::<f64>();
    let records: Vec<CycleRecord> = cycles
        .iter()
        .map(|c| {
            // the new cycle is the innermost one around the fold
            let new = fold.is_some_and(|y| {
                c.lower_ordinate < y
                    && c.upper_ordinate > y
                    && !cycles.iter().any(|o| o.lower_ordinate > c.lower_ordinate && o.upper_ordinate < c.upper_ordinate)
            });
            numeric_record(c, k, eps, epsilon_vector.to_vec(), new, scale, tol)
        })
        .collect();
    Ok(CountReport {
        level: k,
        expected: pseudo_hopf_cycles(k),
        found: records.iter().filter(|r| r.certified()).count() as u64,
        field_degree: field.degree(),
        records,
        epsilon_used: eps,
        epsilon_vector_used: [epsilon_vector, &[b]].concat(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        unresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v2_examples() {
        assert!((lyapunov_v2_leading(1.0, 1.0, 1.0, -2.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(lyapunov_v2_leading(1.0, 1.0, 1.0, -1.0, 1.0), Err(Error::ConditionB(_))));
        let a = lyapunov_v2_leading(1.0, 1.0, 1.0, -2.0, 0.2).unwrap();
        let b = lyapunov_v2_leading(1.0, 1.0, 1.0, -2.0, 0.1).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lift_signs_and_degree() {
        // Pp = Qp = 1 at the origin; Pm = 1, Qm = -2
        let z = PiecewiseField::new(
            &BiPolynomial::constant(1.0) + &BiPolynomial::monomial(0.3, 1, 1),
            BiPolynomial::constant(1.0),
            BiPolynomial::constant(1.0),
            &BiPolynomial::constant(-2.0) + &BiPolynomial::monomial(0.5, 2, 0),
        );
        let r = lift_degree(&z, 0.1, &[]).unwrap();
        assert_eq!(r.lifted_degree, r.base_degree + 1);
        assert!((r.lifted.lie_second(Side::Plus, 0.0) + 0.1).abs() < 1e-15);
        assert!(r.origin_certificate.monodromy_flag);
        assert_eq!(r.origin_certificate.classification, BoundaryClass::TwoFoldII);
        // at eps = 0 the lift is y Z
        let flat = lifted_field(&z, 0.0);
        for (x, y) in [(0.3, -0.7), (-0.4, 0.2)] {
            let (a, b) = (flat.eval(x, y), z.eval(x, y));
            assert!((a[0] - y * b[0]).abs() < 1e-15 && (a[1] - y * b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn condition_b_is_named() {
        let z = PiecewiseField::new(
            BiPolynomial::constant(1.0),
            BiPolynomial::constant(1.0),
            BiPolynomial::constant(1.0),
            BiPolynomial::constant(-1.0),
        );
        let e = lift_degree(&z, 0.1, &[]).unwrap_err();
        assert!(e.to_string().contains("P+(0,0) Q+(0,0) + P-(0,0) Q-(0,0)"), "{e}");
    }

    #[test]
    fn two_fold_demo_dichotomy() {
        let z = two_fold_demo(-0.2);
        let setup = PseudoHopfSetup::from_two_fold(&z, 0.0, 1.0).unwrap();
        assert_eq!((setup.ell_sign, setup.rotation_sign, setup.admissible_b_sign), (-1, 1, 1));
        let out = pseudo_hopf_search(&setup, &[5e-2], &IntegratorOptions::default()).unwrap();
        let adm = out.iter().find(|o| o.sign == 1).unwrap();
        let opp = out.iter().find(|o| o.sign == -1).unwrap();
        assert!(adm.b > 0.0 && adm.found && adm.encloses_segment, "{adm:?}");
        assert!(!opp.found && opp.absence_certified, "{opp:?}");
        let all = pseudo_hopf_search(&setup, &B_SCHEDULE, &IntegratorOptions::default()).unwrap();
        assert!(existence_is_monotone(&all));
        // at |b| = 0.1 the cycle already leaves the unit search window
        assert!(all.iter().filter(|o| o.b.abs() <= 5e-2).all(|o| o.found == (o.sign == 1)));
        // b = 0: the folds collapse and no crossing cycle remains
        let collapsed = sweep_count_field(&z, (-1.0, 1.0), 400, &IntegratorOptions::default()).unwrap();
        assert!(collapsed.is_empty());
    }

    #[test]
    fn existing_cycle_persists_beside_new_one() {
        // xdot = -y + x (mu - r^2), ydot = x + y (mu - r^2): repelling focus, cycle r = 1/2
        let mu = 0.25;
        let r2 = &BiPolynomial::monomial(1.0, 2, 0) + &BiPolynomial::monomial(1.0, 0, 2);
        let g = &BiPolynomial::constant(mu) - &r2;
        let z = PiecewiseField::smooth(
            &BiPolynomial::monomial(-1.0, 0, 1) + &(&BiPolynomial::x() * &g),
            &BiPolynomial::x() + &(&BiPolynomial::y() * &g),
        );
        let setup = PseudoHopfSetup::from_focus(&z, 0.0, 0.3).unwrap();
        assert_eq!(setup.admissible_b_sign, -1);
        let opts = IntegratorOptions::default();
        let count = |b: f64| sweep_count_field(&z.apply_shift(b), (-1.0, 1.0), 2000, &opts).unwrap().len();
        assert_eq!(count(-1e-3), 2);
        assert_eq!(count(1e-3), 1);
    }

    #[test]
    fn monotonicity_adds_one_cycle() {
        let tol = Tolerances::default();
        let input = default_monotonicity_input(1e-2, &tol).unwrap();
        assert_eq!(input.cycles.len(), 1);
        let r = monotonicity_demo(&input, 1e-2, 1e-3, None, 4000, &tol).unwrap();
        let lift = r.lift.as_ref().unwrap();
        assert_eq!(lift.lifted_degree, lift.base_degree + 1);
        assert_eq!(lift.admissible_b_sign(), -1);
        // the numeric stability of the lifted two-fold matches sign(V_2)
        assert_eq!(lift.origin_certificate.ell_sign, lift.v2_leading_sign);
        assert_eq!((r.count.found, r.count.expected, r.persisted), (2, 2, 1));
        assert!(r.count.records.iter().any(|c| c.surrounds_origin));
        let wrong = monotonicity_demo(&input, 1e-2, 1e-3, Some(1), 4000, &tol).unwrap();
        assert_eq!(wrong.count.found, 1);
        let flat = monotonicity_demo(&input, 0.0, 1e-3, None, 4000, &tol).unwrap();
        assert_eq!(flat.count.found, 1);
    }

    #[test]
    fn lift_keeps_parent_cycles() {
        let tol = Tolerances::default();
        let input = default_monotonicity_input(1e-2, &tol).unwrap();
        for eps in [1e-3, 1e-4] {
            let p = lift_persistence(&input, eps, 2000, &tol).unwrap();
            assert!(p.passed(), "{p:?}");
        }
    }

    #[test]
    fn pseudo_hopf_mode_level0() {
        let tables = crate::hamiltonian_family::default_tables(0).unwrap();
        let r = pseudo_hopf_mode(0, 1e-3, &[], &tables, 1e-4, 4000, &Tolerances::default()).unwrap();
        assert_eq!(r.expected, 2);
        assert!(r.unresolved.is_empty());
        // aligning the folds removes the level-0 cycle, the step restores one
        assert_eq!(r.found, 1);
        assert!(r.records[0].surrounds_origin);
        let tables1 = crate::hamiltonian_family::default_tables(1).unwrap();
        let r1 = pseudo_hopf_mode(1, 1e-3, &[1e-3], &tables1, 1e-4, 4000, &Tolerances::default()).unwrap();
        assert_eq!((r1.expected, r1.found, r1.unresolved.len()), (7, 4, 1));
        assert!(pseudo_hopf_mode(2, 1e-3, &[], &tables, 1e-4, 4000, &Tolerances::default()).is_err());
    }

    #[test]
    fn focus_demo() {
        let z = PiecewiseField::smooth(
            &BiPolynomial::monomial(-1.0, 0, 1) + &BiPolynomial::monomial(0.05, 1, 0),
            BiPolynomial::x(),
        );
        let setup = PseudoHopfSetup::from_focus(&z, 0.0, 1.0).unwrap();
        assert_eq!(setup.admissible_b_sign, -1);
        let opts = IntegratorOptions::default();
        assert_eq!(simultaneous_pseudo_hopf(&z, &[0.0], -0.05, 1.0, &opts).unwrap(), 1);
        assert_eq!(simultaneous_pseudo_hopf(&z, &[0.0], 0.05, 1.0, &opts).unwrap(), 0);
        assert_eq!(simultaneous_pseudo_hopf(&z, &[0.0], 0.0, 1.0, &opts).unwrap(), 0);
    }
}
