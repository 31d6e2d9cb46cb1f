//! Cycle certification: Newton continuation of displacement zeros seeded
//! from Melnikov zeros and from doubled parent cycles, hyperbolicity
//! margins, the `(A_k)` hypotheses and an independent sweep counter.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PiecewiseField, Side};
use crate::hamiltonian_family::{
    build_level, default_tables, expected_cycles, interval_ik, HamiltonianLevel,
    PerturbationCoeffs,
};
use crate::melnikov::MelnikovSpec;
use crate::ode::IntegratorOptions;
use crate::poly::{real_roots, UniPolynomial};
use crate::return_maps::{entry_direction, SigmaProfile};

/// Thresholds shared by every certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances {
    /// Residual bound, relative to the record scale.
    pub residual: f64,
    /// Hyperbolicity margin floor, relative to the record scale.
    pub margin: f64,
    /// Minimal separation of two records.
    pub distinct: f64,
    /// Allowed gap between algebraic and integrated half-returns.
    pub geometric: f64,
    pub integrator: IntegratorOptions,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-10,
            margin: 1e-6,
            distinct: 1e-9,
            geometric: 1e-7,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Provenance {
    MelnikovSeed,
    DoubledFromParent,
    PseudoHopf,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CycleRecord {
    pub level: usize,
    pub epsilon: f64,
    pub epsilon_vector: Vec<f64>,
    pub upper_ordinate: f64,
    pub lower_ordinate: f64,
    /// The `eps -> 0` limit of the refined ordinate.
    pub limit_ordinate: f64,
    /// The ordinate at which the displacement was solved.
    pub solved_ordinate: f64,
    pub residual: f64,
    pub hyperbolicity_margin: f64,
    /// `eps * eps_m` for a cycle first surrounding the origin at level `m`.
    pub scale: f64,
    /// Level at which the cycle's ancestor surrounds the origin.
    pub family_level: usize,
    pub surrounds_origin: bool,
    pub provenance: Provenance,
    /// Failed invariants; empty for a certified record.
    pub violations: Vec<String>,
}

impl CycleRecord {
    pub fn certified(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CountReport {
    pub level: usize,
    pub expected: u64,
    pub found: u64,
    pub field_degree: usize,
    pub records: Vec<CycleRecord>,
    pub epsilon_used: f64,
    pub epsilon_vector_used: Vec<f64>,
    /// Left out of JSON so that reports are byte-identical across runs; the
    /// CSV summary carries it.
    #[serde(default, skip_serializing)]
    pub wall_clock_seconds: f64,
    /// Seeds that could not be refined, with the reason.
    pub unresolved: Vec<String>,
}

impl CountReport {
    pub fn passed(&self) -> bool {
        self.found == self.expected && self.unresolved.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn min_margin(&self) -> f64 {
        self.records.iter().map(|r| r.hyperbolicity_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Summary table with one row per report.
pub fn summary_csv(reports: &[CountReport]) -> String {
    let mut out = String::from("k,n_k,c_k,found,max_residual,min_margin,wall_clock_s\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{:e},{:e},{:.3}",
            r.level,
            r.field_degree,
            r.expected,
            r.found,
            r.max_residual(),
            r.min_margin(),
            r.wall_clock_seconds
        )
        .expect("writing to a String");
    }
    out
}

/// A refinement request: solve `delta = 0` on a family near `seed`.
#[derive(Debug, Clone, Copy)]
struct Seed {
    ordinate: f64,
    limit: f64,
    family_level: usize,
    provenance: Provenance,
}

/// Newton on the family displacement with a central-difference slope.
///
/// The displacement carries rounding noise, so iteration stops once the
/// step is at the ulp level or `|delta|` has stopped decreasing; the best
/// iterate is returned and the residual is audited by the caller.
fn refine_zero(profile: &SigmaProfile, seed: f64, eps: f64, born: usize) -> Result<f64> {
    let mut y = seed;
    let mut best = (f64::INFINITY, seed);
    let mut stalled = 0;
    for _ in 0..crate::return_maps::NEWTON_MAX_ITER {
        let d = profile.displacement(y, eps, born)?;
        if d.abs() < best.0 {
            best = (d.abs(), y);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 {
                return Ok(best.1);
            }
        }
        if d == 0.0 {
            return Ok(y);
        }
        let slope = profile.displacement_slope(y, eps, born)?;
        if slope == 0.0 || !slope.is_finite() {
            return Err(Error::SeedDivergence { seed, reason: "flat displacement".into() });
        }
        let step = d / slope;
        y -= step;
        if (y - seed).abs() > 0.25 || !y.is_finite() {
            return Err(Error::SeedDivergence { seed, reason: format!("left the seed basin at {y}") });
        }
        if step.abs() <= 4.0 * f64::EPSILON * y.abs().max(1e-3) {
            return Ok(y);
        }
    }
    Err(Error::SeedDivergence { seed, reason: "Newton iteration limit".into() })
}

fn family_scale(level: &HamiltonianLevel, born: usize) -> f64 {
    level.epsilon * level.level_weights()[born]
}

/// Refines one seed into a record and audits its invariants (all but
/// distinctness, which needs the full set).
fn certify_seed(
    level: &HamiltonianLevel,
    profile: &SigmaProfile,
    field: &PiecewiseField,
    seed: Seed,
    tol: &Tolerances,
) -> Result<CycleRecord> {
    let eps = level.epsilon;
    let born = seed.family_level;
    let y = refine_zero(profile, seed.ordinate, eps, born)?;
    let ret = profile.half_return(Side::Plus, y, eps, born)?;
    let residual = profile.displacement(y, eps, born)?.abs();
    let margin = profile.displacement_slope(y, eps, born)?.abs();
    let scale = family_scale(level, born);
    let mut violations = Vec::new();
    if residual > tol.residual * scale {
        violations.push(format!("residual {residual:e} above {:e}", tol.residual * scale));
    }
    if margin <= tol.margin * scale {
        violations.push(format!("margin {margin:e} below {:e}", tol.margin * scale));
    }
    for v in [y, ret.y1] {
        if !(v.abs() < 2.0) {
            violations.push(format!("ordinate {v} outside (-2, 2)"));
        }
        if v == 0.0 {
            violations.push("ordinate on the axis y = 0".into());
        }
    }
    if tol.geometric > 0.0 {
        if let Err(e) = geometric_check(field, y, ret.y1, tol) {
            violations.push(e);
        }
    }
    Ok(CycleRecord {
        level: level.level,
        epsilon: eps,
        epsilon_vector: level.epsilon_vector.clone(),
        upper_ordinate: y.max(ret.y1),
        lower_ordinate: y.min(ret.y1),
        limit_ordinate: seed.limit,
        solved_ordinate: y,
        residual,
        hyperbolicity_margin: margin,
        scale,
        family_level: born,
        surrounds_origin: born == level.level,
        provenance: seed.provenance,
        violations,
    })
}

/// Both pieces, integrated from `y`, must land on the algebraic return.
fn geometric_check(
    field: &PiecewiseField,
    y: f64,
    y1: f64,
    tol: &Tolerances,
) -> std::result::Result<(), String> {
    for side in [Side::Plus, Side::Minus] {
        let dir = entry_direction(field, side, y).map_err(|e| e.to_string())?;
        let hit = field
            .half_return(side, y, dir, &tol.integrator)
            .map_err(|e| format!("{} piece: {e}", side.name()))?;
        if (hit - y1).abs() > tol.geometric {
            return Err(format!(
                "{} piece returns to {hit}, algebraic branch gives {y1}",
                side.name()
            ));
        }
    }
    Ok(())
}

fn mark_duplicates(records: &mut [CycleRecord], tol: f64) {
    let n = records.len();
    for i in 0..n {
        for j in 0..n {
            if i != j
                && (records[i].upper_ordinate - records[j].upper_ordinate).abs() <= tol
                && (records[i].lower_ordinate - records[j].lower_ordinate).abs() <= tol
            {
                records[i].violations.push(format!("duplicates record at {}", records[j].solved_ordinate));
            }
        }
    }
}

/// Simple zeros of the top-level Melnikov numerator inside `Int(I_k)`.
pub fn melnikov_seeds(level: &HamiltonianLevel) -> Result<Vec<f64>> {
    let spec = MelnikovSpec::from_level(level);
    let (upper, numerator) = if level.level == 0 {
        (1.0, UniPolynomial::new(vec![spec.coeff_deltas[0], 0.0, spec.coeff_deltas[1]]))
    } else {
        (
            interval_ik(level.level)?,
            UniPolynomial::new(spec.coeff_deltas.iter().flat_map(|&a| [a, 0.0]).collect()),
        )
    };
    if numerator.is_zero() {
        return Ok(Vec::new());
    }
    let edge = 1e-9 * upper;
    Ok(real_roots(&numerator, edge, upper - edge, 1e-13)?
        .into_iter()
        .filter(|r| r.simple)
        .map(|r| r.value)
        .collect())
}

fn assemble(
    level: &HamiltonianLevel,
    seeds: Vec<Seed>,
    tol: &Tolerances,
    started: Instant,
) -> CountReport {
    let profile = SigmaProfile::new(level);
    let field = level.field();
    let results: Vec<(Seed, Result<CycleRecord>)> = seeds
        .par_iter()
        .map(|&s| (s, certify_seed(level, &profile, &field, s, tol)))
        .collect();
    let mut records = Vec::new();
    let mut unresolved = Vec::new();
    for (s, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => unresolved.push(format!("seed {}: {e}", s.ordinate)),
        }
    }
    records.sort_by(|a, b| a.solved_ordinate.total_cmp(&b.solved_ordinate));
    mark_duplicates(&mut records, tol.distinct);
    let found = records.iter().filter(|r| r.certified()).count() as u64;
    CountReport {
        level: level.level,
        expected: expected_cycles(level.level),
        found,
        field_degree: level.field().degree(),
        records,
        epsilon_used: level.epsilon,
        epsilon_vector_used: level.epsilon_vector.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        unresolved,
    }
}

/// The single cycle of the canonical level-0 field.
pub fn certify_level0(eps: f64) -> Result<CountReport> {
    certify_level0_with(eps, &PerturbationCoeffs::canonical_level0(), &Tolerances::default())
}

pub fn certify_level0_with(
    eps: f64,
    table: &PerturbationCoeffs,
    tol: &Tolerances,
) -> Result<CountReport> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Precondition(format!("epsilon {eps} outside (0, 1e-2]")));
    }
    let started = Instant::now();
    let level = build_level(0, eps, &[], std::slice::from_ref(table))?;
    let seeds = melnikov_seeds(&level)?
        .into_iter()
        .map(|y| Seed { ordinate: y, limit: y, family_level: 0, provenance: Provenance::MelnikovSeed })
        .collect();
    Ok(assemble(&level, seeds, tol, started))
}

/// Level `k` from the certified level `k-1`: two doubled seeds per parent
/// record plus the Melnikov seeds of the new perturbation.
pub fn certify_level_k(
    k: usize,
    eps: f64,
    epsilon_vector: &[f64],
    tables: &[PerturbationCoeffs],
    parent: &CountReport,
    tol: &Tolerances,
) -> Result<CountReport> {
    if k == 0 {
        return certify_level0_with(eps, &tables[0], tol);
    }
    if parent.level + 1 != k || !parent.passed() {
        return Err(Error::Precondition(format!(
            "level {k} needs a passing level-{} report",
            k - 1
        )));
    }
    if !(eps > 0.0) || epsilon_vector.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Precondition("perturbation parameters must be positive".into()));
    }
    let started = Instant::now();
    let level = build_level(k, eps, epsilon_vector, tables)?;
    let mut seeds = Vec::new();
    for r in parent.records.iter().filter(|r| r.certified()) {
        let [a, b] = crate::return_maps::doubled_seeds(r.solved_ordinate)?;
        let [la, lb] = crate::return_maps::doubled_seeds(r.limit_ordinate)?;
        for (ordinate, limit) in [(a, la), (b, lb)] {
            seeds.push(Seed {
                ordinate,
                limit,
                family_level: r.family_level,
                provenance: Provenance::DoubledFromParent,
            });
        }
    }
    for y in melnikov_seeds(&level)? {
        seeds.push(Seed { ordinate: y, limit: y, family_level: k, provenance: Provenance::MelnikovSeed });
    }
    Ok(assemble(&level, seeds, tol, started))
}

/// Reports for levels `0..=k` with the default coefficient tables.
pub fn certify_chain(
    k: usize,
    eps: f64,
    epsilon_vector: &[f64],
    tol: &Tolerances,
) -> Result<Vec<CountReport>> {
    let tables = default_tables(k)?;
    certify_chain_with(k, eps, epsilon_vector, &tables, tol)
}

pub fn certify_chain_with(
    k: usize,
    eps: f64,
    epsilon_vector: &[f64],
    tables: &[PerturbationCoeffs],
    tol: &Tolerances,
) -> Result<Vec<CountReport>> {
    if epsilon_vector.len() < k {
        return Err(Error::InvalidArgument(format!("level {k} needs {k} epsilon-vector entries")));
    }
    let mut reports = vec![certify_level0_with(eps, &tables[0], tol)?];
    for j in 1..=k {
        let parent = reports.last().expect("level 0 is present");
        if !parent.passed() {
            break;
        }
        let r = certify_level_k(j, eps, &epsilon_vector[..j], tables, parent, tol)?;
        reports.push(r);
    }
    Ok(reports)
}

/// One trial of the adaptive parameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationStep {
    /// `0` for `eps`, `j` for `eps_j`.
    pub parameter: usize,
    pub value: f64,
    pub found: u64,
    pub sweep_found: u64,
    pub expected: u64,
}

impl ValidationStep {
    pub fn passed(&self) -> bool {
        self.found == self.expected && self.sweep_found == self.expected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidatedParameters {
    pub epsilon: f64,
    pub epsilon_vector: Vec<f64>,
    pub history: Vec<ValidationStep>,
}

pub const VALIDATION_START: f64 = 1e-2;
pub const MAX_HALVINGS: usize = 200;
pub const SWEEP_PER_UNIT: usize = 2000;
pub const SWEEP_WINDOW: (f64, f64) = (-2.0, 2.0);

/// Adaptive halving of `eps`, then `eps_1, ..., eps_k` in turn: each starts
/// at `1e-2` and is halved until certification and the sweep both return
/// the expected count at two consecutive values; the smaller is kept.
pub fn validate_parameters(
    k: usize,
    tables: &[PerturbationCoeffs],
    tol: &Tolerances,
) -> Result<ValidatedParameters> {
    let mut history = Vec::new();
    let mut eps = 0.0;
    let mut evec: Vec<f64> = Vec::new();
    for j in 0..=k {
        let mut value = VALIDATION_START;
        let mut streak = 0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let (e, v) = if j == 0 {
                (value, Vec::new())
            } else {
                let mut v = evec.clone();
                v.push(value);
                (eps, v)
            };
            let step = validation_trial(j, e, &v, tables, tol)?;
            let ok = step.passed();
            history.push(ValidationStep { parameter: j, value, ..step });
            streak = if ok { streak + 1 } else { 0 };
            if streak == 2 {
                accepted = Some(value);
                break;
            }
            value *= 0.5;
        }
        let value = accepted.ok_or_else(|| {
            Error::Precondition(format!("no stable value found for parameter {j} after {MAX_HALVINGS} halvings"))
        })?;
        if j == 0 {
            eps = value;
        } else {
            evec.push(value);
        }
    }
    Ok(ValidatedParameters { epsilon: eps, epsilon_vector: evec, history })
}

fn validation_trial(
    j: usize,
    eps: f64,
    evec: &[f64],
    tables: &[PerturbationCoeffs],
    tol: &Tolerances,
) -> Result<ValidationStep> {
    // a parameter too large for the construction is a failed trial
    let found = match certify_chain_with(j, eps, evec, tables, tol) {
        Ok(chain) => chain.last().filter(|t| t.level == j && t.passed()).map_or(0, |t| t.found),
        Err(Error::Precondition(_)) => 0,
        Err(e) => return Err(e),
    };
    let sweep_found = if found == expected_cycles(j) {
        let level = build_level(j, eps, evec, tables)?;
        sweep_count_level(&level, SWEEP_WINDOW, SWEEP_PER_UNIT, tol)?.found
    } else {
        0
    };
    Ok(ValidationStep { parameter: j, value: 0.0, found, sweep_found, expected: expected_cycles(j) })
}

/// Per-record outcome of the `(A_k)` checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HypothesisCheck {
    pub extrapolated_limit: f64,
    /// `y_i != 0` and `y_i != y_j`.
    pub a_prime: bool,
    /// `d delta / d eps -> 0` and `d^2 delta / dy d eps != 0` at the limit.
    pub a_double_prime: bool,
    pub d_eps: f64,
    pub d_y_eps: f64,
}

/// First-order Richardson limit `eps -> 0` from a geometric schedule.
///
/// Each consecutive pair gives `(r y(e/r) - y(e)) / (r - 1)`; the estimates
/// must settle, otherwise the extrapolation is rejected.
pub fn richardson_limit(schedule: &[f64], values: &[f64]) -> Option<f64> {
    if schedule.len() < 2 || schedule.len() != values.len() {
        return None;
    }
    let estimates: Vec<f64> = (0..schedule.len() - 1)
        .map(|i| {
            let r = schedule[i] / schedule[i + 1];
            (r * values[i + 1] - values[i]) / (r - 1.0)
        })
        .collect();
    let last = *estimates.last()?;
    if estimates.len() >= 2 {
        let n = values.len();
        let raw = (values[n - 1] - values[n - 2]).abs();
        let drift = (estimates[estimates.len() - 1] - estimates[estimates.len() - 2]).abs();
        if drift > raw.max(1e-14) {
            return None;
        }
    }
    Some(last)
}

/// `(A_k')` and `(A_k'')` for every record, given certified reports of the
/// same level at each `eps` of `schedule` (records matched by order).
pub fn check_hypothesis_ak(
    reports: &[CountReport],
    schedule: &[f64],
    tables: &[PerturbationCoeffs],
) -> Result<Vec<HypothesisCheck>> {
    if reports.len() != schedule.len() || reports.is_empty() {
        return Err(Error::InvalidArgument("one report per schedule entry is required".into()));
    }
    let n = reports[0].records.len();
    if reports.iter().any(|r| r.records.len() != n) {
        return Err(Error::Precondition("record counts differ across the schedule".into()));
    }
    let first = &reports[0];
    let probe = build_level(first.level, 0.0, &first.epsilon_vector_used, tables)?;
    let profile = SigmaProfile::new(&probe);
    let mut limits = Vec::with_capacity(n);
    for i in 0..n {
        let values: Vec<f64> = reports.iter().map(|r| r.records[i].solved_ordinate).collect();
        let limit = richardson_limit(schedule, &values)
            .ok_or(Error::ExtrapolationUnstable { index: i })?;
        limits.push(limit);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let y = limits[i];
        let born = first.records[i].family_level;
        let distinct = limits
            .iter()
            .enumerate()
            .all(|(j, &o)| j == i || (o - y).abs() > 1e-6);
        let a_prime = y.abs() > 1e-6 && distinct;
        let (d_eps, d_y_eps) = epsilon_derivatives(&profile, y, born)?;
        let w = probe.level_weights()[born];
        let a_double_prime = d_y_eps.abs() > 1e-6 * w && d_eps.abs() <= 1e-4 * d_y_eps.abs();
        out.push(HypothesisCheck { extrapolated_limit: y, a_prime, a_double_prime, d_eps, d_y_eps });
    }
    Ok(out)
}

/// `d delta / d eps` and `d^2 delta / dy d eps` at `eps = 0` by finite
/// differences (delta vanishes identically at `eps = 0`).
pub fn epsilon_derivatives(profile: &SigmaProfile, y: f64, born: usize) -> Result<(f64, f64)> {
    let he = 1e-9;
    let hy = 1e-5;
    let d_eps = profile.displacement(y, he, born)? / he;
    let up = profile.displacement(y + hy, he, born)? / he;
    let down = profile.displacement(y - hy, he, born)? / he;
    Ok((d_eps, (up - down) / (2.0 * hy)))
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy)]
struct SweepSample {
    y: f64,
    delta: f64,
    family: Option<usize>,
}

/// Independent counter: sign changes of the displacement on a uniform grid
/// of the leftward crossing set `{P+(0,y) < 0, P-(0,y) < 0}`, each confirmed
/// by bisection.
///
/// Returns are taken from integration; when the level is Hamiltonian the
/// integrated return picks the family and the algebraic solver polishes the
/// value, which keeps tiny displacements resolvable.
pub fn sweep_count_level(
    level: &HamiltonianLevel,
    window: (f64, f64),
    per_unit: usize,
    tol: &Tolerances,
) -> Result<CountReport> {
    let started = Instant::now();
    let profile = SigmaProfile::new(level);
    let field = level.field();
    let eps = level.epsilon;
    let n = ((window.1 - window.0) * per_unit as f64).ceil() as usize + 1;
    let samples: Vec<Option<SweepSample>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = window.0 + (window.1 - window.0) * i as f64 / (n - 1) as f64;
            sweep_sample(&profile, &field, y, eps, tol)
        })
        .collect();
    let mut records = Vec::new();
    let mut unresolved = Vec::new();
    for (a, b) in brackets(&samples) {
        let Some(born) = a.family else { continue };
        match bisect_family(&profile, a, b, eps, born) {
            Some(y) => {
                let scale = family_scale(level, born);
                let ret = profile.half_return(Side::Plus, y, eps, born);
                let margin = profile.displacement_slope(y, eps, born).map(f64::abs).unwrap_or(0.0);
                let residual = profile.displacement(y, eps, born).map(f64::abs).unwrap_or(f64::INFINITY);
                let y1 = ret.map(|r| r.y1).unwrap_or(f64::NAN);
                let mut violations = Vec::new();
                if margin <= tol.margin * scale {
                    violations.push(format!("margin {margin:e} below {:e}", tol.margin * scale));
                }
                records.push(CycleRecord {
                    level: level.level,
                    epsilon: eps,
                    epsilon_vector: level.epsilon_vector.clone(),
                    upper_ordinate: y.max(y1),
                    lower_ordinate: y.min(y1),
                    limit_ordinate: f64::NAN,
                    solved_ordinate: y,
                    residual,
                    hyperbolicity_margin: margin,
                    scale,
                    family_level: born,
                    surrounds_origin: born == level.level,
                    provenance: Provenance::Sweep,
                    violations,
                });
            }
            None => unresolved.push(Error::UnresolvedSignChange { y: a.y }.to_string()),
        }
    }
    let found = records.iter().filter(|r| r.certified()).count() as u64;
    Ok(CountReport {
        level: level.level,
        expected: expected_cycles(level.level),
        found,
        field_degree: field.degree(),
        records,
        epsilon_used: eps,
        epsilon_vector_used: level.epsilon_vector.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        unresolved,
    })
}

/// Opposite-sign neighbours of one family. A sample that is exactly zero
/// brackets with its two neighbours; a run of zeros (as at `eps = 0`) is
/// not an isolated crossing and is skipped.
fn brackets(samples: &[Option<SweepSample>]) -> Vec<(SweepSample, SweepSample)> {
    let opposite = |a: &SweepSample, b: &SweepSample| {
        a.family.is_some()
            && a.family == b.family
            && a.delta != 0.0
            && b.delta != 0.0
            && a.delta.signum() != b.delta.signum()
    };
    let mut out = Vec::new();
    for i in 0..samples.len().saturating_sub(1) {
        let (Some(a), Some(b)) = (samples[i], samples[i + 1]) else { continue };
        if opposite(&a, &b) {
            out.push((a, b));
        } else if b.delta == 0.0 && i + 2 < samples.len() {
            if let Some(c) = samples[i + 2] {
                if opposite(&a, &c) && b.family == a.family {
                    out.push((a, c));
                }
            }
        }
    }
    out
}

fn sweep_sample(
    profile: &SigmaProfile,
    field: &PiecewiseField,
    y: f64,
    eps: f64,
    tol: &Tolerances,
) -> Option<SweepSample> {
    if !(field.lie_first(Side::Plus, y) < 0.0 && field.lie_first(Side::Minus, y) < 0.0) {
        return None;
    }
    let rp = field.half_return(Side::Plus, y, -1.0, &tol.integrator).ok()?;
    let rm = field.half_return(Side::Minus, y, 1.0, &tol.integrator).ok()?;
    let fp = profile.classify_family(y, rp);
    let fm = profile.classify_family(y, rm);
    if fp.is_some() && fp == fm {
        let born = fp?;
        // the algebraic branch must be the geometric one
        let ap = profile.half_return(Side::Plus, y, eps, born).ok()?;
        let am = profile.half_return(Side::Minus, y, eps, born).ok()?;
        if (ap.y1 - rp).abs() <= 1e3 * tol.geometric && (am.y1 - rm).abs() <= 1e3 * tol.geometric {
            let delta = profile.displacement(y, eps, born).ok()?;
            return Some(SweepSample { y, delta, family: fp });
        }
    }
    Some(SweepSample { y, delta: rp - rm, family: None })
}

fn bisect_family(
    profile: &SigmaProfile,
    a: SweepSample,
    b: SweepSample,
    eps: f64,
    born: usize,
) -> Option<f64> {
    let (mut lo, mut hi) = (a.y, b.y);
    let mut flo = a.delta;
    let start = a.delta.abs().max(b.delta.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = profile.displacement(mid, eps, born).ok()?;
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    // a jump would leave a residual comparable to the bracketing values
    let r = profile.displacement(y, eps, born).ok()?.abs();
    (r <= 1e-6 * start).then_some(y)
}

/// A crossing cycle located from integrated returns only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NumericCycle {
    pub upper_ordinate: f64,
    pub lower_ordinate: f64,
    /// Leftward crossing at which the displacement vanishes.
    pub solved_ordinate: f64,
    pub residual: f64,
    pub hyperbolicity_margin: f64,
}

/// `R+(y) - R-(y)` at a leftward crossing `y` (both pieces push into
/// `x < 0`): the upper piece backward, the lower piece forward.
pub fn leftward_displacement(field: &PiecewiseField, y: f64, opts: &IntegratorOptions) -> Option<f64> {
    if !(field.lie_first(Side::Plus, y) < 0.0 && field.lie_first(Side::Minus, y) < 0.0) {
        return None;
    }
    let rp = field.half_return(Side::Plus, y, -1.0, opts).ok()?;
    let rm = field.half_return(Side::Minus, y, 1.0, opts).ok()?;
    Some(rp - rm)
}

/// Numeric-only sweep for an arbitrary field: sign changes of
/// [`leftward_displacement`] on `grid` points of `window`, refined by
/// bisection. Every crossing cycle meets the line once leftward, so each
/// is counted once.
pub fn sweep_count_field(
    field: &PiecewiseField,
    window: (f64, f64),
    grid: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<NumericCycle>> {
    if grid < 2 || !(window.0 < window.1) {
        return Err(Error::InvalidArgument("sweep needs a nonempty window and two grid points".into()));
    }
    let delta = |y: f64| leftward_displacement(field, y, opts);
    let ys: Vec<f64> = (0..grid)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / (grid - 1) as f64)
        .collect();
    let values: Vec<Option<f64>> = ys.par_iter().map(|&y| delta(y)).collect();
    let brackets: Vec<(f64, f64, f64, f64)> = (0..grid - 1)
        .filter_map(|i| {
            let (da, db) = (values[i]?, values[i + 1]?);
            (da != 0.0 && db != 0.0 && da.signum() != db.signum()).then_some((ys[i], ys[i + 1], da, db))
        })
        .collect();
    brackets
        .par_iter()
        .map(|&(a, b, da, db)| {
            let (mut lo, mut hi, mut flo) = (a, b, da);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = delta(mid).ok_or(Error::UnresolvedSignChange { y: mid })?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let y = 0.5 * (lo + hi);
            let r = delta(y).ok_or(Error::UnresolvedSignChange { y })?;
            // a jump across the bracket leaves a residual of bracket size
            if r.abs() > 1e-3 * da.abs().max(db.abs()) {
                return Err(Error::UnresolvedSignChange { y });
            }
            let h = (0.25 * (b - a)).clamp(1e-7, 1e-4);
            let margin = match (delta(y + h), delta(y - h)) {
                (Some(u), Some(d)) => ((u - d) / (2.0 * h)).abs(),
                _ => 0.0,
            };
            let lower = field.half_return(Side::Minus, y, 1.0, opts)?;
            Ok(NumericCycle {
                upper_ordinate: y.max(lower),
                lower_ordinate: y.min(lower),
                solved_ordinate: y,
                residual: r.abs(),
                hyperbolicity_margin: margin,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level0_single_cycle() {
        for eps in [1e-2, 1e-3, 1e-4] {
            let r = certify_level0(eps).unwrap();
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.found, 1);
            let rec = &r.records[0];
            assert!((rec.solved_ordinate - 0.5).abs() <= 5.0 * eps);
            assert!(rec.residual <= 1e-10 * eps);
            assert!(rec.upper_ordinate < 2.0 && rec.lower_ordinate > -2.0);
        }
        assert!(matches!(certify_level0(0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn richardson_recovers_linear_limit() {
        let s = [1e-2, 1e-3, 1e-4];
        let v: Vec<f64> = s.iter().map(|e| 0.5 + 0.3 * e + 2.0 * e * e).collect();
        let l = richardson_limit(&s, &v).unwrap();
        assert!((l - 0.5).abs() < 1e-6);
    }

    #[test]
    fn level0_hypothesis() {
        let s = [1e-2, 1e-3, 1e-4];
        let reports: Vec<_> = s.iter().map(|&e| certify_level0(e).unwrap()).collect();
        let tables = vec![PerturbationCoeffs::canonical_level0()];
        let checks = check_hypothesis_ak(&reports, &s, &tables).unwrap();
        assert!(checks[0].a_prime && checks[0].a_double_prime, "{checks:?}");
        assert!(checks[0].d_eps.abs() < 1e-4);
        assert!((checks[0].d_y_eps - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_or_duplicate_limits_fail_a_prime() {
        let s = [1e-2, 1e-3, 1e-4];
        let mut reports: Vec<_> = s.iter().map(|&e| certify_level0(e).unwrap()).collect();
        let tables = vec![PerturbationCoeffs::canonical_level0()];
        for r in &mut reports {
            let dup = r.records[0].clone();
            r.records.push(dup);
        }
        let checks = check_hypothesis_ak(&reports, &s, &tables).unwrap();
        assert!(checks.iter().all(|c| !c.a_prime));
        for r in &mut reports {
            r.records.truncate(1);
            r.records[0].solved_ordinate = 0.0;
        }
        let checks = check_hypothesis_ak(&reports, &s, &tables).unwrap();
        assert!(!checks[0].a_prime);
    }

    #[test]
    fn level0_sweep() {
        let level = build_level(0, 1e-3, &[], &default_tables(0).unwrap()).unwrap();
        let r = sweep_count_level(&level, (0.0, 1.0), 2000, &Tolerances::default()).unwrap();
        assert_eq!(r.found, 1, "{r:?}");
        let flat = build_level(0, 0.0, &[], &default_tables(0).unwrap()).unwrap();
        let r = sweep_count_level(&flat, (0.0, 1.0), 2000, &Tolerances::default()).unwrap();
        assert_eq!(r.records.len(), 0);
    }

    #[test]
    fn summary_table() {
        let r = certify_level0(1e-3).unwrap();
        let csv = summary_csv(&[r]);
        assert!(csv.starts_with("k,n_k,c_k,found,max_residual,min_margin,wall_clock_s\n0,2,1,1,"));
    }
}
