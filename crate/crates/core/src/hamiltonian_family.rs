//! The recursive family of piecewise Hamiltonians built by pulling back
//! through `Phi(x, y) = (x, y^2 - 2)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PiecewiseField;
use crate::poly::{phi_iterate, BiPolynomial, UniPolynomial};

/// Deepest level the assembler accepts.
pub const MAX_LEVEL: usize = 4;

/// Deepest level certified without an explicit opt-in.
pub const DEFAULT_MAX_LEVEL: usize = 2;

/// `d_k = 3 * 2^k`.
pub fn hamiltonian_degree(k: usize) -> usize {
    3 << k
}

/// `n_k = d_k - 1`.
pub fn field_degree(k: usize) -> usize {
    hamiltonian_degree(k) - 1
}

/// `c_k = 3 k 2^(k-1) + 1`, with `c_0 = 1`.
pub fn expected_cycles(k: usize) -> u64 {
    if k == 0 {
        1
    } else {
        3 * k as u64 * (1u64 << (k - 1)) + 1
    }
}

/// Counts with one pseudo-Hopf cycle added per level, `c_0 = 2`,
/// `c_{k+1} = 2 c_k + d_k`; solved, `3 k 2^(k-1) + 2^(k+1)`.
pub fn pseudo_hopf_cycles(k: usize) -> u64 {
    if k == 0 {
        2
    } else {
        3 * k as u64 * (1u64 << (k - 1)) + (1u64 << (k + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelInfo {
    pub level: usize,
    pub hamiltonian_degree: usize,
    pub field_degree: usize,
    pub expected_cycles: u64,
}

impl LevelInfo {
    pub fn new(k: usize) -> Self {
        LevelInfo {
            level: k,
            hamiltonian_degree: hamiltonian_degree(k),
            field_degree: field_degree(k),
            expected_cycles: expected_cycles(k),
        }
    }
}

/// Coefficients `a±_{k,j}`, `j = 0..=d_k`, of the level-`k` perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PerturbationCoeffs {
    #[serde(rename = "k")]
    pub level: usize,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
}

impl PerturbationCoeffs {
    pub fn new(level: usize, a_plus: Vec<f64>, a_minus: Vec<f64>) -> Result<Self> {
        let c = PerturbationCoeffs { level, a_plus, a_minus };
        c.validate()?;
        Ok(c)
    }

    pub fn zero(level: usize) -> Self {
        let n = hamiltonian_degree(level) + 1;
        PerturbationCoeffs { level, a_plus: vec![0.0; n], a_minus: vec![0.0; n] }
    }

    /// `a+_{0,1} = -1/8`, `a+_{0,3} = 1/2`, everything else zero; the
    /// resulting `M_0(y) = y^2 - 1/4` has its only positive zero at `1/2`.
    pub fn canonical_level0() -> Self {
        let mut c = Self::zero(0);
        c.a_plus[1] = -0.125;
        c.a_plus[3] = 0.5;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let n = hamiltonian_degree(self.level) + 1;
        if self.a_plus.len() != n || self.a_minus.len() != n {
            return Err(Error::InvalidArgument(format!(
                "level {} needs {} coefficients per side, got {} and {}",
                self.level,
                n,
                self.a_plus.len(),
                self.a_minus.len()
            )));
        }
        if self.a_plus.iter().chain(&self.a_minus).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite perturbation coefficient".into()));
        }
        Ok(())
    }

    pub fn poly_plus(&self) -> UniPolynomial {
        UniPolynomial::new(self.a_plus.clone())
    }

    pub fn poly_minus(&self) -> UniPolynomial {
        UniPolynomial::new(self.a_minus.clone())
    }

    /// `A_j = a+_{k,2j-1} - a-_{k,2j-1}` for `j = 1..=d_k / 2`.
    pub fn odd_deltas(&self) -> Vec<f64> {
        (1..self.a_plus.len())
            .step_by(2)
            .map(|i| self.a_plus[i] - self.a_minus[i])
            .collect()
    }
}

/// The level-`k` construction: `H_k±` together with everything used to
/// build it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HamiltonianLevel {
    pub level: usize,
    pub epsilon: f64,
    pub epsilon_vector: Vec<f64>,
    pub coeff_tables: Vec<PerturbationCoeffs>,
    pub h_plus: BiPolynomial,
    pub h_minus: BiPolynomial,
}

fn unperturbed(sign: f64) -> BiPolynomial {
    // ((sign x - 1)^2 - y^2) / 2
    BiPolynomial::new(vec![vec![0.5, 0.0, -0.5], vec![-sign], vec![0.5]])
}

pub fn build_h0(coeffs: &PerturbationCoeffs, epsilon: f64) -> Result<HamiltonianLevel> {
    build_level(0, epsilon, &[], std::slice::from_ref(coeffs))
}

pub fn build_level(
    k: usize,
    epsilon: f64,
    epsilon_vector: &[f64],
    tables: &[PerturbationCoeffs],
) -> Result<HamiltonianLevel> {
    if k > MAX_LEVEL {
        return Err(Error::DegreeOverflow { k, max: MAX_LEVEL });
    }
    if !epsilon.is_finite() || epsilon_vector.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("non-finite perturbation parameter".into()));
    }
    if epsilon_vector.len() != k {
        return Err(Error::InvalidArgument(format!(
            "level {k} needs {k} entries in the epsilon vector, got {}",
            epsilon_vector.len()
        )));
    }
    if tables.len() < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "level {k} needs coefficient tables for levels 0..={k}, got {}",
            tables.len()
        )));
    }
    for (i, t) in tables.iter().take(k + 1).enumerate() {
        if t.level != i {
            return Err(Error::InvalidArgument(format!(
                "coefficient table {i} is labelled level {}",
                t.level
            )));
        }
        t.validate()?;
    }
    let mut h_plus = &unperturbed(1.0) + &BiPolynomial::from_y(&tables[0].poly_plus()).scaled(epsilon);
    let mut h_minus =
        &unperturbed(-1.0) + &BiPolynomial::from_y(&tables[0].poly_minus()).scaled(epsilon);
    for i in 1..=k {
        let c = epsilon * epsilon_vector[i - 1];
        h_plus = &h_plus.pullback_phi() + &BiPolynomial::from_y(&tables[i].poly_plus()).scaled(c);
        h_minus =
            &h_minus.pullback_phi() + &BiPolynomial::from_y(&tables[i].poly_minus()).scaled(c);
    }
    let level = HamiltonianLevel {
        level: k,
        epsilon,
        epsilon_vector: epsilon_vector.to_vec(),
        coeff_tables: tables[..=k].to_vec(),
        h_plus,
        h_minus,
    };
    level.check_boundary_identity(1e-10)?;
    Ok(level)
}

impl HamiltonianLevel {
    pub fn info(&self) -> LevelInfo {
        LevelInfo::new(self.level)
    }

    pub fn field(&self) -> PiecewiseField {
        PiecewiseField::from_hamiltonians(&self.h_plus, &self.h_minus)
    }

    pub fn hamiltonian(&self, plus: bool) -> &BiPolynomial {
        if plus {
            &self.h_plus
        } else {
            &self.h_minus
        }
    }

    /// `P_i±` for `i = 0..=k`.
    pub fn perturbations(&self, plus: bool) -> Vec<UniPolynomial> {
        self.coeff_tables
            .iter()
            .map(|t| if plus { t.poly_plus() } else { t.poly_minus() })
            .collect()
    }

    /// `(1, eps_1, ..., eps_k)`.
    pub fn level_weights(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.epsilon_vector.iter().copied()).collect()
    }

    /// `H±(0, phi^k(y)) + eps sum_i eps_i P_i±(phi^(k-i)(y))`, evaluated
    /// without expanding.
    pub fn boundary_value(&self, plus: bool, y: f64) -> f64 {
        let k = self.level;
        let top = phi_iterate(k, y);
        let pert: f64 = self
            .perturbations(plus)
            .iter()
            .zip(self.level_weights())
            .enumerate()
            .map(|(i, (p, w))| w * p.eval(phi_iterate(k - i, y)))
            .sum();
        0.5 * (1.0 - top * top) + self.epsilon * pert
    }

    pub fn check_boundary_identity(&self, tol: f64) -> Result<()> {
        for (plus, h) in [(true, &self.h_plus), (false, &self.h_minus)] {
            let restricted = h.restrict_x0();
            for i in 0..=100 {
                let y = -1.99 + 3.98 * i as f64 / 100.0;
                let direct = self.boundary_value(plus, y);
                let expanded = restricted.eval(y);
                if (direct - expanded).abs() > tol * direct.abs().max(1.0) {
                    return Err(Error::Precondition(format!(
                        "boundary identity fails at y = {y}: {expanded} vs {direct}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same tables and `E_k`, different `eps`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<HamiltonianLevel> {
        build_level(self.level, epsilon, &self.epsilon_vector, &self.coeff_tables)
    }
}

/// Right endpoint of `I_k`: `1` for `k = 1`, else `sqrt(2 - sqrt(xi^(k-2)(3)))`
/// with `xi(y) = 2 + sqrt(y)`.
pub fn interval_ik(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("I_k is defined for k >= 1".into()));
    }
    if k == 1 {
        return Ok(1.0);
    }
    let xi = (0..k - 2).fold(3.0f64, |acc, _| 2.0 + acc.sqrt());
    let radicand = 2.0 - xi.sqrt();
    if radicand <= 0.0 {
        return Err(Error::Domain(format!("negative radicand {radicand} for I_{k}")));
    }
    Ok(radicand.sqrt())
}

/// True iff `|phi^i(y)| > tol` for every `i = 1..=k`.
pub fn phi_iterate_nonvanishing(k: usize, y: f64) -> bool {
    const TOL: f64 = 1e-12;
    let mut t = y;
    for _ in 0..k {
        t = t * t - 2.0;
        if t.abs() <= TOL {
            return false;
        }
    }
    true
}

/// `d_k - 1` targets spread uniformly over `Int(I_{k+1})` shrunk by a 10%
/// margin at both ends.
pub fn default_melnikov_targets(k: usize) -> Result<Vec<f64>> {
    let upper = interval_ik(k + 1)?;
    let n = hamiltonian_degree(k) - 1;
    let (lo, hi) = (0.1 * upper, 0.9 * upper);
    Ok((0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect())
}

/// Level-`(k+1)` coefficients whose Melnikov numerator
/// `sum_j A_j y^(2j-2)` is proportional to `prod_i (y^2 - z_i^2)`.
///
/// The numerator is scaled so that its smallest slope at a target is one,
/// which keeps every zero equally transversal however tightly they pack. Odd coefficients go to the upper piece, the lower piece
/// and all even coefficients stay zero.
pub fn select_melnikov_coeffs(k: usize, targets: &[f64]) -> Result<PerturbationCoeffs> {
    let upper = interval_ik(k + 1)?;
    let needed = hamiltonian_degree(k) - 1;
    if targets.len() != needed {
        return Err(Error::InvalidArgument(format!(
            "level {} needs {needed} Melnikov targets, got {}",
            k + 1,
            targets.len()
        )));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        if (w[1] - w[0]).abs() <= 1e-12 {
            return Err(Error::InvalidArgument(format!("duplicate Melnikov target {}", w[0])));
        }
    }
    if let Some(z) = sorted.iter().find(|&&z| !(z > 0.0 && z < upper)) {
        return Err(Error::InvalidArgument(format!(
            "Melnikov target {z} outside Int(I_{}) = (0, {upper})",
            k + 1
        )));
    }
    let numerator = sorted.iter().fold(UniPolynomial::constant(1.0), |acc, &z| {
        &acc * &UniPolynomial::new(vec![-z * z, 0.0, 1.0])
    });
    let slope = numerator.derivative();
    let norm = sorted.iter().map(|&z| slope.eval(z).abs()).fold(f64::INFINITY, f64::min);
    let mut coeffs = PerturbationCoeffs::zero(k + 1);
    for (j, c) in numerator.coeffs().iter().enumerate().step_by(2) {
        coeffs.a_plus[j + 1] = c / norm;
    }
    Ok(coeffs)
}

/// Canonical level-0 table followed by default Melnikov tables up to `k`.
pub fn default_tables(k: usize) -> Result<Vec<PerturbationCoeffs>> {
    let mut tables = vec![PerturbationCoeffs::canonical_level0()];
    for level in 1..=k {
        tables.push(select_melnikov_coeffs(level - 1, &default_melnikov_targets(level - 1)?)?);
    }
    Ok(tables)
}

/// On-disk coefficient configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FamilyConfig {
    pub levels: Vec<PerturbationCoeffs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_vector: Option<Vec<f64>>,
}

impl FamilyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: FamilyConfig = serde_json::from_str(text)?;
        cfg.levels.sort_by_key(|t| t.level);
        for t in &cfg.levels {
            t.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
