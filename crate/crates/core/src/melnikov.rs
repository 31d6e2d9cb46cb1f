//! First-order Melnikov functions of the recursive family and a check of
//! them against the reduced displacement `delta / eps`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian_family::HamiltonianLevel;
use crate::poly::phi_iterate;
use crate::return_maps::SigmaProfile;

/// Odd-coefficient differences of one level.
///
/// Level 0 keeps `(A_{0,1}, A_{0,3})`; level `k+1` keeps `A_j`,
/// `j = 1..=d_k`, and the weight `eps_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MelnikovSpec {
    pub level: usize,
    pub coeff_deltas: Vec<f64>,
    pub epsilon_next: f64,
}

impl MelnikovSpec {
    /// The spec of the top perturbation of `level`.
    pub fn from_level(level: &HamiltonianLevel) -> Self {
        let k = level.level;
        let deltas = level.coeff_tables[k].odd_deltas();
        MelnikovSpec {
            level: k,
            coeff_deltas: if k == 0 { deltas[..2].to_vec() } else { deltas },
            epsilon_next: if k == 0 { 1.0 } else { level.epsilon_vector[k - 1] },
        }
    }
}

/// `M_0(y) = 2 (A_{0,1} + A_{0,3} y^2)`.
pub fn melnikov_m0(y: f64, spec: &MelnikovSpec) -> Result<f64> {
    if spec.level != 0 || spec.coeff_deltas.len() < 2 {
        return Err(Error::InvalidArgument("M_0 needs a level-0 spec with two deltas".into()));
    }
    Ok(2.0 * (spec.coeff_deltas[0] + spec.coeff_deltas[1] * y * y))
}

/// `sum_j A_j y^(2j-2)`.
pub fn melnikov_numerator(y: f64, spec: &MelnikovSpec) -> f64 {
    let y2 = y * y;
    spec.coeff_deltas.iter().rev().fold(0.0, |acc, &a| acc * y2 + a)
}

/// `M_{k+1}(y) = eps_{k+1} sum_j A_j y^(2j-2) / (2^k prod_{i=1}^{k+1} phi^i(y))`.
pub fn melnikov_mk1(y: f64, spec: &MelnikovSpec, k: usize) -> Result<f64> {
    if spec.level != k + 1 {
        return Err(Error::InvalidArgument(format!(
            "spec is for level {}, not {}",
            spec.level,
            k + 1
        )));
    }
    let mut denom = (1u64 << k) as f64;
    for i in 1..=k + 1 {
        let p = phi_iterate(i, y);
        if p.abs() <= 1e-12 {
            return Err(Error::Pole { index: i, y });
        }
        denom *= p;
    }
    Ok(spec.epsilon_next * melnikov_numerator(y, spec) / denom)
}

/// Dispatches on the spec's level.
pub fn melnikov(y: f64, spec: &MelnikovSpec) -> Result<f64> {
    if spec.level == 0 {
        melnikov_m0(y, spec)
    } else {
        melnikov_mk1(y, spec, spec.level - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OraclePoint {
    pub y: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// `|delta/eps - M|` per entry of the schedule.
    pub errors: Vec<f64>,
    /// `errors[i+1] / errors[i]`.
    pub decay_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleReport {
    pub level: usize,
    pub epsilon_schedule: Vec<f64>,
    pub points: Vec<OraclePoint>,
    /// Maximum error over the grid, per schedule entry.
    pub max_errors: Vec<f64>,
    /// `max_errors[i] / max_errors[i+1]`.
    pub max_error_reduction: Vec<f64>,
    /// Grid points where a half-return failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

impl OracleReport {
    /// Every consecutive reduction of the grid maximum lies in `[lo, hi]`.
    pub fn max_reduction_within(&self, lo: f64, hi: f64) -> bool {
        !self.max_error_reduction.is_empty()
            && self.failures.is_empty()
            && self.max_error_reduction.iter().all(|r| (lo..=hi).contains(r))
    }

    /// Every point decays at a rate within `[0.3, 3]` times the schedule ratio.
    pub fn pointwise_linear(&self) -> bool {
        let rates: Vec<f64> =
            self.epsilon_schedule.windows(2).map(|w| w[1] / w[0]).collect();
        self.points.iter().all(|p| {
            p.decay_ratios.iter().zip(&rates).all(|(d, r)| *d >= 0.3 * r && *d <= 3.0 * r)
        })
    }
}

/// Compares `delta(y, eps) / eps` on the origin family of `level` with the
/// closed-form Melnikov function along a decreasing `eps` schedule.
pub fn melnikov_oracle_check(
    level: &HamiltonianLevel,
    spec: &MelnikovSpec,
    grid: &[f64],
    schedule: &[f64],
) -> Result<OracleReport> {
    if schedule.windows(2).any(|w| w[1] >= w[0]) || schedule.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidArgument("epsilon schedule must be positive and decreasing".into()));
    }
    let profile = SigmaProfile::new(level);
    let results: Vec<std::result::Result<OraclePoint, (f64, String)>> = grid
        .par_iter()
        .map(|&y| {
            let m = melnikov(y, spec).map_err(|e| (y, e.to_string()))?;
            let errors = schedule
                .iter()
                .map(|&eps| {
                    profile
                        .displacement(y, eps, level.level)
                        .map(|d| (d / eps - m).abs())
                        .map_err(|e| (y, e.to_string()))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let decay_ratios = errors.windows(2).map(|w| w[1] / w[0]).collect();
            Ok(OraclePoint { y, m, errors, decay_ratios })
        })
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(f) => failures.push(f),
        }
    }
    let max_errors: Vec<f64> = (0..schedule.len())
        .map(|i| points.iter().map(|p| p.errors[i]).fold(0.0, f64::max))
        .collect();
    let max_error_reduction = max_errors.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(OracleReport {
        level: level.level,
        epsilon_schedule: schedule.to_vec(),
        points,
        max_errors,
        max_error_reduction,
        failures,
    })
}

/// `n` points spread over the interior of the origin window of `level`.
pub fn oracle_grid(level: usize, n: usize) -> Result<Vec<f64>> {
    let upper = if level == 0 { 1.0 } else { crate::hamiltonian_family::interval_ik(level)? };
    Ok((0..n).map(|i| upper * (i as f64 + 0.5) / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian_family::{build_h0, build_level, default_tables, select_melnikov_coeffs, PerturbationCoeffs};
    use crate::poly::{real_roots, UniPolynomial};

    fn canonical() -> MelnikovSpec {
        MelnikovSpec::from_level(&build_h0(&PerturbationCoeffs::canonical_level0(), 1e-3).unwrap())
    }

    #[test]
    fn m0_examples() {
        let s = canonical();
        assert_eq!(s.coeff_deltas, vec![-0.125, 0.5]);
        assert_eq!(melnikov_m0(0.5, &s).unwrap(), 0.0);
        assert!((melnikov_m0(0.8, &s).unwrap() - 0.39).abs() < 1e-15);
        // M_0'(1/2) = 4 A_{0,3} y = 1
        let h = 1e-6;
        let d = (melnikov_m0(0.5 + h, &s).unwrap() - melnikov_m0(0.5 - h, &s).unwrap()) / (2.0 * h);
        assert!((d - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mk1_denominator_and_zeros() {
        let table = select_melnikov_coeffs(0, &[0.25, 0.75]).unwrap();
        let spec = MelnikovSpec { level: 1, coeff_deltas: table.odd_deltas(), epsilon_next: 1.0 };
        // 2^0 phi(0.5) = -1.75
        let n = melnikov_numerator(0.5, &spec);
        assert!((melnikov_mk1(0.5, &spec, 0).unwrap() - n / -1.75).abs() < 1e-15);
        let numerator = UniPolynomial::new(
            spec.coeff_deltas.iter().flat_map(|&a| [a, 0.0]).collect::<Vec<_>>(),
        );
        let roots = real_roots(&numerator, 1e-9, 1.0 - 1e-9, 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].value - 0.25).abs() < 1e-10 && (roots[1].value - 0.75).abs() < 1e-10);
        for y in [0.1, 0.4, 0.9] {
            assert_eq!(melnikov_mk1(y, &spec, 0).unwrap(), melnikov_mk1(-y, &spec, 0).unwrap());
        }
        assert!(matches!(melnikov_mk1(2f64.sqrt(), &spec, 0), Err(Error::Pole { index: 1, .. })));
    }

    #[test]
    fn common_offset_leaves_m_unchanged() {
        let mut t = select_melnikov_coeffs(0, &[0.25, 0.75]).unwrap();
        let a = MelnikovSpec { level: 1, coeff_deltas: t.odd_deltas(), epsilon_next: 1.0 };
        for (p, m) in t.a_plus.iter_mut().zip(t.a_minus.iter_mut()) {
            *p += 0.3;
            *m += 0.3;
        }
        let b = MelnikovSpec { level: 1, coeff_deltas: t.odd_deltas(), epsilon_next: 1.0 };
        for y in [0.2, 0.6] {
            let (ma, mb) = (melnikov_mk1(y, &a, 0).unwrap(), melnikov_mk1(y, &b, 0).unwrap());
            assert!((ma - mb).abs() < 1e-15);
        }
    }

    #[test]
    fn level0_oracle_decays_linearly() {
        let l = build_h0(&PerturbationCoeffs::canonical_level0(), 1e-3).unwrap();
        let grid = oracle_grid(0, 20).unwrap();
        let r = melnikov_oracle_check(&l, &canonical(), &grid, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(r.failures.is_empty());
        assert!(r.max_reduction_within(3.0, 30.0), "{:?}", r.max_error_reduction);
        let peak = grid.iter().map(|&y| melnikov_m0(y, &canonical()).unwrap().abs()).fold(0.0, f64::max);
        assert!(r.max_errors[1] < 1e-2 * peak);
    }

    #[test]
    fn level1_oracle_decays_linearly() {
        let tables = default_tables(1).unwrap();
        let l = build_level(1, 1e-3, &[0.5], &tables).unwrap();
        let spec = MelnikovSpec::from_level(&l);
        assert_eq!(spec.coeff_deltas.len(), 3);
        let grid = oracle_grid(1, 20).unwrap();
        let r = melnikov_oracle_check(&l, &spec, &grid, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(r.max_reduction_within(3.0, 30.0), "{:?}", r.max_error_reduction);
    }
}
