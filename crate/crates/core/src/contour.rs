//! Level curves of the piecewise Hamiltonian as polylines for plotting.

use std::fmt::Write as _;

use contour::ContourBuilder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian_family::{build_level, HamiltonianLevel, PerturbationCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContourOptions {
    /// Samples per axis.
    pub grid: usize,
    pub levels: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions { grid: 400, levels: 12, x_range: (-3.0, 3.0), y_range: (-2.5, 2.5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelCurve {
    pub value: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// `H+` on `x >= 0`, `H-` on `x < 0`, sampled row by row (`y` outer).
fn sample(level: &HamiltonianLevel, opts: &ContourOptions) -> Vec<f64> {
    let n = opts.grid;
    let at = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let y = at(opts.y_range.0, opts.y_range.1, j);
        for i in 0..n {
            let x = at(opts.x_range.0, opts.x_range.1, i);
            values.push(level.hamiltonian(x >= 0.0).eval(x, y));
        }
    }
    values
}

/// Thresholds spread evenly inside the range of `H(0, y)`, `|y| <= 2`, so
/// that every curve meets the switching line.
fn thresholds(level: &HamiltonianLevel, n: usize) -> Vec<f64> {
    let line = level.h_plus.restrict_x0();
    let (lo, hi) = (0..=400)
        .map(|i| line.eval(-2.0 + 4.0 * i as f64 / 400.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect()
}

/// Marching-squares level curves of `level`. The extractor closes rings
/// around the frame of the grid; those stretches are dropped, splitting the
/// ring into open polylines.
pub fn level_curves(level: &HamiltonianLevel, opts: &ContourOptions) -> Result<Vec<LevelCurve>> {
    if opts.grid < 2 || opts.levels == 0 {
        return Err(Error::InvalidArgument("contours need a grid of at least 2 and one level".into()));
    }
    let n = opts.grid;
    let values = sample(level, opts);
    let lines = ContourBuilder::new(n, n, true)
        .lines(&values, &thresholds(level, opts.levels))
        .map_err(|e| Error::InvalidArgument(format!("contour extraction: {e:?}")))?;
    // grid units put sample i at i + 1/2; ring points beyond the samples
    // belong to the frame closure
    let inside = |c: &geo_types::Coord<f64>| {
        let hull = 0.5..=(n as f64 - 0.5);
        hull.contains(&c.x) && hull.contains(&c.y)
    };
    let sx = (opts.x_range.1 - opts.x_range.0) / (n - 1) as f64;
    let sy = (opts.y_range.1 - opts.y_range.0) / (n - 1) as f64;
    let world = |c: &geo_types::Coord<f64>| [opts.x_range.0 + (c.x - 0.5) * sx, opts.y_range.0 + (c.y - 0.5) * sy];
    Ok(lines
        .into_iter()
        .map(|line| {
            let (geometry, value) = line.into_inner();
            let mut polylines = Vec::new();
            for ring in geometry.0 {
                let mut current: Vec<[f64; 2]> = Vec::new();
                for c in &ring.0 {
                    if inside(c) {
                        current.push(world(c));
                    } else if current.len() > 1 {
                        polylines.push(std::mem::take(&mut current));
                    } else {
                        current.clear();
                    }
                }
                if current.len() > 1 {
                    polylines.push(current);
                }
            }
            LevelCurve { value, polylines }
        })
        .collect())
}

/// The level-`k` Hamiltonian at `eps = 0`.
pub fn unperturbed_level(k: usize, tables: &[PerturbationCoeffs]) -> Result<HamiltonianLevel> {
    build_level(k, 0.0, &vec![0.0; k], tables)
}

/// CSV with columns `curve,level,polyline,x,y`.
pub fn curves_csv(curves: &[LevelCurve]) -> String {
    let mut out = String::from("curve,level,polyline,x,y\n");
    for (c, curve) in curves.iter().enumerate() {
        for (p, line) in curve.polylines.iter().enumerate() {
            for [x, y] in line {
                writeln!(out, "{c},{:e},{p},{x},{y}", curve.value).expect("writing to a String");
            }
        }
    }
    out
}
