//! Command-line front end. Every command writes its reports into the output
//! directory and returns an exit code: 0 when the pipeline's checks pass, 1
//! on a numerical failure, 2 on a usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bifurcation::{
    default_monotonicity_input, existence_is_monotone, lift_persistence, monotonicity_demo, pseudo_hopf_mode,
    pseudo_hopf_search, two_fold_demo, MonotonicityInput, MonotonicityReport, PersistenceCheck, PseudoHopfOutcome,
    PseudoHopfSetup, B_SCHEDULE, DEMO_ALPHA,
};
use crate::certify::{
    certify_chain_with, certify_level0_with, summary_csv, sweep_count_field, sweep_count_level, validate_parameters,
    CountReport, Tolerances, ValidatedParameters, SWEEP_PER_UNIT, SWEEP_WINDOW,
};
use crate::contour::{curves_csv, level_curves, unperturbed_level, ContourOptions};
use crate::error::Error;
use crate::field::PiecewiseField;
use crate::hamiltonian_family::{
    build_level, default_tables, expected_cycles, FamilyConfig, LevelInfo, PerturbationCoeffs, DEFAULT_MAX_LEVEL,
    MAX_LEVEL,
};
use crate::melnikov::{melnikov_oracle_check, oracle_grid, MelnikovSpec, OracleReport};

pub const OUT_ENV: &str = "PWCYCLES_OUT";
pub const DEFAULT_OUT: &str = "pwcycles-out";

/// `eps` schedule of the level-0 count and of the Melnikov oracle.
pub const DEFAULT_SCHEDULE: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Parameters used by `construct` when none are given.
pub const FIXED_EPSILON: f64 = 1e-3;
pub const FIXED_EPSILON_VECTOR: [f64; 4] = [1e-3, 1e-12, 1e-45, 1e-150];
/// Weight of the top perturbation in the Melnikov oracle.
pub const MELNIKOV_WEIGHT: f64 = 0.5;
pub const TOLERANCE_RANGE: (f64, f64) = (1e-14, 1e-2);

#[derive(Debug, Parser)]
#[command(name = "pwcycles", version, about = "Crossing limit cycles of piecewise polynomial vector fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Level of the recursive family.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Comma-separated `eps_1,...,eps_k`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon_vector: Option<Vec<f64>>,
    /// JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// JSON coefficient tables.
    #[arg(long, global = true)]
    pub tables: Option<PathBuf>,
    /// Output directory (the PWCYCLES_OUT variable takes precedence).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub tol_residual: Option<f64>,
    #[arg(long, global = true)]
    pub tol_margin: Option<f64>,
    #[arg(long, global = true)]
    pub tol_distinct: Option<f64>,
    #[arg(long, global = true)]
    pub tol_geometric: Option<f64>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Allow levels above 2.
    #[arg(long, global = true)]
    pub deep_level: bool,
    /// Add one pseudo-Hopf step to the count (k <= 1).
    #[arg(long, global = true)]
    pub pseudo_hopf_mode: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble the level-k Hamiltonians and field.
    Construct,
    /// Certify the crossing cycles of levels 0..=k.
    Count,
    /// Level curves of H_k at eps = 0 as CSV polylines.
    Levels {
        #[arg(long)]
        contours: Option<usize>,
    },
    /// Compare delta / eps with the Melnikov function along the eps schedule.
    Melnikov,
    /// Existence and absence of the pseudo-Hopf cycle over a b schedule.
    PseudoHopf {
        /// Use the built-in two-fold field (the default without --input).
        #[arg(long)]
        demo: bool,
        /// JSON piecewise field.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Ordinate of the monodromic point.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        fold: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Comma-separated shift magnitudes.
        #[arg(long, value_delimiter = ',')]
        b: Option<Vec<f64>>,
    },
    /// Lift a field by one degree and count the cycles after the shift.
    Lift {
        /// JSON piecewise field (default: the translated level-0 field).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        b: Option<f64>,
        /// Comma-separated `lo,hi` window of the line to sweep.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        window: Option<Vec<f64>>,
    },
    /// Count crossing cycles of level k from integrated returns.
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Construct => "construct",
            Command::Count => "count",
            Command::Levels { .. } => "levels",
            Command::Melnikov => "melnikov",
            Command::PseudoHopf { .. } => "pseudo-hopf",
            Command::Lift { .. } => "lift",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub residual: Option<f64>,
    pub margin: Option<f64>,
    pub distinct: Option<f64>,
    pub geometric: Option<f64>,
}

/// On-disk run configuration; flags override its entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub epsilon_schedule: Option<Vec<f64>>,
    pub epsilon_vector: Option<Vec<f64>>,
    pub coefficient_tables: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    pub grid: Option<usize>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub deep_level: bool,
    #[serde(default)]
    pub pseudo_hopf_mode: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Flags on top of the file.
    fn merge(mut self, a: &CommonArgs) -> Self {
        macro_rules! take {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = Some(v);
                }
            };
        }
        take!(self.k, a.k);
        take!(self.epsilon, a.epsilon);
        take!(self.epsilon_vector, a.epsilon_vector);
        take!(self.coefficient_tables, a.tables);
        take!(self.out, a.out);
        take!(self.grid, a.grid);
        take!(self.jobs, a.jobs);
        take!(self.tolerances.residual, a.tol_residual);
        take!(self.tolerances.margin, a.tol_margin);
        take!(self.tolerances.distinct, a.tol_distinct);
        take!(self.tolerances.geometric, a.tol_geometric);
        self.deep_level |= a.deep_level;
        self.pseudo_hopf_mode |= a.pseudo_hopf_mode;
        if self.epsilon.is_some() && a.epsilon.is_some() {
            // an explicit flag replaces any schedule from the file
            self.epsilon_schedule = None;
        }
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        let t = &self.tolerances;
        for (name, v) in [("residual", t.residual), ("margin", t.margin), ("distinct", t.distinct), ("geometric", t.geometric)] {
            if let Some(v) = v {
                if !(TOLERANCE_RANGE.0..=TOLERANCE_RANGE.1).contains(&v) {
                    return usage(format!("tolerance {name} = {v} outside [1e-14, 1e-2]"));
                }
            }
        }
        if let Some(k) = self.k {
            if k > MAX_LEVEL {
                return usage(format!("k = {k} exceeds the cap {MAX_LEVEL}"));
            }
            if k > DEFAULT_MAX_LEVEL && !self.deep_level {
                return usage(format!("k = {k} needs --deep-level"));
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if let Some(e) = self.epsilon {
            if !positive(e) {
                return usage(format!("epsilon must be positive, got {e}"));
            }
        }
        if self.epsilon_schedule.iter().flatten().any(|&e| !positive(e)) {
            return usage("epsilon schedule entries must be positive");
        }
        if self.epsilon_vector.iter().flatten().any(|&e| !positive(e)) {
            return usage("epsilon-vector entries must be positive");
        }
        if self.grid == Some(0) || self.jobs == Some(0) {
            return usage("grid and jobs must be positive");
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        let t = &self.tolerances;
        Tolerances {
            residual: t.residual.unwrap_or(d.residual),
            margin: t.margin.unwrap_or(d.margin),
            distinct: t.distinct.unwrap_or(d.distinct),
            geometric: t.geometric.unwrap_or(d.geometric),
            integrator: d.integrator,
        }
    }

    fn level(&self) -> CliResult<usize> {
        self.k.map_or_else(|| usage("--k is required"), Ok)
    }
}

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.passed {
                0
            } else {
                eprintln!("{}: checks failed", cli.command.name());
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let file = match &cli.common.config {
        Some(p) => RunConfig::from_json(
            &std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?,
        )?,
        None => RunConfig::default(),
    };
    if let Some(c) = &file.command {
        if c != cli.command.name() {
            return usage(format!("config is for `{c}`, not `{}`", cli.command.name()));
        }
    }
    let cfg = file.merge(&cli.common);
    cfg.validate()?;
    if let Some(j) = cfg.jobs {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let out = match std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        Some(v) => PathBuf::from(v),
        None => cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    };
    std::fs::create_dir_all(&out).map_err(Error::from)?;
    let ctx = Context { cfg, out };
    match &cli.command {
        Command::Construct => ctx.construct(),
        Command::Count => ctx.count(),
        Command::Levels { contours } => ctx.levels(*contours),
        Command::Melnikov => ctx.melnikov(),
        Command::PseudoHopf { input, fold, radius, b, .. } => ctx.pseudo_hopf(input.as_deref(), *fold, *radius, b.as_deref()),
        Command::Lift { input, b, window } => ctx.lift(input.as_deref(), *b, window.as_deref()),
        Command::Sweep => ctx.sweep(),
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConstructReport<'a> {
    info: LevelInfo,
    epsilon: f64,
    epsilon_vector: &'a [f64],
    field_degree: usize,
    coeff_tables: &'a [PerturbationCoeffs],
    h_plus: &'a crate::poly::BiPolynomial,
    h_minus: &'a crate::poly::BiPolynomial,
    field: PiecewiseField,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CountFile<'a> {
    level: usize,
    expected: u64,
    parameters: Option<&'a ValidatedParameters>,
    reports: &'a [CountReport],
    sweep: Option<&'a CountReport>,
    pseudo_hopf_mode: Option<&'a CountReport>,
    passed: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PseudoHopfFile<'a> {
    setup: &'a PseudoHopfSetup,
    outcomes: &'a [PseudoHopfOutcome],
    existence_monotone: bool,
    clean_magnitude: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LiftFile<'a> {
    input: &'a MonotonicityInput,
    shifted: &'a MonotonicityReport,
    wrong_sign: &'a MonotonicityReport,
    unlifted: &'a MonotonicityReport,
    persistence: &'a PersistenceCheck,
    passed: bool,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(Error::from)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        self.write(name, &(text + "\n"))
    }

    fn family(&self) -> CliResult<Option<FamilyConfig>> {
        match &self.cfg.coefficient_tables {
            Some(p) => Ok(Some(FamilyConfig::load(p)?)),
            None => Ok(None),
        }
    }

    fn tables(&self, k: usize) -> CliResult<Vec<PerturbationCoeffs>> {
        match self.family()? {
            Some(f) if f.levels.len() > k => Ok(f.levels),
            Some(f) => usage(format!("coefficient tables cover levels 0..{}, not {k}", f.levels.len())),
            None => Ok(default_tables(k)?),
        }
    }

    /// Explicit parameters, else those of the table file, else `None`.
    fn given_parameters(&self, k: usize) -> CliResult<Option<(f64, Vec<f64>)>> {
        let family = self.family()?;
        let eps = self.cfg.epsilon.or(family.as_ref().and_then(|f| f.epsilon));
        let evec = self.cfg.epsilon_vector.clone().or(family.and_then(|f| f.epsilon_vector));
        match (eps, evec) {
            (None, None) => Ok(None),
            (e, v) => {
                let v = v.unwrap_or_else(|| FIXED_EPSILON_VECTOR[..k].to_vec());
                if v.len() < k {
                    return usage(format!("level {k} needs {k} epsilon-vector entries"));
                }
                Ok(Some((e.unwrap_or(FIXED_EPSILON), v[..k].to_vec())))
            }
        }
    }

    fn construct(&self) -> CliResult<Outcome> {
        let k = self.cfg.level()?;
        let (eps, evec) = self
            .given_parameters(k)?
            .unwrap_or_else(|| (FIXED_EPSILON, FIXED_EPSILON_VECTOR[..k].to_vec()));
        let tables = self.tables(k)?;
        let level = build_level(k, eps, &evec, &tables)?;
        let field = level.field();
        let report = ConstructReport {
            info: level.info(),
            epsilon: eps,
            epsilon_vector: &evec,
            field_degree: field.degree(),
            coeff_tables: &level.coeff_tables,
            h_plus: &level.h_plus,
            h_minus: &level.h_minus,
            field,
        };
        let passed = report.field_degree == level.info().field_degree;
        let summary = format!("level {k}: field degree {}", report.field_degree);
        let file = self.write_json(&format!("level_k{k}.json"), &report)?;
        Ok(Outcome { passed, files: vec![file], summary })
    }

    /// Given parameters, else the validated ones.
    fn parameters(&self, k: usize, tables: &[PerturbationCoeffs]) -> CliResult<(f64, Vec<f64>, Option<ValidatedParameters>)> {
        match self.given_parameters(k)? {
            Some((e, v)) => Ok((e, v, None)),
            None => {
                let p = validate_parameters(k, tables, &self.cfg.tolerances())?;
                Ok((p.epsilon, p.epsilon_vector.clone(), Some(p)))
            }
        }
    }

    fn count(&self) -> CliResult<Outcome> {
        let k = self.cfg.level()?;
        let tol = self.cfg.tolerances();
        let tables = self.tables(k)?;
        let mut validated = None;
        let mut sweep = None;
        let reports = if k == 0 {
            let schedule = match (&self.cfg.epsilon_schedule, self.cfg.epsilon) {
                (_, Some(e)) => vec![e],
                (Some(s), None) => s.clone(),
                (None, None) => DEFAULT_SCHEDULE.to_vec(),
            };
            schedule
                .iter()
                .map(|&e| certify_level0_with(e, &tables[0], &tol))
                .collect::<crate::Result<Vec<_>>>()?
        } else {
            let (eps, evec, v) = self.parameters(k, &tables)?;
            validated = v;
            let reports = certify_chain_with(k, eps, &evec, &tables, &tol)?;
            let level = build_level(k, eps, &evec, &tables)?;
            sweep = Some(sweep_count_level(&level, SWEEP_WINDOW, SWEEP_PER_UNIT, &tol)?);
            reports
        };
        let mode = if self.cfg.pseudo_hopf_mode {
            if k > 1 {
                return usage("--pseudo-hopf-mode runs at k <= 1");
            }
            let (eps, evec) = match &validated {
                Some(v) => (v.epsilon, v.epsilon_vector.clone()),
                None => self.given_parameters(k)?.unwrap_or((FIXED_EPSILON, FIXED_EPSILON_VECTOR[..k].to_vec())),
            };
            let grid = self.cfg.grid.unwrap_or(4000);
            Some(pseudo_hopf_mode(k, eps, &evec, &tables, 1e-4, grid, &tol)?)
        } else {
            None
        };
        let top: Vec<&CountReport> = reports.iter().filter(|r| r.level == k).collect();
        let passed = top.iter().all(|r| r.passed())
            && sweep.as_ref().is_none_or(|s| s.found == expected_cycles(k))
            && mode.as_ref().is_none_or(|m| m.passed());
        let mut summary = String::new();
        for r in &top {
            summary += &format!("k = {k}, eps = {:e}: found {} of {}\n", r.epsilon_used, r.found, r.expected);
        }
        if let Some(s) = &sweep {
            summary += &format!("sweep: {}\n", s.found);
        }
        if let Some(m) = &mode {
            summary += &format!("pseudo-Hopf mode: found {} of {}\n", m.found, m.expected);
        }
        let mut table: Vec<CountReport> = reports.clone();
        table.extend(mode.iter().cloned());
        let files = vec![
            self.write_json(
                &format!("count_k{k}.json"),
                &CountFile {
                    level: k,
                    expected: expected_cycles(k),
                    parameters: validated.as_ref(),
                    reports: &reports,
                    sweep: sweep.as_ref(),
                    pseudo_hopf_mode: mode.as_ref(),
                    passed,
                },
            )?,
            self.write(&format!("summary_k{k}.csv"), &summary_csv(&table))?,
        ];
        Ok(Outcome { passed, files, summary: summary.trim_end().to_string() })
    }

    fn levels(&self, contours: Option<usize>) -> CliResult<Outcome> {
        let k = self.cfg.level()?;
        let tables = self.tables(k)?;
        let level = unperturbed_level(k, &tables)?;
        let d = ContourOptions::default();
        let opts = ContourOptions {
            grid: self.cfg.grid.unwrap_or(d.grid),
            levels: contours.unwrap_or(d.levels),
            ..d
        };
        let curves = level_curves(&level, &opts)?;
        let n: usize = curves.iter().map(|c| c.polylines.len()).sum();
        let file = self.write(&format!("levels_k{k}.csv"), &curves_csv(&curves))?;
        Ok(Outcome {
            passed: true,
            files: vec![file],
            summary: format!("level {k}: {} level values, {n} polylines", curves.len()),
        })
    }

    fn melnikov(&self) -> CliResult<Outcome> {
        let k = self.cfg.level()?;
        let tables = self.tables(k)?;
        let evec = match &self.cfg.epsilon_vector {
            Some(v) if v.len() >= k => v[..k].to_vec(),
            Some(_) => return usage(format!("level {k} needs {k} epsilon-vector entries")),
            None => vec![MELNIKOV_WEIGHT; k],
        };
        let schedule = self.cfg.epsilon_schedule.clone().unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
        let level = build_level(k, schedule[0], &evec, &tables)?;
        let spec = MelnikovSpec::from_level(&level);
        let grid = oracle_grid(k, self.cfg.grid.unwrap_or(20))?;
        let report: OracleReport = melnikov_oracle_check(&level, &spec, &grid, &schedule)?;
        let passed = report.max_reduction_within(3.0, 30.0);
        let summary = format!(
            "level {k}: max |delta/eps - M| {:?}, reductions {:?}",
            report.max_errors, report.max_error_reduction
        );
        let file = self.write_json(&format!("melnikov_k{k}.json"), &report)?;
        Ok(Outcome { passed, files: vec![file], summary })
    }

    fn pseudo_hopf(&self, input: Option<&Path>, fold: f64, radius: f64, b: Option<&[f64]>) -> CliResult<Outcome> {
        let opts = self.cfg.tolerances().integrator;
        let setup = match input {
            None => PseudoHopfSetup::from_two_fold(&two_fold_demo(DEMO_ALPHA), 0.0, radius)?,
            Some(p) => {
                let z = read_field(p)?;
                PseudoHopfSetup::from_two_fold(&z, fold, radius).or_else(|_| PseudoHopfSetup::from_focus(&z, fold, radius))?
            }
        };
        let mags = b.map_or_else(|| B_SCHEDULE.to_vec(), <[f64]>::to_vec);
        if mags.iter().any(|&m| !(m > 0.0)) {
            return usage("shift magnitudes must be positive");
        }
        let outcomes = pseudo_hopf_search(&setup, &mags, &opts)?;
        let monotone = existence_is_monotone(&outcomes);
        // first magnitude, largest first, at which both signs are clean
        let clean = mags.iter().copied().find(|&m| {
            let at = |s: i32| outcomes.iter().find(|o| o.sign == s && o.b.abs() == m);
            matches!((at(1), at(-1)), (Some(a), Some(o)) if a.found && a.encloses_segment && o.absence_certified)
        });
        let passed = monotone && clean.is_some();
        let mut csv = String::from("b,sign,found,enclosesSegment,absenceCertified,upper,lower\n");
        for o in &outcomes {
            let (u, l) = o.cycle.map_or((f64::NAN, f64::NAN), |c| (c.upper_ordinate, c.lower_ordinate));
            csv += &format!("{},{},{},{},{},{u},{l}\n", o.b, o.sign, o.found, o.encloses_segment, o.absence_certified);
        }
        let files = vec![
            self.write_json(
                "pseudo_hopf.json",
                &PseudoHopfFile { setup: &setup, outcomes: &outcomes, existence_monotone: monotone, clean_magnitude: clean, passed },
            )?,
            self.write("pseudo_hopf.csv", &csv)?,
        ];
        let summary = format!(
            "admissible sign {}, clean at |b| = {}",
            setup.admissible_b_sign,
            clean.map_or("none".into(), |m| m.to_string())
        );
        Ok(Outcome { passed, files, summary })
    }

    fn lift(&self, input: Option<&Path>, b: Option<f64>, window: Option<&[f64]>) -> CliResult<Outcome> {
        let tol = self.cfg.tolerances();
        let grid = self.cfg.grid.unwrap_or(4000);
        let input = match input {
            None => default_monotonicity_input(1e-2, &tol)?,
            Some(p) => {
                let field = read_field(p)?;
                let window = match window {
                    None => (-2.0, 0.5),
                    Some(&[lo, hi]) if lo < hi => (lo, hi),
                    Some(_) => return usage("--window takes lo,hi with lo < hi"),
                };
                let cycles = sweep_count_field(&field, window, grid, &tol.integrator)?;
                MonotonicityInput { field, cycles, window }
            }
        };
        let eps = self.cfg.epsilon.unwrap_or(1e-2);
        let b = b.unwrap_or(1e-3);
        if !(b > 0.0) {
            return usage("--b must be positive");
        }
        let m = input.cycles.len() as u64;
        let shifted = monotonicity_demo(&input, eps, b, None, grid, &tol)?;
        let sign = shifted.lift.as_ref().map_or(1, |l| l.admissible_b_sign());
        let wrong_sign = monotonicity_demo(&input, eps, b, Some(-sign), grid, &tol)?;
        let unlifted = monotonicity_demo(&input, 0.0, b, None, grid, &tol)?;
        let persistence = lift_persistence(&input, eps, grid, &tol)?;
        let passed = shifted.count.found > m
            && wrong_sign.count.found == m
            && unlifted.count.found == m
            && persistence.passed();
        let summary = format!(
            "parent cycles {m}; shifted lift {}, wrong sign {}, eps = 0 {}",
            shifted.count.found, wrong_sign.count.found, unlifted.count.found
        );
        let file = self.write_json(
            "lift.json",
            &LiftFile {
                input: &input,
                shifted: &shifted,
                wrong_sign: &wrong_sign,
                unlifted: &unlifted,
                persistence: &persistence,
                passed,
            },
        )?;
        Ok(Outcome { passed, files: vec![file], summary })
    }

    fn sweep(&self) -> CliResult<Outcome> {
        let k = self.cfg.level()?;
        let tol = self.cfg.tolerances();
        let tables = self.tables(k)?;
        let (eps, evec) = match self.given_parameters(k)? {
            Some(p) => p,
            None if k == 0 => (FIXED_EPSILON, Vec::new()),
            None => {
                let (e, v, _) = self.parameters(k, &tables)?;
                (e, v)
            }
        };
        let level = build_level(k, eps, &evec, &tables)?;
        let per_unit = self.cfg.grid.unwrap_or(SWEEP_PER_UNIT);
        let report = sweep_count_level(&level, SWEEP_WINDOW, per_unit, &tol)?;
        let passed = report.passed();
        let summary = format!("k = {k}: swept {} of {}", report.found, report.expected);
        let files = vec![
            self.write_json(&format!("sweep_k{k}.json"), &report)?,
            self.write(&format!("sweep_summary_k{k}.csv"), &summary_csv(std::slice::from_ref(&report)))?,
        ];
        Ok(Outcome { passed, files, summary })
    }
}

fn read_field(path: &Path) -> CliResult<PiecewiseField> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys_and_bad_tolerances() {
        assert!(RunConfig::from_json(r#"{"k": 1, "colour": "red"}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"k": 1, "tolerances": {"residual": 1e-1}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
        let ok = RunConfig::from_json(r#"{"k": 1, "tolerances": {"residual": 1e-12}}"#).unwrap();
        ok.validate().unwrap();
        assert_eq!(ok.tolerances().residual, 1e-12);
        assert!(RunConfig::from_json(r#"{"tolerances": {"slack": 1e-3}}"#).is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let file = RunConfig { k: Some(0), epsilon: Some(1e-3), ..Default::default() };
        let args = CommonArgs { k: Some(1), tol_margin: Some(1e-8), ..Default::default() };
        let cfg = file.merge(&args);
        assert_eq!((cfg.k, cfg.epsilon, cfg.tolerances.margin), (Some(1), Some(1e-3), Some(1e-8)));
    }

    #[test]
    fn deep_levels_need_the_flag() {
        let cfg = RunConfig { k: Some(3), ..Default::default() };
        assert!(cfg.validate().is_err());
        RunConfig { deep_level: true, ..cfg.clone() }.validate().unwrap();
        assert!(RunConfig { k: Some(5), deep_level: true, ..cfg }.validate().is_err());
    }

    #[test]
    fn parse_errors_are_usage_errors() {
        assert_eq!(run(["pwcycles", "construct", "--k", "-1"]), 2);
        assert_eq!(run(["pwcycles", "frobnicate"]), 2);
    }
}
