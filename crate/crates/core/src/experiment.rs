//! Experiment harness behind the `msmtfl` binary.
//!
//! A configuration is a set of `key: value` lines (same syntax as dataset
//! manifests) optionally overridden by command-line flags of the same name.
//! Recognized keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `experiment` | `demo`, `stage-sweep`, `lambda-sweep`, `tau-sensitivity` or `realdata-sweep` (required) |
//! | `preset` | synthetic preset `fig2a`, `fig2b` or `fig2c` (default `fig2a`) |
//! | `m`, `n`, `d`, `sigma` | override single preset values |
//! | `dataset` | manifest path, `realdata-sweep` only (required there) |
//! | `algorithms` | comma list of `lasso`, `l21`, `msmtfl`, `msmtfl-at` |
//! | `stages` | stages per multi-stage run (default 10) |
//! | `alpha-grid` | `alpha` values; `lambda = alpha * sqrt(ln(d m) / n)` |
//! | `theta-presets` | fixed thresholds as multiples of `m * lambda` |
//! | `tau-multipliers` | scalings of the adaptive jump cutoff |
//! | `tau-normalization` | `per-task` (default) or `total` |
//! | `train-ratio` | comma list of training fractions, `realdata-sweep` only |
//! | `seed` | comma list of seeds or a half-open range `a..b` |
//! | `out` | results CSV path (default `results.csv`) |
//! | `tolerance`, `max-sweeps` | inner solver settings |
//!
//! Every run is a grid of independent cells (algorithm variant, train ratio,
//! alpha, seed). Cells run in parallel; rows are emitted in grid order, so
//! the same configuration always produces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::baselines::{l21_objective, solve_l21, solve_lasso_l11_report, L21Options};
use crate::datagen::{generate, SyntheticSpec};
use crate::error::{MtflError, Result};
use crate::io::{load_dataset, parse_key_values, split, write_results, ResultRow, SplitSpec};
use crate::metrics::{evaluate_predictions, l21_error};
use crate::model::{quadratic_loss, TaskDataset, WeightMatrix};
use crate::multistage::{
    lambda_from_alpha, run_msmtfl, run_msmtfl_at, theta_from_preset, MultistageConfig, StageTrace,
    TauNormalization, DEFAULT_STAGES, THETA_PRESETS,
};
use crate::wlasso::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Demo,
    StageSweep,
    LambdaSweep,
    TauSensitivity,
    RealdataSweep,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "demo" => Self::Demo,
            "stage-sweep" => Self::StageSweep,
            "lambda-sweep" => Self::LambdaSweep,
            "tau-sensitivity" => Self::TauSensitivity,
            "realdata-sweep" => Self::RealdataSweep,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Demo => "demo",
            Self::StageSweep => "stage-sweep",
            Self::LambdaSweep => "lambda-sweep",
            Self::TauSensitivity => "tau-sensitivity",
            Self::RealdataSweep => "realdata-sweep",
        }
    }

    /// Whether every stage of a multi-stage run gets its own row.
    fn per_stage_rows(self) -> bool {
        matches!(self, Self::Demo | Self::StageSweep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algorithm {
    Lasso,
    L21,
    Msmtfl,
    MsmtflAt,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lasso" => Self::Lasso,
            "l21" => Self::L21,
            "msmtfl" => Self::Msmtfl,
            "msmtfl-at" => Self::MsmtflAt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lasso => "lasso",
            Self::L21 => "l21",
            Self::Msmtfl => "msmtfl",
            Self::MsmtflAt => "msmtfl-at",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Synthetic instances; its seed field is replaced by each cell's seed.
    Synthetic(SyntheticSpec),
    Manifest(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub data: DataSource,
    pub algorithms: Vec<Algorithm>,
    pub stages: usize,
    pub alpha_grid: Vec<f64>,
    pub theta_presets: Vec<f64>,
    pub tau_multipliers: Vec<f64>,
    pub tau_normalization: TauNormalization,
    /// Training fractions (`realdata-sweep` only; empty otherwise).
    pub train_ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub solver: SolverOptions,
}

const KEYS: [&str; 18] = [
    "experiment",
    "preset",
    "m",
    "n",
    "d",
    "sigma",
    "dataset",
    "algorithms",
    "stages",
    "alpha-grid",
    "theta-presets",
    "tau-multipliers",
    "tau-normalization",
    "train-ratio",
    "seed",
    "out",
    "tolerance",
    "max-sweeps",
];

const SYNTHETIC_KEYS: [&str; 5] = ["preset", "m", "n", "d", "sigma"];

struct Entry {
    value: String,
    origin: String,
    /// Directory relative paths are resolved against.
    base: Option<PathBuf>,
}

/// Builds a configuration from an optional file plus flag overrides
/// (`(key, value)` pairs, applied after the file so flags win). All problems
/// are collected into one [`MtflError::Config`].
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut problems = Vec::new();

    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| MtflError::io(path, e))?;
        for (line, key, value) in parse_key_values(&text, path)? {
            let key = key.replace('_', "-");
            let origin = format!("{}:{line}", path.display());
            if entries.contains_key(&key) {
                problems.push(format!("{origin}: duplicate key `{key}`"));
            }
            entries.insert(
                key,
                Entry {
                    value,
                    origin,
                    base: path.parent().map(Path::to_path_buf),
                },
            );
        }
    }
    for (key, value) in overrides {
        let key = key.trim_start_matches('-').replace('_', "-");
        entries.insert(
            key.clone(),
            Entry {
                value: value.clone(),
                origin: format!("flag --{key}"),
                base: None,
            },
        );
    }
    for (key, entry) in &entries {
        if !KEYS.contains(&key.as_str()) {
            problems.push(format!("{}: unknown key `{key}`", entry.origin));
        }
    }

    let mut p = Parser {
        entries: &entries,
        problems: &mut problems,
    };

    let kind = match p.get("experiment") {
        None => {
            p.problems.push("missing required key `experiment`".into());
            None
        }
        Some(e) => {
            let kind = ExperimentKind::parse(&e.value);
            if kind.is_none() {
                p.problems.push(format!(
                    "{}: unknown experiment `{}` (expected demo, stage-sweep, lambda-sweep, tau-sensitivity or realdata-sweep)",
                    e.origin, e.value
                ));
            }
            kind
        }
    };

    let algorithms = p.list("algorithms", Algorithm::parse, "algorithm name");
    let stages = p.scalar::<usize>("stages", "positive integer");
    let alpha_grid = p.list("alpha-grid", |s| s.parse::<f64>().ok(), "number");
    let theta_presets = p.list("theta-presets", |s| s.parse::<f64>().ok(), "number");
    let tau_multipliers = p.list("tau-multipliers", |s| s.parse::<f64>().ok(), "number");
    let train_ratios = p.list("train-ratio", |s| s.parse::<f64>().ok(), "number");
    let seeds = p.seeds();
    let tolerance = p.scalar::<f64>("tolerance", "number");
    let max_sweeps = p.scalar::<usize>("max-sweeps", "positive integer");
    let tau_normalization = p.get("tau-normalization").and_then(|e| match e.value.as_str() {
        "per-task" => Some(TauNormalization::PerTask),
        "total" => Some(TauNormalization::TotalSamples),
        other => {
            p.problems.push(format!(
                "{}: tau-normalization must be `per-task` or `total`, got `{other}`",
                e.origin
            ));
            None
        }
    });
    let m = p.scalar::<usize>("m", "positive integer");
    let n = p.scalar::<usize>("n", "positive integer");
    let d = p.scalar::<usize>("d", "positive integer");
    let sigma = p.scalar::<f64>("sigma", "number");
    let out = p.path("out");
    let dataset = p.path("dataset");

    let Some(kind) = kind else {
        return Err(MtflError::Config(problems));
    };

    // kind-specific consistency
    let realdata = kind == ExperimentKind::RealdataSweep;
    if realdata {
        for key in SYNTHETIC_KEYS {
            if let Some(e) = entries.get(key) {
                problems.push(format!("{}: `{key}` does not apply to realdata-sweep", e.origin));
            }
        }
        if dataset.is_none() && !entries.contains_key("dataset") {
            problems.push("realdata-sweep requires `dataset`".into());
        }
    } else {
        for key in ["dataset", "train-ratio"] {
            if let Some(e) = entries.get(key) {
                problems.push(format!(
                    "{}: `{key}` only applies to realdata-sweep, not {}",
                    e.origin,
                    kind.name()
                ));
            }
        }
    }

    let algorithms = algorithms.unwrap_or_else(|| match kind {
        ExperimentKind::Demo | ExperimentKind::TauSensitivity => vec![Algorithm::MsmtflAt],
        ExperimentKind::StageSweep => vec![Algorithm::Msmtfl, Algorithm::MsmtflAt],
        ExperimentKind::LambdaSweep | ExperimentKind::RealdataSweep => {
            vec![Algorithm::Lasso, Algorithm::L21, Algorithm::Msmtfl, Algorithm::MsmtflAt]
        }
    });
    if algorithms.is_empty() {
        problems.push("at least one algorithm is required".into());
    }
    if kind == ExperimentKind::TauSensitivity && algorithms != [Algorithm::MsmtflAt] {
        problems.push("tau-sensitivity only runs msmtfl-at".into());
    }
    let alpha_grid = alpha_grid.unwrap_or_else(|| match kind {
        ExperimentKind::LambdaSweep | ExperimentKind::RealdataSweep => {
            vec![0.002, 0.005, 0.01, 0.02, 0.05]
        }
        _ => vec![0.01],
    });
    if alpha_grid.is_empty() || alpha_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        problems.push("alpha-grid needs positive finite values".into());
    }
    if !matches!(kind, ExperimentKind::LambdaSweep | ExperimentKind::RealdataSweep)
        && alpha_grid.len() > 1
    {
        problems.push(format!("{} takes a single alpha, got {}", kind.name(), alpha_grid.len()));
    }
    let theta_presets = theta_presets.unwrap_or_else(|| match kind {
        ExperimentKind::StageSweep | ExperimentKind::Demo => vec![THETA_PRESETS[0]],
        _ => THETA_PRESETS.to_vec(),
    });
    if theta_presets.is_empty() || theta_presets.iter().any(|&t| !(t > 0.0)) {
        problems.push("theta-presets needs positive values".into());
    }
    let tau_multipliers = tau_multipliers.unwrap_or_else(|| match kind {
        ExperimentKind::TauSensitivity => vec![0.5, 1.0, 5.0],
        _ => vec![1.0],
    });
    if tau_multipliers.is_empty() || tau_multipliers.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        problems.push("tau-multipliers needs positive finite values".into());
    }
    let train_ratios = if realdata {
        let r = train_ratios.unwrap_or_else(|| vec![0.15, 0.2, 0.25]);
        if r.is_empty() || r.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            problems.push("train-ratio values must lie in (0, 1)".into());
        }
        r
    } else {
        Vec::new()
    };
    let seeds = seeds.unwrap_or_else(|| match kind {
        ExperimentKind::Demo => vec![0],
        _ => (0..10).collect(),
    });
    if seeds.is_empty() {
        problems.push("at least one seed is required".into());
    }
    let stages = stages.unwrap_or(DEFAULT_STAGES);
    if stages == 0 {
        problems.push("stages must be at least 1".into());
    }

    let mut solver = SolverOptions::default();
    if let Some(t) = tolerance {
        solver.tolerance = t;
    }
    if let Some(s) = max_sweeps {
        solver.max_sweeps = s;
    }
    if let Err(e) = solver.validate() {
        problems.push(e.to_string());
    }

    let data = if realdata {
        DataSource::Manifest(dataset.unwrap_or_default())
    } else {
        let name = entries.get("preset").map_or("fig2a", |e| e.value.as_str());
        let mut spec = match SyntheticSpec::preset(name, 0) {
            Some(s) => s,
            None => {
                problems.push(format!(
                    "unknown preset `{name}` (expected one of {})",
                    SyntheticSpec::PRESETS.join(", ")
                ));
                SyntheticSpec::preset("fig2a", 0).unwrap()
            }
        };
        spec.m = m.unwrap_or(spec.m);
        spec.n = n.unwrap_or(spec.n);
        spec.d = d.unwrap_or(spec.d);
        spec.sigma = sigma.unwrap_or(spec.sigma);
        if let Err(e) = spec.validate() {
            problems.push(e.to_string());
        }
        DataSource::Synthetic(spec)
    };

    if !problems.is_empty() {
        return Err(MtflError::Config(problems));
    }
    Ok(ExperimentConfig {
        kind,
        data,
        algorithms,
        stages,
        alpha_grid,
        theta_presets,
        tau_multipliers,
        tau_normalization: tau_normalization.unwrap_or_default(),
        train_ratios,
        seeds,
        out: out.unwrap_or_else(|| PathBuf::from("results.csv")),
        solver,
    })
}

struct Parser<'a> {
    entries: &'a BTreeMap<String, Entry>,
    problems: &'a mut Vec<String>,
}

impl<'a> Parser<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.entries.get(key)
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let e = self.entries.get(key)?;
        let parsed = e.value.parse().ok();
        if parsed.is_none() {
            self.problems.push(format!(
                "{}: `{key}` expects a {what}, got `{}`",
                e.origin, e.value
            ));
        }
        parsed
    }

    fn list<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Option<Vec<T>> {
        let e = self.entries.get(key)?;
        let mut out = Vec::new();
        for item in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match parse(item) {
                Some(v) => out.push(v),
                None => self
                    .problems
                    .push(format!("{}: `{key}`: `{item}` is not a valid {what}", e.origin)),
            }
        }
        Some(out)
    }

    fn seeds(&mut self) -> Option<Vec<u64>> {
        let e = self.entries.get("seed")?;
        if let Some((a, b)) = e.value.split_once("..") {
            match (a.trim().parse::<u64>(), b.trim().parse::<u64>()) {
                (Ok(a), Ok(b)) if a < b => return Some((a..b).collect()),
                _ => {
                    self.problems.push(format!(
                        "{}: seed range `{}` must be `a..b` with a < b",
                        e.origin, e.value
                    ));
                    return None;
                }
            }
        }
        self.list("seed", |s| s.parse::<u64>().ok(), "seed")
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        let e = self.entries.get(key)?;
        if e.value.is_empty() {
            self.problems.push(format!("{}: `{key}` is empty", e.origin));
            return None;
        }
        let p = PathBuf::from(&e.value);
        Some(match &e.base {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        })
    }
}

/// One configured algorithm with its variant-specific setting.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Variant {
    Lasso,
    L21,
    Msmtfl { theta_multiple: f64 },
    MsmtflAt { tau_multiplier: f64 },
}

impl Variant {
    fn label(self, single_tau: bool) -> String {
        match self {
            Variant::Lasso => "lasso".into(),
            Variant::L21 => "l21".into(),
            Variant::Msmtfl { theta_multiple } => format!("msmtfl(theta={theta_multiple}m*lambda)"),
            Variant::MsmtflAt { tau_multiplier } if single_tau && tau_multiplier == 1.0 => {
                "msmtfl-at".into()
            }
            Variant::MsmtflAt { tau_multiplier } => format!("msmtfl-at(tau*{tau_multiplier})"),
        }
    }
}

struct Cell {
    variant: Variant,
    label: String,
    ratio: Option<f64>,
    alpha: f64,
    seed: u64,
}

/// A grid cell that ended in an error.
#[derive(Debug)]
pub struct CellFailure {
    pub algorithm: String,
    pub seed: u64,
    pub error: MtflError,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CellFailure>,
    /// Inner solves that stopped at the sweep limit.
    pub unconverged_solves: usize,
    pub summary: String,
}

impl ExperimentOutcome {
    /// 0 when every cell succeeded, otherwise the code of the first failure.
    pub fn exit_code(&self) -> i32 {
        self.failures.first().map_or(0, |f| f.error.exit_code())
    }
}

fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut variants = Vec::new();
    for &alg in &config.algorithms {
        match alg {
            Algorithm::Lasso => variants.push(Variant::Lasso),
            Algorithm::L21 => variants.push(Variant::L21),
            Algorithm::Msmtfl => variants.extend(
                config
                    .theta_presets
                    .iter()
                    .map(|&theta_multiple| Variant::Msmtfl { theta_multiple }),
            ),
            Algorithm::MsmtflAt => variants.extend(
                config
                    .tau_multipliers
                    .iter()
                    .map(|&tau_multiplier| Variant::MsmtflAt { tau_multiplier }),
            ),
        }
    }
    let single_tau = config.tau_multipliers.len() == 1;
    let ratios: Vec<Option<f64>> = if config.train_ratios.is_empty() {
        vec![None]
    } else {
        config.train_ratios.iter().copied().map(Some).collect()
    };

    let mut out = Vec::new();
    for &variant in &variants {
        for &ratio in &ratios {
            let label = match ratio {
                Some(r) => format!("{}@train={r}", variant.label(single_tau)),
                None => variant.label(single_tau),
            };
            for &alpha in &config.alpha_grid {
                for &seed in &config.seeds {
                    out.push(Cell {
                        variant,
                        label: label.clone(),
                        ratio,
                        alpha,
                        seed,
                    });
                }
            }
        }
    }
    out
}

struct Prepared {
    train: TaskDataset,
    test: Option<TaskDataset>,
    truth: Option<WeightMatrix>,
}

fn prepare(config: &ExperimentConfig, real: Option<&TaskDataset>, cell: &Cell) -> Result<Prepared> {
    match (&config.data, real) {
        (DataSource::Synthetic(spec), _) => {
            let inst = generate(&SyntheticSpec {
                seed: cell.seed,
                ..spec.clone()
            })?;
            Ok(Prepared {
                train: inst.data,
                test: None,
                truth: Some(inst.true_weights),
            })
        }
        (DataSource::Manifest(_), Some(full)) => {
            let (train, test) = split(
                full,
                &SplitSpec {
                    train_ratio: cell.ratio.unwrap_or(0.5),
                    seed: cell.seed,
                },
            )?;
            Ok(Prepared {
                train,
                test: Some(test),
                truth: None,
            })
        }
        (DataSource::Manifest(p), None) => Err(MtflError::Config(vec![format!(
            "dataset {} was not loaded",
            p.display()
        )])),
    }
}

struct CellResult {
    rows: Vec<ResultRow>,
    unconverged: usize,
}

fn fill_metrics(row: &mut ResultRow, prep: &Prepared, w: &WeightMatrix) -> Result<()> {
    if let Some(truth) = &prep.truth {
        row.l21_error = Some(l21_error(w, truth)?);
    }
    if let Some(test) = &prep.test {
        let eval = evaluate_predictions(test, w)?;
        row.nmse = eval.nmse;
        row.amse = eval.amse;
    }
    Ok(())
}

fn run_cell(config: &ExperimentConfig, real: Option<&TaskDataset>, cell: &Cell) -> Result<CellResult> {
    let prep = prepare(config, real, cell)?;
    let data = &prep.train;
    let n = (data.total_samples() as f64 / data.m() as f64).round() as usize;
    let lambda = lambda_from_alpha(cell.alpha, data.d(), data.m(), n.max(1));
    let base = |stage: Option<usize>| {
        let mut row = ResultRow::new(cell.label.clone(), cell.seed);
        row.stage = stage;
        row.lambda = Some(lambda);
        row
    };

    match cell.variant {
        Variant::Lasso => {
            let report = solve_lasso_l11_report(data, lambda, &config.solver)?;
            let mut row = base(None);
            fill_metrics(&mut row, &prep, &report.solution)?;
            row.objective = Some(quadratic_loss(data, &report.solution)? + lambda * report.solution.l11_norm());
            Ok(CellResult {
                rows: vec![row],
                unconverged: usize::from(!report.all_converged()),
            })
        }
        Variant::L21 => {
            let report = solve_l21(data, &L21Options::new(lambda))?;
            let mut row = base(None);
            fill_metrics(&mut row, &prep, &report.solution)?;
            row.objective = Some(l21_objective(data, &report.solution, lambda)?);
            Ok(CellResult {
                rows: vec![row],
                unconverged: usize::from(!report.converged),
            })
        }
        Variant::Msmtfl { .. } | Variant::MsmtflAt { .. } => {
            let mut ms = MultistageConfig::new(lambda).with_stages(config.stages);
            ms.tau_normalization = config.tau_normalization;
            ms.solver = config.solver.clone();
            let traces: Vec<StageTrace> = match cell.variant {
                Variant::Msmtfl { theta_multiple } => {
                    run_msmtfl(data, &ms.with_theta(theta_from_preset(theta_multiple, data.m(), lambda)))?
                }
                Variant::MsmtflAt { tau_multiplier } => {
                    run_msmtfl_at(data, &ms.with_tau_multiplier(tau_multiplier))?
                }
                _ => unreachable!(),
            };
            let unconverged = traces.iter().filter(|t| !t.solve.converged).count();
            let keep: Vec<&StageTrace> = if config.kind.per_stage_rows() {
                traces.iter().collect()
            } else {
                traces.last().into_iter().collect()
            };
            let mut rows = Vec::with_capacity(keep.len());
            for t in keep {
                let mut row = base(Some(t.stage));
                row.theta = Some(t.theta);
                row.tau = t.tau;
                row.objective = Some(t.objective);
                fill_metrics(&mut row, &prep, &t.solution)?;
                rows.push(row);
            }
            Ok(CellResult { rows, unconverged })
        }
    }
}

/// Runs every cell of the grid. Cells that fail are replaced by a row with
/// `[failed]` appended to the algorithm label and empty metrics.
pub fn run_cells(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let real = match &config.data {
        DataSource::Manifest(p) => Some(load_dataset(p)?),
        DataSource::Synthetic(_) => None,
    };
    let grid = cells(config);
    let results: Vec<Result<CellResult>> = grid
        .par_iter()
        .map(|cell| run_cell(config, real.as_ref(), cell))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut unconverged_solves = 0;
    for (cell, result) in grid.iter().zip(results) {
        match result {
            Ok(r) => {
                rows.extend(r.rows);
                unconverged_solves += r.unconverged;
            }
            Err(error) => {
                rows.push(ResultRow::new(format!("{}[failed]", cell.label), cell.seed));
                failures.push(CellFailure {
                    algorithm: cell.label.clone(),
                    seed: cell.seed,
                    error,
                });
            }
        }
    }
    let summary = summarize(config, &rows, &failures, unconverged_solves);
    Ok(ExperimentOutcome {
        rows,
        failures,
        unconverged_solves,
        summary,
    })
}

/// Runs the grid and writes the results CSV to `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let outcome = run_cells(config)?;
    write_results(&outcome.rows, &config.out)?;
    Ok(outcome)
}

/// Means of each metric over seeds, grouped by algorithm, lambda and stage in
/// first-appearance order.
fn summarize(
    config: &ExperimentConfig,
    rows: &[ResultRow],
    failures: &[CellFailure],
    unconverged: usize,
) -> String {
    struct Acc {
        key: (String, Option<u64>, Option<usize>),
        lambda: Option<f64>,
        count: usize,
        sums: [f64; 3],
        present: [usize; 3],
    }
    let mut groups: Vec<Acc> = Vec::new();
    for row in rows.iter().filter(|r| !r.algorithm.ends_with("[failed]")) {
        let key = (row.algorithm.clone(), row.lambda.map(f64::to_bits), row.stage);
        let idx = match groups.iter().position(|g| g.key == key) {
            Some(i) => i,
            None => {
                groups.push(Acc {
                    key,
                    lambda: row.lambda,
                    count: 0,
                    sums: [0.0; 3],
                    present: [0; 3],
                });
                groups.len() - 1
            }
        };
        let g = &mut groups[idx];
        g.count += 1;
        for (k, v) in [row.l21_error, row.nmse, row.amse].into_iter().enumerate() {
            if let Some(v) = v {
                g.sums[k] += v;
                g.present[k] += 1;
            }
        }
    }

    let mut s = String::new();
    let _ = writeln!(s, "experiment {}: {} rows", config.kind.name(), rows.len());
    let _ = writeln!(
        s,
        "{:<34} {:>12} {:>6} {:>5} {:>12} {:>12} {:>12}",
        "algorithm", "lambda", "stage", "runs", "l21_error", "nmse", "amse"
    );
    for g in &groups {
        let mean = |k: usize| {
            if g.present[k] == 0 {
                "-".to_string()
            } else {
                format!("{:.4e}", g.sums[k] / g.present[k] as f64)
            }
        };
        let _ = writeln!(
            s,
            "{:<34} {:>12} {:>6} {:>5} {:>12} {:>12} {:>12}",
            g.key.0,
            g.lambda.map_or("-".into(), |l| format!("{l:.4e}")),
            g.key.2.map_or("-".into(), |v| v.to_string()),
            g.count,
            mean(0),
            mean(1),
            mean(2)
        );
    }
    if unconverged > 0 {
        let _ = writeln!(s, "note: {unconverged} inner solves stopped at the iteration limit");
    }
    for f in failures {
        let _ = writeln!(s, "failed: {} seed {}: {}", f.algorithm, f.seed, f.error);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn demo_defaults() {
        let cfg = parse_config(None, &flags(&[("experiment", "demo")])).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Demo);
        assert_eq!(cfg.algorithms, vec![Algorithm::MsmtflAt]);
        assert_eq!(cfg.stages, 10);
        assert_eq!(cfg.seeds, vec![0]);
        match cfg.data {
            DataSource::Synthetic(s) => assert_eq!((s.m, s.n, s.d, s.sigma), (20, 30, 200, 0.005)),
            _ => panic!("expected synthetic data"),
        }
    }

    #[test]
    fn lambda_sweep_uses_all_theta_presets() {
        let cfg = parse_config(None, &flags(&[("experiment", "lambda-sweep")])).unwrap();
        assert_eq!(cfg.theta_presets, THETA_PRESETS.to_vec());
        assert_eq!(cfg.seeds, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn errors_are_aggregated() {
        let err = parse_config(
            None,
            &flags(&[
                ("experiment", "stage-sweep"),
                ("stages", "ten"),
                ("bogus", "1"),
                ("train-ratio", "0.2"),
            ]),
        )
        .unwrap_err();
        let MtflError::Config(problems) = err else {
            panic!("expected a config error");
        };
        assert_eq!(problems.len(), 3, "{problems:?}");
    }

    #[test]
    fn seed_syntax() {
        let cfg = parse_config(None, &flags(&[("experiment", "demo"), ("seed", "3..6")])).unwrap();
        assert_eq!(cfg.seeds, vec![3, 4, 5]);
        let cfg = parse_config(None, &flags(&[("experiment", "demo"), ("seed", "7, 2")])).unwrap();
        assert_eq!(cfg.seeds, vec![7, 2]);
        assert!(parse_config(None, &flags(&[("experiment", "demo"), ("seed", "6..3")])).is_err());
    }

    #[test]
    fn grid_order_and_labels() {
        let cfg = parse_config(
            None,
            &flags(&[
                ("experiment", "lambda-sweep"),
                ("algorithms", "msmtfl,msmtfl-at"),
                ("theta-presets", "50,2"),
                ("alpha-grid", "0.1,0.2"),
                ("seed", "0..2"),
            ]),
        )
        .unwrap();
        let grid = cells(&cfg);
        assert_eq!(grid.len(), 3 * 2 * 2);
        assert_eq!(grid[0].label, "msmtfl(theta=50m*lambda)");
        assert_eq!(grid[4].label, "msmtfl(theta=2m*lambda)");
        assert_eq!(grid[8].label, "msmtfl-at");
        assert_eq!((grid[1].alpha, grid[1].seed), (0.1, 1));
        assert_eq!((grid[2].alpha, grid[2].seed), (0.2, 0));
    }
}
