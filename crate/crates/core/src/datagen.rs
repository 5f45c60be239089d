//! Synthetic multi-task regression instances with joint row sparsity.
//!
//! Draw order from a single [`SeededStream`]:
//! 1. `W` entries, row by row, each `Uniform[-10, 10)`;
//! 2. `floor(row_zero_fraction * d)` rows to zero, without replacement;
//! 3. among the entries of the surviving rows (row-major order),
//!    `floor(entry_zero_fraction * count)` entries to zero;
//! 4. for each task in order: `X_i` row by row from `N(0, 1)`, then the
//!    noise `delta_i` from `N(0, sigma^2)`.
//!
//! Responses are `y_i = X_i w_i + delta_i`.

use ndarray::{Array1, Array2};

use crate::error::{MtflError, Result};
use crate::model::{Task, TaskDataset, WeightMatrix};
use crate::rng::{floor_count, SeededStream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    /// Samples per task.
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub row_zero_fraction: f64,
    pub entry_zero_fraction: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(m: usize, n: usize, d: usize, sigma: f64, seed: u64) -> Self {
        SyntheticSpec {
            m,
            n,
            d,
            sigma,
            row_zero_fraction: 0.9,
            entry_zero_fraction: 0.8,
            seed,
        }
    }

    /// Named configurations: `fig2a` (m=20, n=30, d=200, sigma=0.005),
    /// `fig2b` (m=15, n=40, d=250, sigma=0.01), `fig2c` (m=25, n=25, d=180,
    /// sigma=0.05).
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "fig2a" => Some(Self::new(20, 30, 200, 0.005, seed)),
            "fig2b" => Some(Self::new(15, 40, 250, 0.01, seed)),
            "fig2c" => Some(Self::new(25, 25, 180, 0.05, seed)),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 3] = ["fig2a", "fig2b", "fig2c"];

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.m == 0 || self.n == 0 || self.d == 0 {
            problems.push(format!(
                "m, n and d must be positive (got m={}, n={}, d={})",
                self.m, self.n, self.d
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            problems.push(format!("sigma must be finite and nonnegative, got {}", self.sigma));
        }
        for (name, f) in [
            ("row_zero_fraction", self.row_zero_fraction),
            ("entry_zero_fraction", self.entry_zero_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                problems.push(format!("{name} must lie in [0, 1), got {f}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(MtflError::InvalidParameter(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub data: TaskDataset,
    pub true_weights: WeightMatrix,
    /// `delta_i` per task.
    pub noise: Vec<Array1<f64>>,
    /// Rows selected in step 2, ascending.
    pub zeroed_rows: Vec<usize>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let SyntheticSpec { m, n, d, sigma, .. } = *spec;
    let mut rng = SeededStream::new(spec.seed);

    let mut w = Array2::<f64>::zeros((d, m));
    for v in w.iter_mut() {
        *v = rng.uniform_in(-10.0, 10.0);
    }

    let mut zero_rows = rng.sample_without_replacement(d, floor_count(spec.row_zero_fraction, d));
    let mut is_zero_row = vec![false; d];
    for &j in &zero_rows {
        is_zero_row[j] = true;
        w.row_mut(j).fill(0.0);
    }
    let survivors: Vec<usize> = (0..d).filter(|&j| !is_zero_row[j]).collect();
    let entries = survivors.len() * m;
    for k in rng.sample_without_replacement(entries, floor_count(spec.entry_zero_fraction, entries)) {
        w[[survivors[k / m], k % m]] = 0.0;
    }
    let true_weights = WeightMatrix::from_array(w)?;
    zero_rows.sort_unstable();

    let mut tasks = Vec::with_capacity(m);
    let mut noise = Vec::with_capacity(m);
    for i in 0..m {
        let x = Array2::from_shape_simple_fn((n, d), || rng.standard_normal());
        let delta = Array1::from_shape_simple_fn(n, || rng.normal(sigma));
        let y = x.dot(&true_weights.column(i)) + &delta;
        tasks.push(Task { x, y });
        noise.push(delta);
    }

    Ok(SyntheticInstance {
        data: TaskDataset::new(tasks)?,
        true_weights,
        noise,
        zeroed_rows: zero_rows,
    })
}
