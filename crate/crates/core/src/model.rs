//! Multi-task dataset, weight matrix and the capped-l1,l1 objective.
//!
//! A problem has `m` tasks sharing `d` features. Task `i` has a design
//! matrix `X_i` (`n_i x d`) and a response `y_i`. The weight matrix `W` is
//! `d x m`: column `i` is the predictor of task `i`, row `j` collects the
//! weights of feature `j` across all tasks.

use ndarray::{Array1, Array2, ArrayView1, ShapeBuilder};

use crate::error::{MtflError, Result};

/// One regression task: design matrix and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Task {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

/// A validated collection of tasks sharing the same feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    tasks: Vec<Task>,
    d: usize,
}

impl TaskDataset {
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        let first = tasks
            .first()
            .ok_or_else(|| MtflError::Dimension("dataset must contain at least one task".into()))?;
        let d = first.x.ncols();
        if d == 0 {
            return Err(MtflError::Dimension("feature dimension must be at least 1".into()));
        }
        for (i, task) in tasks.iter().enumerate() {
            if task.x.ncols() != d {
                return Err(MtflError::Dimension(format!(
                    "task {i} has {} columns, expected {d}",
                    task.x.ncols()
                )));
            }
            if task.x.nrows() == 0 {
                return Err(MtflError::Dimension(format!("task {i} has no samples")));
            }
            if task.y.len() != task.x.nrows() {
                return Err(MtflError::Dimension(format!(
                    "task {i}: response has length {} but design matrix has {} rows",
                    task.y.len(),
                    task.x.nrows()
                )));
            }
        }
        Ok(TaskDataset { tasks, d })
    }

    /// Convenience constructor from `(X_i, y_i)` pairs.
    pub fn from_pairs(pairs: Vec<(Array2<f64>, Array1<f64>)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(x, y)| Task { x, y }).collect())
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &Task {
        &self.tasks[i]
    }

    /// Number of tasks.
    pub fn m(&self) -> usize {
        self.tasks.len()
    }

    /// Number of features.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn samples_per_task(&self) -> Vec<usize> {
        self.tasks.iter().map(Task::n).collect()
    }

    /// Total sample count `n = sum_i n_i`.
    pub fn total_samples(&self) -> usize {
        self.tasks.iter().map(Task::n).sum()
    }

    /// Stacked predictions `X_i w_i` in task order.
    pub fn predict(&self, w: &WeightMatrix) -> Result<Array1<f64>> {
        self.check_weights(w)?;
        let mut out = Vec::with_capacity(self.total_samples());
        for (i, task) in self.tasks.iter().enumerate() {
            out.extend(task.x.dot(&w.column(i)).iter().copied());
        }
        Ok(Array1::from(out))
    }

    /// Stacked responses in task order.
    pub fn stacked_responses(&self) -> Array1<f64> {
        self.tasks.iter().flat_map(|t| t.y.iter().copied()).collect()
    }

    pub(crate) fn check_weights(&self, w: &WeightMatrix) -> Result<()> {
        if w.d() != self.d || w.m() != self.m() {
            return Err(MtflError::Dimension(format!(
                "weight matrix is {}x{}, dataset needs {}x{}",
                w.d(),
                w.m(),
                self.d,
                self.m()
            )));
        }
        Ok(())
    }
}

/// `d x m` matrix of task weight vectors, stored column-major so that each
/// task's weights are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    pub fn zeros(d: usize, m: usize) -> Self {
        WeightMatrix(Array2::zeros((d, m).f()))
    }

    /// Wraps a `d x m` array. Fails if any entry is not finite.
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(MtflError::Numerical(format!(
                "weight matrix entry {bad} is not finite"
            )));
        }
        let mut stored = Array2::zeros(values.raw_dim().f());
        stored.assign(&values);
        Ok(WeightMatrix(stored))
    }

    /// Builds a matrix from per-task columns.
    pub fn from_columns(columns: &[Array1<f64>]) -> Result<Self> {
        let m = columns.len();
        let d = columns.first().map_or(0, |c| c.len());
        let mut w = Array2::zeros((d, m).f());
        for (i, col) in columns.iter().enumerate() {
            if col.len() != d {
                return Err(MtflError::Dimension(format!(
                    "column {i} has length {}, expected {d}",
                    col.len()
                )));
            }
            w.column_mut(i).assign(col);
        }
        Self::from_array(w)
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    /// Task weight vector `w_i`.
    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.column(i)
    }

    /// Feature weights across tasks, `w^j`.
    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.0.row(j)
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.0[[j, i]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    /// `sum_ij |W_ij|`.
    pub fn l11_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// `sum_j ||w^j||_2`.
    pub fn l21_norm(&self) -> f64 {
        self.0
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum()
    }
}

/// Row l1 norms `t_j = ||w^j||_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowNormVector(Vec<f64>);

impl RowNormVector {
    /// Wraps precomputed norms. Entries must be finite and nonnegative.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(MtflError::InvalidParameter(format!(
                "row norm {v} must be finite and nonnegative"
            )));
        }
        Ok(RowNormVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Per-row regularization weights `lambda_j`.
///
/// After any stage update every entry is either `0` or the base `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyVector {
    lambdas: Vec<f64>,
    base: f64,
}

impl PenaltyVector {
    /// All rows penalized with `lambda`.
    pub fn uniform(d: usize, lambda: f64) -> Self {
        PenaltyVector {
            lambdas: vec![lambda; d],
            base: lambda,
        }
    }

    /// `lambda_j = lambda * I(t_j < theta)`. The comparison is strict, so a
    /// row whose norm equals `theta` is treated as support.
    pub fn from_indicator(norms: &RowNormVector, lambda: f64, theta: f64) -> Self {
        let lambdas = norms
            .values()
            .iter()
            .map(|&t| if t < theta { lambda } else { 0.0 })
            .collect();
        PenaltyVector {
            lambdas,
            base: lambda,
        }
    }

    /// Arbitrary nonnegative weights. The two-valued invariant only holds for
    /// vectors produced by [`PenaltyVector::uniform`] and
    /// [`PenaltyVector::from_indicator`].
    pub fn from_values(lambdas: Vec<f64>) -> Result<Self> {
        if let Some(v) = lambdas.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(MtflError::InvalidParameter(format!(
                "penalty {v} must be finite and nonnegative"
            )));
        }
        let base = lambdas.iter().copied().fold(0.0, f64::max);
        Ok(PenaltyVector { lambdas, base })
    }

    pub fn values(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Number of rows with zero penalty (rows treated as support).
    pub fn unpenalized_count(&self) -> usize {
        self.lambdas.iter().filter(|&&l| l == 0.0).count()
    }
}

/// `l(W) = sum_i 1/(m n_i) ||X_i w_i - y_i||^2`.
pub fn quadratic_loss(data: &TaskDataset, w: &WeightMatrix) -> Result<f64> {
    data.check_weights(w)?;
    let m = data.m() as f64;
    let loss = data
        .tasks()
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let residual = task.x.dot(&w.column(i)) - &task.y;
            residual.dot(&residual) / (m * task.n() as f64)
        })
        .sum();
    Ok(loss)
}

pub fn row_l1_norms(w: &WeightMatrix) -> RowNormVector {
    RowNormVector(
        w.as_array()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum())
            .collect(),
    )
}

/// `l(W) + lambda * sum_j min(||w^j||_1, theta)`.
///
/// `theta` may be `+inf`, in which case the cap is inactive and this is the
/// l1,1-regularized objective.
pub fn capped_l1l1_objective(
    data: &TaskDataset,
    w: &WeightMatrix,
    lambda: f64,
    theta: f64,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(MtflError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(theta > 0.0) {
        return Err(MtflError::InvalidParameter(format!(
            "theta must be positive, got {theta}"
        )));
    }
    capped_objective_unchecked(data, w, lambda, theta)
}

/// Same as [`capped_l1l1_objective`] but accepts `theta = 0`, which the
/// adaptive threshold can produce.
pub(crate) fn capped_objective_unchecked(
    data: &TaskDataset,
    w: &WeightMatrix,
    lambda: f64,
    theta: f64,
) -> Result<f64> {
    let loss = quadratic_loss(data, w)?;
    let penalty: f64 = row_l1_norms(w).values().iter().map(|&t| t.min(theta)).sum();
    Ok(loss + lambda * penalty)
}
