//! Convex comparison models: l1,1 Lasso and l2,1-regularized learning.

use ndarray::{Array1, Array2, Axis, ShapeBuilder, Zip};

use crate::error::{MtflError, Result};
use crate::model::{quadratic_loss, PenaltyVector, TaskDataset, WeightMatrix};
use crate::wlasso::{solve_weighted_l1, SolverOptions, SolverReport};

/// Minimizer of `l(W) + lambda ||W||_{1,1}`.
///
/// Runs the same solver path as the first stage of the multi-stage drivers,
/// so with the same options the result is bit-identical to theirs.
pub fn solve_lasso_l11(
    data: &TaskDataset,
    lambda: f64,
    options: &SolverOptions,
) -> Result<WeightMatrix> {
    Ok(solve_lasso_l11_report(data, lambda, options)?.solution)
}

pub fn solve_lasso_l11_report(
    data: &TaskDataset,
    lambda: f64,
    options: &SolverOptions,
) -> Result<SolverReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(MtflError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    solve_weighted_l1(data, &PenaltyVector::uniform(data.d(), lambda), options)
}

#[derive(Debug, Clone, PartialEq)]
pub struct L21Options {
    pub lambda: f64,
    pub max_iterations: usize,
    /// Relative objective change at which iteration stops.
    pub tolerance: f64,
    /// Overrides the power-iteration Lipschitz estimate.
    pub lipschitz: Option<f64>,
}

impl L21Options {
    pub fn new(lambda: f64) -> Self {
        L21Options {
            lambda,
            max_iterations: 5000,
            tolerance: 1e-9,
            lipschitz: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(MtflError::InvalidParameter(format!(
                "l2,1 lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(MtflError::InvalidParameter(
                "l2,1 tolerance and max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L21Report {
    pub solution: WeightMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Objective of the kept iterate after each iteration, starting at zero.
    pub objective_history: Vec<f64>,
    pub final_step: f64,
}

/// `l(W) + lambda sum_j ||w^j||_2`.
pub fn l21_objective(data: &TaskDataset, w: &WeightMatrix, lambda: f64) -> Result<f64> {
    Ok(quadratic_loss(data, w)? + lambda * w.l21_norm())
}

/// Row-wise shrinkage `w^j -> max(0, 1 - threshold / ||w^j||_2) w^j`, the
/// proximal map of `threshold * sum_j ||w^j||_2`.
pub fn row_shrink(w: &Array2<f64>, threshold: f64) -> Array2<f64> {
    let mut out = w.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm <= threshold {
            row.fill(0.0);
        } else {
            row *= 1.0 - threshold / norm;
        }
    }
    out
}

/// Largest eigenvalue of `X^T X` by power iteration.
fn top_eigenvalue(x: &Array2<f64>) -> f64 {
    let d = x.ncols();
    let mut v = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..200 {
        let u = x.t().dot(&x.dot(&v));
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&u);
        v = u / norm;
        if (next - estimate).abs() <= 1e-10 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Lipschitz constant of the gradient of `l(W)`:
/// `2 max_i sigma_max(X_i)^2 / (m n_i)`.
pub fn loss_lipschitz(data: &TaskDataset) -> f64 {
    let m = data.m() as f64;
    data.tasks()
        .iter()
        .map(|t| 2.0 * top_eigenvalue(&t.x) / (m * t.n() as f64))
        .fold(0.0, f64::max)
}

fn loss_and_gradient(data: &TaskDataset, w: &Array2<f64>) -> (f64, Array2<f64>) {
    let m = data.m() as f64;
    let mut grad = Array2::zeros(w.raw_dim().f());
    let mut loss = 0.0;
    for (i, task) in data.tasks().iter().enumerate() {
        let scale = 1.0 / (m * task.n() as f64);
        let residual = task.x.dot(&w.column(i)) - &task.y;
        loss += scale * residual.dot(&residual);
        grad.column_mut(i).assign(&(task.x.t().dot(&residual) * (2.0 * scale)));
    }
    (loss, grad)
}

fn loss_only(data: &TaskDataset, w: &Array2<f64>) -> f64 {
    let m = data.m() as f64;
    data.tasks()
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let residual = task.x.dot(&w.column(i)) - &task.y;
            residual.dot(&residual) / (m * task.n() as f64)
        })
        .sum()
}

fn l21_norm(w: &Array2<f64>) -> f64 {
    w.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

/// Accelerated proximal gradient for the l2,1-regularized model.
///
/// Monotone variant: the kept iterate only moves when the objective does not
/// increase, so the recorded objective is nonincreasing. The step starts at
/// `1/L` and is halved whenever the quadratic upper bound fails.
pub fn solve_l21(data: &TaskDataset, options: &L21Options) -> Result<L21Report> {
    options.validate()?;
    let lambda = options.lambda;
    let (d, m) = (data.d(), data.m());
    let lipschitz = options.lipschitz.unwrap_or_else(|| loss_lipschitz(data));
    let mut step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut x = Array2::<f64>::zeros((d, m).f());
    let mut fx = loss_only(data, &x) + lambda * l21_norm(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut history = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let (fy, grad) = loss_and_gradient(data, &y);
        let (z, fz_loss) = loop {
            let z = row_shrink(&(&y - &(&grad * step)), step * lambda);
            let diff = &z - &y;
            let fz = loss_only(data, &z);
            let bound = fy + (&grad * &diff).sum() + diff.iter().map(|v| v * v).sum::<f64>() / (2.0 * step);
            if fz <= bound + 1e-12 * fy.abs().max(1.0) || step < 1e-30 {
                break (z, fz);
            }
            step *= 0.5;
        };
        let fz = fz_loss + lambda * l21_norm(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let accepted = fz <= fx;
        let x_next = if accepted { z.clone() } else { x.clone() };
        let mut y_next = x_next.clone();
        Zip::from(&mut y_next)
            .and(&z)
            .and(&x_next)
            .and(&x)
            .for_each(|yn, &zv, &xn, &xo| {
                *yn += (t / t_next) * (zv - xn) + ((t - 1.0) / t_next) * (xn - xo);
            });

        let previous = fx;
        x = x_next;
        if accepted {
            fx = fz;
        }
        y = y_next;
        t = t_next;
        history.push(fx);

        if accepted && (previous - fx).abs() <= options.tolerance * fx.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    if x.iter().any(|v| !v.is_finite()) {
        return Err(MtflError::Numerical("l2,1 iterate diverged".into()));
    }
    Ok(L21Report {
        solution: WeightMatrix::from_array(x)?,
        iterations,
        converged,
        objective_history: history,
        final_step: step,
    })
}
