//! Weighted-l1 least squares solver for one stage of the multi-stage scheme.
//!
//! The stage problem `min_W l(W) + sum_j lambda_j ||w^j||_1` separates over
//! tasks. For task `i` it reads
//!
//! ```text
//! 1/(m n_i) ||X_i w - y_i||^2 + sum_j lambda_j |w_j|
//! ```
//!
//! Multiplying by `m n_i / 2` gives the standard Lasso form
//! `1/2 ||X_i w - y_i||^2 + sum_j (lambda_j m n_i / 2) |w_j|`, which is what
//! the coordinate updates work with (see [`effective_penalty`]). Optimality is
//! checked in the original scaling through the KKT residual.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};
use rayon::prelude::*;

use crate::error::{MtflError, Result};
use crate::model::{PenaltyVector, TaskDataset, WeightMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// KKT residual at which a task counts as converged.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub warm_start: Option<WeightMatrix>,
    /// Record the task objective after every sweep.
    pub track_objective: bool,
    /// Solve tasks on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            warm_start: None,
            track_objective: false,
            parallel: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(MtflError::InvalidParameter(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_sweeps == 0 {
            return Err(MtflError::InvalidParameter("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_warm_start(mut self, w: WeightMatrix) -> Self {
        self.warm_start = Some(w);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub solution: WeightMatrix,
    pub sweeps_used: Vec<usize>,
    pub kkt_residual: Vec<f64>,
    pub converged: Vec<bool>,
    /// Per task, the objective after each sweep (index 0 is the start
    /// point). Empty unless `track_objective` was set.
    pub objective_history: Vec<Vec<f64>>,
}

impl SolverReport {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn total_sweeps(&self) -> usize {
        self.sweeps_used.iter().sum()
    }

    pub fn max_kkt_residual(&self) -> f64 {
        self.kkt_residual.iter().copied().fold(0.0, f64::max)
    }
}

/// `sign(a) * max(|a| - b, 0)`, the proximal map of `b |.|`.
#[inline]
pub fn soft_threshold(a: f64, b: f64) -> f64 {
    debug_assert!(b >= 0.0);
    if a > b {
        a - b
    } else if a < -b {
        a + b
    } else {
        0.0
    }
}

/// Penalty on `|w_j|` in the `1/2 ||X w - y||^2` form of a task subproblem.
#[inline]
pub fn effective_penalty(lambda_j: f64, m: usize, n_i: usize) -> f64 {
    lambda_j * (m * n_i) as f64 / 2.0
}

struct TaskResult {
    w: Array1<f64>,
    sweeps: usize,
    kkt: f64,
    converged: bool,
    history: Vec<f64>,
}

/// Solves `min_W l(W) + sum_j lambda_j ||w^j||_1` by cyclic coordinate
/// descent, independently for each task.
pub fn solve_weighted_l1(
    data: &TaskDataset,
    penalties: &PenaltyVector,
    options: &SolverOptions,
) -> Result<SolverReport> {
    options.validate()?;
    let d = data.d();
    let m = data.m();
    if penalties.len() != d {
        return Err(MtflError::Dimension(format!(
            "penalty vector has length {}, dataset has {d} features",
            penalties.len()
        )));
    }
    if let Some(w0) = &options.warm_start {
        data.check_weights(w0)?;
    }

    let solve = |i: usize| {
        let task = data.task(i);
        let start = options.warm_start.as_ref().map(|w| w.column(i));
        solve_task(
            task.x.view(),
            task.y.view(),
            penalties.values(),
            m,
            start,
            options,
        )
    };
    let results: Vec<TaskResult> = if options.parallel {
        (0..m).into_par_iter().map(solve).collect()
    } else {
        (0..m).map(solve).collect()
    };

    let columns: Vec<Array1<f64>> = results.iter().map(|r| r.w.clone()).collect();
    let solution = WeightMatrix::from_columns(&columns)?;
    Ok(SolverReport {
        solution,
        sweeps_used: results.iter().map(|r| r.sweeps).collect(),
        kkt_residual: results.iter().map(|r| r.kkt).collect(),
        converged: results.iter().map(|r| r.converged).collect(),
        objective_history: results.into_iter().map(|r| r.history).collect(),
    })
}

fn solve_task(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambdas: &[f64],
    m: usize,
    start: Option<ArrayView1<'_, f64>>,
    options: &SolverOptions,
) -> TaskResult {
    let n = x.nrows();
    let d = x.ncols();
    // column-major copy so each coordinate touches contiguous memory
    let mut xc = Array2::<f64>::zeros((n, d).f());
    xc.assign(&x);
    let col_sq: Vec<f64> = (0..d).map(|j| xc.column(j).dot(&xc.column(j))).collect();
    let eff: Vec<f64> = lambdas.iter().map(|&l| effective_penalty(l, m, n)).collect();
    let grad_scale = 2.0 / (m * n) as f64;

    let mut w = match start {
        Some(s) => s.to_owned(),
        None => Array1::zeros(d),
    };
    for (j, wj) in w.iter_mut().enumerate() {
        if col_sq[j] == 0.0 {
            *wj = 0.0;
        }
    }

    let objective = |r: &Array1<f64>, w: &Array1<f64>| {
        r.dot(r) / (m * n) as f64
            + w.iter().zip(lambdas).map(|(wj, l)| l * wj.abs()).sum::<f64>()
    };

    let mut r = &y - &xc.dot(&w);
    let mut history = Vec::new();
    if options.track_objective {
        history.push(objective(&r, &w));
    }
    let mut kkt = kkt_residual(&xc, &r, &w, lambdas, grad_scale);
    let mut sweeps = 0;
    while kkt > options.tolerance && sweeps < options.max_sweeps {
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let old = w[j];
            let rho = col.dot(&r) + col_sq[j] * old;
            let new = soft_threshold(rho, eff[j]) / col_sq[j];
            if new != old {
                r.scaled_add(old - new, &col);
                w[j] = new;
            }
        }
        sweeps += 1;
        // refresh the residual to stop drift from incremental updates
        r = &y - &xc.dot(&w);
        if options.track_objective {
            history.push(objective(&r, &w));
        }
        kkt = kkt_residual(&xc, &r, &w, lambdas, grad_scale);
    }

    TaskResult {
        w,
        sweeps,
        converged: kkt <= options.tolerance,
        kkt,
        history,
    }
}

/// Largest violation of the weighted-Lasso optimality conditions, with
/// `g = 2/(m n) X^T (X w - y)`:
/// `|g_j| <= lambda_j` where `w_j = 0`, `g_j = -sign(w_j) lambda_j` elsewhere.
fn kkt_residual(
    x: &Array2<f64>,
    r: &Array1<f64>,
    w: &Array1<f64>,
    lambdas: &[f64],
    grad_scale: f64,
) -> f64 {
    let mut worst = 0.0_f64;
    for (j, (&wj, &lj)) in w.iter().zip(lambdas).enumerate() {
        let g = -grad_scale * x.column(j).dot(r);
        let violation = if wj == 0.0 {
            (g.abs() - lj).max(0.0)
        } else {
            (g + wj.signum() * lj).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

/// KKT residual of `w` for the weighted problem, computed from scratch.
/// Exposed for verification.
pub fn weighted_l1_kkt(
    data: &TaskDataset,
    penalties: &PenaltyVector,
    w: &WeightMatrix,
) -> Result<Vec<f64>> {
    data.check_weights(w)?;
    let m = data.m();
    Ok(data
        .tasks()
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let wi = w.column(i).to_owned();
            let r = &task.y - &task.x.dot(&wi);
            kkt_residual(
                &task.x.to_owned(),
                &r,
                &wi,
                penalties.values(),
                2.0 / (m * task.n()) as f64,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{quadratic_loss, Task};
    use ndarray::array;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
        for x in [-3.5, 0.0, 1e-300, 7.25] {
            assert_eq!(soft_threshold(x, 0.0), x);
        }
    }

    #[test]
    fn effective_penalty_mapping() {
        // 1/(m n) ||r||^2 + lambda |w|  ==  (2/(m n)) * (1/2 ||r||^2 + lambda m n / 2 |w|)
        let (m, n, lambda) = (4, 7, 0.3);
        let eff = effective_penalty(lambda, m, n);
        let (r2, w) = (2.5_f64, -1.25_f64);
        let original = r2 / (m * n) as f64 + lambda * w.abs();
        let lasso_form = 0.5 * r2 + eff * w.abs();
        assert!((original - 2.0 / (m * n) as f64 * lasso_form).abs() < 1e-15);
    }

    #[test]
    fn huge_penalty_gives_zero() {
        let data = crate::model::tests::toy();
        let report = solve_weighted_l1(&data, &PenaltyVector::uniform(2, 1e3), &opts()).unwrap();
        assert!(report.solution.as_array().iter().all(|&v| v == 0.0));
        assert!(report.all_converged());
    }

    #[test]
    fn unpenalized_square_system() {
        let x = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let truth = array![1.0, -2.0, 0.5];
        let y = x.dot(&truth);
        let data = TaskDataset::new(vec![Task { x, y }]).unwrap();
        let report = solve_weighted_l1(&data, &PenaltyVector::uniform(3, 0.0), &opts()).unwrap();
        assert!(report.all_converged());
        for j in 0..3 {
            assert!((report.solution.get(j, 0) - truth[j]).abs() < 1e-6);
        }
        assert!(quadratic_loss(&data, &report.solution).unwrap() < 1e-12);
    }

    #[test]
    fn zero_column_stays_zero() {
        let x = array![[1.0, 0.0], [2.0, 0.0]];
        let y = array![1.0, 2.0];
        let data = TaskDataset::new(vec![Task { x, y }]).unwrap();
        let report = solve_weighted_l1(&data, &PenaltyVector::uniform(2, 0.0), &opts()).unwrap();
        assert_eq!(report.solution.get(1, 0), 0.0);
        assert!((report.solution.get(0, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_at_optimum_is_untouched() {
        let data = crate::model::tests::toy();
        let p = PenaltyVector::uniform(2, 0.05);
        let first = solve_weighted_l1(&data, &p, &opts()).unwrap();
        let again = solve_weighted_l1(
            &data,
            &p,
            &opts().with_warm_start(first.solution.clone()),
        )
        .unwrap();
        assert_eq!(again.sweeps_used, vec![0, 0]);
        assert_eq!(again.solution, first.solution);
    }

    #[test]
    fn non_convergence_is_reported() {
        let data = crate::model::tests::toy();
        let options = SolverOptions {
            max_sweeps: 1,
            tolerance: 1e-300,
            ..opts()
        };
        let report = solve_weighted_l1(&data, &PenaltyVector::uniform(2, 0.01), &options).unwrap();
        assert!(!report.all_converged());
        assert_eq!(report.sweeps_used, vec![1, 1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = crate::model::tests::toy();
        assert!(solve_weighted_l1(&data, &PenaltyVector::uniform(3, 0.1), &opts()).is_err());
        let bad = SolverOptions {
            tolerance: 0.0,
            ..opts()
        };
        assert!(solve_weighted_l1(&data, &PenaltyVector::uniform(2, 0.1), &bad).is_err());
        let warm = opts().with_warm_start(WeightMatrix::zeros(2, 3));
        assert!(solve_weighted_l1(&data, &PenaltyVector::uniform(2, 0.1), &warm).is_err());
    }
}
