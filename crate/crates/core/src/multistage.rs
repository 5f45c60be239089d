//! Multi-stage drivers: fixed-threshold MSMTFL and adaptive-threshold
//! MSMTFL-AT.
//!
//! Both start from the uniformly penalized (l1,1) problem. After each stage
//! the rows whose l1 norm reaches the threshold lose their penalty for the
//! next stage; the fixed driver uses a prescribed threshold, the adaptive
//! driver re-estimates it from the current solution with the first
//! significant jump rule.

use crate::error::{MtflError, Result};
use crate::model::{
    capped_objective_unchecked, row_l1_norms, PenaltyVector, RowNormVector, TaskDataset, WeightMatrix,
};
use crate::threshold::{compute_tau, first_significant_jump};
use crate::wlasso::{solve_weighted_l1, SolverOptions, SolverReport};

pub const DEFAULT_STAGES: usize = 10;

/// Multiples of `m * lambda` used as fixed thresholds in comparisons.
pub const THETA_PRESETS: [f64; 4] = [50.0, 10.0, 2.0, 0.4];

/// Sample count dividing `max_j t_j` in the jump cutoff `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauNormalization {
    /// Mean number of samples per task, rounded (`n` for equal-size tasks).
    #[default]
    PerTask,
    /// Total number of samples over all tasks.
    TotalSamples,
}

impl TauNormalization {
    pub fn sample_count(self, data: &TaskDataset) -> usize {
        let total = data.total_samples();
        match self {
            TauNormalization::TotalSamples => total,
            TauNormalization::PerTask => ((total as f64 / data.m() as f64).round() as usize).max(1),
        }
    }
}

/// `lambda = alpha * sqrt(ln(d m) / n)`.
pub fn lambda_from_alpha(alpha: f64, d: usize, m: usize, n: usize) -> f64 {
    alpha * (((d * m) as f64).ln() / n as f64).sqrt()
}

/// Fixed threshold `multiple * m * lambda`.
pub fn theta_from_preset(multiple: f64, m: usize, lambda: f64) -> f64 {
    multiple * m as f64 * lambda
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistageConfig {
    pub lambda: f64,
    /// Fixed threshold; required by [`run_msmtfl`], ignored by
    /// [`run_msmtfl_at`].
    pub theta: Option<f64>,
    pub stages: usize,
    /// Scales the adaptive jump cutoff `tau`.
    pub tau_multiplier: f64,
    pub tau_normalization: TauNormalization,
    /// Stop once the penalty vector repeats.
    pub early_stop: bool,
    pub solver: SolverOptions,
}

impl MultistageConfig {
    pub fn new(lambda: f64) -> Self {
        MultistageConfig {
            lambda,
            theta: None,
            stages: DEFAULT_STAGES,
            tau_multiplier: 1.0,
            tau_normalization: TauNormalization::default(),
            early_stop: false,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_stages(mut self, stages: usize) -> Self {
        self.stages = stages;
        self
    }

    pub fn with_tau_multiplier(mut self, tau_multiplier: f64) -> Self {
        self.tau_multiplier = tau_multiplier;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(MtflError::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.stages == 0 {
            return Err(MtflError::InvalidParameter("stages must be at least 1".into()));
        }
        if !(self.tau_multiplier > 0.0 && self.tau_multiplier.is_finite()) {
            return Err(MtflError::InvalidParameter(format!(
                "tau multiplier must be positive, got {}",
                self.tau_multiplier
            )));
        }
        self.solver.validate()
    }
}

/// Summary of the inner solve for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolve {
    pub total_sweeps: usize,
    pub max_kkt_residual: f64,
    pub converged: bool,
}

impl From<&SolverReport> for StageSolve {
    fn from(r: &SolverReport) -> Self {
        StageSolve {
            total_sweeps: r.total_sweeps(),
            max_kkt_residual: r.max_kkt_residual(),
            converged: r.all_converged(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    /// 1-based stage index.
    pub stage: usize,
    pub solution: WeightMatrix,
    pub row_norms: RowNormVector,
    /// Threshold used to form `penalties`; `+inf` when every row stays
    /// penalized.
    pub theta: f64,
    /// Jump cutoff (adaptive driver only).
    pub tau: Option<f64>,
    /// Penalties produced by this stage, used by the next one.
    pub penalties: PenaltyVector,
    /// Capped-l1,l1 objective at `solution` with this stage's `theta`.
    pub objective: f64,
    pub solve: StageSolve,
}

enum ThresholdRule {
    Fixed(f64),
    Adaptive { tau_multiplier: f64, samples: usize },
}

/// Multi-stage algorithm with a fixed threshold `config.theta`.
pub fn run_msmtfl(data: &TaskDataset, config: &MultistageConfig) -> Result<Vec<StageTrace>> {
    config.validate()?;
    let theta = config.theta.ok_or_else(|| {
        MtflError::InvalidParameter("fixed-threshold run requires theta".into())
    })?;
    if !(theta > 0.0) {
        return Err(MtflError::InvalidParameter(format!(
            "theta must be positive, got {theta}"
        )));
    }
    run_stages(data, config, ThresholdRule::Fixed(theta))
}

/// Multi-stage algorithm with the threshold re-estimated after every stage.
pub fn run_msmtfl_at(data: &TaskDataset, config: &MultistageConfig) -> Result<Vec<StageTrace>> {
    config.validate()?;
    run_stages(
        data,
        config,
        ThresholdRule::Adaptive {
            tau_multiplier: config.tau_multiplier,
            samples: config.tau_normalization.sample_count(data),
        },
    )
}

fn run_stages(
    data: &TaskDataset,
    config: &MultistageConfig,
    rule: ThresholdRule,
) -> Result<Vec<StageTrace>> {
    let lambda = config.lambda;
    let mut penalties = PenaltyVector::uniform(data.d(), lambda);
    let mut warm: Option<WeightMatrix> = None;
    let mut traces: Vec<StageTrace> = Vec::with_capacity(config.stages);

    for stage in 1..=config.stages {
        let mut options = config.solver.clone();
        options.warm_start = warm.take();
        let report = solve_weighted_l1(data, &penalties, &options)?;
        let norms = row_l1_norms(&report.solution);

        let (theta, tau) = match rule {
            ThresholdRule::Fixed(theta) => (theta, None),
            ThresholdRule::Adaptive {
                tau_multiplier,
                samples,
            } => {
                let tau = tau_multiplier * compute_tau(&norms, samples);
                (first_significant_jump(&norms, tau).theta, Some(tau))
            }
        };
        let next = PenaltyVector::from_indicator(&norms, lambda, theta);
        let objective = capped_objective_unchecked(data, &report.solution, lambda, theta)?;
        let repeated = next == penalties;

        traces.push(StageTrace {
            stage,
            solve: StageSolve::from(&report),
            solution: report.solution.clone(),
            row_norms: norms,
            theta,
            tau,
            penalties: next.clone(),
            objective,
        });
        if config.early_stop && repeated {
            break;
        }
        penalties = next;
        warm = Some(report.solution);
    }
    Ok(traces)
}
