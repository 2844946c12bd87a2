//! Hybrid-systems differential dynamic programming.
//!
//! Terminal equality constraints are handled with an augmented Lagrangian
//! outer loop and path inequalities with a reduced (relaxed log) barrier.
//! The inner loop is DDP with value-function propagation through phase
//! transitions, backtracking line search and Levenberg-style regularization
//! of `Q_uu`.

mod augment;
mod backward;
pub mod barrier;
mod forward;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

pub use augment::{augment_phase, augmented_cost, AugmentedPhase};
pub use backward::{
    backward_sweep, linearize, q_expansion, transition_value_update, value_step, BackwardResult, Linearization,
    StageDerivatives,
};
pub use barrier::{reduced_barrier, BarrierValue};
pub use forward::{forward_sweep, Candidate};
pub use solver::{inner_solve, outer_update, solve, write_trace_csv, InnerResult, Solution, TraceRow};

/// How the penalty term of the terminal augmentation is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// `(σ/2)² g²`.
    #[default]
    SquaredHalfSigma,
    /// `(σ/2) g²`.
    HalfSigma,
}

impl PenaltyForm {
    pub fn weight(self, sigma: f64) -> f64 {
        match self {
            PenaltyForm::SquaredHalfSigma => 0.25 * sigma * sigma,
            PenaltyForm::HalfSigma => 0.5 * sigma,
        }
    }
}

/// Which second-order dynamics terms enter `Q_xx`, `Q_uu`, `Q_ux`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    /// iLQR: tensor terms dropped.
    #[default]
    GaussNewton,
    /// Full DDP: analytic tensors when the model has them, else finite differences.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Regularization {
    pub initial: f64,
    /// Floor applied when decreasing; values below `bump` snap to it.
    pub min: f64,
    /// Smallest nonzero value used when increasing from zero.
    pub bump: f64,
    pub increase: f64,
    pub decrease: f64,
    pub max: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization {
            initial: 0.0,
            min: 0.0,
            bump: 1e-6,
            increase: 10.0,
            decrease: 5.0,
            max: 1e8,
        }
    }
}

impl Regularization {
    pub(crate) fn raise(&self, rho: f64) -> f64 {
        (rho * self.increase).max(self.bump).max(self.min)
    }

    pub(crate) fn lower(&self, rho: f64) -> f64 {
        let r = rho / self.decrease;
        if r < self.bump {
            self.min
        } else {
            r.max(self.min)
        }
    }
}

/// Solver settings that are not part of the multiplier state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    /// Stop the outer loop once `‖g‖₂` is at or below this.
    pub outer_tolerance: f64,
    /// Inner loop stops when the expected or actual improvement falls below
    /// `inner_tolerance · (1 + |cost|)`.
    pub inner_tolerance: f64,
    pub initial_lambda: f64,
    pub initial_sigma: f64,
    pub initial_delta: f64,
    pub beta_sigma: f64,
    pub beta_delta: f64,
    pub penalty: PenaltyForm,
    pub derivatives: DerivativeMode,
    pub regularization: Regularization,
    /// Step sizes tried are `1, 1/2, …, 2^-(line_search_steps-1)`.
    pub line_search_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_outer_iterations: 10,
            max_inner_iterations: 50,
            outer_tolerance: 1e-3,
            inner_tolerance: 1e-9,
            initial_lambda: 0.0,
            initial_sigma: 10.0,
            initial_delta: 0.1,
            beta_sigma: 5.0,
            beta_delta: 0.2,
            penalty: PenaltyForm::default(),
            derivatives: DerivativeMode::default(),
            regularization: Regularization::default(),
            line_search_steps: 11,
        }
    }
}

impl SolverOptions {
    pub fn with_caps(mut self, outer: usize, inner: usize) -> Self {
        self.max_outer_iterations = outer;
        self.max_inner_iterations = inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 || self.max_inner_iterations == 0 {
            return Err(Error::Parameter("iteration caps must be at least 1".into()));
        }
        if self.line_search_steps == 0 {
            return Err(Error::Parameter("line search needs at least one step".into()));
        }
        if !(self.regularization.increase > 1.0 && self.regularization.decrease > 1.0) {
            return Err(Error::Parameter("regularization factors must exceed 1".into()));
        }
        Ok(())
    }
}

/// Per-phase multipliers, penalties and barrier relaxations plus the
/// outer-loop schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALReBParams {
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    pub beta_sigma: f64,
    pub beta_delta: f64,
    pub outer_tolerance: f64,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
}

impl ALReBParams {
    pub fn new(num_phases: usize, options: &SolverOptions) -> Result<Self> {
        let p = ALReBParams {
            lambda: vec![options.initial_lambda; num_phases],
            sigma: vec![options.initial_sigma; num_phases],
            delta: vec![options.initial_delta; num_phases],
            beta_sigma: options.beta_sigma,
            beta_delta: options.beta_delta,
            outer_tolerance: options.outer_tolerance,
            max_outer_iterations: options.max_outer_iterations,
            max_inner_iterations: options.max_inner_iterations,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lambda.len();
        if self.sigma.len() != n || self.delta.len() != n {
            return Err(Error::Parameter("multiplier vectors differ in length".into()));
        }
        if self.sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Parameter("penalty coefficients must be positive".into()));
        }
        if self.delta.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Parameter("barrier relaxations must be positive".into()));
        }
        if !(self.beta_sigma > 1.0) {
            return Err(Error::Parameter("beta_sigma must exceed 1".into()));
        }
        if !(self.beta_delta > 0.0 && self.beta_delta < 1.0) {
            return Err(Error::Parameter("beta_delta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Quadratic model of the cost-to-go around the nominal trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueExpansion {
    pub hessian: Matrix,
    pub gradient: Vector,
    pub scalar: f64,
}

impl ValueExpansion {
    pub fn zeros(n: usize) -> Self {
        ValueExpansion {
            hessian: Matrix::zeros(n, n),
            gradient: Vector::zeros(n),
            scalar: 0.0,
        }
    }
}

/// `δu = κ + K δx`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolicy {
    pub feedforward: Vector,
    pub gain: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QExpansion {
    pub qx: Vector,
    pub qu: Vector,
    pub qxx: Matrix,
    pub quu: Matrix,
    /// Shape (control × tangent).
    pub qux: Matrix,
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}
