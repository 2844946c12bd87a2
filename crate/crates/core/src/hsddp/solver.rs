use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::multiphase::{rollout, MultiPhaseProblem, PhaseTrajectory};
use crate::{Matrix, Vector};

use super::augment::{augment_phase, augmented_cost, AugmentedPhase};
use super::backward::{backward_sweep, linearize, BackwardResult};
use super::forward::forward_sweep;
use super::{ALReBParams, AffinePolicy, SolverOptions};

/// One inner DDP iteration, as written to iteration traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub cost: f64,
    pub g_norm: f64,
    pub rho: f64,
    /// Accepted step size, 0 when the line search failed or no step was taken.
    pub alpha: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut w: W) -> io::Result<()> {
    writeln!(w, "outer_iter,inner_iter,cost,g_norm,rho,alpha")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.12e},{:.12e},{:.6e},{:.6e}",
            r.outer_iter, r.inner_iter, r.cost, r.g_norm, r.rho, r.alpha
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub trajectories: Vec<PhaseTrajectory>,
    /// Policies from the last successful backward sweep.
    pub policies: Vec<Vec<AffinePolicy>>,
    pub augmented_cost: f64,
    /// Backward sweeps performed.
    pub iterations: usize,
    pub accepted_steps: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub rho: f64,
    pub trace: Vec<TraceRow>,
}

impl InnerResult {
    pub fn controls(&self) -> Vec<Vec<Vector>> {
        self.trajectories.iter().map(|t| t.controls.clone()).collect()
    }
}

pub(crate) fn constraint_values(problem: &MultiPhaseProblem, trajectories: &[PhaseTrajectory]) -> Vec<f64> {
    problem
        .phases
        .iter()
        .zip(trajectories)
        .map(|(p, t)| p.terminal_constraint_value(t.terminal_state()))
        .collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn zero_policies(problem: &MultiPhaseProblem) -> Vec<Vec<AffinePolicy>> {
    problem
        .phases
        .iter()
        .map(|p| {
            vec![
                AffinePolicy {
                    feedforward: Vector::zeros(p.control_dim),
                    gain: Matrix::zeros(p.control_dim, p.tangent_dim()),
                };
                p.horizon
            ]
        })
        .collect()
}

/// Minimize the augmented objective for fixed multipliers with DDP.
///
/// Accepted steps strictly decrease the augmented cost. Running out of
/// regularization or iterations yields `converged = false` with the last
/// accepted iterate rather than an error.
pub fn inner_solve(
    problem: &MultiPhaseProblem,
    params: &ALReBParams,
    options: &SolverOptions,
    initial_controls: &[Vec<Vector>],
) -> Result<InnerResult> {
    inner_solve_traced(problem, params, options, initial_controls, 0)
}

fn inner_solve_traced(
    problem: &MultiPhaseProblem,
    params: &ALReBParams,
    options: &SolverOptions,
    initial_controls: &[Vec<Vector>],
    outer_iter: usize,
) -> Result<InnerResult> {
    options.validate()?;
    params.validate()?;
    if params.lambda.len() != problem.phases.len() {
        return Err(Error::Config(format!(
            "{} multipliers for {} phases",
            params.lambda.len(),
            problem.phases.len()
        )));
    }
    let augmented: Vec<AugmentedPhase<'_>> = problem
        .phases
        .iter()
        .enumerate()
        .map(|(i, p)| augment_phase(p, params, i, options.penalty))
        .collect();

    let mut trajectories = rollout(problem, initial_controls)?;
    let mut cost = augmented_cost(problem, params, options.penalty, &trajectories)?;
    if !cost.is_finite() {
        return Err(Error::RolloutDivergence { phase: 0, step: 0 });
    }
    let reg = &options.regularization;
    let mut rho = reg.initial;
    let mut policies: Option<Vec<Vec<AffinePolicy>>> = None;
    let mut iterations = 0;
    let mut accepted_steps = 0;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;
    let mut trace = Vec::new();
    let threshold = |c: f64| options.inner_tolerance * (1.0 + c.abs());

    while iterations < params.max_inner_iterations {
        let lin = linearize(problem, &augmented, &trajectories, options.derivatives)?;
        let mut back: Option<BackwardResult> = None;
        while rho <= reg.max {
            match backward_sweep(problem, &trajectories, &lin, rho, options.derivatives)? {
                Some(b) => {
                    back = Some(b);
                    break;
                }
                None => rho = reg.raise(rho),
            }
        }
        iterations += 1;
        let Some(back) = back else {
            break;
        };
        gradient_norm = back.gradient_norm;
        let expected = back.expected_change;
        let policies_now = back.policies;

        if expected.abs() <= threshold(cost) {
            policies = Some(policies_now);
            converged = true;
            trace.push(TraceRow {
                outer_iter,
                inner_iter: iterations,
                cost,
                g_norm: norm2(&constraint_values(problem, &trajectories)),
                rho,
                alpha: 0.0,
            });
            break;
        }

        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..options.line_search_steps {
            if let Ok(cand) = forward_sweep(problem, &augmented, &trajectories, &policies_now, alpha) {
                if cand.augmented_cost < cost {
                    accepted = Some(cand);
                    break;
                }
            }
            alpha *= 0.5;
        }
        policies = Some(policies_now);

        match accepted {
            Some(cand) => {
                let improvement = cost - cand.augmented_cost;
                trajectories = cand.trajectories;
                cost = cand.augmented_cost;
                accepted_steps += 1;
                rho = reg.lower(rho);
                trace.push(TraceRow {
                    outer_iter,
                    inner_iter: iterations,
                    cost,
                    g_norm: norm2(&constraint_values(problem, &trajectories)),
                    rho,
                    alpha,
                });
                if improvement <= threshold(cost) {
                    converged = true;
                    break;
                }
            }
            None => {
                trace.push(TraceRow {
                    outer_iter,
                    inner_iter: iterations,
                    cost,
                    g_norm: norm2(&constraint_values(problem, &trajectories)),
                    rho,
                    alpha: 0.0,
                });
                rho = reg.raise(rho);
                if rho > reg.max {
                    break;
                }
            }
        }
    }

    Ok(InnerResult {
        policies: policies.unwrap_or_else(|| zero_policies(problem)),
        trajectories,
        augmented_cost: cost,
        iterations,
        accepted_steps,
        converged,
        gradient_norm,
        rho,
        trace,
    })
}

/// `σ ← β_σ σ`, `λ ← λ + σ ∘ g` (with the σ from before this update),
/// `δ ← β_δ δ`.
pub fn outer_update(params: &ALReBParams, g: &[f64]) -> ALReBParams {
    let mut next = params.clone();
    for i in 0..params.lambda.len() {
        let gi = g.get(i).copied().unwrap_or(0.0);
        next.lambda[i] = params.lambda[i] + params.sigma[i] * gi;
        next.sigma[i] = params.beta_sigma * params.sigma[i];
        next.delta[i] = params.beta_delta * params.delta[i];
    }
    next
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectories: Vec<PhaseTrajectory>,
    pub policies: Vec<Vec<AffinePolicy>>,
    /// Multipliers after the last outer update.
    pub params: ALReBParams,
    /// `‖g‖₂` after each outer iteration.
    pub g_history: Vec<f64>,
    /// Raw objective `Σ J_i` after each outer iteration.
    pub cost_history: Vec<f64>,
    pub outer_iterations: usize,
    /// Backward sweeps summed over all outer iterations.
    pub inner_iterations: usize,
    /// `‖g‖₂ <= tol` at exit.
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl Solution {
    pub fn total_cost(&self) -> f64 {
        self.trajectories.iter().map(|t| t.cost).sum()
    }

    pub fn controls(&self) -> Vec<Vec<Vector>> {
        self.trajectories.iter().map(|t| t.controls.clone()).collect()
    }
}

/// Alternate inner DDP solves and multiplier updates until the terminal
/// constraints are met or the outer budget is spent.
pub fn solve(
    problem: &MultiPhaseProblem,
    params: &ALReBParams,
    options: &SolverOptions,
    initial_controls: &[Vec<Vector>],
) -> Result<Solution> {
    let mut params = params.clone();
    let mut controls = initial_controls.to_vec();
    let mut g_history = Vec::new();
    let mut cost_history = Vec::new();
    let mut trace = Vec::new();
    let mut inner_iterations = 0;
    let mut last: Option<InnerResult> = None;
    let mut converged = false;

    for outer in 0..params.max_outer_iterations {
        let inner = inner_solve_traced(problem, &params, options, &controls, outer + 1)?;
        inner_iterations += inner.iterations;
        trace.extend_from_slice(&inner.trace);
        let g = constraint_values(problem, &inner.trajectories);
        let g_norm = norm2(&g);
        g_history.push(g_norm);
        cost_history.push(inner.trajectories.iter().map(|t| t.cost).sum());
        controls = inner.controls();
        last = Some(inner);
        if g_norm <= params.outer_tolerance {
            converged = true;
            break;
        }
        if outer + 1 < params.max_outer_iterations {
            params = outer_update(&params, &g);
        }
    }

    let inner = last.expect("at least one outer iteration");
    Ok(Solution {
        outer_iterations: g_history.len(),
        trajectories: inner.trajectories,
        policies: inner.policies,
        params,
        g_history,
        cost_history,
        inner_iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_update_arithmetic() {
        let opts = SolverOptions {
            beta_sigma: 10.0,
            beta_delta: 0.5,
            initial_sigma: 1.0,
            initial_delta: 0.2,
            ..SolverOptions::default()
        };
        let p = ALReBParams::new(2, &opts).unwrap();
        let next = outer_update(&p, &[0.0, 0.3]);
        assert_eq!(next.sigma, vec![10.0, 10.0]);
        assert_eq!(next.delta, vec![0.1, 0.1]);
        assert_eq!(next.lambda[0], 0.0);
        // pre-update σ = 1
        assert_eq!(next.lambda[1], 0.3);
    }

    #[test]
    fn trace_csv_header() {
        let mut buf = Vec::new();
        write_trace_csv(
            &[TraceRow {
                outer_iter: 1,
                inner_iter: 2,
                cost: 3.0,
                g_norm: 0.5,
                rho: 0.0,
                alpha: 1.0,
            }],
            &mut buf,
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("outer_iter,inner_iter,cost,g_norm,rho,alpha"));
        assert!(lines.next().unwrap().starts_with("1,2,"));
    }
}
