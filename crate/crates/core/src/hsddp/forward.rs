use crate::error::{Error, Result};
use crate::multiphase::{MultiPhaseProblem, PhaseTrajectory};
use crate::Vector;

use super::augment::AugmentedPhase;
use super::AffinePolicy;

#[derive(Debug, Clone)]
pub struct Candidate {
    pub trajectories: Vec<PhaseTrajectory>,
    pub augmented_cost: f64,
}

/// Roll out `u_k = ū_k + α κ_k + K_k (x_k ⊖ x̄_k)` through all phases and
/// transitions. Divergence is reported as an error so the line search can
/// treat the trial as failed.
pub fn forward_sweep(
    problem: &MultiPhaseProblem,
    augmented: &[AugmentedPhase<'_>],
    nominal: &[PhaseTrajectory],
    policies: &[Vec<AffinePolicy>],
    alpha: f64,
) -> Result<Candidate> {
    let mut out = Vec::with_capacity(problem.phases.len());
    let mut x = problem.initial_state.clone();
    let mut total = 0.0;
    for (i, phase) in problem.phases.iter().enumerate() {
        if i > 0 {
            x = problem.phases[i - 1].transition_state(&x);
        }
        let aug = &augmented[i];
        let nom = &nominal[i];
        let mut states = Vec::with_capacity(phase.horizon + 1);
        let mut controls = Vec::with_capacity(phase.horizon);
        let mut cost = 0.0;
        states.push(x.clone());
        for k in 0..phase.horizon {
            let policy = &policies[i][k];
            let dx = phase.space.difference(&x, &nom.states[k]);
            let u: Vector = &nom.controls[k] + &policy.feedforward * alpha + &policy.gain * dx;
            let l = phase.running_cost.value(k, &x, &u);
            cost += l;
            total += l + aug.barrier_value(k, &x, &u);
            x = phase.dynamics.step(k, &x, &u);
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::RolloutDivergence { phase: i, step: k + 1 });
            }
            states.push(x.clone());
            controls.push(u);
        }
        cost += phase.terminal_cost.value(&x);
        total += aug.terminal_value(&x);
        out.push(PhaseTrajectory { states, controls, cost });
    }
    if !total.is_finite() {
        return Err(Error::RolloutDivergence {
            phase: problem.phases.len() - 1,
            step: problem.phases.last().map_or(0, |p| p.horizon),
        });
    }
    Ok(Candidate {
        trajectories: out,
        augmented_cost: total,
    })
}
