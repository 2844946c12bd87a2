use crate::error::{Error, Result};
use crate::multiphase::{CostDerivatives, MultiPhaseProblem, PhaseDefinition, PhaseTrajectory};
use crate::{Matrix, Vector};

use super::barrier::reduced_barrier;
use super::{ALReBParams, DerivativeMode, PenaltyForm};

/// One phase with its running cost augmented by barrier terms,
/// `L = ℓ + Σ_j B_δ(h_j)`, and its terminal cost augmented by the
/// constraint terms, `Φ = φ + w(σ) g² + λ g`.
#[derive(Clone, Copy)]
pub struct AugmentedPhase<'a> {
    pub phase: &'a PhaseDefinition,
    pub lambda: f64,
    pub sigma: f64,
    pub delta: f64,
    pub penalty: PenaltyForm,
}

pub fn augment_phase<'a>(
    phase: &'a PhaseDefinition,
    params: &ALReBParams,
    index: usize,
    penalty: PenaltyForm,
) -> AugmentedPhase<'a> {
    AugmentedPhase {
        phase,
        lambda: params.lambda[index],
        sigma: params.sigma[index],
        delta: params.delta[index],
        penalty,
    }
}

impl<'a> AugmentedPhase<'a> {
    pub fn barrier_value(&self, k: usize, x: &Vector, u: &Vector) -> f64 {
        match &self.phase.path_constraints {
            None => 0.0,
            Some(h) => h
                .value(k, x, u)
                .iter()
                .map(|&z| reduced_barrier(z, self.delta).map_or(f64::INFINITY, |b| b.value))
                .sum(),
        }
    }

    pub fn running_value(&self, k: usize, x: &Vector, u: &Vector) -> f64 {
        self.phase.running_cost.value(k, x, u) + self.barrier_value(k, x, u)
    }

    /// Barrier curvature enters in Gauss-Newton form, `B''(h) h_zᵀ h_z`.
    pub fn running_derivatives(&self, k: usize, x: &Vector, u: &Vector) -> Result<CostDerivatives> {
        let mut d = self.phase.running_cost.derivatives(k, x, u);
        if let Some(h) = &self.phase.path_constraints {
            let values = h.value(k, x, u);
            let (hx, hu) = h.jacobians(k, x, u);
            let mut w1 = Vector::zeros(values.len());
            let mut w2 = Vector::zeros(values.len());
            for (j, &z) in values.iter().enumerate() {
                let b = reduced_barrier(z, self.delta)?;
                w1[j] = b.first;
                w2[j] = b.second;
            }
            d.lx += hx.transpose() * &w1;
            d.lu += hu.transpose() * &w1;
            let whx = Matrix::from_fn(hx.nrows(), hx.ncols(), |r, c| w2[r] * hx[(r, c)]);
            let whu = Matrix::from_fn(hu.nrows(), hu.ncols(), |r, c| w2[r] * hu[(r, c)]);
            d.lxx += hx.transpose() * &whx;
            d.luu += hu.transpose() * &whu;
            d.lux += hu.transpose() * &whx;
        }
        Ok(d)
    }

    pub fn penalty_weight(&self) -> f64 {
        self.penalty.weight(self.sigma)
    }

    pub fn terminal_value(&self, x: &Vector) -> f64 {
        let phi = self.phase.terminal_cost.value(x);
        match &self.phase.terminal_constraint {
            None => phi,
            Some(g) => {
                let gv = g.value(x);
                phi + self.penalty_weight() * gv * gv + self.lambda * gv
            }
        }
    }

    /// `(Φ_x, Φ_xx)`. In Gauss-Newton mode the constraint curvature `g_xx`
    /// is dropped.
    pub fn terminal_derivatives(&self, x: &Vector, mode: DerivativeMode) -> (Vector, Matrix) {
        let (mut gx, mut gxx) = self.phase.terminal_cost.derivatives(x);
        if let Some(g) = &self.phase.terminal_constraint {
            let gv = g.value(x);
            let grad = g.gradient(x);
            let w = self.penalty_weight();
            let slope = 2.0 * w * gv + self.lambda;
            gx += &grad * slope;
            gxx += &grad * grad.transpose() * (2.0 * w);
            if mode == DerivativeMode::Full {
                if let Some(h) = g.hessian(x) {
                    gxx += h * slope;
                }
            }
        }
        (gx, gxx)
    }
}

/// Augmented objective `Σ_i 𝓛_i` of a set of trajectories.
pub fn augmented_cost(
    problem: &MultiPhaseProblem,
    params: &ALReBParams,
    penalty: PenaltyForm,
    trajectories: &[PhaseTrajectory],
) -> Result<f64> {
    if trajectories.len() != problem.phases.len() {
        return Err(Error::Config("trajectory count does not match phase count".into()));
    }
    let mut total = 0.0;
    for (i, (phase, t)) in problem.phases.iter().zip(trajectories).enumerate() {
        let aug = augment_phase(phase, params, i, penalty);
        for (k, u) in t.controls.iter().enumerate() {
            total += aug.running_value(k, &t.states[k], u);
        }
        total += aug.terminal_value(t.terminal_state());
    }
    Ok(total)
}
