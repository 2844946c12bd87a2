use crate::error::{Error, Result};
use crate::multiphase::{fd_second_order, CostDerivatives, MultiPhaseProblem, PhaseTrajectory, SecondOrderTerms};
use crate::{Matrix, Vector};

use super::augment::AugmentedPhase;
use super::{symmetrize, AffinePolicy, DerivativeMode, QExpansion, ValueExpansion};

/// Dynamics Jacobians and augmented running-cost derivatives at one step.
#[derive(Debug, Clone)]
pub struct StageDerivatives {
    pub fx: Matrix,
    pub fu: Matrix,
    pub cost: CostDerivatives,
}

/// Everything the backward sweep needs from the nominal trajectory that
/// does not depend on the value function.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub stages: Vec<Vec<StageDerivatives>>,
    /// `(Φ_x, Φ_xx)` per phase.
    pub terminal: Vec<(Vector, Matrix)>,
    /// `P_x` per phase boundary (`None` for the last phase).
    pub transitions: Vec<Option<Matrix>>,
}

fn finite_matrix(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

fn finite_vector(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn linearize(
    problem: &MultiPhaseProblem,
    augmented: &[AugmentedPhase<'_>],
    nominal: &[PhaseTrajectory],
    mode: DerivativeMode,
) -> Result<Linearization> {
    let n = problem.phases.len();
    let mut stages = Vec::with_capacity(n);
    let mut terminal = Vec::with_capacity(n);
    let mut transitions = Vec::with_capacity(n);
    for (i, (phase, traj)) in problem.phases.iter().zip(nominal).enumerate() {
        let aug = &augmented[i];
        let mut steps = Vec::with_capacity(phase.horizon);
        for k in 0..phase.horizon {
            let (x, u) = (&traj.states[k], &traj.controls[k]);
            let (fx, fu) = phase.dynamics.jacobians(k, x, u, phase.space.as_ref());
            if !finite_matrix(&fx) || !finite_matrix(&fu) {
                return Err(Error::Numerical {
                    what: "dynamics derivative",
                    phase: i,
                    step: k,
                });
            }
            let cost = aug.running_derivatives(k, x, u)?;
            steps.push(StageDerivatives { fx, fu, cost });
        }
        stages.push(steps);
        let xn = traj.terminal_state();
        terminal.push(aug.terminal_derivatives(xn, mode));
        transitions.push(phase.transition.as_ref().map(|p| p.jacobian(xn)));
        if i + 1 < n && transitions[i].is_none() {
            return Err(Error::Config(format!("phase {i}: missing transition")));
        }
    }
    Ok(Linearization {
        stages,
        terminal,
        transitions,
    })
}

/// `Q` terms at one step given the next-step value expansion. The tensor
/// contractions are added when `second` is supplied.
pub fn q_expansion(
    stage: &StageDerivatives,
    next: &ValueExpansion,
    second: Option<&SecondOrderTerms>,
) -> Result<QExpansion> {
    let c = &stage.cost;
    for v in [&c.lx, &c.lu] {
        if !finite_vector(v) {
            return Err(Error::Numerical {
                what: "cost gradient",
                phase: 0,
                step: 0,
            });
        }
    }
    if !finite_matrix(&c.lxx) || !finite_matrix(&c.luu) || !finite_matrix(&c.lux) {
        return Err(Error::Numerical {
            what: "cost hessian",
            phase: 0,
            step: 0,
        });
    }
    let fxt = stage.fx.transpose();
    let fut = stage.fu.transpose();
    let s_fx = &next.hessian * &stage.fx;
    let s_fu = &next.hessian * &stage.fu;
    let mut q = QExpansion {
        qx: &c.lx + &fxt * &next.gradient,
        qu: &c.lu + &fut * &next.gradient,
        qxx: &c.lxx + &fxt * &s_fx,
        quu: &c.luu + &fut * &s_fu,
        qux: &c.lux + &fut * &s_fx,
    };
    if let Some(t) = second {
        q.qxx += &t.xx;
        q.quu += &t.uu;
        q.qux += &t.ux;
    }
    q.qxx = symmetrize(&q.qxx);
    q.quu = symmetrize(&q.quu);
    Ok(q)
}

/// Minimize the local quadratic model over `δu` with `Q_uu + ρI`.
///
/// Returns `None` when the regularized `Q_uu` is not positive definite.
/// `scalar` holds the decrement `-½ Q_uᵀ (Q_uu + ρI)⁻¹ Q_u` of this step
/// only; the caller accumulates it.
pub fn value_step(q: &QExpansion, rho: f64) -> Option<(ValueExpansion, AffinePolicy)> {
    let m = q.quu.nrows();
    let reg = &q.quu + Matrix::identity(m, m) * rho;
    let chol = reg.cholesky()?;
    let feedforward = -chol.solve(&q.qu);
    let gain = -chol.solve(&q.qux);
    if !finite_vector(&feedforward) || !finite_matrix(&gain) {
        return None;
    }
    let quxt = q.qux.transpose();
    let value = ValueExpansion {
        hessian: symmetrize(&(&q.qxx + &quxt * &gain)),
        gradient: &q.qx + &quxt * &feedforward,
        scalar: 0.5 * q.qu.dot(&feedforward),
    };
    Some((value, AffinePolicy { feedforward, gain }))
}

/// Value propagation across a phase boundary:
/// `s = s'`, `s = Φ_x + P_xᵀ s'`, `S = Φ_xx + P_xᵀ S' P_x`.
pub fn transition_value_update(
    phi_x: &Vector,
    phi_xx: &Matrix,
    px: &Matrix,
    next: &ValueExpansion,
) -> Result<ValueExpansion> {
    let n = phi_x.len();
    if px.ncols() != n || px.nrows() != next.gradient.len() || phi_xx.shape() != (n, n) {
        return Err(Error::Config(format!(
            "transition Jacobian {}x{} does not map a {}-dimensional state into a {}-dimensional one",
            px.nrows(),
            px.ncols(),
            n,
            next.gradient.len()
        )));
    }
    let pxt = px.transpose();
    Ok(ValueExpansion {
        hessian: symmetrize(&(phi_xx + &pxt * &next.hessian * px)),
        gradient: phi_x + &pxt * &next.gradient,
        scalar: next.scalar,
    })
}

#[derive(Debug, Clone)]
pub struct BackwardResult {
    pub policies: Vec<Vec<AffinePolicy>>,
    /// Value expansion at every step `k < N_i` of every phase.
    pub values: Vec<Vec<ValueExpansion>>,
    /// Accumulated `s` at the first step: the model-predicted change in cost
    /// for a full step (non-positive).
    pub expected_change: f64,
    /// `Σ κᵀ Q_u` and `½ Σ κᵀ Q_uu κ`, for step-size–dependent predictions.
    pub expected_linear: f64,
    pub expected_quadratic: f64,
    /// Largest `|Q_u|` entry along the trajectory.
    pub gradient_norm: f64,
}

/// Backward sweep with fixed regularization. `Ok(None)` signals a
/// non-positive-definite `Q_uu + ρI`, i.e. the caller should raise `ρ`.
pub fn backward_sweep(
    problem: &MultiPhaseProblem,
    nominal: &[PhaseTrajectory],
    lin: &Linearization,
    rho: f64,
    mode: DerivativeMode,
) -> Result<Option<BackwardResult>> {
    let n = problem.phases.len();
    let mut policies: Vec<Vec<AffinePolicy>> = vec![Vec::new(); n];
    let mut values: Vec<Vec<ValueExpansion>> = vec![Vec::new(); n];
    let mut lin_sum = 0.0;
    let mut quad_sum = 0.0;
    let mut grad_norm: f64 = 0.0;
    let mut value: Option<ValueExpansion> = None;

    for i in (0..n).rev() {
        let phase = &problem.phases[i];
        let (phi_x, phi_xx) = &lin.terminal[i];
        let mut v = match value.take() {
            None => ValueExpansion {
                hessian: phi_xx.clone(),
                gradient: phi_x.clone(),
                scalar: 0.0,
            },
            Some(next) => {
                let px = lin.transitions[i].as_ref().expect("checked in linearize");
                transition_value_update(phi_x, phi_xx, px, &next)?
            }
        };
        let mut phase_policies = Vec::with_capacity(phase.horizon);
        let mut phase_values = Vec::with_capacity(phase.horizon);
        for k in (0..phase.horizon).rev() {
            let stage = &lin.stages[i][k];
            let second = match mode {
                DerivativeMode::GaussNewton => None,
                DerivativeMode::Full => {
                    let (x, u) = (&nominal[i].states[k], &nominal[i].controls[k]);
                    let space = phase.space.as_ref();
                    Some(
                        phase
                            .dynamics
                            .second_order(k, x, u, &v.gradient, space)
                            .unwrap_or_else(|| fd_second_order(phase.dynamics.as_ref(), k, x, u, &v.gradient, space)),
                    )
                }
            };
            let q = q_expansion(stage, &v, second.as_ref()).map_err(|e| match e {
                Error::Numerical { what, .. } => Error::Numerical {
                    what,
                    phase: i,
                    step: k,
                },
                other => other,
            })?;
            let Some((step_value, policy)) = value_step(&q, rho) else {
                return Ok(None);
            };
            grad_norm = grad_norm.max(q.qu.amax());
            lin_sum += policy.feedforward.dot(&q.qu);
            quad_sum += 0.5 * policy.feedforward.dot(&(&q.quu * &policy.feedforward));
            let scalar = v.scalar + step_value.scalar;
            v = ValueExpansion { scalar, ..step_value };
            phase_values.push(v.clone());
            phase_policies.push(policy);
        }
        phase_policies.reverse();
        phase_values.reverse();
        policies[i] = phase_policies;
        values[i] = phase_values;
        value = Some(v);
    }
    let expected_change = value.map_or(0.0, |v| v.scalar);
    Ok(Some(BackwardResult {
        policies,
        values,
        expected_change,
        expected_linear: lin_sum,
        expected_quadratic: quad_sum,
        gradient_norm: grad_norm,
    }))
}
