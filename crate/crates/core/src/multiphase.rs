//! Multi-phase optimal control problems.
//!
//! A problem is an ordered list of phases. Each phase has fixed discrete-time
//! dynamics, a running and terminal cost, an optional scalar terminal
//! equality constraint, optional path inequalities `h(x, u) >= 0`, and a
//! transition map that produces the initial state of the next phase from the
//! terminal state of this one. State and control dimensions may differ from
//! phase to phase.
//!
//! All derivatives are expressed in *tangent* coordinates of the phase's
//! [`StateSpace`]; for Euclidean states these are the plain coordinates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::schedule::AbstractionSchedule;
use crate::{fd, Matrix, Vector};

/// Coordinates in which the solver perturbs states.
pub trait StateSpace: Send + Sync {
    fn tangent_dim(&self) -> usize;

    /// `x ⊖ base`: the tangent vector taking `base` to `x`.
    fn difference(&self, x: &Vector, base: &Vector) -> Vector;

    /// `base ⊕ dx`.
    fn retract(&self, base: &Vector, dx: &Vector) -> Vector;
}

#[derive(Debug, Clone, Copy)]
pub struct Euclidean(pub usize);

impl StateSpace for Euclidean {
    fn tangent_dim(&self) -> usize {
        self.0
    }

    fn difference(&self, x: &Vector, base: &Vector) -> Vector {
        x - base
    }

    fn retract(&self, base: &Vector, dx: &Vector) -> Vector {
        base + dx
    }
}

/// Second-order dynamics terms already contracted with the next-step value
/// gradient, i.e. `s' · f_xx`, `s' · f_uu`, `s' · f_ux`.
#[derive(Debug, Clone)]
pub struct SecondOrderTerms {
    pub xx: Matrix,
    pub uu: Matrix,
    pub ux: Matrix,
}

/// Discrete-time phase dynamics `x_{k+1} = f(x_k, u_k)`.
pub trait Dynamics: Send + Sync {
    fn step(&self, k: usize, x: &Vector, u: &Vector) -> Vector;

    /// `(f_x, f_u)` in tangent coordinates. Central differences by default.
    fn jacobians(&self, k: usize, x: &Vector, u: &Vector, space: &dyn StateSpace) -> (Matrix, Matrix) {
        fd_jacobians(self, k, x, u, space)
    }

    /// Analytic second-order terms contracted with `weights`, if the model
    /// provides them.
    fn second_order(
        &self,
        _k: usize,
        _x: &Vector,
        _u: &Vector,
        _weights: &Vector,
        _space: &dyn StateSpace,
    ) -> Option<SecondOrderTerms> {
        None
    }
}

/// Central-difference Jacobians of any dynamics through its state space.
pub fn fd_jacobians<D: Dynamics + ?Sized>(
    dynamics: &D,
    k: usize,
    x: &Vector,
    u: &Vector,
    space: &dyn StateSpace,
) -> (Matrix, Matrix) {
    let nominal = dynamics.step(k, x, u);
    let nt = space.tangent_dim();
    let zero = Vector::zeros(nt);
    let fx = fd::jacobian(
        |dx| space.difference(&dynamics.step(k, &space.retract(x, dx), u), &nominal),
        &zero,
        fd::STEP,
    );
    let fu = fd::jacobian(|v| space.difference(&dynamics.step(k, x, v), &nominal), u, fd::STEP);
    (fx, fu)
}

/// Finite-difference tensor contraction `weights · f_zz` obtained by
/// differencing `f_zᵀ weights`.
pub fn fd_second_order<D: Dynamics + ?Sized>(
    dynamics: &D,
    k: usize,
    x: &Vector,
    u: &Vector,
    weights: &Vector,
    space: &dyn StateSpace,
) -> SecondOrderTerms {
    let nt = space.tangent_dim();
    let nu = u.len();
    let step = 1e-5;
    let grad = |z: &Vector| {
        let xz = space.retract(x, &z.rows(0, nt).into_owned());
        let uz = u + z.rows(nt, nu);
        let (fx, fu) = dynamics.jacobians(k, &xz, &uz, space);
        let mut g = Vector::zeros(nt + nu);
        g.rows_mut(0, nt).copy_from(&(fx.transpose() * weights));
        g.rows_mut(nt, nu).copy_from(&(fu.transpose() * weights));
        g
    };
    let h = fd::jacobian(grad, &Vector::zeros(nt + nu), step);
    let h = (&h + h.transpose()) * 0.5;
    SecondOrderTerms {
        xx: h.view((0, 0), (nt, nt)).into_owned(),
        uu: h.view((nt, nt), (nu, nu)).into_owned(),
        ux: h.view((nt, 0), (nu, nt)).into_owned(),
    }
}

/// Continuous-time model `ẋ = F(x, u)`.
pub trait ContinuousDynamics: Send + Sync {
    fn derivative(&self, x: &Vector, u: &Vector) -> Vector;

    /// Analytic `(F_x, F_u)` when available.
    fn derivative_jacobians(&self, _x: &Vector, _u: &Vector) -> Option<(Matrix, Matrix)> {
        None
    }
}

/// Fixed-step integration policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    ForwardEuler,
    Rk4,
}

impl Integrator {
    pub fn step<M: ContinuousDynamics + ?Sized>(self, model: &M, dt: f64, x: &Vector, u: &Vector) -> Vector {
        match self {
            Integrator::ForwardEuler => x + model.derivative(x, u) * dt,
            Integrator::Rk4 => {
                let k1 = model.derivative(x, u);
                let k2 = model.derivative(&(x + &k1 * (0.5 * dt)), u);
                let k3 = model.derivative(&(x + &k2 * (0.5 * dt)), u);
                let k4 = model.derivative(&(x + &k3 * dt), u);
                x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
            }
        }
    }
}

/// A continuous model turned into phase dynamics by an [`Integrator`].
pub struct Discretized<M> {
    pub model: M,
    pub dt: f64,
    pub integrator: Integrator,
}

impl<M> Discretized<M> {
    pub fn euler(model: M, dt: f64) -> Self {
        Discretized {
            model,
            dt,
            integrator: Integrator::ForwardEuler,
        }
    }
}

impl<M: ContinuousDynamics> Dynamics for Discretized<M> {
    fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        self.integrator.step(&self.model, self.dt, x, u)
    }

    fn jacobians(&self, k: usize, x: &Vector, u: &Vector, space: &dyn StateSpace) -> (Matrix, Matrix) {
        if self.integrator == Integrator::ForwardEuler {
            if let Some((fx, fu)) = self.model.derivative_jacobians(x, u) {
                let n = x.len();
                return (Matrix::identity(n, n) + fx * self.dt, fu * self.dt);
            }
        }
        fd_jacobians(self, k, x, u, space)
    }
}

/// First and second derivatives of a running cost in tangent coordinates.
#[derive(Debug, Clone)]
pub struct CostDerivatives {
    pub lx: Vector,
    pub lu: Vector,
    pub lxx: Matrix,
    pub luu: Matrix,
    /// `∂²ℓ/∂u∂x`, shape (control × tangent).
    pub lux: Matrix,
}

impl CostDerivatives {
    pub fn zeros(nx: usize, nu: usize) -> Self {
        CostDerivatives {
            lx: Vector::zeros(nx),
            lu: Vector::zeros(nu),
            lxx: Matrix::zeros(nx, nx),
            luu: Matrix::zeros(nu, nu),
            lux: Matrix::zeros(nu, nx),
        }
    }
}

pub trait RunningCost: Send + Sync {
    fn value(&self, k: usize, x: &Vector, u: &Vector) -> f64;
    fn derivatives(&self, k: usize, x: &Vector, u: &Vector) -> CostDerivatives;
}

pub trait TerminalCost: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    /// Gradient and Hessian in tangent coordinates.
    fn derivatives(&self, x: &Vector) -> (Vector, Matrix);
}

/// Scalar terminal equality constraint `g(x_N) = 0`.
pub trait TerminalConstraint: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }
}

/// Vector of path inequalities `h(x, u) >= 0`.
pub trait PathConstraint: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, k: usize, x: &Vector, u: &Vector) -> Vector;
    /// `(h_x, h_u)`, shapes (dim × tangent) and (dim × control).
    fn jacobians(&self, k: usize, x: &Vector, u: &Vector) -> (Matrix, Matrix);
}

/// Map from the terminal state of a phase to the initial state of the next.
pub trait Transition: Send + Sync {
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    /// Jacobian from this phase's tangent space to the next phase's.
    fn jacobian(&self, x: &Vector) -> Matrix;
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityTransition(pub usize);

impl Transition for IdentityTransition {
    fn output_dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &Vector) -> Vector {
        x.clone()
    }

    fn jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::identity(self.0, self.0)
    }
}

/// `ℓ(x, u) = ½ (x − x_ref)ᵀ Q (x − x_ref) + ½ (u − u_ref)ᵀ R (u − u_ref)`.
#[derive(Debug, Clone)]
pub struct QuadraticRunningCost {
    pub q: Matrix,
    pub r: Matrix,
    /// One reference per step, or a single constant reference.
    pub x_ref: Vec<Vector>,
    pub u_ref: Vector,
}

impl QuadraticRunningCost {
    pub fn new(q: Matrix, r: Matrix) -> Self {
        let (nx, nu) = (q.nrows(), r.nrows());
        QuadraticRunningCost {
            q,
            r,
            x_ref: vec![Vector::zeros(nx)],
            u_ref: Vector::zeros(nu),
        }
    }

    pub fn with_reference(mut self, x_ref: Vector) -> Self {
        self.x_ref = vec![x_ref];
        self
    }

    pub fn with_control_reference(mut self, u_ref: Vector) -> Self {
        self.u_ref = u_ref;
        self
    }

    fn reference(&self, k: usize) -> &Vector {
        &self.x_ref[k.min(self.x_ref.len() - 1)]
    }
}

impl RunningCost for QuadraticRunningCost {
    fn value(&self, k: usize, x: &Vector, u: &Vector) -> f64 {
        let dx = x - self.reference(k);
        let du = u - &self.u_ref;
        0.5 * (dx.dot(&(&self.q * &dx)) + du.dot(&(&self.r * &du)))
    }

    fn derivatives(&self, k: usize, x: &Vector, u: &Vector) -> CostDerivatives {
        let dx = x - self.reference(k);
        let du = u - &self.u_ref;
        CostDerivatives {
            lx: &self.q * dx,
            lu: &self.r * du,
            lxx: self.q.clone(),
            luu: self.r.clone(),
            lux: Matrix::zeros(u.len(), x.len()),
        }
    }
}

/// `φ(x) = ½ (x − x_ref)ᵀ Q (x − x_ref)`.
#[derive(Debug, Clone)]
pub struct QuadraticTerminalCost {
    pub q: Matrix,
    pub x_ref: Vector,
}

impl TerminalCost for QuadraticTerminalCost {
    fn value(&self, x: &Vector) -> f64 {
        let dx = x - &self.x_ref;
        0.5 * dx.dot(&(&self.q * &dx))
    }

    fn derivatives(&self, x: &Vector) -> (Vector, Matrix) {
        (&self.q * (x - &self.x_ref), self.q.clone())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroTerminalCost(pub usize);

impl TerminalCost for ZeroTerminalCost {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn derivatives(&self, _x: &Vector) -> (Vector, Matrix) {
        (Vector::zeros(self.0), Matrix::zeros(self.0, self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelLevel {
    Full,
    Simple,
}

/// What the transition at the end of a phase does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// Last phase of the problem.
    None,
    Identity,
    /// Touchdown impact of the full model.
    Impact,
    /// Full-to-simple projection without impact (switch at takeoff).
    Projection,
    /// Impact followed by projection (switch at touchdown).
    ImpactProjection,
}

/// Bookkeeping label of a phase, used for schedule shifting and logging.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseTag {
    pub mode: String,
    pub level: ModelLevel,
    pub transition: TransitionKind,
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{:?}->{:?}]", self.mode, self.level, self.transition)
    }
}

#[derive(Clone)]
pub struct PhaseDefinition {
    pub tag: PhaseTag,
    pub state_dim: usize,
    pub control_dim: usize,
    pub horizon: usize,
    pub time_step: f64,
    pub space: Arc<dyn StateSpace>,
    pub dynamics: Arc<dyn Dynamics>,
    pub running_cost: Arc<dyn RunningCost>,
    pub terminal_cost: Arc<dyn TerminalCost>,
    pub terminal_constraint: Option<Arc<dyn TerminalConstraint>>,
    pub path_constraints: Option<Arc<dyn PathConstraint>>,
    /// Required for every phase but the last.
    pub transition: Option<Arc<dyn Transition>>,
}

impl fmt::Debug for PhaseDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseDefinition")
            .field("tag", &self.tag)
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("horizon", &self.horizon)
            .field("time_step", &self.time_step)
            .field("terminal_constraint", &self.terminal_constraint.is_some())
            .field("path_constraints", &self.path_constraints.as_ref().map(|h| h.dim()))
            .finish()
    }
}

impl PhaseDefinition {
    /// Euclidean phase with zero terminal cost and no constraints.
    pub fn new(
        mode: impl Into<String>,
        state_dim: usize,
        control_dim: usize,
        horizon: usize,
        time_step: f64,
        dynamics: Arc<dyn Dynamics>,
        running_cost: Arc<dyn RunningCost>,
    ) -> Self {
        PhaseDefinition {
            tag: PhaseTag {
                mode: mode.into(),
                level: ModelLevel::Full,
                transition: TransitionKind::None,
            },
            state_dim,
            control_dim,
            horizon,
            time_step,
            space: Arc::new(Euclidean(state_dim)),
            dynamics,
            running_cost,
            terminal_cost: Arc::new(ZeroTerminalCost(state_dim)),
            terminal_constraint: None,
            path_constraints: None,
            transition: None,
        }
    }

    pub fn with_level(mut self, level: ModelLevel) -> Self {
        self.tag.level = level;
        self
    }

    pub fn with_space(mut self, space: Arc<dyn StateSpace>) -> Self {
        self.space = space;
        self
    }

    pub fn with_terminal_cost(mut self, cost: Arc<dyn TerminalCost>) -> Self {
        self.terminal_cost = cost;
        self
    }

    pub fn with_terminal_constraint(mut self, g: Arc<dyn TerminalConstraint>) -> Self {
        self.terminal_constraint = Some(g);
        self
    }

    pub fn with_path_constraints(mut self, h: Arc<dyn PathConstraint>) -> Self {
        self.path_constraints = Some(h);
        self
    }

    pub fn with_transition(mut self, kind: TransitionKind, p: Arc<dyn Transition>) -> Self {
        self.tag.transition = kind;
        self.transition = Some(p);
        self
    }

    pub fn tangent_dim(&self) -> usize {
        self.space.tangent_dim()
    }

    /// `P_i(x)`, or the state itself for a last phase.
    pub fn transition_state(&self, x: &Vector) -> Vector {
        match &self.transition {
            Some(p) => p.apply(x),
            None => x.clone(),
        }
    }

    pub fn terminal_constraint_value(&self, x: &Vector) -> f64 {
        self.terminal_constraint.as_ref().map_or(0.0, |g| g.value(x))
    }
}

#[derive(Debug, Clone)]
pub struct MultiPhaseProblem {
    pub phases: Vec<PhaseDefinition>,
    pub initial_state: Vector,
}

impl MultiPhaseProblem {
    pub fn new(phases: Vec<PhaseDefinition>, initial_state: Vector) -> Result<Self> {
        let problem = MultiPhaseProblem { phases, initial_state };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::config("problem has no phases"));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if p.state_dim == 0 || p.control_dim == 0 {
                return Err(Error::config(format!("phase {i}: zero state or control dimension")));
            }
            if p.horizon == 0 {
                return Err(Error::config(format!("phase {i}: horizon must be at least 1")));
            }
            if !(p.time_step > 0.0) {
                return Err(Error::config(format!("phase {i}: time step must be positive")));
            }
            if let Some(h) = &p.path_constraints {
                let _ = h.dim();
            }
            match (&p.transition, self.phases.get(i + 1)) {
                (Some(t), Some(next)) if t.output_dim() != next.state_dim => {
                    return Err(Error::config(format!(
                        "phase {i}: transition output dimension {} != next state dimension {}",
                        t.output_dim(),
                        next.state_dim
                    )));
                }
                (None, Some(_)) => {
                    return Err(Error::config(format!("phase {i}: missing transition")));
                }
                _ => {}
            }
        }
        if self.initial_state.len() != self.phases[0].state_dim {
            return Err(Error::config(format!(
                "initial state has dimension {}, first phase expects {}",
                self.initial_state.len(),
                self.phases[0].state_dim
            )));
        }
        Ok(())
    }

    pub fn num_phases(&self) -> usize {
        self.phases.len()
    }

    pub fn total_steps(&self) -> usize {
        self.phases.iter().map(|p| p.horizon).sum()
    }

    pub fn with_initial_state(mut self, x0: Vector) -> Result<Self> {
        self.initial_state = x0;
        self.validate()?;
        Ok(self)
    }

    /// Zero control sequences of the right shapes.
    pub fn zero_controls(&self) -> Vec<Vec<Vector>> {
        self.phases
            .iter()
            .map(|p| vec![Vector::zeros(p.control_dim); p.horizon])
            .collect()
    }

    pub fn check_controls(&self, controls: &[Vec<Vector>]) -> Result<()> {
        if controls.len() != self.phases.len() {
            return Err(Error::config(format!(
                "{} control sequences for {} phases",
                controls.len(),
                self.phases.len()
            )));
        }
        for (i, (p, u)) in self.phases.iter().zip(controls).enumerate() {
            if u.len() != p.horizon {
                return Err(Error::config(format!(
                    "phase {i}: {} controls for horizon {}",
                    u.len(),
                    p.horizon
                )));
            }
            if let Some(bad) = u.iter().position(|v| v.len() != p.control_dim) {
                return Err(Error::config(format!(
                    "phase {i} step {bad}: control dimension mismatch"
                )));
            }
        }
        Ok(())
    }
}

/// States, controls and raw cost of one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    /// `N + 1` states.
    pub states: Vec<Vector>,
    /// `N` controls.
    pub controls: Vec<Vector>,
    /// `Σ ℓ + φ` accumulated during the rollout.
    pub cost: f64,
}

impl PhaseTrajectory {
    pub fn terminal_state(&self) -> &Vector {
        self.states.last().expect("trajectory has at least one state")
    }
}

fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Roll the problem forward under a state-feedback control law
/// `control(phase, step, x)`.
pub fn rollout_with<F>(problem: &MultiPhaseProblem, mut control: F) -> Result<Vec<PhaseTrajectory>>
where
    F: FnMut(usize, usize, &Vector) -> Vector,
{
    let mut out = Vec::with_capacity(problem.phases.len());
    let mut x = problem.initial_state.clone();
    for (i, phase) in problem.phases.iter().enumerate() {
        if i > 0 {
            x = problem.phases[i - 1].transition_state(&x);
            if !all_finite(&x) {
                return Err(Error::RolloutDivergence { phase: i, step: 0 });
            }
        }
        let mut states = Vec::with_capacity(phase.horizon + 1);
        let mut controls = Vec::with_capacity(phase.horizon);
        let mut cost = 0.0;
        states.push(x.clone());
        for k in 0..phase.horizon {
            let u = control(i, k, &x);
            if u.len() != phase.control_dim {
                return Err(Error::config(format!(
                    "phase {i} step {k}: control dimension {} != {}",
                    u.len(),
                    phase.control_dim
                )));
            }
            cost += phase.running_cost.value(k, &x, &u);
            x = phase.dynamics.step(k, &x, &u);
            if !all_finite(&x) {
                return Err(Error::RolloutDivergence { phase: i, step: k + 1 });
            }
            states.push(x.clone());
            controls.push(u);
        }
        cost += phase.terminal_cost.value(&x);
        if !cost.is_finite() {
            return Err(Error::RolloutDivergence {
                phase: i,
                step: phase.horizon,
            });
        }
        out.push(PhaseTrajectory { states, controls, cost });
    }
    Ok(out)
}

/// Open-loop rollout of per-phase control sequences.
pub fn rollout(problem: &MultiPhaseProblem, controls: &[Vec<Vector>]) -> Result<Vec<PhaseTrajectory>> {
    problem.check_controls(controls)?;
    rollout_with(problem, |i, k, _| controls[i][k].clone())
}

/// `Σ_i [Σ_k ℓ_i + φ_i]`, re-evaluated from the stored trajectories.
pub fn total_cost(problem: &MultiPhaseProblem, trajectories: &[PhaseTrajectory]) -> Result<f64> {
    if trajectories.len() != problem.phases.len() {
        return Err(Error::config("trajectory count does not match phase count"));
    }
    let mut total = 0.0;
    for (i, (p, t)) in problem.phases.iter().zip(trajectories).enumerate() {
        if t.states.len() != p.horizon + 1 || t.controls.len() != p.horizon {
            return Err(Error::config(format!("phase {i}: trajectory length mismatch")));
        }
        let running: f64 = t
            .controls
            .iter()
            .enumerate()
            .map(|(k, u)| p.running_cost.value(k, &t.states[k], u))
            .sum();
        total += running + p.terminal_cost.value(t.terminal_state());
    }
    Ok(total)
}

/// Something that can (re)build the problem for a schedule position.
pub trait ProblemBuilder {
    fn build(&self, schedule: &AbstractionSchedule, initial_state: Vector) -> Result<MultiPhaseProblem>;
}

/// Advance the schedule by one re-planning unit and rebuild the phase list,
/// including the model-transition boundary, for the new window position.
pub fn shift_problem(
    problem: &MultiPhaseProblem,
    schedule: &AbstractionSchedule,
    builder: &dyn ProblemBuilder,
) -> Result<(MultiPhaseProblem, AbstractionSchedule)> {
    let next = schedule.advanced()?;
    let shifted = builder.build(&next, problem.initial_state.clone())?;
    Ok((shifted, next))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Additive;

    impl Dynamics for Additive {
        fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
            x + u
        }
    }

    struct Hold;

    impl Dynamics for Hold {
        fn step(&self, _k: usize, x: &Vector, _u: &Vector) -> Vector {
            x.clone()
        }
    }

    fn scalar_phase(dynamics: Arc<dyn Dynamics>, n: usize) -> PhaseDefinition {
        let cost = QuadraticRunningCost::new(Matrix::from_element(1, 1, 2.0), Matrix::from_element(1, 1, 2.0));
        PhaseDefinition::new("p", 1, 1, n, 0.1, dynamics, Arc::new(cost)).with_terminal_cost(Arc::new(
            QuadraticTerminalCost {
                q: Matrix::from_element(1, 1, 2.0),
                x_ref: Vector::zeros(1),
            },
        ))
    }

    fn v(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn telescoping_rollout() {
        let p = MultiPhaseProblem::new(vec![scalar_phase(Arc::new(Additive), 3)], v(0.0)).unwrap();
        let t = rollout(&p, &[vec![v(1.0); 3]]).unwrap();
        let xs: Vec<f64> = t[0].states.iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn identity_dynamics_hold_state_across_phases() {
        let a =
            scalar_phase(Arc::new(Hold), 4).with_transition(TransitionKind::Identity, Arc::new(IdentityTransition(1)));
        let b = scalar_phase(Arc::new(Hold), 2);
        let p = MultiPhaseProblem::new(vec![a, b], v(0.7)).unwrap();
        let t = rollout(&p, &[vec![v(3.0); 4], vec![v(-1.0); 2]]).unwrap();
        assert!(t.iter().flat_map(|t| &t.states).all(|x| x[0] == 0.7));
    }

    #[test]
    fn single_step_cost_by_substitution() {
        // f(x,u) = u, ℓ = u², φ = x², x0 = 0, u0 = 2 -> 4 + 4
        struct Replace;
        impl Dynamics for Replace {
            fn step(&self, _k: usize, _x: &Vector, u: &Vector) -> Vector {
                u.clone()
            }
        }
        let cost = QuadraticRunningCost::new(Matrix::zeros(1, 1), Matrix::from_element(1, 1, 2.0));
        let phase = PhaseDefinition::new("p", 1, 1, 1, 1.0, Arc::new(Replace), Arc::new(cost)).with_terminal_cost(
            Arc::new(QuadraticTerminalCost {
                q: Matrix::from_element(1, 1, 2.0),
                x_ref: Vector::zeros(1),
            }),
        );
        let p = MultiPhaseProblem::new(vec![phase], v(0.0)).unwrap();
        let t = rollout(&p, &[vec![v(2.0)]]).unwrap();
        assert_eq!(t[0].cost, 8.0);
        assert_eq!(total_cost(&p, &t).unwrap(), 8.0);
    }

    #[test]
    fn zero_trajectory_has_zero_cost() {
        let p = MultiPhaseProblem::new(vec![scalar_phase(Arc::new(Additive), 5)], v(0.0)).unwrap();
        let t = rollout(&p, &p.zero_controls()).unwrap();
        assert_eq!(total_cost(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn dimension_errors() {
        let a = scalar_phase(Arc::new(Additive), 2)
            .with_transition(TransitionKind::Identity, Arc::new(IdentityTransition(2)));
        let b = scalar_phase(Arc::new(Additive), 2);
        assert!(matches!(
            MultiPhaseProblem::new(vec![a, b], v(0.0)),
            Err(Error::Config(_))
        ));

        let p = MultiPhaseProblem::new(vec![scalar_phase(Arc::new(Additive), 2)], v(0.0)).unwrap();
        assert!(matches!(rollout(&p, &[vec![v(1.0)]]), Err(Error::Config(_))));
        assert!(matches!(
            MultiPhaseProblem::new(vec![scalar_phase(Arc::new(Additive), 2)], Vector::zeros(3)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn divergence_reports_location() {
        struct Blowup;
        impl Dynamics for Blowup {
            fn step(&self, k: usize, x: &Vector, _u: &Vector) -> Vector {
                if k == 2 {
                    x * f64::NAN
                } else {
                    x.clone()
                }
            }
        }
        let p = MultiPhaseProblem::new(vec![scalar_phase(Arc::new(Blowup), 4)], v(1.0)).unwrap();
        assert_eq!(
            rollout(&p, &p.zero_controls()),
            Err(Error::RolloutDivergence { phase: 0, step: 3 })
        );
    }
}
