//! Reference checks shared by the integration tests. Every oracle here is
//! computed independently of the solver code it checks: dense linear
//! algebra, Riccati recursions and central differences written out locally.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::sync::Arc;
use std::time::Instant;

use mhpc::hsddp::{
    augment_phase, solve, transition_value_update, ALReBParams, DerivativeMode, SolverOptions, ValueExpansion,
};
use mhpc::legged::model::{project as trunk_project, split_state, VecQ, NQ, NX as LNX};
use mhpc::legged::problem::{FullModeStage, ImpactTransition, TouchdownConstraint, TrunkModeStage};
use mhpc::legged::{GapSpec, LeggedModel, LeggedProblemBuilder, LeggedTask, Terrain};
use mhpc::multiphase::{
    Dynamics, Euclidean, MultiPhaseProblem, PathConstraint, PhaseDefinition, QuadraticRunningCost,
    QuadraticTerminalCost, RunningCost, StateSpace, TerminalConstraint, TerminalCost, Transition, TransitionKind,
};
use mhpc::quadrotor::costs::{orientation_cost, orientation_derivatives, FullTerminalCost};
use mhpc::quadrotor::dynamics::{attitude, cayley_retract, full_state, project, projection_jacobian, NT, NX as QNX};
use mhpc::quadrotor::problem::{FullStage, SimpleStage};
use mhpc::quadrotor::{QuadrotorModel, QuadrotorSpace, QuadrotorStep, QuadrotorTask};
use mhpc::runtime::AbstractionSchedule;
use mhpc::{Matrix, Vector};
use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct Report {
    pub passed: bool,
    pub detail: String,
}

impl Report {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Report {
            passed,
            detail: detail.into(),
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-half_width..=half_width))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, half_width: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-half_width..=half_width))
}

/// `‖a − b‖_F / max(‖b‖_F, 1)`.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    (a - b).norm() / b.norm().max(1.0)
}

pub fn rel_err_v(a: &Vector, b: &Vector) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    (a - b).norm() / b.norm().max(1.0)
}

/// Central-difference Jacobian of `f` over the tangent space of `space_in`
/// at `x`, with outputs compared on `space_out`.
pub fn fd_jacobian(
    f: &dyn Fn(&Vector) -> Vector,
    x: &Vector,
    space_in: &dyn StateSpace,
    space_out: &dyn StateSpace,
) -> Matrix {
    let n = space_in.tangent_dim();
    let y0 = f(x);
    let m = space_out.tangent_dim();
    let mut j = Matrix::zeros(m, n);
    for c in 0..n {
        let mut e = Vector::zeros(n);
        e[c] = FD_STEP;
        let yp = space_out.difference(&f(&space_in.retract(x, &e)), &y0);
        let ym = space_out.difference(&f(&space_in.retract(x, &(-e))), &y0);
        j.set_column(c, &((yp - ym) / (2.0 * FD_STEP)));
    }
    j
}

pub fn fd_gradient(f: &dyn Fn(&Vector) -> f64, x: &Vector, space: &dyn StateSpace) -> Vector {
    let n = space.tangent_dim();
    Vector::from_fn(n, |c, _| {
        let mut e = Vector::zeros(n);
        e[c] = FD_STEP;
        (f(&space.retract(x, &e)) - f(&space.retract(x, &(-e)))) / (2.0 * FD_STEP)
    })
}

/// Hessian of a scalar by central second differences.
pub fn fd_hessian(f: &dyn Fn(&Vector) -> f64, x: &Vector) -> Matrix {
    let n = x.len();
    let h = 1e-4;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let at = |si: f64, sj: f64| {
                let mut y = x.clone();
                y[i] += si * h;
                y[j] += sj * h;
                f(&y)
            };
            m[(i, j)] = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Single-phase LQR against the Riccati recursion.

struct Linear {
    a: Matrix,
    b: Matrix,
}

impl Dynamics for Linear {
    fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }

    fn jacobians(&self, _k: usize, _x: &Vector, _u: &Vector, _space: &dyn StateSpace) -> (Matrix, Matrix) {
        (self.a.clone(), self.b.clone())
    }
}

pub struct LqrCase {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub qf: Matrix,
    pub x0: Vector,
    pub horizon: usize,
}

impl LqrCase {
    pub fn random(seed: u64, n: usize, m: usize, horizon: usize) -> Self {
        let mut g = rng(seed);
        let a = Matrix::identity(n, n) + random_matrix(&mut g, n, n, 0.3);
        let b = random_matrix(&mut g, n, m, 1.0);
        let mq = random_matrix(&mut g, n, n, 1.0);
        let mr = random_matrix(&mut g, m, m, 1.0);
        let mf = random_matrix(&mut g, n, n, 1.0);
        LqrCase {
            a,
            b,
            q: mq.transpose() * &mq + Matrix::identity(n, n),
            r: mr.transpose() * &mr + Matrix::identity(m, m),
            qf: mf.transpose() * &mf + Matrix::identity(n, n),
            x0: uniform(&mut g, n, 2.0),
            horizon,
        }
    }

    pub fn problem(&self) -> MultiPhaseProblem {
        let (n, m) = (self.a.nrows(), self.b.ncols());
        let phase = PhaseDefinition::new(
            "lqr",
            n,
            m,
            self.horizon,
            1.0,
            Arc::new(Linear {
                a: self.a.clone(),
                b: self.b.clone(),
            }),
            Arc::new(QuadraticRunningCost::new(self.q.clone(), self.r.clone())),
        )
        .with_terminal_cost(Arc::new(QuadraticTerminalCost {
            q: self.qf.clone(),
            x_ref: Vector::zeros(n),
        }));
        MultiPhaseProblem::new(vec![phase], self.x0.clone()).unwrap()
    }

    /// Feedback gains `K_k` and the cost-to-go matrix at `k = 0` of
    /// `½ Σ (xᵀQx + uᵀRu) + ½ x_Nᵀ Q_f x_N`.
    pub fn riccati(&self) -> (Vec<Matrix>, Matrix) {
        let mut p = self.qf.clone();
        let mut gains = vec![Matrix::zeros(0, 0); self.horizon];
        for k in (0..self.horizon).rev() {
            let bt_p = self.b.transpose() * &p;
            let s = &self.r + &bt_p * &self.b;
            let k_mat = -s.lu().solve(&(&bt_p * &self.a)).expect("R + BᵀPB is invertible");
            p = &self.q + self.a.transpose() * &p * &self.a + self.a.transpose() * &p * &self.b * &k_mat;
            p = (&p + p.transpose()) * 0.5;
            gains[k] = k_mat;
        }
        (gains, p)
    }
}

pub fn criterion_riccati() -> Report {
    let case = LqrCase::random(2024, 4, 2, 50);
    let problem = case.problem();
    let opts = SolverOptions::default();
    let params = ALReBParams::new(1, &opts).unwrap();
    let start = Instant::now();
    let sol = solve(&problem, &params, &opts, &problem.zero_controls()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let (gains, p0) = case.riccati();
    let gain_err = sol.policies[0]
        .iter()
        .zip(&gains)
        .map(|(pol, k)| (&pol.gain - k).amax())
        .fold(0.0, f64::max);
    let cost = 0.5 * case.x0.dot(&(&p0 * &case.x0));
    let cost_err = (sol.total_cost() - cost).abs() / cost;
    let passed = sol.inner_iterations <= 2 && gain_err < 1e-8 && elapsed < 1.0;
    Report::new(
        passed,
        format!(
            "{} iterations, max gain error {gain_err:.2e}, cost error {cost_err:.1e}, {:.3} s",
            sol.inner_iterations, elapsed
        ),
    )
}

// ---------------------------------------------------------------------------
// Derivatives against central differences.

/// Worst relative error of one derivative over its sample points.
#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    pub name: &'static str,
    pub points: usize,
    pub worst: f64,
}

pub const DERIVATIVE_POINTS: usize = 100;
pub const DERIVATIVE_TOL: f64 = 1e-4;

fn check(name: &'static str, seed: u64, mut sample: impl FnMut(&mut ChaCha8Rng) -> f64) -> DerivativeCheck {
    let mut g = rng(seed);
    let worst = (0..DERIVATIVE_POINTS).map(|_| sample(&mut g)).fold(0.0, f64::max);
    DerivativeCheck {
        name,
        points: DERIVATIVE_POINTS,
        worst,
    }
}

fn legged_task_on_gap() -> LeggedTask {
    LeggedTask {
        terrain: Terrain::with_gap(GapSpec::default()),
        clearance_constraints: true,
        ..LeggedTask::default()
    }
}

/// Perturbed nominal posture near the gap, with random velocities.
pub fn random_legged_state(task: &LeggedTask, g: &mut ChaCha8Rng) -> Vector {
    let mut x = task.nominal_state(g.random_range(0.6..1.4));
    x += uniform(g, LNX, 1.0).component_mul(&Vector::from_vec(vec![
        0.0, 0.03, 0.1, 0.15, 0.15, 0.15, 0.15, 0.5, 0.5, 0.5, 2.0, 2.0, 2.0, 2.0,
    ]));
    x
}

fn random_torque(g: &mut ChaCha8Rng) -> Vector {
    uniform(g, 4, 15.0)
}

pub fn legged_derivative_checks() -> Vec<DerivativeCheck> {
    let task = legged_task_on_gap();
    let model = task.model().unwrap();
    let dt = task.time_step;
    let e14 = Euclidean(LNX);
    let e6 = Euclidean(6);
    let mut out = Vec::new();

    for (name, stance, seed) in [
        ("legged full dynamics, back stance", Some(0), 1),
        ("legged full dynamics, front stance", Some(1), 2),
        ("legged full dynamics, flight", None, 3),
    ] {
        let stage = FullModeStage::new(model.clone(), dt, stance, task.terrain, true);
        out.push(check(name, seed, |g| {
            let x = random_legged_state(&task, g);
            let u = random_torque(g);
            let (fx, fu) = Dynamics::jacobians(&stage, 0, &x, &u, &e14);
            let ox = fd_jacobian(&|y| stage.step(0, y, &u), &x, &e14, &e14);
            let ou = fd_jacobian(&|v| stage.step(0, &x, v), &u, &Euclidean(4), &e14);
            rel_err(&fx, &ox).max(rel_err(&fu, &ou))
        }));
    }

    for (name, stance, seed) in [
        ("legged full constraints, stance", Some(1), 4),
        ("legged full constraints, flight", None, 5),
    ] {
        let stage = FullModeStage::new(model.clone(), dt, stance, task.terrain, true);
        out.push(check(name, seed, |g| {
            let x = random_legged_state(&task, g);
            let u = random_torque(g);
            let (hx, hu) = PathConstraint::jacobians(&stage, 0, &x, &u);
            let m = stage.dim();
            let ox = fd_jacobian(&|y| PathConstraint::value(&stage, 0, y, &u), &x, &e14, &Euclidean(m));
            let ou = fd_jacobian(
                &|v| PathConstraint::value(&stage, 0, &x, v),
                &u,
                &Euclidean(4),
                &Euclidean(m),
            );
            rel_err(&hx, &ox).max(rel_err(&hu, &ou))
        }));
    }

    let trunk = task.trunk();
    let feet = vec![Vector2::new(0.19, -0.25), Vector2::new(-0.19, -0.25)];
    for (name, foot, seed) in [
        (
            "trunk dynamics and constraints, stance",
            Some(Vector2::new(1.1, 0.0)),
            6,
        ),
        ("trunk dynamics and constraints, flight", None, 7),
    ] {
        let stage =
            TrunkModeStage::new(trunk, dt, foot, task.params.friction).with_clearance(feet.clone(), task.terrain);
        out.push(check(name, seed, |g| {
            let x = trunk_project(&random_legged_state(&task, g));
            let u = Vector::from_vec(vec![g.random_range(-50.0..50.0), g.random_range(0.0..300.0)]);
            let (fx, fu) = Dynamics::jacobians(&stage, 0, &x, &u, &e6);
            let ox = fd_jacobian(&|y| stage.step(0, y, &u), &x, &e6, &e6);
            let ou = fd_jacobian(&|v| stage.step(0, &x, v), &u, &Euclidean(2), &e6);
            let m = stage.dim();
            let (hx, hu) = PathConstraint::jacobians(&stage, 0, &x, &u);
            let ohx = fd_jacobian(&|y| PathConstraint::value(&stage, 0, y, &u), &x, &e6, &Euclidean(m));
            let ohu = fd_jacobian(
                &|v| PathConstraint::value(&stage, 0, &x, v),
                &u,
                &Euclidean(2),
                &Euclidean(m),
            );
            [
                rel_err(&fx, &ox),
                rel_err(&fu, &ou),
                rel_err(&hx, &ohx),
                rel_err(&hu, &ohu),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        }));
    }

    out.push(check("foot Jacobians", 8, |g| {
        let (q, _) = split_state(&random_legged_state(&task, g));
        let qv = Vector::from_column_slice(q.as_slice());
        (0..2)
            .map(|leg| {
                let j = model.foot_jacobian(&q, leg);
                let j = Matrix::from_fn(2, NQ, |r, c| j[(r, c)]);
                let o = fd_jacobian(
                    &|y| {
                        let p = model.foot_position(&VecQ::from_column_slice(y.as_slice()), leg);
                        Vector::from_vec(vec![p.x, p.y])
                    },
                    &qv,
                    &Euclidean(NQ),
                    &Euclidean(2),
                );
                rel_err(&j, &o)
            })
            .fold(0.0, f64::max)
    }));

    out.push(check("touchdown constraint gradient", 9, |g| {
        let x = random_legged_state(&task, g);
        (0..2)
            .map(|leg| {
                let c = TouchdownConstraint::new(model.clone(), leg, task.terrain);
                rel_err_v(&c.gradient(&x), &fd_gradient(&|y| c.value(y), &x, &e14))
            })
            .fold(0.0, f64::max)
    }));

    out.push(check("impact and impact-projection Jacobians", 10, |g| {
        let x = random_legged_state(&task, g);
        let mut worst: f64 = 0.0;
        for leg in 0..2 {
            for proj in [false, true] {
                let t = ImpactTransition::new(model.clone(), leg, proj);
                let out = Euclidean(t.output_dim());
                worst = worst.max(rel_err(&t.jacobian(&x), &fd_jacobian(&|y| t.apply(y), &x, &e14, &out)));
            }
        }
        worst
    }));
    out
}

pub fn random_quadrotor_state(g: &mut ChaCha8Rng) -> Vector {
    let q = UnitQuaternion::from_euler_angles(
        g.random_range(-1.0..1.0),
        g.random_range(-1.0..1.0),
        g.random_range(-3.0..3.0),
    );
    let w = Vector3::from_fn(|_, _| g.random_range(-2.0..2.0));
    let p = Vector3::new(
        g.random_range(0.0..4.0),
        g.random_range(-0.6..0.6),
        g.random_range(0.5..1.5),
    );
    let v = Vector3::from_fn(|_, _| g.random_range(-2.0..2.0));
    full_state(&q, &w, &p, &v)
}

fn random_thrusts(g: &mut ChaCha8Rng) -> Vector {
    // Slightly beyond the rotor limits so the soft penalty is exercised.
    Vector::from_fn(4, |_, _| g.random_range(-0.5..4.5))
}

pub fn quadrotor_derivative_checks() -> Vec<DerivativeCheck> {
    let task = QuadrotorTask::default();
    let model = QuadrotorModel::new(task.params.clone()).unwrap();
    let step = QuadrotorStep {
        model: model.clone(),
        dt: task.time_step,
    };
    let space = QuadrotorSpace;
    let e4 = Euclidean(4);
    let e6 = Euclidean(6);
    let full = FullStage { task: task.clone() };
    let simple = SimpleStage { task: task.clone() };
    let mut out = Vec::new();

    out.push(check("quadrotor dynamics", 21, |g| {
        let x = random_quadrotor_state(g);
        let u = random_thrusts(g);
        let (fx, fu) = step.jacobians(0, &x, &u, &space);
        let ox = fd_jacobian(&|y| step.step(0, y, &u), &x, &space, &space);
        let ou = fd_jacobian(&|v| step.step(0, &x, v), &u, &e4, &space);
        rel_err(&fx, &ox).max(rel_err(&fu, &ou))
    }));

    out.push(check("quadrotor projection", 22, |g| {
        let x = random_quadrotor_state(g);
        rel_err(&projection_jacobian(&x), &fd_jacobian(&|y| project(y), &x, &space, &e6))
    }));

    out.push(check("orientation cost gradient", 23, |g| {
        let x = random_quadrotor_state(g);
        let q = attitude(&x);
        let qd = attitude(&random_quadrotor_state(g));
        let (grad, _) = orientation_derivatives(&q, &qd);
        let o = fd_gradient(
            &|phi| orientation_cost(&cayley_retract(&q, &Vector3::new(phi[0], phi[1], phi[2])), &qd),
            &Vector::zeros(3),
            &Euclidean(3),
        );
        rel_err_v(&Vector::from_column_slice(grad.as_slice()), &o)
    }));

    out.push(check("obstacle clearance gradients", 24, |g| {
        let x = random_quadrotor_state(g);
        let p = Vector::from_column_slice(mhpc::quadrotor::dynamics::position(&x).as_slice());
        let grads = task.obstacles.clearance_gradients(&Vector3::new(p[0], p[1], p[2]));
        let a = Matrix::from_fn(grads.len(), 3, |r, c| grads[r][c]);
        let o = fd_jacobian(
            &|y| Vector::from_vec(task.obstacles.clearances(&Vector3::new(y[0], y[1], y[2]))),
            &p,
            &Euclidean(3),
            &Euclidean(grads.len()),
        );
        rel_err(&a, &o)
    }));

    out.push(check("quadrotor running cost and obstacle constraints", 25, |g| {
        let x = random_quadrotor_state(g);
        let u = random_thrusts(g);
        let d = RunningCost::derivatives(&full, 0, &x, &u);
        let ox = fd_gradient(&|y| RunningCost::value(&full, 0, y, &u), &x, &space);
        let ou = fd_gradient(&|v| RunningCost::value(&full, 0, &x, v), &u, &e4);
        let (hx, _) = PathConstraint::jacobians(&full, 0, &x, &u);
        let m = full.dim();
        let ohx = fd_jacobian(&|y| PathConstraint::value(&full, 0, y, &u), &x, &space, &Euclidean(m));
        [rel_err_v(&d.lx, &ox), rel_err_v(&d.lu, &ou), rel_err(&hx, &ohx)]
            .into_iter()
            .fold(0.0, f64::max)
    }));

    out.push(check("point-mass dynamics, cost and constraints", 26, |g| {
        let x = project(&random_quadrotor_state(g));
        let u = uniform(g, 3, 8.0);
        let pm = task.point_mass();
        let (fx, fu) = pm.jacobians(0, &x, &u, &e6);
        let ofx = fd_jacobian(&|y| pm.step(0, y, &u), &x, &e6, &e6);
        let ofu = fd_jacobian(&|v| pm.step(0, &x, v), &u, &Euclidean(3), &e6);
        let d = RunningCost::derivatives(&simple, 0, &x, &u);
        let ox = fd_gradient(&|y| RunningCost::value(&simple, 0, y, &u), &x, &e6);
        let ou = fd_gradient(&|v| RunningCost::value(&simple, 0, &x, v), &u, &Euclidean(3));
        let (hx, _) = PathConstraint::jacobians(&simple, 0, &x, &u);
        let m = simple.dim();
        let ohx = fd_jacobian(&|y| PathConstraint::value(&simple, 0, y, &u), &x, &e6, &Euclidean(m));
        [
            rel_err(&fx, &ofx),
            rel_err(&fu, &ofu),
            rel_err_v(&d.lx, &ox),
            rel_err_v(&d.lu, &ou),
            rel_err(&hx, &ohx),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }));

    let lqr = task.lqr_terminal_cost().unwrap();
    out.push(check("LQR terminal cost", 27, |g| {
        let x = project(&random_quadrotor_state(g));
        let (gx, gxx) = lqr.derivatives(&x);
        let og = fd_gradient(&|y| lqr.value(y), &x, &e6);
        let oh = fd_hessian(&|y| lqr.value(y), &x);
        rel_err_v(&gx, &og).max(rel_err(&gxx, &oh))
    }));

    let terminal = FullTerminalCost {
        goal_attitude: task.goal.attitude(),
        orientation: task.weights.terminal_orientation,
        angular_velocity: task.weights.terminal_angular_velocity,
        lqr: Some(lqr.clone()),
    };
    out.push(check("full-model terminal cost gradient", 28, |g| {
        let x = random_quadrotor_state(g);
        let (gx, _) = terminal.derivatives(&x);
        rel_err_v(&gx, &fd_gradient(&|y| terminal.value(y), &x, &space))
    }));
    out
}

/// Augmented running and terminal costs of real phases: gradients of the
/// barrier-augmented stage cost and of the AL-augmented terminal cost.
pub fn augmented_derivative_checks() -> Vec<DerivativeCheck> {
    let task = legged_task_on_gap();
    let builder = LeggedProblemBuilder::new(task.clone()).unwrap();
    let x0 = task.nominal_state(0.9);
    let schedule = AbstractionSchedule::legged(4, 4).unwrap();
    let problem = builder.build_from(&schedule, &x0).unwrap();
    let opts = SolverOptions::default();
    let mut params = ALReBParams::new(problem.num_phases(), &opts).unwrap();
    for (i, l) in params.lambda.iter_mut().enumerate() {
        *l = 0.3 * i as f64 - 0.5;
    }
    let mut out = Vec::new();

    out.push(check("augmented legged stage and terminal costs", 31, |g| {
        let mut worst: f64 = 0.0;
        for (i, phase) in problem.phases.iter().enumerate() {
            let aug = augment_phase(phase, &params, i, opts.penalty);
            let n = phase.state_dim;
            let sp = Euclidean(n);
            let x = if n == LNX {
                random_legged_state(&task, g)
            } else {
                trunk_project(&random_legged_state(&task, g))
            };
            let u = if phase.control_dim == 4 {
                random_torque(g)
            } else {
                Vector::from_vec(vec![g.random_range(-30.0..30.0), g.random_range(50.0..300.0)])
            };
            let d = aug.running_derivatives(0, &x, &u).unwrap();
            let ox = fd_gradient(&|y| aug.running_value(0, y, &u), &x, &sp);
            let ou = fd_gradient(&|v| aug.running_value(0, &x, v), &u, &Euclidean(u.len()));
            let (tx, _) = aug.terminal_derivatives(&x, DerivativeMode::Full);
            let otx = fd_gradient(&|y| aug.terminal_value(y), &x, &sp);
            worst = [
                worst,
                rel_err_v(&d.lx, &ox),
                rel_err_v(&d.lu, &ou),
                rel_err_v(&tx, &otx),
            ]
            .into_iter()
            .fold(0.0, f64::max);
        }
        worst
    }));

    let qtask = QuadrotorTask::default();
    let qproblem = mhpc::quadrotor::QuadrotorProblemBuilder::new(qtask.clone())
        .unwrap()
        .build_steps(5, 5, &qtask.initial_state())
        .unwrap();
    let qparams = ALReBParams::new(qproblem.num_phases(), &opts).unwrap();
    out.push(check("augmented quadrotor stage and terminal costs", 32, |g| {
        let mut worst: f64 = 0.0;
        for (i, phase) in qproblem.phases.iter().enumerate() {
            let mut aug = augment_phase(phase, &qparams, i, opts.penalty);
            aug.delta = 50.0;
            let full = phase.state_dim == QNX;
            let x = random_quadrotor_state(g);
            let (x, u) = if full {
                (x, random_thrusts(g))
            } else {
                (project(&x), uniform(g, 3, 8.0))
            };
            let sp = phase.space.as_ref();
            let d = aug.running_derivatives(0, &x, &u).unwrap();
            let ox = fd_gradient(&|y| aug.running_value(0, y, &u), &x, sp);
            let ou = fd_gradient(&|v| aug.running_value(0, &x, v), &u, &Euclidean(u.len()));
            let (tx, _) = aug.terminal_derivatives(&x, DerivativeMode::GaussNewton);
            let otx = fd_gradient(&|y| aug.terminal_value(y), &x, sp);
            assert_eq!(d.lx.len(), if full { NT } else { 6 });
            worst = [
                worst,
                rel_err_v(&d.lx, &ox),
                rel_err_v(&d.lu, &ou),
                rel_err_v(&tx, &otx),
            ]
            .into_iter()
            .fold(0.0, f64::max);
        }
        worst
    }));
    out
}

pub fn all_derivative_checks() -> Vec<DerivativeCheck> {
    let mut v = legged_derivative_checks();
    v.extend(quadrotor_derivative_checks());
    v.extend(augmented_derivative_checks());
    v
}

pub fn criterion_derivatives() -> Report {
    let start = Instant::now();
    let checks = all_derivative_checks();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = checks.iter().fold(0.0, |m: f64, c| m.max(c.worst));
    let failing: Vec<&str> = checks
        .iter()
        .filter(|c| !(c.worst < DERIVATIVE_TOL))
        .map(|c| c.name)
        .collect();
    let passed = failing.is_empty() && elapsed < 30.0;
    let mut detail = format!(
        "{} derivatives x {} points, worst relative error {worst:.1e}, {elapsed:.1} s",
        checks.len(),
        DERIVATIVE_POINTS
    );
    if !failing.is_empty() {
        detail += &format!("; failing: {}", failing.join(", "));
    }
    Report::new(passed, detail)
}

// ---------------------------------------------------------------------------
// Touchdown impact.

/// Post-impact velocity as the minimizer of `½ (v − q̇)ᵀ H (v − q̇)` subject
/// to `J v = 0`, by a dense solve of the KKT system.
pub fn impact_oracle(h: &Matrix, j: &Matrix, qd: &Vector) -> Vector {
    let n = h.nrows();
    let m = j.nrows();
    let mut kkt = Matrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    kkt.view_mut((0, n), (n, m)).copy_from(&j.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(j);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(h * qd));
    let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    sol.rows(0, n).into_owned()
}

pub struct ImpactStats {
    pub max_contact_velocity: f64,
    pub max_energy_gain: f64,
    pub max_oracle_error: f64,
}

pub fn impact_statistics(model: &LeggedModel, task: &LeggedTask, seed: u64, samples: usize) -> ImpactStats {
    let mut g = rng(seed);
    let mut stats = ImpactStats {
        max_contact_velocity: 0.0,
        max_energy_gain: f64::NEG_INFINITY,
        max_oracle_error: 0.0,
    };
    for _ in 0..samples {
        let x = random_legged_state(task, &mut g);
        let (q, qd) = split_state(&x);
        for leg in 0..2 {
            let post = model.impact(&q, &qd, leg).unwrap();
            let jc = model.foot_jacobian(&q, leg);
            stats.max_contact_velocity = stats.max_contact_velocity.max((jc * post).amax());
            let e0 = model.kinetic_energy(&q, &qd);
            let e1 = model.kinetic_energy(&q, &post);
            stats.max_energy_gain = stats.max_energy_gain.max((e1 - e0) / e0.max(1.0));
            let h = model.mass_matrix(&q);
            let hm = Matrix::from_fn(NQ, NQ, |r, c| h[(r, c)]);
            let jm = Matrix::from_fn(2, NQ, |r, c| jc[(r, c)]);
            let o = impact_oracle(&hm, &jm, &Vector::from_column_slice(qd.as_slice()));
            let pv = Vector::from_column_slice(post.as_slice());
            stats.max_oracle_error = stats.max_oracle_error.max((pv - o).amax());
        }
    }
    stats
}

pub fn criterion_impact() -> Report {
    let task = LeggedTask::default();
    let model = task.model().unwrap();
    let s = impact_statistics(&model, &task, 3, 100);
    let passed = s.max_contact_velocity < 1e-10 && s.max_energy_gain <= 1e-12 && s.max_oracle_error < 1e-9;
    Report::new(
        passed,
        format!(
            "max |J q̇⁺| {:.1e}, max relative energy change {:+.1e}, KKT oracle error {:.1e}",
            s.max_contact_velocity, s.max_energy_gain, s.max_oracle_error
        ),
    )
}

// ---------------------------------------------------------------------------
// Toy hybrid problem for the augmented Lagrangian loop.

struct PointMass1d {
    dt: f64,
}

impl Dynamics for PointMass1d {
    fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        Vector::from_vec(vec![x[0] + self.dt * x[1], x[1] + self.dt * u[0]])
    }

    fn jacobians(&self, _k: usize, _x: &Vector, _u: &Vector, _space: &dyn StateSpace) -> (Matrix, Matrix) {
        (
            Matrix::from_row_slice(2, 2, &[1.0, self.dt, 0.0, 1.0]),
            Matrix::from_row_slice(2, 1, &[0.0, self.dt]),
        )
    }
}

pub struct HalveVelocity;

impl Transition for HalveVelocity {
    fn output_dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &Vector) -> Vector {
        Vector::from_vec(vec![x[0], 0.5 * x[1]])
    }

    fn jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5])
    }
}

pub struct ReachPosition(pub f64);

impl TerminalConstraint for ReachPosition {
    fn value(&self, x: &Vector) -> f64 {
        x[0] - self.0
    }

    fn gradient(&self, _x: &Vector) -> Vector {
        Vector::from_vec(vec![1.0, 0.0])
    }
}

/// A unit mass pushed for two phases of 50 steps, its velocity halved in
/// between, that must end at `target`.
pub fn toy_hybrid_problem(target: f64) -> MultiPhaseProblem {
    let dt = 0.02;
    let phase = |name: &str| {
        PhaseDefinition::new(
            name,
            2,
            1,
            50,
            dt,
            Arc::new(PointMass1d { dt }),
            Arc::new(QuadraticRunningCost::new(
                Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 0.1])),
                Matrix::identity(1, 1) * 0.1,
            )),
        )
    };
    let first = phase("before").with_transition(TransitionKind::Impact, Arc::new(HalveVelocity));
    let second = phase("after").with_terminal_constraint(Arc::new(ReachPosition(target)));
    MultiPhaseProblem::new(vec![first, second], Vector::zeros(2)).unwrap()
}

pub fn criterion_al() -> Report {
    let problem = toy_hybrid_problem(1.0);
    let opts = SolverOptions::default().with_caps(8, 50);
    let params = ALReBParams::new(problem.num_phases(), &opts).unwrap();
    let start = Instant::now();
    let sol = solve(&problem, &params, &opts, &problem.zero_controls()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let g = sol.g_history.last().copied().unwrap_or(f64::INFINITY);
    let passed = g < 1e-3 && sol.outer_iterations <= 8 && elapsed < 5.0;
    Report::new(
        passed,
        format!(
            "‖g‖ = {g:.1e} after {} outer iterations ({:?}), {elapsed:.3} s",
            sol.outer_iterations,
            sol.g_history.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------------------
// Value propagation through impact and projection.

pub struct TransitionStats {
    pub max_error: f64,
    pub max_rank: usize,
}

/// Numerical rank from the singular values, relative to the largest one.
pub fn numerical_rank(m: &Matrix) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1e-300)).count()
}

pub fn transition_statistics(seed: u64, samples: usize) -> TransitionStats {
    let task = LeggedTask::default();
    let model = task.model().unwrap();
    let mut g = rng(seed);
    let mut stats = TransitionStats {
        max_error: 0.0,
        max_rank: 0,
    };
    for i in 0..samples {
        let x = random_legged_state(&task, &mut g);
        let t = ImpactTransition::new(model.clone(), i % 2, true);
        let px = t.jacobian(&x);
        let ms = random_matrix(&mut g, 6, 6, 1.0);
        let s_next = ms.transpose() * &ms;
        let mphi = random_matrix(&mut g, LNX, LNX, 1.0);
        let phi_xx = mphi.transpose() * &mphi;
        let phi_x = uniform(&mut g, LNX, 1.0);
        let next = ValueExpansion {
            hessian: s_next.clone(),
            gradient: uniform(&mut g, 6, 1.0),
            scalar: 0.0,
        };
        let v = transition_value_update(&phi_x, &phi_xx, &px, &next).unwrap();
        // Dense recomputation, entry by entry.
        let mut low = Matrix::zeros(LNX, LNX);
        for r in 0..LNX {
            for c in 0..LNX {
                let mut acc = 0.0;
                for a in 0..6 {
                    for b in 0..6 {
                        acc += px[(a, r)] * s_next[(a, b)] * px[(b, c)];
                    }
                }
                low[(r, c)] = acc;
            }
        }
        let dense = &phi_xx + &low;
        stats.max_error = stats
            .max_error
            .max((&v.hessian - &dense).amax() / dense.amax().max(1.0));
        stats.max_rank = stats.max_rank.max(numerical_rank(&low));
    }
    stats
}

pub fn criterion_transition() -> Report {
    let s = transition_statistics(5, 50);
    let passed = s.max_error < 1e-10 && s.max_rank <= 6;
    Report::new(
        passed,
        format!(
            "max error {:.1e}, largest rank of P_xᵀS′P_x {}",
            s.max_error, s.max_rank
        ),
    )
}
