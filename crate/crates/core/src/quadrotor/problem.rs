//! Point-to-point flight problems through an obstacle field: full-model
//! steps first, point-mass steps after, LQR cost-to-go at the end.

use std::sync::Arc;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::costs::{
    orientation_cost, orientation_derivatives, solve_dare, FullTerminalCost, LqrTerminalCost, ObstacleField,
};
use super::dynamics::{
    angular_velocity, attitude, body_velocity, full_state, position, project, PointMass, QuadrotorModel,
    QuadrotorProjection, QuadrotorSpace, QuadrotorStep, NS, NT, NU, NX,
};
use super::params::QuadrotorParams;
use crate::error::{Error, Result};
use crate::multiphase::{
    CostDerivatives, ModelLevel, MultiPhaseProblem, PathConstraint, PhaseDefinition, ProblemBuilder, RunningCost,
    TransitionKind,
};
use crate::runtime::schedule::AbstractionSchedule;
use crate::{Matrix, Vector};

/// Per-step cost weights. The point-mass force weight is a quarter of the
/// rotor weight, so equal rotor deviations cost the same on both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadrotorWeights {
    pub position: f64,
    pub velocity: f64,
    pub angular_velocity: f64,
    pub orientation: f64,
    /// On rotor thrust deviations from hover.
    pub control: f64,
    /// Quadratic penalty on thrust outside the rotor limits.
    pub thrust_limit: f64,
    /// Rotational error at the end of the full-model horizon.
    pub terminal_orientation: f64,
    pub terminal_angular_velocity: f64,
}

impl Default for QuadrotorWeights {
    fn default() -> Self {
        QuadrotorWeights {
            position: 10.0,
            velocity: 10.0,
            angular_velocity: 1.0,
            orientation: 200.0,
            control: 20.0,
            thrust_limit: 1e4,
            terminal_orientation: 200.0,
            terminal_angular_velocity: 1.0,
        }
    }
}

impl QuadrotorWeights {
    pub fn force(&self) -> f64 {
        self.control / 4.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalPose {
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

impl GoalPose {
    pub fn attitude(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.orientation;
        UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z))
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadrotorTask {
    pub params: QuadrotorParams,
    pub time_step: f64,
    pub start: [f64; 3],
    pub goal: GoalPose,
    pub weights: QuadrotorWeights,
    pub obstacles: ObstacleField,
    /// Multiplies obstacle clearances before they reach the barrier, which
    /// narrows the relaxed band to `δ / scale` metres.
    pub constraint_scale: f64,
}

impl Default for QuadrotorTask {
    fn default() -> Self {
        QuadrotorTask {
            params: QuadrotorParams::default(),
            time_step: 0.02,
            start: [0.0, 0.0, 1.0],
            goal: GoalPose {
                position: [4.0, 0.0, 1.0],
                orientation: [1.0, 0.0, 0.0, 0.0],
            },
            weights: QuadrotorWeights::default(),
            obstacles: ObstacleField::default(),
            constraint_scale: 1000.0,
        }
    }
}

impl QuadrotorTask {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.obstacles.validate()?;
        if !(self.time_step > 0.0) {
            return Err(Error::Config("quadrotor time step must be positive".into()));
        }
        if !(self.constraint_scale > 0.0) {
            return Err(Error::Config("constraint scale must be positive".into()));
        }
        let w = &self.weights;
        if [w.position, w.velocity, w.control].iter().any(|&v| !(v > 0.0))
            || [
                w.angular_velocity,
                w.orientation,
                w.thrust_limit,
                w.terminal_orientation,
                w.terminal_angular_velocity,
            ]
            .iter()
            .any(|&v| !(v >= 0.0))
        {
            return Err(Error::Config(
                "quadrotor weights must be non-negative, with positive position, velocity and control weights".into(),
            ));
        }
        Ok(())
    }

    /// Level hover at the start position.
    pub fn initial_state(&self) -> Vector {
        full_state(
            &UnitQuaternion::identity(),
            &Vector3::zeros(),
            &Vector3::from(self.start),
            &Vector3::zeros(),
        )
    }

    pub fn hover_controls(&self) -> Vector {
        Vector::from_element(NU, self.params.hover_thrust())
    }

    pub fn point_mass(&self) -> PointMass {
        PointMass::from_params(&self.params, self.time_step)
    }

    /// Point-mass goal state, at rest.
    pub fn goal_state(&self) -> Vector {
        let mut g = Vector::zeros(NS);
        g.rows_mut(0, 3).copy_from(&self.goal.position());
        g
    }

    /// Infinite-horizon LQR cost-to-go of the point mass about the goal,
    /// with the simple-model running weights and obstacles ignored.
    pub fn lqr_terminal_cost(&self) -> Result<LqrTerminalCost> {
        let (a, b) = self.point_mass().matrices();
        let w = &self.weights;
        let q = Matrix::from_diagonal(&Vector::from_vec([[w.position; 3], [w.velocity; 3]].concat()));
        let r = Matrix::identity(3, 3) * w.force();
        Ok(LqrTerminalCost {
            p: solve_dare(&a, &b, &q, &r)?,
            goal: self.goal_state(),
        })
    }
}

fn soft_limit(u: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    if u > hi {
        let e = u - hi;
        (e * e, 2.0 * e, 2.0)
    } else if u < lo {
        let e = u - lo;
        (e * e, 2.0 * e, 2.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// Running cost and obstacle constraints of the full model.
#[derive(Debug, Clone)]
pub struct FullStage {
    pub task: QuadrotorTask,
}

impl RunningCost for FullStage {
    fn value(&self, _k: usize, x: &Vector, u: &Vector) -> f64 {
        let (t, w) = (&self.task, &self.task.weights);
        let (lo, hi, hover) = (t.params.thrust_min, t.params.thrust_max, t.params.hover_thrust());
        let ep = position(x) - t.goal.position();
        let mut c = w.position * ep.norm_squared()
            + w.velocity * body_velocity(x).norm_squared()
            + w.angular_velocity * angular_velocity(x).norm_squared()
            + w.orientation * orientation_cost(&attitude(x), &t.goal.attitude());
        for &ui in u.iter() {
            c += w.control * (ui - hover).powi(2) + w.thrust_limit * soft_limit(ui, lo, hi).0;
        }
        c
    }

    fn derivatives(&self, _k: usize, x: &Vector, u: &Vector) -> CostDerivatives {
        let (t, w) = (&self.task, &self.task.weights);
        let (lo, hi, hover) = (t.params.thrust_min, t.params.thrust_max, t.params.hover_thrust());
        let mut d = CostDerivatives::zeros(NT, NU);
        let (gq, hq) = orientation_derivatives(&attitude(x), &t.goal.attitude());
        d.lx.rows_mut(0, 3).copy_from(&(gq * w.orientation));
        d.lxx.view_mut((0, 0), (3, 3)).copy_from(&(hq * w.orientation));
        let blocks = [
            (3, w.angular_velocity, angular_velocity(x)),
            (6, w.position, position(x) - t.goal.position()),
            (9, w.velocity, body_velocity(x)),
        ];
        for (i, wi, e) in blocks {
            d.lx.rows_mut(i, 3).copy_from(&(e * 2.0 * wi));
            for j in 0..3 {
                d.lxx[(i + j, i + j)] = 2.0 * wi;
            }
        }
        for (i, &ui) in u.iter().enumerate() {
            let (_, g, h) = soft_limit(ui, lo, hi);
            d.lu[i] = 2.0 * w.control * (ui - hover) + w.thrust_limit * g;
            d.luu[(i, i)] = 2.0 * w.control + w.thrust_limit * h;
        }
        d
    }
}

impl PathConstraint for FullStage {
    fn dim(&self) -> usize {
        self.task.obstacles.len()
    }

    fn value(&self, _k: usize, x: &Vector, _u: &Vector) -> Vector {
        let s = self.task.constraint_scale;
        Vector::from_iterator(
            self.dim(),
            self.task.obstacles.clearances(&position(x)).into_iter().map(|h| s * h),
        )
    }

    fn jacobians(&self, _k: usize, x: &Vector, _u: &Vector) -> (Matrix, Matrix) {
        let s = self.task.constraint_scale;
        let mut hx = Matrix::zeros(self.dim(), NT);
        for (j, n) in self.task.obstacles.clearance_gradients(&position(x)).iter().enumerate() {
            hx.view_mut((j, 6), (1, 3)).copy_from(&(n.transpose() * s));
        }
        (hx, Matrix::zeros(self.dim(), NU))
    }
}

/// Running cost and obstacle constraints of the point mass.
#[derive(Debug, Clone)]
pub struct SimpleStage {
    pub task: QuadrotorTask,
}

impl SimpleStage {
    fn hover_force(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.task.params.mass * self.task.params.gravity)
    }
}

impl RunningCost for SimpleStage {
    fn value(&self, _k: usize, x: &Vector, u: &Vector) -> f64 {
        let (t, w) = (&self.task, &self.task.weights);
        let ep = x.rows(0, 3) - t.goal.position();
        let ef = u.rows(0, 3) - self.hover_force();
        w.position * ep.norm_squared() + w.velocity * x.rows(3, 3).norm_squared() + w.force() * ef.norm_squared()
    }

    fn derivatives(&self, _k: usize, x: &Vector, u: &Vector) -> CostDerivatives {
        let (t, w) = (&self.task, &self.task.weights);
        let mut d = CostDerivatives::zeros(NS, 3);
        d.lx.rows_mut(0, 3)
            .copy_from(&((x.rows(0, 3) - t.goal.position()) * 2.0 * w.position));
        d.lx.rows_mut(3, 3).copy_from(&(x.rows(3, 3) * 2.0 * w.velocity));
        d.lu.copy_from(&((u.rows(0, 3) - self.hover_force()) * 2.0 * w.force()));
        for i in 0..3 {
            d.lxx[(i, i)] = 2.0 * w.position;
            d.lxx[(3 + i, 3 + i)] = 2.0 * w.velocity;
            d.luu[(i, i)] = 2.0 * w.force();
        }
        d
    }
}

impl PathConstraint for SimpleStage {
    fn dim(&self) -> usize {
        self.task.obstacles.len()
    }

    fn value(&self, _k: usize, x: &Vector, _u: &Vector) -> Vector {
        let s = self.task.constraint_scale;
        let p = Vector3::new(x[0], x[1], x[2]);
        Vector::from_iterator(
            self.dim(),
            self.task.obstacles.clearances(&p).into_iter().map(|h| s * h),
        )
    }

    fn jacobians(&self, _k: usize, x: &Vector, _u: &Vector) -> (Matrix, Matrix) {
        let s = self.task.constraint_scale;
        let p = Vector3::new(x[0], x[1], x[2]);
        let mut hx = Matrix::zeros(self.dim(), NS);
        for (j, n) in self.task.obstacles.clearance_gradients(&p).iter().enumerate() {
            hx.view_mut((j, 0), (1, 3)).copy_from(&(n.transpose() * s));
        }
        (hx, Matrix::zeros(self.dim(), 3))
    }
}

/// Builds `full` rigid-body steps followed by `simple` point-mass steps.
/// The model switch is an unconstrained projection.
#[derive(Debug, Clone)]
pub struct QuadrotorProblemBuilder {
    pub task: QuadrotorTask,
    pub model: QuadrotorModel,
    pub terminal: LqrTerminalCost,
}

impl QuadrotorProblemBuilder {
    pub fn new(task: QuadrotorTask) -> Result<Self> {
        task.validate()?;
        let model = QuadrotorModel::new(task.params.clone())?;
        let terminal = task.lqr_terminal_cost()?;
        Ok(QuadrotorProblemBuilder { task, model, terminal })
    }

    pub fn build_steps(&self, full: usize, simple: usize, x0: &Vector) -> Result<MultiPhaseProblem> {
        if full + simple == 0 {
            return Err(Error::Config("quadrotor problem needs at least one step".into()));
        }
        let dt = self.task.time_step;
        let mut phases = Vec::new();
        if full > 0 {
            let stage = Arc::new(FullStage {
                task: self.task.clone(),
            });
            let dynamics = Arc::new(QuadrotorStep {
                model: self.model.clone(),
                dt,
            });
            let mut phase = PhaseDefinition::new("flight", NX, NU, full, dt, dynamics, stage.clone())
                .with_space(Arc::new(QuadrotorSpace))
                .with_path_constraints(stage);
            let w = &self.task.weights;
            phase = phase.with_terminal_cost(Arc::new(FullTerminalCost {
                goal_attitude: self.task.goal.attitude(),
                orientation: w.terminal_orientation,
                angular_velocity: w.terminal_angular_velocity,
                lqr: (simple == 0).then(|| self.terminal.clone()),
            }));
            if simple > 0 {
                phase = phase.with_transition(TransitionKind::Projection, Arc::new(QuadrotorProjection));
            }
            phases.push(phase);
        }
        if simple > 0 {
            let stage = Arc::new(SimpleStage {
                task: self.task.clone(),
            });
            phases.push(
                PhaseDefinition::new(
                    "flight",
                    NS,
                    3,
                    simple,
                    dt,
                    Arc::new(self.task.point_mass()),
                    stage.clone(),
                )
                .with_level(ModelLevel::Simple)
                .with_path_constraints(stage)
                .with_terminal_cost(Arc::new(self.terminal.clone())),
            );
        }
        let x0 = if full == 0 && x0.len() == NX {
            project(x0)
        } else {
            x0.clone()
        };
        MultiPhaseProblem::new(phases, x0)
    }
}

impl ProblemBuilder for QuadrotorProblemBuilder {
    fn build(&self, schedule: &AbstractionSchedule, initial_state: Vector) -> Result<MultiPhaseProblem> {
        self.build_steps(schedule.full, schedule.simple, &initial_state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_map_to_phases() {
        let b = QuadrotorProblemBuilder::new(QuadrotorTask::default()).unwrap();
        let x0 = b.task.initial_state();
        let mixed = b.build_steps(30, 50, &x0).unwrap();
        assert_eq!(mixed.num_phases(), 2);
        assert_eq!(mixed.phases[0].tag.transition, TransitionKind::Projection);
        assert_eq!(mixed.phases[1].state_dim, NS);
        let full = b.build_steps(50, 0, &x0).unwrap();
        assert_eq!(full.num_phases(), 1);
        let simple = b.build_steps(0, 20, &x0).unwrap();
        assert_eq!(simple.initial_state.len(), NS);
    }

    #[test]
    fn hover_at_goal_costs_nothing() {
        let task = QuadrotorTask::default();
        let stage = FullStage { task: task.clone() };
        let mut x = task.initial_state();
        x.rows_mut(7, 3).copy_from(&task.goal.position());
        assert!(RunningCost::value(&stage, 0, &x, &task.hover_controls()).abs() < 1e-20);
    }
}
