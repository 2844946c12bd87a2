//! Multi-phase problems for bounding and running over an abstraction
//! schedule: full-model phases first, trunk-model phases after.

use std::sync::{Arc, Mutex};

use nalgebra::{SVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::model::{
    join_state, project, projection_matrix, split_state, AccelDerivatives, LeggedModel, TrunkModel, NQ, NS, NU, NX,
};
use super::params::{GaitTable, LeggedParams};
use super::terrain::Terrain;
use crate::error::{Error, Result};
use crate::multiphase::{
    Dynamics, IdentityTransition, ModelLevel, MultiPhaseProblem, PathConstraint, PhaseDefinition, ProblemBuilder,
    QuadraticRunningCost, QuadraticTerminalCost, StateSpace, TerminalConstraint, Transition, TransitionKind,
};
use crate::runtime::schedule::AbstractionSchedule;
use crate::{Matrix, Vector};

/// Diagonal cost weights. Positions along `x` are never penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeggedWeights {
    pub full_state: [f64; NX],
    pub full_control: [f64; NU],
    pub full_terminal: [f64; NX],
    pub trunk_state: [f64; NS],
    pub trunk_control: [f64; 2],
    pub trunk_terminal: [f64; NS],
}

impl Default for LeggedWeights {
    fn default() -> Self {
        LeggedWeights {
            full_state: [
                0.0, 2000.0, 500.0, 5.0, 5.0, 5.0, 5.0, 50.0, 10.0, 10.0, 0.1, 0.1, 0.1, 0.1,
            ],
            full_control: [1e-3; NU],
            full_terminal: [
                0.0, 2000.0, 500.0, 5.0, 5.0, 5.0, 5.0, 50.0, 10.0, 10.0, 0.1, 0.1, 0.1, 0.1,
            ],
            trunk_state: [0.0, 2000.0, 500.0, 50.0, 10.0, 10.0],
            trunk_control: [1e-4, 1e-4],
            trunk_terminal: [0.0, 2000.0, 500.0, 50.0, 10.0, 10.0],
        }
    }
}

/// Everything needed to build legged problems, apart from the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeggedTask {
    pub params: LeggedParams,
    pub gait: GaitTable,
    pub terrain: Terrain,
    pub weights: LeggedWeights,
    pub desired_speed: f64,
    pub time_step: f64,
    /// Keep swing feet (and the trunk model's virtual feet) above the terrain.
    pub clearance_constraints: bool,
    /// Raibert gain on the speed error when placing feet.
    pub foothold_gain: f64,
}

impl Default for LeggedTask {
    fn default() -> Self {
        LeggedTask {
            params: LeggedParams::quadruped(),
            gait: GaitTable::bounding(),
            terrain: Terrain::flat(),
            weights: LeggedWeights::default(),
            desired_speed: 1.0,
            time_step: 1e-3,
            clearance_constraints: false,
            foothold_gain: 0.03,
        }
    }
}

impl LeggedTask {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.gait.validate()?;
        if !(self.time_step > 0.0) {
            return Err(Error::Config("time_step must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<LeggedModel> {
        LeggedModel::new(self.params.clone())
    }

    pub fn trunk(&self) -> TrunkModel {
        TrunkModel::from_params(&self.params)
    }

    /// Vertical force that supports the body weight on average over a cycle
    /// when the stance of `leg` provides half of the impulse.
    pub fn support_force(&self, leg: usize) -> f64 {
        let m = self.params.total_mass();
        let g = self.params.gravity;
        let t_st = self.gait.stance_duration(leg).max(self.time_step);
        let legs_in_cycle = self
            .gait
            .modes
            .iter()
            .filter(|m| m.kind.stance_leg().is_some())
            .count()
            .max(1) as f64;
        m * g * self.gait.cycle_duration() / (legs_in_cycle * t_st)
    }

    pub fn full_reference(&self) -> Vector {
        let p = &self.params;
        let [qh, qk] = p.nominal_joints;
        let mut x = Vector::zeros(NX);
        x[1] = p.nominal_height();
        x[3] = qh;
        x[4] = qk;
        x[5] = qh;
        x[6] = qk;
        x[NQ] = self.desired_speed;
        x
    }

    pub fn trunk_reference(&self) -> Vector {
        project(&self.full_reference())
    }

    /// Standing posture at horizontal position `x` moving at the desired speed.
    pub fn nominal_state(&self, x: f64) -> Vector {
        let mut s = self.full_reference();
        s[0] = x;
        s
    }

    /// Raibert-style foothold for `leg` touching down when the hip is at
    /// `hip_x`, with forward speed `vx`, moved out of any gap.
    pub fn foothold(&self, leg: usize, hip_x: f64, vx: f64) -> Vector2<f64> {
        let t_st = self.gait.stance_duration(leg);
        let x = hip_x + 0.5 * vx * t_st + self.foothold_gain * (vx - self.desired_speed);
        let x = self.terrain.safe_foothold(x);
        Vector2::new(x, self.terrain.height(x))
    }
}

fn diag(w: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(w))
}

fn nan(n: usize) -> Vector {
    Vector::from_element(n, f64::NAN)
}

struct StageCache {
    key: Option<(Vector, Vector)>,
    derivs: Option<AccelDerivatives>,
}

/// One full-model gait mode: Euler-discretized contact dynamics plus the
/// torque, friction and clearance inequalities, which share the contact
/// force computation.
pub struct FullModeStage {
    model: LeggedModel,
    dt: f64,
    stance: Option<usize>,
    terrain: Terrain,
    clearance: bool,
    cache: Mutex<StageCache>,
}

impl FullModeStage {
    pub fn new(model: LeggedModel, dt: f64, stance: Option<usize>, terrain: Terrain, clearance: bool) -> Self {
        FullModeStage {
            model,
            dt,
            stance,
            terrain,
            clearance,
            cache: Mutex::new(StageCache {
                key: None,
                derivs: None,
            }),
        }
    }

    fn tau(u: &Vector) -> Vector4<f64> {
        Vector4::new(u[0], u[1], u[2], u[3])
    }

    fn swing_legs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..2).filter(move |&l| Some(l) != self.stance)
    }

    fn derivatives(&self, x: &Vector, u: &Vector) -> Option<AccelDerivatives> {
        let mut cache = self.cache.lock().expect("stage cache poisoned");
        if let (Some((cx, cu)), Some(d)) = (&cache.key, &cache.derivs) {
            if cx == x && cu == u {
                return Some(d.clone());
            }
        }
        let (q, qd) = split_state(x);
        let d = self
            .model
            .forward_dynamics_derivatives(&q, &qd, &Self::tau(u), self.stance)
            .ok()?;
        cache.key = Some((x.clone(), u.clone()));
        cache.derivs = Some(d.clone());
        Some(d)
    }

    fn friction_rows(&self) -> usize {
        if self.stance.is_some() {
            3
        } else {
            0
        }
    }

    fn clearance_rows(&self) -> usize {
        if self.clearance {
            self.swing_legs().count()
        } else {
            0
        }
    }

    fn weight(&self) -> f64 {
        self.model.params.total_mass() * self.model.params.gravity
    }
}

impl Dynamics for FullModeStage {
    fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        let (q, qd) = split_state(x);
        match self.model.forward_dynamics(&q, &qd, &Self::tau(u), self.stance, None) {
            Ok(a) => join_state(&(q + qd * self.dt), &(qd + a.qdd * self.dt)),
            Err(_) => nan(NX),
        }
    }

    fn jacobians(&self, _k: usize, x: &Vector, u: &Vector, _space: &dyn StateSpace) -> (Matrix, Matrix) {
        let Some(d) = self.derivatives(x, u) else {
            return (
                Matrix::from_element(NX, NX, f64::NAN),
                Matrix::from_element(NX, NU, f64::NAN),
            );
        };
        let dt = self.dt;
        let mut fx = Matrix::identity(NX, NX);
        let mut fu = Matrix::zeros(NX, NU);
        for i in 0..NQ {
            fx[(i, NQ + i)] += dt;
            for j in 0..NQ {
                fx[(NQ + i, j)] += dt * d.dqdd_dq[(i, j)];
                fx[(NQ + i, NQ + j)] += dt * d.dqdd_dqd[(i, j)];
            }
            for j in 0..NU {
                fu[(NQ + i, j)] = dt * d.dqdd_dtau[(i, j)];
            }
        }
        (fx, fu)
    }
}

impl PathConstraint for FullModeStage {
    fn dim(&self) -> usize {
        2 * NU + self.friction_rows() + self.clearance_rows()
    }

    fn value(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        let lim = self.model.params.torque_limits;
        let mut h = Vector::zeros(self.dim());
        for i in 0..NU {
            let t = u[i] / lim[i % 2];
            h[2 * i] = 1.0 - t;
            h[2 * i + 1] = 1.0 + t;
        }
        let mut r = 2 * NU;
        let (q, qd) = split_state(x);
        if self.stance.is_some() {
            let lam = match self.model.forward_dynamics(&q, &qd, &Self::tau(u), self.stance, None) {
                Ok(a) => a.lambda,
                Err(_) => return nan(self.dim()),
            };
            let (w, mu) = (self.weight(), self.model.params.friction);
            h[r] = lam.y / w;
            h[r + 1] = (mu * lam.y - lam.x) / w;
            h[r + 2] = (mu * lam.y + lam.x) / w;
            r += 3;
        }
        if self.clearance {
            for leg in self.swing_legs() {
                let p = self.model.foot_position(&q, leg);
                h[r] = p.y - self.terrain.height(p.x);
                r += 1;
            }
        }
        h
    }

    fn jacobians(&self, _k: usize, x: &Vector, u: &Vector) -> (Matrix, Matrix) {
        let m = self.dim();
        let mut hx = Matrix::zeros(m, NX);
        let mut hu = Matrix::zeros(m, NU);
        let lim = self.model.params.torque_limits;
        for i in 0..NU {
            hu[(2 * i, i)] = -1.0 / lim[i % 2];
            hu[(2 * i + 1, i)] = 1.0 / lim[i % 2];
        }
        let mut r = 2 * NU;
        if self.stance.is_some() {
            let Some(d) = self.derivatives(x, u) else {
                return (Matrix::from_element(m, NX, f64::NAN), hu);
            };
            let (w, mu) = (self.weight(), self.model.params.friction);
            let rows = [(0.0, 1.0), (-1.0, mu), (1.0, mu)];
            for (j, (cx, cz)) in rows.iter().enumerate() {
                for c in 0..NQ {
                    hx[(r + j, c)] = (cx * d.dlambda_dq[(0, c)] + cz * d.dlambda_dq[(1, c)]) / w;
                    hx[(r + j, NQ + c)] = (cx * d.dlambda_dqd[(0, c)] + cz * d.dlambda_dqd[(1, c)]) / w;
                }
                for c in 0..NU {
                    hu[(r + j, c)] = (cx * d.dlambda_dtau[(0, c)] + cz * d.dlambda_dtau[(1, c)]) / w;
                }
            }
            r += 3;
        }
        if self.clearance {
            let (q, _) = split_state(x);
            for leg in self.swing_legs() {
                let p = self.model.foot_position(&q, leg);
                let j = self.model.foot_jacobian(&q, leg);
                let slope = self.terrain.slope(p.x);
                for c in 0..NQ {
                    hx[(r, c)] = j[(1, c)] - slope * j[(0, c)];
                }
                r += 1;
            }
        }
        (hx, hu)
    }
}

/// One trunk-model gait mode. The control is the contact force of the
/// stance foot; in flight it has no effect.
pub struct TrunkModeStage {
    trunk: TrunkModel,
    dt: f64,
    foot: Option<Vector2<f64>>,
    friction: f64,
    /// Virtual feet (body-frame offsets) that must clear the terrain.
    virtual_feet: Vec<Vector2<f64>>,
    terrain: Terrain,
}

impl TrunkModeStage {
    pub fn new(trunk: TrunkModel, dt: f64, foot: Option<Vector2<f64>>, friction: f64) -> Self {
        TrunkModeStage {
            trunk,
            dt,
            foot,
            friction,
            virtual_feet: Vec::new(),
            terrain: Terrain::flat(),
        }
    }

    pub fn with_clearance(mut self, virtual_feet: Vec<Vector2<f64>>, terrain: Terrain) -> Self {
        self.virtual_feet = virtual_feet;
        self.terrain = terrain;
        self
    }

    fn weight(&self) -> f64 {
        self.trunk.mass * self.trunk.gravity
    }

    fn virtual_foot(&self, x: &Vector, offset: &Vector2<f64>) -> (Vector2<f64>, Vector2<f64>) {
        let (s, c) = x[2].sin_cos();
        let r = Vector2::new(c * offset.x - s * offset.y, s * offset.x + c * offset.y);
        (Vector2::new(x[0], x[1]) + r, Vector2::new(-r.y, r.x))
    }
}

impl Dynamics for TrunkModeStage {
    fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        let xs = SVector::<f64, NS>::from_column_slice(x.as_slice());
        let f = Vector2::new(u[0], u[1]);
        let d = self.trunk.derivative(&xs, &f, self.foot.as_ref());
        Vector::from_column_slice((xs + d * self.dt).as_slice())
    }

    fn jacobians(&self, _k: usize, x: &Vector, u: &Vector, _space: &dyn StateSpace) -> (Matrix, Matrix) {
        let dt = self.dt;
        let mut fx = Matrix::identity(NS, NS);
        let mut fu = Matrix::zeros(NS, 2);
        for i in 0..3 {
            fx[(i, 3 + i)] = dt;
        }
        if let Some(p) = &self.foot {
            let (m, inertia) = (self.trunk.mass, self.trunk.inertia);
            let arm = p - Vector2::new(x[0], x[1]);
            fu[(3, 0)] = dt / m;
            fu[(4, 1)] = dt / m;
            // θ̈ = (arm_x f_z − arm_z f_x) / I with arm = p − c
            fu[(5, 0)] = -dt * arm.y / inertia;
            fu[(5, 1)] = dt * arm.x / inertia;
            fx[(5, 0)] = -dt * u[1] / inertia;
            fx[(5, 1)] = dt * u[0] / inertia;
        }
        (fx, fu)
    }
}

impl PathConstraint for TrunkModeStage {
    fn dim(&self) -> usize {
        (if self.foot.is_some() { 3 } else { 0 }) + self.virtual_feet.len()
    }

    fn value(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        let mut h = Vector::zeros(self.dim());
        let mut r = 0;
        if self.foot.is_some() {
            let (w, mu) = (self.weight(), self.friction);
            h[0] = u[1] / w;
            h[1] = (mu * u[1] - u[0]) / w;
            h[2] = (mu * u[1] + u[0]) / w;
            r = 3;
        }
        for off in &self.virtual_feet {
            let (p, _) = self.virtual_foot(x, off);
            h[r] = p.y - self.terrain.height(p.x);
            r += 1;
        }
        h
    }

    fn jacobians(&self, _k: usize, x: &Vector, _u: &Vector) -> (Matrix, Matrix) {
        let m = self.dim();
        let mut hx = Matrix::zeros(m, NS);
        let mut hu = Matrix::zeros(m, 2);
        let mut r = 0;
        if self.foot.is_some() {
            let (w, mu) = (self.weight(), self.friction);
            hu[(0, 1)] = 1.0 / w;
            hu[(1, 0)] = -1.0 / w;
            hu[(1, 1)] = mu / w;
            hu[(2, 0)] = 1.0 / w;
            hu[(2, 1)] = mu / w;
            r = 3;
        }
        for off in &self.virtual_feet {
            let (p, dp_dtheta) = self.virtual_foot(x, off);
            let slope = self.terrain.slope(p.x);
            hx[(r, 0)] = -slope;
            hx[(r, 1)] = 1.0;
            hx[(r, 2)] = dp_dtheta.y - slope * dp_dtheta.x;
            r += 1;
        }
        (hx, hu)
    }
}

/// Height of the touching-down foot above the terrain.
pub struct TouchdownConstraint {
    model: LeggedModel,
    leg: usize,
    terrain: Terrain,
}

impl TouchdownConstraint {
    pub fn new(model: LeggedModel, leg: usize, terrain: Terrain) -> Self {
        TouchdownConstraint { model, leg, terrain }
    }
}

impl TerminalConstraint for TouchdownConstraint {
    fn value(&self, x: &Vector) -> f64 {
        let (q, _) = split_state(x);
        let p = self.model.foot_position(&q, self.leg);
        p.y - self.terrain.height(p.x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let (q, _) = split_state(x);
        let p = self.model.foot_position(&q, self.leg);
        let j = self.model.foot_jacobian(&q, self.leg);
        let slope = self.terrain.slope(p.x);
        let mut g = Vector::zeros(NX);
        for c in 0..NQ {
            g[c] = j[(1, c)] - slope * j[(0, c)];
        }
        g
    }
}

/// Touchdown reset, optionally followed by the projection onto the trunk state.
pub struct ImpactTransition {
    model: LeggedModel,
    leg: usize,
    project: bool,
}

impl ImpactTransition {
    pub fn new(model: LeggedModel, leg: usize, project: bool) -> Self {
        ImpactTransition { model, leg, project }
    }
}

impl Transition for ImpactTransition {
    fn output_dim(&self) -> usize {
        if self.project {
            NS
        } else {
            NX
        }
    }

    fn apply(&self, x: &Vector) -> Vector {
        match self.model.impact_state(x, self.leg) {
            Ok(y) if self.project => project(&y),
            Ok(y) => y,
            Err(_) => nan(self.output_dim()),
        }
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        match self.model.impact_jacobian(x, self.leg) {
            Ok(j) if self.project => projection_matrix() * j,
            Ok(j) => j,
            Err(_) => Matrix::from_element(self.output_dim(), NX, f64::NAN),
        }
    }
}

/// Plain projection `x_s = T x_f` (model switch at takeoff).
pub struct ProjectionTransition;

impl Transition for ProjectionTransition {
    fn output_dim(&self) -> usize {
        NS
    }

    fn apply(&self, x: &Vector) -> Vector {
        project(x)
    }

    fn jacobian(&self, _x: &Vector) -> Matrix {
        projection_matrix()
    }
}

/// Builds the bounding/running problem for a schedule position. The
/// schedule offset is the cyclic gait index of the first mode.
#[derive(Debug, Clone)]
pub struct LeggedProblemBuilder {
    pub task: LeggedTask,
    model: LeggedModel,
}

impl LeggedProblemBuilder {
    pub fn new(task: LeggedTask) -> Result<Self> {
        task.validate()?;
        let model = task.model()?;
        Ok(LeggedProblemBuilder { task, model })
    }

    pub fn model(&self) -> &LeggedModel {
        &self.model
    }

    fn full_phase(&self, mode_index: usize) -> PhaseDefinition {
        let t = &self.task;
        let mode = t.gait.mode(mode_index);
        let w = &t.weights;
        let stage = Arc::new(FullModeStage::new(
            self.model.clone(),
            t.time_step,
            mode.kind.stance_leg(),
            t.terrain,
            t.clearance_constraints,
        ));
        let x_ref = t.full_reference();
        let cost = QuadraticRunningCost::new(diag(&w.full_state), diag(&w.full_control)).with_reference(x_ref.clone());
        let mut phase = PhaseDefinition::new(
            mode.kind.name(),
            NX,
            NU,
            t.gait.steps(mode_index, t.time_step),
            t.time_step,
            stage.clone(),
            Arc::new(cost),
        )
        .with_terminal_cost(Arc::new(QuadraticTerminalCost {
            q: diag(&w.full_terminal),
            x_ref,
        }))
        .with_path_constraints(stage);
        if let Some(leg) = t.gait.touchdown_leg(mode_index) {
            phase =
                phase.with_terminal_constraint(Arc::new(TouchdownConstraint::new(self.model.clone(), leg, t.terrain)));
        }
        phase
    }

    fn trunk_phase(&self, mode_index: usize, foot: Option<Vector2<f64>>) -> PhaseDefinition {
        let t = &self.task;
        let mode = t.gait.mode(mode_index);
        let w = &t.weights;
        let mut stage = TrunkModeStage::new(t.trunk(), t.time_step, foot, t.params.friction);
        if t.clearance_constraints {
            let h = t.params.nominal_height() + t.params.hip_offsets[0][1];
            let feet: Vec<Vector2<f64>> = (0..2)
                .filter(|&l| Some(l) != mode.kind.stance_leg())
                .map(|l| Vector2::new(t.params.hip_offsets[l][0], t.params.hip_offsets[l][1] - h))
                .collect();
            stage = stage.with_clearance(feet, t.terrain);
        }
        let stage = Arc::new(stage);
        let u_ref = match mode.kind.stance_leg() {
            Some(leg) => Vector::from_vec(vec![0.0, t.support_force(leg)]),
            None => Vector::zeros(2),
        };
        let r = match mode.kind.stance_leg() {
            Some(_) => diag(&w.trunk_control),
            None => Matrix::identity(2, 2),
        };
        let x_ref = t.trunk_reference();
        let cost = QuadraticRunningCost::new(diag(&w.trunk_state), r)
            .with_reference(x_ref.clone())
            .with_control_reference(u_ref);
        let mut phase = PhaseDefinition::new(
            mode.kind.name(),
            NS,
            2,
            t.gait.steps(mode_index, t.time_step),
            t.time_step,
            stage.clone(),
            Arc::new(cost),
        )
        .with_level(ModelLevel::Simple)
        .with_terminal_cost(Arc::new(QuadraticTerminalCost {
            q: diag(&w.trunk_terminal),
            x_ref,
        }));
        if stage.dim() > 0 {
            phase = phase.with_path_constraints(stage);
        }
        phase
    }

    /// Footholds of trunk-model stance modes, predicted under constant
    /// forward speed from the initial state.
    fn predicted_foothold(&self, x0: &Vector, leg: usize, t_touchdown: f64) -> Vector2<f64> {
        let t = &self.task;
        let (cx, th, vx) = (x0[0], x0[2], x0[NQ]);
        let off = t.params.hip_offsets[leg];
        let hip_x = cx + th.cos() * off[0] - th.sin() * off[1] + vx * t_touchdown;
        t.foothold(leg, hip_x, vx)
    }

    fn transition(&self, schedule: &AbstractionSchedule, j: usize) -> Result<(TransitionKind, Arc<dyn Transition>)> {
        let td = self.task.gait.touchdown_leg(schedule.offset + j);
        Ok(match (schedule.is_full(j), schedule.is_full(j + 1), td) {
            (true, true, Some(leg)) => (
                TransitionKind::Impact,
                Arc::new(ImpactTransition::new(self.model.clone(), leg, false)),
            ),
            (true, true, None) => (TransitionKind::Identity, Arc::new(IdentityTransition(NX))),
            (true, false, Some(leg)) => (
                TransitionKind::ImpactProjection,
                Arc::new(ImpactTransition::new(self.model.clone(), leg, true)),
            ),
            (true, false, None) => (TransitionKind::Projection, Arc::new(ProjectionTransition)),
            (false, false, _) => (TransitionKind::Identity, Arc::new(IdentityTransition(NS))),
            (false, true, _) => {
                return Err(Error::Config("simple-model modes must follow full-model modes".into()));
            }
        })
    }

    /// Build from a full-model state. When the schedule has no full-model
    /// modes the problem starts from the projected trunk state.
    pub fn build_from(&self, schedule: &AbstractionSchedule, x0: &Vector) -> Result<MultiPhaseProblem> {
        if x0.len() != NX {
            return Err(Error::Config(format!(
                "legged initial state has dimension {}, expected {NX}",
                x0.len()
            )));
        }
        let t = &self.task;
        let n = schedule.total();
        let mut phases = Vec::with_capacity(n);
        let mut elapsed = 0.0;
        for j in 0..n {
            let m = schedule.offset + j;
            let mut phase = if schedule.is_full(j) {
                self.full_phase(m)
            } else {
                let foot = t.gait.mode(m).kind.stance_leg().map(|leg| {
                    if j == 0 {
                        let (q, _) = split_state(x0);
                        self.model.foot_position(&q, leg)
                    } else {
                        self.predicted_foothold(x0, leg, elapsed)
                    }
                });
                self.trunk_phase(m, foot)
            };
            if j + 1 < n {
                let (kind, p) = self.transition(schedule, j)?;
                phase = phase.with_transition(kind, p);
            }
            elapsed += phase.horizon as f64 * t.time_step;
            phases.push(phase);
        }
        let initial = if schedule.full > 0 { x0.clone() } else { project(x0) };
        MultiPhaseProblem::new(phases, initial)
    }
}

impl ProblemBuilder for LeggedProblemBuilder {
    fn build(&self, schedule: &AbstractionSchedule, initial_state: Vector) -> Result<MultiPhaseProblem> {
        self.build_from(schedule, &initial_state)
    }
}
