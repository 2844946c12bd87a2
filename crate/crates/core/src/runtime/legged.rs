//! Receding-horizon bounding/running on the simulated five-link plant.

use std::time::Instant;

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::disturbance::{Disturbance, DisturbanceSpec};
use super::log::{EpisodeLog, SolveRecord};
use super::schedule::AbstractionSchedule;
use crate::error::{Error, Result};
use crate::hsddp::{solve, ALReBParams, Solution, SolverOptions};
use crate::legged::control::{
    clamp_leg, clamp_torques, cycloid, set_leg, stance_torque_from_grf, swing_leg_torque, HeuristicController,
    SwingGains,
};
use crate::legged::model::{join_state, project, split_state, LeggedModel, VecQ};
use crate::legged::{LeggedProblemBuilder, LeggedTask};
use crate::multiphase::{rollout_with, ModelLevel, MultiPhaseProblem, QuadraticRunningCost, RunningCost};
use crate::{Matrix, Vector};

/// How surviving modes of the previous plan seed the next solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Replay the previous controls open loop.
    OpenLoop,
    /// On full-model modes, replay them with the previous feedback gains
    /// closed around the previous trajectory.
    #[default]
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeggedEpisodeSettings {
    /// Gait modes simulated.
    pub num_modes: usize,
    pub solver: SolverOptions,
    pub warm_start: WarmStart,
    pub swing: SwingGains,
    /// Swing feet still in the air after the nominal touchdown time keep
    /// descending at this speed.
    pub swing_descent_speed: f64,
    /// The trunk must stay above this fraction of the nominal height.
    pub fall_height_fraction: f64,
    pub fall_pitch: f64,
    /// A flight longer than nominal by more than this counts as a failure.
    pub max_overrun_ms: f64,
}

impl Default for LeggedEpisodeSettings {
    fn default() -> Self {
        LeggedEpisodeSettings {
            num_modes: 16,
            solver: SolverOptions {
                initial_sigma: 1000.0,
                ..SolverOptions::default()
            }
            .with_caps(3, 3),
            warm_start: WarmStart::default(),
            swing: SwingGains::default(),
            swing_descent_speed: 0.5,
            fall_height_fraction: 0.6,
            fall_pitch: 1.0,
            max_overrun_ms: 100.0,
        }
    }
}

/// Whether a logged state sequence stays within the fall thresholds.
pub fn legged_states_upright(states: &[Vector], nominal_height: f64, settings: &LeggedEpisodeSettings) -> bool {
    states.iter().all(|x| upright(x, nominal_height, settings))
}

fn upright(x: &Vector, nominal_height: f64, s: &LeggedEpisodeSettings) -> bool {
    x.iter().all(|v| v.is_finite()) && x[1] > s.fall_height_fraction * nominal_height && x[2].abs() < s.fall_pitch
}

/// Nominal posture at the start of back stance (or left stance), with the
/// stance foot on the ground and velocities made contact-consistent.
pub fn legged_initial_state(task: &LeggedTask) -> Result<Vector> {
    let model = task.model()?;
    let mut x = task.nominal_state(0.0);
    let (q, _) = split_state(&x);
    let leg = task.gait.mode(0).kind.stance_leg().unwrap_or(1);
    let foot = model.foot_position(&q, leg);
    x[1] -= foot.y - task.terrain.height(foot.x);
    model.impact_state(&x, leg)
}

/// First phase of the current plan: `u = ū + K (x − x̄)`.
struct Plan {
    level: ModelLevel,
    states: Vec<Vector>,
    controls: Vec<Vector>,
    gains: Vec<Matrix>,
}

impl Plan {
    fn control(&self, k: usize, x: &Vector) -> Vector {
        let k = k.min(self.controls.len() - 1);
        let xs = if self.level == ModelLevel::Full {
            x.clone()
        } else {
            project(x)
        };
        &self.controls[k] + &self.gains[k] * (xs - &self.states[k])
    }
}

struct Swing {
    start: Vector2<f64>,
    start_time: f64,
    duration: f64,
}

/// Closed-loop episode state for one schedule.
pub struct LeggedRunner {
    task: LeggedTask,
    settings: LeggedEpisodeSettings,
    builder: LeggedProblemBuilder,
    model: LeggedModel,
    heuristic: HeuristicController,
    schedule: AbstractionSchedule,
    cost: QuadraticRunningCost,
    previous: Option<(MultiPhaseProblem, Solution)>,
}

impl LeggedRunner {
    pub fn new(task: LeggedTask, schedule: AbstractionSchedule, settings: LeggedEpisodeSettings) -> Result<Self> {
        settings.solver.validate()?;
        if settings.num_modes == 0 {
            return Err(Error::Config("episode needs at least one gait mode".into()));
        }
        let builder = LeggedProblemBuilder::new(task.clone())?;
        let model = builder.model().clone();
        let heuristic = HeuristicController::new(task.clone(), model.clone());
        let w = &task.weights;
        let cost = QuadraticRunningCost::new(
            Matrix::from_diagonal(&Vector::from_column_slice(&w.full_state)),
            Matrix::from_diagonal(&Vector::from_column_slice(&w.full_control)),
        )
        .with_reference(task.full_reference());
        Ok(LeggedRunner {
            task,
            settings,
            builder,
            model,
            heuristic,
            schedule,
            cost,
            previous: None,
        })
    }

    /// Initial controls: the previous plan shifted by one mode where the
    /// model level matches, the heuristic controller on new full-model
    /// modes and zeros on new simple-model modes. With
    /// [`WarmStart::Feedback`] shifted full-model segments also apply the
    /// previous feedback gains around the previous trajectory.
    pub fn warm_start(&self, problem: &MultiPhaseProblem, schedule: &AbstractionSchedule) -> Result<Vec<Vec<Vector>>> {
        let reused: Vec<Option<usize>> = (0..problem.num_phases())
            .map(|j| {
                let (prev_problem, _) = self.previous.as_ref()?;
                let pp = prev_problem.phases.get(j + 1)?;
                let p = &problem.phases[j];
                (pp.tag.level == p.tag.level && pp.control_dim == p.control_dim && pp.horizon == p.horizon)
                    .then_some(j + 1)
            })
            .collect();
        let gait = &self.task.gait;
        let heuristic = |j: usize, x: &Vector| -> Vector {
            let (q, qd) = split_state(x);
            let stance = gait.mode(schedule.offset + j).kind.stance_leg();
            Vector::from_column_slice(self.heuristic.torque(&q, &qd, stance).as_slice())
        };
        let feedback = self.settings.warm_start == WarmStart::Feedback;
        let traj = rollout_with(problem, |j, k, x| match (reused[j], &self.previous) {
            (Some(i), Some((_, prev))) => {
                let u = &prev.trajectories[i].controls[k];
                if feedback && problem.phases[j].tag.level == ModelLevel::Full {
                    u + &prev.policies[i][k].gain * (x - &prev.trajectories[i].states[k])
                } else {
                    u.clone()
                }
            }
            _ if problem.phases[j].tag.level == ModelLevel::Full => heuristic(j, x),
            _ => Vector::zeros(problem.phases[j].control_dim),
        });
        Ok(match traj {
            Ok(t) => t.into_iter().map(|p| p.controls).collect(),
            Err(_) => problem.zero_controls(),
        })
    }

    fn replan(&mut self, x: &Vector, mode: usize) -> Result<(Plan, SolveRecord)> {
        let start = Instant::now();
        let schedule = self.schedule.clone().starting_at(mode);
        let problem = self.builder.build_from(&schedule, x)?;
        let init = self.warm_start(&problem, &schedule)?;
        let opts = &self.settings.solver;
        let params = ALReBParams::new(problem.num_phases(), opts)?;
        let sol = solve(&problem, &params, opts, &init)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let plan = Plan {
            level: problem.phases[0].tag.level,
            states: sol.trajectories[0].states.clone(),
            controls: sol.trajectories[0].controls.clone(),
            gains: sol.policies[0].iter().map(|p| p.gain.clone()).collect(),
        };
        let record = SolveRecord {
            step: 0,
            wall_ms,
            outer_iterations: sol.outer_iterations,
            inner_iterations: sol.inner_iterations,
            converged: sol.converged,
            planned_cost: sol.total_cost(),
        };
        self.previous = Some((problem, sol));
        Ok((plan, record))
    }

    fn hip_x(&self, q: &VecQ, leg: usize) -> f64 {
        self.model.hip_position(q, leg).x
    }

    /// Nominal time from the start of episode mode `mode` until `leg` next
    /// touches down.
    fn time_to_touchdown(&self, mode: usize, leg: usize) -> f64 {
        let gait = &self.task.gait;
        let mut t = 0.0;
        for i in mode..mode + gait.modes.len() + 1 {
            if gait.mode(i).kind.stance_leg() == Some(leg) && i > mode {
                return t;
            }
            t += gait.mode(i).duration_ms * 1e-3;
        }
        t
    }

    /// Torques mapped from a trunk-model plan: contact force through the
    /// stance leg, Cartesian swing control toward the foothold on the others.
    fn simple_model_torque(
        &self,
        plan: &Plan,
        k: usize,
        x: &Vector,
        stance: Option<usize>,
        t: f64,
        swings: &[Option<Swing>; 2],
    ) -> Vector4<f64> {
        let (q, qd) = split_state(x);
        let mut tau = Vector4::zeros();
        for leg in 0..2 {
            let leg_tau = if stance == Some(leg) {
                let f = plan.control(k, x);
                clamp_leg(
                    &self.model,
                    stance_torque_from_grf(&self.model, &q, leg, &Vector2::new(-f[0], -f[1])),
                )
            } else if let Some(sw) = &swings[leg] {
                let vx = qd[0];
                let t_td = sw.start_time + sw.duration;
                let hip = self.hip_x(&q, leg) + vx * (t_td - t).max(0.0);
                let target = self.task.foothold(leg, hip, vx);
                let s = (t - sw.start_time) / sw.duration;
                let (mut p, mut v) = cycloid(&sw.start, &target, self.settings.swing.apex, s, sw.duration);
                if s > 1.0 {
                    let descent = self.settings.swing_descent_speed;
                    p.y -= descent * (t - t_td);
                    v.y = -descent;
                }
                swing_leg_torque(&self.model, &q, &qd, leg, &p, &v, &self.settings.swing)
            } else {
                Vector2::zeros()
            };
            set_leg(&mut tau, leg, &leg_tau);
        }
        tau
    }

    /// Run the episode from `x0`, pushing the trunk as `disturbance` says.
    pub fn run(&mut self, x0: &Vector, disturbance: Option<&DisturbanceSpec>) -> Result<EpisodeLog> {
        let task = self.task.clone();
        let dt = task.time_step;
        let gait = &task.gait;
        let h_nom = task.params.nominal_height();
        let mut log = EpisodeLog::new(dt);
        log.success = true;
        let mut x = x0.clone();
        let mut t = 0.0;
        let mut step = 0usize;
        let push: Option<Disturbance> = match disturbance {
            Some(d) => {
                d.validate()?;
                let steps = gait.steps(d.mode_index, dt);
                Some(d.sample(steps, dt))
            }
            None => None,
        };
        let mut push_elapsed: Option<usize> = None;
        let (q0, _) = split_state(&x);
        let mut swings: [Option<Swing>; 2] = [None, None];
        for leg in 0..2 {
            if gait.mode(0).kind.stance_leg() != Some(leg) {
                swings[leg] = Some(Swing {
                    start: self.model.foot_position(&q0, leg),
                    start_time: 0.0,
                    duration: self.time_to_touchdown(0, leg),
                });
            }
        }
        self.previous = None;

        'modes: for mode in 0..self.settings.num_modes {
            let kind = gait.mode(mode).kind;
            let stance = kind.stance_leg();
            let nominal = gait.steps(mode, dt);
            let touchdown = gait.touchdown_leg(mode);
            let max_steps = nominal + (self.settings.max_overrun_ms * 1e-3 / dt).round() as usize;
            let mut plan: Option<Plan> = None;
            let mut solve_ms = None;
            let mut k = 0;
            let mut was_below = [true; 2];
            loop {
                if touchdown.is_none() && k >= nominal {
                    break;
                }
                if k > max_steps {
                    log.fail(format!("touchdown overdue in mode {mode}"));
                    break 'modes;
                }
                if plan.is_none() {
                    match self.replan(&x, mode) {
                        Ok((p, mut record)) => {
                            record.step = step;
                            if !record.converged {
                                log.unconverged_solves += 1;
                            }
                            solve_ms = Some(record.wall_ms);
                            log.solves.push(record);
                            plan = Some(p);
                        }
                        Err(e) => {
                            log.fail(format!("solver error in mode {mode}: {e}"));
                            break 'modes;
                        }
                    }
                }
                let plan = plan.as_ref().expect("plan solved above");
                let (q, qd) = split_state(&x);
                let tau = if plan.level == ModelLevel::Full {
                    let u = plan.control(k, &x);
                    clamp_torques(&self.model, &Vector4::new(u[0], u[1], u[2], u[3]))
                } else {
                    self.simple_model_torque(plan, k, &x, stance, t, &swings)
                };
                let u = Vector::from_column_slice(tau.as_slice());
                let cost = self.cost.value(0, &x, &u);

                let active = push.as_ref().is_some_and(|p| p.active(mode, k, push_elapsed));
                if active && push_elapsed.is_none() {
                    push_elapsed = Some(0);
                }
                let external = match (&push, active) {
                    (Some(p), true) => {
                        let (_, jp) = self.model.trunk_point(&q, p.location);
                        Some(jp.transpose() * p.force)
                    }
                    _ => None,
                };
                if let Some(e) = push_elapsed.as_mut() {
                    *e += 1;
                }

                log.push_step(&x, u, cost, solve_ms.take());
                let acc = match self.model.forward_dynamics(&q, &qd, &tau, stance, external.as_ref()) {
                    Ok(a) => a,
                    Err(e) => {
                        log.fail(format!("plant dynamics failed in mode {mode}: {e}"));
                        break 'modes;
                    }
                };
                x = join_state(&(q + qd * dt), &(qd + acc.qdd * dt));
                t += dt;
                step += 1;
                k += 1;
                if !upright(&x, h_nom, &self.settings) {
                    log.fail(format!("fell in mode {mode}"));
                    break 'modes;
                }
                if let Some(leg) = touchdown {
                    let (q, qd) = split_state(&x);
                    let foot = self.model.foot_position(&q, leg);
                    let v = self.model.foot_velocity(&q, &qd, leg);
                    let below = foot.y <= task.terrain.height(foot.x);
                    // Contact is made by crossing the ground from above, or by
                    // being below it once the nominal flight time is up.
                    let landed = below && (v.y < 0.0 && !was_below[leg] || k >= nominal);
                    was_below[leg] = below;
                    if landed {
                        match self.model.impact_state(&x, leg) {
                            Ok(xp) => x = xp,
                            Err(e) => {
                                log.fail(format!("impact failed in mode {mode}: {e}"));
                                break 'modes;
                            }
                        }
                        swings[leg] = None;
                        break;
                    }
                }
            }
            if let Some(leg) = stance {
                let (q, _) = split_state(&x);
                swings[leg] = Some(Swing {
                    start: self.model.foot_position(&q, leg),
                    start_time: t,
                    duration: self.time_to_touchdown(mode, leg) - gait.mode(mode).duration_ms * 1e-3,
                });
            }
        }
        log.states.push(x);
        Ok(log)
    }
}

/// One closed-loop episode of `task` under `schedule`, starting from the
/// nominal posture. Falls and solver breakdowns are reported in the log.
pub fn simulate_legged_episode(
    task: &LeggedTask,
    schedule: &AbstractionSchedule,
    settings: &LeggedEpisodeSettings,
    disturbance: Option<&DisturbanceSpec>,
) -> Result<EpisodeLog> {
    let x0 = legged_initial_state(task)?;
    let mut runner = LeggedRunner::new(task.clone(), schedule.clone(), settings.clone())?;
    runner.run(&x0, disturbance)
}
