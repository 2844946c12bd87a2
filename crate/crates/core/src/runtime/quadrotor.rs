//! Receding-horizon flight: re-plan at every control step, apply the first
//! planned thrusts to the rigid-body plant.

use std::time::Instant;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use super::log::{EpisodeLog, SolveRecord};
use crate::error::{Error, Result};
use crate::hsddp::{solve, ALReBParams, SolverOptions};
use crate::multiphase::{MultiPhaseProblem, RunningCost};
use crate::quadrotor::dynamics::position;
use crate::quadrotor::problem::FullStage;
use crate::quadrotor::{QuadrotorModel, QuadrotorProblemBuilder, QuadrotorTask};
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadrotorEpisodeSettings {
    /// Control steps simulated.
    pub steps: usize,
    pub solver: SolverOptions,
}

impl Default for QuadrotorEpisodeSettings {
    fn default() -> Self {
        QuadrotorEpisodeSettings {
            steps: 250,
            solver: SolverOptions::default().with_caps(1, 5),
        }
    }
}

/// Full- and simple-model step counts for a horizon of `horizon_steps`
/// full-model steps with a fraction `conversion` of them exchanged for
/// `ratio` simple-model steps each.
pub fn converted_horizon(horizon_steps: usize, conversion: f64, ratio: f64) -> (usize, usize) {
    let n = horizon_steps as f64;
    let full = ((1.0 - conversion) * n).round() as usize;
    let simple = (ratio * conversion * n).round() as usize;
    (full, simple)
}

pub struct QuadrotorRunner {
    pub task: QuadrotorTask,
    pub settings: QuadrotorEpisodeSettings,
    builder: QuadrotorProblemBuilder,
    model: QuadrotorModel,
    stage: FullStage,
    full: usize,
    simple: usize,
}

impl QuadrotorRunner {
    /// `full` rigid-body steps followed by `simple` point-mass steps.
    pub fn new(task: QuadrotorTask, full: usize, simple: usize, settings: QuadrotorEpisodeSettings) -> Result<Self> {
        if full == 0 {
            return Err(Error::Config(
                "quadrotor episodes need at least one full-model step to act on".into(),
            ));
        }
        settings.solver.validate()?;
        let builder = QuadrotorProblemBuilder::new(task.clone())?;
        Ok(QuadrotorRunner {
            model: builder.model.clone(),
            stage: FullStage { task: task.clone() },
            task,
            settings,
            builder,
            full,
            simple,
        })
    }

    /// Previous controls advanced by one step, each phase padded by
    /// repeating its last control.
    pub fn shift_controls(previous: &[Vec<Vector>]) -> Vec<Vec<Vector>> {
        previous
            .iter()
            .map(|phase| {
                let mut c: Vec<Vector> = phase.iter().skip(1).cloned().collect();
                if let Some(last) = phase.last() {
                    c.push(last.clone());
                }
                c
            })
            .collect()
    }

    fn build(&self, x: &Vector) -> Result<MultiPhaseProblem> {
        self.builder.build_steps(self.full, self.simple, x)
    }

    fn clamp(&self, u: &Vector) -> Vector4<f64> {
        let p = &self.task.params;
        Vector4::from_fn(|i, _| u[i].clamp(p.thrust_min, p.thrust_max))
    }

    pub fn run(&mut self) -> Result<EpisodeLog> {
        let dt = self.task.time_step;
        let opts = self.settings.solver.clone();
        let mut log = EpisodeLog::new(dt);
        log.success = true;
        let mut x = self.task.initial_state();
        let mut previous: Option<Vec<Vec<Vector>>> = None;
        for step in 0..self.settings.steps {
            let start = Instant::now();
            let problem = self.build(&x)?;
            let init = match &previous {
                Some(p) => Self::shift_controls(p),
                None => problem.zero_controls(),
            };
            let params = ALReBParams::new(problem.num_phases(), &opts)?;
            let (u_plan, record) = match solve(&problem, &params, &opts, &init) {
                Ok(sol) => {
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    let record = SolveRecord {
                        step,
                        wall_ms,
                        outer_iterations: sol.outer_iterations,
                        inner_iterations: sol.inner_iterations,
                        converged: sol.converged,
                        planned_cost: sol.total_cost(),
                    };
                    let controls: Vec<Vec<Vector>> = sol.trajectories.iter().map(|t| t.controls.clone()).collect();
                    let u = controls[0][0].clone();
                    previous = Some(controls);
                    (u, record)
                }
                Err(_) => {
                    // Keep flying the previous plan.
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    let shifted = match &previous {
                        Some(p) => Self::shift_controls(p),
                        None => {
                            log.fail("initial solve failed");
                            break;
                        }
                    };
                    let u = shifted[0][0].clone();
                    previous = Some(shifted);
                    let record = SolveRecord {
                        step,
                        wall_ms,
                        outer_iterations: 0,
                        inner_iterations: 0,
                        converged: false,
                        planned_cost: f64::NAN,
                    };
                    (u, record)
                }
            };
            if !record.converged {
                log.unconverged_solves += 1;
            }
            let u = self.clamp(&u_plan);
            let u_vec = Vector::from_column_slice(u.as_slice());
            let cost = self.stage.value(step, &x, &u_vec);
            log.push_step(&x, u_vec, cost, Some(record.wall_ms));
            log.solves.push(record);
            x = self.model.step(&x, &u, dt);
            if !x.iter().all(|v| v.is_finite()) {
                log.fail(format!("plant diverged at step {step}"));
                break;
            }
            let clearance = self.task.obstacles.min_clearance(&position(&x));
            if clearance < 0.0 && log.success {
                log.fail(format!("collision at step {step} (clearance {clearance:.4} m)"));
            }
        }
        log.states.push(x);
        Ok(log)
    }
}

/// One closed-loop flight with `full` rigid-body and `simple` point-mass
/// steps in every plan.
pub fn simulate_quadrotor_episode(
    task: &QuadrotorTask,
    full: usize,
    simple: usize,
    settings: &QuadrotorEpisodeSettings,
) -> Result<EpisodeLog> {
    QuadrotorRunner::new(task.clone(), full, simple, settings.clone())?.run()
}
