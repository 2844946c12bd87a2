//! Benchmark protocols: robustness curves, normalized timing, the
//! quadrotor horizon-budget sweep and the gap crossing.

use std::time::Instant;

use anyhow::{bail, Result};
use mhpc::hsddp::{solve, ALReBParams, Solution};
use mhpc::legged::model::NQ;
use mhpc::legged::LeggedProblemBuilder;
use mhpc::quadrotor::dynamics::position;
use mhpc::quadrotor::QuadrotorProblemBuilder;
use mhpc::runtime::{
    converted_horizon, legged_initial_state, simulate_legged_episode, simulate_quadrotor_episode, AbstractionSchedule,
    DisturbanceSpec, EpisodeLog, LeggedEpisodeSettings, LeggedRunner,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, Schedule};
use crate::stats::{mean_std, wilson_interval, Z95};

pub fn label(s: &Schedule) -> String {
    format!("({},{})", s[0], s[1])
}

/// Outcome of one disturbed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schedule: String,
    pub full: usize,
    pub simple: usize,
    pub magnitude: f64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub failure: Option<String>,
    pub total_cost: f64,
    pub unconverged_solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub magnitude: f64,
    pub trials: usize,
    pub successes: usize,
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub schedule: String,
    pub full: usize,
    pub simple: usize,
    pub points: Vec<CurvePoint>,
}

impl RobustnessCurve {
    /// Magnitudes at which the success rate is higher than at the level below.
    pub fn non_monotone(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .filter(|w| w[1].probability > w[0].probability)
            .map(|w| w[1].magnitude)
            .collect()
    }

    pub fn probability_at(&self, magnitude: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.magnitude == magnitude)
            .map(|p| p.probability)
    }
}

fn legged_episode(
    config: &ScenarioConfig,
    schedule: &Schedule,
    settings: &LeggedEpisodeSettings,
    push: Option<&DisturbanceSpec>,
    gap: bool,
) -> mhpc::Result<EpisodeLog> {
    let task = if gap { config.gap_task() } else { config.legged_task() };
    let s = AbstractionSchedule::legged(schedule[0], schedule[1])?;
    simulate_legged_episode(&task, &s, settings, push)
}

/// Seeded disturbed episodes over every schedule and magnitude. Episodes
/// run on the rayon pool; results come back in job order.
pub fn run_robustness(config: &ScenarioConfig, trials: usize) -> Result<(Vec<RobustnessCurve>, Vec<TrialRecord>)> {
    config.validate()?;
    let schedules = config.robustness_schedules();
    let mut jobs = Vec::new();
    for s in &schedules {
        for &m in &config.magnitudes {
            for t in 0..trials {
                jobs.push((*s, m, t));
            }
        }
    }
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(s, magnitude, trial)| {
            let seed = config.trial_seed(trial);
            let push = DisturbanceSpec {
                magnitude,
                seed,
                ..config.disturbance
            };
            let (success, failure, total_cost, unconverged) =
                match legged_episode(config, &s, &config.episode, Some(&push), false) {
                    Ok(log) => (
                        log.success,
                        log.failure.clone(),
                        log.total_cost(),
                        log.unconverged_solves,
                    ),
                    Err(e) => (false, Some(e.to_string()), f64::NAN, 0),
                };
            TrialRecord {
                schedule: label(&s),
                full: s[0],
                simple: s[1],
                magnitude,
                trial,
                seed,
                success,
                failure,
                total_cost,
                unconverged_solves: unconverged,
            }
        })
        .collect();
    let curves = schedules
        .iter()
        .map(|s| RobustnessCurve {
            schedule: label(s),
            full: s[0],
            simple: s[1],
            points: config
                .magnitudes
                .iter()
                .map(|&m| {
                    let hits: Vec<&TrialRecord> = records
                        .iter()
                        .filter(|r| r.full == s[0] && r.simple == s[1] && r.magnitude == m)
                        .collect();
                    let successes = hits.iter().filter(|r| r.success).count();
                    let (probability, lower, upper) = wilson_interval(successes, hits.len(), Z95);
                    CurvePoint {
                        magnitude: m,
                        trials: hits.len(),
                        successes,
                        probability,
                        lower,
                        upper,
                    }
                })
                .collect(),
        })
        .collect();
    Ok((curves, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub schedule: String,
    pub full: usize,
    pub simple: usize,
    pub solves: usize,
    pub success: bool,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Mean and spread of per-solve ratios to the reference schedule's
    /// solve at the same gait mode.
    pub normalized_mean: f64,
    pub normalized_std: f64,
}

/// Undisturbed episodes of `timing.solves` gait modes, one solve each.
/// Runs sequentially so that solves do not compete for cores.
pub fn run_timing(config: &ScenarioConfig) -> Result<Vec<TimingRow>> {
    config.validate()?;
    let mut schedules = config.timing_schedules();
    if !schedules.contains(&config.timing.reference) {
        schedules.push(config.timing.reference);
    }
    let settings = LeggedEpisodeSettings {
        num_modes: config.timing.solves,
        ..config.episode.clone()
    };
    let mut runs = Vec::new();
    for s in &schedules {
        let log = legged_episode(config, s, &settings, None, false)?;
        let times: Vec<f64> = log
            .solves
            .iter()
            .map(|r| r.wall_ms)
            .take(config.timing.solves)
            .collect();
        runs.push((*s, log.success, times));
    }
    let reference = runs
        .iter()
        .find(|(s, _, _)| *s == config.timing.reference)
        .map(|(_, _, t)| t.clone())
        .unwrap_or_default();
    Ok(runs
        .into_iter()
        .map(|(s, success, times)| {
            let (mean_ms, std_ms) = mean_std(&times);
            let ratios: Vec<f64> = times.iter().zip(&reference).map(|(t, r)| t / r).collect();
            let (normalized_mean, normalized_std) = mean_std(&ratios);
            TimingRow {
                schedule: label(&s),
                full: s[0],
                simple: s[1],
                solves: times.len(),
                success,
                mean_ms,
                std_ms,
                normalized_mean,
                normalized_std,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub horizon: f64,
    pub fraction: f64,
    pub full_steps: usize,
    pub simple_steps: usize,
    pub success: bool,
    pub failure: Option<String>,
    pub total_cost: f64,
    /// Cost over the pure full-model cost at the same horizon.
    pub relative_cost: f64,
    pub min_clearance: f64,
    pub mean_solve_ms: f64,
}

/// Closed-loop quadrotor flights for every horizon and conversion fraction.
pub fn run_budget_sweep(config: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let q = &config.quadrotor;
    let dt = q.task.time_step;
    let mut jobs = Vec::new();
    for &h in &q.horizons {
        for &c in &q.fractions {
            jobs.push((h, c));
        }
    }
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(horizon, fraction)| {
            let n = (horizon / dt).round() as usize;
            let (full, simple) = converted_horizon(n, fraction, q.step_ratio);
            let log = simulate_quadrotor_episode(&q.task, full, simple, &q.episode)?;
            let min_clearance = log
                .states
                .iter()
                .map(|x| q.task.obstacles.min_clearance(&position(x)))
                .fold(f64::INFINITY, f64::min);
            Ok(SweepRow {
                horizon,
                fraction,
                full_steps: full,
                simple_steps: simple,
                success: log.success,
                failure: log.failure.clone(),
                total_cost: log.total_cost(),
                relative_cost: f64::NAN,
                min_clearance,
                mean_solve_ms: log.mean_solve_ms(),
            })
        })
        .collect::<Result<_>>()?;
    let bases: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.fraction == 0.0)
        .map(|r| (r.horizon, r.total_cost))
        .collect();
    for r in &mut rows {
        if let Some((_, base)) = bases.iter().find(|(h, _)| *h == r.horizon) {
            r.relative_cost = r.total_cost / base;
        }
    }
    Ok(rows)
}

/// Whether some nonzero fraction at `horizon` costs no more than the pure
/// full-model run.
pub fn sweep_improves(rows: &[SweepRow], horizon: f64) -> Option<bool> {
    let at: Vec<&SweepRow> = rows.iter().filter(|r| r.horizon == horizon).collect();
    let base = at.iter().find(|r| r.fraction == 0.0)?.total_cost;
    Some(at.iter().any(|r| r.fraction > 0.0 && r.total_cost <= base))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub schedule: String,
    pub full: usize,
    pub simple: usize,
    pub success: bool,
    pub failure: Option<String>,
    pub rollout_cost: f64,
    /// RMS of forward speed minus the target.
    pub speed_error: f64,
    pub final_x: f64,
    pub mean_solve_ms: f64,
}

pub fn run_gap(config: &ScenarioConfig) -> Result<Vec<GapRow>> {
    config.validate()?;
    if config.robot != mhpc::legged::RobotKind::Quadruped {
        bail!("the gap scenario is defined for the quadruped");
    }
    let settings = config.gap_settings();
    config
        .gap
        .schedules
        .par_iter()
        .map(|s| {
            let log = legged_episode(config, s, &settings, None, true)?;
            let errs: Vec<f64> = log.states.iter().map(|x| x[NQ] - config.gap.desired_speed).collect();
            let speed_error = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len().max(1) as f64).sqrt();
            Ok(GapRow {
                schedule: label(s),
                full: s[0],
                simple: s[1],
                success: log.success,
                failure: log.failure.clone(),
                rollout_cost: log.total_cost(),
                speed_error,
                final_x: log.states.last().map_or(f64::NAN, |x| x[0]),
                mean_solve_ms: log.mean_solve_ms(),
            })
        })
        .collect()
}

/// A single open-loop solve from the nominal start, for inspection.
pub struct SingleSolve {
    pub solution: Solution,
    pub wall_ms: f64,
}

/// Legged schedules are in gait modes; quadrotor schedules in time steps.
pub fn solve_once(config: &ScenarioConfig, schedule: &Schedule, quadrotor: bool) -> Result<SingleSolve> {
    config.validate()?;
    let (problem, opts, init) = if quadrotor {
        let task = &config.quadrotor.task;
        let builder = QuadrotorProblemBuilder::new(task.clone())?;
        let problem = builder.build_steps(schedule[0], schedule[1], &task.initial_state())?;
        let init = problem.zero_controls();
        (problem, config.quadrotor.episode.solver.clone(), init)
    } else {
        let task = config.legged_task();
        let s = AbstractionSchedule::legged(schedule[0], schedule[1])?;
        let x0 = legged_initial_state(&task)?;
        let problem = LeggedProblemBuilder::new(task.clone())?.build_from(&s, &x0)?;
        let runner = LeggedRunner::new(task, s.clone(), config.episode.clone())?;
        let init = runner.warm_start(&problem, &s)?;
        (problem, config.episode.solver.clone(), init)
    };
    let params = ALReBParams::new(problem.num_phases(), &opts)?;
    let start = Instant::now();
    let solution = solve(&problem, &params, &opts, &init)?;
    Ok(SingleSolve {
        solution,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
