//! Run one pushed bounding episode and print a per-solve summary.
//!
//! `cargo run --release -p mhpc --example bounding -- 2 6 80`
//! (full modes, simple modes, push in newtons, push seed)

use mhpc::legged::model::split_state;
use mhpc::legged::LeggedTask;
use mhpc::runtime::{simulate_legged_episode, AbstractionSchedule, DisturbanceSpec, LeggedEpisodeSettings};

fn main() -> mhpc::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let full = args.first().copied().unwrap_or(2.0) as usize;
    let simple = args.get(1).copied().unwrap_or(6.0) as usize;
    let push = DisturbanceSpec {
        magnitude: args.get(2).copied().unwrap_or(0.0),
        seed: args.get(3).copied().unwrap_or(0.0) as u64,
        ..DisturbanceSpec::default()
    };
    let task = LeggedTask::default();
    let schedule = AbstractionSchedule::legged(full, simple)?;
    let log = simulate_legged_episode(&task, &schedule, &LeggedEpisodeSettings::default(), Some(&push))?;
    for s in &log.solves {
        let (q, qd) = split_state(&log.states[s.step]);
        println!(
            "step {:4}  {:7.1} ms  outer {} inner {:2} conv {:5}  cost {:10.3}  x {:6.3} z {:5.3} pitch {:6.3} vx {:6.3}",
            s.step, s.wall_ms, s.outer_iterations, s.inner_iterations, s.converged, s.planned_cost, q[0], q[1], q[2], qd[0]
        );
    }
    println!("{:?}", log.summary());
    Ok(())
}
