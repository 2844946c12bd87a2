//! Closed-loop execution: schedules, disturbances, episode logs and the
//! receding-horizon runners.

pub mod disturbance;
pub mod legged;
pub mod log;
pub mod quadrotor;
pub mod schedule;

pub use disturbance::{Disturbance, DisturbanceSpec};
pub use legged::{legged_initial_state, simulate_legged_episode, LeggedEpisodeSettings, LeggedRunner};
pub use log::{EpisodeLog, EpisodeSummary, SolveRecord};
pub use quadrotor::{converted_horizon, simulate_quadrotor_episode, QuadrotorEpisodeSettings, QuadrotorRunner};
pub use schedule::{AbstractionSchedule, ReplanCadence};
