use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A push on the trunk during one gait mode of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSpec {
    /// Force magnitude in newtons.
    pub magnitude: f64,
    pub duration_ms: f64,
    /// Episode-wide index of the gait mode in which the push starts.
    pub mode_index: usize,
    /// Start of the push as a fraction of the nominal mode duration.
    pub phase_fraction: f64,
    /// Application points are drawn uniformly along this length, centered on the CoM.
    pub trunk_length: f64,
    pub seed: u64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec {
            magnitude: 0.0,
            duration_ms: 30.0,
            mode_index: 7,
            phase_fraction: 0.0,
            trunk_length: 0.38,
            seed: 0,
        }
    }
}

/// A sampled push: body-frame location along the trunk axis and a world-frame force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub force: Vector2<f64>,
    pub location: f64,
    pub mode_index: usize,
    pub start_step: usize,
    pub duration_steps: usize,
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0) {
            return Err(Error::Config("disturbance magnitude must be non-negative".into()));
        }
        if !(self.duration_ms > 0.0) {
            return Err(Error::Config("disturbance duration must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.phase_fraction) {
            return Err(Error::Config("disturbance phase fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Draw location and direction from the seed. The magnitude does not
    /// affect the draw, so trials with equal seeds push at the same spot in
    /// the same direction.
    pub fn sample(&self, mode_steps: usize, dt: f64) -> Disturbance {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let location = (rng.random::<f64>() - 0.5) * self.trunk_length;
        let angle = rng.random::<f64>() * 2.0 * PI;
        Disturbance {
            force: Vector2::new(angle.cos(), angle.sin()) * self.magnitude,
            location,
            mode_index: self.mode_index,
            start_step: (self.phase_fraction * mode_steps as f64).floor() as usize,
            duration_steps: ((self.duration_ms * 1e-3) / dt).round() as usize,
        }
    }
}

impl Disturbance {
    /// Whether the push acts at `step` steps into episode mode `mode`.
    /// Pushes that outlast their mode continue into the next one.
    pub fn active(&self, mode: usize, step_in_mode: usize, steps_since_start: Option<usize>) -> bool {
        match steps_since_start {
            Some(s) => s < self.duration_steps,
            None => mode == self.mode_index && step_in_mode >= self.start_step,
        }
    }
}
