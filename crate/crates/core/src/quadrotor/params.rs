use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadrotorParams {
    pub mass: f64,
    /// Diagonal of the body inertia.
    pub inertia: [f64; 3],
    pub arm_length: f64,
    /// Yaw moment per unit thrust.
    pub yaw_ratio: f64,
    /// Per-rotor thrust range in newtons.
    pub thrust_min: f64,
    pub thrust_max: f64,
    pub gravity: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        QuadrotorParams {
            mass: 0.5,
            inertia: [2.3e-3, 2.3e-3, 4e-3],
            arm_length: 0.1,
            yaw_ratio: 0.02,
            thrust_min: 0.0,
            thrust_max: 4.0,
            gravity: 9.81,
        }
    }
}

impl QuadrotorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || self.inertia.iter().any(|&i| !(i > 0.0)) {
            return Err(Error::Config("quadrotor mass and inertia must be positive".into()));
        }
        if !(self.arm_length > 0.0) {
            return Err(Error::Config("quadrotor arm length must be positive".into()));
        }
        if !(self.thrust_max > self.thrust_min) {
            return Err(Error::Config("thrust_max must exceed thrust_min".into()));
        }
        Ok(())
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.inertia))
    }

    /// World-frame gravity vector.
    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.gravity)
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity / 4.0
    }
}
