//! Quadrotor hierarchy: a rigid body with four rotors and a point mass.

pub mod costs;
pub mod dynamics;
pub mod params;
pub mod problem;

pub use costs::{LqrTerminalCost, ObstacleField, ObstacleLayout, Sphere};
pub use dynamics::{PointMass, QuadrotorModel, QuadrotorProjection, QuadrotorSpace, QuadrotorStep};
pub use params::QuadrotorParams;
pub use problem::{GoalPose, QuadrotorProblemBuilder, QuadrotorTask, QuadrotorWeights};
