//! Planar quadruped and biped model hierarchy.

pub mod control;
pub mod model;
pub mod params;
pub mod problem;
pub mod terrain;

pub use model::{LeggedModel, TrunkModel};
pub use params::{GaitMode, GaitModeKind, GaitTable, LeggedParams, RobotKind};
pub use problem::{LeggedProblemBuilder, LeggedTask, LeggedWeights};
pub use terrain::{GapSpec, Terrain};
