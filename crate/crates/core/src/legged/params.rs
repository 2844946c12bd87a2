use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RobotKind {
    #[default]
    Quadruped,
    Biped,
}

/// Planar five-link robot: a trunk with two two-link legs.
///
/// Leg 0 is the front (quadruped) or left (biped) leg, leg 1 the back or
/// right leg. Joint angles are relative; zero hip and knee angles put the
/// whole leg straight down from the hip. Positive angles rotate
/// counter-clockwise in the sagittal (x forward, z up) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeggedParams {
    pub kind: RobotKind,
    pub trunk_mass: f64,
    pub trunk_inertia: f64,
    pub thigh_mass: f64,
    pub shank_mass: f64,
    pub thigh_length: f64,
    pub shank_length: f64,
    /// Distance from the proximal joint to the link CoM.
    pub thigh_com: f64,
    pub shank_com: f64,
    pub thigh_inertia: f64,
    pub shank_inertia: f64,
    /// Hip positions in the trunk frame, per leg.
    pub hip_offsets: [[f64; 2]; 2],
    pub gravity: f64,
    /// `[hip, knee]` torque limits.
    pub torque_limits: [f64; 2],
    pub friction: f64,
    /// `[hip, knee]` joint angles of the nominal standing posture.
    pub nominal_joints: [f64; 2],
}

impl Default for LeggedParams {
    fn default() -> Self {
        Self::quadruped()
    }
}

impl LeggedParams {
    /// Mini Cheetah–class planar quadruped; left and right legs are lumped.
    pub fn quadruped() -> Self {
        let (l1, l2) = (0.21, 0.21);
        let (m1, m2) = (0.9, 0.6);
        LeggedParams {
            kind: RobotKind::Quadruped,
            trunk_mass: 6.0,
            trunk_inertia: 0.11,
            thigh_mass: m1,
            shank_mass: m2,
            thigh_length: l1,
            shank_length: l2,
            thigh_com: 0.5 * l1,
            shank_com: 0.5 * l2,
            thigh_inertia: m1 * l1 * l1 / 12.0,
            shank_inertia: m2 * l2 * l2 / 12.0,
            hip_offsets: [[0.19, 0.0], [-0.19, 0.0]],
            gravity: 9.81,
            torque_limits: [34.0, 50.0],
            friction: 0.7,
            nominal_joints: [-0.8, 1.6],
        }
    }

    /// Ernie-class five-link biped with both hips below the trunk CoM.
    pub fn biped() -> Self {
        let (l1, l2) = (0.35, 0.35);
        let (m1, m2) = (1.5, 0.5);
        LeggedParams {
            kind: RobotKind::Biped,
            trunk_mass: 10.0,
            trunk_inertia: 0.3,
            thigh_mass: m1,
            shank_mass: m2,
            thigh_length: l1,
            shank_length: l2,
            thigh_com: 0.5 * l1,
            shank_com: 0.5 * l2,
            thigh_inertia: m1 * l1 * l1 / 12.0,
            shank_inertia: m2 * l2 * l2 / 12.0,
            hip_offsets: [[0.0, -0.1], [0.0, -0.1]],
            gravity: 9.81,
            torque_limits: [60.0, 60.0],
            friction: 0.7,
            nominal_joints: [-0.5, 1.0],
        }
    }

    pub fn for_kind(kind: RobotKind) -> Self {
        match kind {
            RobotKind::Quadruped => Self::quadruped(),
            RobotKind::Biped => Self::biped(),
        }
    }

    pub fn leg_mass(&self) -> f64 {
        self.thigh_mass + self.shank_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.trunk_mass + 2.0 * self.leg_mass()
    }

    /// Pitch inertia used by the trunk model: trunk plus leg masses lumped at the hips.
    pub fn trunk_model_inertia(&self) -> f64 {
        self.trunk_inertia
            + self
                .hip_offsets
                .iter()
                .map(|h| self.leg_mass() * (h[0] * h[0] + h[1] * h[1]))
                .sum::<f64>()
    }

    /// CoM height of the nominal posture with level trunk and feet on flat ground.
    pub fn nominal_height(&self) -> f64 {
        let [qh, qk] = self.nominal_joints;
        let z_knee = -self.thigh_length * qh.cos();
        let z_foot = z_knee - self.shank_length * (qh + qk).cos();
        -(self.hip_offsets[0][1] + z_foot)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("trunk_mass", self.trunk_mass),
            ("trunk_inertia", self.trunk_inertia),
            ("thigh_mass", self.thigh_mass),
            ("shank_mass", self.shank_mass),
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("thigh_inertia", self.thigh_inertia),
            ("shank_inertia", self.shank_inertia),
            ("friction", self.friction),
            ("hip torque limit", self.torque_limits[0]),
            ("knee torque limit", self.torque_limits[1]),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gravity < 0.0 {
            return Err(Error::Parameter("gravity must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitModeKind {
    BackStance,
    Flight1,
    FrontStance,
    Flight2,
    LeftStance,
    RightStance,
    Flight,
}

impl GaitModeKind {
    /// Index of the leg in contact, if any.
    pub fn stance_leg(self) -> Option<usize> {
        match self {
            GaitModeKind::FrontStance | GaitModeKind::LeftStance => Some(0),
            GaitModeKind::BackStance | GaitModeKind::RightStance => Some(1),
            GaitModeKind::Flight1 | GaitModeKind::Flight2 | GaitModeKind::Flight => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GaitModeKind::BackStance => "back_stance",
            GaitModeKind::Flight1 => "flight1",
            GaitModeKind::FrontStance => "front_stance",
            GaitModeKind::Flight2 => "flight2",
            GaitModeKind::LeftStance => "left_stance",
            GaitModeKind::RightStance => "right_stance",
            GaitModeKind::Flight => "flight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitMode {
    pub kind: GaitModeKind,
    pub duration_ms: f64,
}

/// One periodic gait cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitTable {
    pub modes: Vec<GaitMode>,
}

impl GaitTable {
    pub fn bounding() -> Self {
        use GaitModeKind::*;
        GaitTable {
            modes: vec![
                GaitMode {
                    kind: BackStance,
                    duration_ms: 80.0,
                },
                GaitMode {
                    kind: Flight1,
                    duration_ms: 72.0,
                },
                GaitMode {
                    kind: FrontStance,
                    duration_ms: 72.0,
                },
                GaitMode {
                    kind: Flight2,
                    duration_ms: 72.0,
                },
            ],
        }
    }

    pub fn running() -> Self {
        use GaitModeKind::*;
        GaitTable {
            modes: vec![
                GaitMode {
                    kind: LeftStance,
                    duration_ms: 110.0,
                },
                GaitMode {
                    kind: Flight,
                    duration_ms: 80.0,
                },
                GaitMode {
                    kind: RightStance,
                    duration_ms: 110.0,
                },
                GaitMode {
                    kind: Flight,
                    duration_ms: 80.0,
                },
            ],
        }
    }

    pub fn for_kind(kind: RobotKind) -> Self {
        match kind {
            RobotKind::Quadruped => Self::bounding(),
            RobotKind::Biped => Self::running(),
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Mode at cyclic position `index`.
    pub fn mode(&self, index: usize) -> GaitMode {
        self.modes[index % self.modes.len()]
    }

    pub fn steps(&self, index: usize, dt: f64) -> usize {
        ((self.mode(index).duration_ms * 1e-3) / dt).round().max(1.0) as usize
    }

    pub fn cycle_duration(&self) -> f64 {
        self.modes.iter().map(|m| m.duration_ms).sum::<f64>() * 1e-3
    }

    /// Leg that touches down at the end of the flight mode at `index`.
    pub fn touchdown_leg(&self, index: usize) -> Option<usize> {
        match self.mode(index).kind.stance_leg() {
            Some(_) => None,
            None => self.mode(index + 1).kind.stance_leg(),
        }
    }

    /// Duration of the stance of `leg` in seconds.
    pub fn stance_duration(&self, leg: usize) -> f64 {
        self.modes
            .iter()
            .find(|m| m.kind.stance_leg() == Some(leg))
            .map_or(0.0, |m| m.duration_ms * 1e-3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("gait table has no modes".into()));
        }
        if self.modes.iter().any(|m| !(m.duration_ms > 0.0)) {
            return Err(Error::Config("gait mode durations must be positive".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            let next = self.modes[(i + 1) % self.modes.len()];
            if m.kind.stance_leg().is_some() && next.kind.stance_leg().is_some() {
                return Err(Error::Config(format!(
                    "mode {i} ({}) is followed by another stance mode",
                    m.kind.name()
                )));
            }
        }
        Ok(())
    }
}
