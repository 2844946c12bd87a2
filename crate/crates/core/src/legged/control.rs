//! Low-level leg controllers: contact-force mapping for stance legs, a
//! cycloidal Cartesian PD for swing legs, and the heuristic bounding
//! controller used to seed the first full-model plan.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::model::{hip_index, knee_index, LeggedModel, VecQ};
use super::problem::LeggedTask;

/// Joint torques `τ = J_legᵀ F` of `leg`, where `F` is the force the foot
/// exerts on the environment. A ground reaction `f` on the robot is
/// produced by `F = −f`.
pub fn stance_torque_from_grf(model: &LeggedModel, q: &VecQ, leg: usize, force: &Vector2<f64>) -> Vector2<f64> {
    model.leg_jacobian(q, leg).transpose() * force
}

/// Point on a cycloid from `start` to `end` lifting by `apex`, at phase
/// `s ∈ [0, 1]` of a swing lasting `duration`. Returns position and velocity.
pub fn cycloid(
    start: &Vector2<f64>,
    end: &Vector2<f64>,
    apex: f64,
    s: f64,
    duration: f64,
) -> (Vector2<f64>, Vector2<f64>) {
    let s = s.clamp(0.0, 1.0);
    let phi = 2.0 * PI * s;
    let dphi = 2.0 * PI / duration.max(1e-9);
    let a = (phi - phi.sin()) / (2.0 * PI);
    let da = (1.0 - phi.cos()) / (2.0 * PI) * dphi;
    let lift = 0.5 * apex * (1.0 - phi.cos());
    let dlift = 0.5 * apex * phi.sin() * dphi;
    let pos = start + (end - start) * a + Vector2::new(0.0, lift);
    let vel = (end - start) * da + Vector2::new(0.0, dlift);
    (pos, vel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwingGains {
    pub kp: [f64; 2],
    pub kd: [f64; 2],
    pub apex: f64,
}

impl Default for SwingGains {
    fn default() -> Self {
        SwingGains {
            kp: [2000.0, 2000.0],
            kd: [40.0, 40.0],
            apex: 0.07,
        }
    }
}

/// Cartesian PD on the foot, `τ = Jᵀ (K_p e + K_d ė)`, clamped to the torque limits.
pub fn swing_leg_torque(
    model: &LeggedModel,
    q: &VecQ,
    qd: &VecQ,
    leg: usize,
    target: &Vector2<f64>,
    target_velocity: &Vector2<f64>,
    gains: &SwingGains,
) -> Vector2<f64> {
    let p = model.foot_position(q, leg);
    let v = model.foot_velocity(q, qd, leg);
    let e = target - p;
    let ed = target_velocity - v;
    let f = Vector2::new(
        gains.kp[0] * e.x + gains.kd[0] * ed.x,
        gains.kp[1] * e.y + gains.kd[1] * ed.y,
    );
    clamp_leg(model, stance_torque_from_grf(model, q, leg, &f))
}

pub fn clamp_leg(model: &LeggedModel, tau: Vector2<f64>) -> Vector2<f64> {
    let lim = model.params.torque_limits;
    Vector2::new(tau.x.clamp(-lim[0], lim[0]), tau.y.clamp(-lim[1], lim[1]))
}

pub fn clamp_torques(model: &LeggedModel, tau: &Vector4<f64>) -> Vector4<f64> {
    let lim = model.params.torque_limits;
    Vector4::from_fn(|i, _| tau[i].clamp(-lim[i % 2], lim[i % 2]))
}

pub fn set_leg(tau: &mut Vector4<f64>, leg: usize, t: &Vector2<f64>) {
    tau[2 * leg] = t.x;
    tau[2 * leg + 1] = t.y;
}

/// Heuristic bounding controller: stance legs push with a weight-sharing
/// vertical force plus height/speed/pitch corrections, swing legs track the
/// nominal posture with joint PD.
#[derive(Debug, Clone)]
pub struct HeuristicController {
    pub task: LeggedTask,
    pub model: LeggedModel,
    pub kp_height: f64,
    pub kd_height: f64,
    pub kp_speed: f64,
    pub kp_pitch: f64,
    pub kd_pitch: f64,
    pub joint_kp: f64,
    pub joint_kd: f64,
}

impl HeuristicController {
    pub fn new(task: LeggedTask, model: LeggedModel) -> Self {
        HeuristicController {
            task,
            model,
            kp_height: 400.0,
            kd_height: 40.0,
            kp_speed: 60.0,
            kp_pitch: 300.0,
            kd_pitch: 20.0,
            joint_kp: 60.0,
            joint_kd: 2.0,
        }
    }

    /// Joint torques for state `(q, q̇)` with `stance` in contact.
    pub fn torque(&self, q: &VecQ, qd: &VecQ, stance: Option<usize>) -> Vector4<f64> {
        let t = &self.task;
        let p = &t.params;
        let mut tau = Vector4::zeros();
        for leg in 0..2 {
            let leg_tau = if stance == Some(leg) {
                let h = p.nominal_height();
                let fz = t.support_force(leg) + self.kp_height * (h - q[1]) - self.kd_height * qd[1];
                let fx = self.kp_speed * (t.desired_speed - qd[0]);
                let foot = self.model.foot_position(q, leg);
                let arm = foot.x - q[0];
                // Shift the vertical force to counter pitch errors through the moment arm.
                let pitch = -(self.kp_pitch * q[2] + self.kd_pitch * qd[2]);
                let fz = (fz + if arm.abs() > 1e-3 { pitch / arm } else { 0.0 }).max(0.0);
                let fx = fx.clamp(-p.friction * fz, p.friction * fz);
                clamp_leg(
                    &self.model,
                    stance_torque_from_grf(&self.model, q, leg, &Vector2::new(-fx, -fz)),
                )
            } else {
                let [qh, qk] = p.nominal_joints;
                let (hi, ki) = (hip_index(leg), knee_index(leg));
                let th = self.joint_kp * (qh - q[hi] - q[2]) - self.joint_kd * (qd[hi] + qd[2]);
                let tk = self.joint_kp * (qk - q[ki]) - self.joint_kd * qd[ki];
                clamp_leg(&self.model, Vector2::new(th, tk))
            };
            set_leg(&mut tau, leg, &leg_tau);
        }
        tau
    }
}
