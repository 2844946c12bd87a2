//! Rigid-body quadrotor with a quaternion attitude, the point-mass simple
//! model and the projection between them.
//!
//! Full state layout: `[q (w, x, y, z), ᵇω, ⁰p, ᵇv]`. Solver perturbations
//! use the 12-dimensional error state `[φ, δω, δp, δv]`, where `φ` are
//! Cayley parameters applied on the right: `q = q̄ ⊗ C(φ)`.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector4};

use super::params::QuadrotorParams;
use crate::multiphase::{Dynamics, StateSpace, Transition};
use crate::{Matrix, Vector};

pub const NX: usize = 13;
pub const NT: usize = 12;
pub const NU: usize = 4;
pub const NS: usize = 6;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `[1, φ] / √(1 + ‖φ‖²)`.
pub fn cayley(phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(Quaternion::new(1.0, phi.x, phi.y, phi.z))
}

/// `q ⊗ C(φ)`.
pub fn cayley_retract(q: &UnitQuaternion<f64>, phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    q * cayley(phi)
}

/// Cayley parameters of `q`, `q_v / q_w`. Unbounded near a rotation of π.
pub fn cayley_parameters(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    q.imag() / q.w
}

pub fn attitude(x: &Vector) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(Quaternion::new(x[0], x[1], x[2], x[3]))
}

fn v3(x: &Vector, i: usize) -> Vector3<f64> {
    Vector3::new(x[i], x[i + 1], x[i + 2])
}

fn set3(x: &mut Vector, i: usize, v: &Vector3<f64>) {
    x.rows_mut(i, 3).copy_from(v);
}

fn set_block(m: &mut Matrix, r: usize, c: usize, b: &Matrix3<f64>) {
    m.view_mut((r, c), (3, 3)).copy_from(b);
}

/// Assemble a full state.
pub fn full_state(q: &UnitQuaternion<f64>, omega: &Vector3<f64>, p: &Vector3<f64>, v_body: &Vector3<f64>) -> Vector {
    let mut x = Vector::zeros(NX);
    x[0] = q.w;
    x[1] = q.i;
    x[2] = q.j;
    x[3] = q.k;
    set3(&mut x, 4, omega);
    set3(&mut x, 7, p);
    set3(&mut x, 10, v_body);
    x
}

pub fn angular_velocity(x: &Vector) -> Vector3<f64> {
    v3(x, 4)
}

pub fn position(x: &Vector) -> Vector3<f64> {
    v3(x, 7)
}

pub fn body_velocity(x: &Vector) -> Vector3<f64> {
    v3(x, 10)
}

/// Error-state coordinates of the full model.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadrotorSpace;

impl StateSpace for QuadrotorSpace {
    fn tangent_dim(&self) -> usize {
        NT
    }

    fn difference(&self, x: &Vector, base: &Vector) -> Vector {
        let phi = cayley_parameters(&(attitude(base).inverse() * attitude(x)));
        let mut d = Vector::zeros(NT);
        set3(&mut d, 0, &phi);
        d.rows_mut(3, 9).copy_from(&(x.rows(4, 9) - base.rows(4, 9)));
        d
    }

    fn retract(&self, base: &Vector, dx: &Vector) -> Vector {
        let q = cayley_retract(&attitude(base), &v3(dx, 0));
        let mut x = base + Vector::zeros(NX);
        x[0] = q.w;
        x[1] = q.i;
        x[2] = q.j;
        x[3] = q.k;
        x.rows_mut(4, 9).copy_from(&(base.rows(4, 9) + dx.rows(3, 9)));
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrotorModel {
    pub params: QuadrotorParams,
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
}

impl QuadrotorModel {
    pub fn new(params: QuadrotorParams) -> crate::Result<Self> {
        params.validate()?;
        let inertia = params.inertia_matrix();
        let inertia_inv = Matrix3::from_diagonal(&Vector3::from(params.inertia.map(|i| 1.0 / i)));
        Ok(QuadrotorModel {
            params,
            inertia,
            inertia_inv,
        })
    }

    /// Map from rotor thrusts to body torque.
    pub fn torque_map(&self) -> nalgebra::Matrix3x4<f64> {
        let (r, k) = (self.params.arm_length, self.params.yaw_ratio);
        nalgebra::Matrix3x4::new(0.0, r, 0.0, -r, -r, 0.0, r, 0.0, k, -k, k, -k)
    }

    pub fn body_torque(&self, u: &Vector4<f64>) -> Vector3<f64> {
        self.torque_map() * u
    }

    /// `ᵇa = [0, 0, Σu]/m + ᵇR₀ ⁰g`.
    pub fn body_acceleration(&self, q: &UnitQuaternion<f64>, u: &Vector4<f64>) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, u.sum() / self.params.mass) + q.inverse_transform_vector(&self.params.gravity_vector())
    }

    pub fn angular_acceleration(&self, omega: &Vector3<f64>, u: &Vector4<f64>) -> Vector3<f64> {
        self.inertia_inv * (self.body_torque(u) - omega.cross(&(self.inertia * omega)))
    }

    /// Continuous-time `ẋ` in full coordinates, with `q̇ = ½ q ⊗ [0, ω]`.
    pub fn derivative(&self, x: &Vector, u: &Vector4<f64>) -> Vector {
        let q = attitude(x);
        let (w, v) = (angular_velocity(x), body_velocity(x));
        let qdot = q.quaternion() * Quaternion::from_imag(w) * 0.5;
        let mut d = Vector::zeros(NX);
        d[0] = qdot.w;
        d[1] = qdot.i;
        d[2] = qdot.j;
        d[3] = qdot.k;
        set3(&mut d, 4, &self.angular_acceleration(&w, u));
        set3(&mut d, 7, &(q * v));
        set3(&mut d, 10, &(self.body_acceleration(&q, u) - w.cross(&v)));
        d
    }

    /// One explicit step. The attitude advances by the Cayley rotation of
    /// `ω dt / 2`, which keeps it on the unit sphere.
    pub fn step(&self, x: &Vector, u: &Vector4<f64>, dt: f64) -> Vector {
        let q = attitude(x);
        let (w, p, v) = (angular_velocity(x), position(x), body_velocity(x));
        let q_next = cayley_retract(&q, &(w * (0.5 * dt)));
        let w_next = w + self.angular_acceleration(&w, u) * dt;
        let p_next = p + (q * v) * dt;
        let v_next = v + (self.body_acceleration(&q, u) - w.cross(&v)) * dt;
        full_state(&q_next, &w_next, &p_next, &v_next)
    }

    /// Error-state Jacobians of [`QuadrotorModel::step`].
    pub fn step_jacobians(&self, x: &Vector, _u: &Vector4<f64>, dt: f64) -> (Matrix, Matrix) {
        let q = attitude(x);
        let rot = q.to_rotation_matrix().into_inner();
        let (w, v) = (angular_velocity(x), body_velocity(x));
        let a = w * (0.5 * dt);
        let den = 1.0 + a.norm_squared();
        let i3 = Matrix3::identity();
        let mut fx = Matrix::zeros(NT, NT);
        // φ' = C(a)ᵀ-rotation of φ plus the effect of δω through a.
        let rot_a = cayley(&a).to_rotation_matrix().into_inner();
        set_block(&mut fx, 0, 0, &rot_a.transpose());
        set_block(&mut fx, 0, 3, &((i3 - skew(&a)) * (0.5 * dt / den)));
        let iw = self.inertia * w;
        set_block(
            &mut fx,
            3,
            3,
            &(i3 + self.inertia_inv * (skew(&iw) - skew(&w) * self.inertia) * dt),
        );
        set_block(&mut fx, 6, 0, &(rot * skew(&v) * (-2.0 * dt)));
        set_block(&mut fx, 6, 6, &i3);
        set_block(&mut fx, 6, 9, &(rot * dt));
        let g_body = rot.transpose() * self.params.gravity_vector();
        set_block(&mut fx, 9, 0, &(skew(&g_body) * (2.0 * dt)));
        set_block(&mut fx, 9, 3, &(skew(&v) * dt));
        set_block(&mut fx, 9, 9, &(i3 - skew(&w) * dt));

        let mut fu = Matrix::zeros(NT, NU);
        let tw = self.inertia_inv * self.torque_map() * dt;
        fu.view_mut((3, 0), (3, NU)).copy_from(&tw);
        for j in 0..NU {
            fu[(11, j)] = dt / self.params.mass;
        }
        (fx, fu)
    }
}

fn thrusts(u: &Vector) -> Vector4<f64> {
    Vector4::new(u[0], u[1], u[2], u[3])
}

/// Discretized full model as phase dynamics.
#[derive(Debug, Clone)]
pub struct QuadrotorStep {
    pub model: QuadrotorModel,
    pub dt: f64,
}

impl Dynamics for QuadrotorStep {
    fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        self.model.step(x, &thrusts(u), self.dt)
    }

    fn jacobians(&self, _k: usize, x: &Vector, u: &Vector, _space: &dyn StateSpace) -> (Matrix, Matrix) {
        self.model.step_jacobians(x, &thrusts(u), self.dt)
    }
}

/// `ṗ = v`, `v̇ = F/m + g`, Euler-discretized. State `[⁰p, ⁰v]`, control `F`.
#[derive(Debug, Clone)]
pub struct PointMass {
    pub mass: f64,
    pub gravity: f64,
    pub dt: f64,
}

impl PointMass {
    pub fn from_params(p: &QuadrotorParams, dt: f64) -> Self {
        PointMass {
            mass: p.mass,
            gravity: p.gravity,
            dt,
        }
    }

    pub fn derivative(&self, x: &Vector, f: &Vector) -> Vector {
        let mut d = Vector::zeros(NS);
        d.rows_mut(0, 3).copy_from(&x.rows(3, 3));
        d.rows_mut(3, 3).copy_from(&(f / self.mass));
        d[5] -= self.gravity;
        d
    }

    /// `(A, B)` of the discrete model; it is affine so these are exact.
    pub fn matrices(&self) -> (Matrix, Matrix) {
        let mut a = Matrix::identity(NS, NS);
        let mut b = Matrix::zeros(NS, 3);
        for i in 0..3 {
            a[(i, 3 + i)] = self.dt;
            b[(3 + i, i)] = self.dt / self.mass;
        }
        (a, b)
    }
}

impl Dynamics for PointMass {
    fn step(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        x + self.derivative(x, u) * self.dt
    }

    fn jacobians(&self, _k: usize, _x: &Vector, _u: &Vector, _space: &dyn StateSpace) -> (Matrix, Matrix) {
        self.matrices()
    }
}

/// `x_s = [⁰p, R(q) ᵇv]`.
pub fn project(x: &Vector) -> Vector {
    let mut s = Vector::zeros(NS);
    set3(&mut s, 0, &position(x));
    set3(&mut s, 3, &(attitude(x) * body_velocity(x)));
    s
}

/// Jacobian of [`project`] from the error state.
pub fn projection_jacobian(x: &Vector) -> Matrix {
    let rot = attitude(x).to_rotation_matrix().into_inner();
    let mut j = Matrix::zeros(NS, NT);
    set_block(&mut j, 0, 6, &Matrix3::identity());
    set_block(&mut j, 3, 0, &(rot * skew(&body_velocity(x)) * -2.0));
    set_block(&mut j, 3, 9, &rot);
    j
}

/// Full-to-point-mass transition. It carries no constraint.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadrotorProjection;

impl Transition for QuadrotorProjection {
    fn output_dim(&self) -> usize {
        NS
    }

    fn apply(&self, x: &Vector) -> Vector {
        project(x)
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        projection_jacobian(x)
    }
}
