//! Cost terms and constraints of the quadrotor hierarchy.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{angular_velocity, attitude, project, projection_jacobian, skew, NT};
use crate::error::{Error, Result};
use crate::multiphase::TerminalCost;
use crate::{Matrix, Vector};

/// `1 − (q_d·q)²`: zero at `q_d` and at its antipode.
pub fn orientation_cost(q: &UnitQuaternion<f64>, q_d: &UnitQuaternion<f64>) -> f64 {
    let c = q_d.coords.dot(&q.coords);
    1.0 - c * c
}

/// Gradient and Gauss-Newton Hessian of [`orientation_cost`] with respect
/// to the Cayley error `φ` at `q`.
///
/// With `e = q_d* ⊗ q ⊗ C(φ)` the cost equals `‖vec(e)‖²`, and at `φ = 0`
/// `∂vec(e)/∂φ = e_w I + [vec(e)]×`.
pub fn orientation_derivatives(q: &UnitQuaternion<f64>, q_d: &UnitQuaternion<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let e = q_d.inverse() * q;
    let ev = e.imag();
    let je = Matrix3::identity() * e.w + skew(&ev);
    (je.transpose() * ev * 2.0, je.transpose() * je * 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Box and size range from which obstacles are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleLayout {
    pub count: usize,
    pub corridor_min: [f64; 3],
    pub corridor_max: [f64; 3],
    pub radius_min: f64,
    pub radius_max: f64,
}

impl Default for ObstacleLayout {
    fn default() -> Self {
        ObstacleLayout {
            count: 4,
            corridor_min: [1.0, -0.3, 0.8],
            corridor_max: [3.0, 0.3, 1.2],
            radius_min: 0.25,
            radius_max: 0.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleField {
    pub spheres: Vec<Sphere>,
    /// Radius of the sphere enclosing the vehicle.
    pub bounding_radius: f64,
    /// Seed the spheres were drawn with, kept for bookkeeping.
    pub seed: u64,
}

impl Default for ObstacleField {
    fn default() -> Self {
        ObstacleField::generate(&ObstacleLayout::default(), 0.15, 7)
    }
}

impl ObstacleField {
    pub fn empty(bounding_radius: f64) -> Self {
        ObstacleField {
            spheres: Vec::new(),
            bounding_radius,
            seed: 0,
        }
    }

    /// Uniform centers in the corridor and uniform radii.
    pub fn generate(layout: &ObstacleLayout, bounding_radius: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spheres = (0..layout.count)
            .map(|_| {
                let center = std::array::from_fn(|i| rng.random_range(layout.corridor_min[i]..=layout.corridor_max[i]));
                let radius = rng.random_range(layout.radius_min..=layout.radius_max);
                Sphere { center, radius }
            })
            .collect();
        ObstacleField {
            spheres,
            bounding_radius,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spheres.iter().any(|s| !(s.radius > 0.0)) || !(self.bounding_radius >= 0.0) {
            return Err(Error::Config("obstacle radii must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    /// `‖p − c‖ − (r + r_b)` for every sphere; non-negative means clear.
    pub fn clearances(&self, p: &Vector3<f64>) -> Vec<f64> {
        self.spheres
            .iter()
            .map(|s| (p - Vector3::from(s.center)).norm() - (s.radius + self.bounding_radius))
            .collect()
    }

    /// Gradients of [`ObstacleField::clearances`]: unit radial directions.
    pub fn clearance_gradients(&self, p: &Vector3<f64>) -> Vec<Vector3<f64>> {
        self.spheres
            .iter()
            .map(|s| {
                let d = p - Vector3::from(s.center);
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vector3::zeros()
                }
            })
            .collect()
    }

    pub fn min_clearance(&self, p: &Vector3<f64>) -> f64 {
        self.clearances(p).into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Stabilizing solution of `P = Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA` by the
/// structured doubling iteration.
pub fn solve_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::config("LQR control weight must be positive definite"))?
        .inverse();
    let mut ak = a.clone();
    let mut gk = b * r_inv * b.transpose();
    let mut hk = q.clone();
    let eye = Matrix::identity(n, n);
    for _ in 0..100 {
        let w = (&eye + &gk * &hk)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::config("Riccati doubling hit a singular matrix"))?;
        let a_next = &ak * &w * &ak;
        let g_next = &gk + &ak * &w * &gk * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w * &ak;
        let change = (&h_next - &hk).amax();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if !hk.iter().all(|v| v.is_finite()) {
            break;
        }
        if change <= 1e-13 * (1.0 + hk.amax()) {
            return Ok((&hk + hk.transpose()) * 0.5);
        }
    }
    Err(Error::config("Riccati iteration did not converge"))
}

/// `(x_s − goal)ᵀ P (x_s − goal)` on the point-mass state.
#[derive(Debug, Clone)]
pub struct LqrTerminalCost {
    pub p: Matrix,
    pub goal: Vector,
}

impl TerminalCost for LqrTerminalCost {
    fn value(&self, x: &Vector) -> f64 {
        let e = x - &self.goal;
        e.dot(&(&self.p * &e))
    }

    fn derivatives(&self, x: &Vector) -> (Vector, Matrix) {
        let e = x - &self.goal;
        (&self.p * e * 2.0, &self.p * 2.0)
    }
}

/// Terminal cost of a full-model phase: rotational error and body rates
/// and, when the problem ends on the full model, the point-mass LQR cost of
/// the projected state.
#[derive(Debug, Clone)]
pub struct FullTerminalCost {
    pub goal_attitude: UnitQuaternion<f64>,
    pub orientation: f64,
    pub angular_velocity: f64,
    pub lqr: Option<LqrTerminalCost>,
}

impl TerminalCost for FullTerminalCost {
    fn value(&self, x: &Vector) -> f64 {
        let w = angular_velocity(x);
        let mut c = self.orientation * orientation_cost(&attitude(x), &self.goal_attitude)
            + self.angular_velocity * w.norm_squared();
        if let Some(lqr) = &self.lqr {
            c += lqr.value(&project(x));
        }
        c
    }

    fn derivatives(&self, x: &Vector) -> (Vector, Matrix) {
        let mut g = Vector::zeros(NT);
        let mut h = Matrix::zeros(NT, NT);
        let (gq, hq) = orientation_derivatives(&attitude(x), &self.goal_attitude);
        g.rows_mut(0, 3).copy_from(&(gq * self.orientation));
        h.view_mut((0, 0), (3, 3)).copy_from(&(hq * self.orientation));
        g.rows_mut(3, 3)
            .copy_from(&(angular_velocity(x) * 2.0 * self.angular_velocity));
        for i in 3..6 {
            h[(i, i)] = 2.0 * self.angular_velocity;
        }
        if let Some(lqr) = &self.lqr {
            let j = projection_jacobian(x);
            let (gl, hl) = lqr.derivatives(&project(x));
            g += j.transpose() * gl;
            h += j.transpose() * hl * &j;
        }
        (g, h)
    }
}
