//! Rigid-body dynamics of the planar five-link robot and its trunk model.
//!
//! Generalized coordinates are `q = [c_x, c_z, θ, hip₀, knee₀, hip₁, knee₁]`
//! and the full state is `x = [q, q̇] ∈ ℝ¹⁴`.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2, Vector4};

use super::params::LeggedParams;
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

pub const NQ: usize = 7;
pub const NX: usize = 14;
pub const NU: usize = 4;
pub const NS: usize = 6;

pub type VecQ = SVector<f64, NQ>;
pub type MatQ = SMatrix<f64, NQ, NQ>;
pub type PointJacobian = SMatrix<f64, 2, NQ>;

#[inline]
fn dir(phi: f64) -> Vector2<f64> {
    Vector2::new(phi.sin(), -phi.cos())
}

#[inline]
fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Planar cross product `a × b`, the moment of `b` applied at arm `a`.
#[inline]
pub fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

#[inline]
pub fn hip_index(leg: usize) -> usize {
    3 + 2 * leg
}

#[inline]
pub fn knee_index(leg: usize) -> usize {
    4 + 2 * leg
}

pub fn split_state(x: &Vector) -> (VecQ, VecQ) {
    (
        VecQ::from_iterator(x.iter().take(NQ).copied()),
        VecQ::from_iterator(x.iter().skip(NQ).take(NQ).copied()),
    )
}

pub fn join_state(q: &VecQ, qd: &VecQ) -> Vector {
    Vector::from_iterator(NX, q.iter().chain(qd.iter()).copied())
}

#[derive(Debug, Clone, Copy)]
struct LegFrame {
    hip: Vector2<f64>,
    /// `hip − c` in world coordinates.
    r_hip: Vector2<f64>,
    d1: Vector2<f64>,
    d2: Vector2<f64>,
    knee: Vector2<f64>,
    foot: Vector2<f64>,
}

/// A material point of one leg, for Jacobians and bias accelerations.
#[derive(Debug, Clone, Copy)]
enum LegPoint {
    ThighCom,
    ShankCom,
    Foot,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    c: Vector2<f64>,
    legs: [LegFrame; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accel {
    pub qdd: VecQ,
    /// Contact force on the stance foot; zero in flight.
    pub lambda: Vector2<f64>,
}

/// Accelerations and contact forces with their first derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelDerivatives {
    pub accel: Accel,
    pub dqdd_dq: MatQ,
    pub dqdd_dqd: MatQ,
    pub dqdd_dtau: SMatrix<f64, NQ, NU>,
    pub dlambda_dq: PointJacobian,
    pub dlambda_dqd: PointJacobian,
    pub dlambda_dtau: SMatrix<f64, 2, NU>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeggedModel {
    pub params: LeggedParams,
}

impl LeggedModel {
    pub fn new(params: LeggedParams) -> Result<Self> {
        params.validate()?;
        Ok(LeggedModel { params })
    }

    fn frame(&self, q: &VecQ) -> Frame {
        let p = &self.params;
        let c = Vector2::new(q[0], q[1]);
        let (s, co) = q[2].sin_cos();
        let leg = |l: usize| {
            let off = p.hip_offsets[l];
            let r_hip = Vector2::new(co * off[0] - s * off[1], s * off[0] + co * off[1]);
            let hip = c + r_hip;
            let phi1 = q[2] + q[hip_index(l)];
            let phi2 = phi1 + q[knee_index(l)];
            let d1 = dir(phi1);
            let d2 = dir(phi2);
            let knee = hip + d1 * p.thigh_length;
            let foot = knee + d2 * p.shank_length;
            LegFrame {
                hip,
                r_hip,
                d1,
                d2,
                knee,
                foot,
            }
        };
        Frame {
            c,
            legs: [leg(0), leg(1)],
        }
    }

    fn point(&self, f: &Frame, leg: usize, which: LegPoint) -> Vector2<f64> {
        let lf = &f.legs[leg];
        match which {
            LegPoint::ThighCom => lf.hip + lf.d1 * self.params.thigh_com,
            LegPoint::ShankCom => lf.knee + lf.d2 * self.params.shank_com,
            LegPoint::Foot => lf.foot,
        }
    }

    fn point_jacobian(&self, f: &Frame, leg: usize, which: LegPoint) -> PointJacobian {
        let p = self.point(f, leg, which);
        let lf = &f.legs[leg];
        let mut j = PointJacobian::zeros();
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        j.set_column(2, &perp(p - f.c));
        j.set_column(hip_index(leg), &perp(p - lf.hip));
        if !matches!(which, LegPoint::ThighCom) {
            j.set_column(knee_index(leg), &perp(p - lf.knee));
        }
        j
    }

    /// `J̇ q̇` of a leg point and its derivative with respect to `q̇`.
    fn point_bias(&self, f: &Frame, qd: &VecQ, leg: usize, which: LegPoint) -> (Vector2<f64>, PointJacobian) {
        let pr = &self.params;
        let lf = &f.legs[leg];
        let (h, k) = (hip_index(leg), knee_index(leg));
        let w0 = qd[2];
        let w1 = w0 + qd[h];
        let w2 = w1 + qd[k];
        let (s1, s2) = match which {
            LegPoint::ThighCom => (lf.d1 * pr.thigh_com, Vector2::zeros()),
            LegPoint::ShankCom => (lf.d1 * pr.thigh_length, lf.d2 * pr.shank_com),
            LegPoint::Foot => (lf.d1 * pr.thigh_length, lf.d2 * pr.shank_length),
        };
        let beta = -(lf.r_hip * (w0 * w0) + s1 * (w1 * w1) + s2 * (w2 * w2));
        let mut d = PointJacobian::zeros();
        let a0 = -2.0 * w0 * lf.r_hip;
        let a1 = -2.0 * w1 * s1;
        let a2 = -2.0 * w2 * s2;
        d.set_column(2, &(a0 + a1 + a2));
        d.set_column(h, &(a1 + a2));
        d.set_column(k, &a2);
        (beta, d)
    }

    pub fn foot_position(&self, q: &VecQ, leg: usize) -> Vector2<f64> {
        self.frame(q).legs[leg].foot
    }

    pub fn foot_jacobian(&self, q: &VecQ, leg: usize) -> PointJacobian {
        let f = self.frame(q);
        self.point_jacobian(&f, leg, LegPoint::Foot)
    }

    pub fn foot_velocity(&self, q: &VecQ, qd: &VecQ, leg: usize) -> Vector2<f64> {
        self.foot_jacobian(q, leg) * qd
    }

    pub fn hip_position(&self, q: &VecQ, leg: usize) -> Vector2<f64> {
        self.frame(q).legs[leg].hip
    }

    pub fn knee_position(&self, q: &VecQ, leg: usize) -> Vector2<f64> {
        self.frame(q).legs[leg].knee
    }

    /// Columns of the foot Jacobian belonging to the leg's own joints.
    pub fn leg_jacobian(&self, q: &VecQ, leg: usize) -> Matrix2<f64> {
        let j = self.foot_jacobian(q, leg);
        let (h, k) = (hip_index(leg), knee_index(leg));
        Matrix2::new(j[(0, h)], j[(0, k)], j[(1, h)], j[(1, k)])
    }

    /// World position and Jacobian of the trunk point at body-frame `(s, 0)`.
    pub fn trunk_point(&self, q: &VecQ, s: f64) -> (Vector2<f64>, PointJacobian) {
        let (sn, co) = q[2].sin_cos();
        let r = Vector2::new(co * s, sn * s);
        let mut j = PointJacobian::zeros();
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        j.set_column(2, &perp(r));
        (Vector2::new(q[0], q[1]) + r, j)
    }

    pub fn mass_matrix(&self, q: &VecQ) -> MatQ {
        let f = self.frame(q);
        self.mass_matrix_at(&f)
    }

    fn mass_matrix_at(&self, f: &Frame) -> MatQ {
        let p = &self.params;
        let mut h = MatQ::zeros();
        h[(0, 0)] = p.trunk_mass;
        h[(1, 1)] = p.trunk_mass;
        h[(2, 2)] = p.trunk_inertia;
        for leg in 0..2 {
            let (hi, ki) = (hip_index(leg), knee_index(leg));
            let j1 = self.point_jacobian(f, leg, LegPoint::ThighCom);
            let j2 = self.point_jacobian(f, leg, LegPoint::ShankCom);
            h += j1.transpose() * j1 * p.thigh_mass + j2.transpose() * j2 * p.shank_mass;
            for &(a, b) in &[(2, 2), (2, hi), (hi, 2), (hi, hi)] {
                h[(a, b)] += p.thigh_inertia + p.shank_inertia;
            }
            for &(a, b) in &[(2, ki), (ki, 2), (hi, ki), (ki, hi), (ki, ki)] {
                h[(a, b)] += p.shank_inertia;
            }
        }
        h
    }

    /// `C q̇ + τ_g` and its derivative with respect to `q̇`.
    fn bias_at(&self, f: &Frame, qd: &VecQ) -> (VecQ, MatQ) {
        let p = &self.params;
        let g = Vector2::new(0.0, p.gravity);
        let mut b = VecQ::zeros();
        let mut db = MatQ::zeros();
        b[1] = p.trunk_mass * p.gravity;
        for leg in 0..2 {
            for (which, m) in [(LegPoint::ThighCom, p.thigh_mass), (LegPoint::ShankCom, p.shank_mass)] {
                let j = self.point_jacobian(f, leg, which);
                let (beta, dbeta) = self.point_bias(f, qd, leg, which);
                b += j.transpose() * ((beta + g) * m);
                db += j.transpose() * dbeta * m;
            }
        }
        (b, db)
    }

    pub fn bias(&self, q: &VecQ, qd: &VecQ) -> VecQ {
        self.bias_at(&self.frame(q), qd).0
    }

    pub fn kinetic_energy(&self, q: &VecQ, qd: &VecQ) -> f64 {
        0.5 * qd.dot(&(self.mass_matrix(q) * qd))
    }

    pub fn potential_energy(&self, q: &VecQ) -> f64 {
        let p = &self.params;
        let f = self.frame(q);
        let mut e = p.trunk_mass * q[1];
        for leg in 0..2 {
            e += p.thigh_mass * self.point(&f, leg, LegPoint::ThighCom).y;
            e += p.shank_mass * self.point(&f, leg, LegPoint::ShankCom).y;
        }
        e * p.gravity
    }

    /// Solve the contact-constrained equations of motion for `q̈` and the
    /// contact force. `external` is an extra generalized force.
    pub fn forward_dynamics(
        &self,
        q: &VecQ,
        qd: &VecQ,
        tau: &Vector4<f64>,
        contact: Option<usize>,
        external: Option<&VecQ>,
    ) -> Result<Accel> {
        Ok(self.solve(q, qd, tau, contact, external, false)?.0)
    }

    /// Accelerations plus derivatives. `q̇` and `τ` derivatives are exact;
    /// the `q` derivatives are central differences.
    pub fn forward_dynamics_derivatives(
        &self,
        q: &VecQ,
        qd: &VecQ,
        tau: &Vector4<f64>,
        contact: Option<usize>,
    ) -> Result<AccelDerivatives> {
        let (accel, rate) = self.solve(q, qd, tau, contact, None, true)?;
        let (dqdd_dqd, dqdd_dtau, dlambda_dqd, dlambda_dtau) = rate.expect("requested");
        let mut dqdd_dq = MatQ::zeros();
        let mut dlambda_dq = PointJacobian::zeros();
        let h = 1e-6;
        for i in 0..NQ {
            let mut qp = *q;
            let mut qm = *q;
            qp[i] += h;
            qm[i] -= h;
            let ap = self.solve(&qp, qd, tau, contact, None, false)?.0;
            let am = self.solve(&qm, qd, tau, contact, None, false)?.0;
            dqdd_dq.set_column(i, &((ap.qdd - am.qdd) / (2.0 * h)));
            dlambda_dq.set_column(i, &((ap.lambda - am.lambda) / (2.0 * h)));
        }
        Ok(AccelDerivatives {
            accel,
            dqdd_dq,
            dqdd_dqd,
            dqdd_dtau,
            dlambda_dq,
            dlambda_dqd,
            dlambda_dtau,
        })
    }

    #[allow(clippy::type_complexity)]
    fn solve(
        &self,
        q: &VecQ,
        qd: &VecQ,
        tau: &Vector4<f64>,
        contact: Option<usize>,
        external: Option<&VecQ>,
        rates: bool,
    ) -> Result<(
        Accel,
        Option<(MatQ, SMatrix<f64, NQ, NU>, PointJacobian, SMatrix<f64, 2, NU>)>,
    )> {
        let f = self.frame(q);
        let h = self.mass_matrix_at(&f);
        let chol = h.cholesky().ok_or(Error::SingularConfiguration {
            condition: f64::INFINITY,
        })?;
        let (b, db) = self.bias_at(&f, qd);
        let mut r = -b;
        for i in 0..NU {
            r[3 + i] += tau[i];
        }
        if let Some(e) = external {
            r += e;
        }
        let mut sel = SMatrix::<f64, NQ, NU>::zeros();
        for i in 0..NU {
            sel[(3 + i, i)] = 1.0;
        }
        let hinv_r = chol.solve(&r);
        match contact {
            None => {
                let accel = Accel {
                    qdd: hinv_r,
                    lambda: Vector2::zeros(),
                };
                let rates = rates.then(|| {
                    (
                        chol.solve(&(-db)),
                        chol.solve(&sel),
                        PointJacobian::zeros(),
                        SMatrix::zeros(),
                    )
                });
                Ok((accel, rates))
            }
            Some(leg) => {
                let jc = self.point_jacobian(&f, leg, LegPoint::Foot);
                let (beta, dbeta) = self.point_bias(&f, qd, leg, LegPoint::Foot);
                let hinv_jt = chol.solve(&jc.transpose());
                let lam_mat = jc * hinv_jt;
                let inv = contact_inverse(&lam_mat)?;
                let lambda = inv * (-beta - jc * hinv_r);
                let qdd = hinv_r + hinv_jt * lambda;
                let accel = Accel { qdd, lambda };
                let rates = rates.then(|| {
                    let dr_dqd = -db;
                    let dl_dqd = inv * (-dbeta - jc * chol.solve(&dr_dqd));
                    let dq_dqd = chol.solve(&dr_dqd) + hinv_jt * dl_dqd;
                    let hinv_sel = chol.solve(&sel);
                    let dl_dtau = -(inv * jc * hinv_sel);
                    let dq_dtau = hinv_sel + hinv_jt * dl_dtau;
                    (dq_dqd, dq_dtau, dl_dqd, dl_dtau)
                });
                Ok((accel, rates))
            }
        }
    }

    /// Post-impact velocity `q̇⁺ = (I − H⁻¹Jᵀ(JH⁻¹Jᵀ)⁻¹J) q̇⁻` for a touchdown of `leg`.
    pub fn impact(&self, q: &VecQ, qd: &VecQ, leg: usize) -> Result<VecQ> {
        Ok(self.impact_projector(q, leg)? * qd)
    }

    pub fn impact_projector(&self, q: &VecQ, leg: usize) -> Result<MatQ> {
        let f = self.frame(q);
        let h = self.mass_matrix_at(&f);
        let chol = h.cholesky().ok_or(Error::SingularConfiguration {
            condition: f64::INFINITY,
        })?;
        let jc = self.point_jacobian(&f, leg, LegPoint::Foot);
        let hinv_jt = chol.solve(&jc.transpose());
        let inv = contact_inverse(&(jc * hinv_jt))?;
        Ok(MatQ::identity() - hinv_jt * inv * jc)
    }

    /// Touchdown reset of the full state.
    pub fn impact_state(&self, x: &Vector, leg: usize) -> Result<Vector> {
        let (q, qd) = split_state(x);
        Ok(join_state(&q, &self.impact(&q, &qd, leg)?))
    }

    /// Jacobian of [`Self::impact_state`]: the velocity block is the
    /// projector itself, the configuration block is differentiated numerically.
    pub fn impact_jacobian(&self, x: &Vector, leg: usize) -> Result<Matrix> {
        let (q, qd) = split_state(x);
        let proj = self.impact_projector(&q, leg)?;
        let mut jac = Matrix::zeros(NX, NX);
        for i in 0..NQ {
            jac[(i, i)] = 1.0;
            for j in 0..NQ {
                jac[(NQ + i, NQ + j)] = proj[(i, j)];
            }
        }
        let h = 1e-6;
        for j in 0..NQ {
            let mut qp = q;
            let mut qm = q;
            qp[j] += h;
            qm[j] -= h;
            let d = (self.impact(&qp, &qd, leg)? - self.impact(&qm, &qd, leg)?) / (2.0 * h);
            for i in 0..NQ {
                jac[(NQ + i, j)] = d[i];
            }
        }
        Ok(jac)
    }
}

fn contact_inverse(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let tr = m.trace();
    let det = m.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let (hi, lo) = (0.5 * tr + disc, 0.5 * tr - disc);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < 1e12) {
        return Err(Error::SingularContact { condition });
    }
    m.try_inverse().ok_or(Error::SingularContact { condition })
}

/// Trunk model `c̈ = Σf/m − g`, `I θ̈ = Σ (p − c) × f` with a single
/// contact force applied at `foot`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrunkModel {
    pub mass: f64,
    pub inertia: f64,
    pub gravity: f64,
}

impl TrunkModel {
    pub fn from_params(p: &LeggedParams) -> Self {
        TrunkModel {
            mass: p.total_mass(),
            inertia: p.trunk_model_inertia(),
            gravity: p.gravity,
        }
    }

    /// `ẋ_s` for state `[c, θ, ċ, θ̇]`, force `f` and contact point `foot`
    /// (`None` in flight).
    pub fn derivative(&self, xs: &SVector<f64, NS>, f: &Vector2<f64>, foot: Option<&Vector2<f64>>) -> SVector<f64, NS> {
        let mut d = SVector::<f64, NS>::zeros();
        d[0] = xs[3];
        d[1] = xs[4];
        d[2] = xs[5];
        d[4] = -self.gravity;
        if let Some(p) = foot {
            let arm = p - Vector2::new(xs[0], xs[1]);
            d[3] += f.x / self.mass;
            d[4] += f.y / self.mass;
            d[5] = cross2(&arm, f) / self.inertia;
        }
        d
    }
}

/// The 6×14 selector `T` picking `c, θ` and their rates.
pub fn projection_matrix() -> Matrix {
    let mut t = Matrix::zeros(NS, NX);
    for i in 0..3 {
        t[(i, i)] = 1.0;
        t[(3 + i, NQ + i)] = 1.0;
    }
    t
}

pub fn project(x: &Vector) -> Vector {
    Vector::from_vec(vec![x[0], x[1], x[2], x[NQ], x[NQ + 1], x[NQ + 2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LeggedModel {
        LeggedModel::new(LeggedParams::quadruped()).unwrap()
    }

    fn sample_q() -> VecQ {
        VecQ::from_column_slice(&[0.1, 0.3, 0.05, -0.7, 1.5, -0.9, 1.4])
    }

    #[test]
    fn straight_leg_is_below_hip() {
        let m = model();
        let q = VecQ::from_column_slice(&[0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let foot = m.foot_position(&q, 0);
        assert!((foot - Vector2::new(0.19, 0.5 - 0.42)).norm() < 1e-14);
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite() {
        let h = model().mass_matrix(&sample_q());
        assert!((h - h.transpose()).amax() < 1e-14);
        assert!(h.cholesky().is_some());
        // Translational block carries the total mass.
        assert!((h[(0, 0)] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn qdot_derivatives_match_differences() {
        let m = model();
        let q = sample_q();
        let qd = VecQ::from_column_slice(&[0.4, -0.2, 0.7, 1.0, -2.0, 0.5, 1.5]);
        let tau = Vector4::new(3.0, -5.0, 2.0, 8.0);
        for contact in [None, Some(0), Some(1)] {
            let d = m.forward_dynamics_derivatives(&q, &qd, &tau, contact).unwrap();
            let h = 1e-6;
            for i in 0..NQ {
                let mut p = qd;
                let mut n = qd;
                p[i] += h;
                n[i] -= h;
                let ap = m.forward_dynamics(&q, &p, &tau, contact, None).unwrap();
                let an = m.forward_dynamics(&q, &n, &tau, contact, None).unwrap();
                let fd = (ap.qdd - an.qdd) / (2.0 * h);
                assert!((fd - d.dqdd_dqd.column(i)).amax() < 1e-6);
                let fl = (ap.lambda - an.lambda) / (2.0 * h);
                assert!((fl - d.dlambda_dqd.column(i)).amax() < 1e-5);
            }
        }
    }

    #[test]
    fn trunk_cross_product_example() {
        let t = TrunkModel {
            mass: 9.0,
            inertia: 0.5,
            gravity: 9.81,
        };
        let xs = SVector::<f64, 6>::zeros();
        let f = Vector2::new(0.0, 9.0 * 9.81);
        let p = Vector2::new(0.1, -0.3);
        let d = t.derivative(&xs, &f, Some(&p));
        assert!((d[5] - 0.1 * 9.0 * 9.81 / 0.5).abs() < 1e-12);
        assert!(d[4].abs() < 1e-12);
    }
}
