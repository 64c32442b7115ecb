//! Geometry of a near-crossing passage.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::classical::PhasePoint;
use crate::error::{Error, Result};
use crate::potential::{pauli_eigenvector, PauliPotential};

/// Data of the passage through the gap minimum at `t♭`.
///
/// `dw(q♭) p♭ = r e_θ` and `w(q♭) = ±α e_θ^⊥` with `α ≥ 0`; the sign is kept in
/// `orientation` so a trajectory passing on either side of the cone is valid.
#[derive(Debug, Clone)]
pub struct CrossingEvent {
    pub t_flat: f64,
    pub z_flat: PhasePoint,
    /// Action of the incoming flow at `t♭`.
    pub s_flat: f64,
    pub r: f64,
    pub theta: f64,
    pub alpha: f64,
    /// `sign(w(q♭)·e_θ^⊥)`, `+1` when the gap closes.
    pub orientation: f64,
    pub e_theta: Vector2<f64>,
    /// `e_θ` rotated by `+π/2`.
    pub e_theta_perp: Vector2<f64>,
    /// Unit vector with `A(e_θ) V_θ = V_θ`, first component nonnegative.
    pub v_theta: Vector2<f64>,
    /// Unit vector with `A(e_θ) V = -V`, oriented so that `(V_θ^⊥, V_θ)` is the
    /// rotated basis `R(φ)(1,0), R(φ)(0,1)` up to one common sign.
    pub v_theta_perp: Vector2<f64>,
    /// Angle with `e_φ = -e_θ`, in `(-π, π]`.
    pub phi: f64,
    /// `dw(q♭)`, shape `2 x d`.
    pub dw: DMatrix<f64>,
}

impl CrossingEvent {
    /// Build the event from a phase-space point assumed to sit at the gap
    /// minimum.
    pub fn from_phase_point(
        pot: &dyn PauliPotential,
        t_flat: f64,
        z_flat: PhasePoint,
        s_flat: f64,
    ) -> Result<Self> {
        let x = z_flat.q.as_slice();
        let dw = pot.dw(x);
        let dwp = &dw * &z_flat.p;
        let r = dwp.norm();
        if r < 1e-10 {
            return Err(Error::Degenerate(r));
        }
        let e_theta = Vector2::new(dwp[0] / r, dwp[1] / r);
        let e_theta_perp = Vector2::new(-e_theta[1], e_theta[0]);
        let theta = e_theta[1].atan2(e_theta[0]);
        let w = pot.w(x);
        let alpha = w[0].hypot(w[1]);
        let proj = w[0] * e_theta_perp[0] + w[1] * e_theta_perp[1];
        let orientation = if proj < 0.0 { -1.0 } else { 1.0 };

        let v_theta = pauli_eigenvector([e_theta[0], e_theta[1]], 1.0);
        let phi = wrap_angle(theta + std::f64::consts::PI);
        let (c, s) = ((0.5 * phi).cos(), (0.5 * phi).sin());
        let r10 = Vector2::new(c, s);
        let r01 = Vector2::new(-s, c);
        let zeta = if v_theta.dot(&r01) < 0.0 { -1.0 } else { 1.0 };
        let v_theta_perp = r10 * zeta;

        Ok(Self {
            t_flat,
            z_flat,
            s_flat,
            r,
            theta,
            alpha,
            orientation,
            e_theta,
            e_theta_perp,
            v_theta,
            v_theta_perp,
            phi,
            dw,
        })
    }

    pub fn dim(&self) -> usize {
        self.z_flat.dim()
    }

    /// `w(q♭)·e_θ^⊥`.
    pub fn alpha_signed(&self) -> f64 {
        self.orientation * self.alpha
    }

    /// Global sign `ζ` with `V_θ = ζ R(φ)(0,1)`.
    pub fn zeta(&self) -> f64 {
        let (c, s) = ((0.5 * self.phi).cos(), (0.5 * self.phi).sin());
        if self.v_theta.dot(&Vector2::new(-s, c)) < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// `R(φ) = [[cos φ/2, -sin φ/2], [sin φ/2, cos φ/2]]`.
    pub fn rotation(&self) -> Matrix2<f64> {
        rotation_matrix(self.phi)
    }

    /// `Γ₀ = dwᵀ (I - e_θ e_θᵀ) dw / r`.
    pub fn gamma0(&self) -> DMatrix<f64> {
        let up = self.dw.transpose() * DVector::from_column_slice(self.e_theta_perp.as_slice());
        &up * up.transpose() / self.r
    }

    /// `Γ₁ = dwᵀ e_θ e_θᵀ dw / r`.
    pub fn gamma1(&self) -> DMatrix<f64> {
        let u = self.dw.transpose() * DVector::from_column_slice(self.e_theta.as_slice());
        &u * u.transpose() / self.r
    }

    /// `H(y) = (η·e_θ, η·e_θ^⊥)` with `η = dw(q♭) y`.
    pub fn h_coords(&self, y: &[f64]) -> (f64, f64) {
        let mut eta = [0.0; 2];
        for (k, e) in eta.iter_mut().enumerate() {
            *e = (0..y.len()).map(|j| self.dw[(k, j)] * y[j]).sum();
        }
        (
            eta[0] * self.e_theta[0] + eta[1] * self.e_theta[1],
            eta[0] * self.e_theta_perp[0] + eta[1] * self.e_theta_perp[1],
        )
    }
}

pub fn rotation_matrix(phi: f64) -> Matrix2<f64> {
    let (c, s) = ((0.5 * phi).cos(), (0.5 * phi).sin());
    Matrix2::new(c, -s, s, c)
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{pauli, LinearCone};

    fn event(q: [f64; 2], p: [f64; 2]) -> CrossingEvent {
        let pot = LinearCone::isotropic(2);
        CrossingEvent::from_phase_point(&pot, 0.0, PhasePoint::new(q.to_vec(), p.to_vec()), 0.0)
            .unwrap()
    }

    #[test]
    fn geometry_invariants() {
        for (q, p) in [
            ([0.0, 0.03], [1.2, 0.0]),
            ([-0.02, 0.0], [0.0, 0.7]),
            ([0.01, 0.01], [-1.0, 1.0]),
            ([0.0, 0.0], [-2.0, -0.3]),
        ] {
            let ev = event(q, p);
            let a = pauli([ev.e_theta[0], ev.e_theta[1]]);
            assert!((a * ev.v_theta - ev.v_theta).norm() < 1e-14);
            assert!((a * ev.v_theta_perp + ev.v_theta_perp).norm() < 1e-14);
            assert!(ev.v_theta[0] >= 0.0);
            assert!((ev.e_theta_perp.dot(&ev.e_theta)).abs() < 1e-15);
            let w = Vector2::new(q[0], q[1]);
            assert!((w - ev.e_theta_perp * ev.alpha_signed()).norm() < 1e-14);
            // rotated basis identification
            let rot = ev.rotation();
            let z = ev.zeta();
            assert!((rot * Vector2::new(0.0, 1.0) * z - ev.v_theta).norm() < 1e-14);
            assert!((rot * Vector2::new(1.0, 0.0) * z - ev.v_theta_perp).norm() < 1e-14);
            let conj = rot.transpose() * a * rot;
            assert!((conj - Matrix2::new(-1.0, 0.0, 0.0, 1.0)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn theta_pi_gives_identity_rotation() {
        let ev = event([0.0, 0.0], [-1.0, 0.0]);
        assert!((ev.theta.abs() - std::f64::consts::PI).abs() < 1e-15);
        assert!((ev.rotation() - Matrix2::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn gamma_matrices_isotropic() {
        let ev = event([0.0, 0.0], [2.0, 0.0]);
        let g0 = ev.gamma0();
        let g1 = ev.gamma1();
        assert!((g0[(1, 1)] - 0.5).abs() < 1e-15 && g0[(0, 0)].abs() < 1e-15);
        assert!((g1[(0, 0)] - 0.5).abs() < 1e-15 && g1[(1, 1)].abs() < 1e-15);
        assert_eq!(g1.transpose(), g1);
    }
}
