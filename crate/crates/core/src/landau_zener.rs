//! Landau–Zener model: scattering coefficients, asymptotic phases, the
//! rotation onto the normal form and a numerical ODE oracle.
//!
//! The normal form is `(1/i) ∂ₛu = [[s + z1, z2], [z2, -s - z1]] u`. Far from
//! `s = 0` its solutions behave like `(e^{iλ} u1, e^{-iλ} u2)` with
//! `λ(s) = ((s + z1)² + z2² ln|s + z1|) / 2`, and the constant vectors on the
//! two sides are related by `S = [[a, -b̄], [b, a]]`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crossing::CrossingEvent;
use crate::error::{Error, Result};
use crate::gamma::complex_gamma;

/// Parameters of one normal-form problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LZParameters {
    pub z1: f64,
    pub z2: f64,
    pub r: f64,
    pub alpha: f64,
    pub eps: f64,
    pub theta: f64,
}

impl LZParameters {
    /// Parameters at a point `η = dw(q♭) y` of the model problem. In normal-form
    /// units `z = (η·e_θ, η·e_θ^⊥ + α/√ε) / √r`.
    pub fn from_event(event: &CrossingEvent, eps: f64, eta: [f64; 2]) -> Self {
        let h1 = eta[0] * event.e_theta[0] + eta[1] * event.e_theta[1];
        let h2 = eta[0] * event.e_theta_perp[0] + eta[1] * event.e_theta_perp[1];
        let sr = event.r.sqrt();
        Self {
            z1: h1 / sr,
            z2: (h2 + event.alpha_signed() / eps.sqrt()) / sr,
            r: event.r,
            alpha: event.alpha_signed(),
            eps,
            theta: event.theta,
        }
    }

    /// Base parameters with no transverse offset (`η = 0`).
    pub fn base(event: &CrossingEvent, eps: f64) -> Self {
        Self::from_event(event, eps, [0.0, 0.0])
    }
}

/// Scattering coefficients and the transfer matrix at one transverse value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringData {
    pub a: f64,
    pub b: Complex64,
    pub s: Matrix2<Complex64>,
    /// Sign linking the normal-form basis to `(V_θ^⊥, V_θ)`; see
    /// [`CrossingEvent::zeta`].
    pub zeta: f64,
}

/// `a(z) = e^{-π z²/2}`.
pub fn coeff_a(z: f64) -> f64 {
    (-0.5 * PI * z * z).exp()
}

/// Reflection coefficient of the normal form,
/// `b(z) = e^{iπ/4} (2i / (z√π)) 2^{-iz²/2} e^{-πz²/4} Γ(1 + iz²/2) sinh(πz²/2)`.
///
/// The `e^{iπ/4}` factor is the constant phase needed to match the transfer of
/// the normal form under the stripping convention above; without it the
/// modulus is right but the off-diagonal entries are rotated by π/4.
pub fn coeff_b(z: f64) -> Complex64 {
    if z == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let y = 0.5 * z * z;
    let g = complex_gamma(Complex64::new(1.0, y)).expect("Γ has no poles on Re z = 1");
    // 2^{-iy}
    let pow2 = Complex64::from_polar(1.0, -y * 2f64.ln());
    // sinh(πy) e^{-πy/2} = (e^{πy/2} - e^{-3πy/2}) / 2, stable for large y
    let damp = 0.5 * ((0.5 * PI * y).exp() - (-1.5 * PI * y).exp());
    let pref = Complex64::new(0.0, 2.0 / (z * PI.sqrt()));
    Complex64::from_polar(1.0, 0.25 * PI) * pref * pow2 * g * damp
}

/// The same expression without the π/4 phase, kept for comparison only.
pub fn coeff_b_unrotated(z: f64) -> Complex64 {
    coeff_b(z) * Complex64::from_polar(1.0, -0.25 * PI)
}

/// `S = [[a, -b̄], [b, a]]` evaluated at a transverse value `z2`.
pub fn transfer_matrix(z2: f64) -> Matrix2<Complex64> {
    let a = Complex64::new(coeff_a(z2), 0.0);
    let b = coeff_b(z2);
    Matrix2::new(a, -b.conj(), b, a)
}

pub fn scattering_matrix(params: &LZParameters) -> ScatteringData {
    scattering_at(params.z2, 1.0)
}

pub fn scattering_at(z2: f64, zeta: f64) -> ScatteringData {
    ScatteringData {
        a: coeff_a(z2),
        b: coeff_b(z2),
        s: transfer_matrix(z2),
        zeta,
    }
}

/// `ln(α / (2√(rε)))` multiplied by `α^k`, with the `α → 0` limit taken as 0.
fn alpha_log(alpha: f64, k: i32, r: f64, eps: f64) -> f64 {
    if alpha == 0.0 {
        0.0
    } else {
        alpha.powi(k) * (alpha.abs() / (2.0 * (r * eps).sqrt())).ln()
    }
}

/// `Λ(s, η) = ((s r + H1)² + (H2 + α/√ε)² ln|s√r|) / (2r)`.
pub fn phase_lambda(p: &LZParameters, s: f64, h: (f64, f64)) -> Result<f64> {
    if s == 0.0 {
        return Err(Error::Domain("Λ is undefined at s = 0".into()));
    }
    let (h1, h2) = h;
    let lin = s * p.r + h1;
    let tr = h2 + p.alpha / p.eps.sqrt();
    Ok((lin * lin + tr * tr * (s * p.r.sqrt()).abs().ln()) / (2.0 * p.r))
}

/// `Φ(η)`, the constant part of the ingoing phase. `gamma1_quad = Γ₁ y·y`.
pub fn phase_phi(p: &LZParameters, h: (f64, f64), gamma1_quad: f64) -> f64 {
    let (h1, h2) = h;
    let (r, e, a) = (p.r, p.eps, p.alpha);
    let l0 = (1.0 / (2.0 * (r * e).sqrt())).ln();
    a * a / (4.0 * r * e) - alpha_log(a, 2, r, e) / (2.0 * r * e) - h1 * h1 / (2.0 * r)
        - alpha_log(a, 1, r, e) * h2 / (r * e.sqrt())
        - h2 * h2 * l0 / (2.0 * r)
        + 0.5 * gamma1_quad
}

/// `Λ̃(H)`, the real phase carried by the reflected branch of the transfer.
pub fn phase_lambda_tilde(p: &LZParameters, h: (f64, f64), gamma1_quad: f64) -> f64 {
    let (h1, h2) = h;
    let (r, e, a) = (p.r, p.eps, p.alpha);
    let l0 = (1.0 / (2.0 * (r * e).sqrt())).ln();
    -gamma1_quad + h1 * h1 / r - a * a / (2.0 * r * e)
        + h2 * h2 * l0 / r
        + alpha_log(a, 2, r, e) / (r * e)
        + 2.0 * alpha_log(a, 1, r, e) * h2 / (r * e.sqrt())
}

/// `λ(s) = ((s + z1)² + z2² ln|s + z1|) / 2`.
pub fn lz_phase(z1: f64, z2: f64, s: f64) -> f64 {
    let x = s + z1;
    0.5 * (x * x + z2 * z2 * x.abs().ln())
}

type C2 = [Complex64; 2];

/// Statistics of an adaptive ODE solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// One fourth-order Magnus step of `(1/i) u' = ((s+z1) σz + z2 σx) u` from `s`
/// to `s + h`. With two Gauss points the exponent collapses to
/// `i (h d̄ σz + h z2 σx - h³ z2/6 σy)`, `d̄` the midpoint value of `s + z1`.
fn magnus_step(z1: f64, z2: f64, s: f64, h: f64, u: &C2) -> C2 {
    let nz = h * (s + 0.5 * h + z1);
    let nx = h * z2;
    let ny = -h * h * h * z2 / 6.0;
    let n = (nx * nx + ny * ny + nz * nz).sqrt();
    let (c, sn) = if n == 0.0 { (1.0, 1.0) } else { (n.cos(), n.sin() / n) };
    // exp(i n·σ) = cos|n| + i sin|n| n̂·σ
    let i = Complex64::i();
    let m00 = Complex64::new(c, 0.0) + i * (sn * nz);
    let m11 = Complex64::new(c, 0.0) - i * (sn * nz);
    let m01 = i * (sn * nx) + Complex64::new(sn * ny, 0.0);
    let m10 = i * (sn * nx) - Complex64::new(sn * ny, 0.0);
    [m00 * u[0] + m01 * u[1], m10 * u[0] + m11 * u[1]]
}

/// Integrate the normal form from `s0` to `s1` with an adaptive fourth-order
/// Magnus scheme. Each step is exactly unitary; the step size is controlled
/// by step doubling against `tol·(1 + |u|)` per unit of `s`.
pub fn integrate_lz_ode(
    z1: f64,
    z2: f64,
    s0: f64,
    s1: f64,
    u0: C2,
    tol: f64,
) -> Result<(C2, OdeStats)> {
    if !(tol > 0.0) {
        return Err(Error::Tolerance(tol));
    }
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let mut s = s0;
    let mut u = u0;
    let mut stats = OdeStats::default();
    if s1 == s0 {
        return Ok((u, stats));
    }
    let freq = (s0 + z1).abs().max((s1 + z1).abs()) + z2.abs() + 1.0;
    let mut h = (0.1 / freq).min((s1 - s0).abs());
    while (s - s1) * dir < 0.0 {
        if h < 1e-14 * (1.0 + s.abs()) {
            return Err(Error::Tolerance(s));
        }
        let hs = h.min((s1 - s) * dir) * dir;
        let full = magnus_step(z1, z2, s, hs, &u);
        let half = magnus_step(z1, z2, s, 0.5 * hs, &u);
        let two = magnus_step(z1, z2, s + 0.5 * hs, 0.5 * hs, &half);
        let mut err = 0.0f64;
        for c in 0..2 {
            let sc = tol * hs.abs() * (1.0 + two[c].norm());
            err = err.max((two[c] - full[c]).norm() / 15.0 / sc);
        }
        if err <= 1.0 {
            s += hs;
            u = two;
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let fac = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.25)).clamp(0.2, 4.0) };
        h = hs.abs() * fac;
    }
    Ok((u, stats))
}

/// Numerical transfer matrix over `[-T, T]` with the `e^{±iλ}` phases
/// stripped at the end points.
pub fn lz_transfer_numeric(z1: f64, z2: f64, t: f64, tol: f64) -> Result<Matrix2<Complex64>> {
    if !(t > 0.0) {
        return Err(Error::Domain("T must be positive".into()));
    }
    let lam_in = lz_phase(z1, z2, -t);
    let lam_out = lz_phase(z1, z2, t);
    let mut m = Matrix2::zeros();
    for col in 0..2 {
        let mut u0 = [Complex64::new(0.0, 0.0); 2];
        u0[col] = Complex64::from_polar(1.0, if col == 0 { lam_in } else { -lam_in });
        let (u, _) = integrate_lz_ode(z1, z2, -t, t, u0, tol)?;
        m[(0, col)] = u[0] * Complex64::from_polar(1.0, -lam_out);
        m[(1, col)] = u[1] * Complex64::from_polar(1.0, lam_out);
    }
    Ok(m)
}

/// Direction of [`rotation_reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Model vector to normal-form vector, `u = R(φ)⁻¹ v`.
    Forward,
    /// Normal-form vector back to the model frame, `v = R(φ) u`.
    Inverse,
}

/// Rotate a 2-vector between the model frame and the normal-form frame.
pub fn rotation_reduce(phi: f64, v: Vector2<Complex64>, direction: Direction) -> Vector2<Complex64> {
    let r = crate::crossing::rotation_matrix(phi).map(|x| Complex64::new(x, 0.0));
    match direction {
        Direction::Forward => r.transpose() * v,
        Direction::Inverse => r * v,
    }
}

/// `(s, η) ↦ (s √r, η / √r)`: model variables to normal-form variables.
pub fn rescale_to_normal_form(r: f64, s: f64, eta: [f64; 2]) -> (f64, [f64; 2]) {
    let q = r.sqrt();
    (s * q, [eta[0] / q, eta[1] / q])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::PhasePoint;
    use crate::potential::{pauli, LinearCone};

    #[test]
    fn coefficient_values() {
        assert_eq!(coeff_a(0.0), 1.0);
        assert_eq!(coeff_b(0.0), Complex64::new(0.0, 0.0));
        assert!((coeff_a(1.0) - 0.207_879_576_350_761_9).abs() < 1e-15);
        assert!((coeff_b(1.0).norm_sqr() - (1.0 - (-PI).exp())).abs() < 1e-12);
        for k in 0..=120 {
            let z = 0.05 * k as f64;
            let u = coeff_a(z).powi(2) + coeff_b(z).norm_sqr();
            assert!((u - 1.0).abs() < 1e-11, "z = {z}: {u}");
        }
    }

    #[test]
    fn small_z_is_continuous() {
        assert!(coeff_b(1e-6).norm() < 1e-5);
    }

    #[test]
    fn matrix_is_unitary() {
        let s = transfer_matrix(0.8);
        let id = s.adjoint() * s;
        assert!((id - Matrix2::identity()).iter().all(|c| c.norm() < 1e-12));
        let s0 = transfer_matrix(0.0);
        let out = s0 * Vector2::new(Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.1));
        assert!(out[0].norm() < 1e-15 && (out[1] - Complex64::new(0.3, 0.1)).norm() < 1e-15);
        assert!(coeff_a(40.0) < 1e-300);
    }

    #[test]
    fn ode_conserves_norm_and_decouples() {
        let u0 = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let (u, _) = integrate_lz_ode(0.3, 0.7, -100.0, 100.0, u0, 1e-10).unwrap();
        let n = u[0].norm_sqr() + u[1].norm_sqr();
        assert!((n - 1.0).abs() < 1e-9, "norm drift {:e}", n - 1.0);
        let (v, _) = integrate_lz_ode(0.2, 0.0, -30.0, 30.0, u0, 1e-10).unwrap();
        assert!((v[0].norm() - 0.6).abs() < 1e-9 && (v[1].norm() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn b_is_odd() {
        for z in [0.1, 0.8, 2.5] {
            assert!((coeff_b(-z) + coeff_b(z)).norm() < 1e-15);
        }
        let m = lz_transfer_numeric(0.0, -0.8, 60.0, 1e-10).unwrap();
        assert!((m[(1, 0)] - coeff_b(-0.8)).norm() < 3e-2);
    }

    #[test]
    fn stripped_transfer_is_close() {
        let m = lz_transfer_numeric(0.0, 0.8, 60.0, 1e-10).unwrap();
        let s = transfer_matrix(0.8);
        let dev = (m - s).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(dev < 3e-2, "deviation {dev}");
    }

    #[test]
    fn lambda_collapse_and_domain() {
        let p = LZParameters { z1: 0.0, z2: 0.0, r: 2.0, alpha: 0.0, eps: 0.01, theta: 0.0 };
        let l = phase_lambda(&p, 1.5, (0.0, 0.0)).unwrap();
        assert!((l - p.r * 1.5 * 1.5 / 2.0).abs() < 1e-14);
        assert!(phase_lambda(&p, 0.0, (0.0, 0.0)).is_err());
        let pa = LZParameters { alpha: 0.03, ..p };
        let phi0 = phase_phi(&pa, (0.0, 0.0), 0.0);
        let (r, e, a) = (pa.r, pa.eps, pa.alpha);
        let want = a * a / (4.0 * r * e) - a * a / (2.0 * r * e) * (a / (2.0 * (r * e).sqrt())).ln();
        assert!((phi0 - want).abs() < 1e-13);
    }

    #[test]
    fn lambda_tilde_is_minus_twice_phi() {
        for (a, h, g) in [(0.0, (0.3, -0.7), 0.05), (0.02, (-1.1, 0.4), 0.6), (0.1, (0.0, 2.0), 0.0)] {
            let p = LZParameters { z1: 0.0, z2: 0.0, r: 1.3, alpha: a, eps: 0.02, theta: 0.0 };
            let lt = phase_lambda_tilde(&p, h, g);
            let phi = phase_phi(&p, h, g);
            assert!((lt + 2.0 * phi).abs() < 1e-12 * (1.0 + lt.abs()));
        }
    }

    #[test]
    fn rotation_round_trip_and_conjugation() {
        let pot = LinearCone::isotropic(2);
        for p in [[1.0, 0.3], [-1.0, 0.0], [0.2, -2.0]] {
            let ev = CrossingEvent::from_phase_point(
                &pot,
                0.0,
                PhasePoint::new(vec![0.0, 0.0], p.to_vec()),
                0.0,
            )
            .unwrap();
            let v = Vector2::new(Complex64::new(0.3, -0.2), Complex64::new(-1.1, 0.5));
            let back = rotation_reduce(
                ev.phi,
                rotation_reduce(ev.phi, v, Direction::Forward),
                Direction::Inverse,
            );
            assert!((back - v).iter().all(|c| c.norm() < 1e-14));
            let rot = ev.rotation();
            let c = rot.transpose() * pauli([ev.e_theta[0], ev.e_theta[1]]) * rot;
            assert!((c - Matrix2::new(-1.0, 0.0, 0.0, 1.0)).abs().max() < 1e-12);
            // the transverse direction becomes the off-diagonal coupling
            let c2 = rot.transpose() * pauli([ev.e_theta_perp[0], ev.e_theta_perp[1]]) * rot;
            assert!((c2 + Matrix2::new(0.0, 1.0, 1.0, 0.0)).abs().max() < 1e-12);
        }
    }
}
