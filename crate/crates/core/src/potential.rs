//! Matrix potentials `V(x) = v(x) I + A(w(x))` and their spectral data.
//!
//! `A(w) = [[w1, w2], [w2, -w1]]` has eigenvalues `±|w|`, so the two modes
//! are `λ± = v ± |w|` with projectors `Π± = (I ± A(w)/|w|) / 2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::classical::PhasePoint;
use crate::error::{Error, Result};

/// Selects one of the two eigenvalue branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSign {
    Minus,
    Plus,
}

impl ModeSign {
    pub fn sign(self) -> f64 {
        match self {
            ModeSign::Minus => -1.0,
            ModeSign::Plus => 1.0,
        }
    }

    pub fn other(self) -> ModeSign {
        match self {
            ModeSign::Minus => ModeSign::Plus,
            ModeSign::Plus => ModeSign::Minus,
        }
    }
}

impl fmt::Display for ModeSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeSign::Minus => "minus",
            ModeSign::Plus => "plus",
        })
    }
}

/// A real symmetric 2x2 potential in Pauli form.
///
/// Only `v` and `w` are required. Derivatives default to central finite
/// differences with step `1e-5 (1 + |x|)`; analytic overrides are preferred.
pub trait PauliPotential: Send + Sync {
    fn dim(&self) -> usize;
    fn v(&self, x: &[f64]) -> f64;
    fn w(&self, x: &[f64]) -> [f64; 2];

    fn grad_v(&self, x: &[f64]) -> DVector<f64> {
        fd_gradient(&|y| self.v(y), x)
    }

    fn hess_v(&self, x: &[f64]) -> DMatrix<f64> {
        fd_jacobian(&|y| self.grad_v(y).as_slice().to_vec(), x, self.dim()).symmetrize()
    }

    /// Jacobian of `w`, shape `2 x d`.
    fn dw(&self, x: &[f64]) -> DMatrix<f64> {
        fd_jacobian(&|y| self.w(y).to_vec(), x, 2)
    }

    /// Hessians of `w1` and `w2`.
    fn hess_w(&self, x: &[f64]) -> [DMatrix<f64>; 2] {
        let d = self.dim();
        let jac = |k: usize| {
            fd_jacobian(
                &|y| {
                    let dw = self.dw(y);
                    (0..d).map(|j| dw[(k, j)]).collect()
                },
                x,
                d,
            )
            .symmetrize()
        };
        [jac(0), jac(1)]
    }
}

trait Symmetrize {
    fn symmetrize(self) -> Self;
}

impl Symmetrize for DMatrix<f64> {
    fn symmetrize(self) -> Self {
        let t = self.transpose();
        (self + t) * 0.5
    }
}

/// Finite-difference step used by the derivative fallbacks.
pub fn fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + norm(x))
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DVector<f64> {
    let h = fd_step(x);
    let mut y = x.to_vec();
    DVector::from_fn(x.len(), |j, _| {
        y[j] = x[j] + h;
        let fp = f(&y);
        y[j] = x[j] - h;
        let fm = f(&y);
        y[j] = x[j];
        (fp - fm) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a vector map with `m` outputs (`m x d`).
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], m: usize) -> DMatrix<f64> {
    let h = fd_step(x);
    let d = x.len();
    let mut out = DMatrix::zeros(m, d);
    let mut y = x.to_vec();
    for j in 0..d {
        y[j] = x[j] + h;
        let fp = f(&y);
        y[j] = x[j] - h;
        let fm = f(&y);
        y[j] = x[j];
        for i in 0..m {
            out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

/// `A(w) = [[w1, w2], [w2, -w1]]`.
pub fn pauli(w: [f64; 2]) -> Matrix2<f64> {
    Matrix2::new(w[0], w[1], w[1], -w[0])
}

/// Gap below which a point counts as lying on the crossing set.
pub fn crossing_threshold(x: &[f64]) -> f64 {
    1e-12 * (1.0 + norm(x))
}

fn checked_w(pot: &dyn PauliPotential, x: &[f64]) -> Result<[f64; 2]> {
    let w = pot.w(x);
    if w.iter().all(|c| c.is_finite()) {
        Ok(w)
    } else {
        Err(Error::Evaluation { x: x.to_vec() })
    }
}

fn off_crossing(pot: &dyn PauliPotential, x: &[f64]) -> Result<([f64; 2], f64)> {
    let w = checked_w(pot, x)?;
    let gap = w[0].hypot(w[1]);
    if gap <= crossing_threshold(x) {
        return Err(Error::CrossingPoint { x: x.to_vec(), gap });
    }
    Ok((w, gap))
}

pub fn eval_matrix(pot: &dyn PauliPotential, x: &[f64]) -> Result<Matrix2<f64>> {
    let v = pot.v(x);
    if !v.is_finite() {
        return Err(Error::Evaluation { x: x.to_vec() });
    }
    let w = checked_w(pot, x)?;
    Ok(Matrix2::identity() * v + pauli(w))
}

/// `(λ-, λ+)` at `x`.
pub fn eigenvalues(pot: &dyn PauliPotential, x: &[f64]) -> Result<(f64, f64)> {
    let v = pot.v(x);
    if !v.is_finite() {
        return Err(Error::Evaluation { x: x.to_vec() });
    }
    let w = checked_w(pot, x)?;
    let g = w[0].hypot(w[1]);
    Ok((v - g, v + g))
}

pub fn lambda(pot: &dyn PauliPotential, x: &[f64], mode: ModeSign) -> Result<f64> {
    let (lm, lp) = eigenvalues(pot, x)?;
    Ok(match mode {
        ModeSign::Minus => lm,
        ModeSign::Plus => lp,
    })
}

pub fn projector(pot: &dyn PauliPotential, x: &[f64], mode: ModeSign) -> Result<Matrix2<f64>> {
    let (w, gap) = off_crossing(pot, x)?;
    Ok(projector_from_w(w, gap, mode))
}

pub(crate) fn projector_from_w(w: [f64; 2], gap: f64, mode: ModeSign) -> Matrix2<f64> {
    (Matrix2::identity() + pauli([w[0] / gap, w[1] / gap]) * mode.sign()) * 0.5
}

/// `B± = ±Π∓ (ξ·∇Π+) Π±`, the generator of the eigenvector transport.
pub fn coupling_matrix_b(
    pot: &dyn PauliPotential,
    x: &[f64],
    xi: &[f64],
    mode: ModeSign,
) -> Result<Matrix2<f64>> {
    let (w, gap) = off_crossing(pot, x)?;
    let dw = pot.dw(x);
    Ok(coupling_from_parts(w, gap, &dw, xi, mode))
}

pub(crate) fn coupling_from_parts(
    w: [f64; 2],
    gap: f64,
    dw: &DMatrix<f64>,
    xi: &[f64],
    mode: ModeSign,
) -> Matrix2<f64> {
    let what = Vector2::new(w[0] / gap, w[1] / gap);
    let dwxi = Vector2::new(
        (0..xi.len()).map(|j| dw[(0, j)] * xi[j]).sum(),
        (0..xi.len()).map(|j| dw[(1, j)] * xi[j]).sum(),
    );
    // derivative of w/|w| along ξ
    let dhat = (dwxi - what * what.dot(&dwxi)) / gap;
    let dpi_plus = pauli([dhat[0], dhat[1]]) * 0.5;
    let pm = projector_from_w(w, gap, mode);
    let po = projector_from_w(w, gap, mode.other());
    po * dpi_plus * pm * mode.sign()
}

/// `w(x) · dw(x) ξ`; vanishes exactly on the set where the gap is stationary.
pub fn sigma_residual(pot: &dyn PauliPotential, z: &PhasePoint) -> f64 {
    let x = z.q.as_slice();
    let w = pot.w(x);
    let dwxi = pot.dw(x) * &z.p;
    w[0] * dwxi[0] + w[1] * dwxi[1]
}

/// `∇λ± = ∇v ± dwᵀ w/|w|`.
pub fn grad_lambda(pot: &dyn PauliPotential, x: &[f64], mode: ModeSign) -> Result<DVector<f64>> {
    let (w, gap) = off_crossing(pot, x)?;
    let dw = pot.dw(x);
    let what = DVector::from_vec(vec![w[0] / gap, w[1] / gap]);
    Ok(pot.grad_v(x) + dw.transpose() * what * mode.sign())
}

/// `Hess λ± = Hess v ± (Σk ŵk Hess wk + dwᵀ(I - ŵŵᵀ)dw / |w|)`.
pub fn hess_lambda(pot: &dyn PauliPotential, x: &[f64], mode: ModeSign) -> Result<DMatrix<f64>> {
    let (w, gap) = off_crossing(pot, x)?;
    let dw = pot.dw(x);
    let hw = pot.hess_w(x);
    let (c, s) = (w[0] / gap, w[1] / gap);
    let perp = DMatrix::from_row_slice(1, 2, &[-s, c]) * &dw;
    let sing = perp.transpose() * perp / gap;
    Ok(pot.hess_v(x) + (&hw[0] * c + &hw[1] * s + sing) * mode.sign())
}

/// Fix the sign of a real 2-vector: first component nonnegative, ties broken
/// by the second.
pub fn sign_convention(v: Vector2<f64>) -> Vector2<f64> {
    let tol = 1e-14 * v.norm().max(1.0);
    if v[0] > tol || (v[0].abs() <= tol && v[1] >= 0.0) {
        v
    } else {
        -v
    }
}

/// Unit eigenvector of `A(e)` for eigenvalue `s = ±1`, sign-normalized.
pub fn pauli_eigenvector(e: [f64; 2], s: f64) -> Vector2<f64> {
    // A(e) for a unit e = (cos β, sin β) has eigenvectors at angles β/2 and β/2 + π/2
    let beta = e[1].atan2(e[0]);
    let half = 0.5 * beta;
    let v = if s > 0.0 {
        Vector2::new(half.cos(), half.sin())
    } else {
        Vector2::new(-half.sin(), half.cos())
    };
    sign_convention(v)
}

/// Normalized eigenvector of `V(x)` for the given mode.
pub fn eigenvector(pot: &dyn PauliPotential, x: &[f64], mode: ModeSign) -> Result<Vector2<f64>> {
    let (w, gap) = off_crossing(pot, x)?;
    Ok(pauli_eigenvector([w[0] / gap, w[1] / gap], mode.sign()))
}

/// Scalar Hamiltonian `|p|²/2 + λ(q)` for a mode, or `|p|²/2 + v(q)` when
/// `mode` is `None`.
pub fn hamiltonian(pot: &dyn PauliPotential, z: &PhasePoint, mode: Option<ModeSign>) -> f64 {
    let x = z.q.as_slice();
    let kin = 0.5 * z.p.norm_squared();
    match mode {
        None => kin + pot.v(x),
        Some(m) => {
            let w = pot.w(x);
            kin + pot.v(x) + m.sign() * w[0].hypot(w[1])
        }
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type PairFn = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;
type VecFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type MatPairFn = Arc<dyn Fn(&[f64]) -> [DMatrix<f64>; 2] + Send + Sync>;

/// A potential assembled from user closures. Missing derivatives fall back to
/// finite differences.
#[derive(Clone)]
pub struct ClosurePotential {
    dim: usize,
    v: ScalarFn,
    w: PairFn,
    grad_v: Option<VecFn>,
    hess_v: Option<MatFn>,
    dw: Option<MatFn>,
    hess_w: Option<MatPairFn>,
}

impl ClosurePotential {
    pub fn new(
        dim: usize,
        v: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        w: impl Fn(&[f64]) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            v: Arc::new(v),
            w: Arc::new(w),
            grad_v: None,
            hess_v: None,
            dw: None,
            hess_w: None,
        }
    }

    pub fn with_grad_v(mut self, f: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.grad_v = Some(Arc::new(f));
        self
    }

    pub fn with_hess_v(mut self, f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hess_v = Some(Arc::new(f));
        self
    }

    pub fn with_dw(mut self, f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.dw = Some(Arc::new(f));
        self
    }

    pub fn with_hess_w(
        mut self,
        f: impl Fn(&[f64]) -> [DMatrix<f64>; 2] + Send + Sync + 'static,
    ) -> Self {
        self.hess_w = Some(Arc::new(f));
        self
    }
}

impl PauliPotential for ClosurePotential {
    fn dim(&self) -> usize {
        self.dim
    }
    fn v(&self, x: &[f64]) -> f64 {
        (self.v)(x)
    }
    fn w(&self, x: &[f64]) -> [f64; 2] {
        (self.w)(x)
    }
    fn grad_v(&self, x: &[f64]) -> DVector<f64> {
        match &self.grad_v {
            Some(f) => f(x),
            None => fd_gradient(&|y| self.v(y), x),
        }
    }
    fn hess_v(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.hess_v {
            Some(f) => f(x),
            None => fd_jacobian(&|y| self.grad_v(y).as_slice().to_vec(), x, self.dim).symmetrize(),
        }
    }
    fn dw(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.dw {
            Some(f) => f(x),
            None => fd_jacobian(&|y| self.w(y).to_vec(), x, 2),
        }
    }
    fn hess_w(&self, x: &[f64]) -> [DMatrix<f64>; 2] {
        match &self.hess_w {
            Some(f) => f(x),
            None => {
                let d = self.dim;
                let jac = |k: usize| {
                    fd_jacobian(
                        &|y| {
                            let dw = self.dw(y);
                            (0..d).map(|j| dw[(k, j)]).collect()
                        },
                        x,
                        d,
                    )
                    .symmetrize()
                };
                [jac(0), jac(1)]
            }
        }
    }
}

/// `v = c|x|²/2`, `w = (x1, x2 + α0)`. With `c = 0` and `α0 = 0` this is the
/// model cone `w(x) = x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCone {
    pub dim: usize,
    pub alpha0: f64,
    pub c: f64,
}

impl LinearCone {
    pub fn isotropic(dim: usize) -> Self {
        Self { dim, alpha0: 0.0, c: 0.0 }
    }

    pub fn shifted(dim: usize, alpha0: f64) -> Self {
        Self { dim, alpha0, c: 0.0 }
    }

    pub fn quadratic(dim: usize, c: f64, alpha0: f64) -> Self {
        Self { dim, alpha0, c }
    }
}

impl PauliPotential for LinearCone {
    fn dim(&self) -> usize {
        self.dim
    }
    fn v(&self, x: &[f64]) -> f64 {
        0.5 * self.c * x.iter().map(|a| a * a).sum::<f64>()
    }
    fn w(&self, x: &[f64]) -> [f64; 2] {
        [x[0], x.get(1).copied().unwrap_or(0.0) + self.alpha0]
    }
    fn grad_v(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().map(|a| self.c * a))
    }
    fn hess_v(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * self.c
    }
    fn dw(&self, _x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2, self.dim);
        for k in 0..self.dim.min(2) {
            m[(k, k)] = 1.0;
        }
        m
    }
    fn hess_w(&self, _x: &[f64]) -> [DMatrix<f64>; 2] {
        [DMatrix::zeros(self.dim, self.dim), DMatrix::zeros(self.dim, self.dim)]
    }
}

/// Parameters of the named built-in potentials.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BuiltinParams {
    pub alpha0: f64,
    pub c: f64,
}

pub const BUILTIN_IDS: [&str; 3] = ["isotropic-linear", "shifted-linear", "quadratic-v"];

/// Look up a built-in potential by id.
pub fn builtin(id: &str, dim: usize, params: BuiltinParams) -> Result<Arc<dyn PauliPotential>> {
    if dim == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let pot = match id {
        "isotropic-linear" => LinearCone::isotropic(dim),
        "shifted-linear" => LinearCone::shifted(dim, params.alpha0),
        "quadratic-v" => LinearCone::quadratic(dim, params.c, params.alpha0),
        other => return Err(Error::UnknownPotential(other.to_string())),
    };
    Ok(Arc::new(pot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn iso() -> LinearCone {
        LinearCone::isotropic(2)
    }

    fn mat_close(a: &Matrix2<f64>, b: &Matrix2<f64>, tol: f64) -> bool {
        (a - b).abs().max() <= tol
    }

    #[test]
    fn matrix_values() {
        let p = iso();
        assert_eq!(eval_matrix(&p, &[1.0, 0.0]).unwrap(), Matrix2::new(1.0, 0.0, 0.0, -1.0));
        assert_eq!(eval_matrix(&p, &[0.0, 1.0]).unwrap(), Matrix2::new(0.0, 1.0, 1.0, 0.0));
        let shifted = ClosurePotential::new(2, |_| 2.0, |x| [x[0], x[1]]);
        assert_eq!(
            eval_matrix(&shifted, &[0.0, 0.0]).unwrap(),
            Matrix2::new(2.0, 0.0, 0.0, 2.0)
        );
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalues(&iso(), &[3.0, 4.0]).unwrap(), (-5.0, 5.0));
        let one = ClosurePotential::new(2, |_| 1.0, |x| [x[0], x[1]]);
        assert_eq!(eigenvalues(&one, &[0.0, 0.0]).unwrap(), (1.0, 1.0));
        let (lm, lp) = eigenvalues(&LinearCone::shifted(2, 0.1), &[0.0, 0.0]).unwrap();
        assert!(close(lm, -0.1, 1e-15) && close(lp, 0.1, 1e-15));
    }

    #[test]
    fn projector_examples() {
        let p = iso();
        let a = projector(&p, &[1.0, 0.0], ModeSign::Plus).unwrap();
        assert!(mat_close(&a, &Matrix2::new(1.0, 0.0, 0.0, 0.0), 1e-15));
        let b = projector(&p, &[0.0, 1.0], ModeSign::Plus).unwrap();
        assert!(mat_close(&b, &Matrix2::new(0.5, 0.5, 0.5, 0.5), 1e-15));
        assert!(matches!(
            projector(&p, &[0.0, 0.0], ModeSign::Minus),
            Err(Error::CrossingPoint { .. })
        ));
    }

    #[test]
    fn coupling_antisymmetry_and_fd() {
        let p = iso();
        let bm = coupling_matrix_b(&p, &[1.0, 0.0], &[0.0, 1.0], ModeSign::Minus).unwrap();
        let bp = coupling_matrix_b(&p, &[1.0, 0.0], &[0.0, 1.0], ModeSign::Plus).unwrap();
        assert!(mat_close(&bm, &(-bp.transpose()), 1e-14));
        assert_eq!(
            coupling_matrix_b(&p, &[1.0, 0.0], &[0.0, 0.0], ModeSign::Plus).unwrap(),
            Matrix2::zeros()
        );

        // finite-difference derivative of Π+ along ξ
        let x = [0.6, 0.8];
        let xi = [1.0, 0.0];
        let h = 1e-5;
        let pp = projector(&p, &[x[0] + h, x[1]], ModeSign::Plus).unwrap();
        let pm = projector(&p, &[x[0] - h, x[1]], ModeSign::Plus).unwrap();
        let dpi = (pp - pm) / (2.0 * h);
        let fd = projector(&p, &x, ModeSign::Minus).unwrap()
            * dpi
            * projector(&p, &x, ModeSign::Plus).unwrap();
        let b = coupling_matrix_b(&p, &x, &xi, ModeSign::Plus).unwrap();
        assert!(mat_close(&b, &fd, 1e-9));
    }

    #[test]
    fn sigma_examples() {
        let p = iso();
        let z = |q: [f64; 2], pp: [f64; 2]| PhasePoint::new(q.to_vec(), pp.to_vec());
        assert_eq!(sigma_residual(&p, &z([0.0, 1.0], [1.0, 0.0])), 0.0);
        assert_eq!(sigma_residual(&p, &z([1.0, 0.0], [1.0, 0.0])), 1.0);
        let s = LinearCone::shifted(2, 0.1);
        assert_eq!(sigma_residual(&s, &z([0.0, 0.0], [1.0, 0.0])), 0.0);
    }

    #[test]
    fn fd_fallback_matches_analytic() {
        let an = LinearCone::quadratic(2, 0.7, 0.2);
        let fdp = ClosurePotential::new(2, move |x| an.v(x), move |x| an.w(x));
        let x = [0.3, -0.4];
        assert!((fdp.grad_v(&x) - an.grad_v(&x)).amax() < 1e-9);
        assert!((fdp.hess_v(&x) - an.hess_v(&x)).amax() < 1e-5);
        assert!((fdp.dw(&x) - an.dw(&x)).amax() < 1e-9);
        let hl = hess_lambda(&an, &x, ModeSign::Minus).unwrap();
        let fd = fd_jacobian(
            &|y| grad_lambda(&an, y, ModeSign::Minus).unwrap().as_slice().to_vec(),
            &x,
            2,
        );
        assert!((hl - fd).amax() < 1e-8);
    }

    #[test]
    fn eigenvector_convention() {
        let p = iso();
        let y = eigenvector(&p, &[-1.0, 0.0], ModeSign::Minus).unwrap();
        assert!((y - Vector2::new(1.0, 0.0)).norm() < 1e-15);
        let yp = eigenvector(&p, &[-1.0, 0.0], ModeSign::Plus).unwrap();
        assert!(y.dot(&yp).abs() < 1e-15);
        let x = [0.3, -0.7];
        for m in [ModeSign::Minus, ModeSign::Plus] {
            let v = eigenvector(&p, &x, m).unwrap();
            let lam = lambda(&p, &x, m).unwrap();
            let r = eval_matrix(&p, &x).unwrap() * v - v * lam;
            assert!(r.norm() < 1e-14);
        }
    }
}
