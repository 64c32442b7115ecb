//! Profile equations of the wave packets: the harmonic split-step solver, the
//! singular decomposition of the Hessian near `t♭`, the phase matrix `G_α`
//! and the maps between profiles and their limits at the crossing.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::Trajectory;
use crate::crossing::CrossingEvent;
use crate::error::{Error, Result};
use crate::grid::{ordered_reduce, ordered_sum, FftPlan, GridSpec};
use crate::potential::{hess_lambda, ModeSign, PauliPotential};
use crate::primitives;

/// Complex amplitude on the periodic grid `[-L, L)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGrid {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

impl ProfileGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![Complex64::new(0.0, 0.0); spec.len()] }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Self {
        let values = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let mut y = [0.0; 3];
                spec.point(i, &mut y);
                f(&y[..spec.d])
            })
            .collect();
        Self { spec, values }
    }

    /// `π^{-d/4} e^{-|y|²/2}`, unit `L²` norm.
    pub fn gaussian(spec: GridSpec) -> Self {
        let c = std::f64::consts::PI.powf(-(spec.d as f64) / 4.0);
        Self::from_fn(spec, |y| {
            Complex64::new(c * (-0.5 * y.iter().map(|a| a * a).sum::<f64>()).exp(), 0.0)
        })
    }

    /// Normalized Gaussian `e^{-|y - c|²/(2w²) + i k·y}`.
    pub fn gaussian_at(spec: GridSpec, center: &[f64], width: f64, k: &[f64]) -> Self {
        let d = spec.d as f64;
        let c = (std::f64::consts::PI * width * width).powf(-d / 4.0);
        Self::from_fn(spec, |y| {
            let mut r2 = 0.0;
            let mut ph = 0.0;
            for a in 0..y.len() {
                r2 += (y[a] - center[a]).powi(2);
                ph += k[a] * y[a];
            }
            Complex64::from_polar(c * (-0.5 * r2 / (width * width)).exp(), ph)
        })
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn l(&self) -> f64 {
        self.spec.l
    }

    pub fn norm_sqr(&self) -> f64 {
        ordered_sum(self.values.len(), 0.0, |i| self.values[i].norm_sqr()) * self.spec.cell()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn inner(&self, other: &ProfileGrid) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let s = ordered_sum(self.values.len(), zero, |i| self.values[i].conj() * other.values[i]);
        s * self.spec.cell()
    }

    pub fn distance(&self, other: &ProfileGrid) -> f64 {
        let s = ordered_sum(self.values.len(), 0.0, |i| (self.values[i] - other.values[i]).norm_sqr());
        (s * self.spec.cell()).sqrt()
    }

    /// Multiply pointwise by `f(y)`.
    pub fn map_pointwise(&mut self, f: impl Fn(&[f64], Complex64) -> Complex64 + Sync) {
        let spec = self.spec;
        self.values.par_iter_mut().enumerate().for_each(|(i, c)| {
            let mut y = [0.0; 3];
            spec.point(i, &mut y);
            *c = f(&y[..spec.d], *c);
        });
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Six-point Lagrange interpolation at an arbitrary `y`, zero outside the
    /// box.
    pub fn value_at(&self, y: &[f64]) -> Complex64 {
        self.spec.interpolate6(&self.values, y, false).unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Fraction of the mass in the outer tenth of the box along any axis.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let spec = self.spec;
        let cut = 0.9 * spec.l;
        let (edge, total) = ordered_reduce(
            self.values.len(),
            (0.0, 0.0),
            |i| {
                let mut y = [0.0; 3];
                spec.point(i, &mut y);
                let m = self.values[i].norm_sqr();
                let out = y[..spec.d].iter().any(|a| a.abs() > cut);
                (if out { m } else { 0.0 }, m)
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        );
        if total == 0.0 {
            0.0
        } else {
            edge / total
        }
    }

    /// CSV with columns `y1..yd, re, im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(path)?);
        let cols: Vec<String> = (1..=self.d()).map(|a| format!("y{a}")).collect();
        writeln!(f, "{},re,im", cols.join(","))?;
        let mut y = [0.0; 3];
        for (i, c) in self.values.iter().enumerate() {
            self.spec.point(i, &mut y);
            for a in &y[..self.d()] {
                write!(f, "{a:.17e},")?;
            }
            writeln!(f, "{:.17e},{:.17e}", c.re, c.im)?;
        }
        f.flush()?;
        Ok(())
    }

    /// Binary dump: little-endian `f64` header `d, n, L`, then interleaved
    /// `re, im` pairs in row-major order.
    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(path)?);
        self.write_bin_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn write_bin_to(&self, w: &mut impl Write) -> Result<()> {
        for h in [self.d() as f64, self.n() as f64, self.l()] {
            w.write_all(&h.to_le_bytes())?;
        }
        for c in &self.values {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_bin(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        Self::read_bin_from(&mut r)
    }

    pub fn read_bin_from(r: &mut impl BufRead) -> Result<Self> {
        let mut next = || -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let (d, n, l) = (next()?, next()?, next()?);
        let spec = GridSpec::new(d as usize, n as usize, l)?;
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            let re = next()?;
            let im = next()?;
            values.push(Complex64::new(re, im));
        }
        Ok(Self { spec, values })
    }
}

/// Quadratic form `Q y·y`.
pub(crate) fn quad_form(q: &DMatrix<f64>, y: &[f64]) -> f64 {
    let d = y.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += q[(i, j)] * y[i] * y[j];
        }
    }
    s
}

/// Decomposition `Hess λ±(q±(t)) = M ± (r/ρ) Γ_α(t)` of the Hessian along a
/// mode flow, `ρ = √(α² + r²(t-t♭)²)`.
#[derive(Debug, Clone)]
pub struct HessianExpansion {
    /// Regular part, `Hess λ - (±g Γ_α)` with the Hessian evaluated exactly.
    pub m: DMatrix<f64>,
    /// Leading terms of the regular part from the geometry at `q♭` alone.
    pub m_leading: DMatrix<f64>,
    pub gamma_alpha: DMatrix<f64>,
    pub gamma0: DMatrix<f64>,
    pub gamma1: DMatrix<f64>,
    /// `r / ρ`.
    pub g_scalar: f64,
    /// `Hess λ(q(t))`.
    pub hessian: DMatrix<f64>,
}

/// `Γ_α(t) = Γ₀ + (α²/ρ²) Γ₁`.
pub fn gamma_alpha(event: &CrossingEvent, t: f64) -> Result<DMatrix<f64>> {
    let tau = t - event.t_flat;
    let rho2 = event.alpha * event.alpha + (event.r * tau).powi(2);
    if rho2 == 0.0 {
        return Err(Error::Singular);
    }
    Ok(event.gamma0() + event.gamma1() * (event.alpha * event.alpha / rho2))
}

/// `g_α(t) = (r/ρ) Γ_α(t)`.
pub fn g_alpha(event: &CrossingEvent, t: f64) -> Result<DMatrix<f64>> {
    let rho = primitives::rho(event.alpha, event.r, t - event.t_flat);
    Ok(gamma_alpha(event, t)? * (event.r / rho))
}

/// `h_α(t) = ln(r|t-t♭| + ρ)`.
pub fn h_alpha(event: &CrossingEvent, t: f64) -> Result<f64> {
    primitives::h_alpha(event.alpha, event.r, t - event.t_flat).ok_or(Error::Singular)
}

/// `G_α(t) = Γ₀ h_α(t) + (r|t-t♭|/ρ) Γ₁`; symmetric by construction.
pub fn phase_matrix_g(event: &CrossingEvent, t: f64) -> Result<DMatrix<f64>> {
    let tau = t - event.t_flat;
    let h = h_alpha(event, t)?;
    let rho = primitives::rho(event.alpha, event.r, tau);
    let frac = if tau == 0.0 { 0.0 } else { event.r * tau.abs() / rho };
    Ok(event.gamma0() * h + event.gamma1() * frac)
}

/// `∫ G_α` over `[t♭ - T, t♭]` (or `[t♭, t♭ + T]`, the same by symmetry).
pub fn integral_g(event: &CrossingEvent, span: f64) -> DMatrix<f64> {
    let (a, r) = (event.alpha, event.r);
    event.gamma0() * primitives::int_h_alpha(a, r, span)
        + event.gamma1() * primitives::int_r_abs_tau_over_rho(a, r, span)
}

fn sandwich_vec(u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    u * v.transpose()
}

/// Leading regular part at `τ = t - t♭`:
/// `Hess v ± Σk Hess wk (w♭ + rτ e_θ)k / ρ ∓ [α² u⊥u⊥ᵀ + rα_sτ(u⊥uᵀ + uu⊥ᵀ)] / ρ³`
/// with `u = dwᵀe_θ`, `u⊥ = dwᵀe_θ^⊥` and every derivative taken at `q♭`.
pub fn m_leading(
    pot: &dyn PauliPotential,
    event: &CrossingEvent,
    mode: ModeSign,
    tau: f64,
) -> Result<DMatrix<f64>> {
    let (a, a_s, r) = (event.alpha, event.alpha_signed(), event.r);
    let rho = primitives::rho(a, r, tau);
    if rho == 0.0 {
        return Err(Error::Singular);
    }
    let x = event.z_flat.q.as_slice();
    let sg = mode.sign();
    let hw = pot.hess_w(x);
    let dir = event.e_theta_perp * a_s + event.e_theta * (r * tau);
    let u = event.dw.transpose() * DVector::from_column_slice(event.e_theta.as_slice());
    let up = event.dw.transpose() * DVector::from_column_slice(event.e_theta_perp.as_slice());
    let cross = sandwich_vec(&up, &up) * (a * a)
        + (sandwich_vec(&up, &u) + sandwich_vec(&u, &up)) * (r * a_s * tau);
    Ok(pot.hess_v(x) + (&hw[0] * dir[0] + &hw[1] * dir[1]) * (sg / rho) - cross * (sg / rho.powi(3)))
}

/// Hessian decomposition along a mode trajectory at time `t`.
pub fn hessian_expansion(
    pot: &dyn PauliPotential,
    event: &CrossingEvent,
    traj: &Trajectory,
    t: f64,
) -> Result<HessianExpansion> {
    let mode = traj
        .mode
        .mode_sign()
        .ok_or_else(|| Error::Domain("the averaged flow has no Hessian decomposition".into()))?;
    let tau = t - event.t_flat;
    if event.alpha == 0.0 && tau == 0.0 {
        return Err(Error::Singular);
    }
    let q = traj.sample(t).q;
    let hessian = hess_lambda(pot, q.as_slice(), mode)?;
    let ga = gamma_alpha(event, t)?;
    let g_scalar = event.r / primitives::rho(event.alpha, event.r, tau);
    let m = &hessian - &ga * (mode.sign() * g_scalar);
    Ok(HessianExpansion {
        m,
        m_leading: m_leading(pot, event, mode, tau)?,
        gamma_alpha: ga,
        gamma0: event.gamma0(),
        gamma1: event.gamma1(),
        g_scalar,
        hessian,
    })
}

/// Hessian `Q(t)` driving a profile equation `i∂ₜu = -Δu/2 + Q(t)y·y u/2`.
pub enum HessianSource<'a> {
    /// `Hess λ(q(t))` sampled along a mode trajectory.
    Trajectory {
        pot: &'a dyn PauliPotential,
        traj: &'a Trajectory,
    },
    /// A constant matrix.
    Frozen(DMatrix<f64>),
    /// `Q ≡ 0`, free evolution.
    Zero,
    /// Arbitrary time dependence.
    Function(Box<dyn Fn(f64) -> Result<DMatrix<f64>> + Sync + 'a>),
}

impl HessianSource<'_> {
    pub fn at(&self, t: f64, d: usize) -> Result<DMatrix<f64>> {
        match self {
            HessianSource::Trajectory { pot, traj } => {
                let mode = traj.mode.mode_sign().ok_or_else(|| {
                    Error::Domain("profile equations need a mode trajectory".into())
                })?;
                let q = traj.sample(t).q;
                hess_lambda(*pot, q.as_slice(), mode).map_err(|e| match e {
                    Error::CrossingPoint { gap, .. } => Error::GapCollapse { t, gap },
                    other => other,
                })
            }
            HessianSource::Frozen(m) => Ok(m.clone()),
            HessianSource::Zero => Ok(DMatrix::zeros(d, d)),
            HessianSource::Function(f) => f(t),
        }
    }
}

/// Options of [`solve_profile`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Largest step.
    pub dt: f64,
    /// Crossing time; steps are shrunk to `refine·|t - t♭|` near it.
    pub t_flat: Option<f64>,
    pub refine: f64,
    /// Times at which snapshots are stored (inside the span).
    pub record: Vec<f64>,
    /// Boundary mass fraction that triggers a grid-overflow error.
    pub overflow: f64,
}

impl SolveOptions {
    pub fn new(dt: f64) -> Self {
        Self { dt, t_flat: None, refine: 0.05, record: Vec::new(), overflow: 1e-6 }
    }

    pub fn near(mut self, t_flat: f64) -> Self {
        self.t_flat = Some(t_flat);
        self
    }

    pub fn record(mut self, times: Vec<f64>) -> Self {
        self.record = times;
        self
    }
}

/// Output of [`solve_profile`].
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub times: Vec<f64>,
    /// `L²` norm after every step.
    pub norms: Vec<f64>,
    pub snapshots: Vec<(f64, ProfileGrid)>,
    pub last: ProfileGrid,
}

impl ProfileSolution {
    /// Largest deviation of `‖u‖` from its initial value.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norms[0];
        self.norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max)
    }
}

/// Strang splitting for `i∂ₜu = -Δu/2 + Q(t)y·y u/2` from `t_init` to `t_end`.
///
/// The potential half steps are exact for a frozen `y`, with `∫Q` over each
/// half step taken by Simpson's rule; the kinetic step is spectral.
pub fn solve_profile(
    source: &HessianSource<'_>,
    u_init: &ProfileGrid,
    t_init: f64,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<ProfileSolution> {
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::Step(opts.dt));
    }
    let spec = u_init.spec;
    let d = spec.d;
    let plan = FftPlan::new(spec);
    let k2 = spec.k_squared();
    let dir = if t_end >= t_init { 1.0 } else { -1.0 };

    let mut stops: Vec<f64> = opts
        .record
        .iter()
        .copied()
        .filter(|&t| (t - t_init) * dir > 0.0 && (t_end - t) * dir > 0.0)
        .collect();
    stops.sort_by(|a, b| a.total_cmp(b));
    if dir < 0.0 {
        stops.reverse();
    }
    stops.push(t_end);

    let mut u = u_init.values.clone();
    let mut t = t_init;
    let mut times = vec![t];
    let mut norms = vec![u_init.norm()];
    let mut snapshots = Vec::new();
    if opts.record.iter().any(|&s| s == t_init) {
        snapshots.push((t, u_init.clone()));
    }
    let mut q_t = source.at(t, d)?;

    for &stop in &stops {
        while (stop - t) * dir > 0.0 {
            let mut h = opts.dt;
            if let Some(tf) = opts.t_flat {
                let tau = (t - tf).abs();
                let toward = (tf - t) * dir > 0.0;
                let lim = if toward { opts.refine * tau / (1.0 + opts.refine) } else { opts.refine * tau };
                h = h.min(lim.max(1e-7));
            }
            let h = h.min((stop - t) * dir) * dir;
            let last = ((stop - t) - h).abs() <= 1e-14 * (1.0 + stop.abs());
            let t_next = if last { stop } else { t + h };
            let hh = t_next - t;

            let q_a = source.at(t + 0.25 * hh, d)?;
            let q_m = source.at(t + 0.5 * hh, d)?;
            let q_b = source.at(t + 0.75 * hh, d)?;
            let q_e = source.at(t_next, d)?;
            let first = (&q_t + &q_a * 4.0 + &q_m) * (0.5 * hh / 6.0);
            let second = (&q_m + &q_b * 4.0 + &q_e) * (0.5 * hh / 6.0);

            potential_phase(&mut u, spec, &first);
            plan.forward(&mut u);
            u.par_iter_mut().zip(&k2).for_each(|(c, k)| {
                *c *= Complex64::from_polar(1.0, -0.5 * hh * k);
            });
            plan.inverse(&mut u);
            potential_phase(&mut u, spec, &second);

            t = t_next;
            q_t = q_e;
            let g = ProfileGrid { spec, values: u };
            times.push(t);
            norms.push(g.norm());
            u = g.values;
        }
        let g = ProfileGrid { spec, values: u.clone() };
        let frac = g.boundary_mass_fraction();
        if frac > opts.overflow {
            return Err(Error::GridOverflow(frac));
        }
        if stop != t_end || opts.record.iter().any(|&s| s == t_end) {
            snapshots.push((t, g));
        }
    }
    Ok(ProfileSolution { times, norms, snapshots, last: ProfileGrid { spec, values: u } })
}

/// `u ← e^{-(i/2) (∫Q) y·y} u`.
fn potential_phase(u: &mut [Complex64], spec: GridSpec, iq: &DMatrix<f64>) {
    u.par_iter_mut().enumerate().for_each(|(i, c)| {
        let mut y = [0.0; 3];
        spec.point(i, &mut y);
        *c *= Complex64::from_polar(1.0, -0.5 * quad_form(iq, &y[..spec.d]));
    });
}

/// Sign `σ` of the singular part of `Hess λ`: `+1` for plus, `-1` for minus.
fn singular_sign(mode: ModeSign) -> f64 {
    mode.sign()
}

/// Multiply by `e^{i c G y·y / 2}`, reducing the exponent modulo 2π first.
fn apply_g_phase(u: &ProfileGrid, g: &DMatrix<f64>, c: f64) -> ProfileGrid {
    let mut out = u.clone();
    out.map_pointwise(|y, v| {
        let ph = (0.5 * c * quad_form(g, y)).rem_euclid(std::f64::consts::TAU);
        v * Complex64::from_polar(1.0, ph)
    });
    out
}

/// `u_lim ≈ e^{±sgn(t-t♭)(i/2) G_α(t) y·y} u(t)`, upper sign for plus. Before
/// the crossing this is the ingoing limit profile, after it the outgoing one.
pub fn extract_ingoing_profile(
    u_at: &ProfileGrid,
    event: &CrossingEvent,
    mode: ModeSign,
    t: f64,
) -> Result<ProfileGrid> {
    let g = phase_matrix_g(event, t)?;
    let sgn = (t - event.t_flat).signum();
    Ok(apply_g_phase(u_at, &g, singular_sign(mode) * sgn))
}

/// Inverse of [`extract_ingoing_profile`] at the same time: the initial value
/// of the outgoing profile equation, `e^{∓sgn(t-t♭)(i/2) G_α(t) y·y} u_out`.
pub fn seed_outgoing_profile(
    u_out: &ProfileGrid,
    event: &CrossingEvent,
    mode: ModeSign,
    t_start: f64,
) -> Result<ProfileGrid> {
    let g = phase_matrix_g(event, t_start)?;
    let sgn = (t_start - event.t_flat).signum();
    Ok(apply_g_phase(u_out, &g, -singular_sign(mode) * sgn))
}

/// `Σᵏ` norm for `k ≤ 2`: the sum of `‖y^a ∂^b u‖` over `|a| + |b| ≤ k`, with
/// spectral derivatives.
pub fn sigma_norm(u: &ProfileGrid, k: usize) -> Result<f64> {
    if k > 2 {
        return Err(Error::Domain(format!("Σ^{k} norms are limited to k <= 2")));
    }
    let spec = u.spec;
    let d = spec.d;
    let mut total = u.norm();
    if k == 0 {
        return Ok(total);
    }
    let plan = FftPlan::new(spec);
    let kv = spec.wavenumbers();
    let deriv = |v: &[Complex64], axis: usize| -> Vec<Complex64> {
        let mut w = v.to_vec();
        plan.forward(&mut w);
        w.par_iter_mut().enumerate().for_each(|(i, c)| {
            let mut ix = [0usize; 3];
            spec.unravel(i, &mut ix[..d]);
            *c *= Complex64::new(0.0, kv[ix[axis]]);
        });
        plan.inverse(&mut w);
        w
    };
    let times_y = |v: &[Complex64], axis: usize| -> Vec<Complex64> {
        v.par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut y = [0.0; 3];
                spec.point(i, &mut y);
                c * y[axis]
            })
            .collect()
    };
    let nrm = |v: &[Complex64]| (v.iter().map(|c| c.norm_sqr()).sum::<f64>() * spec.cell()).sqrt();

    let du: Vec<Vec<Complex64>> = (0..d).map(|a| deriv(&u.values, a)).collect();
    let yu: Vec<Vec<Complex64>> = (0..d).map(|a| times_y(&u.values, a)).collect();
    for a in 0..d {
        total += nrm(&du[a]) + nrm(&yu[a]);
    }
    if k == 2 {
        for a in 0..d {
            for b in a..d {
                total += nrm(&deriv(&du[a], b)) + nrm(&times_y(&yu[a], b));
            }
            for b in 0..d {
                total += nrm(&times_y(&du[b], a));
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{integrate_flow, FlowMode};
    use crate::crossing::CrossingEvent;
    use crate::potential::LinearCone;
    use crate::PhasePoint;

    fn spec1() -> GridSpec {
        GridSpec::new(1, 256, 12.0).unwrap()
    }

    #[test]
    fn free_gaussian_spreads() {
        let u0 = ProfileGrid::gaussian(spec1());
        let sol = solve_profile(&HessianSource::Zero, &u0, 0.0, 1.0, &SolveOptions::new(0.01)).unwrap();
        assert!(sol.norm_drift() < 1e-10);
        // |u(t,y)|² = e^{-y²/(1+t²)} / √(π(1+t²))
        let t: f64 = 1.0;
        for (j, c) in sol.last.values.iter().enumerate() {
            let y = sol.last.spec.coord(j);
            let expect = (-(y * y) / (1.0 + t * t)).exp() / (std::f64::consts::PI * (1.0 + t * t)).sqrt();
            assert!((c.norm_sqr() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let spec = GridSpec::new(2, 64, 8.0).unwrap();
        let u0 = ProfileGrid::gaussian(spec);
        let src = HessianSource::Frozen(DMatrix::identity(2, 2));
        let sol = solve_profile(&src, &u0, 0.0, 1.0, &SolveOptions::new(0.01)).unwrap();
        let ph = Complex64::from_polar(1.0, -1.0);
        let mut expect = u0.clone();
        expect.values.iter_mut().for_each(|c| *c *= ph);
        assert!(sol.last.distance(&expect) < 1e-4);
        // Strang with a constant Q keeps the ground state up to O(dt²)
        let fine = solve_profile(&src, &u0, 0.0, 1.0, &SolveOptions::new(0.005)).unwrap();
        assert!(fine.last.distance(&expect) < 0.3 * sol.last.distance(&expect));
    }

    #[test]
    fn overflow_is_reported() {
        let spec = GridSpec::new(1, 64, 4.0).unwrap();
        let u0 = ProfileGrid::gaussian_at(spec, &[0.0], 1.0, &[3.0]);
        let r = solve_profile(&HessianSource::Zero, &u0, 0.0, 2.0, &SolveOptions::new(0.01));
        assert!(matches!(r, Err(Error::GridOverflow(_))));
    }

    #[test]
    fn bin_round_trip() {
        let spec = GridSpec::new(2, 8, 2.0).unwrap();
        let u = ProfileGrid::gaussian_at(spec, &[0.1, -0.2], 0.7, &[1.0, 0.5]);
        let mut buf = Vec::new();
        u.write_bin_to(&mut buf).unwrap();
        let v = ProfileGrid::read_bin_from(&mut buf.as_slice()).unwrap();
        assert_eq!(u, v);
    }

    fn event(alpha: f64) -> CrossingEvent {
        let pot = LinearCone::isotropic(2);
        let z = PhasePoint::new(vec![0.0, alpha], vec![2.0, 0.0]);
        CrossingEvent::from_phase_point(&pot, 0.0, z, 0.0).unwrap()
    }

    #[test]
    fn g_is_a_primitive_of_g_alpha() {
        for alpha in [0.0, 0.05] {
            let ev = event(alpha);
            for t in [-0.3f64, 0.3, 0.01, -0.7] {
                let h = 1e-4 * t.abs();
                let f = |s: f64| phase_matrix_g(&ev, s).unwrap() * s.signum();
                let fd = (f(t + h) - f(t - h)) / (2.0 * h);
                let g = g_alpha(&ev, t).unwrap();
                assert!((fd - g).abs().max() < 1e-6, "α = {alpha}, t = {t}");
            }
        }
        assert!(matches!(phase_matrix_g(&event(0.0), 0.0), Err(Error::Singular)));
    }

    #[test]
    fn g_at_alpha_zero_closed_form() {
        let ev = event(0.0);
        let t: f64 = 0.4;
        let g = phase_matrix_g(&ev, t).unwrap();
        let expect = ev.gamma0() * (t.ln() + (2.0 * ev.r).ln()) + ev.gamma1();
        assert!((g - expect).abs().max() < 1e-14);
    }

    #[test]
    fn hessian_expansion_against_fd() {
        let pot = LinearCone::shifted(2, 0.01);
        let z0 = PhasePoint::new(vec![-1.0, 0.0], vec![2.0, 0.0]);
        let tr = integrate_flow(&pot, FlowMode::Minus, false, &z0, 0.0, 1.0, 1e-3, None).unwrap();
        let ev = crate::classical::detect_crossing_event(&pot, &tr).unwrap();
        let t = ev.t_flat + 0.2;
        let hx = hessian_expansion(&pot, &ev, &tr, t).unwrap();
        let q = tr.sample(t).q;
        let lam = |x: &[f64]| crate::potential::lambda(&pot, x, ModeSign::Minus).unwrap();
        let hstep = 1e-4;
        let mut fd = DMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut x = q.as_slice().to_vec();
                let f = |x: &mut Vec<f64>, di: f64, dj: f64| {
                    x[i] += di;
                    x[j] += dj;
                    let v = lam(x);
                    x[i] -= di;
                    x[j] -= dj;
                    v
                };
                fd[(i, j)] = (f(&mut x, hstep, hstep) - f(&mut x, hstep, -hstep)
                    - f(&mut x, -hstep, hstep)
                    + f(&mut x, -hstep, -hstep))
                    / (4.0 * hstep * hstep);
            }
        }
        let recon = &hx.m - &hx.gamma_alpha * hx.g_scalar;
        assert!((fd - recon).abs().max() < 5e-3);
        // the leading part only carries the α cross terms here
        assert!((&hx.m_leading - &hx.m).abs().max() < 0.5);
    }

    #[test]
    fn extract_seed_round_trip() {
        let spec = GridSpec::new(2, 32, 6.0).unwrap();
        let u = ProfileGrid::gaussian_at(spec, &[0.3, 0.0], 1.0, &[0.0, 0.4]);
        let ev = event(0.02);
        for mode in [ModeSign::Minus, ModeSign::Plus] {
            let t = ev.t_flat + 0.05;
            let s = seed_outgoing_profile(&u, &ev, mode, t).unwrap();
            let back = extract_ingoing_profile(&s, &ev, mode, t).unwrap();
            assert!(back.distance(&u) < 1e-12);
        }
    }

    #[test]
    fn sigma_norms_of_gaussian() {
        let u = ProfileGrid::gaussian(spec1());
        // ‖y u‖ = ‖∂u‖ = 1/√2 for the normalized Gaussian
        let s1 = sigma_norm(&u, 1).unwrap();
        assert!((s1 - (1.0 + 2f64.sqrt())).abs() < 1e-10);
        assert!(sigma_norm(&u, 2).unwrap() > s1);
        assert!(sigma_norm(&u, 3).is_err());
    }
}
