//! Classical mode flows, actions, eigenvector transport and the crossing
//! event along a trajectory.

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::crossing::CrossingEvent;
use crate::error::{Error, Result};
use crate::potential::{
    coupling_from_parts, crossing_threshold, grad_lambda, hamiltonian, ModeSign, PauliPotential,
};

/// A point `z = (q, p)` of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have the same dimension");
        Self {
            q: DVector::from_vec(q),
            p: DVector::from_vec(p),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|a| a.is_finite())
    }
}

/// Which scalar Hamiltonian drives a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    Minus,
    Plus,
    /// `|p|²/2 + v`, the flow both modes are expanded around.
    Averaged,
}

impl FlowMode {
    pub fn mode_sign(self) -> Option<ModeSign> {
        match self {
            FlowMode::Minus => Some(ModeSign::Minus),
            FlowMode::Plus => Some(ModeSign::Plus),
            FlowMode::Averaged => None,
        }
    }
}

impl From<ModeSign> for FlowMode {
    fn from(m: ModeSign) -> Self {
        match m {
            ModeSign::Minus => FlowMode::Minus,
            ModeSign::Plus => FlowMode::Plus,
        }
    }
}

/// Time-sampled solution of a mode flow.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mode: FlowMode,
    pub drifted: bool,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    /// `S(t) = ∫ (|p|² - h) ds` from the first sample.
    pub action: Vec<f64>,
    pub eigvec: Option<Vec<Vector2<f64>>>,
    /// Value of the scalar Hamiltonian at the first sample.
    pub energy: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn last_action(&self) -> f64 {
        *self.action.last().expect("trajectory has at least one sample")
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Largest deviation of the scalar Hamiltonian from its initial value.
    pub fn energy_drift(&self, pot: &dyn PauliPotential) -> f64 {
        self.states
            .iter()
            .map(|z| (hamiltonian(pot, z, self.mode.mode_sign()) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    fn bracket(&self, t: f64) -> usize {
        let n = self.times.len();
        let forward = self.times[n - 1] >= self.times[0];
        // index i with t between times[i] and times[i+1]
        let pos = if forward {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        pos.clamp(1, n - 1) - 1
    }

    /// State at an arbitrary time inside the span. Positions use cubic Hermite
    /// interpolation with `q̇ = p`; momenta use a four-point Lagrange cubic.
    pub fn sample(&self, t: f64) -> PhasePoint {
        let n = self.times.len();
        if n == 1 {
            return self.states[0].clone();
        }
        let i = self.bracket(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (z0, z1) = (&self.states[i], &self.states[i + 1]);
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let q = &z0.q * h00 + &z0.p * (h10 * h) + &z1.q * h01 + &z1.p * (h11 * h);

        let p = if n >= 4 {
            let j = i.saturating_sub(1).min(n - 4);
            let idx = [j, j + 1, j + 2, j + 3];
            let mut acc = DVector::zeros(z0.p.len());
            for &a in &idx {
                let mut l = 1.0;
                for &b in &idx {
                    if a != b {
                        l *= (t - self.times[b]) / (self.times[a] - self.times[b]);
                    }
                }
                acc += &self.states[a].p * l;
            }
            acc
        } else {
            &z0.p * (1.0 - s) + &z1.p * s
        };
        PhasePoint { q, p }
    }

    /// Action at an arbitrary time, cubic Hermite with `Ṡ = |p|² - h`.
    pub fn sample_action(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 1 {
            return self.action[0];
        }
        let i = self.bracket(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let f0 = self.states[i].p.norm_squared() - self.energy;
        let f1 = self.states[i + 1].p.norm_squared() - self.energy;
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        self.action[i] * h00 + f0 * h10 * h + self.action[i + 1] * h01 + f1 * h11 * h
    }
}

fn force(pot: &dyn PauliPotential, mode: FlowMode, q: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    match mode.mode_sign() {
        None => Ok(-pot.grad_v(q.as_slice())),
        Some(m) => grad_lambda(pot, q.as_slice(), m).map(|g| -g).map_err(|e| match e {
            Error::CrossingPoint { gap, .. } => Error::GapCollapse { t, gap },
            other => other,
        }),
    }
}

/// Cumulative Simpson-type quadrature on a uniform grid: even nodes carry the
/// composite Simpson value, odd nodes add the three-point partial rule.
pub(crate) fn cumulative_simpson(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (f[0] + f[1]);
        return out;
    }
    let mut i = 0;
    while i + 2 < n {
        out[i + 1] = out[i] + h / 12.0 * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2]);
        out[i + 2] = out[i] + h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        out[i + 1] = out[i] + h / 12.0 * (-f[i - 1] + 8.0 * f[i] + 5.0 * f[i + 1]);
    }
    out
}

/// Integrate `q̇ = p, ṗ = -∇λ(q)` with position Störmer–Verlet (drift, kick,
/// drift) from `t_init` to `t_end`; backward integration is allowed.
///
/// The step is shrunk so that `t_end` is hit exactly. Forces are only
/// evaluated at half steps, so a flow may start on the crossing set itself.
pub fn integrate_flow(
    pot: &dyn PauliPotential,
    mode: FlowMode,
    drifted: bool,
    z_init: &PhasePoint,
    t_init: f64,
    t_end: f64,
    step: f64,
    initial_eigvec: Option<Vector2<f64>>,
) -> Result<Trajectory> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Step(step));
    }
    if !z_init.is_finite() || z_init.dim() != pot.dim() {
        return Err(Error::Shape(format!(
            "initial point of dimension {} for a {}-dimensional potential",
            z_init.dim(),
            pot.dim()
        )));
    }
    let span = t_end - t_init;
    let n = ((span.abs() / step).ceil() as usize).max(if span == 0.0 { 0 } else { 1 });
    let dt = if n == 0 { 0.0 } else { span / n as f64 };

    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t_init);
    states.push(z_init.clone());

    let mut z = z_init.clone();
    for k in 0..n {
        let t = t_init + k as f64 * dt;
        let q_half = &z.q + &z.p * (0.5 * dt);
        let f = force(pot, mode, &q_half, t + 0.5 * dt)?;
        let p_new = &z.p + f * dt;
        let q_new = q_half + &p_new * (0.5 * dt);
        z = PhasePoint { q: q_new, p: p_new };
        if !z.is_finite() {
            return Err(Error::Evaluation { x: z.q.as_slice().to_vec() });
        }
        times.push(if k + 1 == n { t_end } else { t_init + (k + 1) as f64 * dt });
        states.push(z.clone());
    }

    let energy = hamiltonian(pot, z_init, mode.mode_sign());
    let integrand: Vec<f64> = states.iter().map(|s| s.p.norm_squared() - energy).collect();
    let action = cumulative_simpson(&integrand, dt);

    let eigvec = match (initial_eigvec, mode.mode_sign()) {
        (Some(y0), Some(m)) => Some(transport_eigvec(pot, m, &times, &states, y0)?),
        _ => None,
    };

    Ok(Trajectory {
        mode,
        drifted,
        times,
        states,
        action,
        eigvec,
        energy,
    })
}

/// RK4 for `Ẏ = B(q, p) Y` on the trajectory grid, with `(q, p)` linearly
/// interpolated at half steps.
fn transport_eigvec(
    pot: &dyn PauliPotential,
    mode: ModeSign,
    times: &[f64],
    states: &[PhasePoint],
    y0: Vector2<f64>,
) -> Result<Vec<Vector2<f64>>> {
    let gen = |z: &PhasePoint, t: f64| -> Result<nalgebra::Matrix2<f64>> {
        let x = z.q.as_slice();
        let w = pot.w(x);
        let gap = w[0].hypot(w[1]);
        if gap <= crossing_threshold(x) {
            return Err(Error::GapCollapse { t, gap });
        }
        Ok(coupling_from_parts(w, gap, &pot.dw(x), z.p.as_slice(), mode))
    };
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0;
    out.push(y);
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        let mid = PhasePoint {
            q: (&states[k].q + &states[k + 1].q) * 0.5,
            p: (&states[k].p + &states[k + 1].p) * 0.5,
        };
        let tm = times[k] + 0.5 * h;
        let b0 = gen(&states[k], times[k])?;
        let bm = gen(&mid, tm)?;
        let b1 = gen(&states[k + 1], times[k + 1])?;
        let k1 = b0 * y;
        let k2 = bm * (y + k1 * (0.5 * h));
        let k3 = bm * (y + k2 * (0.5 * h));
        let k4 = b1 * (y + k3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(y);
    }
    Ok(out)
}

/// Advance a single state over `[t0, t1]` with `nsub` Verlet steps; returns
/// the end state and the action increment.
fn advance(
    pot: &dyn PauliPotential,
    mode: FlowMode,
    z: &PhasePoint,
    t0: f64,
    t1: f64,
    nsub: usize,
) -> Result<(PhasePoint, f64)> {
    if t1 == t0 {
        return Ok((z.clone(), 0.0));
    }
    let tr = integrate_flow(pot, mode, false, z, t0, t1, (t1 - t0).abs() / nsub as f64, None)?;
    // action relative to the flow energy of the parent trajectory is the same
    // because energy is conserved up to integrator error
    Ok((tr.last().clone(), tr.last_action()))
}

/// Locate the passage through the gap minimum along a trajectory.
///
/// The minimum of `J(t) = |w(q(t))|` is bracketed on the samples, refined by
/// a parabola through the three smallest values of `J²` (smooth even when the
/// gap closes), then polished by secant steps on `J J' = w·dw p`.
pub fn detect_crossing_event(pot: &dyn PauliPotential, traj: &Trajectory) -> Result<CrossingEvent> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::NoMinimum);
    }
    let j2: Vec<f64> = traj
        .states
        .iter()
        .map(|z| {
            let w = pot.w(z.q.as_slice());
            w[0] * w[0] + w[1] * w[1]
        })
        .collect();
    let (imin, _) = j2
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if imin == 0 || imin == n - 1 {
        return Err(Error::NoMinimum);
    }

    let (ta, tb, tc) = (traj.times[imin - 1], traj.times[imin], traj.times[imin + 1]);
    let (fa, fb, fc) = (j2[imin - 1], j2[imin], j2[imin + 1]);
    let denom = (tb - ta) * (fb - fc) - (tb - tc) * (fb - fa);
    let mut t_est = if denom.abs() > 0.0 {
        tb - 0.5 * ((tb - ta).powi(2) * (fb - fc) - (tb - tc).powi(2) * (fb - fa)) / denom
    } else {
        tb
    };
    let (lo, hi) = if ta < tc { (ta, tc) } else { (tc, ta) };
    t_est = t_est.clamp(lo, hi);

    // secant polish on σ(t) = w·dw p, integrating from the last sample before
    // the estimate so the sub-flow never crosses the gradient kink at α = 0
    let forward = traj.times[n - 1] > traj.times[0];
    let before = |t: f64| if forward { t < t_est } else { t > t_est };
    let base = (0..n).rev().find(|&i| before(traj.times[i])).unwrap_or(imin - 1);
    let tbase = traj.times[base];
    let zbase = &traj.states[base];
    let dt = (tc - ta).abs() * 0.5;
    let nsub = 16;
    let eval = |t: f64| -> Result<(PhasePoint, f64, f64)> {
        let sub = ((t - tbase).abs() / dt * nsub as f64).ceil().max(1.0) as usize;
        let (z, ds) = advance(pot, traj.mode, zbase, tbase, t, sub)?;
        let s = crate::potential::sigma_residual(pot, &z);
        Ok((z, ds, s))
    };
    let mut t0 = t_est;
    let mut t1 = t_est + 1e-3 * dt;
    let (_, _, mut s0) = eval(t0)?;
    let (mut z1, mut ds1, mut s1) = eval(t1)?;
    for _ in 0..30 {
        if s1 == s0 || s1 == 0.0 {
            break;
        }
        let t2 = t1 - s1 * (t1 - t0) / (s1 - s0);
        if !t2.is_finite() {
            break;
        }
        let t2 = t2.clamp(lo, hi);
        t0 = t1;
        s0 = s1;
        t1 = t2;
        let r = eval(t1)?;
        z1 = r.0;
        ds1 = r.1;
        s1 = r.2;
        if (t1 - t0).abs() < 1e-14 * (1.0 + t1.abs()) {
            break;
        }
    }
    let s_flat = traj.action[base] + ds1;
    CrossingEvent::from_phase_point(pot, t1, z1, s_flat)
}

/// Momentum kick `δ = ∓(2α/r) dwᵀ(q♭) e_θ` given to the mode generated at the
/// crossing; the minus sign applies to a minus-mode start.
pub fn compute_drift(event: &CrossingEvent, from_mode: ModeSign) -> DVector<f64> {
    let u = event.dw.transpose() * DVector::from_column_slice(event.e_theta.as_slice());
    u * (from_mode.sign() * 2.0 * event.alpha / event.r)
}

/// Closed-form expansion of a flow around the crossing, used as an oracle.
#[derive(Debug, Clone)]
pub struct TaylorPrediction {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    /// Action accumulated from `t♭`, offset by the event's `s_flat`.
    pub action: f64,
}

/// `Argsh(rτ/α)`, or 0 at `α = 0`: every product it enters carries a power
/// of `α` that kills the logarithmic growth in the limit.
fn argsh_term(event: &CrossingEvent, tau: f64) -> f64 {
    if event.alpha == 0.0 {
        0.0
    } else {
        (event.r * tau / event.alpha).asinh()
    }
}

/// Expansions of the mode flows around `t♭` relative to the averaged flow.
///
/// `drifted` selects the kicked flow of the mode created at the crossing
/// (`mode` is then the new mode and the kick comes from the other one).
pub fn taylor_reference(
    event: &CrossingEvent,
    pot: &dyn PauliPotential,
    mode: FlowMode,
    drifted: bool,
    t: f64,
) -> TaylorPrediction {
    let tau = t - event.t_flat;
    let qf = &event.z_flat.q;
    let pf = &event.z_flat.p;
    let x = qf.as_slice();
    let gv = pot.grad_v(x);
    let v = pot.v(x);
    let (r, a, a_s) = (event.r, event.alpha, event.alpha_signed());

    let p0 = pf - &gv * tau;
    let q0 = qf + pf * tau - &gv * (0.5 * tau * tau);
    let s0 = (0.5 * pf.norm_squared() - v) * tau - pf.dot(&gv) * tau * tau;

    let Some(m) = mode.mode_sign() else {
        return TaylorPrediction {
            q: q0,
            p: p0,
            action: event.s_flat + s0,
        };
    };
    let sg = m.sign();
    let rho = (a * a + r * r * tau * tau).sqrt();
    let ash = argsh_term(event, tau);
    let u = event.dw.transpose() * DVector::from_column_slice(event.e_theta.as_slice());
    let up = event.dw.transpose() * DVector::from_column_slice(event.e_theta_perp.as_slice());

    let p = &p0 - &u * (sg * (rho - a) / r) - &up * (sg * a_s / r * ash);
    let q = &q0 - &u * (sg * tau * rho / (2.0 * r)) - &u * (sg * a * a / (2.0 * r * r) * ash)
        + &u * (sg * a / r * tau)
        - &up * (sg * (a_s * tau / r * ash - a_s / (r * r) * rho))
        - &up * (sg * a * a_s / (r * r));
    let s = s0 + sg * a * tau - sg * tau * rho - sg * a * a / r * ash;

    if drifted {
        let delta = compute_drift(event, m.other());
        TaylorPrediction {
            q: q + &delta * tau,
            action: s + delta.dot(pf) * tau,
            p: p + delta,
        }
    } else {
        TaylorPrediction {
            q,
            p,
            action: event.s_flat + s,
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|a| a.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|a| a.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{ClosurePotential, LinearCone};

    #[test]
    fn constant_gap_straight_line() {
        let pot = ClosurePotential::new(2, |_| 0.0, |_| [10.0, 0.0])
            .with_dw(|_| nalgebra::DMatrix::zeros(2, 2))
            .with_grad_v(|_| DVector::zeros(2));
        let z = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let tr = integrate_flow(&pot, FlowMode::Minus, false, &z, 0.0, 1.0, 0.01, None).unwrap();
        let end = tr.last();
        assert!((end.q[0] - 1.0).abs() < 1e-13 && end.q[1].abs() < 1e-15);
        assert!((tr.last_action() - (0.5 + 10.0)).abs() < 1e-12);
    }

    #[test]
    fn averaged_free_flow() {
        let pot = LinearCone::isotropic(2);
        let z = PhasePoint::new(vec![0.0, 0.0], vec![2.0, 0.0]);
        let tr = integrate_flow(&pot, FlowMode::Averaged, false, &z, 0.0, 1.0, 0.01, None).unwrap();
        assert!((tr.last().q[0] - 2.0).abs() < 1e-13);
        assert!((tr.last_action() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_exactness() {
        let h = 0.1;
        let cub: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3)).collect();
        let quad: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(2)).collect();
        let sc = cumulative_simpson(&cub, h);
        let sq = cumulative_simpson(&quad, h);
        for i in 0..11 {
            let t = i as f64 * h;
            assert!((sq[i] - t.powi(3) / 3.0).abs() < 1e-14, "node {i}");
            if i % 2 == 0 {
                assert!((sc[i] - t.powi(4) / 4.0).abs() < 1e-14, "node {i}");
            }
        }
    }

    #[test]
    fn drift_examples() {
        let pot = LinearCone::isotropic(2);
        let z = PhasePoint::new(vec![0.0, 0.05], vec![2.0, 0.0]);
        let ev = CrossingEvent::from_phase_point(&pot, 0.0, z, 0.0).unwrap();
        let dm = compute_drift(&ev, ModeSign::Minus);
        assert!((dm[0] + 0.05).abs() < 1e-15 && dm[1].abs() < 1e-15);
        assert!((ev.z_flat.p.dot(&dm) + 0.1).abs() < 1e-15);
        let dp = compute_drift(&ev, ModeSign::Plus);
        assert!((dp[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn taylor_is_exact_at_crossing() {
        let pot = LinearCone::quadratic(2, 0.3, 0.0);
        let z = PhasePoint::new(vec![0.0, 0.02], vec![1.5, 0.0]);
        let ev = CrossingEvent::from_phase_point(&pot, 1.0, z.clone(), 0.7).unwrap();
        for mode in [FlowMode::Minus, FlowMode::Plus, FlowMode::Averaged] {
            let pr = taylor_reference(&ev, &pot, mode, false, 1.0);
            assert!((pr.q - &z.q).amax() < 1e-15);
            assert!((pr.p - &z.p).amax() < 1e-15);
            assert!((pr.action - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn crossing_on_shifted_line() {
        // averaged flow q(t) = (t - 1, 0) passes closest to the shifted cone at t = 1
        let pot = LinearCone::shifted(2, 0.05);
        let z = PhasePoint::new(vec![-1.0, 0.0], vec![1.0, 0.0]);
        let tr = integrate_flow(&pot, FlowMode::Averaged, false, &z, 0.0, 2.0, 0.01, None).unwrap();
        let ev = detect_crossing_event(&pot, &tr).unwrap();
        assert!((ev.t_flat - 1.0).abs() < 1e-12);
        assert!(ev.z_flat.q.amax() < 1e-12);
        assert!((ev.alpha - 0.05).abs() < 1e-12);
        assert!((ev.r - 1.0).abs() < 1e-12);
        assert!((ev.e_theta - Vector2::new(1.0, 0.0)).norm() < 1e-12);

        let pot0 = LinearCone::shifted(2, 0.0);
        let tr0 = integrate_flow(&pot0, FlowMode::Averaged, false, &z, 0.0, 2.0, 0.01, None).unwrap();
        let ev0 = detect_crossing_event(&pot0, &tr0).unwrap();
        assert!(ev0.alpha < 1e-12);
    }

    #[test]
    fn monotone_gap_has_no_minimum() {
        let pot = LinearCone::isotropic(2);
        let z = PhasePoint::new(vec![1.0, 0.0], vec![1.0, 0.0]);
        let tr = integrate_flow(&pot, FlowMode::Averaged, false, &z, 0.0, 1.0, 0.01, None).unwrap();
        assert!(matches!(detect_crossing_event(&pot, &tr), Err(Error::NoMinimum)));
    }

    #[test]
    fn bad_step_rejected() {
        let pot = LinearCone::isotropic(2);
        let z = PhasePoint::new(vec![1.0, 0.0], vec![1.0, 0.0]);
        assert!(matches!(
            integrate_flow(&pot, FlowMode::Plus, false, &z, 0.0, 1.0, 0.0, None),
            Err(Error::Step(_))
        ));
    }
}
