//! End-to-end passage of a packet through the crossing: the ingoing limit
//! profile, the pointwise Landau–Zener transfer and the two outgoing packets.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::{DVector, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{compute_drift, detect_crossing_event, integrate_flow, PhasePoint, Trajectory};
use crate::crossing::CrossingEvent;
use crate::error::{Error, Result};
use crate::landau_zener::{coeff_a, coeff_b, phase_lambda_tilde, phase_phi, LZParameters};
use crate::potential::{crossing_threshold, eigenvector, sigma_residual, ModeSign, PauliPotential};
use crate::profile::{
    extract_ingoing_profile, quad_form, seed_outgoing_profile, solve_profile, HessianSource, ProfileGrid,
    SolveOptions,
};

/// Default exponent of the window `δ = ε^{5/14}`.
pub const DELTA_EXPONENT: f64 = 5.0 / 14.0;
/// Default cutoff exponent, `R = ε^{-β}`.
pub const DEFAULT_BETA: f64 = 1.0 / 60.0;

fn fold(ph: f64) -> f64 {
    ph.rem_euclid(TAU)
}

fn unimodular(ph: f64) -> Complex64 {
    Complex64::from_polar(1.0, fold(ph))
}

/// Window, cutoff radius and expansion order used for one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    /// `R = ε^{-β}`.
    pub radius: f64,
    /// `N₀ = ⌈1/(14β)⌉`.
    pub n0: u32,
}

impl Schedule {
    pub fn auto(eps: f64) -> Self {
        Self::new(eps, eps.powf(DELTA_EXPONENT), DEFAULT_BETA)
    }

    pub fn new(eps: f64, delta: f64, beta: f64) -> Self {
        Self {
            eps,
            delta,
            beta,
            radius: eps.powf(-beta),
            n0: (1.0 / (14.0 * beta)).ceil() as u32,
        }
    }

    /// `ε^{1/14-β}(1 + |ln ε|)`.
    pub fn error_budget(&self) -> f64 {
        self.eps.powf(1.0 / 14.0 - self.beta) * (1.0 + self.eps.ln().abs())
    }

    /// `(√ε/δ + ε^{3/2}/δ⁴ + δ³/ε)(1 + |ln δ|)`, the size of the ingoing
    /// remainder.
    pub fn ingoing_remainder(&self) -> f64 {
        let (e, d) = (self.eps, self.delta);
        (e.sqrt() / d + e.powf(1.5) / d.powi(4) + d.powi(3) / e) * (1.0 + d.ln().abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeStatus {
    Pass,
    Warn,
    Fail,
}

/// One inequality of the asymptotic regime with its measured ratio.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeCheck {
    pub name: &'static str,
    pub value: f64,
    pub warn: f64,
    /// `None` for checks that only ever warn.
    pub fail: Option<f64>,
}

impl RegimeCheck {
    pub fn status(&self) -> RegimeStatus {
        match self.fail {
            Some(f) if self.value >= f => RegimeStatus::Fail,
            _ if self.value > self.warn => RegimeStatus::Warn,
            _ => RegimeStatus::Pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub checks: Vec<RegimeCheck>,
}

impl RegimeReport {
    /// Ratios `√ε/δ`, `δ³/ε`, `ε^{3/2}/δ⁴` (warn above 0.5, fail at 1) and
    /// `α/√ε` (warn above 3).
    pub fn evaluate(eps: f64, delta: f64, alpha: f64) -> Self {
        let soft = |name, value| RegimeCheck { name, value, warn: 0.5, fail: Some(1.0) };
        Self {
            checks: vec![
                soft("sqrt(eps)/delta", eps.sqrt() / delta),
                soft("delta^3/eps", delta.powi(3) / eps),
                soft("eps^1.5/delta^4", eps.powf(1.5) / delta.powi(4)),
                RegimeCheck { name: "alpha/sqrt(eps)", value: alpha.abs() / eps.sqrt(), warn: 3.0, fail: None },
            ],
        }
    }

    pub fn failure(&self) -> Option<&RegimeCheck> {
        self.checks.iter().find(|c| c.status() == RegimeStatus::Fail)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &RegimeCheck> {
        self.checks.iter().filter(|c| c.status() == RegimeStatus::Warn)
    }

    pub fn check(self) -> Result<Self> {
        if let Some(c) = self.failure() {
            return Err(Error::Regime { name: c.name, value: c.value, limit: c.fail.unwrap_or(f64::INFINITY) });
        }
        Ok(self)
    }
}

/// `ψ = e^{iS/ε} ε^{-d/4} e^{ip·(x-q)/ε} u((x-q)/√ε) Y` at time `t`.
#[derive(Debug, Clone)]
pub struct WavePacket {
    pub eps: f64,
    pub t: f64,
    pub center: PhasePoint,
    pub action: f64,
    pub direction: Vector2<f64>,
    pub mode: Option<ModeSign>,
    pub profile: ProfileGrid,
}

impl WavePacket {
    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// `L²` mass, equal to the profile's.
    pub fn mass(&self) -> f64 {
        self.profile.norm_sqr()
    }

    /// Scalar part of the packet at `x`.
    pub fn scalar_at(&self, x: &[f64]) -> Complex64 {
        let d = x.len();
        let se = self.eps.sqrt();
        let mut y = [0.0; 3];
        let mut lin = 0.0;
        for a in 0..d {
            let dx = x[a] - self.center.q[a];
            y[a] = dx / se;
            lin += self.center.p[a] * dx;
        }
        let u = self.profile.value_at(&y[..d]);
        if u == Complex64::new(0.0, 0.0) {
            return u;
        }
        u * Complex64::from_polar(self.eps.powf(-(d as f64) / 4.0), fold((self.action + lin) / self.eps))
    }

    pub fn value_at(&self, x: &[f64]) -> [Complex64; 2] {
        let s = self.scalar_at(x);
        [s * self.direction[0], s * self.direction[1]]
    }

    pub fn summary(&self) -> PacketSummary {
        PacketSummary {
            t: self.t,
            q: self.center.q.as_slice().to_vec(),
            p: self.center.p.as_slice().to_vec(),
            action: self.action,
            direction: [self.direction[0], self.direction[1]],
            mass: self.mass(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PacketSummary {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub action: f64,
    pub direction: [f64; 2],
    pub mass: f64,
}

/// Packet `Y₀ WP_{z₀} φ` at `t = 0` with zero action.
pub fn build_initial_packet(
    pot: &dyn PauliPotential,
    z0: &PhasePoint,
    mode: ModeSign,
    phi: &ProfileGrid,
    eps: f64,
) -> Result<WavePacket> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("ε = {eps} must be positive")));
    }
    if phi.d() != z0.dim() || z0.dim() != pot.dim() {
        return Err(Error::Shape("profile, point and potential dimensions differ".into()));
    }
    let direction = eigenvector(pot, z0.q.as_slice(), mode)?;
    let sig = sigma_residual(pot, z0);
    let scale = 1.0 + z0.q.norm() + z0.p.norm();
    if sig.abs() <= crossing_threshold(&[scale]) {
        return Err(Error::Domain(format!("initial point lies on Σ (w·dw p = {sig:e})")));
    }
    Ok(WavePacket {
        eps,
        t: 0.0,
        center: z0.clone(),
        action: 0.0,
        direction,
        mode: Some(mode),
        profile: phi.clone(),
    })
}

/// How the outgoing profiles at `t♭ + δ` are formed from `u^out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutgoingProfile {
    /// `e^{∓(i/2)G_α(t♭+δ)y·y} u^out`.
    Leading,
    /// Seed `u^out` just after `t♭` and solve the profile equation to `t♭+δ`.
    Propagated,
}

/// Numerical knobs of the pipeline.
#[derive(Debug, Clone)]
pub struct TransitionOptions {
    /// Explicit window; `None` means `ε^{5/14}`.
    pub delta: Option<f64>,
    pub beta: f64,
    /// Length of the flow used to locate the crossing.
    pub horizon: f64,
    pub flow_step: f64,
    pub profile_dt: f64,
    /// Distance to `t♭` at which limit profiles are read off.
    pub extraction_offset: f64,
    pub apply_cutoff: bool,
    pub outgoing: OutgoingProfile,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        Self {
            delta: None,
            beta: DEFAULT_BETA,
            horizon: 3.0,
            flow_step: 1e-5,
            profile_dt: 1e-3,
            extraction_offset: 1e-3,
            apply_cutoff: false,
            outgoing: OutgoingProfile::Propagated,
        }
    }
}

impl TransitionOptions {
    pub fn schedule(&self, eps: f64) -> Schedule {
        match self.delta {
            Some(d) => Schedule::new(eps, d, self.beta),
            None => Schedule::new(eps, eps.powf(DELTA_EXPONENT), self.beta),
        }
    }
}

/// Smooth cutoff: 1 for `|y|‖dw‖ ≤ R/2`, 0 beyond `R`, quintic in between.
pub fn chi0(y_norm: f64, dw_norm: f64, radius: f64) -> f64 {
    let rho = y_norm * dw_norm / radius;
    if rho <= 0.5 {
        1.0
    } else if rho >= 1.0 {
        0.0
    } else {
        let t = 2.0 * (rho - 0.5);
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Output of [`ingoing_data`].
#[derive(Debug, Clone)]
pub struct IngoingData {
    /// The limit profile `u^{in,α}`.
    pub u_in: ProfileGrid,
    /// The Landau–Zener amplitude on the incoming direction (`α₂^in` for a
    /// minus start, `α₁^in` for a plus start), sign `ζ` included.
    pub alpha_in: ProfileGrid,
    /// Sign of the incoming eigenvector against `V_θ` (minus) or `V_θ^⊥`
    /// (plus).
    pub zeta: f64,
    pub t_extract: f64,
    /// Folded phase applied at each grid point.
    pub phase: Vec<f64>,
    pub regime: RegimeReport,
    /// Mass fraction removed by `χ₀` (zero when the cutoff is not applied).
    pub cutoff_loss: f64,
}

/// Continue the incoming profile from `t♭ - δ` to the extraction time, form
/// the limit profile and multiply the explicit ingoing phase.
pub fn ingoing_data(
    pot: &dyn PauliPotential,
    event: &CrossingEvent,
    traj: &Trajectory,
    packet: &WavePacket,
    delta: f64,
    opts: &TransitionOptions,
) -> Result<IngoingData> {
    let eps = packet.eps;
    let sched = Schedule::new(eps, delta, opts.beta);
    let regime = RegimeReport::evaluate(eps, delta, event.alpha).check()?;
    let mode = packet
        .mode
        .ok_or_else(|| Error::Domain("the ingoing packet needs a mode".into()))?;
    let tf = event.t_flat;
    let t_ex = tf - opts.extraction_offset.min(delta);
    let u_ex = if t_ex > packet.t {
        let src = HessianSource::Trajectory { pot, traj };
        solve_profile(&src, &packet.profile, packet.t, t_ex, &SolveOptions::new(opts.profile_dt).near(tf))?.last
    } else {
        packet.profile.clone()
    };
    let mut u_in = extract_ingoing_profile(&u_ex, event, mode, t_ex)?;

    let mut cutoff_loss = 0.0;
    if opts.apply_cutoff {
        let before = u_in.norm_sqr();
        let dwn = event.dw.norm();
        u_in.map_pointwise(|y, v| v * chi0(y.iter().map(|a| a * a).sum::<f64>().sqrt(), dwn, sched.radius));
        cutoff_loss = if before > 0.0 { 1.0 - u_in.norm_sqr() / before } else { 0.0 };
    }

    let target = match mode {
        ModeSign::Minus => event.v_theta,
        ModeSign::Plus => event.v_theta_perp,
    };
    let zeta = if packet.direction.dot(&target) < 0.0 { -1.0 } else { 1.0 };

    // minus: e^{iS♭/ε - iΦ - iαH₁/(r√ε)}, plus: the conjugate pattern
    let sg = mode.sign();
    let base = LZParameters::base(event, eps);
    let g1 = event.gamma1();
    let k1 = event.alpha / (event.r * eps.sqrt());
    let s_phase = event.s_flat / eps;
    let spec = u_in.spec;
    let phase: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let mut y = [0.0; 3];
            spec.point(i, &mut y);
            let y = &y[..spec.d];
            let h = event.h_coords(y);
            let phi = phase_phi(&base, h, quad_form(&g1, y));
            fold(s_phase + sg * (phi + k1 * h.0))
        })
        .collect();
    let values = u_in
        .values
        .par_iter()
        .zip(&phase)
        .map(|(v, &ph)| v * Complex64::from_polar(zeta, ph))
        .collect();
    Ok(IngoingData {
        alpha_in: ProfileGrid { spec, values },
        u_in,
        zeta,
        t_extract: t_ex,
        phase,
        regime,
        cutoff_loss,
    })
}

/// Per-point values used by the transfer.
#[derive(Debug, Clone, Default)]
pub struct TransferRecord {
    pub z2: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<Complex64>,
    pub lambda_tilde: Vec<f64>,
}

impl TransferRecord {
    /// CSV with columns `index, z2, a, b_re, b_im, lambda_tilde`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "index,z2,a,b_re,b_im,lambda_tilde")?;
        for i in 0..self.z2.len() {
            writeln!(
                w,
                "{i},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.z2[i], self.a[i], self.b[i].re, self.b[i].im, self.lambda_tilde[i]
            )?;
        }
        Ok(())
    }
}

/// Outgoing limit profiles `u₊^out`, `u₋^out`.
#[derive(Debug, Clone)]
pub struct TransferOutput {
    pub u_plus: ProfileGrid,
    pub u_minus: ProfileGrid,
    pub record: TransferRecord,
}

/// Pointwise transfer of a limit profile. `zeta` is the sign of the incoming
/// eigenvector (see [`IngoingData::zeta`]). With `z = (H₂ + α/√ε)/√r`:
///
/// * minus start: `u₊ = ζe^{iS♭/ε} a u`, `u₋ = -ζe^{iS♭/ε + iΛ̃} b̄ u`;
/// * plus start: `u₋ = ζe^{iS♭/ε} a u`, `u₊ = ζe^{iS♭/ε - iΛ̃} b u`.
pub fn apply_transfer(
    u_in: &ProfileGrid,
    zeta: f64,
    event: &CrossingEvent,
    eps: f64,
    start: ModeSign,
) -> TransferOutput {
    let spec = u_in.spec;
    let base = LZParameters::base(event, eps);
    let g1 = event.gamma1();
    let sr = event.r.sqrt();
    let shift = event.alpha_signed() / eps.sqrt();
    let s_phase = event.s_flat / eps;
    let rows: Vec<(f64, f64, Complex64, f64, Complex64, Complex64)> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let mut y = [0.0; 3];
            spec.point(i, &mut y);
            let y = &y[..spec.d];
            let h = event.h_coords(y);
            let z = (h.1 + shift) / sr;
            let a = coeff_a(z);
            let b = coeff_b(z);
            let lt = phase_lambda_tilde(&base, h, quad_form(&g1, y));
            let v = u_in.values[i] * zeta;
            let (kept, moved) = match start {
                ModeSign::Minus => (-unimodular(s_phase + lt) * b.conj() * v, unimodular(s_phase) * a * v),
                ModeSign::Plus => (unimodular(s_phase - lt) * b * v, unimodular(s_phase) * a * v),
            };
            (z, a, b, lt, kept, moved)
        })
        .collect();
    let mut record = TransferRecord::default();
    let mut kept = Vec::with_capacity(rows.len());
    let mut moved = Vec::with_capacity(rows.len());
    for (z, a, b, lt, k, m) in rows {
        record.z2.push(z);
        record.a.push(a);
        record.b.push(b);
        record.lambda_tilde.push(lt);
        kept.push(k);
        moved.push(m);
    }
    let kept = ProfileGrid { spec, values: kept };
    let moved = ProfileGrid { spec, values: moved };
    let (u_plus, u_minus) = match start {
        ModeSign::Minus => (moved, kept),
        ModeSign::Plus => (kept, moved),
    };
    TransferOutput { u_plus, u_minus, record }
}

/// Outgoing packets and the flows carrying them.
#[derive(Debug, Clone)]
pub struct Outgoing {
    pub out_minus: WavePacket,
    pub out_plus: WavePacket,
    pub traj_minus: Trajectory,
    pub traj_plus: Trajectory,
    pub drift: DVector<f64>,
}

/// Flow both modes out of `z♭` (the new mode from the drifted point) to
/// `t♭ + δ` and dress the outgoing profiles.
pub fn assemble_outgoing(
    pot: &dyn PauliPotential,
    event: &CrossingEvent,
    transfer: &TransferOutput,
    start: ModeSign,
    delta: f64,
    eps: f64,
    opts: &TransitionOptions,
) -> Result<Outgoing> {
    let tf = event.t_flat;
    let t1 = tf + delta;
    let drift = compute_drift(event, start);
    let zf = &event.z_flat;
    let drifted = PhasePoint { q: zf.q.clone(), p: &zf.p + &drift };
    let fresh = start.other();
    let traj_fresh = integrate_flow(pot, fresh.into(), true, &drifted, tf, t1, opts.flow_step, None)?;
    let traj_kept = integrate_flow(pot, start.into(), false, zf, tf, t1, opts.flow_step, None)?;
    for tr in [&traj_fresh, &traj_kept] {
        check_single_passage(pot, tr)?;
    }
    let (traj_minus, traj_plus) = match start {
        ModeSign::Minus => (traj_kept, traj_fresh),
        ModeSign::Plus => (traj_fresh, traj_kept),
    };

    let build = |mode: ModeSign, traj: &Trajectory, u_out: &ProfileGrid, dir: Vector2<f64>| -> Result<WavePacket> {
        let profile = match opts.outgoing {
            OutgoingProfile::Leading => seed_outgoing_profile(u_out, event, mode, t1)?,
            OutgoingProfile::Propagated => {
                let ts = tf + opts.extraction_offset.min(delta);
                let seed = seed_outgoing_profile(u_out, event, mode, ts)?;
                let src = HessianSource::Trajectory { pot, traj };
                solve_profile(&src, &seed, ts, t1, &SolveOptions::new(opts.profile_dt).near(tf))?.last
            }
        };
        Ok(WavePacket {
            eps,
            t: t1,
            center: traj.last().clone(),
            action: traj.last_action(),
            direction: dir,
            mode: Some(mode),
            profile,
        })
    };
    let out_minus = build(ModeSign::Minus, &traj_minus, &transfer.u_minus, event.v_theta_perp)?;
    let out_plus = build(ModeSign::Plus, &traj_plus, &transfer.u_plus, event.v_theta)?;
    Ok(Outgoing { out_minus, out_plus, traj_minus, traj_plus, drift })
}

/// The gap must grow along an outgoing flow; an interior local minimum of
/// `|w|` means a second near-crossing inside the window.
fn check_single_passage(pot: &dyn PauliPotential, traj: &Trajectory) -> Result<()> {
    let j: Vec<f64> = traj
        .states
        .iter()
        .map(|z| {
            let w = pot.w(z.q.as_slice());
            w[0].hypot(w[1])
        })
        .collect();
    for k in 2..j.len().saturating_sub(1) {
        if j[k] < j[k - 1] && j[k] <= j[k + 1] {
            return Err(Error::SecondCrossing(traj.times[k]));
        }
    }
    Ok(())
}

/// Eigenvector along a transported trajectory, linearly interpolated and
/// renormalized.
pub fn eigvec_at(traj: &Trajectory, t: f64) -> Option<Vector2<f64>> {
    let ev = traj.eigvec.as_ref()?;
    let n = traj.times.len();
    if n == 1 {
        return Some(ev[0]);
    }
    let k = traj.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
    let (t0, t1) = (traj.times[k], traj.times[k + 1]);
    let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    let v = ev[k] * (1.0 - s) + ev[k + 1] * s;
    Some(v / v.norm())
}

/// Integrate the mode flow to the horizon and locate the first passage
/// through a gap minimum.
pub fn locate_crossing(
    pot: &dyn PauliPotential,
    mode: ModeSign,
    z0: &PhasePoint,
    t0: f64,
    opts: &TransitionOptions,
) -> Result<CrossingEvent> {
    let traj = integrate_flow(pot, mode.into(), false, z0, t0, t0 + opts.horizon, opts.flow_step, None)?;
    let j2: Vec<f64> = traj
        .states
        .iter()
        .map(|z| {
            let w = pot.w(z.q.as_slice());
            w[0] * w[0] + w[1] * w[1]
        })
        .collect();
    let first = (1..j2.len().saturating_sub(1)).find(|&i| j2[i] <= j2[i - 1] && j2[i] < j2[i + 1]);
    let Some(i) = first else {
        return Err(Error::NoMinimum);
    };
    let end = (i + 3).min(traj.len());
    let head = Trajectory {
        mode: traj.mode,
        drifted: false,
        times: traj.times[..end].to_vec(),
        states: traj.states[..end].to_vec(),
        action: traj.action[..end].to_vec(),
        eigvec: None,
        energy: traj.energy,
    };
    detect_crossing_event(pot, &head)
}

/// Everything produced by one passage.
#[derive(Debug, Clone)]
pub struct TransitionResult {
    pub start: ModeSign,
    pub schedule: Schedule,
    pub event: CrossingEvent,
    pub packet_in: WavePacket,
    pub traj_in: Trajectory,
    pub ingoing: IngoingData,
    pub transfer: TransferOutput,
    pub outgoing: Outgoing,
}

impl TransitionResult {
    pub fn out_minus(&self) -> &WavePacket {
        &self.outgoing.out_minus
    }

    pub fn out_plus(&self) -> &WavePacket {
        &self.outgoing.out_plus
    }

    pub fn ingoing_profile(&self) -> &ProfileGrid {
        &self.ingoing.u_in
    }

    pub fn error_budget(&self) -> f64 {
        self.schedule.error_budget()
    }

    pub fn summary(&self) -> TransitionSummary {
        let ev = &self.event;
        TransitionSummary {
            eps: self.schedule.eps,
            start: self.start,
            delta: self.schedule.delta,
            beta: self.schedule.beta,
            radius: self.schedule.radius,
            n0: self.schedule.n0,
            t_flat: ev.t_flat,
            q_flat: ev.z_flat.q.as_slice().to_vec(),
            p_flat: ev.z_flat.p.as_slice().to_vec(),
            s_flat: ev.s_flat,
            r: ev.r,
            alpha: ev.alpha_signed(),
            theta: ev.theta,
            drift: self.outgoing.drift.as_slice().to_vec(),
            zeta: self.ingoing.zeta,
            mass_in: self.ingoing.u_in.norm_sqr(),
            mass_plus_out: self.transfer.u_plus.norm_sqr(),
            mass_minus_out: self.transfer.u_minus.norm_sqr(),
            cutoff_loss: self.ingoing.cutoff_loss,
            error_budget: self.schedule.error_budget(),
            ingoing_remainder: self.schedule.ingoing_remainder(),
            regime: self.ingoing.regime.checks.clone(),
            out_plus: self.outgoing.out_plus.summary(),
            out_minus: self.outgoing.out_minus.summary(),
        }
    }
}

/// JSON-ready digest of a [`TransitionResult`].
#[derive(Debug, Clone, Serialize)]
pub struct TransitionSummary {
    pub eps: f64,
    pub start: ModeSign,
    pub delta: f64,
    pub beta: f64,
    pub radius: f64,
    pub n0: u32,
    pub t_flat: f64,
    pub q_flat: Vec<f64>,
    pub p_flat: Vec<f64>,
    pub s_flat: f64,
    pub r: f64,
    pub alpha: f64,
    pub theta: f64,
    pub drift: Vec<f64>,
    pub zeta: f64,
    pub mass_in: f64,
    pub mass_plus_out: f64,
    pub mass_minus_out: f64,
    pub cutoff_loss: f64,
    pub error_budget: f64,
    pub ingoing_remainder: f64,
    pub regime: Vec<RegimeCheck>,
    pub out_plus: PacketSummary,
    pub out_minus: PacketSummary,
}

/// Full pipeline from an initial packet on mode `start`.
pub fn run_transition(
    pot: &dyn PauliPotential,
    initial: &WavePacket,
    opts: &TransitionOptions,
) -> Result<TransitionResult> {
    let start = initial
        .mode
        .ok_or_else(|| Error::Domain("the initial packet needs a mode".into()))?;
    let eps = initial.eps;
    let t0 = initial.t;
    let event = locate_crossing(pot, start, &initial.center, t0, opts)?;
    let sched = opts.schedule(eps);
    RegimeReport::evaluate(eps, sched.delta, event.alpha).check()?;
    let tf = event.t_flat;
    let t_in = tf - sched.delta;
    if t_in <= t0 {
        return Err(Error::Domain(format!("the window t♭ - δ = {t_in} starts before the initial time {t0}")));
    }
    let t_ex = tf - opts.extraction_offset.min(sched.delta);
    let traj_in = integrate_flow(pot, start.into(), false, &initial.center, t0, t_ex, opts.flow_step, Some(initial.direction))?;

    let sol = {
        let src = HessianSource::Trajectory { pot, traj: &traj_in };
        solve_profile(&src, &initial.profile, t0, t_in, &SolveOptions::new(opts.profile_dt))?
    };
    let packet_in = WavePacket {
        eps,
        t: t_in,
        center: traj_in.sample(t_in),
        action: traj_in.sample_action(t_in),
        direction: eigvec_at(&traj_in, t_in).unwrap_or(initial.direction),
        mode: Some(start),
        profile: sol.last,
    };
    let ingoing = ingoing_data(pot, &event, &traj_in, &packet_in, sched.delta, opts)?;
    let transfer = apply_transfer(&ingoing.u_in, ingoing.zeta, &event, eps, start);
    let outgoing = assemble_outgoing(pot, &event, &transfer, start, sched.delta, eps, opts)?;
    Ok(TransitionResult { start, schedule: sched, event, packet_in, traj_in, ingoing, transfer, outgoing })
}

/// Minus-mode start.
pub fn minus_mode_transition(
    pot: &dyn PauliPotential,
    initial: &WavePacket,
    opts: &TransitionOptions,
) -> Result<TransitionResult> {
    if initial.mode != Some(ModeSign::Minus) {
        return Err(Error::Domain("expected a minus-mode packet".into()));
    }
    run_transition(pot, initial, opts)
}

/// Plus-mode start: the packet arrives on `V_θ^⊥`, the transferred part
/// leaves on the drifted minus flow with `a`, the retained part with `b`.
pub fn plus_mode_transition(
    pot: &dyn PauliPotential,
    initial: &WavePacket,
    opts: &TransitionOptions,
) -> Result<TransitionResult> {
    if initial.mode != Some(ModeSign::Plus) {
        return Err(Error::Domain("expected a plus-mode packet".into()));
    }
    run_transition(pot, initial, opts)
}

/// The `y`-linear phase left in the outgoing frame of the fresh mode,
/// `-(2|α|/(r√ε)) H₁ - δ·y/√ε` in units of the start sign. Vanishes when `δ`
/// is the drift.
pub fn residual_linear_phase(event: &CrossingEvent, drift: &DVector<f64>, eps: f64, start: ModeSign, y: &[f64]) -> f64 {
    let h1 = event.h_coords(y).0;
    let dy: f64 = drift.iter().zip(y).map(|(a, b)| a * b).sum();
    (start.sign() * 2.0 * event.alpha * h1 / event.r - dy) / eps.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::potential::LinearCone;

    fn spec() -> GridSpec {
        GridSpec::new(2, 64, 8.0).unwrap()
    }

    fn event(alpha: f64) -> CrossingEvent {
        let pot = LinearCone::isotropic(2);
        CrossingEvent::from_phase_point(&pot, 0.5, PhasePoint::new(vec![0.0, alpha], vec![2f64.sqrt(), 0.0]), 0.3)
            .unwrap()
    }

    #[test]
    fn transfer_splits_mass_unitarily() {
        let u = ProfileGrid::gaussian_at(spec(), &[0.3, -0.4], 0.8, &[0.5, 0.1]);
        for start in [ModeSign::Minus, ModeSign::Plus] {
            for alpha in [0.0, 0.02] {
                let out = apply_transfer(&u, 1.0, &event(alpha), 1e-2, start);
                let total = out.u_plus.norm_sqr() + out.u_minus.norm_sqr();
                assert!((total - u.norm_sqr()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transferred_mass_matches_quadrature() {
        // r = √2 here; the oracle integrates e^{-πH₂²/r}
        let ev = event(0.0);
        let u = ProfileGrid::gaussian(spec());
        let out = apply_transfer(&u, 1.0, &ev, 1e-2, ModeSign::Minus);
        let spec = u.spec;
        let mut acc = 0.0;
        let mut y = [0.0; 3];
        for i in 0..spec.len() {
            spec.point(i, &mut y);
            let h2 = ev.h_coords(&y[..2]).1;
            acc += (-std::f64::consts::PI * h2 * h2 / ev.r).exp() * u.values[i].norm_sqr();
        }
        acc *= spec.cell();
        assert!((out.u_plus.norm_sqr() - acc).abs() < 1e-12);
        // closed form for the Gaussian: 1/√(1 + π/√2)
        let exact = 1.0 / (1.0 + std::f64::consts::PI / 2f64.sqrt()).sqrt();
        assert!((out.u_plus.norm_sqr() - exact).abs() < 1e-6);
    }

    #[test]
    fn transverse_axis_profile_is_transmitted() {
        // H₂ = y₂ here, so a profile squeezed onto y₂ = 0 passes with a = 1
        let ev = event(0.0);
        let u = ProfileGrid::from_fn(spec(), |y| {
            Complex64::new(if y[1] == 0.0 { (-y[0] * y[0]).exp() } else { 0.0 }, 0.0)
        });
        let out = apply_transfer(&u, 1.0, &ev, 1e-2, ModeSign::Minus);
        assert!(out.u_minus.norm() < 1e-15);
        let s = unimodular(ev.s_flat / 1e-2);
        for (a, b) in out.u_plus.values.iter().zip(&u.values) {
            assert!((a - s * b).norm() < 1e-14);
        }
    }

    #[test]
    fn drift_cancels_linear_phase() {
        for alpha in [1e-3, 0.02, -0.05] {
            let ev = event(alpha);
            for start in [ModeSign::Minus, ModeSign::Plus] {
                let drift = compute_drift(&ev, start);
                let eps = 1e-2;
                let mut worst: f64 = 0.0;
                for y in [[1.0f64, 0.0], [0.3, -2.0], [-4.0, 1.5]] {
                    let yn = (y[0] * y[0] + y[1] * y[1]).sqrt();
                    let r = residual_linear_phase(&ev, &drift, eps, start, &y);
                    worst = worst.max(r.abs() / (ev.alpha / eps.sqrt() * yn));
                }
                assert!(worst <= 1e-12, "α = {alpha}: {worst:e}");
            }
        }
    }

    #[test]
    fn regime_thresholds() {
        let r = RegimeReport::evaluate(1e-2, 0.9, 0.0);
        let f = r.failure().unwrap();
        assert_eq!(f.name, "delta^3/eps");
        assert!(RegimeReport::evaluate(1e-2, 0.9, 0.0).check().is_err());
        let warn = RegimeReport::evaluate(1e-2, 1e-2f64.powf(DELTA_EXPONENT), 1.0);
        assert!(warn.failure().is_none());
        let names: Vec<_> = warn.warnings().map(|c| c.name).collect();
        assert!(names.contains(&"alpha/sqrt(eps)"));
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(chi0(0.2, 1.0, 1.0), 1.0);
        assert_eq!(chi0(1.2, 1.0, 1.0), 0.0);
        let mid = chi0(0.75, 1.0, 1.0);
        assert!((mid - 0.5).abs() < 1e-15);
        // C¹ at the joints
        let h = 1e-6;
        assert!((chi0(0.5 + h, 1.0, 1.0) - 1.0).abs() < 1e-12);
        assert!(chi0(1.0 - h, 1.0, 1.0) < 1e-12);
    }

    #[test]
    fn initial_packet_checks() {
        let pot = LinearCone::isotropic(2);
        let phi = ProfileGrid::gaussian(spec());
        let z0 = PhasePoint::new(vec![-1.0, 0.0], vec![2.0, 0.0]);
        let m = build_initial_packet(&pot, &z0, ModeSign::Minus, &phi, 1e-2).unwrap();
        let p = build_initial_packet(&pot, &z0, ModeSign::Plus, &phi, 1e-2).unwrap();
        assert!(m.direction.dot(&p.direction).abs() < 1e-15);
        // A((-1,0)) = diag(-1, 1): the minus eigenvector is (±1, 0)
        assert!((m.direction[0].abs() - 1.0).abs() < 1e-15);
        let on_cone = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        assert!(matches!(
            build_initial_packet(&pot, &on_cone, ModeSign::Minus, &phi, 1e-2),
            Err(Error::CrossingPoint { .. })
        ));
        let on_sigma = PhasePoint::new(vec![-1.0, 0.0], vec![0.0, 1.0]);
        assert!(matches!(
            build_initial_packet(&pot, &on_sigma, ModeSign::Minus, &phi, 1e-2),
            Err(Error::Domain(_))
        ));
    }
}
