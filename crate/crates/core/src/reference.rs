//! Split-step Fourier solver of the full two-level system
//! `iε∂ₜψ = -(ε²/2)Δψ + V(x)ψ` on a periodic box, used as ground truth.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::PhasePoint;
use crate::error::{Error, Result};
use crate::grid::{ordered_reduce, ordered_sum, FftPlan, GridSpec};
use crate::potential::{crossing_threshold, PauliPotential};
use crate::profile::ProfileGrid;
use crate::transition::WavePacket;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Both components of `ψ` on the box `center + [-L, L)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub spec: GridSpec,
    pub center: Vec<f64>,
    pub eps: f64,
    pub t: f64,
    pub psi: [Vec<Complex64>; 2],
}

/// Largest spacing accepted for a given `ε`: `2π√ε / 8`.
pub fn max_spacing(eps: f64) -> f64 {
    2.0 * PI * eps.sqrt() / 8.0
}

impl GridState {
    pub fn zeros(spec: GridSpec, center: Vec<f64>, eps: f64, t: f64) -> Result<Self> {
        if spec.d > 2 {
            return Err(Error::Shape(format!("reference runs support d <= 2, got {}", spec.d)));
        }
        if center.len() != spec.d {
            return Err(Error::Shape("box center dimension".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("ε = {eps} must be positive")));
        }
        if spec.dx() > max_spacing(eps) {
            return Err(Error::Resolution(format!(
                "spacing {:.4e} exceeds 2π√ε/8 = {:.4e}",
                spec.dx(),
                max_spacing(eps)
            )));
        }
        Ok(Self { spec, center, eps, t, psi: [vec![C0; spec.len()], vec![C0; spec.len()]] })
    }

    /// Physical coordinates of a flat index.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        self.spec.point(idx, out);
        for (o, c) in out.iter_mut().zip(&self.center) {
            *o += c;
        }
    }

    /// Sample a sum of packets at the grid points.
    pub fn from_packets(spec: GridSpec, center: Vec<f64>, packets: &[&WavePacket]) -> Result<Self> {
        let first = packets
            .first()
            .ok_or_else(|| Error::Domain("no packets to sample".into()))?;
        let mut st = Self::zeros(spec, center, first.eps, first.t)?;
        let vals = st.realize(packets);
        st.psi = vals;
        Ok(st)
    }

    /// Values of a packet sum at this state's grid points.
    pub fn realize(&self, packets: &[&WavePacket]) -> [Vec<Complex64>; 2] {
        let d = self.spec.d;
        let pairs: Vec<[Complex64; 2]> = (0..self.spec.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; 2];
                self.point(i, &mut x[..d]);
                let mut acc = [C0, C0];
                for p in packets {
                    let v = p.value_at(&x[..d]);
                    acc[0] += v[0];
                    acc[1] += v[1];
                }
                acc
            })
            .collect();
        let (a, b) = pairs.into_iter().map(|v| (v[0], v[1])).unzip();
        [a, b]
    }

    pub fn mass(&self) -> f64 {
        let s: f64 = self.psi.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum();
        s * self.spec.cell()
    }

    /// Fraction of the mass in the outer tenth of the box along any axis.
    pub fn boundary_fraction(&self) -> f64 {
        let spec = self.spec;
        let cut = 0.9 * spec.l;
        let (edge, total) = ordered_reduce(
            spec.len(),
            (0.0, 0.0),
            |i| {
                let mut y = [0.0; 3];
                spec.point(i, &mut y);
                let m = self.psi[0][i].norm_sqr() + self.psi[1][i].norm_sqr();
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

    /// `⟨packet, ψ⟩`.
    pub fn overlap(&self, packet: &WavePacket) -> Complex64 {
        let other = self.realize(&[packet]);
        let zero = Complex64::new(0.0, 0.0);
        let s: Complex64 = (0..2)
            .map(|c| ordered_sum(self.psi[c].len(), zero, |i| other[c][i].conj() * self.psi[c][i]))
            .sum();
        s * self.spec.cell()
    }

    /// `‖ψ - Σ packets‖_{L²}`.
    pub fn distance_to(&self, packets: &[&WavePacket]) -> f64 {
        let other = self.realize(packets);
        let s: f64 = (0..2)
            .map(|c| ordered_sum(self.psi[c].len(), 0.0, |i| (self.psi[c][i] - other[c][i]).norm_sqr()))
            .sum();
        (s * self.spec.cell()).sqrt()
    }

    /// `u(y) = ε^{d/4} e^{-iS/ε} e^{-ip·(x-q)/ε} ψ(q + √ε y)` on `yspec`, one
    /// grid per component. The oscillation is removed on the physical grid
    /// before the six-point interpolation.
    pub fn rescaled(&self, frame: &PhasePoint, action: f64, yspec: GridSpec) -> Result<[ProfileGrid; 2]> {
        let d = self.spec.d;
        if yspec.d != d || frame.dim() != d {
            return Err(Error::Shape("frame and grid dimensions differ".into()));
        }
        for a in 0..d {
            if (frame.q[a] - self.center[a]).abs() > 0.9 * self.spec.l {
                return Err(Error::Interpolation(format!(
                    "frame center {:?} is outside the physical box",
                    frame.q.as_slice()
                )));
            }
        }
        let eps = self.eps;
        let demod: Vec<[Complex64; 2]> = (0..self.spec.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; 2];
                self.point(i, &mut x[..d]);
                let lin: f64 = (0..d).map(|a| frame.p[a] * (x[a] - frame.q[a])).sum();
                let ph = Complex64::from_polar(1.0, (-lin / eps).rem_euclid(std::f64::consts::TAU));
                [self.psi[0][i] * ph, self.psi[1][i] * ph]
            })
            .collect();
        let comp: [Vec<Complex64>; 2] = [demod.iter().map(|v| v[0]).collect(), demod.iter().map(|v| v[1]).collect()];
        let scale = Complex64::from_polar(eps.powf(d as f64 / 4.0), (-action / eps).rem_euclid(std::f64::consts::TAU));
        let se = eps.sqrt();
        let spec = self.spec;
        let sample = |c: usize| {
            ProfileGrid::from_fn(yspec, |y| {
                let mut rel = [0.0; 2];
                for a in 0..d {
                    rel[a] = frame.q[a] + se * y[a] - self.center[a];
                    if rel[a].abs() >= spec.l {
                        return C0;
                    }
                }
                spec.interpolate6(&comp[c], &rel[..d], true).unwrap_or(C0) * scale
            })
        };
        Ok([sample(0), sample(1)])
    }

    /// `m± = ∫|Π±ψ|²`. Points on the crossing set borrow the direction of
    /// the nearest neighbor off it.
    pub fn mode_masses(&self, pot: &dyn PauliPotential) -> (f64, f64) {
        let dirs = self.directions(pot);
        let (mm, mp) = ordered_reduce(
            self.spec.len(),
            (0.0, 0.0),
            |i| {
                let (a, b) = (self.psi[0][i], self.psi[1][i]);
                let tot = a.norm_sqr() + b.norm_sqr();
                let Some(e) = dirs[i] else {
                    return (0.5 * tot, 0.5 * tot);
                };
                let q = e[0] * (a.norm_sqr() - b.norm_sqr()) + 2.0 * e[1] * (a.conj() * b).re;
                (0.5 * (tot - q), 0.5 * (tot + q))
            },
            |x, y| (x.0 + y.0, x.1 + y.1),
        );
        let c = self.spec.cell();
        (mm * c, mp * c)
    }

    /// Unit `w/|w|` at each point, with the nearest-neighbor fallback.
    fn directions(&self, pot: &dyn PauliPotential) -> Vec<Option<[f64; 2]>> {
        let d = self.spec.d;
        let raw: Vec<Option<[f64; 2]>> = (0..self.spec.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; 2];
                self.point(i, &mut x[..d]);
                let w = pot.w(&x[..d]);
                let g = w[0].hypot(w[1]);
                if g > crossing_threshold(&x[..d]) && g.is_finite() {
                    Some([w[0] / g, w[1] / g])
                } else {
                    None
                }
            })
            .collect();
        let n = self.spec.n;
        let mut out = raw.clone();
        for i in 0..raw.len() {
            if raw[i].is_some() {
                continue;
            }
            let mut ix = [0usize; 3];
            self.spec.unravel(i, &mut ix[..d]);
            'search: for radius in 1..=2usize {
                for a in 0..d {
                    for s in [-(radius as isize), radius as isize] {
                        let mut jx = ix;
                        jx[a] = (ix[a] as isize + s).rem_euclid(n as isize) as usize;
                        let j = (0..d).fold(0, |acc, k| acc * n + jx[k]);
                        if let Some(e) = raw[j] {
                            out[i] = Some(e);
                            break 'search;
                        }
                    }
                }
            }
        }
        out
    }

    /// Mass, mode masses, `⟨q⟩` and `⟨p⟩` (momenta from the spectrum).
    pub fn observables(&self, pot: &dyn PauliPotential) -> Observables {
        let d = self.spec.d;
        let mass = self.mass();
        let (m_minus, m_plus) = self.mode_masses(pot);
        let mut q = vec![0.0; d];
        for i in 0..self.spec.len() {
            let mut x = [0.0; 2];
            self.point(i, &mut x[..d]);
            let m = self.psi[0][i].norm_sqr() + self.psi[1][i].norm_sqr();
            for a in 0..d {
                q[a] += x[a] * m;
            }
        }
        let plan = FftPlan::new(self.spec);
        let k = self.spec.wavenumbers();
        let mut p = vec![0.0; d];
        let mut spec_mass = 0.0;
        for c in 0..2 {
            let mut f = self.psi[c].clone();
            plan.forward(&mut f);
            for (i, v) in f.iter().enumerate() {
                let mut ix = [0usize; 3];
                self.spec.unravel(i, &mut ix[..d]);
                let m = v.norm_sqr();
                spec_mass += m;
                for a in 0..d {
                    p[a] += self.eps * k[ix[a]] * m;
                }
            }
        }
        let cell = self.spec.cell();
        for a in 0..d {
            q[a] *= cell / mass.max(f64::MIN_POSITIVE);
            p[a] /= spec_mass.max(f64::MIN_POSITIVE);
        }
        Observables { t: self.t, mass, m_minus, m_plus, q, p }
    }

    /// Binary checkpoint: little-endian `f64` header `d, n, L, ε, t`, the box
    /// center, then interleaved `(re, im)` of component 1 and component 2.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        let mut put = |x: f64| w.write_all(&x.to_le_bytes());
        for x in [self.spec.d as f64, self.spec.n as f64, self.spec.l, self.eps, self.t] {
            put(x)?;
        }
        for &c in &self.center {
            put(c)?;
        }
        for comp in &self.psi {
            for v in comp {
                put(v.re)?;
                put(v.im)?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let get = |r: &mut BufReader<std::fs::File>| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let d = get(&mut r)? as usize;
        let n = get(&mut r)? as usize;
        let l = get(&mut r)?;
        let eps = get(&mut r)?;
        let t = get(&mut r)?;
        let spec = GridSpec::new(d, n, l)?;
        let center = (0..d).map(|_| get(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut psi = [Vec::with_capacity(spec.len()), Vec::with_capacity(spec.len())];
        for comp in psi.iter_mut() {
            for _ in 0..spec.len() {
                let re = get(&mut r)?;
                let im = get(&mut r)?;
                comp.push(Complex64::new(re, im));
            }
        }
        if !r.fill_buf()?.is_empty() {
            return Err(Error::Io("trailing bytes after checkpoint".into()));
        }
        Ok(Self { spec, center, eps, t, psi })
    }
}

/// One row of the observables table.
#[derive(Debug, Clone, Serialize)]
pub struct Observables {
    pub t: f64,
    pub mass: f64,
    pub m_minus: f64,
    pub m_plus: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl Observables {
    pub fn csv_header(d: usize) -> String {
        let mut h = String::from("t,mass,m_minus,m_plus");
        for a in 1..=d {
            h.push_str(&format!(",q{a}"));
        }
        for a in 1..=d {
            h.push_str(&format!(",p{a}"));
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!("{:.12e},{:.12e},{:.12e},{:.12e}", self.t, self.mass, self.m_minus, self.m_plus);
        for v in self.q.iter().chain(&self.p) {
            s.push_str(&format!(",{v:.12e}"));
        }
        s
    }
}

/// `e^{-iτV}` for `V = vI + A(w)` in closed form.
pub fn pauli_exp(v: f64, w: [f64; 2], tau: f64) -> [[Complex64; 2]; 2] {
    let g = w[0].hypot(w[1]);
    let x = g * tau;
    // sin(gτ)/g, with the series below 1e-6
    let sinc = if x.abs() < 1e-6 { tau * (1.0 - x * x / 6.0) } else { x.sin() / g };
    let ph = Complex64::from_polar(1.0, -v * tau);
    let c = ph * x.cos();
    let s = ph * Complex64::new(0.0, -sinc);
    [[c + s * w[0], s * w[1]], [s * w[1], c - s * w[0]]]
}

/// Bookkeeping of one [`evolve`] call.
#[derive(Debug, Clone, Serialize)]
pub struct EvolveReport {
    pub steps: usize,
    pub dt: f64,
    /// Largest `|λ±| Δt / ε` over the grid.
    pub max_phase: f64,
    /// Set when `max_phase > π/4`.
    pub cfl_warning: bool,
    pub mass_drift: f64,
}

/// Strang split-step from `state.t` to `t_end` with steps of at most `dt`:
/// half potential, full kinetic, half potential, adjacent half steps merged.
pub fn evolve(pot: &dyn PauliPotential, state: &mut GridState, t_end: f64, dt: f64) -> Result<EvolveReport> {
    evolve_inner(pot, state, t_end, dt, true)
}

/// [`evolve`] without the box-escape check, for data that is genuinely
/// periodic (plane waves).
pub fn evolve_periodic(pot: &dyn PauliPotential, state: &mut GridState, t_end: f64, dt: f64) -> Result<EvolveReport> {
    evolve_inner(pot, state, t_end, dt, false)
}

fn evolve_inner(
    pot: &dyn PauliPotential,
    state: &mut GridState,
    t_end: f64,
    dt: f64,
    check_box: bool,
) -> Result<EvolveReport> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Step(dt));
    }
    let span = t_end - state.t;
    let m0 = state.mass();
    if span == 0.0 {
        return Ok(EvolveReport { steps: 0, dt: 0.0, max_phase: 0.0, cfl_warning: false, mass_drift: 0.0 });
    }
    let steps = (span.abs() / dt).ceil() as usize;
    let h = span / steps as f64;
    let eps = state.eps;
    let d = state.spec.d;

    let pts: Vec<(f64, [f64; 2])> = (0..state.spec.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 2];
            state.point(i, &mut x[..d]);
            (pot.v(&x[..d]), pot.w(&x[..d]))
        })
        .collect();
    if pts.iter().any(|(v, w)| !v.is_finite() || !w[0].is_finite() || !w[1].is_finite()) {
        return Err(Error::Evaluation { x: state.center.clone() });
    }
    let max_phase = pts
        .iter()
        .map(|(v, w)| (v.abs() + w[0].hypot(w[1])) * h.abs() / eps)
        .fold(0.0, f64::max);
    let half: Vec<_> = pts.par_iter().map(|(v, w)| pauli_exp(*v, *w, 0.5 * h / eps)).collect();
    let full: Vec<_> = pts.par_iter().map(|(v, w)| pauli_exp(*v, *w, h / eps)).collect();
    let kin: Vec<Complex64> = state
        .spec
        .k_squared()
        .into_par_iter()
        .map(|k2| Complex64::from_polar(1.0, (-0.5 * eps * h * k2).rem_euclid(std::f64::consts::TAU)))
        .collect();
    let plan = FftPlan::new(state.spec);

    let apply = |psi: &mut [Vec<Complex64>; 2], u: &[[[Complex64; 2]; 2]]| {
        let [a, b] = psi;
        a.par_iter_mut().zip(b.par_iter_mut()).zip(u).for_each(|((x, y), m)| {
            let (p, q) = (*x, *y);
            *x = m[0][0] * p + m[0][1] * q;
            *y = m[1][0] * p + m[1][1] * q;
        });
    };

    apply(&mut state.psi, &half);
    for k in 0..steps {
        for comp in state.psi.iter_mut() {
            plan.forward(comp);
            comp.par_iter_mut().zip(&kin).for_each(|(c, f)| *c *= f);
            plan.inverse(comp);
        }
        if k + 1 < steps {
            apply(&mut state.psi, &full);
        }
        if check_box && ((k + 1) % 64 == 0 || k + 1 == steps) {
            let frac = state.boundary_fraction();
            if frac > 1e-8 {
                state.t += h * (k + 1) as f64;
                return Err(Error::BoxEscape(frac));
            }
        }
    }
    apply(&mut state.psi, &half);
    state.t = t_end;
    let mass_drift = (state.mass() - m0).abs();
    Ok(EvolveReport { steps, dt: h, max_phase, cfl_warning: max_phase > 0.25 * PI, mass_drift })
}
