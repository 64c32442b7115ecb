//! Periodic tensor grids and their multi-dimensional FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid `[-L, L)^d` with `n` points per axis, values stored
/// row-major (last axis fastest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub l: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Shape(format!("grid dimension {d} not in 1..=3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Shape(format!("{n} points per axis is not a power of two >= 4")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Shape(format!("half-width {l} must be positive")));
        }
        Ok(Self { d, n, l })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// Volume element of one cell.
    pub fn cell(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.l + j as f64 * self.dx()
    }

    /// Axis indices of a flat index.
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    /// Coordinates of a flat index.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut ix = [0usize; 3];
        self.unravel(idx, &mut ix[..self.d]);
        for a in 0..self.d {
            out[a] = self.coord(ix[a]);
        }
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = PI / self.l;
        (0..self.n)
            .map(|j| {
                let m = if j < self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
                m * dk
            })
            .collect()
    }

    /// `|k|²` for every flat index of the spectral grid.
    pub fn k_squared(&self) -> Vec<f64> {
        let k = self.wavenumbers();
        (0..self.len())
            .map(|idx| {
                let mut ix = [0usize; 3];
                self.unravel(idx, &mut ix[..self.d]);
                ix[..self.d].iter().map(|&j| k[j] * k[j]).sum()
            })
            .collect()
    }
}

/// Four-point Lagrange weights on the nodes `-1, 0, 1, 2` at offset `s`.
pub fn lagrange4(s: f64) -> [f64; 4] {
    lagrange(s)
}

/// Lagrange weights on the `M` nodes `1 - M/2, ..., M/2` at offset `s`.
fn lagrange<const M: usize>(s: f64) -> [f64; M] {
    let off = (M / 2) as f64 - 1.0;
    let mut w = [1.0; M];
    for (a, wa) in w.iter_mut().enumerate() {
        let xa = a as f64 - off;
        for b in 0..M {
            if a != b {
                let xb = b as f64 - off;
                *wa *= (s - xb) / (xa - xb);
            }
        }
    }
    w
}

impl GridSpec {
    /// Tensor cubic interpolation of grid values at `y`. With `periodic`
    /// the stencil wraps around the box; otherwise `None` is returned when it
    /// leaves the grid.
    pub fn interpolate(&self, values: &[Complex64], y: &[f64], periodic: bool) -> Option<Complex64> {
        self.interpolate_with::<4>(values, y, periodic)
    }

    /// Six-point (quintic) variant of [`GridSpec::interpolate`].
    pub fn interpolate6(&self, values: &[Complex64], y: &[f64], periodic: bool) -> Option<Complex64> {
        self.interpolate_with::<6>(values, y, periodic)
    }

    fn interpolate_with<const M: usize>(&self, values: &[Complex64], y: &[f64], periodic: bool) -> Option<Complex64> {
        let n = self.n as isize;
        let dx = self.dx();
        let lead = (M / 2) as isize - 1;
        let mut base = [0isize; 3];
        let mut wts = [[0.0; M]; 3];
        for a in 0..self.d {
            let u = (y[a] + self.l) / dx;
            if !u.is_finite() {
                return None;
            }
            let i = u.floor();
            base[a] = i as isize - lead;
            if !periodic && (base[a] < 0 || base[a] + M as isize > n) {
                return None;
            }
            wts[a] = lagrange::<M>(u - i);
        }
        let idx = |a: usize, k: usize| -> usize { (base[a] + k as isize).rem_euclid(n) as usize };
        let mut acc = Complex64::new(0.0, 0.0);
        match self.d {
            1 => {
                for i in 0..M {
                    acc += values[idx(0, i)] * wts[0][i];
                }
            }
            2 => {
                for i in 0..M {
                    let row = idx(0, i) * self.n;
                    let mut inner = Complex64::new(0.0, 0.0);
                    for j in 0..M {
                        inner += values[row + idx(1, j)] * wts[1][j];
                    }
                    acc += inner * wts[0][i];
                }
            }
            _ => {
                for i in 0..M {
                    for j in 0..M {
                        let row = (idx(0, i) * self.n + idx(1, j)) * self.n;
                        let mut inner = Complex64::new(0.0, 0.0);
                        for k in 0..M {
                            inner += values[row + idx(2, k)] * wts[2][k];
                        }
                        acc += inner * (wts[0][i] * wts[1][j]);
                    }
                }
            }
        }
        Some(acc)
    }
}

/// Parallel reduction of `f(0), ..., f(len-1)` over fixed-size chunks whose
/// partial results are combined in index order, so floating-point sums do not
/// depend on the thread schedule.
pub fn ordered_reduce<S: Send + Sync + Copy>(len: usize, zero: S, f: impl Fn(usize) -> S + Sync, add: impl Fn(S, S) -> S + Sync) -> S {
    const CHUNK: usize = 4096;
    let parts: Vec<S> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(len)).fold(zero, |acc, i| add(acc, f(i))))
        .collect();
    parts.into_iter().fold(zero, add)
}

/// [`ordered_reduce`] for plain sums.
pub fn ordered_sum<S: Send + Sync + Copy + std::ops::Add<Output = S>>(len: usize, zero: S, f: impl Fn(usize) -> S + Sync) -> S {
    ordered_reduce(len, zero, f, |a, b| a + b)
}

/// Forward and inverse transforms over all axes of a [`GridSpec`]. The
/// inverse is normalized so the round trip is the identity.
#[derive(Clone)]
pub struct FftPlan {
    spec: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("spec", &self.spec).finish()
    }
}

impl FftPlan {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            spec,
            fwd: planner.plan_fft_forward(spec.n),
            inv: planner.plan_fft_inverse(spec.n),
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.all_axes(data, &self.fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.all_axes(data, &self.inv);
        let s = 1.0 / self.spec.len() as f64;
        data.par_iter_mut().for_each(|c| *c *= s);
    }

    fn all_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.spec.len());
        for axis in 0..self.spec.d {
            self.axis(data, axis, fft);
        }
    }

    fn axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n;
        let stride = n.pow((self.spec.d - 1 - axis) as u32);
        let scratch_len = fft.get_inplace_scratch_len();
        if stride == 1 {
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, line| fft.process_with_scratch(line, scratch),
            );
            return;
        }
        // strided lines: gather in parallel, scatter back
        let block = n * stride;
        let nblocks = data.len() / block;
        let lines: Vec<Vec<Complex64>> = (0..nblocks * stride)
            .into_par_iter()
            .map_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, li| {
                    let (b, k) = (li / stride, li % stride);
                    let base = b * block + k;
                    let mut line: Vec<Complex64> = (0..n).map(|j| data[base + j * stride]).collect();
                    fft.process_with_scratch(&mut line, scratch);
                    line
                },
            )
            .collect();
        for (li, line) in lines.into_iter().enumerate() {
            let (b, k) = (li / stride, li % stride);
            let base = b * block + k;
            for (j, v) in line.into_iter().enumerate() {
                data[base + j * stride] = v;
            }
        }
    }
}
