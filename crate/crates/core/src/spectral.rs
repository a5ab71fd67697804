//! Spectral machinery: n-dimensional FFT on the periodic enclosing box and
//! discrete sine transforms diagonalizing the Dirichlet Laplacian.
//!
//! FFT convention (single source of truth): the forward transform applies the
//! kernel `exp(-i x . xi)` unnormalized, the inverse carries `1/M^n`. On box
//! nodes `x_j = x0 + j s` and frequencies `xi_k = pi * signed(k)` this means
//! `F f(xi_k) = s^n * exp(-i x0 . xi_k) * DFT_k(f)`.

use crate::field::{BoxField, BoxGrid, C64, ZERO};
use crate::grid::GridSpec;
use crate::par;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Cached FFT plans for one enclosing box. Read-only after construction;
/// safe to share across threads.
pub struct SpectralBox {
    pub boxg: BoxGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralBox {
    pub fn new(boxg: &BoxGrid) -> Self {
        let mut planner = FftPlanner::new();
        SpectralBox {
            boxg: *boxg,
            fwd: planner.plan_fft_forward(boxg.m),
            inv: planner.plan_fft_inverse(boxg.m),
        }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::new(&BoxGrid::enclosing(grid))
    }

    /// In-place unnormalized forward DFT along every axis.
    pub fn fft_forward(&self, values: &mut [C64]) {
        self.transform(values, true);
    }

    /// In-place inverse DFT with the `1/M^n` normalization.
    pub fn fft_inverse(&self, values: &mut [C64]) {
        self.transform(values, false);
        let scale = 1.0 / (self.boxg.len() as f64);
        for v in values.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, values: &mut [C64], forward: bool) {
        let n = self.boxg.grid.n;
        let m = self.boxg.m;
        let plan = if forward { &self.fwd } else { &self.inv };
        for axis in 0..n {
            let inner: usize = m.pow((n - 1 - axis) as u32);
            let block = m * inner;
            par::for_each_chunk_mut(values, block, |_, sl| {
                let mut lane = vec![ZERO; m];
                let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
                for j in 0..inner {
                    for k in 0..m {
                        lane[k] = sl[j + k * inner];
                    }
                    plan.process_with_scratch(&mut lane, &mut scratch);
                    for k in 0..m {
                        sl[j + k * inner] = lane[k];
                    }
                }
            });
        }
    }

    /// Forward transform of a box field, returned as DFT bins.
    pub fn dft(&self, f: &BoxField) -> Vec<C64> {
        let mut v = f.values.clone();
        self.fft_forward(&mut v);
        v
    }

    /// Inverse transform of DFT bins into a box field.
    pub fn idft(&self, mut bins: Vec<C64>) -> BoxField {
        self.fft_inverse(&mut bins);
        BoxField {
            boxg: self.boxg,
            values: bins,
        }
    }

    /// `|xi|^2` of a DFT bin multi-index.
    #[inline]
    pub fn freq_norm_sq(&self, kidx: &[usize]) -> f64 {
        kidx.iter()
            .map(|&k| {
                let x = self.boxg.freq(k);
                x * x
            })
            .sum()
    }

    /// Spectral partial derivative `d/dx_a` of a periodic box field.
    pub fn spectral_partial(&self, f: &BoxField, axis: usize) -> BoxField {
        let mut bins = self.dft(f);
        let bx = self.boxg;
        let n = bx.grid.n;
        par::for_each_chunk_mut(&mut bins, 1 << 12, |start, sl| {
            let mut kidx = vec![0usize; n];
            for (t, v) in sl.iter_mut().enumerate() {
                bx.decode(start + t, &mut kidx);
                let xi = bx.freq(kidx[axis]);
                *v *= C64::new(0.0, xi);
            }
        });
        self.idft(bins)
    }

    /// Spectral Laplacian of a periodic box field.
    pub fn spectral_laplacian(&self, f: &BoxField) -> BoxField {
        let mut bins = self.dft(f);
        let bx = self.boxg;
        let n = bx.grid.n;
        par::for_each_chunk_mut(&mut bins, 1 << 12, |start, sl| {
            let mut kidx = vec![0usize; n];
            for (t, v) in sl.iter_mut().enumerate() {
                bx.decode(start + t, &mut kidx);
                *v *= -self.freq_norm_sq(&kidx);
            }
        });
        self.idft(bins)
    }

    /// Continuum-convention Fourier samples `F f(xi_k)` for every bin:
    /// `s^n * exp(-i x0 . xi_k) * DFT_k`.
    pub fn fourier_samples(&self, f: &BoxField) -> Vec<C64> {
        let mut bins = self.dft(f);
        self.attach_phase(&mut bins, -1.0);
        let sn = self.boxg.grid.spacing.powi(self.boxg.grid.n as i32);
        for v in &mut bins {
            *v *= sn;
        }
        bins
    }

    /// Rebuild a box field from continuum-convention Fourier samples.
    pub fn field_from_fourier_samples(&self, samples: &[C64]) -> BoxField {
        let sn = self.boxg.grid.spacing.powi(self.boxg.grid.n as i32);
        let mut bins: Vec<C64> = samples.iter().map(|v| v / sn).collect();
        self.attach_phase(&mut bins, 1.0);
        self.idft(bins)
    }

    /// Multiply bin `k` by `exp(sign * i * x0 . xi_k)`.
    fn attach_phase(&self, bins: &mut [C64], sign: f64) {
        let bx = self.boxg;
        let n = bx.grid.n;
        let x0 = bx.origin();
        par::for_each_chunk_mut(bins, 1 << 12, |start, sl| {
            let mut kidx = vec![0usize; n];
            for (t, v) in sl.iter_mut().enumerate() {
                bx.decode(start + t, &mut kidx);
                let dot: f64 = kidx.iter().map(|&k| x0 * bx.freq(k)).sum();
                *v *= C64::from_polar(1.0, sign * dot);
            }
        });
    }
}

/// Dense discrete sine transform of length `pts`:
/// `S[k][i] = sin(pi (k+1)(i+1) / (pts+1))`, `S^2 = (pts+1)/2 * Id`.
#[derive(Debug, Clone)]
pub struct SineTransform {
    pub pts: usize,
    mat: Vec<f64>,
}

impl SineTransform {
    pub fn new(pts: usize) -> Self {
        let mut mat = vec![0.0; pts * pts];
        let denom = (pts + 1) as f64;
        for k in 0..pts {
            for i in 0..pts {
                mat[k * pts + i] =
                    (std::f64::consts::PI * (k as f64 + 1.0) * (i as f64 + 1.0) / denom).sin();
            }
        }
        SineTransform { pts, mat }
    }

    /// Dirichlet Laplacian eigenvalue magnitude of 1-D mode `k` at mesh
    /// width `spacing`: `4 sin^2(pi (k+1) / (2 (pts+1))) / spacing^2`.
    pub fn eigenvalue(&self, k: usize, spacing: f64) -> f64 {
        let t = (std::f64::consts::PI * (k as f64 + 1.0) / (2.0 * (self.pts as f64 + 1.0))).sin();
        4.0 * t * t / (spacing * spacing)
    }

    /// Apply `S` (synthesis direction) along `axis` of a tensor of shape
    /// `dims` stored row-major.
    pub fn apply_axis(&self, values: &mut [C64], dims: &[usize], axis: usize) {
        let m = dims[axis];
        debug_assert_eq!(m, self.pts);
        let inner: usize = dims[axis + 1..].iter().product();
        let block = m * inner;
        let mat = &self.mat;
        par::for_each_chunk_mut(values, block, |_, sl| {
            let mut lane = vec![ZERO; m];
            for j in 0..inner {
                for (k, l) in lane.iter_mut().enumerate() {
                    *l = sl[j + k * inner];
                }
                for k in 0..m {
                    let row = &mat[k * m..(k + 1) * m];
                    let mut acc = ZERO;
                    for (i, &w) in row.iter().enumerate() {
                        acc += w * lane[i];
                    }
                    sl[j + k * inner] = acc;
                }
            }
        });
    }

    /// Full analysis transform over all axes: coefficients of the tensor
    /// sine basis (applies `S * 2/(pts+1)` per axis).
    pub fn analysis(&self, values: &mut [C64], dims: &[usize]) {
        let scale = 2.0 / (self.pts as f64 + 1.0);
        for axis in 0..dims.len() {
            self.apply_axis(values, dims, axis);
        }
        let total = scale.powi(dims.len() as i32);
        for v in values.iter_mut() {
            *v *= total;
        }
    }

    /// Full synthesis transform over all axes.
    pub fn synthesis(&self, values: &mut [C64], dims: &[usize]) {
        for axis in 0..dims.len() {
            self.apply_axis(values, dims, axis);
        }
    }
}
