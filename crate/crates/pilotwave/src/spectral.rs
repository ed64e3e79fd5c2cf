//! FFT-based differentiation and the diagonal kinetic propagator.
//!
//! Periodic grids use exact spectral derivatives; box grids fall back to
//! 4th-order centered stencils with zero ghost values (wave-derived fields
//! vanish at the confining walls). All transforms act on flat arrays holding
//! `components` interleaved complex values per lattice point.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::field::{ScalarField, VectorField};
use crate::grid::{Boundary, Grid};

pub struct SpectralEngine {
    grid: Arc<Grid>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Angular wavenumbers per axis in FFT index order.
    wavenumbers: Vec<Vec<f64>>,
}

impl SpectralEngine {
    pub fn new(grid: Arc<Grid>) -> Self {
        let mut planner = FftPlanner::new();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        let mut wavenumbers = Vec::new();
        for a in 0..grid.dim() {
            let n = grid.points()[a];
            forward.push(planner.plan_fft(n, FftDirection::Forward));
            inverse.push(planner.plan_fft(n, FftDirection::Inverse));
            let extent = grid.extents()[a];
            let k: Vec<f64> = (0..n)
                .map(|j| {
                    let j = if j <= n / 2 { j as isize } else { j as isize - n as isize };
                    2.0 * std::f64::consts::PI * j as f64 / extent
                })
                .collect();
            wavenumbers.push(k);
        }
        Self {
            grid,
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// FFT along one axis, all lines, all components. `scale` multiplies every
    /// output element (used to fold in the 1/n of the inverse transform).
    ///
    /// Flat layout: slot = point*C + c with row-major points, so a line along
    /// `axis` has slot stride `C * prod(points after axis)`.
    fn transform_axis(
        &self,
        data: &mut [Complex64],
        components: usize,
        axis: usize,
        forward: bool,
        scale: f64,
    ) {
        let n = self.grid.points()[axis];
        let plan = if forward {
            &self.forward[axis]
        } else {
            &self.inverse[axis]
        };
        let after: usize = self.grid.points()[axis + 1..].iter().product();
        let stride = components * after;
        let lines = data.len() / n;
        let mut buf: Vec<Complex64> = vec![Complex64::default(); n];
        for line in 0..lines {
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * stride * n + inner;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = data[base + i * stride];
            }
            plan.process(&mut buf);
            for (i, b) in buf.iter().enumerate() {
                data[base + i * stride] = if scale == 1.0 { *b } else { *b * scale };
            }
        }
    }

    /// Full D-dimensional forward FFT.
    pub fn fft(&self, data: &mut [Complex64], components: usize) {
        for a in 0..self.grid.dim() {
            self.transform_axis(data, components, a, true, 1.0);
        }
    }

    /// Full D-dimensional inverse FFT (normalized).
    pub fn ifft(&self, data: &mut [Complex64], components: usize) {
        for a in 0..self.grid.dim() {
            let scale = 1.0 / self.grid.points()[a] as f64;
            self.transform_axis(data, components, a, false, scale);
        }
    }

    /// Spectral ∂/∂axis of interleaved complex data (periodic grids).
    pub fn derivative_axis(
        &self,
        data: &[Complex64],
        components: usize,
        axis: usize,
    ) -> Vec<Complex64> {
        let mut hat = data.to_vec();
        self.transform_axis(&mut hat, components, axis, true, 1.0);
        let n = self.grid.points()[axis];
        let k = &self.wavenumbers[axis];
        let after: usize = self.grid.points()[axis + 1..].iter().product();
        let stride = components * after;
        // Zero the Nyquist mode of odd derivatives to keep real data real.
        let nyquist = if n % 2 == 0 { Some(n / 2) } else { None };
        for (slot, v) in hat.iter_mut().enumerate() {
            let j = (slot / stride) % n;
            *v = if Some(j) == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k[j]) * *v
            };
        }
        let scale = 1.0 / n as f64;
        self.transform_axis(&mut hat, components, axis, false, scale);
        hat
    }

    /// ∂/∂axis of interleaved complex data, spectral on periodic grids and
    /// 4th-order stencil (zero ghosts) on box grids.
    pub fn derivative_axis_aware(
        &self,
        data: &[Complex64],
        components: usize,
        axis: usize,
    ) -> Vec<Complex64> {
        match self.grid.boundary() {
            Boundary::Periodic => self.derivative_axis(data, components, axis),
            Boundary::Box => {
                let n = self.grid.points()[axis];
                let after: usize = self.grid.points()[axis + 1..].iter().product();
                let stride = components * after;
                let h = self.grid.spacing(axis);
                let mut out = vec![Complex64::default(); data.len()];
                for (slot, o) in out.iter_mut().enumerate() {
                    let base_i = (slot / stride) % n;
                    let f = |off: isize| -> Complex64 {
                        let j = base_i as isize + off;
                        if j < 0 || j >= n as isize {
                            Complex64::default()
                        } else {
                            data[(slot as isize + off * stride as isize) as usize]
                        }
                    };
                    *o = (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h);
                }
                out
            }
        }
    }

    /// Gradient of a real scalar field: spectral on periodic grids, 4th-order
    /// stencil on box grids.
    pub fn gradient_scalar(&self, field: &ScalarField) -> VectorField {
        let dim = self.grid.dim();
        let len = self.grid.len();
        let mut out = VectorField::zeros(self.grid.clone());
        match self.grid.boundary() {
            Boundary::Periodic => {
                let data: Vec<Complex64> =
                    field.values().iter().map(|&r| Complex64::new(r, 0.0)).collect();
                for a in 0..dim {
                    let da = self.derivative_axis(&data, 1, a);
                    let vals = out.values_mut();
                    for p in 0..len {
                        vals[p * dim + a] = da[p].re;
                    }
                }
            }
            Boundary::Box => {
                for a in 0..dim {
                    let da = stencil_derivative(&self.grid, field.values(), a, 1);
                    let vals = out.values_mut();
                    for p in 0..len {
                        vals[p * dim + a] = da[p];
                    }
                }
            }
        }
        out
    }

    /// Laplacian of a real scalar field over `axes` (all axes when `None`).
    pub fn laplacian_scalar(&self, field: &ScalarField, axes: Option<&[usize]>) -> ScalarField {
        let all: Vec<usize> = (0..self.grid.dim()).collect();
        let axes = axes.unwrap_or(&all);
        let len = self.grid.len();
        let mut acc = vec![0.0; len];
        match self.grid.boundary() {
            Boundary::Periodic => {
                let mut hat: Vec<Complex64> =
                    field.values().iter().map(|&r| Complex64::new(r, 0.0)).collect();
                self.fft(&mut hat, 1);
                let mut multi = vec![0usize; self.grid.dim()];
                for p in 0..len {
                    self.grid.multi_index(p, &mut multi);
                    let mut k2 = 0.0;
                    for &a in axes {
                        let k = self.wavenumbers[a][multi[a]];
                        k2 += k * k;
                    }
                    hat[p] *= -k2;
                }
                self.ifft(&mut hat, 1);
                for p in 0..len {
                    acc[p] = hat[p].re;
                }
            }
            Boundary::Box => {
                for &a in axes {
                    let da = stencil_derivative(&self.grid, field.values(), a, 2);
                    for p in 0..len {
                        acc[p] += da[p];
                    }
                }
            }
        }
        ScalarField::new(self.grid.clone(), acc).expect("shape by construction")
    }

    /// Divergence of a real vector field.
    pub fn divergence(&self, field: &VectorField) -> ScalarField {
        let dim = self.grid.dim();
        let len = self.grid.len();
        let mut acc = vec![0.0; len];
        for a in 0..dim {
            let comp: Vec<f64> = (0..len).map(|p| field.values()[p * dim + a]).collect();
            match self.grid.boundary() {
                Boundary::Periodic => {
                    let data: Vec<Complex64> =
                        comp.iter().map(|&r| Complex64::new(r, 0.0)).collect();
                    let da = self.derivative_axis(&data, 1, a);
                    for p in 0..len {
                        acc[p] += da[p].re;
                    }
                }
                Boundary::Box => {
                    let da = stencil_derivative(&self.grid, &comp, a, 1);
                    for p in 0..len {
                        acc[p] += da[p];
                    }
                }
            }
        }
        ScalarField::new(self.grid.clone(), acc).expect("shape by construction")
    }
}

/// 4th-order centered finite-difference derivative along `axis` with zero
/// ghost cells; `order` is 1 (gradient) or 2 (Laplacian).
fn stencil_derivative(grid: &Grid, values: &[f64], axis: usize, order: usize) -> Vec<f64> {
    let n = grid.points()[axis];
    let h = grid.spacing(axis);
    let after: usize = grid.points()[axis + 1..].iter().product();
    let len = grid.len();
    let mut out = vec![0.0; len];
    for p in 0..len {
        let base_i = (p / after) % n;
        let f = |off: isize| -> f64 {
            let j = base_i as isize + off;
            if j < 0 || j >= n as isize {
                0.0
            } else {
                values[(p as isize + off * after as isize) as usize]
            }
        };
        out[p] = match order {
            1 => (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h),
            2 => (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) / (12.0 * h * h),
            _ => unreachable!("only first and second derivatives are used"),
        };
    }
    out
}
