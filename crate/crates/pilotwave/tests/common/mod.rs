//! Shared oracles for the integration tests. Everything here is deliberately
//! independent of the crate's spectral engine and steppers: closed-form
//! wave functions, finite-difference derivatives, and scalar width/trajectory
//! laws that the implementation is checked against.
#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64;
use pilotwave::{Boundary, Grid, WaveFunction};

/// Width law of the freely dispersing Gaussian: σ²(t) = σ0² + (ħt/2mσ0)².
pub fn free_gaussian_width_sq(sigma0: f64, t: f64, mass: f64, hbar: f64) -> f64 {
    let s = hbar * t / (2.0 * mass * sigma0);
    sigma0 * sigma0 + s * s
}

/// Guidance-law trajectory of the free Gaussian released at rest:
/// pure scaling flow Q(t) = Q(0)·σ(t)/σ0.
pub fn free_gaussian_trajectory(q0: f64, sigma0: f64, t: f64, mass: f64, hbar: f64) -> f64 {
    q0 * (free_gaussian_width_sq(sigma0, t, mass, hbar) / (sigma0 * sigma0)).sqrt()
}

/// Velocity field of that flow: v(q, t) = q·α²t/σ(t)² with α = ħ/(2mσ0).
pub fn free_gaussian_velocity(q: f64, sigma0: f64, t: f64, mass: f64, hbar: f64) -> f64 {
    let alpha = hbar / (2.0 * mass * sigma0);
    q * alpha * alpha * t / free_gaussian_width_sq(sigma0, t, mass, hbar)
}

/// Coherent state of the harmonic oscillator released at `q_amplitude` with
/// zero momentum: a rigidly oscillating Gaussian with the classical action
/// and ground-state phases attached.
pub fn coherent_state(
    grid: &Arc<Grid>,
    q_amplitude: f64,
    omega: f64,
    mass: f64,
    hbar: f64,
    t: f64,
) -> WaveFunction {
    let qc = q_amplitude * (omega * t).cos();
    let pc = -mass * omega * q_amplitude * (omega * t).sin();
    let action = -mass * omega * q_amplitude * q_amplitude / 4.0 * (2.0 * omega * t).sin();
    let norm = (mass * omega / (std::f64::consts::PI * hbar)).powf(0.25);
    let amps: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let x = grid.axis_coord(0, i);
            let dxc = x - qc;
            let modulus = norm * (-mass * omega * dxc * dxc / (2.0 * hbar)).exp();
            let phase = (pc * dxc + action - hbar * omega * t / 2.0) / hbar;
            Complex64::from_polar(modulus, phase)
        })
        .collect();
    WaveFunction::new(grid.clone(), 1, amps, vec![mass], hbar).unwrap()
}

/// Exact free evolution of an arbitrary 1-D state via one dense Fourier
/// integral (O(n²) DFT, no shared code with the crate's FFT engine).
pub fn free_evolution_dense(psi: &WaveFunction, t: f64) -> WaveFunction {
    assert_eq!(psi.components(), 1);
    let grid = psi.grid();
    assert_eq!(grid.dim(), 1);
    let n = grid.len();
    let extent = grid.extents()[0];
    let mass = psi.masses()[0];
    let hbar = psi.hbar();
    // Forward DFT.
    let mut hat = vec![Complex64::default(); n];
    for (k, h) in hat.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for j in 0..n {
            let angle = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            acc += psi.amplitudes()[j] * Complex64::from_polar(1.0, angle);
        }
        *h = acc;
    }
    // Kinetic phase and inverse DFT.
    let mut out = vec![Complex64::default(); n];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for (k, h) in hat.iter().enumerate() {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let wave = 2.0 * std::f64::consts::PI * kk / extent;
            let energy = hbar * hbar * wave * wave / (2.0 * mass);
            let angle = 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64
                - energy * t / hbar;
            acc += h * Complex64::from_polar(1.0 / n as f64, angle);
        }
        *o = acc;
    }
    WaveFunction::new(grid.clone(), 1, out, psi.masses().to_vec(), hbar).unwrap()
}

/// Centered finite-difference gradient of complex samples on a periodic 1-D
/// grid (2nd order; independent of the spectral engine).
pub fn fd_gradient_periodic(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = values.len();
    (0..n)
        .map(|i| (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * h))
        .collect()
}

/// Residual of the time-dependent Schrödinger equation for a closed-form
/// family ψ(t): max |iħ·∂ψ/∂t − (−ħ²/2m·∂²ψ/∂x² + V·ψ)| over interior
/// points, evaluated with centered finite differences. Used to self-check
/// analytic oracles before they are trusted.
pub fn schrodinger_residual_1d(
    psi_at: impl Fn(f64) -> WaveFunction,
    potential_at: impl Fn(f64) -> f64,
    t: f64,
    dt: f64,
) -> f64 {
    let minus = psi_at(t - dt);
    let base = psi_at(t);
    let plus = psi_at(t + dt);
    let grid = base.grid();
    let n = grid.len();
    let h = grid.spacing(0);
    let mass = base.masses()[0];
    let hbar = base.hbar();
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let x = grid.axis_coord(0, i);
        let dpsi_dt = (plus.amplitudes()[i] - minus.amplitudes()[i]) / (2.0 * dt);
        let lap = (base.amplitudes()[i + 1] - 2.0 * base.amplitudes()[i]
            + base.amplitudes()[i - 1])
            / (h * h);
        let lhs = Complex64::new(0.0, hbar) * dpsi_dt;
        let rhs = -hbar * hbar / (2.0 * mass) * lap + potential_at(x) * base.amplitudes()[i];
        let r = (lhs - rhs).norm() / base.amplitudes()[i].norm().max(1e-12);
        if base.amplitudes()[i].norm() > 1e-6 && r > worst {
            worst = r;
        }
    }
    worst
}

/// L² distance between two states on the same grid.
pub fn l2_distance(a: &WaveFunction, b: &WaveFunction) -> f64 {
    let cell = a.grid().cell_volume();
    (a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        * cell)
        .sqrt()
}

/// L² distance after optimal global phase alignment:
/// min_θ ‖e^{iθ}·a − b‖.
pub fn gauge_aligned_l2(a: &WaveFunction, b: &WaveFunction) -> f64 {
    let overlap: Complex64 = b
        .amplitudes()
        .iter()
        .zip(a.amplitudes())
        .map(|(y, x)| y.conj() * x)
        .sum();
    let theta = -overlap.arg();
    let cell = a.grid().cell_volume();
    (a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x * Complex64::from_polar(1.0, theta) - y).norm_sqr())
        .sum::<f64>()
        * cell)
        .sqrt()
}

/// ⟨q²⟩ − ⟨q⟩² of the 1-D density.
pub fn measured_width_sq(psi: &WaveFunction) -> f64 {
    let grid = psi.grid();
    let density = psi.density();
    let cell = grid.cell_volume();
    let mut mean = 0.0;
    let mut second = 0.0;
    for i in 0..grid.len() {
        let x = grid.axis_coord(0, i);
        mean += x * density.values()[i] * cell;
        second += x * x * density.values()[i] * cell;
    }
    second - mean * mean
}

pub fn line_grid(n: usize, extent: f64) -> Arc<Grid> {
    Arc::new(pilotwave::make_grid(1, 1, vec![n], vec![extent], Boundary::Periodic).unwrap())
}

pub fn box_grid(n: usize, extent: f64) -> Arc<Grid> {
    Arc::new(pilotwave::make_grid(1, 1, vec![n], vec![extent], Boundary::Box).unwrap())
}
