//! One-step propagation engine shared by `evolve` and the record sampler.
//!
//! Strang arrangement: half local kick (potential phase and, for spinors, the
//! pointwise magnetic rotation), full kinetic update (diagonal in the
//! spectral basis, or per-axis Cayley solves for Crank–Nicolson), half local
//! kick. Every factor is unitary, so norms are conserved to roundoff.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};
use crate::potential::{PotentialSpec, BOX_WALL_CELLS, BOX_WALL_MIN};
use crate::spectral::SpectralEngine;
use crate::wavefunction::WaveFunction;

use super::crank_nicolson::{for_each_line, AxisCayley};
use super::{BField, MagneticSpec, Method};

pub(crate) struct Stepper {
    grid: Arc<Grid>,
    engine: SpectralEngine,
    method: Method,
    components: usize,
    masses: Vec<f64>,
    hbar: f64,
    potential_values: Vec<f64>,
    magnetic: Option<MagneticSpec>,
    cached_dt: f64,
    half_kick: Vec<Complex64>,
    kinetic_phase: Vec<Complex64>,
    /// Per (point, particle) 2x2 rotation for the half-step magnetic term.
    mag_rotations: Vec<[Complex64; 4]>,
    axis_solvers: Vec<AxisCayley>,
    scratch: Vec<Complex64>,
}

impl Stepper {
    pub fn for_state(
        psi: &WaveFunction,
        potential: &PotentialSpec,
        magnetic: Option<&MagneticSpec>,
        method: Method,
    ) -> Result<Self> {
        let grid = psi.grid().clone();
        if method == Method::SplitSpectral && !grid.spectral_ready() {
            return Err(Error::Config(
                "split-spectral stepping needs power-of-two points on every axis".into(),
            ));
        }
        if let Some(mag) = magnetic {
            mag.validate(&grid)?;
            if method == Method::CrankNicolson {
                return Err(Error::Config(
                    "magnetic coupling is only implemented for the spectral stepper".into(),
                ));
            }
            if mag.requires_spinor() && psi.components() != 1usize << grid.particle_count() {
                return Err(Error::Domain(format!(
                    "magnetic field coupling needs a 2^N-component spinor, got {} components",
                    psi.components()
                )));
            }
        }
        let sampled = potential.sample(&grid, psi.masses())?;
        if method == Method::SplitSpectral && grid.boundary() == Boundary::Box {
            ensure_confining_wall(&grid, sampled.values())?;
        }
        let engine = SpectralEngine::new(grid.clone());
        Ok(Self {
            grid,
            engine,
            method,
            components: psi.components(),
            masses: psi.masses().to_vec(),
            hbar: psi.hbar(),
            potential_values: sampled.into_values(),
            magnetic: magnetic.cloned(),
            cached_dt: f64::NAN,
            half_kick: Vec::new(),
            kinetic_phase: Vec::new(),
            mag_rotations: Vec::new(),
            axis_solvers: Vec::new(),
            scratch: Vec::new(),
        })
    }

    fn rebuild_for_dt(&mut self, dt: f64) {
        let hbar = self.hbar;
        self.half_kick = self
            .potential_values
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar)))
            .collect();
        match self.method {
            Method::SplitSpectral => {
                let grid = &self.grid;
                let dim = grid.dim();
                let a_offset: Option<&[f64]> = self
                    .magnetic
                    .as_ref()
                    .and_then(|m| m.vector_potential.as_deref());
                let charges: Option<&[f64]> =
                    self.magnetic.as_ref().map(|m| m.charges.as_slice());
                let mut multi = vec![0usize; dim];
                let mut phases = Vec::with_capacity(grid.len());
                for p in 0..grid.len() {
                    grid.multi_index(p, &mut multi);
                    let mut energy = 0.0;
                    for a in 0..dim {
                        let mut k = self.engine.wavenumbers(a)[multi[a]];
                        if let (Some(av), Some(e)) = (a_offset, charges) {
                            k -= e[grid.particle_of_axis(a)] * av[a];
                        }
                        let m = self.masses[grid.particle_of_axis(a)];
                        energy += hbar * hbar * k * k / (2.0 * m);
                    }
                    phases.push(Complex64::from_polar(1.0, -energy * dt / hbar));
                }
                self.kinetic_phase = phases;
            }
            Method::CrankNicolson => {
                self.axis_solvers = (0..self.grid.dim())
                    .map(|a| {
                        let h = self.grid.spacing(a);
                        let m = self.masses[self.grid.particle_of_axis(a)];
                        let beta = hbar * dt / (4.0 * m * h * h);
                        AxisCayley::new(self.grid.points()[a], beta, self.grid.boundary())
                    })
                    .collect();
            }
        }
        self.mag_rotations = match &self.magnetic {
            Some(mag) if mag.requires_spinor() => build_rotations(&self.grid, mag, dt, hbar),
            _ => Vec::new(),
        };
        self.cached_dt = dt;
    }

    fn apply_local_half(&self, amps: &mut [Complex64]) {
        let c = self.components;
        let n_particles = self.grid.particle_count();
        for (p, kick) in self.half_kick.iter().enumerate() {
            let spin = &mut amps[p * c..(p + 1) * c];
            for a in spin.iter_mut() {
                *a *= kick;
            }
            if !self.mag_rotations.is_empty() {
                for k in 0..n_particles {
                    let u = &self.mag_rotations[p * n_particles + k];
                    let bit = 1usize << k;
                    for s in 0..c {
                        if s & bit == 0 {
                            let s1 = s | bit;
                            let (a, b) = (spin[s], spin[s1]);
                            spin[s] = u[0] * a + u[1] * b;
                            spin[s1] = u[2] * a + u[3] * b;
                        }
                    }
                }
            }
        }
    }

    /// Advance amplitudes by one step of size `dt`, in place.
    pub fn step(&mut self, amps: &mut [Complex64], dt: f64) {
        if self.cached_dt.to_bits() != dt.to_bits() {
            self.rebuild_for_dt(dt);
        }
        self.apply_local_half(amps);
        match self.method {
            Method::SplitSpectral => {
                let c = self.components;
                self.engine.fft(amps, c);
                for (p, phase) in self.kinetic_phase.iter().enumerate() {
                    for a in &mut amps[p * c..(p + 1) * c] {
                        *a *= phase;
                    }
                }
                self.engine.ifft(amps, c);
            }
            Method::CrankNicolson => {
                let grid = self.grid.clone();
                let c = self.components;
                let mut scratch = std::mem::take(&mut self.scratch);
                for (a, solver) in self.axis_solvers.iter().enumerate() {
                    for_each_line(&grid, amps, c, a, |line| {
                        solver.step_line(line, &mut scratch);
                    });
                }
                self.scratch = scratch;
            }
        }
        self.apply_local_half(amps);
    }
}

fn ensure_confining_wall(grid: &Grid, sampled: &[f64]) -> Result<()> {
    let dim = grid.dim();
    let mut multi = vec![0usize; dim];
    for (p, &v) in sampled.iter().enumerate() {
        grid.multi_index(p, &mut multi);
        let in_wall = (0..dim)
            .any(|a| multi[a] < BOX_WALL_CELLS || multi[a] >= grid.points()[a] - BOX_WALL_CELLS);
        if in_wall && v < BOX_WALL_MIN {
            return Err(Error::Config(
                "box boundary without a confining wall in the sampled potential; \
                 use a structured potential kind or bake a wall into the table"
                    .into(),
            ));
        }
    }
    Ok(())
}

/// exp(−i·(dt/2)·μ_k·B(q_k)·σ/ħ) for every (point, particle).
fn build_rotations(grid: &Grid, mag: &MagneticSpec, dt: f64, hbar: f64) -> Vec<[Complex64; 4]> {
    let n_particles = grid.particle_count();
    let d = grid.dims_per_particle();
    let len = grid.len();
    let mut q = vec![0.0; grid.dim()];
    let mut out = Vec::with_capacity(len * n_particles);
    for p in 0..len {
        grid.point_coords(p, &mut q);
        for k in 0..n_particles {
            let b = match &mag.field {
                BField::Zero => [0.0; 3],
                BField::Uniform(b) => *b,
                BField::LinearAlongAxis { axis, slope } => {
                    let coord = q[k * d + axis];
                    [0.0, 0.0, slope * coord]
                }
            };
            let w = [
                mag.moments[k] * b[0] * dt / (2.0 * hbar),
                mag.moments[k] * b[1] * dt / (2.0 * hbar),
                mag.moments[k] * b[2] * dt / (2.0 * hbar),
            ];
            let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            let u = if theta == 0.0 {
                [
                    Complex64::new(1.0, 0.0),
                    Complex64::default(),
                    Complex64::default(),
                    Complex64::new(1.0, 0.0),
                ]
            } else {
                let (nx, ny, nz) = (w[0] / theta, w[1] / theta, w[2] / theta);
                let (c, s) = (theta.cos(), theta.sin());
                [
                    Complex64::new(c, -s * nz),
                    Complex64::new(-s * ny, -s * nx),
                    Complex64::new(s * ny, -s * nx),
                    Complex64::new(c, s * nz),
                ]
            };
            out.push(u);
        }
    }
    out
}
