//! The Lagrangian particle method: propagate an ensemble of configuration
//! points under −∇(V + V_qu[√ρ̂]), where ρ̂ is a kernel density estimate of
//! the ensemble itself, then recover the wave function up to a global phase
//! from the density and the scattered velocities.
//!
//! The force evaluation (density build, Laplacian, gradient) is a parallel
//! map over grid points and the point update a parallel map over ensemble
//! indices; the two phases alternate inside every velocity-Verlet step.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_node_epsilon, Mask, ScalarField, VectorField, DEFAULT_NODE_EPSILON};
use crate::grid::{Boundary, Grid};
use crate::guidance::Interpolation;
use crate::parallel;
use crate::potential::PotentialSpec;
use crate::quantum_potential::{quantum_potential_of_modulus, stencil_gradient};
use crate::spectral::SpectralEngine;
use crate::trajectory::{sample_initial, velocities_at};
use crate::wavefunction::WaveFunction;

/// Ensemble state of the particle method at one instant.
#[derive(Clone, Debug)]
pub struct QtmState {
    /// Flat n×D configuration points.
    pub points: Vec<f64>,
    /// Flat n×D velocities.
    pub velocities: Vec<f64>,
    pub time: f64,
    pub bandwidth: f64,
    pub masses: Vec<f64>,
    pub hbar: f64,
}

impl QtmState {
    pub fn len(&self, dim: usize) -> usize {
        self.points.len() / dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// h = σ̂ · n^(−1/(D+4)) from the per-axis sample deviation.
    Deviation,
    /// Fixed bandwidth in length units.
    Fixed { value: f64 },
}

/// How the initial ensemble realizes |ψ0|².
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Equal-mass quantile placement (1-D): the empirical measure matches ρ0
    /// to O(1/n) and the kernel smoothing wipes out the quantization ripple,
    /// so the force field is essentially noise-free. Falls back to `Random`
    /// above one dimension.
    Stratified,
    /// Seeded Born-density draws (the trajectory-engine sampler).
    Random,
}

#[derive(Clone, Copy, Debug)]
pub struct QtmOptions {
    pub bandwidth: BandwidthRule,
    pub node_epsilon: f64,
    /// Sharpen the gridded estimate by dividing out the kernel transform in
    /// k-space (tapered); removes the O(h²) smoothing bias at the cost of
    /// some noise amplification.
    pub deconvolve: bool,
    pub placement: Placement,
    /// Instability guard: abort when ‖force‖ exceeds this at more than 1% of
    /// the ensemble.
    pub force_cap: f64,
    /// Relative density level below which the force is zeroed (see the trust
    /// window in the stepper).
    pub force_trust_epsilon: f64,
    pub interpolation: Interpolation,
}

impl Default for QtmOptions {
    fn default() -> Self {
        Self {
            bandwidth: BandwidthRule::Deviation,
            node_epsilon: DEFAULT_NODE_EPSILON,
            deconvolve: false,
            placement: Placement::Stratified,
            force_cap: 1e3,
            force_trust_epsilon: 1e-3,
            interpolation: Interpolation::Multilinear,
        }
    }
}

/// Deterministic equal-mass placement along the 1-D Born density.
fn stratified_points(psi0: &WaveFunction, n: usize) -> Vec<f64> {
    let grid = psi0.grid();
    let density = psi0.density();
    let h = grid.spacing(0);
    let cell_mass: Vec<f64> = density.values().iter().map(|&r| r * h).collect();
    let total: f64 = cell_mass.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut cell = 0usize;
    let mut cdf_before = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64 * total;
        while cell + 1 < cell_mass.len() && cdf_before + cell_mass[cell] < u {
            cdf_before += cell_mass[cell];
            cell += 1;
        }
        let frac = ((u - cdf_before) / cell_mass[cell]).clamp(0.0, 1.0);
        out.push(grid.axis_coord(0, cell) + (frac - 0.5) * h);
    }
    out
}

/// Stability-bounded step size for the particle method: the kernel density
/// supports quantum-pressure modes up to ω ≈ ħπ²/(2m·h²), and velocity
/// Verlet needs ω·dt < 2. A 4x safety margin gives dt = 0.1·m·h²/ħ.
pub fn suggested_qtm_dt(bandwidth: f64, mass_min: f64, hbar: f64) -> f64 {
    0.1 * mass_min * bandwidth * bandwidth / hbar
}

/// Deviation-rule bandwidth for a flat point set.
pub fn deviation_bandwidth(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    let mut sigma_sum = 0.0;
    for a in 0..dim {
        let mean: f64 = points.iter().skip(a).step_by(dim).sum::<f64>() / n as f64;
        let var: f64 = points
            .iter()
            .skip(a)
            .step_by(dim)
            .map(|&x| (x - mean) * (x - mean))
            .sum::<f64>()
            / n as f64;
        sigma_sum += var.sqrt();
    }
    let sigma = sigma_sum / dim as f64;
    sigma * (n as f64).powf(-1.0 / (dim as f64 + 4.0))
}

/// Gaussian kernel density estimate of the points on the grid, normalized to
/// unit integral and floored to stay strictly positive. Periodic grids use
/// minimum-image separations.
pub fn estimate_density(
    points: &[f64],
    bandwidth: f64,
    grid: &Arc<Grid>,
    deconvolve: bool,
) -> Result<ScalarField> {
    let dim = grid.dim();
    if points.is_empty() || points.len() % dim != 0 {
        return Err(Error::Domain(format!(
            "points must hold a positive multiple of D={dim} coordinates"
        )));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Domain("bandwidth must be positive".into()));
    }
    let min_h = (0..dim).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    if bandwidth < min_h / 4.0 {
        return Err(Error::Config(format!(
            "bandwidth {bandwidth} under-resolves the grid (spacing {min_h})"
        )));
    }
    let n = points.len() / dim;
    let periodic = grid.boundary() == Boundary::Periodic;
    let cut = 8.0 * bandwidth;
    let cut2 = cut * cut;
    let inv_2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let extents = grid.extents().to_vec();
    let vals: Vec<f64> = if dim == 1 {
        // Sorted-window sweep: only points within the kernel cutoff are
        // touched, which keeps long runs at small dt affordable.
        let mut sorted: Vec<f64> = points.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let extent = extents[0];
        let kernel_sum = |x: f64, sorted: &[f64]| -> f64 {
            let mut acc = 0.0;
            let mut window = |lo: f64, hi: f64, shift: f64| {
                let start = sorted.partition_point(|&q| q < lo);
                for &q in &sorted[start..] {
                    if q > hi {
                        break;
                    }
                    let d = x - (q + shift);
                    acc += (-d * d * inv_2h2).exp();
                }
            };
            window(x - cut, x + cut, 0.0);
            if periodic {
                // Images across the wrap seam.
                if x - cut < sorted.first().copied().unwrap_or(0.0) {
                    window(x - cut + extent, x + cut + extent, -extent);
                }
                if x + cut > sorted.last().copied().unwrap_or(0.0) {
                    window(x - cut - extent, x + cut - extent, extent);
                }
            }
            acc
        };
        parallel::map_indexed(grid.len(), |p| kernel_sum(grid.axis_coord(0, p), &sorted))
    } else {
        parallel::map_indexed(grid.len(), |p| {
            let mut x = [0.0f64; 3];
            grid.point_coords(p, &mut x[..dim]);
            let mut acc = 0.0;
            'pts: for i in 0..n {
                let mut r2 = 0.0;
                for a in 0..dim {
                    let mut d = x[a] - points[i * dim + a];
                    if periodic {
                        d -= (d / extents[a]).round() * extents[a];
                    }
                    r2 += d * d;
                    if r2 > cut2 {
                        continue 'pts;
                    }
                }
                acc += (-r2 * inv_2h2).exp();
            }
            acc
        })
    };
    let mut field = ScalarField::new(grid.clone(), vals)?;
    if deconvolve {
        sharpen(&mut field, bandwidth);
    }
    let floor = 1e-14 * field.max().max(f64::MIN_POSITIVE);
    let integral_guard = field.integral();
    if !(integral_guard > 0.0) {
        return Err(Error::Degenerate("density estimate vanished".into()));
    }
    for v in field.values_mut() {
        *v = v.max(floor);
    }
    let scale = 1.0 / field.integral();
    field.values_mut().iter_mut().for_each(|v| *v *= scale);
    Ok(field)
}

/// Divide out the kernel transform e^{−k²h²/2} with a super-Gaussian taper so
/// the amplification stays bounded.
fn sharpen(field: &mut ScalarField, bandwidth: f64) {
    let grid = field.grid().clone();
    let engine = SpectralEngine::new(grid.clone());
    let mut hat: Vec<Complex64> = field
        .values()
        .iter()
        .map(|&r| Complex64::new(r, 0.0))
        .collect();
    engine.fft(&mut hat, 1);
    // Smooth states carry no signal beyond k² ≈ few/σ² ≪ 2/h², so capping the
    // amplification at e removes the O(h²) bias without waking the noise
    // floor at higher modes.
    let k_cut2 = 4.0 / (bandwidth * bandwidth);
    let mut multi = vec![0usize; grid.dim()];
    for (p, v) in hat.iter_mut().enumerate() {
        grid.multi_index(p, &mut multi);
        let mut k2 = 0.0;
        for a in 0..grid.dim() {
            let k = engine.wavenumbers(a)[multi[a]];
            k2 += k * k;
        }
        let window = (-(k2 / k_cut2).powi(4)).exp();
        *v *= (0.5 * k2 * bandwidth * bandwidth).min(1.0).exp() * window;
    }
    engine.ifft(&mut hat, 1);
    for (v, h) in field.values_mut().iter_mut().zip(&hat) {
        *v = h.re;
    }
}

/// Draw the ensemble from |ψ0|² and attach the guidance velocities.
pub fn qtm_init(psi0: &WaveFunction, n: usize, seed: u64, opts: QtmOptions) -> Result<QtmState> {
    if n < 100 {
        return Err(Error::Domain(format!(
            "the particle method needs n >= 100 points, got {n}"
        )));
    }
    check_node_epsilon(opts.node_epsilon)?;
    let dim = psi0.grid().dim();
    let points = if opts.placement == Placement::Stratified && dim == 1 {
        stratified_points(psi0, n)
    } else {
        sample_initial(psi0, n, seed)?
    };
    let velocities = velocities_at(psi0, &points, opts.interpolation, opts.node_epsilon)?;
    let bandwidth = match opts.bandwidth {
        BandwidthRule::Deviation => deviation_bandwidth(&points, dim),
        BandwidthRule::Fixed { value } => value,
    };
    if !(bandwidth > 0.0) {
        return Err(Error::Domain("bandwidth must be positive".into()));
    }
    Ok(QtmState {
        points,
        velocities,
        time: 0.0,
        bandwidth,
        masses: psi0.masses().to_vec(),
        hbar: psi0.hbar(),
    })
}

/// One velocity-Verlet step of the full ensemble under −∇(V + V_qu[ρ̂]).
pub fn qtm_step(
    state: &QtmState,
    potential: &PotentialSpec,
    grid: &Arc<Grid>,
    dt: f64,
    opts: QtmOptions,
) -> Result<QtmState> {
    let mut stepper = QtmStepper::new(grid.clone(), potential.clone(), opts)?;
    let mut next = state.clone();
    stepper.step(&mut next, dt)?;
    Ok(next)
}

/// Reusable stepper caching the engine and the force field between steps.
pub struct QtmStepper {
    grid: Arc<Grid>,
    potential: PotentialSpec,
    engine: SpectralEngine,
    opts: QtmOptions,
    cached_force: Option<(f64, VectorField)>,
    step_count: usize,
}

impl QtmStepper {
    pub fn new(grid: Arc<Grid>, potential: PotentialSpec, opts: QtmOptions) -> Result<Self> {
        check_node_epsilon(opts.node_epsilon)?;
        let engine = SpectralEngine::new(grid.clone());
        Ok(Self {
            grid,
            potential,
            engine,
            opts,
            cached_force: None,
            step_count: 0,
        })
    }

    /// −∇(V + V_qu[ρ̂]) on the grid for the given ensemble.
    fn build_force(&self, state: &QtmState) -> Result<VectorField> {
        let density = estimate_density(
            &state.points,
            state.bandwidth,
            &self.grid,
            self.opts.deconvolve,
        )?;
        let modulus = ScalarField::new(
            self.grid.clone(),
            density.values().iter().map(|&r| r.sqrt()).collect(),
        )?;
        let vqu = quantum_potential_of_modulus(
            &modulus,
            &self.engine,
            &state.masses,
            state.hbar,
            self.opts.node_epsilon,
            true,
        );
        let grad_vqu = stencil_gradient(&vqu);
        let mut force = match &self.potential {
            PotentialSpec::CustomTable(_) => {
                let sampled = self.potential.sample(&self.grid, &state.masses)?;
                stencil_gradient(&sampled)
            }
            _ => self.potential.sample_gradient(&self.grid, &state.masses)?,
        };
        let dim = self.grid.dim();
        // Trust window: the force is zeroed (points coast) wherever the
        // estimate cannot support it — below `force_trust_epsilon` of the
        // peak, and below the granularity level where fewer than ~a dozen
        // points overlap one kernel so ρ̂ resolves individual bumps and the
        // V_qu quotient turns violent. A smoothstep ramp to 3x the level
        // avoids a force discontinuity.
        let n_points = state.points.len() / dim;
        let kernel_volume = (std::f64::consts::TAU.sqrt() * state.bandwidth).powi(dim as i32);
        let granularity = 12.0 / (n_points as f64 * kernel_volume);
        let trust = (self.opts.force_trust_epsilon * density.max()).max(granularity);
        let vals = force.values_mut();
        for p in 0..self.grid.len() {
            let rho = density.values()[p];
            let w = if rho <= trust {
                0.0
            } else if rho >= 3.0 * trust {
                1.0
            } else {
                let t = (rho - trust) / (2.0 * trust);
                t * t * (3.0 - 2.0 * t)
            };
            for a in 0..dim {
                vals[p * dim + a] = -w * (vals[p * dim + a] + grad_vqu.values()[p * dim + a]);
            }
        }
        Ok(force)
    }

    fn check_cap(&self, state: &QtmState, forces: &[f64]) -> Result<()> {
        let dim = self.grid.dim();
        let n = forces.len() / dim;
        let cap2 = self.opts.force_cap * self.opts.force_cap;
        let mut offenders = 0usize;
        let mut where_sum = vec![0.0; dim];
        for i in 0..n {
            let f2: f64 = (0..dim).map(|a| forces[i * dim + a] * forces[i * dim + a]).sum();
            if f2 > cap2 {
                offenders += 1;
                for a in 0..dim {
                    where_sum[a] += state.points[i * dim + a];
                }
            }
        }
        if offenders * 100 > n {
            let center: Vec<f64> = where_sum.iter().map(|s| s / offenders as f64).collect();
            return Err(Error::Instability {
                module: "lagrangian-qtm",
                step: self.step_count,
                detail: format!(
                    "force exceeded {} at {offenders}/{n} points (region around {center:?})",
                    self.opts.force_cap
                ),
            });
        }
        Ok(())
    }

    /// Advance the state in place by one step of size `dt`.
    pub fn step(&mut self, state: &mut QtmState, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Domain("dt must be positive".into()));
        }
        let dim = self.grid.dim();
        let n = state.points.len() / dim;
        let force_field = match self.cached_force.take() {
            Some((t, f)) if (t - state.time).abs() < 1e-12 => f,
            _ => self.build_force(state)?,
        };
        // Interpolate the force at the current points.
        let points = std::mem::take(&mut state.points);
        let forces: Vec<f64> = {
            let per_point = parallel::map_indexed(n, |i| {
                let mut f = [0.0f64; 3];
                force_field
                    .interpolate(&points[i * dim..(i + 1) * dim], &mut f[..dim])
                    .expect("ensemble points stay inside the domain");
                f
            });
            let mut flat = vec![0.0; n * dim];
            for (i, f) in per_point.iter().enumerate() {
                flat[i * dim..(i + 1) * dim].copy_from_slice(&f[..dim]);
            }
            flat
        };
        state.points = points;
        self.check_cap(state, &forces)?;

        // Half kick + drift.
        let masses = state.masses.clone();
        let d_pp = self.grid.dims_per_particle();
        {
            let velocities = &mut state.velocities;
            let points = &mut state.points;
            let grid = &self.grid;
            parallel::for_each_chunk_mut(points, dim, |i, q| {
                for a in 0..dim {
                    let m = masses[a / d_pp];
                    // Note: velocities are advanced to the half step here and
                    // completed after the new force is known.
                    let v_half = velocities[i * dim + a] + 0.5 * dt * forces[i * dim + a] / m;
                    q[a] += dt * v_half;
                }
                grid.wrap_point(q);
            });
            // Store the half-kicked velocities.
            parallel::for_each_chunk_mut(velocities, dim, |i, v| {
                for a in 0..dim {
                    let m = masses[a / d_pp];
                    v[a] += 0.5 * dt * forces[i * dim + a] / m;
                }
            });
        }

        // New force at the drifted positions, second half kick.
        state.time += dt;
        let force_next = self.build_force(state)?;
        let points = std::mem::take(&mut state.points);
        let forces_next: Vec<f64> = {
            let per_point = parallel::map_indexed(n, |i| {
                let mut f = [0.0f64; 3];
                force_next
                    .interpolate(&points[i * dim..(i + 1) * dim], &mut f[..dim])
                    .expect("ensemble points stay inside the domain");
                f
            });
            let mut flat = vec![0.0; n * dim];
            for (i, f) in per_point.iter().enumerate() {
                flat[i * dim..(i + 1) * dim].copy_from_slice(&f[..dim]);
            }
            flat
        };
        state.points = points;
        self.check_cap(state, &forces_next)?;
        parallel::for_each_chunk_mut(&mut state.velocities, dim, |i, v| {
            for a in 0..dim {
                let m = masses[a / d_pp];
                v[a] += 0.5 * dt * forces_next[i * dim + a] / m;
            }
        });
        self.cached_force = Some((state.time, force_next));
        self.step_count += 1;
        Ok(())
    }
}

/// Modulus, phase, and validity mask recovered from one ensemble state.
#[derive(Clone, Debug)]
pub struct ReconstructedWave {
    pub grid: Arc<Grid>,
    /// √ρ̂ on the grid.
    pub modulus: ScalarField,
    /// Phase action S with S(anchor) = 0; meaningful on the mask only.
    pub phase: ScalarField,
    pub mask: Mask,
    pub gauge_anchor: usize,
    /// Number of connected unmasked components (1 = full reconstruction;
    /// more means each extra component carries its own arbitrary constant).
    pub component_count: usize,
    pub hbar: f64,
}

impl ReconstructedWave {
    /// ψ̂ = modulus·e^{iS/ħ} as amplitudes (masked cells keep S = 0).
    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.modulus
            .values()
            .iter()
            .zip(self.phase.values())
            .map(|(&m, &s)| Complex64::from_polar(m, s / self.hbar))
            .collect()
    }

    pub fn to_wavefunction(&self, masses: Vec<f64>) -> Result<WaveFunction> {
        WaveFunction::new(self.grid.clone(), 1, self.amplitudes(), masses, self.hbar)
    }
}

/// Scattered-to-grid velocity transfer: inverse-distance weighting over the
/// k nearest ensemble points (k = 8, fewer when n < 8).
fn velocities_to_grid(state: &QtmState, grid: &Arc<Grid>, mask: &Mask) -> VectorField {
    let dim = grid.dim();
    let n = state.points.len() / dim;
    let k = 8.min(n);
    let periodic = grid.boundary() == Boundary::Periodic;
    let extents = grid.extents().to_vec();
    let rows: Vec<[f64; 3]> = parallel::map_indexed(grid.len(), |p| {
        let mut out = [0.0f64; 3];
        if !mask.is_valid(p) {
            return out;
        }
        let mut x = [0.0f64; 3];
        grid.point_coords(p, &mut x[..dim]);
        // Distances to every ensemble point; select the k nearest.
        let mut d2: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let mut r2 = 0.0;
                for a in 0..dim {
                    let mut d = x[a] - state.points[i * dim + a];
                    if periodic {
                        d -= (d / extents[a]).round() * extents[a];
                    }
                    r2 += d * d;
                }
                (r2, i)
            })
            .collect();
        d2.select_nth_unstable_by(k - 1, |a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut wsum = 0.0;
        let mut acc = [0.0f64; 3];
        for &(r2, i) in &d2[..k] {
            let w = 1.0 / (r2 + 1e-24);
            wsum += w;
            for a in 0..dim {
                acc[a] += w * state.velocities[i * dim + a];
            }
        }
        for a in 0..dim {
            out[a] = acc[a] / wsum;
        }
        out
    });
    let mut field = VectorField::zeros(grid.clone());
    let vals = field.values_mut();
    for (p, row) in rows.iter().enumerate() {
        vals[p * dim..(p + 1) * dim].copy_from_slice(&row[..dim]);
    }
    field
}

/// Integrate ∇S = m⊙v over the unmasked set by breadth-first flood fill from
/// the anchor (trapezoid rule along lattice edges). Disconnected components
/// get their own zero-anchored constants and are counted.
fn integrate_phase(
    velocity: &VectorField,
    mask: &Mask,
    grid: &Arc<Grid>,
    masses: &[f64],
    anchor: usize,
) -> (ScalarField, usize) {
    let dim = grid.dim();
    let d_pp = grid.dims_per_particle();
    let len = grid.len();
    let mut s = vec![0.0; len];
    let mut visited = vec![false; len];
    let mut components = 0usize;
    let mut queue = VecDeque::new();
    let mut multi = vec![0usize; dim];

    let mut seeds: Vec<usize> = Vec::new();
    if mask.is_valid(anchor) {
        seeds.push(anchor);
    }
    // Component sweep order is deterministic: anchor first, then index order.
    for p in 0..len {
        if mask.is_valid(p) {
            seeds.push(p);
        }
    }
    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        components += 1;
        visited[seed] = true;
        s[seed] = 0.0;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            grid.multi_index(p, &mut multi);
            for a in 0..dim {
                let n_a = grid.points()[a];
                let after: usize = grid.points()[a + 1..].iter().product();
                for dir in [-1isize, 1] {
                    let j = multi[a] as isize + dir;
                    let (j, wrapped) = if j < 0 {
                        if grid.boundary() == Boundary::Periodic {
                            (n_a as isize - 1, true)
                        } else {
                            continue;
                        }
                    } else if j >= n_a as isize {
                        if grid.boundary() == Boundary::Periodic {
                            (0, true)
                        } else {
                            continue;
                        }
                    } else {
                        (j, false)
                    };
                    let q = (p as isize + (j - multi[a] as isize) * after as isize) as usize;
                    if visited[q] || !mask.is_valid(q) {
                        continue;
                    }
                    let h = grid.spacing(a) * dir as f64;
                    let _ = wrapped;
                    let m = masses[a / d_pp];
                    let v_avg = 0.5
                        * (velocity.values()[p * dim + a] + velocity.values()[q * dim + a]);
                    s[q] = s[p] + m * v_avg * h;
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    (
        ScalarField::new(grid.clone(), s).expect("shape by construction"),
        components,
    )
}

/// Recover modulus and phase from an ensemble state. `anchor` defaults to the
/// densest grid cell; the phase there is fixed to zero (the global phase is
/// not recoverable from trajectories).
pub fn reconstruct_wavefunction(
    state: &QtmState,
    grid: &Arc<Grid>,
    anchor: Option<usize>,
    opts: QtmOptions,
) -> Result<ReconstructedWave> {
    check_node_epsilon(opts.node_epsilon)?;
    let density = estimate_density(&state.points, state.bandwidth, grid, opts.deconvolve)?;
    let mask = Mask::from_density(&density, opts.node_epsilon);
    let anchor = anchor.unwrap_or_else(|| {
        density
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    });
    if !mask.is_valid(anchor) {
        return Err(Error::Domain(format!(
            "gauge anchor {anchor} lies in the node-masked region"
        )));
    }
    let modulus = ScalarField::new(
        grid.clone(),
        density.values().iter().map(|&r| r.sqrt()).collect(),
    )?;
    let velocity = velocities_to_grid(state, grid, &mask);
    let (phase, component_count) = integrate_phase(&velocity, &mask, grid, &state.masses, anchor);
    Ok(ReconstructedWave {
        grid: grid.clone(),
        modulus,
        phase,
        mask,
        gauge_anchor: anchor,
        component_count,
        hbar: state.hbar,
    })
}

/// Run the particle method from ψ0: returns the states and reconstructions at
/// every snapshot stride (including t = 0 and the final time).
pub fn qtm_run(
    psi0: &WaveFunction,
    potential: &PotentialSpec,
    n: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
    snapshot_stride: usize,
    opts: QtmOptions,
) -> Result<(Vec<QtmState>, Vec<ReconstructedWave>)> {
    let grid = psi0.grid().clone();
    let mut state = qtm_init(psi0, n, seed, opts)?;
    let mut states = vec![state.clone()];
    let mut waves = vec![reconstruct_wavefunction(&state, &grid, None, opts)?];
    if t_final == 0.0 {
        return Ok((states, waves));
    }
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || (t_final / dt - steps as f64).abs() > 1e-9 * steps as f64 {
        return Err(Error::Config(format!(
            "dt={dt} does not divide t_final={t_final}"
        )));
    }
    let stride = snapshot_stride.max(1);
    let mut stepper = QtmStepper::new(grid.clone(), potential.clone(), opts)?;
    for s in 1..=steps {
        stepper.step(&mut state, dt)?;
        if s % stride == 0 || s == steps {
            states.push(state.clone());
            waves.push(reconstruct_wavefunction(&state, &grid, None, opts)?);
        }
    }
    Ok((states, waves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::wavefunction::gaussian_packet;

    fn line_grid(n: usize, extent: f64) -> Arc<Grid> {
        Arc::new(make_grid(1, 1, vec![n], vec![extent], Boundary::Periodic).unwrap())
    }

    #[test]
    fn single_point_estimate_is_a_kernel_bump() {
        let grid = line_grid(128, 16.0);
        let f = estimate_density(&[0.5], 0.4, &grid, false).unwrap();
        assert!((f.integral() - 1.0).abs() < 1e-9);
        let peak = f
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((grid.axis_coord(0, peak) - 0.5).abs() <= grid.spacing(0));
        // Gaussian shape: value at one bandwidth from the center.
        let at_h = f.interpolate(&[0.9]).unwrap();
        let at_0 = f.interpolate(&[0.5]).unwrap();
        assert!((at_h / at_0 - (-0.5f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn estimate_is_strictly_positive_and_mass_independent() {
        let grid = line_grid(64, 40.0);
        let pts = [-3.0, -1.0, 0.0, 2.0];
        let f = estimate_density(&pts, 0.5, &grid, false).unwrap();
        assert!(f.values().iter().all(|&v| v > 0.0));
        // Masses never enter the estimate.
        let g = estimate_density(&pts, 0.5, &grid, false).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn kde_recovers_a_gaussian_within_l1_risk() {
        let grid = line_grid(256, 40.0);
        let psi = gaussian_packet(grid.clone(), &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let n = 100_000;
        let pts = sample_initial(&psi, n, 7117).unwrap();
        let h = deviation_bandwidth(&pts, 1);
        let est = estimate_density(&pts, h, &grid, false).unwrap();
        let truth = psi.density();
        let l1 = est.l1_distance(&truth);
        assert!(l1 < 0.03, "KDE L1 error {l1}");
    }

    #[test]
    fn deconvolution_removes_the_smoothing_bias() {
        let grid = line_grid(256, 40.0);
        let psi = gaussian_packet(grid.clone(), &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let pts = sample_initial(&psi, 40_000, 99).unwrap();
        let h = 0.4; // deliberately wide so the bias is visible
        let plain = estimate_density(&pts, h, &grid, false).unwrap();
        let sharp = estimate_density(&pts, h, &grid, true).unwrap();
        let truth = psi.density();
        assert!(sharp.l1_distance(&truth) < 0.5 * plain.l1_distance(&truth));
    }

    #[test]
    fn init_velocities_vanish_for_real_states() {
        let grid = line_grid(256, 40.0);
        let psi = gaussian_packet(grid, &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let state = qtm_init(&psi, 500, 3, QtmOptions::default()).unwrap();
        assert!(state.velocities.iter().all(|v| v.abs() < 1e-10));
        let again = qtm_init(&psi, 500, 3, QtmOptions::default()).unwrap();
        assert_eq!(state.points, again.points);
    }

    #[test]
    fn boosted_packet_mean_velocity_matches_the_drift() {
        let grid = line_grid(256, 40.0);
        let k = 1.5;
        let psi = gaussian_packet(grid, &[0.0], &[1.0], &[k], vec![1.0], 1.0).unwrap();
        let n = 20_000;
        let state = qtm_init(&psi, n, 11, QtmOptions::default()).unwrap();
        let mean: f64 = state.velocities.iter().sum::<f64>() / n as f64;
        // CLT bound on the sample mean of v ≈ ħk/m.
        assert!((mean - k).abs() < 4.0 / (n as f64).sqrt() + 1e-3, "mean {mean}");
    }

    #[test]
    fn uniform_ensemble_translates_rigidly() {
        let grid = line_grid(64, 16.0);
        let n = 256;
        // Points exactly on a refinement of the lattice: the KDE is uniform
        // by symmetry, so V_qu is flat and the force vanishes.
        let points: Vec<f64> = (0..n).map(|i| -8.0 + 16.0 * i as f64 / n as f64).collect();
        let velocities = vec![0.7; n];
        let state = QtmState {
            points,
            velocities,
            time: 0.0,
            bandwidth: 0.5,
            masses: vec![1.0],
            hbar: 1.0,
        };
        let stepped = qtm_step(&state, &PotentialSpec::Zero, &grid, 0.05, QtmOptions::default())
            .unwrap();
        for i in 0..n {
            assert!((stepped.velocities[i] - 0.7).abs() < 1e-6);
            let mut expect = state.points[i] + 0.05 * 0.7;
            expect = (expect + 8.0).rem_euclid(16.0) - 8.0;
            assert!((stepped.points[i] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_velocity_ensemble_reconstructs_zero_phase() {
        let grid = line_grid(128, 30.0);
        let psi = gaussian_packet(grid.clone(), &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let state = qtm_init(&psi, 2000, 5, QtmOptions::default()).unwrap();
        let wave = reconstruct_wavefunction(&state, &grid, None, QtmOptions::default()).unwrap();
        for p in 0..grid.len() {
            if wave.mask.is_valid(p) {
                assert!(wave.phase.values()[p].abs() < 1e-8);
            }
        }
        assert_eq!(wave.component_count, 1);
        assert_eq!(wave.phase.values()[wave.gauge_anchor], 0.0);
    }

    #[test]
    fn uniform_velocity_reconstructs_a_linear_phase() {
        let grid = line_grid(64, 16.0);
        let n = 512;
        let points: Vec<f64> = (0..n).map(|i| -8.0 + 16.0 * i as f64 / n as f64).collect();
        let u = 0.45;
        let mass = 1.3;
        let state = QtmState {
            points,
            velocities: vec![u; n],
            time: 0.0,
            bandwidth: 0.5,
            masses: vec![mass],
            hbar: 1.0,
        };
        let wave = reconstruct_wavefunction(&state, &grid, Some(32), QtmOptions::default())
            .unwrap();
        let anchor_q = grid.axis_coord(0, 32);
        for p in 0..grid.len() {
            let q = grid.axis_coord(0, p);
            // Minimum-image separation from the anchor on the ring.
            let mut dq = q - anchor_q;
            dq -= (dq / 16.0).round() * 16.0;
            let expect = mass * u * dq;
            // The flood fill reaches the far side of the ring both ways; skip
            // the seam cell where the two branches meet.
            if dq.abs() > 7.0 {
                continue;
            }
            assert!(
                (wave.phase.values()[p] - expect).abs() < 1e-9,
                "at q={q}: {} vs {expect}",
                wave.phase.values()[p]
            );
        }
    }

    #[test]
    fn gauge_anchor_shifts_phase_by_a_constant() {
        let grid = line_grid(128, 30.0);
        let psi = gaussian_packet(grid.clone(), &[0.0], &[1.0], &[1.0], vec![1.0], 1.0).unwrap();
        let state = qtm_init(&psi, 3000, 21, QtmOptions::default()).unwrap();
        let a = reconstruct_wavefunction(&state, &grid, Some(64), QtmOptions::default()).unwrap();
        let b = reconstruct_wavefunction(&state, &grid, Some(70), QtmOptions::default()).unwrap();
        let mut offset = None;
        let mut worst: f64 = 0.0;
        let scale = a
            .phase
            .values()
            .iter()
            .zip(a.mask.valid())
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.abs())
            .fold(0.0f64, f64::max);
        for p in 0..grid.len() {
            if !(a.mask.is_valid(p) && b.mask.is_valid(p)) {
                continue;
            }
            let d = a.phase.values()[p] - b.phase.values()[p];
            match offset {
                None => offset = Some(d),
                Some(o) => worst = worst.max((d - o).abs()),
            }
        }
        assert!(worst < 1e-8 * scale.max(1.0), "gauge covariance violation {worst}");
    }

    #[test]
    fn small_ensembles_are_rejected() {
        let grid = line_grid(64, 16.0);
        let psi = gaussian_packet(grid, &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        assert!(qtm_init(&psi, 50, 1, QtmOptions::default()).is_err());
    }

    #[test]
    fn mass_time_rescaling_preserves_free_paths() {
        // With m → 2m and t → 2t every Verlet update scales by exact powers
        // of two, so the free-case paths coincide bit for bit.
        let grid = line_grid(128, 30.0);
        let base = gaussian_packet(grid.clone(), &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let heavy = gaussian_packet(grid.clone(), &[0.0], &[1.0], &[0.0], vec![2.0], 1.0).unwrap();
        let opts = QtmOptions {
            bandwidth: BandwidthRule::Fixed { value: 0.3 },
            ..QtmOptions::default()
        };
        let (s1, _) = qtm_run(&base, &PotentialSpec::Zero, 400, 0.25, 0.0125, 9, 100, opts)
            .unwrap();
        let (s2, _) = qtm_run(&heavy, &PotentialSpec::Zero, 400, 0.5, 0.025, 9, 100, opts)
            .unwrap();
        let a = &s1.last().unwrap().points;
        let b = &s2.last().unwrap().points;
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }
}
