//! Trajectory integration against an evolution record, Born-density sampling
//! of initial configurations, and the equivariance verification harness.
//!
//! Ensembles are propagated time-major: at every substep the three RK4 stage
//! probes are built once from the record, then all trajectories advance in a
//! data-parallel map. Between snapshots the wave function is re-stepped with
//! the record's own solver, never interpolated.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, DEFAULT_NODE_EPSILON};
use crate::grid::Grid;
use crate::guidance::{Interpolation, VelocityProbe};
use crate::parallel;
use crate::solver::EvolutionRecord;
use crate::spectral::SpectralEngine;
use crate::wavefunction::WaveFunction;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFlag {
    Ok,
    NodeRegularized,
    LeftDomain,
}

impl SampleFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleFlag::Ok => "ok",
            SampleFlag::NodeRegularized => "node",
            SampleFlag::LeftDomain => "left",
        }
    }
}

/// One integral curve of the guidance field, recorded on a shared time base.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub dim: usize,
    /// Time-major coordinates: `points[t*dim + a]`.
    pub points: Vec<f64>,
    pub flags: Vec<SampleFlag>,
}

impl Trajectory {
    pub fn position(&self, t_index: usize) -> &[f64] {
        &self.points[t_index * self.dim..(t_index + 1) * self.dim]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.position(self.times.len() - 1)
    }
}

/// A set of trajectories over one record, all sharing the same time base.
#[derive(Clone, Debug)]
pub struct Ensemble {
    times: Vec<f64>,
    n: usize,
    dim: usize,
    /// `positions[(t*n + i)*dim + a]`.
    positions: Vec<f64>,
    flags: Vec<SampleFlag>,
    seed: u64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() < 1e-9)
    }

    /// All positions at one recorded time, trajectory-major.
    pub fn positions_at(&self, t_index: usize) -> &[f64] {
        let w = self.n * self.dim;
        &self.positions[t_index * w..(t_index + 1) * w]
    }

    pub fn flags_at(&self, t_index: usize) -> &[SampleFlag] {
        &self.flags[t_index * self.n..(t_index + 1) * self.n]
    }

    pub fn position(&self, t_index: usize, traj: usize) -> &[f64] {
        let base = (t_index * self.n + traj) * self.dim;
        &self.positions[base..base + self.dim]
    }

    /// Materialize a single trajectory.
    pub fn trajectory(&self, i: usize) -> Trajectory {
        let mut points = Vec::with_capacity(self.times.len() * self.dim);
        let mut flags = Vec::with_capacity(self.times.len());
        for t in 0..self.times.len() {
            points.extend_from_slice(self.position(t, i));
            flags.push(self.flags[t * self.n + i]);
        }
        Trajectory {
            times: self.times.clone(),
            dim: self.dim,
            points,
            flags,
        }
    }
}

/// Uniform f64 in [0, 1) from the top 53 bits of the stream.
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box–Muller on the deterministic uniform stream.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let mut u1 = uniform(rng);
    if u1 == 0.0 {
        u1 = f64::MIN_POSITIVE;
    }
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Per-axis cell probabilities of a density field (sums to 1 per axis).
fn axis_marginals(density: &ScalarField) -> Vec<Vec<f64>> {
    let grid = density.grid();
    let dim = grid.dim();
    let mut marginals: Vec<Vec<f64>> = (0..dim).map(|a| vec![0.0; grid.points()[a]]).collect();
    let mut multi = vec![0usize; dim];
    let cell = grid.cell_volume();
    for p in 0..grid.len() {
        grid.multi_index(p, &mut multi);
        let w = density.values()[p] * cell;
        for a in 0..dim {
            marginals[a][multi[a]] += w;
        }
    }
    for m in &mut marginals {
        let total: f64 = m.iter().sum();
        if total > 0.0 {
            m.iter_mut().for_each(|x| *x /= total);
        }
    }
    marginals
}

/// L¹ gap between a density and the product of its axis marginals; ~0 for
/// product states.
fn product_gap(density: &ScalarField, marginals: &[Vec<f64>]) -> f64 {
    let grid = density.grid();
    let dim = grid.dim();
    let cell = grid.cell_volume();
    let mut multi = vec![0usize; dim];
    let mut acc = 0.0;
    for p in 0..grid.len() {
        grid.multi_index(p, &mut multi);
        let mut prod = 1.0;
        for a in 0..dim {
            prod *= marginals[a][multi[a]] / grid.spacing(a);
        }
        acc += (density.values()[p] - prod).abs();
    }
    acc * cell
}

/// Draw one coordinate from a per-cell probability table by inverse CDF,
/// uniform within the selected cell. Cells are centered on lattice points.
fn draw_axis(probs: &[f64], grid: &Grid, axis: usize, rng: &mut ChaCha8Rng) -> f64 {
    let u = uniform(rng);
    let mut acc = 0.0;
    let mut cell = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            cell = i;
            break;
        }
    }
    let frac = uniform(rng);
    grid.axis_coord(axis, cell) + (frac - 0.5) * grid.spacing(axis)
}

const METROPOLIS_BURN_IN: usize = 1_000;
const METROPOLIS_STRIDE: usize = 50;

/// Draw `n` initial configurations distributed as the state's density.
///
/// Product states (detected through the marginal factorization gap) use exact
/// per-axis inverse-CDF draws; entangled states fall back to a seeded
/// random-walk Metropolis chain with burn-in 10³ and stride-50 thinning.
pub fn sample_initial(psi0: &WaveFunction, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let density = psi0.density();
    let norm = density.integral();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "sampling requires a normalized state (∫ρ = {norm})"
        )));
    }
    let grid = psi0.grid().clone();
    let dim = grid.dim();
    let marginals = axis_marginals(&density);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; n * dim];

    if dim == 1 || product_gap(&density, &marginals) < 1e-9 {
        for i in 0..n {
            for a in 0..dim {
                out[i * dim + a] = draw_axis(&marginals[a], &grid, a, &mut rng);
            }
        }
        return Ok(out);
    }

    // Entangled state: Metropolis over the interpolated density.
    let sigma: Vec<f64> = (0..dim)
        .map(|a| {
            let m = &marginals[a];
            let mean: f64 = m
                .iter()
                .enumerate()
                .map(|(i, p)| p * grid.axis_coord(a, i))
                .sum();
            let var: f64 = m
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d = grid.axis_coord(a, i) - mean;
                    p * d * d
                })
                .sum();
            var.sqrt().max(grid.spacing(a))
        })
        .collect();
    // Start at the density mode.
    let argmax = density
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut current = vec![0.0; dim];
    grid.point_coords(argmax, &mut current);
    let mut current_rho = density.interpolate(&current)?.max(f64::MIN_POSITIVE);
    let mut proposal = vec![0.0; dim];
    let mut produced = 0usize;
    let mut step = 0usize;
    while produced < n {
        for a in 0..dim {
            proposal[a] = current[a] + sigma[a] * standard_normal(&mut rng);
        }
        grid.wrap_point(&mut proposal);
        let rho = if grid.contains(&proposal) {
            density.interpolate(&proposal)?.max(0.0)
        } else {
            0.0
        };
        if rho > 0.0 && uniform(&mut rng) < rho / current_rho {
            current.copy_from_slice(&proposal);
            current_rho = rho.max(f64::MIN_POSITIVE);
        }
        step += 1;
        if step > METROPOLIS_BURN_IN && (step - METROPOLIS_BURN_IN) % METROPOLIS_STRIDE == 0 {
            out[produced * dim..(produced + 1) * dim].copy_from_slice(&current);
            produced += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct PropagateOptions {
    pub dt_traj: f64,
    pub interpolation: Interpolation,
    pub node_epsilon: f64,
    /// Record every integration substep instead of only the record's
    /// snapshot times (memory scales accordingly).
    pub record_every_step: bool,
}

impl PropagateOptions {
    pub fn new(dt_traj: f64) -> Self {
        Self {
            dt_traj,
            interpolation: Interpolation::Multilinear,
            node_epsilon: DEFAULT_NODE_EPSILON,
            record_every_step: false,
        }
    }

    pub fn spectral(mut self) -> Self {
        self.interpolation = Interpolation::Spectral;
        self
    }

    pub fn recording_every_step(mut self) -> Self {
        self.record_every_step = true;
        self
    }
}

#[derive(Clone, Copy)]
struct TrajState {
    q: [f64; 3],
    flag: SampleFlag,
    segment_node: bool,
}

/// Classical RK4 on dQ/dt = v(Q, t) for one start; convenience wrapper over
/// the ensemble path.
pub fn integrate_trajectory(
    record: &EvolutionRecord,
    q0: &[f64],
    opts: PropagateOptions,
) -> Result<Trajectory> {
    let ens = propagate_ensemble(record, q0, 0, opts)?;
    Ok(ens.trajectory(0))
}

/// Propagate every start in `starts` (flat, n×D) through the record's span.
/// Trajectory order follows input order; integrations are independent and run
/// data-parallel. `seed` is carried as provenance metadata.
pub fn propagate_ensemble(
    record: &EvolutionRecord,
    starts: &[f64],
    seed: u64,
    opts: PropagateOptions,
) -> Result<Ensemble> {
    let grid = record.grid().clone();
    let dim = grid.dim();
    if dim > 3 {
        return Err(Error::Config("trajectory engine is capped at D = 3".into()));
    }
    if starts.is_empty() || starts.len() % dim != 0 {
        return Err(Error::Domain(format!(
            "starts must hold a positive multiple of D={dim} coordinates"
        )));
    }
    let n = starts.len() / dim;
    let h = opts.dt_traj;
    if !(h > 0.0) {
        return Err(Error::Domain("dt_traj must be positive".into()));
    }
    let times = record.times();
    for w in times.windows(2) {
        let span = w[1] - w[0];
        if h > span + 1e-12 {
            return Err(Error::Domain(format!(
                "dt_traj={h} exceeds the snapshot interval {span}"
            )));
        }
        let steps = (span / h).round();
        if steps < 1.0 || (span / h - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!(
                "dt_traj={h} does not divide the snapshot interval {span}"
            )));
        }
    }

    let mut states: Vec<TrajState> = (0..n)
        .map(|i| {
            let mut q = [0.0; 3];
            q[..dim].copy_from_slice(&starts[i * dim..(i + 1) * dim]);
            let inside = grid.contains(&q[..dim]);
            TrajState {
                q,
                flag: if inside { SampleFlag::Ok } else { SampleFlag::LeftDomain },
                segment_node: false,
            }
        })
        .collect();

    let engine = SpectralEngine::new(grid.clone());
    let mut sampler = record.sampler();
    let make_probe = |sampler: &mut crate::solver::RecordSampler, t: f64| -> Result<VelocityProbe> {
        let wave = sampler.wave_at(t)?;
        VelocityProbe::with_engine(wave, &engine, opts.interpolation, opts.node_epsilon)
    };

    let mut out_times = Vec::new();
    let mut positions = Vec::new();
    let mut flags = Vec::new();
    let record_state = |t: f64,
                        states: &mut [TrajState],
                        out_times: &mut Vec<f64>,
                        positions: &mut Vec<f64>,
                        flags: &mut Vec<SampleFlag>| {
        out_times.push(t);
        for s in states.iter_mut() {
            positions.extend_from_slice(&s.q[..dim]);
            let flag = match s.flag {
                SampleFlag::LeftDomain => SampleFlag::LeftDomain,
                _ if s.segment_node => SampleFlag::NodeRegularized,
                f => f,
            };
            flags.push(flag);
            s.segment_node = false;
        }
    };

    record_state(times[0], &mut states, &mut out_times, &mut positions, &mut flags);
    let mut probe_start = make_probe(&mut sampler, times[0])?;
    for w in 0..times.len() - 1 {
        let (t0, t1) = (times[w], times[w + 1]);
        let steps = ((t1 - t0) / h).round() as usize;
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            let probe_mid = make_probe(&mut sampler, t + 0.5 * h)?;
            let probe_end = make_probe(&mut sampler, t + h)?;
            rk4_sweep(&grid, dim, h, &probe_start, &probe_mid, &probe_end, &mut states);
            if opts.record_every_step && s + 1 < steps {
                record_state(
                    t + h,
                    &mut states,
                    &mut out_times,
                    &mut positions,
                    &mut flags,
                );
            }
            probe_start = probe_end;
        }
        record_state(t1, &mut states, &mut out_times, &mut positions, &mut flags);
    }

    Ok(Ensemble {
        times: out_times,
        n,
        dim,
        positions,
        flags,
        seed,
    })
}

/// Advance every live trajectory by one RK4 step with shared stage probes.
fn rk4_sweep(
    grid: &Grid,
    dim: usize,
    h: f64,
    probe_start: &VelocityProbe,
    probe_mid: &VelocityProbe,
    probe_end: &VelocityProbe,
    states: &mut [TrajState],
) {
    parallel::for_each_mut(states, |_, st| {
        if st.flag == SampleFlag::LeftDomain {
            return;
        }
        let mut stage = [0.0f64; 3];
        let mut k1 = [0.0f64; 3];
        let mut k2 = [0.0f64; 3];
        let mut k3 = [0.0f64; 3];
        let mut k4 = [0.0f64; 3];
        let mut regularized = false;
        let mut eval = |probe: &VelocityProbe, q: &[f64], out: &mut [f64; 3]| -> bool {
            match probe.velocity_at(&q[..dim], &mut out[..dim]) {
                Ok(reg) => {
                    regularized |= reg;
                    true
                }
                Err(_) => false,
            }
        };
        let q = st.q;
        let ok = eval(probe_start, &q[..dim], &mut k1)
            && {
                for a in 0..dim {
                    stage[a] = q[a] + 0.5 * h * k1[a];
                }
                grid.wrap_point(&mut stage[..dim]);
                eval(probe_mid, &stage[..dim], &mut k2)
            }
            && {
                for a in 0..dim {
                    stage[a] = q[a] + 0.5 * h * k2[a];
                }
                grid.wrap_point(&mut stage[..dim]);
                eval(probe_mid, &stage[..dim], &mut k3)
            }
            && {
                for a in 0..dim {
                    stage[a] = q[a] + h * k3[a];
                }
                grid.wrap_point(&mut stage[..dim]);
                eval(probe_end, &stage[..dim], &mut k4)
            };
        if !ok {
            st.flag = SampleFlag::LeftDomain;
            return;
        }
        for a in 0..dim {
            st.q[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        grid.wrap_point(&mut st.q[..dim]);
        if !grid.contains(&st.q[..dim]) {
            st.flag = SampleFlag::LeftDomain;
            return;
        }
        st.segment_node = st.segment_node || regularized;
    });
}

/// Normalized histogram of the ensemble on the grid cells at a recorded time.
/// Trajectories that left a box domain are excluded (and the histogram is
/// normalized over the remainder).
pub fn empirical_density(ensemble: &Ensemble, t: f64, grid: &std::sync::Arc<Grid>) -> Result<ScalarField> {
    let ti = ensemble
        .time_index(t)
        .ok_or_else(|| Error::Domain(format!("time {t} is not in the ensemble time base")))?;
    if grid.dim() != ensemble.dim() {
        return Err(Error::Domain("grid dimension does not match ensemble".into()));
    }
    let dim = grid.dim();
    let mut counts = vec![0.0f64; grid.len()];
    let mut kept = 0usize;
    let positions = ensemble.positions_at(ti);
    let flags = ensemble.flags_at(ti);
    let mut q = vec![0.0; dim];
    for i in 0..ensemble.len() {
        if flags[i] == SampleFlag::LeftDomain {
            continue;
        }
        q.copy_from_slice(&positions[i * dim..(i + 1) * dim]);
        grid.wrap_point(&mut q);
        let mut flat = 0usize;
        let mut inside = true;
        for a in 0..dim {
            // Cells are centered on lattice points (matching the sampler and
            // the midpoint quadrature of grid densities).
            let x = (q[a] + 0.5 * grid.extents()[a]) / grid.spacing(a) + 0.5;
            let mut idx = x.floor() as isize;
            let n_a = grid.points()[a] as isize;
            if idx == n_a {
                idx = match grid.boundary() {
                    crate::grid::Boundary::Periodic => 0,
                    crate::grid::Boundary::Box => n_a - 1,
                };
            }
            if idx < 0 || idx >= n_a {
                inside = false;
                break;
            }
            flat = flat * grid.points()[a] + idx as usize;
        }
        if inside {
            counts[flat] += 1.0;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::Degenerate("no trajectories left to histogram".into()));
    }
    let w = 1.0 / (kept as f64 * grid.cell_volume());
    counts.iter_mut().for_each(|c| *c *= w);
    ScalarField::new(grid.clone(), counts)
}

/// Total-variation distance between two normalized densities on the same
/// grid, rebinned to at most `max_bins` per axis. For D ≥ 2 the distance is
/// the maximum over the per-axis marginals (the multinomial noise analysis
/// stays valid per axis).
pub fn tv_distance_binned(a: &ScalarField, b: &ScalarField, max_bins: usize) -> f64 {
    let grid = a.grid();
    let dim = grid.dim();
    if dim == 1 {
        let pa = bin_probabilities(a, 0, max_bins);
        let pb = bin_probabilities(b, 0, max_bins);
        return 0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>();
    }
    (0..dim)
        .map(|axis| {
            let pa = bin_probabilities(a, axis, max_bins);
            let pb = bin_probabilities(b, axis, max_bins);
            0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Marginal cell probabilities along one axis, grouped to at most `max_bins`.
fn bin_probabilities(field: &ScalarField, axis: usize, max_bins: usize) -> Vec<f64> {
    let grid = field.grid();
    let n = grid.points()[axis];
    let group = n.div_ceil(max_bins);
    let bins = n.div_ceil(group);
    let mut out = vec![0.0; bins];
    let mut multi = vec![0usize; grid.dim()];
    let cell = grid.cell_volume();
    for p in 0..grid.len() {
        grid.multi_index(p, &mut multi);
        out[multi[axis] / group] += field.values()[p] * cell;
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    }
    out
}

/// Machine-readable equivariance check result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub t: f64,
    pub tv_distance: f64,
    pub n: usize,
    pub bins: usize,
}

/// TV distance between the empirical ensemble density and |ψ_t|² at a
/// recorded time, on ≤ 64 bins per axis.
pub fn equivariance_distance(
    ensemble: &Ensemble,
    record: &EvolutionRecord,
    t: f64,
) -> Result<EquivarianceReport> {
    const BINS: usize = 64;
    let idx = record
        .snapshot_index_at(t)
        .ok_or_else(|| Error::Domain(format!("time {t} is not a recorded snapshot")))?;
    let grid = record.grid().clone();
    let rho_hat = empirical_density(ensemble, t, &grid)?;
    let rho = record.snapshot(idx).density();
    let tv = tv_distance_binned(&rho_hat, &rho, BINS);
    Ok(EquivarianceReport {
        t,
        tv_distance: tv,
        n: ensemble.len(),
        bins: BINS.min(grid.points().iter().copied().min().unwrap_or(BINS)),
    })
}

/// Velocities of the guidance field at a set of configuration points,
/// evaluated from a single snapshot (used to seed second-order integrators
/// and the particle-method state).
pub fn velocities_at(
    psi: &WaveFunction,
    points: &[f64],
    interpolation: Interpolation,
    node_epsilon: f64,
) -> Result<Vec<f64>> {
    let dim = psi.grid().dim();
    let probe = VelocityProbe::new(psi, interpolation, node_epsilon)?;
    let n = points.len() / dim;
    let mut out = vec![0.0; points.len()];
    for i in 0..n {
        probe.velocity_at(&points[i * dim..(i + 1) * dim], &mut out[i * dim..(i + 1) * dim])?;
    }
    Ok(out)
}
