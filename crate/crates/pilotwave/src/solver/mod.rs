//! Grid-based propagation of the Schrödinger and Pauli equations — the
//! Eulerian reference solution that trajectories are integrated against.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::Grid;
use crate::potential::PotentialSpec;
use crate::wavefunction::WaveFunction;

mod crank_nicolson;
mod stepper;

use stepper::Stepper;

/// Norm drift beyond this aborts an evolution with an instability error.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SplitSpectral,
    CrankNicolson,
}

/// External magnetic data for the Pauli equation: B·σ coupling per particle
/// plus an optional uniform vector potential entering the kinetic term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MagneticSpec {
    /// Uniform vector potential component per configuration axis, if any.
    pub vector_potential: Option<Vec<f64>>,
    pub field: BField,
    /// Magnetic moment μ_k per particle.
    pub moments: Vec<f64>,
    /// Charge e_k per particle (enters only through the vector potential).
    pub charges: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BField {
    Zero,
    /// Uniform lab-frame field (B_x, B_y, B_z).
    Uniform([f64; 3]),
    /// B = (0, 0, slope·q_axis) evaluated at each particle's own coordinate
    /// block; `axis` indexes within the particle (0..d).
    LinearAlongAxis { axis: usize, slope: f64 },
}

impl MagneticSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let n = grid.particle_count();
        if self.moments.len() != n || self.charges.len() != n {
            return Err(Error::Config(format!(
                "magnetic spec needs {n} moments and charges, got {} and {}",
                self.moments.len(),
                self.charges.len()
            )));
        }
        if let Some(a) = &self.vector_potential {
            if a.len() != grid.dim() {
                return Err(Error::Config(format!(
                    "uniform vector potential needs {} components, got {}",
                    grid.dim(),
                    a.len()
                )));
            }
        }
        if let BField::LinearAlongAxis { axis, .. } = self.field {
            if axis >= grid.dims_per_particle() {
                return Err(Error::Config(format!(
                    "field gradient axis {axis} exceeds d={}",
                    grid.dims_per_particle()
                )));
            }
        }
        let finite = self.moments.iter().chain(&self.charges).all(|x| x.is_finite());
        if !finite {
            return Err(Error::Domain("magnetic moments and charges must be finite".into()));
        }
        Ok(())
    }

    pub(crate) fn requires_spinor(&self) -> bool {
        !matches!(self.field, BField::Zero)
    }

    /// Sample B over the grid for diagnostics (3 components per point is
    /// collapsed onto the z component since only B_z varies in the desk
    /// scenarios).
    pub fn sample_bz(&self, grid: &Arc<Grid>) -> VectorField {
        let mut out = VectorField::zeros(grid.clone());
        if let BField::LinearAlongAxis { axis, slope } = self.field {
            let d = grid.dims_per_particle();
            let dim = grid.dim();
            let mut q = vec![0.0; dim];
            let vals = out.values_mut();
            for p in 0..grid.len() {
                grid.point_coords(p, &mut q);
                for k in 0..grid.particle_count() {
                    vals[p * dim + k * d + axis] = slope * q[k * d + axis];
                }
            }
        }
        out
    }
}

/// Time-ordered snapshots of one propagation, with everything needed to
/// re-step the state between snapshots.
#[derive(Clone, Debug)]
pub struct EvolutionRecord {
    times: Vec<f64>,
    snapshots: Vec<WaveFunction>,
    method: Method,
    dt: f64,
    potential: PotentialSpec,
    magnetic: Option<MagneticSpec>,
}

impl EvolutionRecord {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[WaveFunction] {
        &self.snapshots
    }

    pub fn snapshot(&self, i: usize) -> &WaveFunction {
        &self.snapshots[i]
    }

    pub fn initial(&self) -> &WaveFunction {
        &self.snapshots[0]
    }

    pub fn final_state(&self) -> &WaveFunction {
        self.snapshots.last().expect("records are never empty")
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn magnetic(&self) -> Option<&MagneticSpec> {
        self.magnetic.as_ref()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.snapshots[0].grid()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("non-empty") - self.times[0]
    }

    /// Index of the snapshot at time `t` (within 1e-9), if any.
    pub fn snapshot_index_at(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() < 1e-9)
    }

    pub fn sampler(&self) -> RecordSampler<'_> {
        RecordSampler::new(self)
    }

    /// Assemble a record from externally produced snapshots (analytic states,
    /// loaded dumps). Times must be strictly increasing and every snapshot
    /// must share the first one's grid and component count.
    pub fn from_snapshots(
        times: Vec<f64>,
        snapshots: Vec<WaveFunction>,
        method: Method,
        dt: f64,
        potential: PotentialSpec,
        magnetic: Option<MagneticSpec>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::Config(format!(
                "need matching nonempty times and snapshots, got {} and {}",
                times.len(),
                snapshots.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("times must be strictly increasing".into()));
        }
        let first = &snapshots[0];
        if snapshots
            .iter()
            .any(|s| s.grid() != first.grid() || s.components() != first.components())
        {
            return Err(Error::Config("snapshots must share grid and components".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Domain("dt must be positive".into()));
        }
        Ok(Self {
            times,
            snapshots,
            method,
            dt,
            potential,
            magnetic,
        })
    }
}

/// Single split-spectral step.
pub fn step_split_spectral(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    dt: f64,
) -> Result<WaveFunction> {
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let mut stepper = Stepper::for_state(psi, potential, None, Method::SplitSpectral)?;
    let mut out = psi.clone();
    stepper.step(out.amplitudes_mut(), dt);
    Ok(out)
}

/// Single Pauli step: adds the pointwise μ B·σ rotation and the uniform-A
/// kinetic offset to the split-spectral scheme.
pub fn step_pauli(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    magnetic: &MagneticSpec,
    dt: f64,
) -> Result<WaveFunction> {
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let mut stepper = Stepper::for_state(psi, potential, Some(magnetic), Method::SplitSpectral)?;
    let mut out = psi.clone();
    stepper.step(out.amplitudes_mut(), dt);
    Ok(out)
}

/// Single Crank–Nicolson step (box or periodic boundaries).
pub fn step_crank_nicolson(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    dt: f64,
) -> Result<WaveFunction> {
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let mut stepper = Stepper::for_state(psi, potential, None, Method::CrankNicolson)?;
    let mut out = psi.clone();
    stepper.step(out.amplitudes_mut(), dt);
    Ok(out)
}

/// Conservative step-size rule keeping the splitting error below the
/// statistical noise of the trajectory tests.
pub fn suggested_dt(grid: &Grid, masses: &[f64], hbar: f64) -> f64 {
    let m_min = masses.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_min = (0..grid.dim())
        .map(|a| grid.spacing(a))
        .fold(f64::INFINITY, f64::min);
    0.1 * m_min * h_min * h_min / (hbar * std::f64::consts::PI * std::f64::consts::PI)
}

/// Propagate `psi0` to `t_final`, recording a snapshot every
/// `snapshot_stride` steps (and always the initial and final states).
pub fn evolve(
    psi0: &WaveFunction,
    potential: &PotentialSpec,
    magnetic: Option<&MagneticSpec>,
    method: Method,
    t_final: f64,
    dt: f64,
    snapshot_stride: usize,
) -> Result<EvolutionRecord> {
    if t_final < 0.0 {
        return Err(Error::Domain("t_final must be nonnegative".into()));
    }
    if t_final == 0.0 {
        return Ok(EvolutionRecord {
            times: vec![0.0],
            snapshots: vec![psi0.clone()],
            method,
            dt,
            potential: potential.clone(),
            magnetic: magnetic.cloned(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let steps_f = t_final / dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::Config(format!(
            "dt={dt} does not divide t_final={t_final} into whole steps"
        )));
    }
    let stride = snapshot_stride.max(1);
    let mut stepper = Stepper::for_state(psi0, potential, magnetic, method)?;
    let norm0 = psi0.norm();
    let mut state = psi0.clone();
    let mut times = vec![0.0];
    let mut snapshots = vec![psi0.clone()];
    for step in 1..=steps {
        stepper.step(state.amplitudes_mut(), dt);
        if step % stride == 0 || step == steps {
            let t = step as f64 * dt;
            let drift = (state.norm() - norm0).abs();
            if drift > NORM_DRIFT_LIMIT {
                return Err(Error::Instability {
                    module: "eulerian-solver",
                    step,
                    detail: format!("norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT:.0e}"),
                });
            }
            times.push(t);
            snapshots.push(state.clone());
        }
    }
    Ok(EvolutionRecord {
        times,
        snapshots,
        method,
        dt,
        potential: potential.clone(),
        magnetic: magnetic.cloned(),
    })
}

/// Resolves the wave function at arbitrary times by re-stepping from the
/// nearest earlier snapshot with the record's own solver and dt, never by
/// interpolating amplitudes. Keeps a forward cache so monotone time sweeps
/// cost one pass over the interval.
pub struct RecordSampler<'r> {
    record: &'r EvolutionRecord,
    stepper: Stepper,
    cache_time: f64,
    cache: WaveFunction,
}

impl<'r> RecordSampler<'r> {
    fn new(record: &'r EvolutionRecord) -> Self {
        let stepper = Stepper::for_state(
            record.initial(),
            &record.potential,
            record.magnetic.as_ref(),
            record.method,
        )
        .expect("record was built with these same parameters");
        Self {
            record,
            stepper,
            cache_time: record.times[0],
            cache: record.initial().clone(),
        }
    }

    /// Wave function at time `t` (must lie within the record's span).
    pub fn wave_at(&mut self, t: f64) -> Result<&WaveFunction> {
        const TOL: f64 = 1e-9;
        let times = &self.record.times;
        let (t0, t1) = (times[0], *times.last().unwrap());
        if t < t0 - TOL || t > t1 + TOL {
            return Err(Error::Domain(format!(
                "time {t} outside the recorded span [{t0}, {t1}]"
            )));
        }
        let t = t.clamp(t0, t1);
        if let Some(i) = self.record.snapshot_index_at(t) {
            self.cache = self.record.snapshot(i).clone();
            self.cache_time = times[i];
            return Ok(&self.cache);
        }
        // Nearest snapshot at or before t.
        let base_idx = match times.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let base_time = times[base_idx];
        if !(self.cache_time >= base_time - TOL && self.cache_time <= t + TOL) {
            self.cache = self.record.snapshot(base_idx).clone();
            self.cache_time = base_time;
        }
        let dt = self.record.dt;
        while self.cache_time + dt <= t + TOL {
            self.stepper.step(self.cache.amplitudes_mut(), dt);
            self.cache_time += dt;
        }
        let rest = t - self.cache_time;
        if rest > TOL {
            self.stepper.step(self.cache.amplitudes_mut(), rest);
            self.cache_time = t;
        }
        Ok(&self.cache)
    }
}
