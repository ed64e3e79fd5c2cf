//! The quantum potential, the Newton-form consistency check along
//! trajectories, and the classical-limit diagnostic ‖∇V_qu‖.
//!
//! V_qu = −Σ_j (ħ²/2m_j)·∇_j²√ρ/√ρ is computed from the density alone
//! (no phase unwrapping enters a modulus-only quantity). The Laplacian of
//! √ρ is spectral on periodic grids; the force −∇(V+V_qu) uses 4th-order
//! local stencils because V_qu grows where ρ decays and is not periodic-
//! smooth, which would make a global spectral gradient ring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_node_epsilon, Mask, MaskedScalarField, ScalarField, VectorField};
use crate::grid::Boundary;
use crate::potential::PotentialSpec;
use crate::solver::EvolutionRecord;
use crate::spectral::SpectralEngine;
use crate::trajectory::{SampleFlag, Trajectory};
use crate::wavefunction::WaveFunction;

/// V_qu on the grid, masked below the node threshold. The returned values are
/// finite everywhere (the denominator is floored at the threshold), but only
/// the unmasked set is trusted.
pub fn quantum_potential(psi: &WaveFunction, node_epsilon: f64) -> Result<MaskedScalarField> {
    check_node_epsilon(node_epsilon)?;
    let engine = SpectralEngine::new(psi.grid().clone());
    Ok(quantum_potential_with(psi, &engine, node_epsilon))
}

pub(crate) fn quantum_potential_with(
    psi: &WaveFunction,
    engine: &SpectralEngine,
    node_epsilon: f64,
) -> MaskedScalarField {
    let grid = psi.grid().clone();
    let density = psi.density();
    let mask = Mask::from_density(&density, node_epsilon);
    let modulus = ScalarField::new(
        grid.clone(),
        density.values().iter().map(|&r| r.sqrt()).collect(),
    )
    .expect("shape by construction");
    let field = quantum_potential_of_modulus(
        &modulus,
        engine,
        psi.masses(),
        psi.hbar(),
        node_epsilon,
        false,
    );
    MaskedScalarField { field, mask }
}

/// Shared kernel: V_qu from a modulus field √ρ. Solver wave functions are
/// periodic-smooth and use the spectral Laplacian; kernel density estimates
/// carry floored tails whose kinks must stay local, so the particle method
/// requests stencil derivatives instead.
pub(crate) fn quantum_potential_of_modulus(
    modulus: &ScalarField,
    engine: &SpectralEngine,
    masses: &[f64],
    hbar: f64,
    node_epsilon: f64,
    local_derivatives: bool,
) -> ScalarField {
    let grid = modulus.grid().clone();
    let floor = node_epsilon.sqrt() * modulus.max();
    let d = grid.dims_per_particle();
    let mut vals = vec![0.0; grid.len()];
    for k in 0..grid.particle_count() {
        let axes: Vec<usize> = (k * d..(k + 1) * d).collect();
        let lap = if local_derivatives {
            stencil_laplacian(modulus, &axes)
        } else {
            engine.laplacian_scalar(modulus, Some(&axes))
        };
        let scale = -hbar * hbar / (2.0 * masses[k]);
        for (p, v) in vals.iter_mut().enumerate() {
            *v += scale * lap.values()[p] / modulus.values()[p].max(floor);
        }
    }
    ScalarField::new(grid, vals).expect("shape by construction")
}

/// 4th-order centered Laplacian over `axes` with periodic wrap or zero ghosts.
pub(crate) fn stencil_laplacian(field: &ScalarField, axes: &[usize]) -> ScalarField {
    let grid = field.grid().clone();
    let len = grid.len();
    let periodic = grid.boundary() == Boundary::Periodic;
    let mut acc = vec![0.0; len];
    for &a in axes {
        let n = grid.points()[a];
        let after: usize = grid.points()[a + 1..].iter().product();
        let h = grid.spacing(a);
        for p in 0..len {
            let base_i = (p / after) % n;
            let f = |off: isize| -> f64 {
                let j = base_i as isize + off;
                let j = if periodic {
                    j.rem_euclid(n as isize)
                } else if j < 0 || j >= n as isize {
                    return 0.0;
                } else {
                    j
                };
                field.values()[(p as isize + (j - base_i as isize) * after as isize) as usize]
            };
            acc[p] +=
                (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) / (12.0 * h * h);
        }
    }
    ScalarField::new(grid, acc).expect("shape by construction")
}

/// ‖∇V_qu‖ pointwise: vanishes where the motion is classical.
pub fn classicality_indicator(psi: &WaveFunction, node_epsilon: f64) -> Result<MaskedScalarField> {
    let vqu = quantum_potential(psi, node_epsilon)?;
    let grad = stencil_gradient(&vqu.field);
    Ok(MaskedScalarField {
        field: grad.magnitude(),
        mask: vqu.mask,
    })
}

/// 4th-order centered gradient with periodic wrap (periodic grids) or zero
/// ghosts (box grids).
pub(crate) fn stencil_gradient(field: &ScalarField) -> VectorField {
    let grid = field.grid().clone();
    let dim = grid.dim();
    let len = grid.len();
    let periodic = grid.boundary() == Boundary::Periodic;
    let mut out = VectorField::zeros(grid.clone());
    for a in 0..dim {
        let n = grid.points()[a];
        let after: usize = grid.points()[a + 1..].iter().product();
        let h = grid.spacing(a);
        let vals = out.values_mut();
        for p in 0..len {
            let base_i = (p / after) % n;
            let f = |off: isize| -> f64 {
                let j = base_i as isize + off;
                let j = if periodic {
                    j.rem_euclid(n as isize)
                } else if j < 0 || j >= n as isize {
                    return 0.0;
                } else {
                    j
                };
                field.values()[(p as isize + (j - base_i as isize) * after as isize) as usize]
            };
            vals[p * dim + a] = (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h);
        }
    }
    out
}

/// −∇(V + V_qu) on the grid for one snapshot, with the node mask.
pub(crate) fn force_field(
    psi: &WaveFunction,
    potential: &PotentialSpec,
    engine: &SpectralEngine,
    node_epsilon: f64,
) -> Result<(VectorField, Mask)> {
    let grid = psi.grid().clone();
    let vqu = quantum_potential_with(psi, engine, node_epsilon);
    let grad_vqu = stencil_gradient(&vqu.field);
    let dim = grid.dim();
    let mut force = match potential {
        PotentialSpec::CustomTable(_) => {
            let sampled = potential.sample(&grid, psi.masses())?;
            stencil_gradient(&sampled)
        }
        _ => potential.sample_gradient(&grid, psi.masses())?,
    };
    let vals = force.values_mut();
    for p in 0..grid.len() {
        for a in 0..dim {
            vals[p * dim + a] = -(vals[p * dim + a] + grad_vqu.values()[p * dim + a]);
        }
    }
    Ok((force, vqu.mask))
}

/// Per-trajectory Newton-form residual ‖m·Q̈ + ∇(V+V_qu)‖ over time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonResidualReport {
    /// Interior times where the centered second difference exists.
    pub times: Vec<f64>,
    /// Euclidean norm of the residual at each interior time (force units);
    /// NaN-free, masked samples are excluded and counted instead.
    pub residual_norm: Vec<f64>,
    pub excluded_fraction: f64,
}

impl NewtonResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.residual_norm.iter().cloned().fold(0.0, f64::max)
    }
}

/// Newton residuals for a batch of trajectories sharing one time base; the
/// force field is built once per time and reused across the batch.
pub fn newton_residual_batch(
    trajectories: &[Trajectory],
    record: &EvolutionRecord,
    node_epsilon: f64,
) -> Result<Vec<NewtonResidualReport>> {
    check_node_epsilon(node_epsilon)?;
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Degenerate("empty trajectory batch".into()))?;
    let times = &first.times;
    if times.len() < 3 {
        return Err(Error::Degenerate(
            "newton residual needs at least 3 samples".into(),
        ));
    }
    if trajectories.iter().any(|t| t.times != *times) {
        return Err(Error::Domain("trajectories must share one time base".into()));
    }
    let dt = times[1] - times[0];
    if times.windows(2).any(|w| (w[1] - w[0] - dt).abs() > 1e-9 * dt) {
        return Err(Error::Domain("newton residual needs a uniform time base".into()));
    }
    let grid = record.grid().clone();
    let dim = grid.dim();
    let potential = record.potential().clone();
    let engine = SpectralEngine::new(grid.clone());
    let mut sampler = record.sampler();

    // Interpolated force per (time, trajectory), built time-major.
    let n = trajectories.len();
    let mut forces = vec![[0.0f64; 3]; times.len() * n];
    let mut masked = vec![false; times.len() * n];
    for (ti, &t) in times.iter().enumerate() {
        let wave = sampler.wave_at(t)?;
        let (force, mask) = force_field(wave, &potential, &engine, node_epsilon)?;
        let density = wave.density();
        let floor = node_epsilon * density.max();
        for (i, traj) in trajectories.iter().enumerate() {
            let q = traj.position(ti);
            let slot = ti * n + i;
            if traj.flags[ti] != SampleFlag::Ok {
                masked[slot] = true;
                continue;
            }
            let rho = density.interpolate(q)?;
            if rho < floor {
                masked[slot] = true;
                continue;
            }
            let _ = &mask;
            force.interpolate(q, &mut forces[slot][..dim])?;
        }
    }

    let masses_per_axis: Vec<f64> = (0..dim)
        .map(|a| record.initial().mass_of_axis(a))
        .collect();
    let reports = trajectories
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let mut out_times = Vec::with_capacity(times.len() - 2);
            let mut residuals = Vec::with_capacity(times.len() - 2);
            let mut excluded = 0usize;
            for ti in 1..times.len() - 1 {
                out_times.push(times[ti]);
                let slot = ti * n + i;
                if masked[slot] || masked[slot - n] || masked[slot + n] {
                    excluded += 1;
                    residuals.push(0.0);
                    continue;
                }
                let mut norm2 = 0.0;
                for a in 0..dim {
                    // Min-image differences keep periodic wraps out of Q̈.
                    let e = grid.extents()[a];
                    let wrapm = |x: f64| -> f64 {
                        if grid.boundary() == Boundary::Periodic {
                            (x + 0.5 * e).rem_euclid(e) - 0.5 * e
                        } else {
                            x
                        }
                    };
                    let fwd = wrapm(traj.position(ti + 1)[a] - traj.position(ti)[a]);
                    let bwd = wrapm(traj.position(ti)[a] - traj.position(ti - 1)[a]);
                    let accel = (fwd - bwd) / (dt * dt);
                    let r = masses_per_axis[a] * accel - forces[slot][a];
                    norm2 += r * r;
                }
                residuals.push(norm2.sqrt());
            }
            let denom = residuals.len().max(1);
            NewtonResidualReport {
                times: out_times,
                residual_norm: residuals,
                excluded_fraction: excluded as f64 / denom as f64,
            }
        })
        .collect::<Vec<_>>();
    if reports
        .iter()
        .all(|r| r.excluded_fraction >= 1.0 - 1e-12)
    {
        return Err(Error::Degenerate(
            "every sample fell in the node-masked region".into(),
        ));
    }
    Ok(reports)
}

/// Single-trajectory wrapper over the batch path.
pub fn newton_residual(
    trajectory: &Trajectory,
    record: &EvolutionRecord,
    node_epsilon: f64,
) -> Result<NewtonResidualReport> {
    Ok(newton_residual_batch(std::slice::from_ref(trajectory), record, node_epsilon)?
        .pop()
        .expect("one report per trajectory"))
}

/// Second-order dynamics under −∇(V+V_qu): positions and velocities from a
/// velocity-Verlet integration against the record's fields. Initial
/// velocities are free, which is exactly what distinguishes this flow from
/// the first-order guidance law.
#[derive(Clone, Debug)]
pub struct NewtonTrajectory {
    pub times: Vec<f64>,
    pub dim: usize,
    /// Time-major coordinates.
    pub points: Vec<f64>,
    /// Time-major velocities.
    pub velocities: Vec<f64>,
}

impl NewtonTrajectory {
    pub fn position(&self, ti: usize) -> &[f64] {
        &self.points[ti * self.dim..(ti + 1) * self.dim]
    }

    pub fn velocity(&self, ti: usize) -> &[f64] {
        &self.velocities[ti * self.dim..(ti + 1) * self.dim]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.position(self.times.len() - 1)
    }
}

pub fn integrate_newton(
    record: &EvolutionRecord,
    q0: &[f64],
    v0: &[f64],
    dt: f64,
    node_epsilon: f64,
) -> Result<NewtonTrajectory> {
    check_node_epsilon(node_epsilon)?;
    let grid = record.grid().clone();
    let dim = grid.dim();
    if q0.len() != dim || v0.len() != dim {
        return Err(Error::Domain(format!("q0 and v0 must have length D={dim}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let t0 = record.times()[0];
    let t1 = *record.times().last().unwrap();
    let steps = ((t1 - t0) / dt).round() as usize;
    if steps == 0 || ((t1 - t0) / dt - steps as f64).abs() > 1e-9 * steps as f64 {
        return Err(Error::Config(format!(
            "dt={dt} does not divide the record span {}",
            t1 - t0
        )));
    }
    let potential = record.potential().clone();
    let engine = SpectralEngine::new(grid.clone());
    let mut sampler = record.sampler();
    let masses: Vec<f64> = (0..dim).map(|a| record.initial().mass_of_axis(a)).collect();

    let mut q = q0.to_vec();
    let mut v = v0.to_vec();
    let mut times = vec![t0];
    let mut points = q.clone();
    let mut velocities = v.clone();
    let mut force = vec![0.0; dim];
    {
        let wave = sampler.wave_at(t0)?;
        let (f, _) = force_field(wave, &potential, &engine, node_epsilon)?;
        f.interpolate(&q, &mut force)?;
    }
    for s in 0..steps {
        let t_next = t0 + (s + 1) as f64 * dt;
        for a in 0..dim {
            q[a] += v[a] * dt + 0.5 * force[a] / masses[a] * dt * dt;
        }
        grid.wrap_point(&mut q);
        if !grid.contains(&q) {
            return Err(Error::Domain(format!(
                "newton trajectory left the box domain at t={t_next}"
            )));
        }
        let wave = sampler.wave_at(t_next)?;
        let (f_next, _) = force_field(wave, &potential, &engine, node_epsilon)?;
        let mut force_next = vec![0.0; dim];
        f_next.interpolate(&q, &mut force_next)?;
        for a in 0..dim {
            v[a] += 0.5 * (force[a] + force_next[a]) / masses[a] * dt;
        }
        force = force_next;
        times.push(t_next);
        points.extend_from_slice(&q);
        velocities.extend_from_slice(&v);
    }
    Ok(NewtonTrajectory {
        times,
        dim,
        points,
        velocities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grid};
    use std::sync::Arc;
    use crate::wavefunction::gaussian_packet;
    use num_complex::Complex64;

    fn line_grid(n: usize, extent: f64) -> Arc<Grid> {
        Arc::new(make_grid(1, 1, vec![n], vec![extent], Boundary::Periodic).unwrap())
    }

    #[test]
    fn harmonic_ground_state_balances_potential_and_quantum_potential() {
        // Symbolic oracle: V_qu = ħω/2 − mω²q²/2, so V + V_qu = ħω/2.
        let omega = 1.0;
        let grid = line_grid(256, 30.0);
        let psi = gaussian_packet(
            grid.clone(),
            &[0.0],
            &[(1.0f64 / (2.0 * omega)).sqrt()],
            &[0.0],
            vec![1.0],
            1.0,
        )
        .unwrap();
        let vqu = quantum_potential(&psi, 1e-6).unwrap();
        for p in 0..grid.len() {
            if !vqu.mask.is_valid(p) {
                continue;
            }
            let q = grid.axis_coord(0, p);
            let v = 0.5 * omega * omega * q * q;
            let total = v + vqu.field.values()[p];
            assert!(
                (total - 0.5 * omega).abs() < 1e-6,
                "at q={q}: V+V_qu = {total}"
            );
            let expect = 0.5 * omega - v;
            assert!((vqu.field.values()[p] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_modulus_has_zero_quantum_potential() {
        let grid = line_grid(128, 16.0);
        let k = 2.0 * std::f64::consts::PI * 3.0 / 16.0;
        let amps: Vec<Complex64> = (0..128)
            .map(|i| Complex64::from_polar(1.0, k * grid.axis_coord(0, i)))
            .collect();
        let psi = WaveFunction::new(grid, 1, amps, vec![1.0], 1.0)
            .unwrap()
            .normalize()
            .unwrap();
        let vqu = quantum_potential(&psi, 1e-6).unwrap();
        assert!(vqu.field.values().iter().all(|v| v.abs() < 1e-10));
        let ind = classicality_indicator(&psi, 1e-6).unwrap();
        assert!(ind.field.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn quantum_potential_ignores_global_phase() {
        let grid = line_grid(128, 30.0);
        let psi = gaussian_packet(grid, &[0.5], &[1.0], &[1.0], vec![1.0], 1.0).unwrap();
        // Multiplying by i permutes (re, im) exactly, so the densities agree
        // bit for bit.
        let mut rotated = psi.clone();
        rotated
            .amplitudes_mut()
            .iter_mut()
            .for_each(|a| *a = Complex64::new(0.0, 1.0) * *a);
        let a = quantum_potential(&psi, 1e-6).unwrap();
        let b = quantum_potential(&rotated, 1e-6).unwrap();
        assert_eq!(a.field.values(), b.field.values());
        // A generic phase agrees to roundoff.
        let mut generic = psi.clone();
        generic
            .amplitudes_mut()
            .iter_mut()
            .for_each(|a| *a *= Complex64::from_polar(1.0, 0.777));
        let c = quantum_potential(&generic, 1e-6).unwrap();
        for p in 0..a.field.values().len() {
            assert!((a.field.values()[p] - c.field.values()[p]).abs() < 1e-9);
        }
    }

    #[test]
    fn classicality_indicator_matches_the_symbolic_gradient() {
        let omega = 1.0;
        let grid = line_grid(512, 30.0);
        let psi = gaussian_packet(
            grid.clone(),
            &[0.0],
            &[(1.0f64 / (2.0 * omega)).sqrt()],
            &[0.0],
            vec![1.0],
            1.0,
        )
        .unwrap();
        let ind = classicality_indicator(&psi, 1e-6).unwrap();
        for p in 0..grid.len() {
            let q = grid.axis_coord(0, p);
            if !ind.mask.is_valid(p) || q.abs() > 2.0 {
                continue;
            }
            let expect = omega * omega * q.abs();
            assert!(
                (ind.field.values()[p] - expect).abs() < 1e-5,
                "at q={q}: {} vs {expect}",
                ind.field.values()[p]
            );
        }
    }

    #[test]
    fn wider_packets_are_more_classical() {
        // V_qu scales as σ⁻², its gradient as σ⁻³: doubling σ divides the
        // indicator by 8 at matched relative positions q = α·σ.
        let grid = line_grid(512, 60.0);
        let narrow = gaussian_packet(grid.clone(), &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let wide = gaussian_packet(grid, &[0.0], &[2.0], &[0.0], vec![1.0], 1.0).unwrap();
        let ind_narrow = classicality_indicator(&narrow, 1e-6).unwrap();
        let ind_wide = classicality_indicator(&wide, 1e-6).unwrap();
        for alpha in [0.8, 1.5, 2.2] {
            let a = ind_narrow.field.interpolate(&[alpha]).unwrap();
            let b = ind_wide.field.interpolate(&[2.0 * alpha]).unwrap();
            let ratio = a / b;
            assert!((ratio - 8.0).abs() < 0.05, "scaling ratio {ratio} at α={alpha}");
        }
    }
}
