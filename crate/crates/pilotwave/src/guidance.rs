//! The velocity law: probability currents and velocity fields on the grid,
//! and pointwise probes for trajectory integration.
//!
//! Scalar states use v_k = (ħ/m_k)·Im(∇_k ψ/ψ); spinors use the component-
//! summed form (ħ/m_k)·Im(ψ†∇_k ψ)/(ψ†ψ). Both are computed as current over
//! density so nodes can be regularized in one place: wherever the density
//! falls below `node_epsilon · max(density)` the quotient gains an absolute
//! floor of that same magnitude and the sample is flagged rather than
//! rejected.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{check_node_epsilon, Mask, MaskedVectorField, ScalarField, VectorField};
use crate::spectral::SpectralEngine;
use crate::wavefunction::WaveFunction;

/// j_k = (ħ/m_k)·Im(ψ†∇_kψ) as a real vector field.
pub fn probability_current(psi: &WaveFunction) -> VectorField {
    let grid = psi.grid().clone();
    let engine = SpectralEngine::new(grid.clone());
    probability_current_with(psi, &engine)
}

pub(crate) fn probability_current_with(psi: &WaveFunction, engine: &SpectralEngine) -> VectorField {
    let grid = psi.grid().clone();
    let dim = grid.dim();
    let len = grid.len();
    let c = psi.components();
    let mut out = VectorField::zeros(grid);
    for a in 0..dim {
        let grad = engine.derivative_axis_aware(psi.amplitudes(), c, a);
        let scale = psi.hbar() / psi.mass_of_axis(a);
        let vals = out.values_mut();
        for p in 0..len {
            let mut im = 0.0;
            for s in 0..c {
                let amp = psi.amplitudes()[p * c + s];
                im += (amp.conj() * grad[p * c + s]).im;
            }
            vals[p * dim + a] = scale * im;
        }
    }
    out
}

/// v = j/ρ wherever ρ ≥ node_epsilon·max(ρ); masked (and zeroed) elsewhere.
pub fn velocity_field(psi: &WaveFunction, node_epsilon: f64) -> Result<MaskedVectorField> {
    check_node_epsilon(node_epsilon)?;
    let current = probability_current(psi);
    let density = psi.density();
    let mask = Mask::from_density(&density, node_epsilon);
    let dim = psi.grid().dim();
    let mut field = current;
    let vals = field.values_mut();
    for p in 0..density.values().len() {
        if mask.is_valid(p) {
            let inv = 1.0 / density.values()[p];
            for a in 0..dim {
                vals[p * dim + a] *= inv;
            }
        } else {
            for a in 0..dim {
                vals[p * dim + a] = 0.0;
            }
        }
    }
    Ok(MaskedVectorField { field, mask })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Interpolation {
    /// Multilinear interpolation of the current and density grids.
    Multilinear,
    /// Exact Fourier-series evaluation of ψ and ∇ψ (periodic grids only);
    /// slower, used for convergence studies.
    Spectral,
}

/// Immutable velocity evaluator for one wave-function snapshot; safe to share
/// across workers for data-parallel ensemble sweeps.
pub struct VelocityProbe {
    interpolation: Interpolation,
    node_epsilon: f64,
    density_floor: f64,
    density: ScalarField,
    current: VectorField,
    /// Spectral mode: ψ̂ amplitudes (unnormalized DFT) and per-axis data.
    spectral: Option<SpectralData>,
    masses: Vec<f64>,
    hbar: f64,
}

struct SpectralData {
    hat: Vec<Complex64>,
    components: usize,
    wavenumbers: Vec<Vec<f64>>,
}

impl VelocityProbe {
    pub fn new(psi: &WaveFunction, interpolation: Interpolation, node_epsilon: f64) -> Result<Self> {
        check_node_epsilon(node_epsilon)?;
        let engine = SpectralEngine::new(psi.grid().clone());
        Self::with_engine(psi, &engine, interpolation, node_epsilon)
    }

    pub(crate) fn with_engine(
        psi: &WaveFunction,
        engine: &SpectralEngine,
        interpolation: Interpolation,
        node_epsilon: f64,
    ) -> Result<Self> {
        check_node_epsilon(node_epsilon)?;
        let density = psi.density();
        let current = probability_current_with(psi, engine);
        let density_floor = node_epsilon * density.max();
        let spectral = match interpolation {
            Interpolation::Multilinear => None,
            Interpolation::Spectral => {
                if psi.grid().boundary() != crate::grid::Boundary::Periodic {
                    return Err(Error::Config(
                        "spectral interpolation requires a periodic grid".into(),
                    ));
                }
                let mut hat = psi.amplitudes().to_vec();
                engine.fft(&mut hat, psi.components());
                Some(SpectralData {
                    hat,
                    components: psi.components(),
                    wavenumbers: (0..psi.grid().dim())
                        .map(|a| engine.wavenumbers(a).to_vec())
                        .collect(),
                })
            }
        };
        Ok(Self {
            interpolation,
            node_epsilon,
            density_floor,
            density,
            current,
            spectral,
            masses: psi.masses().to_vec(),
            hbar: psi.hbar(),
        })
    }

    pub fn node_epsilon(&self) -> f64 {
        self.node_epsilon
    }

    pub fn grid(&self) -> &Arc<crate::grid::Grid> {
        self.density.grid()
    }

    pub fn density_at(&self, q: &[f64]) -> Result<f64> {
        match self.interpolation {
            Interpolation::Multilinear => self.density.interpolate(q),
            Interpolation::Spectral => {
                let (rho, _) = self.spectral_density_current(q);
                Ok(rho)
            }
        }
    }

    /// Velocity at `q`; returns true when the node floor was engaged.
    /// Outside a box domain this is a domain error.
    pub fn velocity_at(&self, q: &[f64], out: &mut [f64]) -> Result<bool> {
        let dim = self.grid().dim();
        debug_assert_eq!(out.len(), dim);
        let rho = match self.interpolation {
            Interpolation::Multilinear => {
                self.current.interpolate(q, out)?;
                self.density.interpolate(q)?
            }
            Interpolation::Spectral => {
                let (rho, j) = self.spectral_density_current(q);
                out.copy_from_slice(&j);
                rho
            }
        };
        let regularized = rho < self.density_floor;
        let denom = if regularized {
            rho.max(0.0) + self.density_floor
        } else {
            rho
        };
        for v in out.iter_mut() {
            *v /= denom;
        }
        Ok(regularized)
    }

    /// ρ(q) and j(q) from the Fourier series of ψ.
    fn spectral_density_current(&self, q: &[f64]) -> (f64, Vec<f64>) {
        let data = self.spectral.as_ref().expect("spectral mode");
        let grid = self.density.grid();
        let dim = grid.dim();
        let c = data.components;
        let len = grid.len();
        let mut qw = q.to_vec();
        grid.wrap_point(&mut qw);
        let mut psi = vec![Complex64::default(); c];
        let mut dpsi = vec![Complex64::default(); c * dim];
        let mut multi = vec![0usize; dim];
        for p in 0..len {
            grid.multi_index(p, &mut multi);
            let mut angle = 0.0;
            for a in 0..dim {
                let k = data.wavenumbers[a][multi[a]];
                angle += k * (qw[a] + 0.5 * grid.extents()[a]);
            }
            let basis = Complex64::from_polar(1.0, angle);
            for s in 0..c {
                let coeff = data.hat[p * c + s] * basis;
                psi[s] += coeff;
                for a in 0..dim {
                    let k = data.wavenumbers[a][multi[a]];
                    dpsi[s * dim + a] += coeff * Complex64::new(0.0, k);
                }
            }
        }
        let scale = 1.0 / len as f64;
        let mut rho = 0.0;
        for s in 0..c {
            psi[s] *= scale;
            rho += psi[s].norm_sqr();
        }
        let mut j = vec![0.0; dim];
        for a in 0..dim {
            let mut im = 0.0;
            for s in 0..c {
                im += (psi[s].conj() * dpsi[s * dim + a] * scale).im;
            }
            j[a] = self.hbar / self.masses[grid.particle_of_axis(a)] * im;
        }
        (rho, j)
    }
}

/// L¹ residual of the discrete continuity equation ∂ρ/∂t + div j = 0 between
/// two consecutive snapshots separated by `dt` (spatial terms averaged for
/// second-order accuracy in time).
pub fn continuity_residual(a: &WaveFunction, b: &WaveFunction, dt: f64) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::Domain("snapshots live on different grids".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let engine = SpectralEngine::new(a.grid().clone());
    let div_a = engine.divergence(&probability_current_with(a, &engine));
    let div_b = engine.divergence(&probability_current_with(b, &engine));
    let rho_a = a.density();
    let rho_b = b.density();
    let cell = a.grid().cell_volume();
    let mut acc = 0.0;
    for p in 0..a.grid().len() {
        let drho = (rho_b.values()[p] - rho_a.values()[p]) / dt;
        let div = 0.5 * (div_a.values()[p] + div_b.values()[p]);
        acc += (drho + div).abs();
    }
    Ok(acc * cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Boundary};
    use crate::wavefunction::gaussian_packet;

    fn ring_state(n: usize, extent: f64, winding: i32) -> WaveFunction {
        let grid = Arc::new(make_grid(1, 1, vec![n], vec![extent], Boundary::Periodic).unwrap());
        let k = 2.0 * std::f64::consts::PI * winding as f64 / extent;
        let amps: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, k * grid.axis_coord(0, i)))
            .collect();
        WaveFunction::new(grid, 1, amps, vec![1.0], 1.0)
            .unwrap()
            .normalize()
            .unwrap()
    }

    #[test]
    fn real_states_carry_no_current() {
        let grid = Arc::new(make_grid(1, 1, vec![128], vec![30.0], Boundary::Periodic).unwrap());
        let psi = gaussian_packet(grid, &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let j = probability_current(&psi);
        assert!(j.values().iter().all(|v| v.abs() < 1e-12));
        let v = velocity_field(&psi, 1e-6).unwrap();
        for p in 0..128 {
            if v.mask.is_valid(p) {
                assert!(v.field.values()[p].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ring_state_current_is_uniform() {
        let winding = 2;
        let extent = 2.0 * std::f64::consts::PI;
        let psi = ring_state(256, extent, winding);
        let j = probability_current(&psi);
        // ħ·m_w/(M·L) with ħ = M = 1: uniform density 1/L times velocity k.
        let expect = winding as f64 / extent;
        // Cross-check with a plain finite-difference evaluation.
        let h = psi.grid().spacing(0);
        let amps = psi.amplitudes();
        for p in 0..256 {
            assert!((j.values()[p] - expect).abs() < 1e-9, "{}", j.values()[p]);
            let next = amps[(p + 1) % 256];
            let prev = amps[(p + 255) % 256];
            let fd = (psi.amplitudes()[p].conj() * (next - prev) / (2.0 * h)).im;
            // 2nd-order FD carries an O(h²k³) bias; agreement is loose.
            assert!((j.values()[p] - fd).abs() < 1e-2 * expect.abs().max(1e-9));
        }
    }

    #[test]
    fn boosted_packet_velocity_is_hbar_k_over_m() {
        let grid = Arc::new(make_grid(1, 1, vec![256], vec![40.0], Boundary::Periodic).unwrap());
        let k = 2.0;
        let mass = 1.5;
        let psi = gaussian_packet(grid, &[0.0], &[1.0], &[k], vec![mass], 1.0).unwrap();
        let v = velocity_field(&psi, 1e-6).unwrap();
        for p in 0..256 {
            if v.mask.is_valid(p) {
                assert!(
                    (v.field.values()[p] - k / mass).abs() < 1e-6,
                    "at {p}: {}",
                    v.field.values()[p]
                );
            }
        }
    }

    #[test]
    fn standing_wave_velocity_vanishes_and_nodes_are_masked() {
        // cos(kq) ∝ e^{ikq} + e^{-ikq}: real, so v = 0 away from the nodes.
        let grid = Arc::new(make_grid(1, 1, vec![256], vec![8.0], Boundary::Periodic).unwrap());
        let k = 2.0 * std::f64::consts::PI * 4.0 / 8.0;
        let amps: Vec<Complex64> = (0..256)
            .map(|i| Complex64::new((k * grid.axis_coord(0, i)).cos(), 0.0))
            .collect();
        let psi = WaveFunction::new(grid, 1, amps, vec![1.0], 1.0)
            .unwrap()
            .normalize()
            .unwrap();
        let v = velocity_field(&psi, 1e-6).unwrap();
        let mut masked = 0;
        for p in 0..256 {
            if v.mask.is_valid(p) {
                assert!(v.field.values()[p].abs() < 1e-9);
            } else {
                masked += 1;
            }
        }
        assert!(masked > 0, "exact nodes must be masked");
    }

    #[test]
    fn quotient_identity_holds_on_unmasked_points() {
        let grid = Arc::new(make_grid(1, 1, vec![128], vec![30.0], Boundary::Periodic).unwrap());
        let psi = gaussian_packet(grid, &[1.0], &[1.3], &[0.7], vec![1.0], 1.0).unwrap();
        let v = velocity_field(&psi, 1e-6).unwrap();
        let j = probability_current(&psi);
        let rho = psi.density();
        for p in 0..128 {
            if v.mask.is_valid(p) {
                let expect = j.values()[p] / rho.values()[p];
                let got = v.field.values()[p];
                assert!((got - expect).abs() <= 1e-10 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn probe_is_exact_on_lattice_points() {
        let grid = Arc::new(make_grid(1, 1, vec![128], vec![30.0], Boundary::Periodic).unwrap());
        let psi = gaussian_packet(grid.clone(), &[0.5], &[1.1], &[1.0], vec![1.0], 1.0).unwrap();
        let probe = VelocityProbe::new(&psi, Interpolation::Multilinear, 1e-6).unwrap();
        let v = velocity_field(&psi, 1e-6).unwrap();
        let mut out = [0.0];
        for p in (0..128).step_by(11) {
            if !v.mask.is_valid(p) {
                continue;
            }
            let q = [grid.axis_coord(0, p)];
            let reg = probe.velocity_at(&q, &mut out).unwrap();
            assert!(!reg);
            assert!((out[0] - v.field.values()[p]).abs() < 1e-10);
        }
    }

    #[test]
    fn spinor_with_empty_component_matches_scalar() {
        let grid = Arc::new(make_grid(1, 1, vec![128], vec![30.0], Boundary::Periodic).unwrap());
        let scalar = gaussian_packet(grid, &[0.0], &[1.0], &[1.4], vec![1.0], 1.0).unwrap();
        let spinor = crate::wavefunction::with_spinor(
            &scalar,
            &[Complex64::new(1.0, 0.0), Complex64::default()],
        )
        .unwrap();
        let ps = VelocityProbe::new(&scalar, Interpolation::Multilinear, 1e-6).unwrap();
        let pv = VelocityProbe::new(&spinor, Interpolation::Multilinear, 1e-6).unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        for q in [-3.3, -0.7, 0.0, 1.9] {
            ps.velocity_at(&[q], &mut a).unwrap();
            pv.velocity_at(&[q], &mut b).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn node_floor_keeps_velocities_finite() {
        let grid = Arc::new(make_grid(1, 1, vec![256], vec![8.0], Boundary::Periodic).unwrap());
        let k = 2.0 * std::f64::consts::PI * 4.0 / 8.0;
        // Slightly complex standing wave so the current is nonzero near nodes.
        let amps: Vec<Complex64> = (0..256)
            .map(|i| {
                let x = grid.axis_coord(0, i);
                Complex64::new((k * x).cos(), 1e-4 * (k * x).sin())
            })
            .collect();
        let psi = WaveFunction::new(grid, 1, amps, vec![1.0], 1.0)
            .unwrap()
            .normalize()
            .unwrap();
        let probe = VelocityProbe::new(&psi, Interpolation::Multilinear, 1e-6).unwrap();
        let mut out = [0.0];
        // x = 0.5 is both a lattice point and a node of cos(πx).
        let reg = probe.velocity_at(&[0.5], &mut out).unwrap();
        assert!(reg);
        assert!(out[0].is_finite());
    }

    #[test]
    fn spectral_probe_matches_multilinear_off_lattice() {
        let grid = Arc::new(make_grid(1, 1, vec![256], vec![30.0], Boundary::Periodic).unwrap());
        let psi = gaussian_packet(grid, &[0.0], &[1.2], &[1.0], vec![1.0], 1.0).unwrap();
        let pm = VelocityProbe::new(&psi, Interpolation::Multilinear, 1e-6).unwrap();
        let ps = VelocityProbe::new(&psi, Interpolation::Spectral, 1e-6).unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        for q in [-1.234, 0.377, 2.001] {
            pm.velocity_at(&[q], &mut a).unwrap();
            ps.velocity_at(&[q], &mut b).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-3, "{} vs {}", a[0], b[0]);
        }
    }
}
