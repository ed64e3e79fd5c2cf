//! Complex amplitudes on a grid: scalar wave functions and 2^N-component
//! spinors, with the quadrature-weighted scalar product.
//!
//! Amplitude layout is point-major: `amplitudes[p*C + s]` is spinor component
//! `s` at lattice point `p`. The density of a spinor is the component sum
//! Σ_s |ψ_s|², which reduces to |ψ|² for scalars.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

#[derive(Clone, Debug)]
pub struct WaveFunction {
    grid: Arc<Grid>,
    components: usize,
    amplitudes: Vec<Complex64>,
    masses: Vec<f64>,
    hbar: f64,
}

impl WaveFunction {
    pub fn new(
        grid: Arc<Grid>,
        components: usize,
        amplitudes: Vec<Complex64>,
        masses: Vec<f64>,
        hbar: f64,
    ) -> Result<Self> {
        if components != 1 && components != 1usize << grid.particle_count() {
            return Err(Error::Config(format!(
                "component count must be 1 or 2^N = {}, got {components}",
                1usize << grid.particle_count()
            )));
        }
        if amplitudes.len() != grid.len() * components {
            return Err(Error::Config(format!(
                "amplitude length {} does not match {} points x {components} components",
                amplitudes.len(),
                grid.len()
            )));
        }
        if masses.len() != grid.particle_count() {
            return Err(Error::Config(format!(
                "need {} masses, got {}",
                grid.particle_count(),
                masses.len()
            )));
        }
        if masses.iter().any(|&m| !(m > 0.0)) || !(hbar > 0.0) {
            return Err(Error::Domain("masses and hbar must be positive".into()));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Domain("amplitudes must be finite".into()));
        }
        Ok(Self {
            grid,
            components,
            amplitudes,
            masses,
            hbar,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass associated with a configuration-space axis.
    pub fn mass_of_axis(&self, axis: usize) -> f64 {
        self.masses[self.grid.particle_of_axis(axis)]
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn amplitude(&self, point: usize, component: usize) -> Complex64 {
        self.amplitudes[point * self.components + component]
    }

    /// Quadrature-weighted squared norm ∫ ψ†ψ.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// ψ†ψ as a scalar field (|ψ|² for scalar states).
    pub fn density(&self) -> ScalarField {
        let c = self.components;
        let vals: Vec<f64> = self
            .amplitudes
            .chunks(c)
            .map(|spin| spin.iter().map(|a| a.norm_sqr()).sum())
            .collect();
        ScalarField::new(self.grid.clone(), vals).expect("shape by construction")
    }

    /// Rescale to unit norm.
    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm(format!("cannot normalize state with norm {n}")));
        }
        let inv = 1.0 / n;
        self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        Ok(self)
    }

    /// Complex conjugate (used for time-reversal checks).
    pub fn conjugate(&self) -> Self {
        let mut out = self.clone();
        out.amplitudes.iter_mut().for_each(|a| *a = a.conj());
        out
    }

    /// Total density in the outermost lattice shell; small values indicate the
    /// state fits the grid.
    pub fn boundary_tail_mass(&self) -> f64 {
        let grid = &self.grid;
        let dim = grid.dim();
        let density = self.density();
        let mut multi = vec![0usize; dim];
        let mut mass = 0.0;
        for p in 0..grid.len() {
            grid.multi_index(p, &mut multi);
            let on_shell = (0..dim).any(|a| multi[a] == 0 || multi[a] == grid.points()[a] - 1);
            if on_shell {
                mass += density.values()[p];
            }
        }
        mass * grid.cell_volume()
    }
}

/// Scalar product ⟨φ|ψ⟩ = ∫ φ†ψ, conjugate-linear in the first argument.
pub fn inner_product(phi: &WaveFunction, psi: &WaveFunction) -> Result<Complex64> {
    if phi.grid != psi.grid || phi.components != psi.components {
        return Err(Error::Domain(
            "inner product requires matching grids and component counts".into(),
        ));
    }
    let s: Complex64 = phi
        .amplitudes
        .iter()
        .zip(&psi.amplitudes)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(s * phi.grid.cell_volume())
}

/// Normalized Gaussian packet exp(−Σ (q−c)²/4σ² + i k·q).
///
/// Construction never fails on wide packets; callers that care about
/// truncation check [`WaveFunction::boundary_tail_mass`] against their own
/// accuracy policy.
pub fn gaussian_packet(
    grid: Arc<Grid>,
    center: &[f64],
    sigma: &[f64],
    wavevector: &[f64],
    masses: Vec<f64>,
    hbar: f64,
) -> Result<WaveFunction> {
    let dim = grid.dim();
    if center.len() != dim || sigma.len() != dim || wavevector.len() != dim {
        return Err(Error::Config(format!(
            "center, sigma and wavevector must have length D={dim}"
        )));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Domain("packet widths must be positive".into()));
    }
    let len = grid.len();
    let mut amplitudes = Vec::with_capacity(len);
    let mut q = vec![0.0; dim];
    for p in 0..len {
        grid.point_coords(p, &mut q);
        let mut log_mod = 0.0;
        let mut phase = 0.0;
        for a in 0..dim {
            let dq = q[a] - center[a];
            log_mod -= dq * dq / (4.0 * sigma[a] * sigma[a]);
            phase += wavevector[a] * q[a];
        }
        amplitudes.push(Complex64::from_polar(log_mod.exp(), phase));
    }
    WaveFunction::new(grid, 1, amplitudes, masses, hbar)?.normalize()
}

/// Product of a scalar wave function with a constant spinor, normalized.
pub fn with_spinor(scalar: &WaveFunction, spinor: &[Complex64]) -> Result<WaveFunction> {
    if scalar.components != 1 {
        return Err(Error::Domain("spinor attachment needs a scalar state".into()));
    }
    let c = 1usize << scalar.grid.particle_count();
    if spinor.len() != c {
        return Err(Error::Config(format!(
            "spinor must have 2^N = {c} components, got {}",
            spinor.len()
        )));
    }
    let mut amplitudes = Vec::with_capacity(scalar.amplitudes.len() * c);
    for a in &scalar.amplitudes {
        for s in spinor {
            amplitudes.push(a * s);
        }
    }
    WaveFunction::new(
        scalar.grid.clone(),
        c,
        amplitudes,
        scalar.masses.clone(),
        scalar.hbar,
    )?
    .normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Boundary};

    fn line_grid(n: usize, extent: f64) -> Arc<Grid> {
        Arc::new(make_grid(1, 1, vec![n], vec![extent], Boundary::Periodic).unwrap())
    }

    #[test]
    fn gaussian_packet_is_normalized() {
        let g = line_grid(256, 40.0);
        let wf = gaussian_packet(g, &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        assert!((wf.norm() - 1.0).abs() < 1e-12);
        assert!((wf.density().integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_wavevector_packet_is_real_and_positive() {
        let g = line_grid(128, 30.0);
        let wf = gaussian_packet(g, &[1.0], &[2.0], &[0.0], vec![1.0], 1.0).unwrap();
        assert!(wf.amplitudes().iter().all(|a| a.im == 0.0 && a.re > 0.0));
    }

    #[test]
    fn inner_product_is_hermitian_and_positive() {
        let g = line_grid(128, 30.0);
        let f = gaussian_packet(g.clone(), &[0.0], &[1.0], &[1.0], vec![1.0], 1.0).unwrap();
        let h = gaussian_packet(g, &[2.0], &[1.5], &[0.0], vec![1.0], 1.0).unwrap();
        let ff = inner_product(&f, &f).unwrap();
        assert!(ff.im.abs() < 1e-14 && ff.re > 0.0);
        let fh = inner_product(&f, &h).unwrap();
        let hf = inner_product(&h, &f).unwrap();
        assert!((fh - hf.conj()).norm() < 1e-14);
    }

    #[test]
    fn inner_product_is_conjugate_linear_in_first_argument() {
        let g = line_grid(64, 20.0);
        let f = gaussian_packet(g.clone(), &[0.0], &[1.0], &[1.0], vec![1.0], 1.0).unwrap();
        let h = gaussian_packet(g.clone(), &[1.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let c = Complex64::new(0.3, -0.8);
        let mut cf = f.clone();
        cf.amplitudes_mut().iter_mut().for_each(|a| *a *= c);
        let lhs = inner_product(&cf, &h).unwrap();
        let rhs = c.conj() * inner_product(&f, &h).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn spinor_density_sums_component_moduli() {
        let g = line_grid(64, 20.0);
        let f = gaussian_packet(g, &[0.0], &[1.0], &[0.0], vec![1.0], 1.0).unwrap();
        let up = Complex64::new(0.6, 0.0);
        let down = Complex64::new(0.0, 0.8);
        let s = with_spinor(&f, &[up, down]).unwrap();
        let spin_density = s.density();
        let scalar_density = f.density();
        for p in 0..spin_density.values().len() {
            // |a|^2 + |b|^2 pointwise with |up|^2 + |down|^2 = 1.
            assert!((spin_density.values()[p] - scalar_density.values()[p]).abs() < 1e-12);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_zero_states() {
        let g = line_grid(8, 4.0);
        let wf = WaveFunction::new(
            g,
            1,
            vec![Complex64::default(); 8],
            vec![1.0],
            1.0,
        )
        .unwrap();
        assert!(matches!(wf.normalize(), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn tail_mass_flags_packets_wider_than_the_grid() {
        let narrow = gaussian_packet(line_grid(256, 40.0), &[0.0], &[1.0], &[0.0], vec![1.0], 1.0)
            .unwrap();
        assert!(narrow.boundary_tail_mass() < 1e-8);
        let wide = gaussian_packet(line_grid(32, 4.0), &[0.0], &[2.0], &[0.0], vec![1.0], 1.0)
            .unwrap();
        assert!(wide.boundary_tail_mass() > 1e-3);
    }
}
