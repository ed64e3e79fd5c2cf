//! Potential functions over configuration space.
//!
//! Structured kinds carry analytic gradients; tabulated potentials were
//! sampled elsewhere and are differentiated numerically by callers. Box grids
//! confine the dynamics with a high wall inside the periodic lattice so a
//! single FFT code path serves both boundary types.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{Boundary, Grid};

/// Height of the confining wall used for box boundaries (natural units).
pub const BOX_WALL_HEIGHT: f64 = 1e6;
/// Lattice cells occupied by the wall on each side of every axis.
pub const BOX_WALL_CELLS: usize = 2;
/// Sampled potentials on box grids must reach at least this value in the wall
/// shell for the spectral stepper to accept them.
pub const BOX_WALL_MIN: f64 = 1e4;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// ½ Σ_a m_a ω_a² q_a², one angular frequency per axis.
    Harmonic { omega: Vec<f64> },
    /// Σ_{j<k} e_j e_k / sqrt(|q_j − q_k|² + a²): the soft-core stand-in for
    /// the singular Coulomb kernel.
    SoftCoulomb { charges: Vec<f64>, softening: f64 },
    /// Σ_a slope_a · q_a.
    LinearGradient { slope: Vec<f64> },
    /// Arbitrary tabulated values on the grid.
    #[serde(skip)]
    CustomTable(ScalarField),
}

impl PotentialSpec {
    pub fn validate(&self, grid: &Grid, masses: &[f64]) -> Result<()> {
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::Harmonic { omega } => {
                if omega.len() != grid.dim() {
                    return Err(Error::Config(format!(
                        "harmonic potential needs {} frequencies, got {}",
                        grid.dim(),
                        omega.len()
                    )));
                }
                Ok(())
            }
            PotentialSpec::SoftCoulomb { charges, softening } => {
                if charges.len() != grid.particle_count() {
                    return Err(Error::Config(format!(
                        "soft-core potential needs {} charges, got {}",
                        grid.particle_count(),
                        charges.len()
                    )));
                }
                if !(*softening > 0.0) {
                    return Err(Error::Domain("softening must be positive".into()));
                }
                Ok(())
            }
            PotentialSpec::LinearGradient { slope } => {
                if slope.len() != grid.dim() {
                    return Err(Error::Config(format!(
                        "linear potential needs {} slopes, got {}",
                        grid.dim(),
                        slope.len()
                    )));
                }
                Ok(())
            }
            PotentialSpec::CustomTable(field) => {
                if field.grid().as_ref() != grid {
                    return Err(Error::Config(
                        "tabulated potential grid does not match".into(),
                    ));
                }
                let _ = masses;
                Ok(())
            }
        }
    }

    /// Potential value at a configuration point (without the box wall).
    pub fn value_at(&self, grid: &Grid, masses: &[f64], q: &[f64]) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Harmonic { omega } => q
                .iter()
                .enumerate()
                .map(|(a, &x)| {
                    let m = masses[grid.particle_of_axis(a)];
                    0.5 * m * omega[a] * omega[a] * x * x
                })
                .sum(),
            PotentialSpec::SoftCoulomb { charges, softening } => {
                let d = grid.dims_per_particle();
                let n = grid.particle_count();
                let mut v = 0.0;
                for j in 0..n {
                    for k in j + 1..n {
                        let mut r2 = 0.0;
                        for a in 0..d {
                            let dq = q[j * d + a] - q[k * d + a];
                            r2 += dq * dq;
                        }
                        v += charges[j] * charges[k] / (r2 + softening * softening).sqrt();
                    }
                }
                v
            }
            PotentialSpec::LinearGradient { slope } => {
                q.iter().zip(slope).map(|(&x, &s)| s * x).sum()
            }
            PotentialSpec::CustomTable(field) => {
                field.interpolate(q).unwrap_or(0.0)
            }
        }
    }

    /// Analytic force −∇V at a configuration point (without the box wall).
    /// Tabulated potentials are not differentiable here; callers use the
    /// sampled-field route instead.
    pub fn gradient_at(&self, grid: &Grid, masses: &[f64], q: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            PotentialSpec::Zero => {}
            PotentialSpec::Harmonic { omega } => {
                for (a, o) in out.iter_mut().enumerate() {
                    let m = masses[grid.particle_of_axis(a)];
                    *o = m * omega[a] * omega[a] * q[a];
                }
            }
            PotentialSpec::SoftCoulomb { charges, softening } => {
                let d = grid.dims_per_particle();
                let n = grid.particle_count();
                for j in 0..n {
                    for k in j + 1..n {
                        let mut r2 = 0.0;
                        for a in 0..d {
                            let dq = q[j * d + a] - q[k * d + a];
                            r2 += dq * dq;
                        }
                        let denom = (r2 + softening * softening).powf(1.5);
                        for a in 0..d {
                            let dq = q[j * d + a] - q[k * d + a];
                            let g = -charges[j] * charges[k] * dq / denom;
                            out[j * d + a] += g;
                            out[k * d + a] -= g;
                        }
                    }
                }
            }
            PotentialSpec::LinearGradient { slope } => {
                out.copy_from_slice(slope);
            }
            PotentialSpec::CustomTable(_) => {}
        }
    }

    /// Sample the potential on the grid. Structured kinds grow the confining
    /// wall on box grids so the periodic spectral stepper can handle them;
    /// tabulated potentials are trusted as-is (the stepper checks the wall
    /// shell and rejects tables without one).
    pub fn sample(&self, grid: &Arc<Grid>, masses: &[f64]) -> Result<ScalarField> {
        self.validate(grid, masses)?;
        let len = grid.len();
        let dim = grid.dim();
        let mut vals = vec![0.0; len];
        let mut q = vec![0.0; dim];
        let mut multi = vec![0usize; dim];
        let auto_wall =
            grid.boundary() == Boundary::Box && !matches!(self, PotentialSpec::CustomTable(_));
        for (p, v) in vals.iter_mut().enumerate() {
            grid.point_coords(p, &mut q);
            *v = self.value_at(grid, masses, &q);
            if auto_wall {
                grid.multi_index(p, &mut multi);
                let in_wall = (0..dim).any(|a| {
                    multi[a] < BOX_WALL_CELLS || multi[a] >= grid.points()[a] - BOX_WALL_CELLS
                });
                if in_wall {
                    *v += BOX_WALL_HEIGHT;
                }
            }
        }
        ScalarField::new(grid.clone(), vals)
    }

    /// Sampled analytic gradient as a vector field (structured kinds only).
    pub fn sample_gradient(&self, grid: &Arc<Grid>, masses: &[f64]) -> Result<VectorField> {
        self.validate(grid, masses)?;
        if matches!(self, PotentialSpec::CustomTable(_)) {
            return Err(Error::Config(
                "tabulated potentials have no analytic gradient; differentiate the sampled field"
                    .into(),
            ));
        }
        let len = grid.len();
        let dim = grid.dim();
        let mut vals = vec![0.0; len * dim];
        let mut q = vec![0.0; dim];
        let mut g = vec![0.0; dim];
        for p in 0..len {
            grid.point_coords(p, &mut q);
            self.gradient_at(grid, masses, &q, &mut g);
            vals[p * dim..(p + 1) * dim].copy_from_slice(&g);
        }
        VectorField::new(grid.clone(), vals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn harmonic_value_and_gradient_agree() {
        let g = Arc::new(make_grid(1, 1, vec![64], vec![20.0], Boundary::Periodic).unwrap());
        let v = PotentialSpec::Harmonic { omega: vec![2.0] };
        let q = [1.5];
        assert!((v.value_at(&g, &[3.0], &q) - 0.5 * 3.0 * 4.0 * 2.25).abs() < 1e-12);
        let mut grad = [0.0];
        v.gradient_at(&g, &[3.0], &q, &mut grad);
        assert!((grad[0] - 3.0 * 4.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn soft_coulomb_is_finite_at_coincidence() {
        let g = Arc::new(make_grid(1, 2, vec![16, 16], vec![10.0, 10.0], Boundary::Periodic).unwrap());
        let v = PotentialSpec::SoftCoulomb {
            charges: vec![1.0, -1.0],
            softening: 0.5,
        };
        let val = v.value_at(&g, &[1.0, 1.0], &[0.3, 0.3]);
        assert!((val - (-1.0 / 0.5)).abs() < 1e-12);
    }

    #[test]
    fn soft_coulomb_gradient_matches_finite_difference() {
        let g = Arc::new(make_grid(1, 2, vec![16, 16], vec![10.0, 10.0], Boundary::Periodic).unwrap());
        let v = PotentialSpec::SoftCoulomb {
            charges: vec![1.0, 1.0],
            softening: 0.7,
        };
        let masses = [1.0, 1.0];
        let q = [0.4, -0.9];
        let mut grad = [0.0, 0.0];
        v.gradient_at(&g, &masses, &q, &mut grad);
        let eps = 1e-6;
        for a in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[a] += eps;
            qm[a] -= eps;
            let fd = (v.value_at(&g, &masses, &qp) - v.value_at(&g, &masses, &qm)) / (2.0 * eps);
            assert!((grad[a] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn box_sampling_adds_the_wall_shell() {
        let g = Arc::new(make_grid(1, 1, vec![32], vec![10.0], Boundary::Box).unwrap());
        let f = PotentialSpec::Zero.sample(&g, &[1.0]).unwrap();
        assert!(f.values()[0] >= BOX_WALL_MIN);
        assert!(f.values()[1] >= BOX_WALL_MIN);
        assert_eq!(f.values()[16], 0.0);
        assert!(f.values()[31] >= BOX_WALL_MIN);
    }

    #[test]
    fn wrong_parameter_counts_are_rejected() {
        let g = Arc::new(make_grid(1, 1, vec![16], vec![10.0], Boundary::Periodic).unwrap());
        let bad = PotentialSpec::Harmonic { omega: vec![1.0, 2.0] };
        assert!(bad.validate(&g, &[1.0]).is_err());
    }
}
