//! Uniform rectangular lattices over configuration space.
//!
//! A grid covers the configuration space of `N` particles living in `d`
//! spatial dimensions, so the lattice dimension is `D = d·N`. Axes are ordered
//! particle-major: axes `[k*d, (k+1)*d)` belong to particle `k`. Coordinates
//! on axis `a` run over `[-extent/2, extent/2)` with spacing
//! `extent/points`; the last axis varies fastest in the flat (row-major)
//! point index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Box,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Grid {
    dims_per_particle: usize,
    particle_count: usize,
    points: Vec<usize>,
    extents: Vec<f64>,
    boundary: Boundary,
}

impl Grid {
    pub fn new(
        dims_per_particle: usize,
        particle_count: usize,
        points: Vec<usize>,
        extents: Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self> {
        if dims_per_particle < 1 || particle_count < 1 {
            return Err(Error::Config(format!(
                "grid needs d >= 1 and N >= 1, got d={dims_per_particle}, N={particle_count}"
            )));
        }
        let dim = dims_per_particle * particle_count;
        if dim > 3 {
            return Err(Error::Config(format!(
                "configuration dimension D = d·N = {dim} exceeds the desk-scale cap of 3"
            )));
        }
        if points.len() != dim || extents.len() != dim {
            return Err(Error::Config(format!(
                "grid dimension D={dim} but got {} point counts and {} extents",
                points.len(),
                extents.len()
            )));
        }
        if let Some(&bad) = points.iter().find(|&&n| n < 4) {
            return Err(Error::Config(format!(
                "points per axis must be >= 4, got {bad}"
            )));
        }
        if let Some(&bad) = extents.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Domain(format!("axis extent must be positive, got {bad}")));
        }
        Ok(Self {
            dims_per_particle,
            particle_count,
            points,
            extents,
            boundary,
        })
    }

    pub fn dims_per_particle(&self) -> usize {
        self.dims_per_particle
    }

    pub fn particle_count(&self) -> usize {
        self.particle_count
    }

    /// Configuration-space dimension `D = d·N`.
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.points[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.spacing(a)).collect()
    }

    /// Volume of one lattice cell, the quadrature weight of every sum.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Particle that axis `a` belongs to.
    pub fn particle_of_axis(&self, axis: usize) -> usize {
        axis / self.dims_per_particle
    }

    /// Coordinate of lattice index `i` on `axis`.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        -0.5 * self.extents[axis] + i as f64 * self.spacing(axis)
    }

    /// All coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|i| self.axis_coord(axis, i)).collect()
    }

    /// Row-major flat index of a multi-index (last axis fastest).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        let mut idx = 0;
        for (a, &i) in multi.iter().enumerate() {
            debug_assert!(i < self.points[a]);
            idx = idx * self.points[a] + i;
        }
        idx
    }

    /// Multi-index of a flat index, written into `out`.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.dim());
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.points[a];
            flat /= self.points[a];
        }
    }

    /// Coordinates of a flat point index, written into `out`.
    pub fn point_coords(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for a in (0..self.dim()).rev() {
            let i = rem % self.points[a];
            rem /= self.points[a];
            out[a] = self.axis_coord(a, i);
        }
    }

    /// Wrap a configuration point into the fundamental domain (periodic
    /// grids). Box grids are left untouched.
    pub fn wrap_point(&self, q: &mut [f64]) {
        if self.boundary != Boundary::Periodic {
            return;
        }
        for a in 0..self.dim() {
            let e = self.extents[a];
            let lo = -0.5 * e;
            q[a] = (q[a] - lo).rem_euclid(e) + lo;
        }
    }

    /// True when `q` lies inside the domain. Always true for periodic grids.
    pub fn contains(&self, q: &[f64]) -> bool {
        match self.boundary {
            Boundary::Periodic => true,
            Boundary::Box => q.iter().enumerate().all(|(a, &x)| {
                let half = 0.5 * self.extents[a];
                x >= -half && x < half
            }),
        }
    }

    /// True when every axis has a power-of-two point count (required by the
    /// spectral stepper).
    pub fn spectral_ready(&self) -> bool {
        self.points.iter().all(|n| n.is_power_of_two())
    }
}

/// Validated grid constructor matching the public artifact interface.
pub fn make_grid(
    dims_per_particle: usize,
    particle_count: usize,
    points: Vec<usize>,
    extents: Vec<f64>,
    boundary: Boundary,
) -> Result<Grid> {
    Grid::new(dims_per_particle, particle_count, points, extents, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_matches_extent_over_points() {
        let g = make_grid(1, 1, vec![256], vec![40.0], Boundary::Periodic).unwrap();
        assert_eq!(g.spacing(0), 0.15625);
        assert_eq!(g.len(), 256);
    }

    #[test]
    fn two_particle_grid_has_product_point_count() {
        let g = make_grid(1, 2, vec![128, 128], vec![20.0, 20.0], Boundary::Periodic).unwrap();
        assert_eq!(g.dim(), 2);
        assert_eq!(g.len(), 16384);
    }

    #[test]
    fn too_few_points_rejected() {
        let err = make_grid(1, 1, vec![3], vec![10.0], Boundary::Periodic).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn nonpositive_extent_rejected() {
        let err = make_grid(1, 1, vec![8], vec![0.0], Boundary::Periodic).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn index_coordinate_round_trip() {
        let g = make_grid(1, 2, vec![8, 16], vec![4.0, 8.0], Boundary::Periodic).unwrap();
        let mut multi = [0usize; 2];
        for flat in 0..g.len() {
            g.multi_index(flat, &mut multi);
            assert_eq!(g.flat_index(&multi), flat);
            let mut q = [0.0; 2];
            g.point_coords(flat, &mut q);
            for a in 0..2 {
                assert!((q[a] - g.axis_coord(a, multi[a])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn wrap_point_lands_in_domain() {
        let g = make_grid(1, 1, vec![8], vec![4.0], Boundary::Periodic).unwrap();
        let mut q = [7.3];
        g.wrap_point(&mut q);
        assert!(q[0] >= -2.0 && q[0] < 2.0);
        assert!((q[0] - (-0.7)).abs() < 1e-12);
    }
}
