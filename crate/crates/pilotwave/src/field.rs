//! Real-valued scalar and vector samples on a grid, with the shared node-mask
//! convention: a point is masked out when the local density falls below
//! `node_epsilon · max(density)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};

/// Default relative node threshold; must stay within (0, 1e-3].
pub const DEFAULT_NODE_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "scalar field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quadrature integral over the grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// L¹ distance to another field on the same grid.
    pub fn l1_distance(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// L² distance to another field on the same grid.
    pub fn l2_distance(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        (self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            * self.grid.cell_volume())
        .sqrt()
    }

    /// Multilinear interpolation at `q` (wrapped first on periodic grids).
    pub fn interpolate(&self, q: &[f64]) -> Result<f64> {
        let mut out = [0.0];
        interpolate_components(&self.grid, &self.values, 1, q, &mut out)?;
        Ok(out[0])
    }
}

#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<Grid>,
    /// Point-major layout: `values[p*D + a]` is component `a` at point `p`.
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * grid.dim() {
            return Err(Error::Config(format!(
                "vector field length {} does not match grid size {} x D={}",
                values.len(),
                grid.len(),
                grid.dim()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len() * grid.dim();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, point: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.values[point * d..(point + 1) * d]
    }

    /// Multilinear interpolation of all components at `q`.
    pub fn interpolate(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        interpolate_components(&self.grid, &self.values, self.grid.dim(), q, out)
    }

    /// Pointwise Euclidean norm as a scalar field.
    pub fn magnitude(&self) -> ScalarField {
        let d = self.grid.dim();
        let vals = self
            .values
            .chunks(d)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        ScalarField::new(self.grid.clone(), vals).expect("shape by construction")
    }
}

/// Validity mask shared by node-sensitive quantities.
#[derive(Clone, Debug)]
pub struct Mask {
    valid: Vec<bool>,
}

impl Mask {
    pub fn all_valid(len: usize) -> Self {
        Self {
            valid: vec![true; len],
        }
    }

    /// Valid where `density >= node_epsilon * max(density)`.
    pub fn from_density(density: &ScalarField, node_epsilon: f64) -> Self {
        let cut = node_epsilon * density.max();
        Self {
            valid: density.values().iter().map(|&r| r >= cut).collect(),
        }
    }

    pub fn is_valid(&self, point: usize) -> bool {
        self.valid[point]
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn invalid_fraction(&self) -> f64 {
        1.0 - self.valid_count() as f64 / self.valid.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct MaskedScalarField {
    pub field: ScalarField,
    pub mask: Mask,
}

#[derive(Clone, Debug)]
pub struct MaskedVectorField {
    pub field: VectorField,
    pub mask: Mask,
}

pub(crate) fn check_node_epsilon(node_epsilon: f64) -> Result<()> {
    if node_epsilon > 0.0 && node_epsilon <= 1e-3 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "node_epsilon must lie in (0, 1e-3], got {node_epsilon}"
        )))
    }
}

/// Shared multilinear interpolation over `width` interleaved components.
/// Periodic axes wrap; box grids reject points outside the domain.
fn interpolate_components(
    grid: &Grid,
    values: &[f64],
    width: usize,
    q: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let dim = grid.dim();
    debug_assert_eq!(q.len(), dim);
    debug_assert_eq!(out.len(), width);
    let mut qw = [0.0f64; 8];
    let qw = &mut qw[..dim];
    qw.copy_from_slice(q);
    grid.wrap_point(qw);
    if !grid.contains(qw) {
        return Err(Error::Domain(format!(
            "point {qw:?} lies outside the box domain"
        )));
    }

    // Cell corner and fractional offset per axis.
    let mut base = [0usize; 8];
    let mut frac = [0.0f64; 8];
    for a in 0..dim {
        let h = grid.spacing(a);
        let x = (qw[a] + 0.5 * grid.extents()[a]) / h;
        let n = grid.points()[a];
        let mut i = x.floor() as isize;
        let mut t = x - i as f64;
        // Clamp roundoff at the upper edge.
        if i as usize >= n {
            i = n as isize - 1;
            t = 1.0;
        }
        if i < 0 {
            i = 0;
            t = 0.0;
        }
        base[a] = i as usize;
        frac[a] = t;
    }

    out.iter_mut().for_each(|o| *o = 0.0);
    let corners = 1usize << dim;
    let pts = grid.points();
    for corner in 0..corners {
        let mut weight = 1.0;
        let mut flat = 0usize;
        for a in 0..dim {
            let hi = (corner >> a) & 1 == 1;
            let mut idx = base[a] + hi as usize;
            if idx >= pts[a] {
                idx = match grid.boundary() {
                    Boundary::Periodic => 0,
                    // At a box edge the t=1 weight is zero or the point was
                    // rejected above; clamping keeps the index in range.
                    Boundary::Box => pts[a] - 1,
                };
            }
            weight *= if hi { frac[a] } else { 1.0 - frac[a] };
            flat = flat * pts[a] + idx;
        }
        if weight == 0.0 {
            continue;
        }
        let src = &values[flat * width..flat * width + width];
        for (o, s) in out.iter_mut().zip(src) {
            *o += weight * s;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn interpolation_is_exact_on_lattice_points() {
        let g = Arc::new(make_grid(1, 2, vec![8, 8], vec![4.0, 4.0], Boundary::Periodic).unwrap());
        let vals: Vec<f64> = (0..g.len()).map(|i| (i as f64).cos()).collect();
        let f = ScalarField::new(g.clone(), vals.clone()).unwrap();
        let mut q = [0.0; 2];
        for p in (0..g.len()).step_by(7) {
            g.point_coords(p, &mut q);
            assert!((f.interpolate(&q).unwrap() - vals[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_is_linear_between_neighbors() {
        let g = Arc::new(make_grid(1, 1, vec![8], vec![8.0], Boundary::Periodic).unwrap());
        let vals: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let f = ScalarField::new(g.clone(), vals).unwrap();
        // Halfway between lattice points 2 (coord -2.0) and 3 (coord -1.0).
        assert!((f.interpolate(&[-1.5]).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let g = Arc::new(make_grid(1, 1, vec![4], vec![4.0], Boundary::Periodic).unwrap());
        // coords: -2, -1, 0, 1; value of the wrapped neighbor of 1 is at -2.
        let f = ScalarField::new(g.clone(), vec![8.0, 0.0, 0.0, 4.0]).unwrap();
        assert!((f.interpolate(&[1.5]).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn box_interpolation_rejects_outside_points() {
        let g = Arc::new(make_grid(1, 1, vec![8], vec![4.0], Boundary::Box).unwrap());
        let f = ScalarField::zeros(g);
        assert!(f.interpolate(&[2.5]).is_err());
    }

    #[test]
    fn mask_threshold_is_relative_to_max() {
        let g = Arc::new(make_grid(1, 1, vec![4], vec![4.0], Boundary::Periodic).unwrap());
        let f = ScalarField::new(g, vec![1.0, 1e-9, 0.5, 0.0]).unwrap();
        let m = Mask::from_density(&f, 1e-6);
        assert_eq!(m.valid(), &[true, false, true, false]);
        assert_eq!(m.valid_count(), 2);
    }
}
