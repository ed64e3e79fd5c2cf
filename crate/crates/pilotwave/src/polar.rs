//! Modulus–phase decomposition ψ = R·e^{iS/ħ}: flood-fill unwrapping with a
//! branch-cut ledger quantized in 2πħ, loop winding numbers, and the
//! continuity/Hamilton–Jacobi residual pair checked between consecutive
//! snapshots. This module never integrates the pair forward — the residual
//! check is deliberately its only contact with the equations.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_node_epsilon, Mask, ScalarField};
use crate::grid::{Boundary, Grid};
use crate::guidance::probability_current_with;
use crate::potential::PotentialSpec;
use crate::spectral::SpectralEngine;
use crate::wavefunction::WaveFunction;

/// One recorded branch discontinuity: the lattice edge from `index` along
/// `axis` jumps by `multiple`·2πħ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchJump {
    pub index: usize,
    pub axis: usize,
    pub multiple: i64,
}

/// Unwrapped phase action on a grid with its validity mask and jump ledger.
#[derive(Clone, Debug)]
pub struct PhaseField {
    grid: Arc<Grid>,
    /// S in action units; S(anchor) = ħ·arg ψ(anchor) − ħ·arg ψ(anchor) = 0
    /// shifted so the anchor carries the principal phase.
    values: ScalarField,
    mask: Mask,
    anchor: usize,
    branch_jumps: Vec<BranchJump>,
    hbar: f64,
}

impl PhaseField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn branch_jumps(&self) -> &[BranchJump] {
        &self.branch_jumps
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
}

fn wrap_to_principal(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Split ψ into modulus R = |ψ| and a phase action S built by breadth-first
/// unwrapping from `anchor`. The ledger records every residual lattice-edge
/// discontinuity; each is an integer multiple of 2πħ by construction, with
/// the rounding residue checked.
pub fn polar_decompose(
    psi: &WaveFunction,
    anchor: usize,
    node_epsilon: f64,
) -> Result<(ScalarField, PhaseField)> {
    check_node_epsilon(node_epsilon)?;
    if psi.components() != 1 {
        return Err(Error::Domain(
            "polar decomposition applies to scalar wave functions".into(),
        ));
    }
    let grid = psi.grid().clone();
    let density = psi.density();
    let mask = Mask::from_density(&density, node_epsilon);
    if anchor >= grid.len() || !mask.is_valid(anchor) {
        return Err(Error::Domain(format!(
            "anchor {anchor} lies in the node-masked region"
        )));
    }
    let hbar = psi.hbar();
    let modulus = ScalarField::new(
        grid.clone(),
        density.values().iter().map(|&r| r.sqrt()).collect(),
    )?;
    let arg: Vec<f64> = psi.amplitudes().iter().map(|a| a.arg()).collect();

    let len = grid.len();
    let dim = grid.dim();
    let mut s = vec![0.0; len];
    let mut visited = vec![false; len];
    let mut queue = VecDeque::new();
    let mut multi = vec![0usize; dim];

    // Anchor first, then remaining components in index order.
    let mut seeds = vec![anchor];
    seeds.extend((0..len).filter(|&p| mask.is_valid(p)));
    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        s[seed] = hbar * arg[seed];
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            grid.multi_index(p, &mut multi);
            for a in 0..dim {
                let n_a = grid.points()[a];
                let after: usize = grid.points()[a + 1..].iter().product();
                for dir in [-1isize, 1] {
                    let j = multi[a] as isize + dir;
                    let j = if j < 0 {
                        if grid.boundary() == Boundary::Periodic {
                            n_a as isize - 1
                        } else {
                            continue;
                        }
                    } else if j >= n_a as isize {
                        if grid.boundary() == Boundary::Periodic {
                            0
                        } else {
                            continue;
                        }
                    } else {
                        j
                    };
                    let q = (p as isize + (j - multi[a] as isize) * after as isize) as usize;
                    if visited[q] || !mask.is_valid(q) {
                        continue;
                    }
                    s[q] = s[p] + hbar * wrap_to_principal(arg[q] - arg[p]);
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }

    // Ledger sweep: every unmasked lattice edge whose S-difference exceeds
    // the principal step hides an integer number of turns.
    let mut jumps = Vec::new();
    let two_pi_hbar = 2.0 * PI * hbar;
    for p in 0..len {
        if !mask.is_valid(p) {
            continue;
        }
        grid.multi_index(p, &mut multi);
        for a in 0..dim {
            let n_a = grid.points()[a];
            let after: usize = grid.points()[a + 1..].iter().product();
            let j = multi[a] + 1;
            let q = if j >= n_a {
                if grid.boundary() == Boundary::Periodic {
                    p + after - n_a * after
                } else {
                    continue;
                }
            } else {
                p + after
            };
            if !mask.is_valid(q) {
                continue;
            }
            let smooth = hbar * wrap_to_principal(arg[q] - arg[p]);
            // Drop of the unwrapped action across the cut: e^{imφ} loses
            // m·2πħ where the branch resets.
            let jump = s[p] + smooth - s[q];
            let multiple = (jump / two_pi_hbar).round() as i64;
            if multiple != 0 {
                let residue = (jump - multiple as f64 * two_pi_hbar).abs();
                if residue > 1e-6 * two_pi_hbar {
                    return Err(Error::InconsistentPhase(format!(
                        "edge {p}->{q} jump {jump} is off a 2πħ multiple by {residue}"
                    )));
                }
                jumps.push(BranchJump {
                    index: p,
                    axis: a,
                    multiple,
                });
            }
        }
    }

    // Shift so the anchor sits at its principal phase (already true) and
    // verify faithfulness: R·e^{iS/ħ} = ψ on the unmasked set.
    for p in 0..len {
        if mask.is_valid(p) {
            let rebuilt = modulus.values()[p] * num_complex::Complex64::from_polar(1.0, s[p] / hbar);
            let orig = psi.amplitudes()[p];
            if (rebuilt - orig).norm() > 1e-9 * orig.norm().max(1e-30) {
                return Err(Error::InconsistentPhase(format!(
                    "reconstruction mismatch at point {p}"
                )));
            }
        }
    }

    let phase = PhaseField {
        grid: grid.clone(),
        values: ScalarField::new(grid, s)?,
        mask,
        anchor,
        branch_jumps: jumps,
        hbar,
    };
    Ok((modulus, phase))
}

/// All lattice indices along `axis` through the anchor's transverse position,
/// in order — the fundamental cycle of a periodic axis.
pub fn fundamental_loop(grid: &Grid, axis: usize, through: usize) -> Vec<usize> {
    let mut multi = vec![0usize; grid.dim()];
    grid.multi_index(through, &mut multi);
    (0..grid.points()[axis])
        .map(|i| {
            let mut m = multi.clone();
            m[axis] = i;
            grid.flat_index(&m)
        })
        .collect()
}

/// Winding number (1/2πħ)·∮∇S·dl around a closed lattice path, by summing
/// principal-value phase steps. The rounding residue must stay below 0.05.
pub fn winding_number(phase: &PhaseField, path: &[usize]) -> Result<i64> {
    if path.len() < 3 {
        return Err(Error::Domain("a loop needs at least 3 points".into()));
    }
    let two_pi_hbar = 2.0 * PI * phase.hbar;
    let mut total = 0.0;
    for w in 0..path.len() {
        let p = path[w];
        let q = path[(w + 1) % path.len()];
        if !phase.mask.is_valid(p) || !phase.mask.is_valid(q) {
            return Err(Error::Domain(format!(
                "loop passes through the node-masked region at {p}->{q}"
            )));
        }
        let step = phase.values.values()[q] - phase.values.values()[p];
        total += wrap_to_principal(step / phase.hbar) * phase.hbar;
    }
    let winding = total / two_pi_hbar;
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.05 {
        return Err(Error::InconsistentPhase(format!(
            "loop integral {winding} turns is not close to an integer"
        )));
    }
    Ok(rounded as i64)
}

/// L¹ residuals of the continuity equation and the Hamilton–Jacobi equation
/// between two consecutive snapshots.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HjResiduals {
    pub continuity_l1: f64,
    pub hamilton_jacobi_l1: f64,
    pub masked_fraction: f64,
}

/// Evaluate both residuals from snapshots at t and t+dt. The gradient of S is
/// taken from the current (m·v = ∇S), never by differentiating the unwrapped
/// S across its cuts; ∂S/∂t uses principal-value differences pointwise.
pub fn hamilton_jacobi_residuals(
    before: &WaveFunction,
    after: &WaveFunction,
    dt: f64,
    potential: &PotentialSpec,
    anchor: usize,
    node_epsilon: f64,
) -> Result<HjResiduals> {
    if before.grid() != after.grid() || before.components() != 1 || after.components() != 1 {
        return Err(Error::Domain(
            "residuals need two scalar snapshots on one grid".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let grid = before.grid().clone();
    let engine = SpectralEngine::new(grid.clone());
    let hbar = before.hbar();
    let sampled_v = potential.sample(&grid, before.masses())?;

    let (r_a, s_a) = polar_decompose(before, anchor, node_epsilon)?;
    let (r_b, s_b) = polar_decompose(after, anchor, node_epsilon)?;
    let shared: Vec<bool> = (0..grid.len())
        .map(|p| s_a.mask.is_valid(p) && s_b.mask.is_valid(p))
        .collect();
    let shared_count = shared.iter().filter(|&&v| v).count();
    if shared_count * 2 < grid.len() {
        return Err(Error::Degenerate(format!(
            "node mask covers {} of {} points",
            grid.len() - shared_count,
            grid.len()
        )));
    }

    // Currents give both div(R²∇S/m) = div j and ∇S = m·v.
    let j_a = probability_current_with(before, &engine);
    let j_b = probability_current_with(after, &engine);
    let div_a = engine.divergence(&j_a);
    let div_b = engine.divergence(&j_b);
    let rho_a = before.density();
    let rho_b = after.density();

    let lap_r_a = particle_weighted_laplacian(&r_a, &engine, before);
    let lap_r_b = particle_weighted_laplacian(&r_b, &engine, after);

    let dim = grid.dim();
    let cell = grid.cell_volume();
    let mut cont = 0.0;
    let mut hj = 0.0;
    for p in 0..grid.len() {
        if !shared[p] {
            continue;
        }
        // Continuity: ∂R²/∂t + Σ ∇·(R²∇S/m) = ∂ρ/∂t + div j.
        let drho = (rho_b.values()[p] - rho_a.values()[p]) / dt;
        let div_mid = 0.5 * (div_a.values()[p] + div_b.values()[p]);
        cont += (drho + div_mid).abs();

        // Hamilton–Jacobi: ∂S/∂t − Σ(ħ²/2m·∇²R/R − (∇S)²/2m) + V.
        let ds_dt = hbar
            * wrap_to_principal((s_b.values.values()[p] - s_a.values.values()[p]) / hbar)
            / dt;
        let mut kinetic = 0.0;
        for a in 0..dim {
            let m = before.mass_of_axis(a);
            // ∇S = m·v = m·j/ρ on the trusted set.
            let grad_s_a = m * j_a.values()[p * dim + a] / rho_a.values()[p];
            let grad_s_b = m * j_b.values()[p * dim + a] / rho_b.values()[p];
            let grad_s = 0.5 * (grad_s_a + grad_s_b);
            kinetic += grad_s * grad_s / (2.0 * m);
        }
        let curvature = 0.5
            * (lap_r_a.values()[p] / r_a.values()[p].max(1e-300)
                + lap_r_b.values()[p] / r_b.values()[p].max(1e-300));
        let residual = ds_dt - (curvature - kinetic) + sampled_v.values()[p];
        hj += residual.abs();
    }
    Ok(HjResiduals {
        continuity_l1: cont * cell,
        hamilton_jacobi_l1: hj * cell,
        masked_fraction: 1.0 - shared_count as f64 / grid.len() as f64,
    })
}

/// Σ_k (ħ²/2m_k)·∇_k²R as a field.
fn particle_weighted_laplacian(
    modulus: &ScalarField,
    engine: &SpectralEngine,
    psi: &WaveFunction,
) -> ScalarField {
    let grid = psi.grid().clone();
    let d = grid.dims_per_particle();
    let mut acc = vec![0.0; grid.len()];
    for k in 0..grid.particle_count() {
        let axes: Vec<usize> = (k * d..(k + 1) * d).collect();
        let lap = engine.laplacian_scalar(modulus, Some(&axes));
        let scale = psi.hbar() * psi.hbar() / (2.0 * psi.masses()[k]);
        for (p, v) in acc.iter_mut().enumerate() {
            *v += scale * lap.values()[p];
        }
    }
    ScalarField::new(grid, acc).expect("shape by construction")
}
