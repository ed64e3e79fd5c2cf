//! Identical-particle support: (anti)symmetrizers, exchange symmetry of the
//! velocity field, permutation equivariance of the flow, and the canonical
//! unordered view of configurations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::guidance::velocity_field;
use crate::solver::EvolutionRecord;
use crate::trajectory::{integrate_trajectory, PropagateOptions};
use crate::wavefunction::WaveFunction;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeSymmetry {
    Bosonic,
    Fermionic,
}

/// Which particles an exchange operation touches.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExchangeScope {
    Pair(usize, usize),
    /// The full symmetric group over all particles.
    Full,
}

/// Violation summary of the exchange identities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExchangeReport {
    pub symmetry: ExchangeSymmetry,
    pub max_wave_violation: f64,
    pub max_velocity_violation: f64,
}

fn check_exchangeable(psi: &WaveFunction, i: usize, j: usize) -> Result<()> {
    let grid = psi.grid();
    let n = grid.particle_count();
    if n < 2 || i >= n || j >= n || i == j {
        return Err(Error::Domain(format!(
            "cannot exchange particles {i} and {j} of {n}"
        )));
    }
    if psi.components() != 1 {
        return Err(Error::Domain(
            "exchange operations support scalar wave functions".into(),
        ));
    }
    if (psi.masses()[i] - psi.masses()[j]).abs() > 0.0 {
        return Err(Error::Domain(
            "identical particles must carry equal masses".into(),
        ));
    }
    let d = grid.dims_per_particle();
    for a in 0..d {
        let (ai, aj) = (i * d + a, j * d + a);
        if grid.points()[ai] != grid.points()[aj]
            || (grid.extents()[ai] - grid.extents()[aj]).abs() > 0.0
        {
            return Err(Error::Config(
                "exchanged particles need identical axis layouts".into(),
            ));
        }
    }
    Ok(())
}

/// Flat index of the configuration with particle blocks i and j swapped.
fn swapped_index(grid: &Grid, p: usize, i: usize, j: usize, multi: &mut [usize]) -> usize {
    grid.multi_index(p, multi);
    let d = grid.dims_per_particle();
    for a in 0..d {
        multi.swap(i * d + a, j * d + a);
    }
    grid.flat_index(multi)
}

/// Swap particle blocks i and j of a configuration point.
pub fn swap_blocks(q: &[f64], d: usize, i: usize, j: usize) -> Vec<f64> {
    let mut out = q.to_vec();
    for a in 0..d {
        out.swap(i * d + a, j * d + a);
    }
    out
}

/// Project onto the (anti)symmetric sector: pair exchanges use
/// (ψ ± ψ∘swap)/norm, the full scope averages over all N! permutations with
/// parity signs for fermions. Antisymmetrizing an exchange-symmetric state
/// annihilates it, which surfaces as a zero-norm error.
pub fn symmetrize(
    psi: &WaveFunction,
    symmetry: ExchangeSymmetry,
    scope: ExchangeScope,
) -> Result<WaveFunction> {
    let grid = psi.grid().clone();
    let n = grid.particle_count();
    let pairs: Vec<(usize, usize)> = match scope {
        ExchangeScope::Pair(i, j) => vec![(i, j)],
        ExchangeScope::Full => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
    };
    for &(i, j) in &pairs {
        check_exchangeable(psi, i, j)?;
    }
    let len = grid.len();
    let mut multi = vec![0usize; grid.dim()];
    let amps = match scope {
        ExchangeScope::Pair(i, j) => {
            let sign = match symmetry {
                ExchangeSymmetry::Bosonic => 1.0,
                ExchangeSymmetry::Fermionic => -1.0,
            };
            let mut out = Vec::with_capacity(len);
            for p in 0..len {
                let q = swapped_index(&grid, p, i, j, &mut multi);
                out.push(psi.amplitudes()[p] + sign * psi.amplitudes()[q]);
            }
            out
        }
        ExchangeScope::Full => {
            let perms = permutations(n);
            let d = grid.dims_per_particle();
            let mut out = vec![Complex64::default(); len];
            for (perm, parity) in &perms {
                let sign = match symmetry {
                    ExchangeSymmetry::Bosonic => 1.0,
                    ExchangeSymmetry::Fermionic => *parity,
                };
                for (p, o) in out.iter_mut().enumerate() {
                    grid.multi_index(p, &mut multi);
                    let mut permuted = vec![0usize; grid.dim()];
                    for k in 0..n {
                        for a in 0..d {
                            permuted[k * d + a] = multi[perm[k] * d + a];
                        }
                    }
                    *o += sign * psi.amplitudes()[grid.flat_index(&permuted)];
                }
            }
            out
        }
    };
    let candidate = WaveFunction::new(grid, 1, amps, psi.masses().to_vec(), psi.hbar())?;
    if candidate.norm() < 1e-12 * psi.norm().max(1.0) {
        return Err(Error::ZeroNorm(
            "the (anti)symmetrization annihilated the state".into(),
        ));
    }
    candidate.normalize()
}

/// All permutations of 0..n with parities, n ≤ 8 (heap's algorithm).
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    assert!(n <= 8, "factorial blowup guard");
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    fn heap(items: &mut Vec<usize>, k: usize, parity: &mut f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if k == 1 {
            out.push((items.clone(), *parity));
            return;
        }
        for i in 0..k {
            heap(items, k - 1, parity, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
            *parity = -*parity;
        }
    }
    let mut parity = 1.0;
    heap(&mut items, n, &mut parity, &mut out);
    out
}

/// Measure how far ψ and its velocity field are from exchange symmetry under
/// the swap of one particle pair: the wave must satisfy ψ∘swap = ±ψ and the
/// velocity blocks must swap along with the configuration.
pub fn velocity_exchange_check(
    psi: &WaveFunction,
    pair: (usize, usize),
    node_epsilon: f64,
) -> Result<ExchangeReport> {
    let (i, j) = pair;
    check_exchangeable(psi, i, j)?;
    let grid = psi.grid().clone();
    let d = grid.dims_per_particle();
    let dim = grid.dim();
    let len = grid.len();
    let mut multi = vec![0usize; dim];

    // Detect the sector by comparing ψ∘swap with ±ψ.
    let mut sym_violation: f64 = 0.0;
    let mut anti_violation: f64 = 0.0;
    let scale = psi.amplitudes().iter().map(|a| a.norm()).fold(0.0, f64::max);
    for p in 0..len {
        let q = swapped_index(&grid, p, i, j, &mut multi);
        let a = psi.amplitudes()[p];
        let b = psi.amplitudes()[q];
        sym_violation = sym_violation.max((b - a).norm());
        anti_violation = anti_violation.max((b + a).norm());
    }
    let (symmetry, max_wave_violation) = if sym_violation <= anti_violation {
        (ExchangeSymmetry::Bosonic, sym_violation / scale.max(1e-300))
    } else {
        (ExchangeSymmetry::Fermionic, anti_violation / scale.max(1e-300))
    };

    let velocity = velocity_field(psi, node_epsilon)?;
    let mut max_velocity_violation: f64 = 0.0;
    for p in 0..len {
        let q = swapped_index(&grid, p, i, j, &mut multi);
        if !velocity.mask.is_valid(p) || !velocity.mask.is_valid(q) {
            continue;
        }
        let vp = velocity.field.at(p);
        let vq = velocity.field.at(q);
        for a in 0..d {
            // v_i at the point equals v_j at the swapped point (and vice
            // versa); spectator blocks are unchanged.
            let direct = (vp[i * d + a] - vq[j * d + a]).abs();
            let mirror = (vp[j * d + a] - vq[i * d + a]).abs();
            max_velocity_violation = max_velocity_violation.max(direct).max(mirror);
        }
        for k in 0..grid.particle_count() {
            if k == i || k == j {
                continue;
            }
            for a in 0..d {
                max_velocity_violation =
                    max_velocity_violation.max((vp[k * d + a] - vq[k * d + a]).abs());
            }
        }
    }
    Ok(ExchangeReport {
        symmetry,
        max_wave_violation,
        max_velocity_violation,
    })
}

/// Deviation of the flow from permutation equivariance: integrate from `q0`
/// and from the swapped start, then compare the swapped run against the swap
/// of the first. Returns the maximum deviation over recorded times.
pub fn flow_equivariance_check(
    record: &EvolutionRecord,
    q0: &[f64],
    pair: (usize, usize),
    opts: PropagateOptions,
) -> Result<f64> {
    let grid = record.grid();
    let d = grid.dims_per_particle();
    let (i, j) = pair;
    let swapped_start = swap_blocks(q0, d, i, j);
    let base = integrate_trajectory(record, q0, opts)?;
    let swapped = integrate_trajectory(record, &swapped_start, opts)?;
    let mut worst: f64 = 0.0;
    for t in 0..base.times.len() {
        let expect = swap_blocks(base.position(t), d, i, j);
        let got = swapped.position(t);
        let mut dist2 = 0.0;
        for a in 0..grid.dim() {
            // Minimum-image distance on periodic grids.
            let mut delta = got[a] - expect[a];
            let e = grid.extents()[a];
            delta -= (delta / e).round() * e;
            dist2 += delta * delta;
        }
        worst = worst.max(dist2.sqrt());
    }
    Ok(worst)
}

/// Canonical representative of an unordered configuration: particle blocks in
/// lexicographic order (stable). The flag reports exact block coincidences.
pub fn unordered_view(config: &[f64], dims_per_particle: usize) -> (Vec<f64>, bool) {
    let d = dims_per_particle;
    assert!(d >= 1 && config.len() % d == 0);
    let mut blocks: Vec<&[f64]> = config.chunks(d).collect();
    blocks.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .find_map(|(x, y)| match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Equal => None,
                other => Some(other),
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let coincident = blocks.windows(2).any(|w| w[0] == w[1]);
    (blocks.concat(), coincident)
}

/// Smallest pairwise particle separation along a trajectory sample.
pub fn min_pair_separation(points: &[f64], dims_per_particle: usize, n_particles: usize) -> f64 {
    let d = dims_per_particle;
    let mut min = f64::INFINITY;
    for i in 0..n_particles {
        for j in i + 1..n_particles {
            let mut r2 = 0.0;
            for a in 0..d {
                let delta = points[i * d + a] - points[j * d + a];
                r2 += delta * delta;
            }
            min = min.min(r2.sqrt());
        }
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DEFAULT_NODE_EPSILON;
    use crate::grid::{make_grid, Boundary};
    use crate::wavefunction::gaussian_packet;
    use std::sync::Arc;

    fn pair_grid(n: usize, extent: f64) -> Arc<Grid> {
        Arc::new(make_grid(1, 2, vec![n, n], vec![extent, extent], Boundary::Periodic).unwrap())
    }

    /// g(q1)·h(q2) as an unsymmetrized two-particle state.
    fn product_state(grid: &Arc<Grid>, centers: (f64, f64)) -> WaveFunction {
        gaussian_packet(
            grid.clone(),
            &[centers.0, centers.1],
            &[1.0, 1.0],
            &[0.0, 0.0],
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn antisymmetrizing_a_symmetric_product_annihilates_it() {
        let grid = pair_grid(64, 20.0);
        let psi = product_state(&grid, (0.0, 0.0));
        let err = symmetrize(&psi, ExchangeSymmetry::Fermionic, ExchangeScope::Pair(0, 1))
            .unwrap_err();
        assert!(matches!(err, Error::ZeroNorm(_)));
    }

    #[test]
    fn pair_symmetrization_produces_exact_exchange_eigenstates() {
        let grid = pair_grid(64, 20.0);
        let psi = product_state(&grid, (-2.0, 2.0));
        for (symmetry, sign) in [
            (ExchangeSymmetry::Bosonic, 1.0),
            (ExchangeSymmetry::Fermionic, -1.0),
        ] {
            let s = symmetrize(&psi, symmetry, ExchangeScope::Pair(0, 1)).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12);
            let mut multi = [0usize; 2];
            for p in 0..s.grid().len() {
                let q = swapped_index(s.grid(), p, 0, 1, &mut multi);
                let diff = (s.amplitudes()[q] - sign * s.amplitudes()[p]).norm();
                assert!(diff < 1e-12, "swap violation {diff}");
            }
        }
    }

    #[test]
    fn velocity_field_inherits_the_exchange_symmetry() {
        let grid = pair_grid(64, 20.0);
        // A complex-valued entangled state so the velocity is nonzero.
        let mut psi = product_state(&grid, (-2.0, 2.0));
        let k = 0.7;
        let mut coords = [0.0f64; 2];
        let g2 = grid.clone();
        psi.amplitudes_mut().iter_mut().enumerate().for_each(|(p, a)| {
            g2.point_coords(p, &mut coords);
            *a *= Complex64::from_polar(1.0, k * (coords[0] + coords[1]));
        });
        let psi = psi.normalize().unwrap();
        for symmetry in [ExchangeSymmetry::Bosonic, ExchangeSymmetry::Fermionic] {
            let s = symmetrize(&psi, symmetry, ExchangeScope::Pair(0, 1)).unwrap();
            let report = velocity_exchange_check(&s, (0, 1), DEFAULT_NODE_EPSILON).unwrap();
            assert_eq!(report.symmetry, symmetry);
            assert!(report.max_wave_violation < 1e-10);
            assert!(
                report.max_velocity_violation < 1e-9,
                "{symmetry:?}: {}",
                report.max_velocity_violation
            );
        }
    }

    #[test]
    fn unsymmetrized_states_fail_the_check_loudly() {
        let grid = pair_grid(64, 20.0);
        let psi = product_state(&grid, (-2.0, 1.0)).normalize().unwrap();
        let report = velocity_exchange_check(&psi, (0, 1), DEFAULT_NODE_EPSILON).unwrap();
        assert!(report.max_wave_violation > 0.1, "{}", report.max_wave_violation);
    }

    #[test]
    fn unordered_view_is_canonical_and_idempotent() {
        let (sorted, flag) = unordered_view(&[2.0, 1.0], 1);
        assert_eq!(sorted, vec![1.0, 2.0]);
        assert!(!flag);
        let (again, _) = unordered_view(&sorted, 1);
        assert_eq!(again, sorted);
        // Exact coincidence is flagged but still canonical.
        let (same, flag) = unordered_view(&[3.0, 3.0], 1);
        assert_eq!(same, vec![3.0, 3.0]);
        assert!(flag);
    }

    #[test]
    fn all_permutations_collapse_to_one_representative() {
        // d = 2 blocks, N = 4 particles.
        let d = 2;
        let config: Vec<f64> = vec![3.0, -1.0, 0.5, 2.0, -2.0, 0.0, 0.5, 1.0];
        let (canonical, _) = unordered_view(&config, d);
        for (perm, _) in permutations(4) {
            let mut permuted = vec![0.0; config.len()];
            for (k, &src) in perm.iter().enumerate() {
                for a in 0..d {
                    permuted[k * d + a] = config[src * d + a];
                }
            }
            let (view, _) = unordered_view(&permuted, d);
            assert_eq!(view, canonical);
        }
    }

    #[test]
    fn permutation_parities_multiply_correctly() {
        let perms = permutations(3);
        assert_eq!(perms.len(), 6);
        let even: usize = perms.iter().filter(|(_, s)| *s > 0.0).count();
        assert_eq!(even, 3);
    }

    #[test]
    fn unequal_masses_are_rejected() {
        let grid = pair_grid(16, 10.0);
        let psi = gaussian_packet(
            grid,
            &[0.0, 1.0],
            &[1.0, 1.0],
            &[0.0, 0.0],
            vec![1.0, 2.0],
            1.0,
        )
        .unwrap();
        assert!(symmetrize(&psi, ExchangeSymmetry::Bosonic, ExchangeScope::Pair(0, 1)).is_err());
    }
}
