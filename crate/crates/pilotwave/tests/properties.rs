use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use pilotwave::{
    inner_product, make_grid, tv_distance_binned, unordered_view, Boundary, ScalarField,
    WaveFunction,
};

fn arb_state(n: usize) -> impl Strategy<Value = WaveFunction> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_filter_map(
        "nonzero state",
        move |parts| {
            let grid =
                Arc::new(make_grid(1, 1, vec![n], vec![10.0], Boundary::Periodic).unwrap());
            let amps: Vec<Complex64> =
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            let wf = WaveFunction::new(grid, 1, amps, vec![1.0], 1.0).unwrap();
            (wf.norm() > 1e-3).then(|| wf.normalize().unwrap())
        },
    )
}

proptest! {
    #[test]
    fn normalized_states_have_unit_density_integral(psi in arb_state(32)) {
        let density = psi.density();
        prop_assert!((density.integral() - 1.0).abs() < 1e-9);
        prop_assert!(density.values().iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn inner_product_hermitian_symmetry(a in arb_state(16), b in arb_state(16)) {
        let ab = inner_product(&a, &b).unwrap();
        let ba = inner_product(&b, &a).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-12);
        let aa = inner_product(&a, &a).unwrap();
        prop_assert!(aa.im.abs() < 1e-12 && aa.re >= 0.0);
    }

    #[test]
    fn grid_index_round_trip(
        n0 in 4usize..12,
        n1 in 4usize..12,
        flat_seed in 0usize..10_000,
    ) {
        let grid = make_grid(1, 2, vec![n0, n1], vec![3.0, 7.0], Boundary::Periodic).unwrap();
        let flat = flat_seed % grid.len();
        let mut multi = [0usize; 2];
        grid.multi_index(flat, &mut multi);
        prop_assert_eq!(grid.flat_index(&multi), flat);
    }

    #[test]
    fn wrap_point_is_idempotent_and_in_domain(q in -100.0f64..100.0) {
        let grid = make_grid(1, 1, vec![8], vec![5.0], Boundary::Periodic).unwrap();
        let mut once = [q];
        grid.wrap_point(&mut once);
        prop_assert!(once[0] >= -2.5 && once[0] < 2.5);
        let mut twice = once;
        grid.wrap_point(&mut twice);
        prop_assert_eq!(once[0].to_bits(), twice[0].to_bits());
    }

    #[test]
    fn tv_distance_is_a_bounded_metric(
        a in prop::collection::vec(0.0f64..1.0, 64),
        b in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let grid = Arc::new(make_grid(1, 1, vec![64], vec![8.0], Boundary::Periodic).unwrap());
        let norm = |v: Vec<f64>| {
            let total: f64 = v.iter().sum::<f64>() * grid.cell_volume();
            let vals: Vec<f64> = if total > 0.0 {
                v.iter().map(|x| x / total).collect()
            } else {
                vec![1.0 / (64.0 * grid.cell_volume()); 64]
            };
            ScalarField::new(grid.clone(), vals).unwrap()
        };
        let fa = norm(a);
        let fb = norm(b);
        let d = tv_distance_binned(&fa, &fb, 64);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!(tv_distance_binned(&fa, &fa, 64) < 1e-12);
        let sym = (d - tv_distance_binned(&fb, &fa, 64)).abs();
        prop_assert!(sym < 1e-12);
    }

    #[test]
    fn unordered_view_is_permutation_invariant(
        blocks in prop::collection::vec(-5.0f64..5.0, 8),
        swap_a in 0usize..4,
        swap_b in 0usize..4,
    ) {
        // d = 2, N = 4 configuration.
        let (canonical, _) = unordered_view(&blocks, 2);
        let mut permuted = blocks.clone();
        for a in 0..2 {
            permuted.swap(swap_a * 2 + a, swap_b * 2 + a);
        }
        let (view, _) = unordered_view(&permuted, 2);
        prop_assert_eq!(view.clone(), canonical);
        // Idempotence.
        let (again, _) = unordered_view(&view, 2);
        prop_assert_eq!(again, view);
    }
}
