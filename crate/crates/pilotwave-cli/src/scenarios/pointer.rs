//! Pointer measurement: Born statistics from trajectory endpoints on the
//! object⊗pointer grid, plus the finite-dimensional operator algebra checks
//! (completeness, positivity, agreement, and the projective special case).

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use pilotwave::measurement::{random_state, BornBridgeSpec};
use pilotwave::{
    born_from_trajectories, cnot_model, evolve_model, extract_povm, pointer_probability,
    projective_observable, random_model, weak_coupling_model, ProjectiveOutcome, Result,
};

use super::{new_report, RunContext};
use crate::report::{CheckResult, RunReport};

pub fn pointer_measurement(ctx: &RunContext, weight0: f64) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let solver = &ctx.config.solver;
    let traj = ctx.config.trajectory.as_ref().expect("validated");
    let g = &ctx.config.grid;
    let points = g.points[0];
    let extent = g.extents[0];

    // Outcome statistics from positions alone.
    let run_bridge = |w0: f64, seed: u64| -> Result<pilotwave::BornReport> {
        born_from_trajectories(&BornBridgeSpec {
            amplitudes: vec![
                Complex64::new(w0.sqrt(), 0.0),
                Complex64::new((1.0 - w0).sqrt(), 0.0),
            ],
            pointer_centers: vec![-5.0, 5.0],
            pointer_sigma: 1.0,
            object_centers: vec![-3.0, 3.0],
            object_sigma: 1.0,
            points,
            extent,
            t_flight: solver.t_final,
            dt: solver.dt,
            snapshot_stride: solver.snapshot_stride,
            n_trajectories: traj.n,
            dt_traj: traj.dt_traj,
            seed,
        })
    };

    let born = run_bridge(weight0, ctx.config.seed)?;
    report.checks.push(CheckResult::below(
        "sector_overlap_mass",
        born.sector_overlap_mass,
        1e-6,
    ));
    report.checks.push(CheckResult::near(
        "born_frequency_outcome0",
        born.frequencies[0],
        born.expected[0],
        born.three_sigma[0].max(1e-6),
    ));

    // Eigenstate control: every counted trajectory lands in its sector.
    let pure = run_bridge(1.0, ctx.config.seed + 1)?;
    report.checks.push(CheckResult::near(
        "eigenstate_sector_frequency",
        pure.frequencies[0],
        1.0,
        1e-9,
    ));

    std::fs::write(ctx.path("born_report.json"), serde_json::to_string(&born)?)?;
    report.outputs.push("born_report.json".into());

    // Operator algebra over randomized models.
    let mut completeness: f64 = 0.0;
    let mut negativity: f64 = 0.0;
    let mut hermiticity: f64 = 0.0;
    let mut agreement: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed ^ 0x9e37_79b9);
    let plans: [(usize, usize, usize); 5] = [(2, 2, 2), (2, 4, 2), (3, 4, 3), (4, 8, 4), (2, 8, 2)];
    let mut model_count = 0usize;
    for round in 0..5u64 {
        for &(dim_obj, dim_app, sectors) in &plans {
            let seed = ctx.config.seed
                .wrapping_mul(1_000_003)
                .wrapping_add(round * 131 + (dim_obj * 17 + dim_app) as u64);
            let duration = 0.3 + 0.2 * (round as f64) + 0.01 * dim_app as f64;
            let model = random_model(dim_obj, dim_app, sectors, duration, 1.0, seed)?;
            let povm = extract_povm(&model)?;
            let dim = dim_obj;
            let mut sum = pilotwave::linalg::CMatrix::zeros(dim);
            for e in &povm.elements {
                hermiticity = hermiticity.max(e.hermiticity_defect());
                let min_eig = e.hermitian_eigenvalues()?[0];
                negativity = negativity.max((-min_eig).max(0.0));
                sum = sum.add(e);
            }
            completeness = completeness
                .max(sum.sub(&pilotwave::linalg::CMatrix::identity(dim)).max_abs());
            for _ in 0..100 {
                let psi = random_state(dim_obj, &mut rng);
                let joint = evolve_model(&model, &psi)?;
                for alpha in 0..povm.elements.len() {
                    let diff = (pointer_probability(&model, &joint, alpha)
                        - povm.probability(alpha, &psi))
                    .abs();
                    agreement = agreement.max(diff);
                }
            }
            model_count += 1;
        }
    }
    report.checks.push(CheckResult::near(
        "randomized_model_count",
        model_count as f64,
        25.0,
        0.5,
    ));
    report
        .checks
        .push(CheckResult::below("povm_completeness_defect", completeness, 1e-10));
    report
        .checks
        .push(CheckResult::below("povm_negativity", negativity, 1e-10));
    report
        .checks
        .push(CheckResult::below("povm_hermiticity_defect", hermiticity, 1e-10));
    report
        .checks
        .push(CheckResult::below("povm_probability_agreement", agreement, 1e-10));

    // The controlled-flip model is the projective special case.
    let cnot = cnot_model(1.0, 1.0);
    let cnot_povm = extract_povm(&cnot)?;
    let projective_defect = match projective_observable(&cnot_povm)? {
        ProjectiveOutcome::Projective { observable, .. } => {
            let expect_diag = [1.0, -1.0];
            let mut worst: f64 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { expect_diag[i] } else { 0.0 };
                    worst = worst
                        .max((observable[(i, j)] - Complex64::new(expect, 0.0)).norm());
                }
            }
            worst
        }
        ProjectiveOutcome::NonProjective { max_defect } => 1.0 + max_defect,
    };
    report.checks.push(CheckResult::below(
        "cnot_projective_observable_defect",
        projective_defect,
        1e-10,
    ));

    // And the weak coupling is recognizably not projective.
    let weak = weak_coupling_model(0.4, 1.0, 1.0);
    let weak_defect = match projective_observable(&extract_povm(&weak)?)? {
        ProjectiveOutcome::NonProjective { max_defect } => max_defect,
        ProjectiveOutcome::Projective { .. } => 0.0,
    };
    report
        .checks
        .push(CheckResult::above("weak_model_projection_defect", weak_defect, 1e-3));

    Ok(report)
}
