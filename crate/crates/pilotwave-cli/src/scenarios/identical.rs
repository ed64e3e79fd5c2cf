//! Two identical particles in one dimension: exchange symmetry of the
//! velocity field, permutation equivariance of the flow, the fermionic
//! coincidence exclusion, and canonical unordered configurations.

use pilotwave::solver::evolve;
use pilotwave::trajectory::{integrate_trajectory, PropagateOptions};
use pilotwave::{
    gaussian_packet, io, min_pair_separation, permutations, symmetrize, unordered_view,
    velocity_exchange_check, ExchangeScope, ExchangeSymmetry, PotentialSpec, Result,
};

use super::{new_report, RunContext};
use crate::report::{CheckResult, RunReport};

pub fn exchange_scenario(
    ctx: &RunContext,
    fermionic: bool,
    separation: f64,
    boost: f64,
) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let solver = &ctx.config.solver;
    let traj = ctx.config.trajectory.as_ref().expect("validated");
    let half = 0.5 * separation;

    // Product g(q1)h(q2), boosted symmetrically so velocities are nonzero,
    // then projected onto the exchange sector.
    let product = gaussian_packet(
        grid.clone(),
        &[-half, half],
        &[1.0, 1.0],
        &[boost, boost],
        ctx.masses(),
        ctx.hbar(),
    )?;
    let symmetry = if fermionic {
        ExchangeSymmetry::Fermionic
    } else {
        ExchangeSymmetry::Bosonic
    };
    let psi0 = symmetrize(&product, symmetry, ExchangeScope::Pair(0, 1))?;
    ctx.check_tail_mass(&psi0, &mut report.warnings)?;

    // Velocity-field exchange symmetry on the grid.
    let exchange = velocity_exchange_check(&psi0, (0, 1), 1e-6)?;
    report.checks.push(CheckResult::below(
        "wave_exchange_violation",
        exchange.max_wave_violation,
        1e-10,
    ));
    report.checks.push(CheckResult::below(
        "velocity_exchange_violation",
        exchange.max_velocity_violation,
        1e-9,
    ));

    let record = evolve(
        &psi0,
        &PotentialSpec::Zero,
        None,
        solver.method,
        solver.t_final,
        solver.dt,
        solver.snapshot_stride,
    )?;

    // Flow equivariance: twin runs from q0 and its swap, measured against
    // the integrator's own tolerance (dt-halving endpoint gap).
    let q0 = [-half - 0.4, half + 0.3];
    let opts = PropagateOptions::new(traj.dt_traj);
    let fine = PropagateOptions::new(0.5 * traj.dt_traj);
    let base = integrate_trajectory(&record, &q0, opts)?;
    let refined = integrate_trajectory(&record, &q0, fine)?;
    let mut tolerance: f64 = 0.0;
    for a in 0..2 {
        tolerance = tolerance.max((base.endpoint()[a] - refined.endpoint()[a]).abs());
    }
    let tolerance = tolerance.max(1e-12);
    let deviation = pilotwave::flow_equivariance_check(&record, &q0, (0, 1), opts)?;
    report.checks.push(CheckResult::below(
        "flow_equivariance_over_tolerance",
        deviation / (10.0 * tolerance),
        1.0,
    ));

    if fermionic {
        // Trajectories keep away from the coincidence line q1 = q2.
        let starts = pilotwave::sample_initial(&psi0, traj.n, ctx.config.seed)?;
        let ensemble = pilotwave::propagate_ensemble(
            &record,
            &starts,
            ctx.config.seed,
            PropagateOptions::new(traj.dt_traj),
        )?;
        let mut min_sep = f64::INFINITY;
        for ti in 0..ensemble.times().len() {
            for i in 0..ensemble.len() {
                min_sep = min_sep.min(min_pair_separation(ensemble.position(ti, i), 1, 2));
            }
        }
        report
            .checks
            .push(CheckResult::above("fermion_min_separation", min_sep, 0.0));
        if ctx.config.output.write_trajectories {
            io::write_ensemble(&ctx.outdir, "trajectories", &ensemble)?;
            report.outputs.push("trajectories.csv".into());
            report.outputs.push("trajectories.json".into());
        }
    } else {
        // The diagonal is a fixed point of the swap: a start with q1 = q2
        // maps to itself, so the twin runs coincide to roundoff.
        let diagonal = [0.3, 0.3];
        let dev = pilotwave::flow_equivariance_check(&record, &diagonal, (0, 1), opts)?;
        report
            .checks
            .push(CheckResult::below("diagonal_fixed_point_deviation", dev, 1e-12));
    }

    // Negative control: the raw product state is visibly unsymmetric.
    let control = velocity_exchange_check(
        &product.clone().normalize()?,
        (0, 1),
        1e-6,
    )?;
    report.checks.push(CheckResult::above(
        "unsymmetrized_control_violation",
        control.max_wave_violation,
        0.1,
    ));

    // Canonical unordered view: all N! relabelings collapse, N ≤ 4.
    let mut canonical_failures = 0usize;
    for n_particles in 2..=4usize {
        let d = 1;
        let config: Vec<f64> = (0..n_particles)
            .map(|i| ((i * 2654435761) % 97) as f64 / 10.0 - 4.0)
            .collect();
        let (canonical, _) = unordered_view(&config, d);
        for (perm, _) in permutations(n_particles) {
            let mut permuted = vec![0.0; config.len()];
            for (k, &src) in perm.iter().enumerate() {
                permuted[k] = config[src];
            }
            let (view, _) = unordered_view(&permuted, d);
            if view != canonical {
                canonical_failures += 1;
            }
        }
    }
    report.checks.push(CheckResult::below(
        "canonicalization_failures",
        canonical_failures as f64,
        0.5,
    ));

    let exchange_json = serde_json::to_string(&exchange)?;
    std::fs::write(ctx.path("exchange_report.json"), exchange_json)?;
    report.outputs.push("exchange_report.json".into());
    if ctx.config.output.write_fields {
        io::write_wavefunction(&ctx.path("symmetrized_state.bohm"), &psi0)?;
        report.outputs.push("symmetrized_state.bohm".into());
    }
    Ok(report)
}
