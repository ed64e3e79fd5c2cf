//! Stern–Gerlach from positions alone: a spinor packet rides a field
//! gradient and the up/down statistics emerge from which side of the axis
//! each trajectory ends on. No spin variable exists in the trajectory data.

use num_complex::Complex64;

use pilotwave::solver::evolve;
use pilotwave::trajectory::{propagate_ensemble, sample_initial, PropagateOptions, SampleFlag};
use pilotwave::{
    gaussian_packet, io, with_spinor, BField, MagneticSpec, PotentialSpec, Result,
};

use super::{new_report, RunContext};
use crate::report::{CheckResult, RunReport};

pub fn stern_gerlach(ctx: &RunContext, theta: f64, gradient: f64) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let solver = &ctx.config.solver;
    let traj = ctx.config.trajectory.as_ref().expect("validated");

    let scalar = gaussian_packet(
        grid.clone(),
        &[0.0],
        &[1.0],
        &[0.0],
        ctx.masses(),
        ctx.hbar(),
    )?;
    ctx.check_tail_mass(&scalar, &mut report.warnings)?;
    // Spinor (cos θ/2, sin θ/2): the up weight is cos²(θ/2).
    let spinor = with_spinor(
        &scalar,
        &[
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::new((theta / 2.0).sin(), 0.0),
        ],
    )?;
    let magnetic = MagneticSpec {
        vector_potential: None,
        field: BField::LinearAlongAxis {
            axis: 0,
            slope: gradient,
        },
        moments: vec![1.0],
        charges: vec![0.0],
    };

    let record = evolve(
        &spinor,
        &PotentialSpec::Zero,
        Some(&magnetic),
        solver.method,
        solver.t_final,
        solver.dt,
        solver.snapshot_stride,
    )?;
    report.checks.push(CheckResult::below(
        "norm_drift",
        (record.final_state().norm() - 1.0).abs(),
        1e-8,
    ));

    let starts = sample_initial(&spinor, traj.n, ctx.config.seed)?;
    let ensemble = propagate_ensemble(
        &record,
        &starts,
        ctx.config.seed,
        PropagateOptions::new(traj.dt_traj),
    )?;

    // With a negative gradient the up component accelerates toward +z, so
    // "up" is read off the sign of the endpoint.
    let up_side = if gradient < 0.0 { 1.0 } else { -1.0 };
    let last = ensemble.times().len() - 1;
    let flags = ensemble.flags_at(last);
    let mut up = 0usize;
    let mut counted = 0usize;
    for i in 0..ensemble.len() {
        if flags[i] == SampleFlag::LeftDomain {
            continue;
        }
        counted += 1;
        if ensemble.position(last, i)[0] * up_side > 0.0 {
            up += 1;
        }
    }
    let expected = (theta / 2.0).cos().powi(2);
    let fraction = up as f64 / counted.max(1) as f64;
    let three_sigma = 3.0 * (expected * (1.0 - expected) / counted.max(1) as f64).sqrt();
    report.checks.push(CheckResult::near(
        "up_fraction",
        fraction,
        expected,
        three_sigma.max(1e-3),
    ));

    if ctx.config.output.write_trajectories {
        io::write_ensemble(&ctx.outdir, "trajectories", &ensemble)?;
        report.outputs.push("trajectories.csv".into());
        report.outputs.push("trajectories.json".into());
    }
    if ctx.config.output.write_fields {
        io::write_wavefunction(&ctx.path("final_state.bohm"), record.final_state())?;
        report.outputs.push("final_state.bohm".into());
    }
    Ok(report)
}
