//! The winding eigenstate on a periodic ring: branch cuts, loop integrals,
//! and the modulus/phase equation residuals.

use num_complex::Complex64;

use pilotwave::{
    fundamental_loop, hamilton_jacobi_residuals, io, polar_decompose, winding_number,
    PotentialSpec, Result, WaveFunction,
};

use super::{new_report, RunContext};
use crate::report::{CheckResult, RunReport};

pub fn ring_state(ctx: &RunContext, winding: i32) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let extent = grid.extents()[0];
    let solver = &ctx.config.solver;
    let hbar = ctx.hbar();
    let mass = ctx.masses()[0];

    let k = 2.0 * std::f64::consts::PI * winding as f64 / extent;
    let amps: Vec<Complex64> = (0..grid.len())
        .map(|i| Complex64::from_polar(1.0, k * grid.axis_coord(0, i)))
        .collect();
    let psi = WaveFunction::new(grid.clone(), 1, amps, ctx.masses(), hbar)?.normalize()?;

    let anchor = 0;
    let (_modulus, phase) = polar_decompose(&psi, anchor, 1e-6)?;

    // Exactly one cut carrying m turns.
    report.checks.push(CheckResult::near(
        "branch_cut_count",
        phase.branch_jumps().len() as f64,
        1.0,
        0.5,
    ));
    let recorded = phase
        .branch_jumps()
        .first()
        .map(|j| j.multiple as f64)
        .unwrap_or(f64::NAN);
    report.checks.push(CheckResult::near(
        "branch_cut_turns",
        recorded,
        winding as f64,
        0.5,
    ));

    // Quantization: the worst deviation of any recorded jump from an exact
    // multiple of 2πħ (recomputed from the raw phase values).
    let two_pi_hbar = 2.0 * std::f64::consts::PI * hbar;
    let mut worst_residue: f64 = 0.0;
    for jump in phase.branch_jumps() {
        let n = grid.points()[jump.axis];
        let after: usize = grid.points()[jump.axis + 1..].iter().product();
        let mut multi = vec![0usize; grid.dim()];
        grid.multi_index(jump.index, &mut multi);
        let q = if multi[jump.axis] + 1 >= n {
            jump.index + after - n * after
        } else {
            jump.index + after
        };
        let s_vals = phase.values().values();
        let arg_p = psi.amplitudes()[jump.index].arg();
        let arg_q = psi.amplitudes()[q].arg();
        let mut smooth = (arg_q - arg_p).rem_euclid(2.0 * std::f64::consts::PI);
        if smooth > std::f64::consts::PI {
            smooth -= 2.0 * std::f64::consts::PI;
        }
        let drop = s_vals[jump.index] + hbar * smooth - s_vals[q];
        worst_residue = worst_residue.max((drop - jump.multiple as f64 * two_pi_hbar).abs());
    }
    report.checks.push(CheckResult::below(
        "jump_quantization_residue",
        worst_residue,
        1e-6 * two_pi_hbar,
    ));

    // Loop integral returns the winding exactly.
    let the_loop = fundamental_loop(&grid, 0, anchor);
    let measured = winding_number(&phase, &the_loop)?;
    report.checks.push(CheckResult::near(
        "winding_number",
        measured as f64,
        winding as f64,
        0.5,
    ));

    // Stationary-state residuals: evolve one solver step and compare.
    let energy = hbar * hbar * k * k / (2.0 * mass);
    let _ = energy;
    let record = pilotwave::evolve(
        &psi,
        &PotentialSpec::Zero,
        None,
        solver.method,
        solver.dt,
        solver.dt,
        1,
    )?;
    let residuals = hamilton_jacobi_residuals(
        record.initial(),
        record.final_state(),
        solver.dt,
        &PotentialSpec::Zero,
        anchor,
        1e-6,
    )?;
    report.checks.push(CheckResult::below(
        "continuity_residual_l1",
        residuals.continuity_l1,
        1e-6,
    ));
    report.checks.push(CheckResult::below(
        "hamilton_jacobi_residual_l1",
        residuals.hamilton_jacobi_l1,
        1e-6,
    ));

    if ctx.config.output.write_fields {
        io::write_phase_field(&ctx.path("phase.bohm"), &phase)?;
        report.outputs.push("phase.bohm".into());
        report.outputs.push("phase.bohm.json".into());
    }
    Ok(report)
}
