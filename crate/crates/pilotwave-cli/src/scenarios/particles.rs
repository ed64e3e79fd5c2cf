//! The Lagrangian particle method against the grid solver, with the
//! refinement lattice that pins its convergence.

use pilotwave::qtm::{qtm_run, QtmOptions};
use pilotwave::solver::evolve;
use pilotwave::{gaussian_packet, io, PotentialSpec, Result, ScalarField, WaveFunction};

use serde::Serialize;

use super::{new_report, RunContext};
use crate::report::{CheckResult, RunReport};

fn modulus_l2(wave: &ScalarField, reference: &WaveFunction) -> f64 {
    let cell = reference.grid().cell_volume();
    (wave
        .values()
        .iter()
        .zip(reference.amplitudes())
        .map(|(m, a)| (m - a.norm()).powi(2))
        .sum::<f64>()
        * cell)
        .sqrt()
}

fn gauge_aligned_l2(hat: &WaveFunction, reference: &WaveFunction) -> f64 {
    let overlap: num_complex::Complex64 = reference
        .amplitudes()
        .iter()
        .zip(hat.amplitudes())
        .map(|(r, h)| r.conj() * h)
        .sum();
    let theta = -overlap.arg();
    let cell = reference.grid().cell_volume();
    (hat.amplitudes()
        .iter()
        .zip(reference.amplitudes())
        .map(|(h, r)| (h * num_complex::Complex64::from_polar(1.0, theta) - r).norm_sqr())
        .sum::<f64>()
        * cell)
        .sqrt()
}

#[derive(Serialize)]
struct LatticeCell {
    n: usize,
    dt: f64,
    modulus_l2: f64,
}

pub fn qtm_free_gaussian(ctx: &RunContext, sigma: f64) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let solver = &ctx.config.solver;
    let qtm = ctx.config.qtm.as_ref().expect("validated");

    let psi0 = gaussian_packet(
        grid.clone(),
        &[0.0],
        &[sigma],
        &[0.0],
        ctx.masses(),
        ctx.hbar(),
    )?;
    ctx.check_tail_mass(&psi0, &mut report.warnings)?;

    // Eulerian reference (exact splitting for the free case).
    let record = evolve(
        &psi0,
        &PotentialSpec::Zero,
        None,
        solver.method,
        solver.t_final,
        solver.dt,
        solver.snapshot_stride,
    )?;
    let reference = record.final_state();

    let opts = QtmOptions {
        bandwidth: qtm.bandwidth,
        ..QtmOptions::default()
    };

    // Reconstruction quality at t = 0 (estimation error only).
    let (_, waves0) = qtm_run(
        &psi0,
        &PotentialSpec::Zero,
        qtm.n,
        0.0,
        qtm.dt,
        ctx.config.seed,
        1,
        opts,
    )?;
    report.checks.push(CheckResult::below(
        "reconstruction_t0_modulus_l2",
        modulus_l2(&waves0[0].modulus, &psi0),
        0.03,
    ));

    // Full run against the solver.
    let (_, waves) = qtm_run(
        &psi0,
        &PotentialSpec::Zero,
        qtm.n,
        solver.t_final,
        qtm.dt,
        ctx.config.seed,
        usize::MAX,
        opts,
    )?;
    let wave = waves.last().expect("final reconstruction");
    report.checks.push(CheckResult::below(
        "modulus_l2_vs_eulerian",
        modulus_l2(&wave.modulus, reference),
        0.05,
    ));
    let psi_hat = wave.to_wavefunction(ctx.masses())?.normalize()?;
    report.checks.push(CheckResult::below(
        "gauge_aligned_l2_vs_eulerian",
        gauge_aligned_l2(&psi_hat, reference),
        0.05,
    ));
    let norm = wave.to_wavefunction(ctx.masses())?.norm();
    report
        .checks
        .push(CheckResult::near("reconstruction_norm", norm, 1.0, 0.02));

    if qtm.refinement {
        // 3x3 (n, dt) lattice: the error must not increase along either
        // refinement direction.
        let n_values = [qtm.n / 4, qtm.n, qtm.n * 4];
        let dt_values = [2.0 * qtm.dt, qtm.dt, 0.5 * qtm.dt];
        let mut errors = [[0.0f64; 3]; 3];
        let mut cells = Vec::new();
        for (i, &n) in n_values.iter().enumerate() {
            for (j, &dt) in dt_values.iter().enumerate() {
                let (_, w) = qtm_run(
                    &psi0,
                    &PotentialSpec::Zero,
                    n,
                    solver.t_final,
                    dt,
                    ctx.config.seed,
                    usize::MAX,
                    opts,
                )?;
                let err = modulus_l2(&w.last().expect("final").modulus, reference);
                errors[i][j] = err;
                cells.push(LatticeCell {
                    n,
                    dt,
                    modulus_l2: err,
                });
            }
        }
        let mut worst_increase: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i + 1 < 3 {
                    worst_increase = worst_increase.max(errors[i + 1][j] - errors[i][j]);
                }
                if j + 1 < 3 {
                    worst_increase = worst_increase.max(errors[i][j + 1] - errors[i][j]);
                }
            }
        }
        report.checks.push(CheckResult::below(
            "refinement_monotonicity_worst_increase",
            worst_increase,
            0.0_f64.next_up(),
        ));
        std::fs::write(
            ctx.path("refinement_lattice.json"),
            serde_json::to_string(&cells)?,
        )?;
        report.outputs.push("refinement_lattice.json".into());
    }

    if ctx.config.output.write_fields {
        io::write_scalar_field(&ctx.path("reconstructed_modulus.bohm"), &wave.modulus)?;
        report.outputs.push("reconstructed_modulus.bohm".into());
        io::write_wavefunction(&ctx.path("eulerian_final.bohm"), reference)?;
        report.outputs.push("eulerian_final.bohm".into());
    }
    Ok(report)
}
