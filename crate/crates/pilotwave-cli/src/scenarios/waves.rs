//! Scalar wave-packet scenarios: dispersion, drift, oscillator physics, and
//! the equivariance verification on interference.

use num_complex::Complex64;

use pilotwave::solver::evolve;
use pilotwave::trajectory::{
    empirical_density, equivariance_distance, propagate_ensemble, sample_initial,
    PropagateOptions, SampleFlag,
};
use pilotwave::{
    gaussian_packet, io, quantum_potential, Interpolation, PotentialSpec, Result, VelocityProbe,
    WaveFunction,
};

use super::{new_report, RunContext};
use crate::report::{CheckResult, RunReport};

fn measured_width_sq(psi: &WaveFunction) -> f64 {
    let grid = psi.grid();
    let density = psi.density();
    let cell = grid.cell_volume();
    let mut mean = 0.0;
    let mut second = 0.0;
    for i in 0..grid.len() {
        let x = grid.axis_coord(0, i);
        mean += x * density.values()[i] * cell;
        second += x * x * density.values()[i] * cell;
    }
    second - mean * mean
}

pub fn free_gaussian(ctx: &RunContext, sigma: f64) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let solver = &ctx.config.solver;
    let traj = ctx.config.trajectory.as_ref().expect("validated");
    let psi0 = gaussian_packet(
        grid.clone(),
        &[0.0],
        &[sigma],
        &[0.0],
        ctx.masses(),
        ctx.hbar(),
    )?;
    ctx.check_tail_mass(&psi0, &mut report.warnings)?;

    let record = evolve(
        &psi0,
        &PotentialSpec::Zero,
        None,
        solver.method,
        solver.t_final,
        solver.dt,
        solver.snapshot_stride,
    )?;

    // Width law at the final time.
    let spread = ctx.hbar() * solver.t_final / (2.0 * ctx.masses()[0] * sigma);
    let expect = sigma * sigma + spread * spread;
    let width = measured_width_sq(record.final_state());
    report.checks.push(CheckResult::below(
        "width_law_relative_error",
        ((width - expect) / expect).abs(),
        1e-3,
    ));

    // Norm drift over 10⁴ steps at the same spacing budget.
    let drift_record = evolve(
        &psi0,
        &PotentialSpec::Zero,
        None,
        solver.method,
        1e4 * 1e-4,
        1e-4,
        10_000,
    )?;
    report.checks.push(CheckResult::below(
        "norm_drift_10k_steps",
        (drift_record.final_state().norm() - psi0.norm()).abs(),
        1e-10,
    ));

    // Born transport of a sampled ensemble.
    let starts = sample_initial(&psi0, traj.n, ctx.config.seed)?;
    let ensemble = propagate_ensemble(
        &record,
        &starts,
        ctx.config.seed,
        PropagateOptions::new(traj.dt_traj),
    )?;
    let mut worst_tv: f64 = 0.0;
    for &t in record.times() {
        worst_tv = worst_tv.max(equivariance_distance(&ensemble, &record, t)?.tv_distance);
    }
    report
        .checks
        .push(CheckResult::below("equivariance_tv_max", worst_tv, 0.05));

    // 1-D ordering is preserved by the flow.
    let mut violations = 0usize;
    let last = ensemble.times().len() - 1;
    let order0: Vec<usize> = {
        let xs = ensemble.positions_at(0);
        let mut idx: Vec<usize> = (0..ensemble.len()).collect();
        idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
        idx
    };
    let xs_end = ensemble.positions_at(last);
    for pair in order0.windows(2) {
        if xs_end[pair[1]] < xs_end[pair[0]] {
            violations += 1;
        }
    }
    report.checks.push(CheckResult::below(
        "crossing_violations",
        violations as f64,
        0.5,
    ));

    // Newton-form consistency along sampled trajectories: the second
    // difference of Q balances −∇(V+V_qu) at second order in the sampling
    // step, and a second-order run seeded off the guidance velocity leaves
    // the guidance trajectory by far more than the integrator tolerance.
    {
        let newton_record = evolve(
            &psi0,
            &PotentialSpec::Zero,
            None,
            solver.method,
            0.2,
            5e-4,
            40,
        )?;
        let n_newton = 100;
        let newton_starts = sample_initial(&psi0, n_newton, ctx.config.seed ^ 0xa5a5)?;
        let residual_for = |dt: f64| -> Result<f64> {
            let opts = PropagateOptions::new(dt).spectral().recording_every_step();
            let ens = propagate_ensemble(&newton_record, &newton_starts, ctx.config.seed, opts)?;
            let trajs: Vec<_> = (0..n_newton).map(|i| ens.trajectory(i)).collect();
            let reports = pilotwave::newton_residual_batch(&trajs, &newton_record, 1e-6)?;
            Ok(reports
                .iter()
                .map(|r| r.max_residual())
                .fold(0.0f64, f64::max))
        };
        let coarse = residual_for(4e-3)?;
        let mid = residual_for(2e-3)?;
        let fine = residual_for(1e-3)?;
        report
            .checks
            .push(CheckResult::below("newton_max_residual_dt_1e-3", fine, 1e-3));
        report.checks.push(CheckResult::near(
            "newton_residual_halving_ratio",
            coarse / mid,
            4.0,
            0.7,
        ));

        // Twin second-order runs: matched velocity tracks the guidance law,
        // a 10% perturbation does not.
        let boosted = gaussian_packet(
            grid.clone(),
            &[-1.0],
            &[sigma],
            &[1.5],
            ctx.masses(),
            ctx.hbar(),
        )?;
        let twin_record = evolve(
            &boosted,
            &PotentialSpec::Zero,
            None,
            solver.method,
            0.5,
            5e-4,
            50,
        )?;
        let q0 = [-0.5];
        let probe = VelocityProbe::new(&boosted, Interpolation::Spectral, 1e-6)?;
        let mut v0 = [0.0];
        probe.velocity_at(&q0, &mut v0)?;
        let dtn = 1e-3;
        let guided = pilotwave::integrate_trajectory(
            &twin_record,
            &q0,
            PropagateOptions::new(dtn).spectral(),
        )?;
        let matched = pilotwave::integrate_newton(&twin_record, &q0, &v0, dtn, 1e-6)?;
        let tolerance = (matched.endpoint()[0] - guided.endpoint()[0])
            .abs()
            .max(1e-9);
        let perturbed =
            pilotwave::integrate_newton(&twin_record, &q0, &[1.1 * v0[0]], dtn, 1e-6)?;
        let gap = (perturbed.endpoint()[0] - guided.endpoint()[0]).abs();
        report.checks.push(CheckResult::above(
            "perturbed_velocity_gap_over_tolerance",
            gap / (10.0 * tolerance),
            1.0,
        ));
    }

    if ctx.config.output.write_trajectories {
        io::write_ensemble(&ctx.outdir, "trajectories", &ensemble)?;
        report.outputs.push("trajectories.csv".into());
        report.outputs.push("trajectories.json".into());
    }
    if ctx.config.output.write_fields {
        io::write_wavefunction(&ctx.path("final_state.bohm"), record.final_state())?;
        report.outputs.push("final_state.bohm".into());
        let rho = empirical_density(&ensemble, *record.times().last().unwrap(), &grid)?;
        io::write_scalar_field(&ctx.path("empirical_density.bohm"), &rho)?;
        report.outputs.push("empirical_density.bohm".into());
    }
    Ok(report)
}

pub fn boosted_gaussian(ctx: &RunContext, sigma: f64, wavevector: f64) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let solver = &ctx.config.solver;
    let traj = ctx.config.trajectory.as_ref().expect("validated");
    let mass = ctx.masses()[0];
    let psi0 = gaussian_packet(
        grid.clone(),
        &[0.0],
        &[sigma],
        &[wavevector],
        ctx.masses(),
        ctx.hbar(),
    )?;
    ctx.check_tail_mass(&psi0, &mut report.warnings)?;

    // The velocity field at t = 0 is the uniform drift ħk/m.
    let probe = VelocityProbe::new(&psi0, Interpolation::Multilinear, 1e-6)?;
    let mut v = [0.0];
    let mut worst: f64 = 0.0;
    for q in [-1.5 * sigma, 0.0, 1.5 * sigma] {
        probe.velocity_at(&[q], &mut v)?;
        worst = worst.max((v[0] - ctx.hbar() * wavevector / mass).abs());
    }
    report
        .checks
        .push(CheckResult::below("drift_velocity_error", worst, 1e-6));

    let record = evolve(
        &psi0,
        &PotentialSpec::Zero,
        None,
        solver.method,
        solver.t_final,
        solver.dt,
        solver.snapshot_stride,
    )?;

    // Trajectory endpoint law: Q(t) = v·t + Q(0)·σ(t)/σ0 for a packet
    // released at the origin.
    let q0 = sigma;
    let single = pilotwave::integrate_trajectory(
        &record,
        &[q0],
        PropagateOptions::new(traj.dt_traj),
    )?;
    let t = solver.t_final;
    let spread = ctx.hbar() * t / (2.0 * mass * sigma);
    let expect = ctx.hbar() * wavevector / mass * t
        + q0 * ((sigma * sigma + spread * spread) / (sigma * sigma)).sqrt();
    report.checks.push(CheckResult::near(
        "endpoint_vs_drift_scaling_law",
        single.endpoint()[0],
        expect,
        2e-3,
    ));

    let starts = sample_initial(&psi0, traj.n, ctx.config.seed)?;
    let ensemble = propagate_ensemble(
        &record,
        &starts,
        ctx.config.seed,
        PropagateOptions::new(traj.dt_traj),
    )?;
    let tv = equivariance_distance(&ensemble, &record, *record.times().last().unwrap())?;
    report
        .checks
        .push(CheckResult::below("equivariance_tv_final", tv.tv_distance, 0.05));

    if ctx.config.output.write_trajectories {
        io::write_ensemble(&ctx.outdir, "trajectories", &ensemble)?;
        report.outputs.push("trajectories.csv".into());
        report.outputs.push("trajectories.json".into());
    }
    Ok(report)
}

pub fn harmonic(ctx: &RunContext, omega: f64, coherent_amplitude: f64) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let solver = &ctx.config.solver;
    let mass = ctx.masses()[0];
    let hbar = ctx.hbar();
    let potential = PotentialSpec::Harmonic { omega: vec![omega] };

    // Ground-state stationarity at a dt fine enough for the 1e-8 contract.
    let ground = gaussian_packet(
        grid.clone(),
        &[0.0],
        &[(hbar / (2.0 * mass * omega)).sqrt()],
        &[0.0],
        ctx.masses(),
        hbar,
    )?;
    ctx.check_tail_mass(&ground, &mut report.warnings)?;
    let stat_record = evolve(&ground, &potential, None, solver.method, 0.1, 5e-5, 500)?;
    let mod0: Vec<f64> = ground.amplitudes().iter().map(|a| a.norm()).collect();
    let mut worst: f64 = 0.0;
    for snap in stat_record.snapshots() {
        for (a, m) in snap.amplitudes().iter().zip(&mod0) {
            worst = worst.max((a.norm() - m).abs());
        }
    }
    report
        .checks
        .push(CheckResult::below("ground_state_modulus_drift", worst, 1e-8));

    // V + V_qu is the constant ħω/2 on the trusted set.
    let vqu = quantum_potential(&ground, 1e-6)?;
    let mut balance: f64 = 0.0;
    for p in 0..grid.len() {
        if !vqu.mask.is_valid(p) {
            continue;
        }
        let q = grid.axis_coord(0, p);
        let total = 0.5 * mass * omega * omega * q * q + vqu.field.values()[p];
        balance = balance.max((total - 0.5 * hbar * omega).abs());
    }
    report
        .checks
        .push(CheckResult::below("energy_balance_deviation", balance, 1e-6));

    // Coherent-state period return and the dt order of the splitting.
    let coherent = |t: f64| -> WaveFunction {
        let qc = coherent_amplitude * (omega * t).cos();
        let pc = -mass * omega * coherent_amplitude * (omega * t).sin();
        let action =
            -mass * omega * coherent_amplitude * coherent_amplitude / 4.0 * (2.0 * omega * t).sin();
        let norm = (mass * omega / (std::f64::consts::PI * hbar)).powf(0.25);
        let amps: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let x = grid.axis_coord(0, i);
                let dx = x - qc;
                Complex64::from_polar(
                    norm * (-mass * omega * dx * dx / (2.0 * hbar)).exp(),
                    (pc * dx + action - hbar * omega * t / 2.0) / hbar,
                )
            })
            .collect();
        WaveFunction::new(grid.clone(), 1, amps, ctx.masses(), hbar)
            .expect("shape by construction")
            .normalize()
            .expect("nonzero")
    };
    let psi_c = coherent(0.0);
    let period = 2.0 * std::f64::consts::PI / omega;
    let period_record = evolve(
        &psi_c,
        &potential,
        None,
        solver.method,
        period,
        period / 4096.0,
        4096,
    )?;
    let cell = grid.cell_volume();
    let modulus_return = (period_record
        .final_state()
        .amplitudes()
        .iter()
        .zip(psi_c.amplitudes())
        .map(|(a, b)| (a.norm() - b.norm()).powi(2))
        .sum::<f64>()
        * cell)
        .sqrt();
    report.checks.push(CheckResult::below(
        "coherent_period_return_l2",
        modulus_return,
        1e-3,
    ));

    let l2 = |a: &WaveFunction, b: &WaveFunction| -> f64 {
        (a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            * cell)
            .sqrt()
    };
    let t_order = 1.0;
    let exact = coherent(t_order);
    let mut errors = Vec::new();
    for divisor in [50.0, 100.0] {
        let rec = evolve(
            &psi_c,
            &potential,
            None,
            solver.method,
            t_order,
            t_order / divisor,
            100_000,
        )?;
        errors.push(l2(rec.final_state(), &exact));
    }
    let ratio = errors[0] / errors[1];
    report.checks.push(CheckResult::near(
        "splitting_dt_halving_ratio",
        ratio,
        4.0,
        0.5,
    ));

    if ctx.config.output.write_fields {
        io::write_scalar_field(&ctx.path("quantum_potential.bohm"), &vqu.field)?;
        report.outputs.push("quantum_potential.bohm".into());
    }
    Ok(report)
}

pub fn two_gaussian_interference(
    ctx: &RunContext,
    sigma: f64,
    separation: f64,
) -> Result<RunReport> {
    let mut report = new_report(ctx.config);
    let grid = ctx.grid()?;
    let solver = &ctx.config.solver;
    let traj = ctx.config.trajectory.as_ref().expect("validated");
    let half = 0.5 * separation;

    // Launch the packets toward each other so they overlap fully at t_final
    // and the transported ensemble has to track real interference fringes.
    let k = ctx.masses()[0] * half / (ctx.hbar() * solver.t_final);
    let left = gaussian_packet(
        grid.clone(),
        &[-half],
        &[sigma],
        &[k],
        ctx.masses(),
        ctx.hbar(),
    )?;
    let right = gaussian_packet(
        grid.clone(),
        &[half],
        &[sigma],
        &[-k],
        ctx.masses(),
        ctx.hbar(),
    )?;
    let amps: Vec<Complex64> = left
        .amplitudes()
        .iter()
        .zip(right.amplitudes())
        .map(|(a, b)| a + b)
        .collect();
    let psi0 = WaveFunction::new(grid.clone(), 1, amps, ctx.masses(), ctx.hbar())?.normalize()?;
    ctx.check_tail_mass(&psi0, &mut report.warnings)?;

    let record = evolve(
        &psi0,
        &PotentialSpec::Zero,
        None,
        solver.method,
        solver.t_final,
        solver.dt,
        solver.snapshot_stride,
    )?;
    let starts = sample_initial(&psi0, traj.n, ctx.config.seed)?;
    let ensemble = propagate_ensemble(
        &record,
        &starts,
        ctx.config.seed,
        PropagateOptions::new(traj.dt_traj),
    )?;

    let mut tv0 = 0.0;
    let mut worst_tv: f64 = 0.0;
    let mut reports = Vec::new();
    for &t in record.times() {
        let r = equivariance_distance(&ensemble, &record, t)?;
        if t == 0.0 {
            tv0 = r.tv_distance;
        }
        worst_tv = worst_tv.max(r.tv_distance);
        reports.push(r);
    }
    report
        .checks
        .push(CheckResult::below("equivariance_tv_max", worst_tv, 0.05));
    report.checks.push(CheckResult::below(
        "equivariance_tv_growth",
        worst_tv - tv0,
        0.02,
    ));

    // Negative control: a uniform initial sample is visibly not transported
    // to |ψ_t|².
    let n_control = traj.n.min(20_000);
    let extent = grid.extents()[0];
    let uniform: Vec<f64> = (0..n_control)
        .map(|i| -0.5 * extent + extent * (i as f64 + 0.5) / n_control as f64)
        .collect();
    let control = propagate_ensemble(
        &record,
        &uniform,
        ctx.config.seed,
        PropagateOptions::new(traj.dt_traj),
    )?;
    let control_tv = equivariance_distance(&control, &record, *record.times().last().unwrap())?;
    report.checks.push(CheckResult::above(
        "negative_control_tv",
        control_tv.tv_distance,
        0.2,
    ));

    // Flag bookkeeping: every trajectory stayed inside (periodic domain).
    let last = ensemble.times().len() - 1;
    let left_domain = ensemble
        .flags_at(last)
        .iter()
        .filter(|&&f| f == SampleFlag::LeftDomain)
        .count();
    report.checks.push(CheckResult::below(
        "left_domain_fraction",
        left_domain as f64 / ensemble.len() as f64,
        1e-12,
    ));

    std::fs::write(
        ctx.path("equivariance.json"),
        serde_json::to_string(&reports)?,
    )?;
    report.outputs.push("equivariance.json".into());
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
