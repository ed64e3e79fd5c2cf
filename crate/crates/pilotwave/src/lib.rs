//! Numerical laboratory for pilot-wave quantum dynamics on desk-scale grids.
//!
//! The crate evolves wave functions with spectral and Crank–Nicolson
//! steppers, integrates guidance-law trajectories against those records,
//! verifies that trajectory ensembles transport the Born density, runs the
//! Lagrangian quantum-trajectory method that reconstructs the wave function
//! from particles alone, decomposes states into modulus and (multi-valued)
//! phase, and reproduces measurement statistics from finite-dimensional
//! pointer models and from positions alone.

pub mod error;
pub mod exchange;
pub mod parallel;

pub mod field;
pub mod guidance;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod polar;
pub mod potential;
pub mod qtm;
pub mod quantum_potential;
pub mod solver;
pub mod spectral;
pub mod trajectory;
pub mod wavefunction;

pub use error::{Error, Result};
pub use field::{Mask, MaskedScalarField, MaskedVectorField, ScalarField, VectorField};
pub use grid::{make_grid, Boundary, Grid};
pub use guidance::{probability_current, velocity_field, Interpolation, VelocityProbe};
pub use exchange::{
    flow_equivariance_check, min_pair_separation, permutations, swap_blocks, symmetrize,
    unordered_view, velocity_exchange_check, ExchangeReport, ExchangeScope, ExchangeSymmetry,
};
pub use measurement::{
    born_from_trajectories, cnot_model, evolve_model, extract_povm, model_from_pointer_coupling, pointer_probability,
    projective_observable, random_model, weak_coupling_model, MeasurementModel,
    MeasurementModelFile, Povm, ProjectiveOutcome,
};
pub use measurement::{BornBridgeSpec, BornReport};
pub use polar::{
    fundamental_loop, hamilton_jacobi_residuals, polar_decompose, winding_number, BranchJump,
    HjResiduals, PhaseField,
};
pub use potential::PotentialSpec;
pub use qtm::{
    estimate_density, qtm_init, qtm_run, qtm_step, reconstruct_wavefunction, BandwidthRule,
    QtmOptions, QtmState, QtmStepper, ReconstructedWave,
};
pub use quantum_potential::{
    classicality_indicator, integrate_newton, newton_residual, newton_residual_batch,
    quantum_potential, NewtonResidualReport, NewtonTrajectory,
};
pub use solver::{evolve, BField, EvolutionRecord, MagneticSpec, Method, RecordSampler};
pub use trajectory::{
    empirical_density, equivariance_distance, integrate_trajectory, propagate_ensemble,
    sample_initial, tv_distance_binned, Ensemble, PropagateOptions, SampleFlag, Trajectory,
};
pub use wavefunction::{gaussian_packet, inner_product, with_spinor, WaveFunction};
