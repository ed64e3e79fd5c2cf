//! Scenario configuration: a single versioned JSON document per run.
//! Unknown fields are rejected and validation errors name the offending
//! field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pilotwave::qtm::BandwidthRule;
use pilotwave::{Boundary, Method};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub scenario: ScenarioSpec,
    pub seed: u64,
    pub grid: GridBlock,
    pub solver: SolverBlock,
    #[serde(default)]
    pub trajectory: Option<TrajectoryBlock>,
    #[serde(default)]
    pub qtm: Option<QtmBlock>,
    pub output: OutputBlock,
    /// Free-form provenance notes (parameter choices are artifact decisions,
    /// not prescribed anywhere).
    #[serde(default)]
    pub notes: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    FreeGaussian {
        sigma: f64,
    },
    BoostedGaussian {
        sigma: f64,
        wavevector: f64,
    },
    Harmonic {
        omega: f64,
        coherent_amplitude: f64,
    },
    TwoGaussianInterference {
        sigma: f64,
        separation: f64,
    },
    RingState {
        winding: i32,
    },
    SternGerlach {
        theta: f64,
        gradient: f64,
    },
    PointerMeasurement {
        weight0: f64,
    },
    TwoFermion {
        separation: f64,
        boost: f64,
    },
    TwoBoson {
        separation: f64,
        boost: f64,
    },
    QtmFreeGaussian {
        sigma: f64,
    },
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::FreeGaussian { .. } => "free_gaussian",
            ScenarioSpec::BoostedGaussian { .. } => "boosted_gaussian",
            ScenarioSpec::Harmonic { .. } => "harmonic",
            ScenarioSpec::TwoGaussianInterference { .. } => "two_gaussian_interference",
            ScenarioSpec::RingState { .. } => "ring_state",
            ScenarioSpec::SternGerlach { .. } => "stern_gerlach",
            ScenarioSpec::PointerMeasurement { .. } => "pointer_measurement",
            ScenarioSpec::TwoFermion { .. } => "two_fermion",
            ScenarioSpec::TwoBoson { .. } => "two_boson",
            ScenarioSpec::QtmFreeGaussian { .. } => "qtm_free_gaussian",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dims_per_particle: usize,
    pub particle_count: usize,
    pub points: Vec<usize>,
    pub extents: Vec<f64>,
    pub boundary: Boundary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub method: Method,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryBlock {
    pub n: usize,
    pub dt_traj: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QtmBlock {
    pub n: usize,
    pub dt: f64,
    pub bandwidth: BandwidthRule,
    /// Also run the 3x3 (n, dt) refinement lattice.
    #[serde(default)]
    pub refinement: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: String,
    #[serde(default = "default_true")]
    pub write_fields: bool,
    #[serde(default = "default_true")]
    pub write_trajectories: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// Parse or schema failure with a JSON path to the offending field.
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| ConfigError::Invalid(format!("{} (at {})", e.inner(), e.path())))?;
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ScenarioConfig) -> Result<(), ConfigError> {
    let fail = |field: &str, msg: String| Err(ConfigError::Invalid(format!("{field}: {msg}")));
    if config.schema != SCHEMA_VERSION {
        return fail("schema", format!("expected version {SCHEMA_VERSION}, got {}", config.schema));
    }
    let g = &config.grid;
    let dim = g.dims_per_particle * g.particle_count;
    if g.points.len() != dim || g.extents.len() != dim {
        return fail(
            "grid.points/extents",
            format!("need {dim} entries for d={} N={}", g.dims_per_particle, g.particle_count),
        );
    }
    if !(config.solver.dt > 0.0) {
        return fail("solver.dt", "must be positive".into());
    }
    if config.solver.t_final < 0.0 {
        return fail("solver.t_final", "must be nonnegative".into());
    }
    if config.solver.snapshot_stride == 0 {
        return fail("solver.snapshot_stride", "must be at least 1".into());
    }
    if let Some(t) = &config.trajectory {
        if t.n == 0 {
            return fail("trajectory.n", "must be at least 1".into());
        }
        if !(t.dt_traj > 0.0) {
            return fail("trajectory.dt_traj", "must be positive".into());
        }
    }
    if let Some(q) = &config.qtm {
        if q.n < 100 {
            return fail("qtm.n", "the particle method needs at least 100 points".into());
        }
        if !(q.dt > 0.0) {
            return fail("qtm.dt", "must be positive".into());
        }
    }
    if config.output.directory.is_empty() {
        return fail("output.directory", "must not be empty".into());
    }
    // Scenario-specific parameter sanity.
    match &config.scenario {
        ScenarioSpec::FreeGaussian { sigma }
        | ScenarioSpec::QtmFreeGaussian { sigma }
        | ScenarioSpec::BoostedGaussian { sigma, .. }
        | ScenarioSpec::TwoGaussianInterference { sigma, .. } => {
            if !(*sigma > 0.0) {
                return fail("scenario.sigma", "must be positive".into());
            }
        }
        ScenarioSpec::Harmonic { omega, .. } => {
            if !(*omega > 0.0) {
                return fail("scenario.omega", "must be positive".into());
            }
        }
        ScenarioSpec::RingState { winding } => {
            if *winding == 0 || winding.abs() > 8 {
                return fail("scenario.winding", "need 1 <= |winding| <= 8".into());
            }
        }
        ScenarioSpec::SternGerlach { theta, gradient } => {
            if !(0.0..=std::f64::consts::PI).contains(theta) {
                return fail("scenario.theta", "need 0 <= theta <= pi".into());
            }
            if *gradient == 0.0 {
                return fail("scenario.gradient", "must be nonzero".into());
            }
        }
        ScenarioSpec::PointerMeasurement { weight0 } => {
            if !(0.0..=1.0).contains(weight0) {
                return fail("scenario.weight0", "need 0 <= weight0 <= 1".into());
            }
        }
        ScenarioSpec::TwoFermion { separation, .. }
        | ScenarioSpec::TwoBoson { separation, .. } => {
            if !(*separation > 0.0) {
                return fail("scenario.separation", "must be positive".into());
            }
        }
    }
    // Scenario-block pairings.
    let needs_trajectories = !matches!(config.scenario, ScenarioSpec::RingState { .. });
    if needs_trajectories && config.trajectory.is_none() {
        return fail("trajectory", "this scenario integrates trajectories".into());
    }
    if matches!(config.scenario, ScenarioSpec::QtmFreeGaussian { .. }) && config.qtm.is_none() {
        return fail("qtm", "the particle-method scenario needs a qtm block".into());
    }
    Ok(())
}
