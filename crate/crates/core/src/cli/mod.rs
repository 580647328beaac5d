//! Scenario files, the run pipeline and the property suite behind the
//! `weylstrat` binary.

mod config;
mod run;
mod verify;

use thiserror::Error;

pub use config::{
    ConfigError, GeometryConfig, GridConfig, InvariantConfig, OutputConfig, ParamValue, ScenarioConfig,
    ToleranceConfig, DEFAULT_DENSITY, MIN_DENSITY,
};
pub use run::{
    format_float, invariant_field_csv, level_sets_csv, run_scenario, strata_csv, CapsProvenance, KillingSummary,
    LevelSetSummary, RunOutcome, ScenarioReport, StratificationSummary, EXIT_CONFIG, EXIT_FLAGGED, EXIT_IO, EXIT_OK,
};
pub use verify::{
    fd_christoffel, fd_riemann, first_bianchi_residual, random_points, run_property, scalar_from_riemann,
    second_bianchi_residual, symmetry_residual, verify_suite, PropertyResult, VerifyOptions, VerifySummary,
    DEFAULT_FD_TOLERANCE, FD_STEP, FD_TOLERANCE_ENV, PROPERTIES,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) | CliError::Pipeline(_) => EXIT_IO,
        }
    }
}
