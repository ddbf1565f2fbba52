//! Experiment runners tying the detector and the migration loop to a
//! scenario, plus report emission.

mod detection;
mod migration;
mod pipeline;
mod report;
mod scenario;

pub use detection::{run_detection_experiment, DetectionConfig, DetectionRow};
pub use migration::{
    run_migration_experiment, run_simulation, single_handover_trace, summarize_migrations,
    MigrationExperiment, MigrationSummary, SimulationOutput, Variant,
};
pub use pipeline::{
    clean_training_dataset, test_dataset, train_model, training_dataset, tune, TrainingInjection,
    TuneOutcome,
};
pub use report::{
    emit_report, read_detection_csv, read_gap_csv, read_latency_csv, read_migration_summary_csv,
    write_detection_csv, GapStats, Report, REPORT_FILES,
};
pub use scenario::{
    params_from_toml, params_to_toml, DetectionSection, HpoSection, Scenario, TelemetrySection,
    DEFAULT_SCENARIO,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Bad scenario or inputs; the run never started.
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Runtime(_) => 3,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        ExperimentError::Runtime(e.to_string())
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ExperimentError {
            fn from(e: $t) -> Self {
                ExperimentError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    crate::telemetry::TelemetryError,
    crate::gbdt::GbdtError,
    crate::hpo::HpoError,
    crate::netsim::NetsimError,
    crate::edge::EdgeError,
    crate::orchestrator::OrchestratorError,
    std::io::Error
);

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Independent stream seed for `(base, tag, index)`.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    // FNV-1a over the tag, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = base ^ h ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
