//! Experiment driver: configuration, observer metrics, the per-round time
//! model and CSV output.

mod config;
mod csv;
mod metrics;
mod runner;

pub use config::{
    AlgorithmConfig, ExperimentConfig, ProblemConfig, ProblemKind, TimeModel, TopologyConfig,
};
pub use csv::{emit_csv, parse_csv, CsvSink, CSV_HEADER};
pub use metrics::{decay_diagnostic, DecayDiagnostic, RoundMetrics};
pub use runner::{run_experiment, Experiment, ExperimentReport, Summary};
