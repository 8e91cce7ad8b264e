//! Experiment configuration, execution and reporting.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod io;
pub mod record;
pub mod report;
pub mod slope;

pub use bench::{run_timing_benchmark, TimingRow, TimingTable, DEFAULT_TIMING_REPEATS};
pub use config::{
    Estimator, ExperimentConfig, ExperimentKind, LambdaRule, LocalKernel, PartitionRule,
    ScheduleConfig, TaskConfig,
};
pub use experiment::{
    run_improved_bound_experiment, run_rate_experiment, ImprovedBoundReport, PairedComparison,
    RateReport, RateRow,
};
pub use record::{AnyModel, ModelRecord};
pub use report::{emit_improved_report, emit_report, read_improved_report, read_report};
pub use slope::{fit_loglog_slope, SlopeFit};
