//! Experiment orchestration, estimators, reproducible reporting and the
//! command-line interface.

mod cli;
mod experiments;
mod report;
pub mod stats;

pub use cli::{cli_main, SEED_ENV_VAR};
pub use experiments::{
    coupled_monotonicity_check, default_distance_schedule, render_edge_list, run_block_renorm,
    run_cluster_fraction, run_complete_graph_check, run_dense_density, run_distance_scaling,
    run_hierarchy_audit, DeltaEstimate, ExperimentConfig,
};
pub use report::{BoundComparison, Report, ReportFormat, SummaryRow, TrialRow, REPORT_SCHEMA_VERSION};
