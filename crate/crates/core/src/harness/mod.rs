//! Experiment runner and command-line front end.
//!
//! Each experiment evaluates one statistic per `(grid point, replication)`,
//! seeded from the master seed and the two counters, and appends one aggregate
//! row per grid point. Output is CSV with the columns of [`report::CSV_HEADER`].

pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{
    run_cvar_ratio, run_experiment, run_feasibility_factor, run_frechet_check, run_scenario_convergence,
    run_tail_ratio,
};
pub use report::{write_csv, ReportRow};
