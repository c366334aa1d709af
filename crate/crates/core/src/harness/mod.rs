//! Experiment drivers: Monte-Carlo ensembles, empirical CDFs, result files
//! and the worked examples.

mod cdf;
mod examples;
mod experiment;
mod output;

pub use cdf::{empirical_cdf, linear_grid};
pub use examples::{
    example_problem, reproduce_example, ExampleReport, ExampleRow, EXAMPLE_DUAL_STEP, EXAMPLE_GRID_STEP,
    REFERENCE_TOLERANCE,
};
pub use experiment::{
    run_experiment, run_trial, ExperimentOutcome, ExperimentSpec, SolverSpec, Summary, TrialRecord, UserSummary, LEADER,
};
pub use output::{
    cdf_file_name, format_float, summary_json, write_cdf_csv, write_outcome, write_trials_csv, SUMMARY_FILE,
    TRIALS_FILE,
};
