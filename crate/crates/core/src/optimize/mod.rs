//! Configuration-selection algorithms.

mod controller;
mod oracle;
mod vote;

pub use controller::{
    run_controller, run_controller_in, ControllerParams, OptimizationReport, BATCH_OVERHEAD,
    FINAL_REPS, PROBE_REPS,
};
pub use oracle::{
    arbitrary_line_2approx, brute_force_opt, halfplane_config, halfplane_opt,
    partition_directions, surface_only_opt, BRUTE_FORCE_MAX_N,
};
pub use vote::{majority_vote, vote_counts, CenterStatistic};
